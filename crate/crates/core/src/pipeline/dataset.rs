//! `prepare`: corpus -> pruned, resampled, analyzed and quantized dataset
//! directory, and the loader that turns it back into training items.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::PipelineConfig;
use crate::acoustic::{align_durations, TrainItem};
use crate::audioio::{load_clip, prune_corpus, read_manifest, resample, write_manifest, CorpusManifest, Emotion, PIPELINE_RATE};
use crate::error::{NsvError, Result, ResultExt};
use crate::features::{
    analyze, read_mel, read_pitch, scale_pitch, write_mel, write_pitch, MelSpectrogram, PitchContour, F0_MAX_HZ,
    F0_MIN_HZ,
};
use crate::io::{create_dir, read_text, write_bytes};
use crate::ppcodec::{from_text, rle_encode, to_text, PseudoPhonemeSequence};
use crate::units::{format_units_tsv, import_units, quantize, train_kmeans, Codebook, UnitSequence, N_UNITS};

const PP_HEADER: &str = "utterance_id\tspeaker_id\ttext\tdurations\tframe_rate_hz";

/// One pseudo-phoneme TSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct PpRecord {
    pub utterance_id: String,
    pub speaker_id: String,
    pub pp: PseudoPhonemeSequence,
}

pub fn format_pp_tsv(records: &[PpRecord]) -> Result<String> {
    let mut s = format!("{PP_HEADER}\n");
    for r in records {
        let durations: Vec<String> = r.pp.durations.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            r.utterance_id,
            r.speaker_id,
            to_text(&r.pp)?,
            durations.join(","),
            r.pp.frame_rate_hz
        );
    }
    Ok(s)
}

pub fn parse_pp_tsv(text: &str) -> Result<Vec<PpRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || (i == 0 && line == PP_HEADER) {
            continue;
        }
        let err = |message: String| NsvError::Parse { line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(err(format!("expected 5 columns, found {}", cols.len())));
        }
        let units = from_text(cols[2]).map_err(|e| err(e.to_string()))?;
        let durations = cols[3]
            .split(',')
            .filter(|d| !d.is_empty())
            .map(|d| d.parse::<u32>().map_err(|_| err(format!("bad duration {d:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let rate = cols[4].parse::<u32>().map_err(|_| err(format!("bad frame rate {:?}", cols[4])))?;
        let pp = PseudoPhonemeSequence::new(units, durations, rate).map_err(|e| err(e.to_string()))?;
        out.push(PpRecord {
            utterance_id: cols[0].to_string(),
            speaker_id: cols[1].to_string(),
            pp,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetReport {
    pub clips_in: usize,
    pub clips_kept: usize,
    pub pruned: BTreeMap<String, usize>,
    pub total_duration_s: f64,
    pub speaker_clips: BTreeMap<String, usize>,
    pub units_source: String,
    /// Utterances whose aligned durations, mel rows and pitch frames disagree.
    pub alignment_violations: usize,
    /// Utterances whose final duration was padded or trimmed to fit the mel.
    pub alignment_adjusted: usize,
}

impl DatasetReport {
    pub fn pruned_total(&self) -> usize {
        self.pruned.values().sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("key\tvalue\n");
        let _ = writeln!(s, "clips_in\t{}", self.clips_in);
        let _ = writeln!(s, "clips_kept\t{}", self.clips_kept);
        let _ = writeln!(s, "pruned_total\t{}", self.pruned_total());
        for (reason, n) in &self.pruned {
            let _ = writeln!(s, "pruned.{reason}\t{n}");
        }
        let _ = writeln!(s, "total_duration_s\t{:.3}", self.total_duration_s);
        let _ = writeln!(s, "speakers\t{}", self.speaker_clips.len());
        for (spk, n) in &self.speaker_clips {
            let _ = writeln!(s, "speaker.{spk}\t{n}");
        }
        let _ = writeln!(s, "units_source\t{}", self.units_source);
        let _ = writeln!(s, "alignment_violations\t{}", self.alignment_violations);
        let _ = writeln!(s, "alignment_adjusted\t{}", self.alignment_adjusted);
        s
    }
}

fn mel_path(dir: &Path, utt: &str) -> PathBuf {
    dir.join("mel").join(format!("{utt}.melf"))
}

fn pitch_path(dir: &Path, utt: &str) -> PathBuf {
    dir.join("pitch").join(format!("{utt}.pitf"))
}

/// Builds `<workdir>/dataset`: pruned manifest, MELF/PITF features, Units
/// TSV, pseudo-phoneme TSV and `report.tsv`. Re-running rewrites identical files.
pub fn prepare(cfg: &PipelineConfig) -> Result<DatasetReport> {
    let manifest_path = cfg.corpus_dir().join("manifest.tsv");
    let manifest = read_manifest(&manifest_path)?;
    let pruned = prune_corpus(&manifest, &cfg.prune)?;
    let out = cfg.dataset_dir();
    for sub in ["mel", "pitch"] {
        let d = out.join(sub);
        if d.exists() {
            std::fs::remove_dir_all(&d).map_err(|e| NsvError::io(&d, e))?;
        }
        create_dir(&d)?;
    }

    let mut report = DatasetReport {
        clips_in: manifest.entries.len(),
        clips_kept: pruned.entries.len(),
        ..DatasetReport::default()
    };
    for (_, reason) in pruned.prune_log.iter().skip(manifest.prune_log.len()) {
        *report.pruned.entry(reason.to_string()).or_default() += 1;
    }

    let mut mels = Vec::with_capacity(pruned.entries.len());
    for e in &pruned.entries {
        let clip = load_clip(&pruned, e)
            .and_then(|c| resample(&c, PIPELINE_RATE))
            .context(|| format!("utterance {}", e.utterance_id))?;
        let (mel, pitch) = analyze(&clip, &cfg.frame).context(|| format!("utterance {}", e.utterance_id))?;
        write_mel(&mel_path(&out, &e.utterance_id), &mel)?;
        write_pitch(&pitch_path(&out, &e.utterance_id), &pitch)?;
        report.total_duration_s += clip.duration_s();
        *report.speaker_clips.entry(e.speaker_id.clone()).or_default() += 1;
        mels.push((mel, pitch.len()));
    }

    let mel_rate = cfg.frame.frame_rate_hz();
    let units: Vec<UnitSequence> = if let Some(path) = &cfg.units_file {
        report.units_source = format!("import:{}", path.display());
        let mut imported = import_units(path)?;
        pruned
            .entries
            .iter()
            .map(|e| {
                imported.remove(&e.utterance_id).ok_or_else(|| {
                    NsvError::Validation(format!("{} has no row in {}", e.utterance_id, path.display()))
                })
            })
            .collect::<Result<_>>()?
    } else {
        let bands = cfg.units_bands;
        let codebook = match &cfg.codebook_file {
            Some(path) => {
                report.units_source = format!("codebook:{}", path.display());
                Codebook::load(path)?
            }
            None => {
                report.units_source = "kmeans".into();
                let frames: Vec<&[f64]> = mels.iter().flat_map(|(m, _)| m.rows().map(|r| &r[..bands])).collect();
                train_kmeans(&frames, N_UNITS, mel_rate, cfg.seeds.kmeans())?
            }
        };
        if codebook.frame_rate_hz != mel_rate {
            return Err(NsvError::invalid(format!(
                "codebook rate {} Hz differs from mel rate {mel_rate} Hz",
                codebook.frame_rate_hz
            )));
        }
        codebook.save(&out.join("codebook.cdbk"))?;
        pruned
            .entries
            .iter()
            .zip(&mels)
            .map(|(e, (m, _))| quantize(&m.rows().map(|r| &r[..bands]).collect::<Vec<_>>(), &codebook, &e.utterance_id))
            .collect::<Result<_>>()?
    };
    let units_rate = units.first().map(|u| u.frame_rate_hz).unwrap_or(mel_rate);
    write_bytes(&out.join("units.tsv"), format_units_tsv(&units, units_rate).as_bytes())?;

    let mut records = Vec::with_capacity(units.len());
    for ((e, u), (mel, pitch_frames)) in pruned.entries.iter().zip(&units).zip(&mels) {
        let pp = rle_encode(u);
        match align_durations(&pp, mel_rate, Some(mel.frames)) {
            Ok(d) => {
                let sum: usize = d.iter().map(|&v| v as usize).sum();
                if sum != mel.frames || mel.frames != *pitch_frames {
                    report.alignment_violations += 1;
                }
                let scaled: usize = pp.total_frames() * (mel_rate / pp.frame_rate_hz) as usize;
                if scaled != mel.frames {
                    report.alignment_adjusted += 1;
                }
            }
            Err(_) => report.alignment_violations += 1,
        }
        records.push(PpRecord {
            utterance_id: e.utterance_id.clone(),
            speaker_id: e.speaker_id.clone(),
            pp,
        });
    }
    write_bytes(&out.join("pp.tsv"), format_pp_tsv(&records)?.as_bytes())?;
    let mut kept = pruned.clone();
    kept.root = cfg.corpus_dir();
    write_manifest(&out.join("manifest.tsv"), &kept)?;
    write_bytes(&out.join("report.tsv"), report.to_tsv().as_bytes())?;
    Ok(report)
}

/// A prepared utterance with its features loaded.
#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub utterance_id: String,
    pub speaker_id: String,
    pub emotion: Emotion,
    pub pp: PseudoPhonemeSequence,
    pub mel: MelSpectrogram,
    pub pitch: PitchContour,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub items: Vec<DatasetItem>,
    /// Sorted speaker ids; a speaker's position is its embedding row.
    pub speakers: Vec<String>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: CorpusManifest = read_manifest(&dir.join("manifest.tsv"))?;
        let emotions: BTreeMap<&str, Emotion> = manifest
            .entries
            .iter()
            .map(|e| (e.utterance_id.as_str(), e.emotion))
            .collect();
        let records = parse_pp_tsv(&read_text(&dir.join("pp.tsv"))?).context(|| "pp.tsv".to_string())?;
        if records.is_empty() {
            return Err(NsvError::EmptyCorpus(format!("{} holds no utterances", dir.display())));
        }
        let mut items = Vec::with_capacity(records.len());
        for r in records {
            let emotion = *emotions.get(r.utterance_id.as_str()).ok_or_else(|| {
                NsvError::Validation(format!("{} is missing from the dataset manifest", r.utterance_id))
            })?;
            let mel = read_mel(&mel_path(dir, &r.utterance_id))?;
            let pitch = read_pitch(&pitch_path(dir, &r.utterance_id))?;
            items.push(DatasetItem {
                utterance_id: r.utterance_id,
                speaker_id: r.speaker_id,
                emotion,
                pp: r.pp,
                mel,
                pitch,
            });
        }
        let mut speakers: Vec<String> = items.iter().map(|i| i.speaker_id.clone()).collect();
        speakers.sort();
        speakers.dedup();
        Ok(Self {
            dir: dir.to_path_buf(),
            items,
            speakers,
        })
    }

    pub fn speaker_index(&self, speaker: &str) -> Option<usize> {
        self.speakers.binary_search_by(|s| s.as_str().cmp(speaker)).ok()
    }

    pub fn item(&self, utterance_id: &str) -> Option<&DatasetItem> {
        self.items.iter().find(|i| i.utterance_id == utterance_id)
    }

    /// Durations at the mel rate, summing to the item's mel rows.
    pub fn aligned_durations(&self, item: &DatasetItem) -> Result<Vec<u32>> {
        align_durations(&item.pp, item.mel.frame_config.frame_rate_hz(), Some(item.mel.frames))
            .context(|| item.utterance_id.clone())
    }

    pub fn train_items(&self) -> Result<Vec<TrainItem>> {
        self.items
            .iter()
            .map(|it| {
                if it.pitch.len() != it.mel.frames {
                    return Err(NsvError::Validation(format!(
                        "{}: {} pitch frames for {} mel rows",
                        it.utterance_id,
                        it.pitch.len(),
                        it.mel.frames
                    )));
                }
                Ok(TrainItem {
                    utterance_id: it.utterance_id.clone(),
                    units: it.pp.units.clone(),
                    durations: self.aligned_durations(it)?,
                    speaker: self.speaker_index(&it.speaker_id).expect("speaker list built from items"),
                    mel: it.mel.values.clone(),
                    pitch: scale_pitch(&it.pitch, F0_MIN_HZ, F0_MAX_HZ)?,
                    voiced: it.pitch.voiced.clone(),
                })
            })
            .collect()
    }
}
