//! Corpus manifests (TSV) and the pruning rules applied before feature extraction.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use super::{read_wav, rms, to_dbfs, AudioClip, Emotion};
use crate::error::{NsvError, Result};
use crate::io::{read_text, write_bytes};

const MANIFEST_HEADER: &str = "utterance_id\tspeaker_id\temotion\tpath\tduration_s";
const PRUNE_HEADER: &str = "utterance_id\treason";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub speaker_id: String,
    pub emotion: Emotion,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PruneReason {
    ExcludedEmotion,
    LowVolumeSpeaker,
    Silent,
}

impl PruneReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            PruneReason::ExcludedEmotion => "excluded-emotion",
            PruneReason::LowVolumeSpeaker => "low-volume-speaker",
            PruneReason::Silent => "silent",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [PruneReason::ExcludedEmotion, PruneReason::LowVolumeSpeaker, PruneReason::Silent]
            .into_iter()
            .find(|r| r.as_str() == s)
    }
}

impl fmt::Display for PruneReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    pub prune_log: Vec<(String, PruneReason)>,
    /// Directory relative entry paths resolve against.
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn new(entries: Vec<ManifestEntry>, root: impl Into<PathBuf>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.utterance_id.as_str()) {
                return Err(NsvError::Validation(format!("duplicate utterance_id {}", e.utterance_id)));
            }
        }
        Ok(Self {
            entries,
            prune_log: Vec::new(),
            root: root.into(),
        })
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.root.join(&entry.path)
        }
    }

    pub fn speakers(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| e.speaker_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Reads `manifest.tsv` and, when present, the sibling `prune_log.tsv`.
pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = read_text(path)?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || (i == 0 && line == MANIFEST_HEADER) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(NsvError::Parse {
                line: line_no,
                message: format!("expected 5 columns, found {}", cols.len()),
            });
        }
        let emotion = cols[2].parse::<Emotion>().map_err(|e| NsvError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let duration_s = cols[4].parse::<f64>().map_err(|_| NsvError::Parse {
            line: line_no,
            message: format!("invalid duration {:?}", cols[4]),
        })?;
        entries.push(ManifestEntry {
            utterance_id: cols[0].to_string(),
            speaker_id: cols[1].to_string(),
            emotion,
            path: PathBuf::from(cols[3]),
            duration_s,
        });
    }
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut manifest = CorpusManifest::new(entries, root)?;
    let log_path = path.with_file_name("prune_log.tsv");
    if log_path.exists() {
        for (i, line) in read_text(&log_path)?.lines().enumerate() {
            if line.trim().is_empty() || (i == 0 && line == PRUNE_HEADER) {
                continue;
            }
            let (utt, reason) = line.split_once('\t').ok_or_else(|| NsvError::Parse {
                line: i + 1,
                message: "expected utterance_id<TAB>reason".into(),
            })?;
            let reason = PruneReason::parse(reason).ok_or_else(|| NsvError::Parse {
                line: i + 1,
                message: format!("unknown prune reason {reason:?}"),
            })?;
            manifest.prune_log.push((utt.to_string(), reason));
        }
    }
    Ok(manifest)
}

/// Writes `manifest.tsv` at `path` plus `prune_log.tsv` next to it.
pub fn write_manifest(path: &Path, manifest: &CorpusManifest) -> Result<()> {
    let mut s = format!("{MANIFEST_HEADER}\n");
    for e in &manifest.entries {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{:.6}",
            e.utterance_id,
            e.speaker_id,
            e.emotion,
            e.path.display(),
            e.duration_s
        );
    }
    write_bytes(path, s.as_bytes())?;
    let mut log = format!("{PRUNE_HEADER}\n");
    for (utt, reason) in &manifest.prune_log {
        let _ = writeln!(log, "{utt}\t{reason}");
    }
    write_bytes(&path.with_file_name("prune_log.tsv"), log.as_bytes())
}

/// Loads the audio for a manifest entry and attaches its metadata.
pub fn load_clip(manifest: &CorpusManifest, entry: &ManifestEntry) -> Result<AudioClip> {
    let mut clip = read_wav(&manifest.resolve(entry))?;
    clip.utterance_id = entry.utterance_id.clone();
    clip.speaker_id = entry.speaker_id.clone();
    clip.emotion = entry.emotion;
    Ok(clip)
}

pub fn clip_rms_dbfs(clip: &AudioClip) -> f64 {
    to_dbfs(rms(&clip.samples))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneConfig {
    /// Clips whose RMS is below this level are silent.
    pub silence_dbfs: f64,
    /// Speakers whose every remaining clip is below this level are dropped entirely.
    pub low_volume_dbfs: f64,
    pub excluded_emotions: Vec<Emotion>,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            silence_dbfs: -40.0,
            low_volume_dbfs: -35.0,
            excluded_emotions: vec![Emotion::Triumph, Emotion::Horror],
        }
    }
}

/// Applies the pruning rules given each entry's measured RMS level.
///
/// Rules run in order (excluded emotion, low-volume speaker, silence), each
/// over the survivors of the previous one, which makes the result a fixed
/// point: pruning the output again removes nothing.
pub fn prune_entries(
    manifest: &CorpusManifest,
    levels_dbfs: &BTreeMap<String, f64>,
    rules: &PruneConfig,
) -> Result<CorpusManifest> {
    let mut removed: Vec<(String, PruneReason)> = Vec::new();
    let level = |e: &ManifestEntry| -> Result<f64> {
        levels_dbfs
            .get(&e.utterance_id)
            .copied()
            .ok_or_else(|| NsvError::invalid(format!("no level measured for {}", e.utterance_id)))
    };

    let mut keep: Vec<&ManifestEntry> = Vec::new();
    for e in &manifest.entries {
        if rules.excluded_emotions.contains(&e.emotion) {
            removed.push((e.utterance_id.clone(), PruneReason::ExcludedEmotion));
        } else {
            keep.push(e);
        }
    }

    let mut speaker_loud: BTreeMap<&str, bool> = BTreeMap::new();
    for e in &keep {
        let loud = level(e)? >= rules.low_volume_dbfs;
        *speaker_loud.entry(e.speaker_id.as_str()).or_insert(false) |= loud;
    }
    let mut survivors: Vec<&ManifestEntry> = Vec::new();
    for e in keep {
        if speaker_loud[e.speaker_id.as_str()] {
            survivors.push(e);
        } else {
            removed.push((e.utterance_id.clone(), PruneReason::LowVolumeSpeaker));
        }
    }

    let mut entries = Vec::new();
    for e in survivors {
        if level(e)? < rules.silence_dbfs {
            removed.push((e.utterance_id.clone(), PruneReason::Silent));
        } else {
            entries.push(e.clone());
        }
    }
    if entries.is_empty() {
        return Err(NsvError::EmptyCorpus(format!(
            "pruning removed all {} clips",
            manifest.entries.len()
        )));
    }
    let mut prune_log = manifest.prune_log.clone();
    prune_log.extend(removed);
    Ok(CorpusManifest {
        entries,
        prune_log,
        root: manifest.root.clone(),
    })
}

/// Measures every clip's level from disk, then applies [`prune_entries`].
pub fn prune_corpus(manifest: &CorpusManifest, rules: &PruneConfig) -> Result<CorpusManifest> {
    let mut levels = BTreeMap::new();
    for e in &manifest.entries {
        let clip = load_clip(manifest, e).map_err(|err| err.context(e.utterance_id.clone()))?;
        levels.insert(e.utterance_id.clone(), clip_rms_dbfs(&clip));
    }
    prune_entries(manifest, &levels, rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audioio::write_wav;

    fn entry(utt: &str, spk: &str, emotion: Emotion) -> ManifestEntry {
        ManifestEntry {
            utterance_id: utt.into(),
            speaker_id: spk.into(),
            emotion,
            path: PathBuf::from(format!("{utt}.wav")),
            duration_s: 1.0,
        }
    }

    #[test]
    fn six_silent_of_hundred() {
        let mut entries = Vec::new();
        let mut levels = BTreeMap::new();
        for i in 0..100 {
            let utt = format!("u{i:03}");
            entries.push(entry(&utt, &format!("s{}", i % 10), Emotion::Amusement));
            levels.insert(utt, if i < 6 { -60.0 } else { -20.0 });
        }
        let m = CorpusManifest::new(entries, "").unwrap();
        let p = prune_entries(&m, &levels, &PruneConfig::default()).unwrap();
        assert_eq!(p.entries.len(), 94);
        assert_eq!(p.prune_log.len(), 6);
        assert!(p.prune_log.iter().all(|(_, r)| *r == PruneReason::Silent));
        let again = prune_entries(&p, &levels, &PruneConfig::default()).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn excluded_emotion_and_quiet_speaker() {
        let entries = vec![
            entry("a", "s1", Emotion::Triumph),
            entry("b", "s1", Emotion::Amusement),
            entry("c", "s2", Emotion::Awe),
            entry("d", "s2", Emotion::Awe),
            entry("e", "s2", Emotion::Awe),
            entry("f", "s3", Emotion::Horror),
        ];
        let levels: BTreeMap<String, f64> = [("a", -10.0), ("b", -10.0), ("c", -50.0), ("d", -50.0), ("e", -50.0), ("f", -10.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let m = CorpusManifest::new(entries, "").unwrap();
        let p = prune_entries(&m, &levels, &PruneConfig::default()).unwrap();
        assert_eq!(p.entries.iter().map(|e| e.utterance_id.as_str()).collect::<Vec<_>>(), vec!["b"]);
        let log: BTreeMap<&str, PruneReason> = p.prune_log.iter().map(|(u, r)| (u.as_str(), *r)).collect();
        assert_eq!(log["a"], PruneReason::ExcludedEmotion);
        assert_eq!(log["a"].as_str(), "excluded-emotion");
        assert_eq!(log["f"], PruneReason::ExcludedEmotion);
        for u in ["c", "d", "e"] {
            assert_eq!(log[u], PruneReason::LowVolumeSpeaker);
        }
    }

    #[test]
    fn everything_pruned_is_an_error() {
        let m = CorpusManifest::new(vec![entry("a", "s", Emotion::Triumph)], "").unwrap();
        let levels = BTreeMap::from([("a".to_string(), 0.0)]);
        assert!(matches!(
            prune_entries(&m, &levels, &PruneConfig::default()),
            Err(NsvError::EmptyCorpus(_))
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = entry("a", "s", Emotion::Awe);
        assert!(CorpusManifest::new(vec![e.clone(), e], "").is_err());
    }

    #[test]
    fn manifest_files_and_disk_pruning() {
        let dir = tempfile::tempdir().unwrap();
        write_wav(&dir.path().join("loud.wav"), &vec![0.3; 3200], 32000).unwrap();
        write_wav(&dir.path().join("quiet.wav"), &vec![0.0; 3200], 32000).unwrap();
        let m = CorpusManifest::new(
            vec![entry("loud", "s1", Emotion::Amusement), entry("quiet", "s1", Emotion::Amusement)],
            dir.path(),
        )
        .unwrap();
        let mpath = dir.path().join("manifest.tsv");
        write_manifest(&mpath, &m).unwrap();
        let back = read_manifest(&mpath).unwrap();
        assert_eq!(back, m);

        let pruned = prune_corpus(&back, &PruneConfig::default()).unwrap();
        assert_eq!(pruned.entries.len(), 1);
        assert_eq!(pruned.prune_log, vec![("quiet".to_string(), PruneReason::Silent)]);
        write_manifest(&mpath, &pruned).unwrap();
        assert_eq!(read_manifest(&mpath).unwrap(), pruned);
        assert_eq!(prune_corpus(&pruned, &PruneConfig::default()).unwrap(), pruned);
    }

    #[test]
    fn malformed_manifest_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.tsv");
        std::fs::write(&p, format!("{MANIFEST_HEADER}\na\ts\tAwe\ta.wav\t1.0\nb\ts\tAwe\n")).unwrap();
        assert!(matches!(read_manifest(&p), Err(NsvError::Parse { line: 3, .. })));
    }
}
