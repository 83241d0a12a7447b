use std::path::{Path, PathBuf};

use crate::acoustic::ModelConfig;
use crate::audioio::{Emotion, PruneConfig, RecordingCondition, SynthCorpusConfig};
use crate::error::{NsvError, Result};
use crate::features::{FrameConfig, N_MELS, VOICING_THRESHOLD};
use crate::io::read_text;
use crate::vocoder::HnmConfig;

/// Seeds for every random stage. Unset ones derive from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct Seeds {
    pub base: u64,
    pub corpus: Option<u64>,
    pub kmeans: Option<u64>,
    pub model: Option<u64>,
    pub train: Option<u64>,
    pub synth: Option<u64>,
    pub eval: Option<u64>,
}

impl Seeds {
    fn get(&self, explicit: Option<u64>, offset: u64) -> u64 {
        explicit.unwrap_or_else(|| self.base.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(offset))
    }
    pub fn corpus(&self) -> u64 {
        self.get(self.corpus, 1)
    }
    pub fn kmeans(&self) -> u64 {
        self.get(self.kmeans, 2)
    }
    pub fn model(&self) -> u64 {
        self.get(self.model, 3)
    }
    pub fn train(&self) -> u64 {
        self.get(self.train, 4)
    }
    pub fn synth(&self) -> u64 {
        self.get(self.synth, 5)
    }
    pub fn eval(&self) -> u64 {
        self.get(self.eval, 6)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub n_values: Vec<usize>,
    pub repeats: usize,
    /// Prepared dataset directory holding the reference clips; defaults to the workdir's own.
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub workdir: PathBuf,
    /// Directory with `manifest.tsv`; defaults to `<workdir>/corpus`.
    pub corpus_dir: Option<PathBuf>,
    /// Units TSV to use instead of the built-in quantizer.
    pub units_file: Option<PathBuf>,
    /// Pre-trained codebook for the built-in quantizer instead of fitting one on the corpus.
    pub codebook_file: Option<PathBuf>,
    /// Lowest mel bands fed to the built-in quantizer (all by default).
    /// Fewer bands make the units blind to band-limited recording channels.
    pub units_bands: usize,
    pub frame: FrameConfig,
    pub model: ModelConfig,
    pub hnm: HnmConfig,
    pub prune: PruneConfig,
    pub corpus_gen: SynthCorpusConfig,
    pub eval: EvalSettings,
    pub seeds: Seeds,
    pub voicing_threshold: f64,
    /// Use the source utterance's durations at synthesis instead of predicted ones.
    pub ground_truth_durations: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            workdir: PathBuf::from("work"),
            corpus_dir: None,
            units_file: None,
            codebook_file: None,
            units_bands: N_MELS,
            frame: FrameConfig::default(),
            model: ModelConfig::default(),
            hnm: HnmConfig::default(),
            prune: PruneConfig::default(),
            corpus_gen: SynthCorpusConfig::default(),
            eval: EvalSettings {
                n_values: vec![100, 1000],
                repeats: 10,
                reference: None,
            },
            seeds: Seeds {
                base: 0,
                corpus: None,
                kmeans: None,
                model: None,
                train: None,
                synth: None,
                eval: None,
            },
            voicing_threshold: VOICING_THRESHOLD,
            ground_truth_durations: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| NsvError::invalid(format!("bad value {v:?} for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(NsvError::invalid(format!("bad boolean {v:?} for {key}"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse(key, x)).collect()
}

impl PipelineConfig {
    pub fn corpus_dir(&self) -> PathBuf {
        self.corpus_dir.clone().unwrap_or_else(|| self.workdir.join("corpus"))
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.workdir.join("dataset")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.workdir.join("model.nsvm")
    }

    /// Applies one setting. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let opt_path = |v: &str| if v.is_empty() { None } else { Some(PathBuf::from(v)) };
        match key {
            "workdir" => self.workdir = PathBuf::from(v),
            "corpus_dir" => self.corpus_dir = opt_path(v),
            "units_file" => self.units_file = opt_path(v),
            "codebook_file" => self.codebook_file = opt_path(v),
            "units.bands" => self.units_bands = parse(key, v)?,
            "seed" => self.seeds.base = parse(key, v)?,
            "seed.corpus" => self.seeds.corpus = Some(parse(key, v)?),
            "seed.kmeans" => self.seeds.kmeans = Some(parse(key, v)?),
            "seed.model" => self.seeds.model = Some(parse(key, v)?),
            "seed.train" => self.seeds.train = Some(parse(key, v)?),
            "seed.synth" => self.seeds.synth = Some(parse(key, v)?),
            "seed.eval" => self.seeds.eval = Some(parse(key, v)?),
            "frame.hop_samples" => self.frame.hop_samples = parse(key, v)?,
            "frame.win_samples" => self.frame.win_samples = parse(key, v)?,
            "frame.fft_size" => self.frame.fft_size = parse(key, v)?,
            "voicing_threshold" => self.voicing_threshold = parse(key, v)?,
            "synth.ground_truth_durations" => self.ground_truth_durations = parse_bool(key, v)?,
            "hnm.max_harmonics" => self.hnm.max_harmonics = parse(key, v)?,
            "hnm.harmonic_gain" => self.hnm.harmonic_gain = parse(key, v)?,
            "hnm.noise_gain" => self.hnm.noise_gain = parse(key, v)?,
            "hnm.voiced_noise_db" => self.hnm.voiced_noise_db = parse(key, v)?,
            "hnm.fade_ms" => self.hnm.fade_ms = parse(key, v)?,
            "prune.silence_dbfs" => self.prune.silence_dbfs = parse(key, v)?,
            "prune.low_volume_dbfs" => self.prune.low_volume_dbfs = parse(key, v)?,
            "prune.excluded_emotions" => self.prune.excluded_emotions = parse_list::<Emotion>(key, v)?,
            "gen.n_speakers" => self.corpus_gen.n_speakers = parse(key, v)?,
            "gen.clips_per_speaker" => self.corpus_gen.clips_per_speaker = parse(key, v)?,
            "gen.min_duration_s" => self.corpus_gen.min_duration_s = parse(key, v)?,
            "gen.max_duration_s" => self.corpus_gen.max_duration_s = parse(key, v)?,
            "gen.emotions" => self.corpus_gen.emotions = parse_list::<Emotion>(key, v)?,
            "gen.f0_min_hz" => self.corpus_gen.f0_range_hz.0 = parse(key, v)?,
            "gen.f0_max_hz" => self.corpus_gen.f0_range_hz.1 = parse(key, v)?,
            "gen.band_limit_hz" => {
                // Alternate speakers between a band-limited and a fullband condition.
                self.corpus_gen.conditions = if v.is_empty() {
                    vec![RecordingCondition::default()]
                } else {
                    vec![
                        RecordingCondition {
                            cutoff_hz: Some(parse(key, v)?),
                            noise_dbfs: None,
                        },
                        RecordingCondition::default(),
                    ]
                };
            }
            "eval.n" => self.eval.n_values = parse_list(key, v)?,
            "eval.repeats" => self.eval.repeats = parse(key, v)?,
            "eval.reference" => self.eval.reference = opt_path(v),
            "model.n_speakers" => {
                return Err(NsvError::invalid("model.n_speakers is derived from the dataset"));
            }
            _ => {
                let owned = match key.strip_prefix("model.") {
                    Some(k) => self.model.set(k, v)?,
                    None => false,
                };
                if !owned {
                    return Err(NsvError::invalid(format!("unknown config key {key:?}")));
                }
            }
        }
        self.hnm.frame = self.frame;
        Ok(())
    }

    /// Parses `key=value` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| NsvError::Parse {
                line: i + 1,
                message: format!("expected key=value, found {line:?}"),
            })?;
            cfg.set(k.trim(), v).map_err(|e| NsvError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?).map_err(|e| e.context(format!("config {}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.hnm.validate()?;
        if self.hnm.frame != self.frame {
            return Err(NsvError::invalid("vocoder framing must match feature framing"));
        }
        let mut m = self.model.clone();
        m.n_speakers = m.n_speakers.max(1);
        m.validate()?;
        if self.units_bands == 0 || self.units_bands > N_MELS {
            return Err(NsvError::invalid(format!("units.bands must be in 1..={N_MELS}")));
        }
        if !(0.0..1.0).contains(&self.voicing_threshold) {
            return Err(NsvError::invalid("voicing_threshold must be in [0, 1)"));
        }
        if self.eval.n_values.is_empty() || self.eval.n_values.contains(&0) || self.eval.repeats == 0 {
            return Err(NsvError::invalid("eval.n and eval.repeats must be positive"));
        }
        Ok(())
    }
}
