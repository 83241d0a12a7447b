use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{sigmoid, Linear, ResBlock, ResCache};
use super::tensor::{ParamSet, Tensor};
use crate::error::{NsvError, Result};
use crate::features::N_MELS;
use crate::ppcodec::PseudoPhonemeSequence;
use crate::units::N_UNITS;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub conv_channels: usize,
    pub kernel_size: usize,
    /// Dilation per residual block, shared by encoder and decoder stacks.
    pub dilations: Vec<usize>,
    /// Residual blocks in the duration predictor (dilation 1).
    pub duration_blocks: usize,
    pub n_speakers: usize,
    pub n_units: usize,
    pub mel_bins: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_steps: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 128,
            conv_channels: 128,
            kernel_size: 3,
            dilations: vec![1, 2, 4, 1, 2, 4],
            duration_blocks: 2,
            n_speakers: 1,
            n_units: N_UNITS,
            mel_bins: N_MELS,
            dropout: 0.1,
            learning_rate: 1e-3,
            batch_size: 8,
            max_steps: 2000,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("conv_channels", self.conv_channels),
            ("kernel_size", self.kernel_size),
            ("n_speakers", self.n_speakers),
            ("mel_bins", self.mel_bins),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(NsvError::invalid(format!("{name} must be positive")));
        }
        if self.kernel_size % 2 == 0 {
            return Err(NsvError::invalid("kernel_size must be odd for same padding"));
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return Err(NsvError::invalid("dilations must be nonempty and positive"));
        }
        if self.n_units != N_UNITS {
            return Err(NsvError::invalid(format!("n_units must be {N_UNITS}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NsvError::invalid("dropout must be in [0, 1)"));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(NsvError::invalid("learning_rate must be nonnegative"));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let dil: Vec<String> = self.dilations.iter().map(|d| d.to_string()).collect();
        BTreeMap::from([
            ("embed_dim".into(), self.embed_dim.to_string()),
            ("conv_channels".into(), self.conv_channels.to_string()),
            ("kernel_size".into(), self.kernel_size.to_string()),
            ("dilations".into(), dil.join(",")),
            ("duration_blocks".into(), self.duration_blocks.to_string()),
            ("n_speakers".into(), self.n_speakers.to_string()),
            ("n_units".into(), self.n_units.to_string()),
            ("mel_bins".into(), self.mel_bins.to_string()),
            ("dropout".into(), self.dropout.to_string()),
            ("learning_rate".into(), self.learning_rate.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("max_steps".into(), self.max_steps.to_string()),
        ])
    }

    /// Applies one `key=value` setting; returns `false` for keys this config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| NsvError::invalid(format!("bad value {v:?} for {key}")))
        }
        match key {
            "embed_dim" => self.embed_dim = num(key, value)?,
            "conv_channels" => self.conv_channels = num(key, value)?,
            "kernel_size" => self.kernel_size = num(key, value)?,
            "dilations" => {
                self.dilations = value.split(',').map(|v| num(key, v)).collect::<Result<Vec<_>>>()?;
            }
            "duration_blocks" => self.duration_blocks = num(key, value)?,
            "n_speakers" => self.n_speakers = num(key, value)?,
            "n_units" => self.n_units = num(key, value)?,
            "mel_bins" => self.mel_bins = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "max_steps" => self.max_steps = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// One training utterance: pseudo-phonemes with mel-rate durations and frame targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub utterance_id: String,
    pub units: Vec<u16>,
    pub durations: Vec<u32>,
    pub speaker: usize,
    /// frames x mel_bins, row-major.
    pub mel: Vec<f64>,
    /// Scaled pitch in [0, 1].
    pub pitch: Vec<f64>,
    pub voiced: Vec<bool>,
}

impl TrainItem {
    pub fn frames(&self) -> usize {
        self.pitch.len()
    }

    pub fn validate(&self, mel_bins: usize) -> Result<()> {
        let frames: usize = self.durations.iter().map(|&d| d as usize).sum();
        if self.units.len() != self.durations.len() || self.units.is_empty() {
            return Err(NsvError::invalid(format!("{}: units and durations differ in length", self.utterance_id)));
        }
        if self.durations.contains(&0) {
            return Err(NsvError::Validation(format!("{}: zero duration", self.utterance_id)));
        }
        if self.mel.len() != frames * mel_bins || self.pitch.len() != frames || self.voiced.len() != frames {
            return Err(NsvError::invalid(format!(
                "{}: targets do not cover sum(durations) = {frames} frames",
                self.utterance_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Regulate with the supplied ground-truth durations.
    Train,
    /// Regulate with predicted durations.
    Infer,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    pub units: &'a [u16],
    pub speaker: usize,
    pub durations: Option<&'a [u32]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticOutput {
    /// frames x mel_bins, row-major.
    pub mel: Vec<f64>,
    pub pitch: Vec<f64>,
    /// Predicted `log(1 + d)` per pseudo-phoneme.
    pub log_duration: Vec<f64>,
    /// Durations actually used for length regulation.
    pub durations: Vec<u32>,
    pub frames: usize,
    pub mel_bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub mel_l1: f64,
    pub pitch_mse: f64,
    pub dur_mse: f64,
}

/// Repeats row `i` of a `[T, dim]` matrix `durations[i]` times.
pub fn length_regulate(rows: &[f64], dim: usize, durations: &[u32]) -> Result<Vec<f64>> {
    if rows.len() != durations.len() * dim {
        return Err(NsvError::invalid(format!(
            "{} rows but {} durations",
            rows.len() / dim.max(1),
            durations.len()
        )));
    }
    if let Some(i) = durations.iter().position(|&d| d == 0) {
        return Err(NsvError::Validation(format!("zero duration at position {i}")));
    }
    let total: usize = durations.iter().map(|&d| d as usize).sum();
    let mut out = Vec::with_capacity(total * dim);
    for (row, &d) in rows.chunks_exact(dim).zip(durations) {
        for _ in 0..d {
            out.extend_from_slice(row);
        }
    }
    Ok(out)
}

/// Rescales unit-rate durations to the mel frame rate. When `mel_frames` is
/// given, the tail is padded or trimmed so the sum matches it exactly.
pub fn align_durations(pp: &PseudoPhonemeSequence, mel_rate_hz: u32, mel_frames: Option<usize>) -> Result<Vec<u32>> {
    if pp.frame_rate_hz == 0 || mel_rate_hz % pp.frame_rate_hz != 0 {
        return Err(NsvError::UnsupportedFormat(format!(
            "unit rate {} Hz does not divide mel rate {mel_rate_hz} Hz",
            pp.frame_rate_hz
        )));
    }
    let factor = mel_rate_hz / pp.frame_rate_hz;
    let mut d: Vec<u32> = pp.durations.iter().map(|&v| v * factor).collect();
    let Some(target) = mel_frames else { return Ok(d) };
    if d.is_empty() {
        return if target == 0 {
            Ok(d)
        } else {
            Err(NsvError::Validation("no pseudo-phonemes to cover mel frames".into()))
        };
    }
    if target < d.len() {
        return Err(NsvError::Validation(format!(
            "{} pseudo-phonemes cannot fit in {target} mel frames",
            d.len()
        )));
    }
    let sum: usize = d.iter().map(|&v| v as usize).sum();
    if sum < target {
        *d.last_mut().unwrap() += (target - sum) as u32;
    } else {
        let mut excess = sum - target;
        for v in d.iter_mut().rev() {
            if excess == 0 {
                break;
            }
            let take = excess.min(*v as usize - 1);
            *v -= take as u32;
            excess -= take;
        }
    }
    Ok(d)
}

/// Inverts the `log(1 + d)` duration target: `max(1, round(exp(x) - 1))`.
pub fn predict_duration(log_duration: &[f64]) -> Vec<u32> {
    log_duration
        .iter()
        .map(|&x| {
            let d = (x.exp() - 1.0).round();
            if d.is_finite() && d >= 1.0 {
                d.min(u32::MAX as f64) as u32
            } else {
                1
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Layers {
    unit_emb: usize,
    spk_emb: usize,
    in_proj: Linear,
    encoder: Vec<ResBlock>,
    dur_blocks: Vec<ResBlock>,
    dur_out: Linear,
    decoder: Vec<ResBlock>,
    mel_head: Linear,
    pitch_head: Linear,
}

/// Convolutional acoustic model: encoder, duration predictor, length
/// regulator, decoder trunk and parallel mel / pitch heads.
#[derive(Debug, Clone)]
pub struct AcousticModel {
    pub config: ModelConfig,
    pub params: ParamSet,
    layers: Layers,
}

struct Cache {
    embedded: Vec<f64>,
    enc: Vec<ResCache>,
    dur: Vec<ResCache>,
    dur_hidden: Vec<f64>,
    dec: Vec<ResCache>,
    dec_out: Vec<f64>,
}

/// Standard deviation of the speaker embedding initialization.
const SPEAKER_INIT_STD: f64 = 0.05;
const UNIT_INIT_STD: f64 = 0.5;

impl AcousticModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::default();
        let c = config.conv_channels;
        let unit_emb = p.add("unit_embedding", Tensor::normal(&[config.n_units, config.embed_dim], UNIT_INIT_STD, &mut rng));
        let spk_emb = p.add(
            "speaker_embedding",
            Tensor::normal(&[config.n_speakers, config.embed_dim], SPEAKER_INIT_STD, &mut rng),
        );
        let in_proj = Linear::new(&mut p, "in_proj", config.embed_dim, c, &mut rng);
        let encoder = config
            .dilations
            .iter()
            .enumerate()
            .map(|(i, &d)| ResBlock::new(&mut p, &format!("encoder.{i}"), c, config.kernel_size, d, &mut rng))
            .collect();
        let dur_blocks = (0..config.duration_blocks)
            .map(|i| ResBlock::new(&mut p, &format!("duration.{i}"), c, config.kernel_size, 1, &mut rng))
            .collect();
        let dur_out = Linear::new(&mut p, "duration.out", c, 1, &mut rng);
        let decoder = config
            .dilations
            .iter()
            .enumerate()
            .map(|(i, &d)| ResBlock::new(&mut p, &format!("decoder.{i}"), c, config.kernel_size, d, &mut rng))
            .collect();
        let mel_head = Linear::new(&mut p, "mel_head", c, config.mel_bins, &mut rng);
        let pitch_head = Linear::new(&mut p, "pitch_head", c, 1, &mut rng);
        Ok(Self {
            config,
            params: p,
            layers: Layers {
                unit_emb,
                spk_emb,
                in_proj,
                encoder,
                dur_blocks,
                dur_out,
                decoder,
                mel_head,
                pitch_head,
            },
        })
    }

    /// Rebuilds a model around existing parameters, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        if model.params.names != params.names {
            return Err(NsvError::Validation("parameter names do not match the model layout".into()));
        }
        for (name, (a, b)) in params.names.iter().zip(model.params.tensors.iter().zip(&params.tensors)) {
            if a.shape != b.shape {
                return Err(NsvError::Validation(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    b.shape, a.shape
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    /// Rows of the learned speaker table.
    pub fn speaker_embeddings(&self) -> Vec<Vec<f64>> {
        self.params
            .get(self.layers.spk_emb)
            .chunks_exact(self.config.embed_dim)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Deterministic forward pass (no dropout).
    pub fn forward(&self, input: &ModelInput, mode: Mode) -> Result<AcousticOutput> {
        self.forward_cached(input, mode, None).map(|(o, _)| o)
    }

    fn forward_cached(
        &self,
        input: &ModelInput,
        mode: Mode,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(AcousticOutput, Cache)> {
        let cfg = &self.config;
        let l = &self.layers;
        let p = &self.params;
        if input.speaker >= cfg.n_speakers {
            return Err(NsvError::invalid(format!(
                "speaker index {} outside [0, {})",
                input.speaker, cfg.n_speakers
            )));
        }
        if input.units.is_empty() {
            return Err(NsvError::invalid("empty pseudo-phoneme sequence"));
        }
        if let Some(&u) = input.units.iter().find(|&&u| u as usize >= cfg.n_units) {
            return Err(NsvError::Range {
                index: u as usize,
                limit: cfg.n_units,
            });
        }
        let t_len = input.units.len();
        let e = cfg.embed_dim;
        let c = cfg.conv_channels;

        let unit_table = p.get(l.unit_emb);
        let spk = &p.get(l.spk_emb)[input.speaker * e..(input.speaker + 1) * e];
        let mut embedded = Vec::with_capacity(t_len * e);
        for &u in input.units {
            let row = &unit_table[u as usize * e..(u as usize + 1) * e];
            embedded.extend(row.iter().zip(spk).map(|(a, b)| a + b));
        }
        let enc_in = l.in_proj.forward(p, &embedded, t_len);

        let rate = cfg.dropout;
        let run_stack = |blocks: &[ResBlock], x: Vec<f64>, len: usize, rng: &mut Option<&mut ChaCha8Rng>| {
            let mut caches = Vec::with_capacity(blocks.len());
            let mut h = x;
            for b in blocks {
                let (y, cache) = b.forward(p, &h, len, rng.as_deref_mut().map(|r| (rate, r)));
                caches.push(cache);
                h = y;
            }
            (h, caches)
        };

        let (enc_out, enc_caches) = run_stack(&l.encoder, enc_in, t_len, &mut dropout_rng);
        let (dur_hidden, dur_caches) = run_stack(&l.dur_blocks, enc_out.clone(), t_len, &mut dropout_rng);
        let log_duration = l.dur_out.forward(p, &dur_hidden, t_len);

        let durations = match mode {
            Mode::Train => {
                let d = input
                    .durations
                    .ok_or_else(|| NsvError::invalid("train mode requires ground-truth durations"))?;
                if d.len() != t_len {
                    return Err(NsvError::invalid(format!("{} durations for {t_len} units", d.len())));
                }
                d.to_vec()
            }
            Mode::Infer => match input.durations {
                Some(d) => d.to_vec(),
                None => predict_duration(&log_duration),
            },
        };
        let regulated = length_regulate(&enc_out, c, &durations)?;
        let frames = regulated.len() / c;
        let (dec_out, dec_caches) = run_stack(&l.decoder, regulated, frames, &mut dropout_rng);
        let mel = l.mel_head.forward(p, &dec_out, frames);
        let pitch = l.pitch_head.forward(p, &dec_out, frames).into_iter().map(sigmoid).collect();
        Ok((
            AcousticOutput {
                mel,
                pitch,
                log_duration,
                durations,
                frames,
                mel_bins: cfg.mel_bins,
            },
            Cache {
                embedded,
                enc: enc_caches,
                dur: dur_caches,
                dur_hidden,
                dec: dec_caches,
                dec_out,
            },
        ))
    }

    fn backward(
        &self,
        input: &ModelInput,
        out: &AcousticOutput,
        cache: &Cache,
        d_mel: &[f64],
        d_pitch: &[f64],
        d_logdur: &[f64],
        grads: &mut ParamSet,
    ) {
        let l = &self.layers;
        let p = &self.params;
        let c = self.config.conv_channels;
        let e = self.config.embed_dim;
        let t_len = input.units.len();
        let frames = out.frames;

        let d_pitch_logit: Vec<f64> = d_pitch.iter().zip(&out.pitch).map(|(g, s)| g * s * (1.0 - s)).collect();
        let mut d_dec = l.mel_head.backward(p, grads, &cache.dec_out, d_mel, frames);
        let d_dec_pitch = l.pitch_head.backward(p, grads, &cache.dec_out, &d_pitch_logit, frames);
        for (a, b) in d_dec.iter_mut().zip(&d_dec_pitch) {
            *a += b;
        }
        for (block, bc) in l.decoder.iter().zip(&cache.dec).rev() {
            d_dec = block.backward(p, grads, bc, &d_dec, frames);
        }
        // Length regulator: sum the frame gradients back onto their source row.
        let mut d_enc = vec![0.0; t_len * c];
        let mut frame = 0;
        for (i, &d) in out.durations.iter().enumerate() {
            for _ in 0..d {
                for (a, b) in d_enc[i * c..(i + 1) * c].iter_mut().zip(&d_dec[frame * c..(frame + 1) * c]) {
                    *a += b;
                }
                frame += 1;
            }
        }
        let mut d_dur = l.dur_out.backward(p, grads, &cache.dur_hidden, d_logdur, t_len);
        for (block, bc) in l.dur_blocks.iter().zip(&cache.dur).rev() {
            d_dur = block.backward(p, grads, bc, &d_dur, t_len);
        }
        for (a, b) in d_enc.iter_mut().zip(&d_dur) {
            *a += b;
        }
        for (block, bc) in l.encoder.iter().zip(&cache.enc).rev() {
            d_enc = block.backward(p, grads, bc, &d_enc, t_len);
        }
        let d_emb = l.in_proj.backward(p, grads, &cache.embedded, &d_enc, t_len);
        {
            let table = grads.get_mut(l.unit_emb);
            for (t, &u) in input.units.iter().enumerate() {
                for (a, b) in table[u as usize * e..(u as usize + 1) * e].iter_mut().zip(&d_emb[t * e..(t + 1) * e]) {
                    *a += b;
                }
            }
        }
        let spk = &mut grads.get_mut(l.spk_emb)[input.speaker * e..(input.speaker + 1) * e];
        for row in d_emb.chunks_exact(e) {
            for (a, b) in spk.iter_mut().zip(row) {
                *a += b;
            }
        }
    }

    /// Deterministic training-mode loss over a batch, without gradients.
    pub fn batch_loss(&self, items: &[&TrainItem]) -> Result<LossBreakdown> {
        let mut outputs = Vec::with_capacity(items.len());
        for item in items {
            item.validate(self.config.mel_bins)?;
            let input = ModelInput {
                units: &item.units,
                speaker: item.speaker,
                durations: Some(&item.durations),
            };
            outputs.push(self.forward(&input, Mode::Train)?);
        }
        loss(&outputs, items)
    }

    /// Loss over a batch plus the gradient of its total with respect to every parameter.
    ///
    /// Ground-truth durations drive length regulation. `dropout_rng` enables
    /// dropout; pass `None` for a deterministic pass.
    pub fn loss_and_grads(
        &self,
        items: &[&TrainItem],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(LossBreakdown, ParamSet)> {
        let mut grads = self.params.zeros_like();
        let mut outputs = Vec::with_capacity(items.len());
        let mut caches = Vec::with_capacity(items.len());
        for item in items {
            item.validate(self.config.mel_bins)?;
            let input = ModelInput {
                units: &item.units,
                speaker: item.speaker,
                durations: Some(&item.durations),
            };
            let (o, c) = self.forward_cached(&input, Mode::Train, dropout_rng.as_deref_mut())?;
            outputs.push(o);
            caches.push(c);
        }
        let norm = Normalizers::of(items, self.config.mel_bins);
        let breakdown = loss_with(&outputs, items, &norm)?;
        for ((item, out), cache) in items.iter().zip(&outputs).zip(&caches) {
            let d_mel: Vec<f64> = out
                .mel
                .iter()
                .zip(&item.mel)
                .map(|(p, t)| sign(p - t) / norm.mel)
                .collect();
            let d_pitch: Vec<f64> = out
                .pitch
                .iter()
                .zip(&item.pitch)
                .zip(&item.voiced)
                .map(|((p, t), &v)| if v { 2.0 * (p - t) / norm.pitch } else { 0.0 })
                .collect();
            let d_logdur: Vec<f64> = out
                .log_duration
                .iter()
                .zip(&item.durations)
                .map(|(p, &d)| 2.0 * (p - (d as f64).ln_1p()) / norm.dur)
                .collect();
            let input = ModelInput {
                units: &item.units,
                speaker: item.speaker,
                durations: Some(&item.durations),
            };
            self.backward(&input, out, cache, &d_mel, &d_pitch, &d_logdur, &mut grads);
        }
        Ok((breakdown, grads))
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct Normalizers {
    mel: f64,
    pitch: f64,
    dur: f64,
}

impl Normalizers {
    fn of(items: &[&TrainItem], mel_bins: usize) -> Self {
        let frames: usize = items.iter().map(|i| i.frames()).sum();
        let voiced: usize = items.iter().map(|i| i.voiced.iter().filter(|&&v| v).count()).sum();
        let tokens: usize = items.iter().map(|i| i.units.len()).sum();
        Self {
            mel: (frames * mel_bins).max(1) as f64,
            pitch: voiced.max(1) as f64,
            dur: tokens.max(1) as f64,
        }
    }
}

fn loss_with(outputs: &[AcousticOutput], items: &[&TrainItem], norm: &Normalizers) -> Result<LossBreakdown> {
    if outputs.len() != items.len() {
        return Err(NsvError::invalid(format!(
            "{} outputs for {} targets",
            outputs.len(),
            items.len()
        )));
    }
    let (mut mel, mut pitch, mut dur) = (0.0, 0.0, 0.0);
    for (o, t) in outputs.iter().zip(items) {
        if o.mel.len() != t.mel.len() || o.pitch.len() != t.pitch.len() || o.log_duration.len() != t.durations.len() {
            return Err(NsvError::invalid(format!(
                "{}: output shape ({} frames, {} tokens) does not match targets ({} frames, {} tokens)",
                t.utterance_id,
                o.frames,
                o.log_duration.len(),
                t.frames(),
                t.durations.len()
            )));
        }
        mel += o.mel.iter().zip(&t.mel).map(|(a, b)| (a - b).abs()).sum::<f64>();
        pitch += o
            .pitch
            .iter()
            .zip(&t.pitch)
            .zip(&t.voiced)
            .filter(|(_, &v)| v)
            .map(|((a, b), _)| (a - b) * (a - b))
            .sum::<f64>();
        dur += o
            .log_duration
            .iter()
            .zip(&t.durations)
            .map(|(a, &d)| (a - (d as f64).ln_1p()).powi(2))
            .sum::<f64>();
    }
    let mel_l1 = mel / norm.mel;
    let pitch_mse = pitch / norm.pitch;
    let dur_mse = dur / norm.dur;
    Ok(LossBreakdown {
        total: mel_l1 + pitch_mse + dur_mse,
        mel_l1,
        pitch_mse,
        dur_mse,
    })
}

/// Mean-reduced losses: L1 on mel, MSE on voiced-frame pitch, MSE on `log(1 + d)`.
pub fn loss(outputs: &[AcousticOutput], targets: &[&TrainItem]) -> Result<LossBreakdown> {
    let mel_bins = outputs.first().map(|o| o.mel_bins).unwrap_or(N_MELS);
    loss_with(outputs, targets, &Normalizers::of(targets, mel_bins))
}
