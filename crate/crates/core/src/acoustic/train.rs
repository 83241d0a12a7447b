use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{AcousticModel, LossBreakdown, TrainItem};
use super::tensor::ParamSet;
use crate::error::{NsvError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: ParamSet,
    v: ParamSet,
    step: u64,
}

impl Adam {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) {
        let c = self.config;
        self.step += 1;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .tensors
            .iter_mut()
            .zip(&grads.tensors)
            .zip(&mut self.m.tensors)
            .zip(&mut self.v.tensors)
        {
            for (((p, &g), m), v) in p.data.iter_mut().zip(&g.data).zip(&mut m.data).zip(&mut v.data) {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                *p -= c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: bool,
    pub seed: u64,
}

impl TrainOptions {
    pub fn from_model(model: &AcousticModel, seed: u64) -> Self {
        Self {
            steps: model.config.max_steps,
            batch_size: model.config.batch_size,
            learning_rate: model.config.learning_rate,
            dropout: model.config.dropout > 0.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Loss of the batch at each step, measured before that step's update.
    pub losses: Vec<LossBreakdown>,
}

/// Runs Adam for `opts.steps` steps over shuffled mini-batches.
///
/// `on_step` sees the step index and its loss; returning an error aborts.
pub fn train<F>(model: &mut AcousticModel, items: &[TrainItem], opts: &TrainOptions, mut on_step: F) -> Result<TrainReport>
where
    F: FnMut(usize, &LossBreakdown) -> Result<()>,
{
    if items.is_empty() {
        return Err(NsvError::EmptyCorpus("no training items".into()));
    }
    if opts.batch_size == 0 {
        return Err(NsvError::invalid("batch_size must be positive"));
    }
    for item in items {
        item.validate(model.config.mel_bins)?;
    }
    let mut order_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_d209);
    let mut adam = Adam::new(&model.params, AdamConfig::with_lr(opts.learning_rate));
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let batch = opts.batch_size.min(items.len());
    let mut report = TrainReport::default();
    for step in 0..opts.steps {
        let mut picked = Vec::with_capacity(batch);
        while picked.len() < batch {
            if cursor == order.len() {
                order = (0..items.len()).collect();
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            picked.push(order[cursor]);
            cursor += 1;
        }
        // Summation order follows corpus order, so the loss of a given batch
        // composition is bit-identical however it was drawn.
        picked.sort_unstable();
        let picked: Vec<&TrainItem> = picked.into_iter().map(|i| &items[i]).collect();
        let rng = opts.dropout.then_some(&mut dropout_rng);
        let (loss, grads) = model.loss_and_grads(&picked, rng)?;
        if !loss.total.is_finite() {
            return Err(NsvError::Divergence {
                step,
                message: format!(
                    "loss is {} (mel {}, pitch {}, duration {})",
                    loss.total, loss.mel_l1, loss.pitch_mse, loss.dur_mse
                ),
            });
        }
        if !grads.all_finite() {
            return Err(NsvError::Divergence {
                step,
                message: "non-finite gradient".into(),
            });
        }
        adam.step(&mut model.params, &grads);
        on_step(step, &loss)?;
        report.losses.push(loss);
    }
    Ok(report)
}
