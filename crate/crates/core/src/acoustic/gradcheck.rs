//! Finite-difference verification of the hand-written backward passes.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{AcousticModel, TrainItem};
use crate::error::{NsvError, Result};

/// Parameter groups checked independently, keyed by layer type.
pub const GROUPS: [&str; 5] = ["embedding", "conv", "layernorm", "linear", "duration"];

/// Coordinates whose analytic gradient is below this are skipped.
pub const SKIP_BELOW: f64 = 1e-12;

pub fn group_of(name: &str) -> &'static str {
    if name.starts_with("duration.") {
        "duration"
    } else if name.ends_with("embedding") {
        "embedding"
    } else if name.contains(".conv.") {
        "conv"
    } else if name.contains(".ln.") {
        "layernorm"
    } else {
        "linear"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub group: String,
    pub sampled: usize,
    pub skipped: usize,
    /// `|a - n| / max(|a|, |n|)` over the checked coordinates as one vector.
    pub rel_error: f64,
    /// Worst single-coordinate relative error, for diagnostics. Coordinates
    /// whose gradient nearly cancels carry finite-difference truncation error
    /// far above the vector figure.
    pub worst_coordinate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
    /// Largest group `rel_error`.
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub eps: f64,
    pub per_group: usize,
    pub seed: u64,
    /// Scales the analytic gradient of one group before comparison.
    pub fault: Option<(String, f64)>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            per_group: 200,
            seed: 0,
            fault: None,
        }
    }
}

/// Compares analytic gradients of the total loss with central differences on
/// `per_group` randomly chosen coordinates of each layer-type group (fewer
/// when the group is smaller).
pub fn gradient_check(model: &AcousticModel, items: &[TrainItem], opts: &GradCheckOptions) -> Result<GradCheckReport> {
    if items.is_empty() {
        return Err(NsvError::EmptyCorpus("gradient check needs at least one item".into()));
    }
    let batch: Vec<&TrainItem> = items.iter().collect();
    let (_, mut grads) = model.loss_and_grads(&batch, None)?;
    if let Some((group, scale)) = &opts.fault {
        if !GROUPS.contains(&group.as_str()) {
            return Err(NsvError::invalid(format!("unknown parameter group {group:?}")));
        }
        for (name, t) in grads.names.iter().zip(grads.tensors.iter_mut()) {
            if group_of(name) == group {
                t.data.iter_mut().for_each(|g| *g *= scale);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        groups: Vec::new(),
        max_rel_error: 0.0,
    };
    for group in GROUPS {
        let coords: Vec<(usize, usize)> = model
            .params
            .names
            .iter()
            .enumerate()
            .filter(|(_, n)| group_of(n) == group)
            .flat_map(|(t, _)| (0..model.params.tensors[t].len()).map(move |i| (t, i)))
            .collect();
        if coords.is_empty() {
            continue;
        }
        let mut check = GroupCheck {
            group: group.to_string(),
            sampled: 0,
            skipped: 0,
            rel_error: 0.0,
            worst_coordinate: 0.0,
        };
        let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
        // Draw coordinates until `per_group` of them carry a usable gradient.
        for pick in sample(&mut rng, coords.len(), coords.len()) {
            if check.sampled - check.skipped >= opts.per_group {
                break;
            }
            let (t, i) = coords[pick];
            check.sampled += 1;
            let analytic = grads.tensors[t].data[i];
            if analytic.abs() < SKIP_BELOW {
                check.skipped += 1;
                continue;
            }
            let original = model.params.tensors[t].data[i];
            probe.params.tensors[t].data[i] = original + opts.eps;
            let up = probe.batch_loss(&batch)?.total;
            probe.params.tensors[t].data[i] = original - opts.eps;
            let down = probe.batch_loss(&batch)?.total;
            probe.params.tensors[t].data[i] = original;
            let numeric = (up - down) / (2.0 * opts.eps);
            diff2 += (analytic - numeric).powi(2);
            a2 += analytic * analytic;
            n2 += numeric * numeric;
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
            check.worst_coordinate = check.worst_coordinate.max(rel);
        }
        if a2 > 0.0 || n2 > 0.0 {
            check.rel_error = (diff2 / a2.max(n2)).sqrt();
        }
        report.max_rel_error = report.max_rel_error.max(check.rel_error);
        report.groups.push(check);
    }
    Ok(report)
}
