//! Central-difference verification of the analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::EncodedSequence;
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Maximum relative error per parameter tensor, in visiting order.
    pub per_tensor: Vec<(String, f64)>,
    pub max_rel_error: f64,
    pub epsilon: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn worst_tensor(&self) -> Option<&(String, f64)> {
        self.per_tensor
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// `|a - n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares the analytic gradient of the noise-free sequence loss for `task`
/// against central differences, coordinate by coordinate.
pub fn grad_check(
    model: &ModelParams,
    seq: &EncodedSequence,
    task: &str,
    epsilon: f64,
) -> Result<GradCheckReport> {
    if !(1e-5..=1e-3).contains(&epsilon) {
        return Err(Error::Config(format!(
            "finite-difference epsilon {epsilon} outside [1e-5, 1e-3]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, grads) = model.loss_and_grads(seq, task, 0.0, &mut rng)?;
    let analytic = grads.to_dense(model);
    let mut flat: Vec<(String, Vec<f64>)> = Vec::new();
    analytic.visit_tensors(|name, t| flat.push((name.to_string(), t.to_vec())));

    let mut work = model.clone();
    let mut per_tensor = Vec::with_capacity(flat.len());
    let mut max_rel_error: f64 = 0.0;
    let mut checked = 0;
    for (ti, (name, g)) in flat.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (k, &ga) in g.iter().enumerate() {
            let original = work.tensors_mut()[ti][k];
            work.tensors_mut()[ti][k] = original + epsilon;
            let plus = work.loss(seq, task)?;
            work.tensors_mut()[ti][k] = original - epsilon;
            let minus = work.loss(seq, task)?;
            work.tensors_mut()[ti][k] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss when perturbing {name}[{k}]"
                )));
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(ga, numeric));
            checked += 1;
        }
        max_rel_error = max_rel_error.max(worst);
        per_tensor.push((name.clone(), worst));
    }
    Ok(GradCheckReport {
        per_tensor,
        max_rel_error,
        epsilon,
        checked,
    })
}
