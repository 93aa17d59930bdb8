use alloc::vec::Vec;

use super::{backward, forward, Matrix, NetworkParameters, NetworkSpec};
use crate::error::{Error, Result};

/// Scalar losses the gradient checker knows how to differentiate.
#[derive(Debug, Clone, PartialEq)]
pub enum LossTag {
    /// Mean of every output entry.
    MeanOutput,
    /// `½ Σ y²` over all outputs.
    HalfSquaredNorm,
    /// `Σ_r w_r Σ_j y_rj`; e.g. `∓1/n` per row gives a critic loss.
    RowWeighted(Vec<f64>),
}

impl LossTag {
    /// Loss value and `∂L/∂output`.
    pub fn evaluate(&self, output: &Matrix) -> Result<(f64, Matrix)> {
        let mut grad = Matrix::zeros(output.rows, output.cols);
        let value = match self {
            LossTag::MeanOutput => {
                let n = output.data.len() as f64;
                grad.data.iter_mut().for_each(|g| *g = 1.0 / n);
                output.data.iter().sum::<f64>() / n
            }
            LossTag::HalfSquaredNorm => {
                grad.data.copy_from_slice(&output.data);
                0.5 * output.data.iter().map(|v| v * v).sum::<f64>()
            }
            LossTag::RowWeighted(weights) => {
                if weights.len() != output.rows {
                    return Err(Error::shape("one loss weight per batch row required"));
                }
                let mut total = 0.0;
                for (r, &w) in weights.iter().enumerate() {
                    grad.row_mut(r).iter_mut().for_each(|g| *g = w);
                    total += w * output.row(r).iter().sum::<f64>();
                }
                total
            }
        };
        Ok((value, grad))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference half step.
    pub epsilon: f64,
    /// Entries per layer beyond which a fixed-stride subset is checked.
    pub max_entries_per_layer: usize,
    /// Denominator floor of the relative error. Central differences of an
    /// O(1) loss resolve gradients only to ~1e-11 at ε = 1e-5; the floor keeps
    /// that noise below 1e-6 of relative error, so gradients smaller than it
    /// are compared on an absolute scale.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-5,
            max_entries_per_layer: 1024,
            floor: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: usize,
    pub checked: usize,
    /// Entries skipped because a ±ε perturbation flipped a ReLU.
    pub skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub layers: Vec<LayerCheck>,
}

fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Weights first, then biases.
fn entry(p: &NetworkParameters, layer: usize, idx: usize) -> f64 {
    let l = &p.layers[layer];
    l.weights.get(idx).copied().unwrap_or_else(|| l.bias[idx - l.weights.len()])
}

fn entry_mut(p: &mut NetworkParameters, layer: usize, idx: usize) -> &mut f64 {
    let l = &mut p.layers[layer];
    let n = l.weights.len();
    if idx < n {
        &mut l.weights[idx]
    } else {
        &mut l.bias[idx - n]
    }
}

fn selected(total: usize, limit: usize) -> impl Iterator<Item = usize> {
    let take = total.min(limit.max(1));
    (0..take).map(move |i| i * total / take)
}

/// Compares `analytic` against central differences of `loss`.
///
/// `loss` returns the scalar and a kink signature (ReLU sign pattern); an
/// entry whose perturbations change the signature is skipped, since the
/// loss is not differentiable across it.
pub fn check_parameters<F>(
    params: &NetworkParameters,
    analytic: &NetworkParameters,
    options: &GradCheckOptions,
    mut loss: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&NetworkParameters) -> Result<(f64, Vec<bool>)>,
{
    if params.layers.len() != analytic.layers.len() {
        return Err(Error::shape("analytic gradient shape differs from parameters"));
    }
    let (_, base_mask) = loss(params)?;
    let eps = options.epsilon;
    let mut probe = params.clone();
    let mut layers = Vec::with_capacity(params.layers.len());
    for l in 0..params.layers.len() {
        let n_weights = params.layers[l].weights.len();
        let total = n_weights + params.layers[l].bias.len();
        let mut check = LayerCheck {
            layer: l,
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
        };
        let mut entries: Vec<usize> = selected(n_weights, options.max_entries_per_layer).collect();
        entries.extend(selected(total - n_weights, options.max_entries_per_layer).map(|i| i + n_weights));
        for idx in entries {
            let original = *entry_mut(&mut probe, l, idx);
            *entry_mut(&mut probe, l, idx) = original + eps;
            let (plus, mask_plus) = loss(&probe)?;
            *entry_mut(&mut probe, l, idx) = original - eps;
            let (minus, mask_minus) = loss(&probe)?;
            *entry_mut(&mut probe, l, idx) = original;
            if mask_plus != base_mask || mask_minus != base_mask {
                check.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = entry(analytic, l, idx);
            check.max_rel_error = check.max_rel_error.max(relative_error(a, numeric, options.floor));
            check.checked += 1;
        }
        layers.push(check);
    }
    let max_rel_error = layers.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_error, layers })
}

/// Checks [`backward`] for one network under the named loss.
pub fn gradient_check(
    spec: &NetworkSpec,
    params: &NetworkParameters,
    batch: &Matrix,
    loss: &LossTag,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    params.check(spec)?;
    let cache = forward(params, spec, batch)?;
    let (_, grad_out) = loss.evaluate(&cache.output)?;
    let (analytic, _) = backward(params, spec, &cache, &grad_out)?;
    check_parameters(params, &analytic, options, |p| {
        let cache = forward(p, spec, batch)?;
        Ok((loss.evaluate(&cache.output)?.0, cache.relu_mask(spec)))
    })
}
