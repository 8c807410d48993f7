//! Central finite-difference verification of analytic gradients.

use super::params::ParamSet;
use crate::error::{config_err, dim_err, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Max over entries of `|a − n| / max(1, |a|, |n|)`.
    pub max_rel_error: f64,
    /// Flat index and tensor name of the worst entry.
    pub worst_index: usize,
    pub worst_tensor: String,
    pub checked: usize,
}

/// Compares `analytic` against central differences of `loss` around `params`.
pub fn grad_check<P, F>(params: &P, analytic: &P, epsilon: f64, loss: F) -> Result<GradCheckReport>
where
    P: ParamSet,
    F: Fn(&P) -> Result<f64>,
{
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return config_err(format!("epsilon must lie in (0, 1e-3], got {epsilon}"));
    }
    let base = loss(params)?;
    if !base.is_finite() {
        return Err(Error::Numerical(format!("loss is {base}")));
    }
    let a = analytic.flatten();
    if a.len() != params.num_params() {
        return dim_err("analytic gradient size differs from parameters");
    }
    let names: Vec<(String, usize)> = params
        .tensors()
        .iter()
        .map(|t| (t.name.clone(), t.data.len()))
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        worst_tensor: String::new(),
        checked: a.len(),
    };
    let mut probe = params.clone();
    let mut flat = 0;
    for (tensor_idx, (name, len)) in names.iter().enumerate() {
        for k in 0..*len {
            let orig = probe.tensors_mut()[tensor_idx][k];
            probe.tensors_mut()[tensor_idx][k] = orig + epsilon;
            let plus = loss(&probe)?;
            probe.tensors_mut()[tensor_idx][k] = orig - epsilon;
            let minus = loss(&probe)?;
            probe.tensors_mut()[tensor_idx][k] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss probing {name}[{k}]")));
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            let an = a[flat];
            let rel = (an - numeric).abs() / 1f64.max(an.abs()).max(numeric.abs());
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_index = flat;
                report.worst_tensor = format!("{name}[{k}]");
            }
            flat += 1;
        }
    }
    Ok(report)
}
