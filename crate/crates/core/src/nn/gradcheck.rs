//! Central finite-difference check of analytic gradients.

use super::model::Classifier;
use super::param::Parameterized;
use crate::error::{Error, Result};
use crate::math::{Rng, Tensor};

/// Denominator floor of the relative error.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_relative_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Number of scalar parameters compared.
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares backpropagated gradients of `-ln p[label]` against central
/// differences with step `eps` for every trainable scalar parameter.
pub fn grad_check<M: Classifier>(model: &M, x: &M::Input, label: usize, eps: f64) -> Result<GradCheckReport> {
    grad_check_with(model, x, label, eps, |_, _| {})
}

/// As [`grad_check`], with a hook that may alter the analytic gradients
/// before comparison (negative controls for the harness itself).
pub fn grad_check_with<M, F>(model: &M, x: &M::Input, label: usize, eps: f64, mut tamper: F) -> Result<GradCheckReport>
where
    M: Classifier,
    F: FnMut(&str, &mut Tensor),
{
    if !model.is_deterministic() {
        return Err(Error::config(
            "gradient check needs a deterministic network (disable dropout first)",
        ));
    }
    if !(eps > 0.0) {
        return Err(Error::config("finite-difference step must be positive"));
    }

    let mut work = model.clone();
    work.zero_grads();
    work.accumulate_gradients(x, label, &mut Rng::new(0))?;
    let mut analytic: Vec<(usize, String, Tensor)> = Vec::new();
    let mut idx = 0;
    work.visit_params(&mut |name, p| {
        if p.trainable {
            analytic.push((idx, name.to_string(), p.grad.clone()));
        }
        idx += 1;
    });
    for (_, name, g) in analytic.iter_mut() {
        tamper(name, g);
    }

    let mut work = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (pidx, name, grad) in &analytic {
        for e in 0..grad.len() {
            let original = param_value(&mut work, *pidx, e, None);
            param_value(&mut work, *pidx, e, Some(original + eps));
            let plus = work.loss(x, label)?;
            param_value(&mut work, *pidx, e, Some(original - eps));
            let minus = work.loss(x, label)?;
            param_value(&mut work, *pidx, e, Some(original));

            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[e];
            let r = relative_error(a, numeric);
            report.checked += 1;
            if r > report.max_relative_error || report.worst_param.is_empty() {
                report.max_relative_error = r;
                report.worst_param = name.clone();
                report.worst_index = e;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Reads element `e` of the `pidx`-th parameter, optionally overwriting it.
fn param_value<M: Parameterized>(m: &mut M, pidx: usize, e: usize, set: Option<f64>) -> f64 {
    let mut i = 0;
    let mut out = 0.0;
    m.visit_params_mut(&mut |_, p| {
        if i == pidx {
            let v = &mut p.value.data_mut()[e];
            out = *v;
            if let Some(s) = set {
                *v = s;
            }
        }
        i += 1;
    });
    out
}
