//! Central finite-difference verification of tape gradients.

use super::tape::{Tape, Var};
use super::{ModelError, ParamStore};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares the analytic gradient of `loss_fn` against central differences
/// for every scalar of every tensor in `params`.
pub fn grad_check<F>(params: &ParamStore, eps: f64, loss_fn: F) -> Result<GradCheckReport, ModelError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, ModelError>,
{
    grad_check_sampled(params, eps, usize::MAX, loss_fn)
}

/// Like [`grad_check`] but visits at most `per_tensor` evenly strided
/// coordinates of each tensor.
pub fn grad_check_sampled<F>(
    params: &ParamStore,
    eps: f64,
    per_tensor: usize,
    loss_fn: F,
) -> Result<GradCheckReport, ModelError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, ModelError>,
{
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(ModelError::InvalidConfig(format!("eps {eps} outside [1e-6, 1e-3]")));
    }
    let eval = |store: &ParamStore| -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let vars = store.bind(&mut tape);
        let loss = loss_fn(&mut tape, &vars)?;
        let v = tape.scalar(loss);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::NonFiniteLoss)
        }
    };

    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let loss = loss_fn(&mut tape, &vars)?;
    if !tape.scalar(loss).is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }
    let grads = tape.backward(loss);

    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (t, var) in vars.iter().enumerate() {
        let n = params.get(t).data().len();
        let stride = n.div_ceil(per_tensor.min(n).max(1)).max(1);
        for i in (0..n).step_by(stride) {
            let analytic = grads.get(*var).map_or(0.0, |g| g.data()[i]);
            let orig = params.get(t).data()[i];
            work.get_mut(t).data_mut()[i] = orig + eps;
            let plus = eval(&work)?;
            work.get_mut(t).data_mut()[i] = orig - eps;
            let minus = eval(&work)?;
            work.get_mut(t).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((params.name(t).to_string(), i));
            }
        }
    }
    Ok(report)
}
