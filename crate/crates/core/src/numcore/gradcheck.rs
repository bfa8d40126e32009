//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates forward passes on constant leaves, so
//! it shares no code path with the reverse sweep it checks.

use super::{Tape, Tensor, TensorError, Var};

/// Step used for central differences.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor for the relative error, so entries whose true gradient is
/// zero are compared on an absolute scale instead of blowing up.
pub const DEFAULT_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradReport {
    /// Largest relative error over every checked entry.
    pub max_rel_err: f64,
    /// `(input index, flat entry, analytic, numeric)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
    pub checked: usize,
}

impl GradReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the tape gradient of the scalar `f(inputs)` against central
/// differences for every entry of every input.
pub fn check<F>(inputs: &[Tensor], f: F) -> Result<GradReport, TensorError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, TensorError>,
{
    check_with(inputs, DEFAULT_STEP, DEFAULT_FLOOR, f)
}

pub fn check_with<F>(
    inputs: &[Tensor],
    step: f64,
    floor: f64,
    f: F,
) -> Result<GradReport, TensorError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, TensorError>,
{
    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let loss = f(&tape, &vars)?;
        let grads = tape.backward(loss)?;
        vars.iter().map(|v| grads.get_or_zeros(*v)).collect()
    };

    let eval = |perturbed: &[Tensor]| -> Result<f64, TensorError> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = perturbed.iter().map(|t| tape.constant(t.clone())).collect();
        Ok(f(&tape, &vars)?.value().item())
    };

    let mut report = GradReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
    };
    let mut work = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.len() {
            let orig = input.data()[j];
            work[i].data_mut()[j] = orig + step;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = orig - step;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = orig;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[i].data()[j];
            let err = relative_error(a, numeric, floor);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(err);
                report.worst = Some((i, j, a, numeric));
            }
        }
    }
    Ok(report)
}
