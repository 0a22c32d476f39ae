use crate::error::{check_len, Error, Result};
use crate::model::{CumulativeOperator, ForwardModel, Signal};

use super::config::{Algorithm, SolverConfig};
use super::logdata::log_transform;
use super::report::{KktResiduals, SolverReport};

/// Richardson–Lucy on the log-transformed problem `y = Lα`:
/// `α ← α / (Lᵀ1) ⊙ Lᵀ(y / Lα)`.
///
/// Noise can push `P_i` above `d_i` and make `y_i` negative; those entries are
/// clipped to zero so the multiplicative update keeps `α > 0`.
pub fn solve_rl(model: &ForwardModel, data: &Signal, config: &SolverConfig) -> Result<SolverReport> {
    let mut y = log_transform(model, data)?;
    for v in &mut y {
        *v = v.max(0.0);
    }
    richardson_lucy(model.operator(), &y, config)
}

/// Richardson–Lucy iterations for non-negative `y`.
pub fn richardson_lucy(op: &CumulativeOperator, y: &[f64], config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    check_len("log-transformed data", op.len(), y.len())?;
    if let Some(i) = y.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Data(format!(
            "Richardson-Lucy needs finite non-negative data, got {} at index {i}",
            y[i]
        )));
    }
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::Data("Richardson-Lucy data is identically zero".into()));
    }

    let n = op.len();
    let sensitivity = op.apply_transpose(&vec![1.0; n]);
    let tolerance = config.stop.tolerance();
    let mut alpha = config.init.build(n)?;
    let mut projected = op.apply(&alpha);
    let mut objective_trace = vec![poisson_objective(y, &projected)];
    let mut iterations_run = 0;
    let mut converged = false;

    while iterations_run < config.stop.max_iterations() {
        let ratio: Vec<f64> = y.iter().zip(&projected).map(|(y, p)| y / p).collect();
        let correction = op.apply_transpose(&ratio);
        let mut change: f64 = 0.0;
        let mut size: f64 = 0.0;
        for ((a, c), s) in alpha.iter_mut().zip(&correction).zip(&sensitivity) {
            let next = *a / s * c;
            change = change.max((next - *a).abs());
            size = size.max(a.abs());
            *a = next;
        }
        projected = op.apply(&alpha);
        objective_trace.push(poisson_objective(y, &projected));
        iterations_run += 1;
        if let Some(tol) = tolerance {
            if change <= tol * size {
                converged = true;
                break;
            }
        }
    }

    let ratio: Vec<f64> = y.iter().zip(&projected).map(|(y, p)| y / p).collect();
    let gradient: Vec<f64> = op
        .apply_transpose(&ratio)
        .iter()
        .zip(&sensitivity)
        .map(|(c, s)| c - s)
        .collect();
    let scale = sensitivity.iter().fold(0.0, |m: f64, v| m.max(*v));
    Ok(SolverReport {
        algorithm: Algorithm::RichardsonLucy,
        kkt_residuals: Some(KktResiduals::new(&alpha, &gradient, scale)),
        estimate: alpha,
        objective_trace,
        step_trace: Vec::new(),
        iterations_run,
        converged,
        stagnated: false,
        retained: n,
    })
}

/// `Σ_i y_i log(Lα)_i − (Lα)_i`, the objective Richardson–Lucy ascends.
fn poisson_objective(y: &[f64], projected: &[f64]) -> f64 {
    y.iter()
        .zip(projected)
        .map(|(y, p)| if *y > 0.0 { y * p.ln() - p } else { -p })
        .sum()
}
