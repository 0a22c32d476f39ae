use serde::Serialize;

use super::config::Algorithm;

/// Components below this value count as sitting on the non-negativity bound.
pub const ACTIVE_BOUND: f64 = 1e-14;

/// First-order optimality residuals of a bound-constrained maximization,
/// computed from the gradient `g` of the solved objective at the final iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals {
    /// `max_j |α_j g_j|`.
    pub complementarity: f64,
    /// `max g_j` over components at the bound, `None` when no component is active.
    pub dual_feasibility: Option<f64>,
    /// `max_j |α_j|`.
    pub profile_scale: f64,
    /// Magnitude of the individual gradient terms (e.g. `‖LᵀP‖∞`).
    pub gradient_scale: f64,
}

impl KktResiduals {
    pub fn new(alpha: &[f64], gradient: &[f64], gradient_scale: f64) -> Self {
        let complementarity = alpha
            .iter()
            .zip(gradient)
            .map(|(a, g)| (a * g).abs())
            .fold(0.0, f64::max);
        let dual_feasibility = alpha
            .iter()
            .zip(gradient)
            .filter(|(a, _)| **a < ACTIVE_BOUND)
            .map(|(_, g)| *g)
            .reduce(f64::max);
        let profile_scale = alpha.iter().fold(0.0, |m: f64, a| m.max(a.abs()));
        Self {
            complementarity,
            dual_feasibility,
            profile_scale,
            gradient_scale,
        }
    }

    /// Complementarity relative to `profile_scale · gradient_scale`.
    pub fn scaled_complementarity(&self) -> f64 {
        let scale = self.profile_scale * self.gradient_scale;
        if scale > 0.0 {
            self.complementarity / scale
        } else {
            self.complementarity
        }
    }

    /// Dual feasibility relative to `gradient_scale`; `None` when nothing is active.
    pub fn scaled_dual_feasibility(&self) -> Option<f64> {
        self.dual_feasibility.map(|g| {
            if self.gradient_scale > 0.0 {
                g / self.gradient_scale
            } else {
                g
            }
        })
    }
}

/// Estimate plus per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub algorithm: Algorithm,
    /// Full-length estimate. Components past a truncation point are zero.
    /// Tikhonov estimates are unconstrained and may be negative.
    pub estimate: Vec<f64>,
    /// Objective at the initial point and after every iteration.
    pub objective_trace: Vec<f64>,
    /// Accepted step lengths (line-search solvers only).
    pub step_trace: Vec<f64>,
    pub kkt_residuals: Option<KktResiduals>,
    pub iterations_run: usize,
    /// The tolerance test fired (or the iterate is an exact fixed point).
    pub converged: bool,
    /// The line search found no acceptable step and the iterate was frozen.
    pub stagnated: bool,
    /// Number of leading samples actually used after truncation.
    pub retained: usize,
}

impl SolverReport {
    /// Pads the estimate with zeros up to `len` grid points.
    pub(crate) fn padded(mut self, len: usize) -> Self {
        self.estimate.resize(len, 0.0);
        self
    }
}
