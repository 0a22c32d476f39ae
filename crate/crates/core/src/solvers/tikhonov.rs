use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::model::{CumulativeOperator, ForwardModel, Signal};

use super::config::Algorithm;
use super::logdata::{log_transform, WeightMatrix};
use super::report::SolverReport;

/// Factorized normal equations `(LᵀWL + γI) α = LᵀW y`.
///
/// The matrix depends only on the operator, weights and `γ`, so one
/// factorization serves every data vector on the same grid.
pub struct TikhonovSystem {
    operator: CumulativeOperator,
    weights: Vec<f64>,
    gamma: f64,
    factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl TikhonovSystem {
    pub fn new(operator: &CumulativeOperator, weights: &WeightMatrix, gamma: f64) -> Result<Self> {
        check_len("weights", operator.len(), weights.len())?;
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Config(format!(
                "Tikhonov regularization parameter must be positive, got {gamma}"
            )));
        }
        let matrix = normal_matrix(operator, weights.values(), gamma);
        let factor = matrix.clone().cholesky().ok_or_else(|| Error::Numerical {
            message: format!("Cholesky factorization failed for gamma = {gamma}"),
            condition: condition_estimate(matrix),
        })?;
        Ok(Self {
            operator: operator.clone(),
            weights: weights.values().to_vec(),
            gamma,
            factor,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `LᵀW y`.
    pub fn right_hand_side(&self, y: &[f64]) -> Vec<f64> {
        let wy: Vec<f64> = self.weights.iter().zip(y).map(|(w, v)| w * v).collect();
        self.operator.apply_transpose(&wy)
    }

    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("log-transformed data", self.operator.len(), y.len())?;
        let rhs = DVector::from_vec(self.right_hand_side(y));
        let alpha = self.factor.solve(&rhs);
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                message: "Tikhonov solution is not finite".into(),
                condition: condition_estimate(self.factor.l() * self.factor.l().transpose()),
            });
        }
        Ok(alpha.as_slice().to_vec())
    }

    /// `‖W^{1/2}(Lα − y)‖² + γ‖α‖²`.
    pub fn functional(&self, alpha: &[f64], y: &[f64]) -> f64 {
        let la = self.operator.apply(alpha);
        let misfit: f64 = la
            .iter()
            .zip(y)
            .zip(&self.weights)
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum();
        misfit + self.gamma * alpha.iter().map(|a| a * a).sum::<f64>()
    }
}

/// `LᵀWL + γI`. With `L_ij = w_j` for `j ≤ i`,
/// `(LᵀWL)_jk = w_j w_k Σ_{i ≥ max(j,k)} W_i`.
fn normal_matrix(op: &CumulativeOperator, weights: &[f64], gamma: f64) -> DMatrix<f64> {
    let n = op.len();
    let mut tail = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += weights[i];
        tail[i] = acc;
    }
    let w = op.weights();
    DMatrix::from_fn(n, n, |j, k| {
        let value = w[j] * w[k] * tail[j.max(k)];
        if j == k {
            value + gamma
        } else {
            value
        }
    })
}

fn condition_estimate(matrix: DMatrix<f64>) -> f64 {
    let eigen = matrix.symmetric_eigenvalues();
    let max = eigen.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let min = eigen.iter().fold(f64::INFINITY, |m: f64, v| m.min(v.abs()));
    max / min
}

/// Weighted Tikhonov on `y = log(d / P)`. `weights = None` is plain Tikhonov
/// (`W = I`). The solution is unconstrained and may contain negative values.
pub fn solve_tikhonov(
    model: &ForwardModel,
    data: &Signal,
    gamma: f64,
    weights: Option<&WeightMatrix>,
) -> Result<SolverReport> {
    let y = log_transform(model, data)?;
    let identity;
    let (weights, algorithm) = match weights {
        Some(w) => (w, Algorithm::WeightedTikhonov),
        None => {
            identity = WeightMatrix::identity(model.len());
            (&identity, Algorithm::Tikhonov)
        }
    };
    let system = TikhonovSystem::new(model.operator(), weights, gamma)?;
    report_from_system(&system, &y, algorithm)
}

pub(crate) fn report_from_system(
    system: &TikhonovSystem,
    y: &[f64],
    algorithm: Algorithm,
) -> Result<SolverReport> {
    let estimate = system.solve(y)?;
    let objective = -system.functional(&estimate, y);
    Ok(SolverReport {
        algorithm,
        retained: estimate.len(),
        estimate,
        objective_trace: vec![objective],
        step_trace: Vec::new(),
        kkt_residuals: None,
        iterations_run: 0,
        converged: true,
        stagnated: false,
    })
}
