//! Multiplicative solvers derived from the KKT conditions of the Poisson
//! likelihood, run as scaled gradient ascent with an Armijo line search.
//!
//! The fixed-point operator is `T(α) = Lᵀ(d ⊙ e^{−Lα}) / (LᵀP + 2γα) ⊙ α`.
//! Its increment `T(α) − α = D(α) ∇S(α)` with `D = diag(α / (LᵀP + 2γα))`
//! is used as a search direction. Steps are capped at 1, so every iterate is a
//! convex combination of `α` and `T(α)` and stays non-negative.

use crate::error::{check_len, Error, Result};
use crate::model::{ForwardModel, Signal};
use crate::objective::{data_term, squared_norm, Attenuation};

use super::config::{Algorithm, SolverConfig};
use super::report::{KktResiduals, SolverReport};

fn check_data(model: &ForwardModel, data: &Signal) -> Result<()> {
    check_len("data", model.len(), data.len())?;
    match data.values().last() {
        Some(p) if *p > 0.0 => Ok(()),
        _ => Err(Error::Data(
            "last data sample is zero; truncate trailing zeros first".into(),
        )),
    }
}

/// Penalized Poisson problem `max S(α) = l(α) − γ‖α‖²` over `α ≥ 0`.
struct PoissonProblem<'a> {
    model: &'a ForwardModel,
    data: &'a [f64],
    /// `LᵀP`, positive in every component once `P_N > 0`.
    back_projected_data: Vec<f64>,
    gamma: f64,
    constant: f64,
}

/// Objective value at a point together with what the next step needs.
struct Evaluation {
    reduced: f64,
    attenuation: Attenuation,
}

impl<'a> PoissonProblem<'a> {
    fn new(model: &'a ForwardModel, data: &'a Signal, gamma: f64) -> Result<Self> {
        check_data(model, data)?;
        let back_projected_data = model.operator().apply_transpose(data.values());
        Ok(Self {
            model,
            data: data.values(),
            back_projected_data,
            gamma,
            constant: data_term(model, data.values()),
        })
    }

    /// `S` without the data constant, which keeps Armijo comparisons well conditioned.
    fn evaluate(&self, alpha: &[f64]) -> Evaluation {
        let attenuation = Attenuation::new(self.model, alpha);
        let mut reduced = attenuation.reduced_log_likelihood(self.data);
        if self.gamma > 0.0 {
            reduced -= self.gamma * squared_norm(alpha);
        }
        Evaluation {
            reduced,
            attenuation,
        }
    }

    fn denominator(&self, alpha: &[f64]) -> Vec<f64> {
        self.back_projected_data
            .iter()
            .zip(alpha)
            .map(|(b, a)| b + 2.0 * self.gamma * a)
            .collect()
    }

    /// `Lᵀ(d ⊙ e^{−Lα})`.
    fn numerator(&self, eval: &Evaluation) -> Vec<f64> {
        self.model.operator().apply_transpose(&eval.attenuation.expected)
    }

    fn gradient(&self, alpha: &[f64], numerator: &[f64]) -> Vec<f64> {
        numerator
            .iter()
            .zip(&self.back_projected_data)
            .zip(alpha)
            .map(|((n, b), a)| n - b - 2.0 * self.gamma * a)
            .collect()
    }

    fn gradient_scale(&self) -> f64 {
        self.back_projected_data.iter().fold(0.0, |m: f64, v| m.max(*v))
    }
}

/// One application of `T`: `[Lᵀ(d ⊙ e^{−Lα}) / LᵀP] ⊙ α`.
pub fn kkt_operator(model: &ForwardModel, data: &Signal, alpha: &[f64]) -> Result<Vec<f64>> {
    penalized_kkt_operator(model, data, alpha, 0.0)
}

/// `[Lᵀ(d ⊙ e^{−Lα}) / (LᵀP + 2γα)] ⊙ α`.
pub fn penalized_kkt_operator(
    model: &ForwardModel,
    data: &Signal,
    alpha: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    check_len("extinction profile", model.len(), alpha.len())?;
    let problem = PoissonProblem::new(model, data, gamma)?;
    let eval = problem.evaluate(alpha);
    let numerator = problem.numerator(&eval);
    let denominator = problem.denominator(alpha);
    Ok(alpha
        .iter()
        .zip(numerator.iter().zip(&denominator))
        .map(|(a, (n, d))| n / d * a)
        .collect())
}

/// Scaling `D(α) = diag(α / LᵀP)` of the unpenalized iteration.
pub fn kkt_scaling(model: &ForwardModel, data: &Signal, alpha: &[f64]) -> Result<Vec<f64>> {
    check_len("extinction profile", model.len(), alpha.len())?;
    let problem = PoissonProblem::new(model, data, 0.0)?;
    Ok(alpha
        .iter()
        .zip(&problem.back_projected_data)
        .map(|(a, b)| a / b)
        .collect())
}

/// Early-stopped maximum likelihood.
pub fn solve_kkt(model: &ForwardModel, data: &Signal, config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let problem = PoissonProblem::new(model, data, 0.0)?;
    ascend(&problem, config, Algorithm::Kkt)
}

/// Penalized maximum likelihood with weight `gamma`. `gamma = 0` reproduces [`solve_kkt`].
pub fn solve_kkt_l2(
    model: &ForwardModel,
    data: &Signal,
    gamma: f64,
    config: &SolverConfig,
) -> Result<SolverReport> {
    config.validate()?;
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Config(format!(
            "regularization parameter must be non-negative, got {gamma}"
        )));
    }
    let problem = PoissonProblem::new(model, data, gamma)?;
    ascend(&problem, config, Algorithm::KktL2)
}

fn ascend(problem: &PoissonProblem<'_>, config: &SolverConfig, algorithm: Algorithm) -> Result<SolverReport> {
    let n = problem.model.len();
    let armijo = config.armijo;
    let tolerance = config.stop.tolerance();

    let mut alpha = config.init.build(n)?;
    let mut eval = problem.evaluate(&alpha);
    let mut numerator = problem.numerator(&eval);

    let mut objective_trace = vec![problem.constant + eval.reduced];
    let mut step_trace = Vec::new();
    let mut iterations_run = 0;
    let mut converged = false;
    let mut stagnated = false;

    while iterations_run < config.stop.max_iterations() {
        let denominator = problem.denominator(&alpha);
        // ratio_j = T(α)_j / α_j; the direction is α ⊙ (ratio − 1) = D∇S.
        let ratio: Vec<f64> = numerator.iter().zip(&denominator).map(|(a, b)| a / b).collect();
        let gradient = problem.gradient(&alpha, &numerator);
        let direction: Vec<f64> = alpha.iter().zip(&ratio).map(|(a, r)| a * (r - 1.0)).collect();
        let slope: f64 = gradient.iter().zip(&direction).map(|(g, p)| g * p).sum();
        if !slope.is_finite() {
            return Err(Error::Numerical {
                message: format!("{algorithm}: non-finite directional derivative"),
                condition: f64::NAN,
            });
        }
        if slope <= 0.0 {
            // D∇S = 0: α is a fixed point of T.
            converged = true;
            break;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=armijo.max_backtracks {
            let candidate: Vec<f64> = alpha
                .iter()
                .zip(&ratio)
                .map(|(a, r)| a * (1.0 + step * (r - 1.0)))
                .collect();
            let trial = problem.evaluate(&candidate);
            if trial.reduced >= eval.reduced + armijo.sigma * step * slope {
                accepted = Some((candidate, trial));
                break;
            }
            step *= armijo.beta;
        }
        let Some((candidate, trial)) = accepted else {
            stagnated = true;
            break;
        };

        let change = alpha
            .iter()
            .zip(&candidate)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        let size = alpha.iter().fold(0.0, |m: f64, a| m.max(a.abs()));
        alpha = candidate;
        eval = trial;
        numerator = problem.numerator(&eval);
        objective_trace.push(problem.constant + eval.reduced);
        step_trace.push(step);
        iterations_run += 1;

        if let Some(tol) = tolerance {
            if change <= tol * size {
                converged = true;
                break;
            }
        }
    }

    let gradient = problem.gradient(&alpha, &numerator);
    let kkt_residuals = Some(KktResiduals::new(&alpha, &gradient, problem.gradient_scale()));
    Ok(SolverReport {
        algorithm,
        estimate: alpha,
        objective_trace,
        step_trace,
        kkt_residuals,
        iterations_run,
        converged,
        stagnated,
        retained: n,
    })
}
