//! Poisson log-likelihood of an extinction profile and its derivatives.
//!
//! `l(α) = Σ_i [P_i log d_i − (Lα)_i P_i − d_i e^{−(Lα)_i}]`, dropping the
//! `−log(P_i!)` term, which does not depend on `α`. Values are therefore only
//! comparable for a fixed dataset. Data may be real-valued so that noise-free
//! signals can be used directly.

use crate::error::{check_len, Error, Result};
use crate::model::{ForwardModel, Signal};

/// Log-likelihood, penalty and their difference `S = l − γ‖α‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub penalty: f64,
    pub total: f64,
}

fn check_inputs(model: &ForwardModel, data: &Signal, alpha: &[f64]) -> Result<()> {
    check_len("data", model.len(), data.len())?;
    check_len("extinction profile", model.len(), alpha.len())?;
    match data.values().last() {
        Some(p) if *p > 0.0 => Ok(()),
        _ => Err(Error::Data(
            "last data sample is zero; truncate trailing zeros first".into(),
        )),
    }
}

/// Expected counts `d ⊙ e^{−Lα}` along with the optical depth `Lα`.
pub(crate) struct Attenuation {
    pub depth: Vec<f64>,
    pub expected: Vec<f64>,
}

impl Attenuation {
    pub fn new(model: &ForwardModel, alpha: &[f64]) -> Self {
        let depth = model.operator().apply(alpha);
        let expected = model
            .d()
            .iter()
            .zip(&depth)
            .map(|(d, t)| d * (-t).exp())
            .collect();
        Self { depth, expected }
    }

    /// Log-likelihood without the `Σ P_i log d_i` term.
    pub fn reduced_log_likelihood(&self, data: &[f64]) -> f64 {
        -self
            .depth
            .iter()
            .zip(&self.expected)
            .zip(data)
            .map(|((t, mu), p)| t * p + mu)
            .sum::<f64>()
    }

    pub fn gradient(&self, model: &ForwardModel, data: &[f64]) -> Vec<f64> {
        let residual: Vec<f64> = self.expected.iter().zip(data).map(|(mu, p)| mu - p).collect();
        model.operator().apply_transpose(&residual)
    }
}

/// `Σ_i P_i log d_i`, the α-independent part of the log-likelihood.
pub(crate) fn data_term(model: &ForwardModel, data: &[f64]) -> f64 {
    model
        .d()
        .iter()
        .zip(data)
        .filter(|(_, p)| **p != 0.0)
        .map(|(d, p)| p * d.ln())
        .sum()
}

pub(crate) fn squared_norm(alpha: &[f64]) -> f64 {
    alpha.iter().map(|a| a * a).sum()
}

pub fn log_likelihood(model: &ForwardModel, data: &Signal, alpha: &[f64]) -> Result<f64> {
    check_inputs(model, data, alpha)?;
    let att = Attenuation::new(model, alpha);
    Ok(data_term(model, data.values()) + att.reduced_log_likelihood(data.values()))
}

/// `∇l = Lᵀ(d ⊙ e^{−Lα} − P)`.
pub fn gradient(model: &ForwardModel, data: &Signal, alpha: &[f64]) -> Result<Vec<f64>> {
    check_inputs(model, data, alpha)?;
    Ok(Attenuation::new(model, alpha).gradient(model, data.values()))
}

/// `vᵀ H(α) v = −Σ_i d_i e^{−(Lα)_i} (Lv)_i²`, without forming `H`.
pub fn hessian_quadratic_form(model: &ForwardModel, alpha: &[f64], v: &[f64]) -> Result<f64> {
    check_len("extinction profile", model.len(), alpha.len())?;
    check_len("direction", model.len(), v.len())?;
    let att = Attenuation::new(model, alpha);
    let lv = model.operator().apply(v);
    Ok(-att
        .expected
        .iter()
        .zip(&lv)
        .map(|(mu, x)| mu * x * x)
        .sum::<f64>())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "regularization parameter must be finite and non-negative, got {gamma}"
        )))
    }
}

/// `S(α) = l(α) − γ‖α‖²`.
pub fn penalized_objective(
    model: &ForwardModel,
    data: &Signal,
    alpha: &[f64],
    gamma: f64,
) -> Result<ObjectiveValue> {
    check_gamma(gamma)?;
    let value = log_likelihood(model, data, alpha)?;
    let penalty = if gamma == 0.0 {
        0.0
    } else {
        gamma * squared_norm(alpha)
    };
    Ok(ObjectiveValue {
        value,
        penalty,
        total: value - penalty,
    })
}

/// `∇S = ∇l − 2γα`.
pub fn penalized_gradient(
    model: &ForwardModel,
    data: &Signal,
    alpha: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let mut g = gradient(model, data, alpha)?;
    for (gj, aj) in g.iter_mut().zip(alpha) {
        *gj -= 2.0 * gamma * aj;
    }
    Ok(g)
}

/// Restricts data and model to the prefix ending at the last non-zero sample.
pub fn truncate_trailing_zeros(data: &Signal, model: &ForwardModel) -> Result<(Signal, ForwardModel)> {
    check_len("data", model.len(), data.len())?;
    let k = data.last_nonzero().ok_or_else(|| {
        Error::Data("signal is identically zero; nothing left after truncating trailing zeros".into())
    })?;
    if k == data.len() {
        return Ok((data.clone(), model.clone()));
    }
    if k < 2 {
        return Err(Error::Data(format!(
            "only {k} sample(s) remain after truncating trailing zeros"
        )));
    }
    Ok((data.truncated(k), model.truncated(k)?))
}

/// `max_i (Lα)_i`. Values below 1 at a strictly positive maximizer put the
/// plain multiplicative iteration in its local-convergence regime.
pub fn max_optical_depth(model: &ForwardModel, alpha: &[f64]) -> Result<f64> {
    check_len("extinction profile", model.len(), alpha.len())?;
    Ok(model
        .operator()
        .apply(alpha)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}
