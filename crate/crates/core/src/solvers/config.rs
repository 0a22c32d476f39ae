use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default strictly positive starting value, in m⁻¹.
pub const DEFAULT_INIT: f64 = 1e-5;
/// Default relative sup-norm change that counts as converged.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Default number of Poisson realizations used to estimate Tikhonov weights.
pub const DEFAULT_WEIGHT_REALIZATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Early-stopped Poisson maximum likelihood, scaled gradient with Armijo.
    Kkt,
    /// ℓ²-penalized Poisson maximum likelihood.
    KktL2,
    /// Richardson–Lucy on the log-transformed data.
    #[serde(rename = "rl")]
    RichardsonLucy,
    Tikhonov,
    WeightedTikhonov,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Tikhonov,
        Algorithm::WeightedTikhonov,
        Algorithm::RichardsonLucy,
        Algorithm::Kkt,
        Algorithm::KktL2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Kkt => "kkt",
            Algorithm::KktL2 => "kkt_l2",
            Algorithm::RichardsonLucy => "rl",
            Algorithm::Tikhonov => "tikhonov",
            Algorithm::WeightedTikhonov => "weighted_tikhonov",
        }
    }

    pub fn is_iterative(self) -> bool {
        !matches!(self, Algorithm::Tikhonov | Algorithm::WeightedTikhonov)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown algorithm '{s}' (expected one of kkt, kkt_l2, rl, tikhonov, weighted_tikhonov)"
                ))
            })
    }
}

/// How an iterative solver terminates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Run exactly this many iterations (early stopping).
    Iterations(usize),
    /// Stop once `‖α⁺ − α‖∞ / ‖α‖∞ < tolerance`, or after `max_iterations`.
    Tolerance { tolerance: f64, max_iterations: usize },
}

impl StopRule {
    pub fn max_iterations(&self) -> usize {
        match *self {
            StopRule::Iterations(n) => n,
            StopRule::Tolerance { max_iterations, .. } => max_iterations,
        }
    }

    pub fn tolerance(&self) -> Option<f64> {
        match *self {
            StopRule::Iterations(_) => None,
            StopRule::Tolerance { tolerance, .. } => Some(tolerance),
        }
    }
}

/// Backtracking Armijo rule: accept `λ` once
/// `f(α + λp) ≥ f(α) + σ λ ∇f·p`, shrinking `λ ← βλ` from `λ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmijoParams {
    pub sigma: f64,
    pub beta: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            sigma: 1e-4,
            beta: 0.5,
            max_backtracks: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    Constant(f64),
    Profile(Vec<f64>),
}

impl Default for InitRule {
    fn default() -> Self {
        InitRule::Constant(DEFAULT_INIT)
    }
}

impl InitRule {
    /// Starting profile of length `n`; must be strictly positive.
    pub fn build(&self, n: usize) -> Result<Vec<f64>> {
        let alpha = match self {
            InitRule::Constant(c) => vec![*c; n],
            InitRule::Profile(p) => {
                if p.len() < n {
                    return Err(Error::Dimension {
                        context: "initial profile",
                        expected: n,
                        found: p.len(),
                    });
                }
                // Truncated data keeps the leading part.
                p[..n].to_vec()
            }
        };
        if alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::Config(
                "initial profile must be strictly positive and finite".into(),
            ));
        }
        Ok(alpha)
    }
}

/// Fully resolved settings for one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SolverConfigSpec")]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub stop: StopRule,
    /// Regularization weight; ignored by KKT and RL.
    pub gamma: f64,
    pub armijo: ArmijoParams,
    pub init: InitRule,
    /// Realizations used to estimate weights for weighted Tikhonov.
    pub weight_realizations: usize,
}

impl SolverConfig {
    /// Defaults per algorithm. Regularization and stopping values are the
    /// high-SNR settings reported for a 2000-point grid; rescan them for other setups.
    pub fn new(algorithm: Algorithm) -> Self {
        let (stop, gamma) = match algorithm {
            Algorithm::Kkt => (StopRule::Iterations(100), 0.0),
            Algorithm::KktL2 => (
                StopRule::Tolerance {
                    tolerance: DEFAULT_TOLERANCE,
                    max_iterations: 200,
                },
                2e6,
            ),
            Algorithm::RichardsonLucy => (StopRule::Iterations(6000), 0.0),
            Algorithm::Tikhonov => (StopRule::Iterations(0), 5e3),
            Algorithm::WeightedTikhonov => (StopRule::Iterations(0), 2e7),
        };
        Self {
            algorithm,
            stop,
            gamma,
            armijo: ArmijoParams::default(),
            init: InitRule::default(),
            weight_realizations: DEFAULT_WEIGHT_REALIZATIONS,
        }
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_iterations(self, n: usize) -> Self {
        self.with_stop(StopRule::Iterations(n))
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_init(mut self, init: InitRule) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!(
                "{}: gamma must be finite and non-negative, got {}",
                self.algorithm, self.gamma
            )));
        }
        if matches!(self.algorithm, Algorithm::Tikhonov | Algorithm::WeightedTikhonov)
            && self.gamma == 0.0
        {
            return Err(Error::Config(format!("{}: gamma must be positive", self.algorithm)));
        }
        if self.algorithm.is_iterative() {
            if self.stop.max_iterations() == 0 {
                return Err(Error::Config(format!(
                    "{}: at least one iteration is required",
                    self.algorithm
                )));
            }
            if let Some(tol) = self.stop.tolerance() {
                if !(tol > 0.0) {
                    return Err(Error::Config(format!(
                        "{}: tolerance must be positive, got {tol}",
                        self.algorithm
                    )));
                }
            }
        }
        let a = &self.armijo;
        if !(a.sigma > 0.0 && a.sigma < 1.0 && a.beta > 0.0 && a.beta < 1.0) {
            return Err(Error::Config(format!(
                "Armijo sigma and beta must lie in (0, 1), got ({}, {})",
                a.sigma, a.beta
            )));
        }
        if self.algorithm == Algorithm::WeightedTikhonov && self.weight_realizations < 2 {
            return Err(Error::Config(
                "weight estimation needs at least 2 realizations".into(),
            ));
        }
        Ok(())
    }
}

/// Partial config as written by users; missing fields take algorithm defaults.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverConfigSpec {
    algorithm: Algorithm,
    stop: Option<StopRule>,
    gamma: Option<f64>,
    armijo: Option<ArmijoParams>,
    init: Option<InitRule>,
    weight_realizations: Option<usize>,
}

impl TryFrom<SolverConfigSpec> for SolverConfig {
    type Error = Error;

    fn try_from(spec: SolverConfigSpec) -> Result<Self> {
        let mut config = SolverConfig::new(spec.algorithm);
        if let Some(stop) = spec.stop {
            config.stop = stop;
        }
        if let Some(gamma) = spec.gamma {
            config.gamma = gamma;
        }
        if let Some(armijo) = spec.armijo {
            config.armijo = armijo;
        }
        if let Some(init) = spec.init {
            config.init = init;
        }
        if let Some(n) = spec.weight_realizations {
            config.weight_realizations = n;
        }
        config.validate()?;
        Ok(config)
    }
}
