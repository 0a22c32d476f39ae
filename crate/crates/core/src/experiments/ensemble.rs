use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_seed, sample_poisson, ExtinctionProfile, ForwardModel, Signal};
use crate::solvers::{
    estimate_weights, log_transform, retrieve, Algorithm, SolverConfig, TikhonovSystem,
    WeightMatrix,
};

/// Sub-stream of the master seed reserved for weight estimation.
const WEIGHT_STREAM: u64 = u64::MAX;
/// Largest tolerated fraction of failed realizations per algorithm.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

/// How noisy signals are produced from the noise-free one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Poisson,
    /// Rounded expected counts: every realization is identical.
    Rounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSettings {
    pub n_realizations: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampling: Sampling,
    /// Retain every per-realization estimate in the result.
    #[serde(default)]
    pub keep_estimates: bool,
}

impl EnsembleSettings {
    pub fn new(n_realizations: usize, seed: u64) -> Self {
        Self {
            n_realizations,
            seed,
            sampling: Sampling::Poisson,
            keep_estimates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationFailure {
    pub realization: usize,
    pub message: String,
}

/// Per-altitude statistics of one algorithm over the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmEnsemble {
    pub config: SolverConfig,
    pub mean: Vec<f64>,
    /// Sample standard deviation (`n − 1` denominator).
    pub std: Vec<f64>,
    pub successes: usize,
    pub failures: Vec<RealizationFailure>,
    pub estimates: Option<Vec<Vec<f64>>>,
}

impl AlgorithmEnsemble {
    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm
    }

    /// Altitude-averaged standard deviation.
    pub fn mean_std(&self) -> f64 {
        self.std.iter().sum::<f64>() / self.std.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub heights: Vec<f64>,
    pub n_realizations: usize,
    pub seed: u64,
    pub algorithms: Vec<AlgorithmEnsemble>,
}

impl EnsembleResult {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmEnsemble> {
        self.algorithms.iter().find(|a| a.algorithm() == algorithm)
    }
}

/// A solver with any per-ensemble precomputation done.
enum Prepared<'a> {
    Generic(&'a SolverConfig, Option<WeightMatrix>),
    /// Tikhonov variants with the full-grid normal equations factorized once.
    Tikhonov(&'a SolverConfig, Option<WeightMatrix>, TikhonovSystem),
}

impl Prepared<'_> {
    fn config(&self) -> &SolverConfig {
        match self {
            Prepared::Generic(c, _) | Prepared::Tikhonov(c, _, _) => c,
        }
    }

    fn run(&self, model: &ForwardModel, data: &Signal) -> Result<Vec<f64>> {
        match self {
            Prepared::Tikhonov(_, _, system) if data.values().last().is_some_and(|p| *p > 0.0) => {
                system.solve(&log_transform(model, data)?)
            }
            Prepared::Tikhonov(config, weights, _) | Prepared::Generic(config, weights) => {
                Ok(retrieve(model, data, config, weights.as_ref())?.estimate)
            }
        }
    }
}

fn prepare<'a>(
    config: &'a SolverConfig,
    truth: &ExtinctionProfile,
    model: &ForwardModel,
    seed: u64,
) -> Result<Prepared<'a>> {
    config.validate()?;
    Ok(match config.algorithm {
        Algorithm::Tikhonov => {
            let system =
                TikhonovSystem::new(model.operator(), &WeightMatrix::identity(model.len()), config.gamma)?;
            Prepared::Tikhonov(config, None, system)
        }
        Algorithm::WeightedTikhonov => {
            let weights = estimate_weights(
                model,
                truth,
                config.weight_realizations,
                derive_seed(seed, WEIGHT_STREAM),
            )?;
            let system = TikhonovSystem::new(model.operator(), &weights, config.gamma)?;
            Prepared::Tikhonov(config, Some(weights), system)
        }
        _ => Prepared::Generic(config, None),
    })
}

fn noisy_signal(expected: &[f64], sampling: Sampling, seed: u64) -> Result<Signal> {
    match sampling {
        Sampling::Poisson => sample_poisson(expected, seed),
        Sampling::Rounded => Signal::observed(expected.iter().map(|m| m.round()).collect()),
    }
}

/// Repeats sampling and inversion `n_realizations` times for every config.
///
/// Realization `r` samples with seed `derive_seed(seed, r)`. Realizations run
/// in parallel; aggregation happens afterwards in realization order, so the
/// result does not depend on the thread count.
pub fn run_ensemble(
    truth: &ExtinctionProfile,
    model: &ForwardModel,
    configs: &[SolverConfig],
    settings: &EnsembleSettings,
) -> Result<EnsembleResult> {
    let n = settings.n_realizations;
    if n < 2 {
        return Err(Error::Config(format!(
            "an ensemble needs at least 2 realizations, got {n}"
        )));
    }
    let expected = model.expected_counts(truth)?;
    let prepared = configs
        .iter()
        .map(|c| prepare(c, truth, model, settings.seed))
        .collect::<Result<Vec<_>>>()?;

    let runs: Vec<Vec<std::result::Result<Vec<f64>, String>>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let data = noisy_signal(&expected, settings.sampling, derive_seed(settings.seed, r as u64))?;
            Ok(prepared
                .iter()
                .map(|p| p.run(model, &data).map_err(|e| e.to_string()))
                .collect())
        })
        .collect::<Result<_>>()?;

    let algorithms = prepared
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut failures = Vec::new();
            let mut estimates = Vec::with_capacity(n);
            for (r, run) in runs.iter().enumerate() {
                match &run[k] {
                    Ok(estimate) => estimates.push(estimate.clone()),
                    Err(message) => failures.push(RealizationFailure {
                        realization: r,
                        message: message.clone(),
                    }),
                }
            }
            let config = p.config().clone();
            if failures.len() as f64 > MAX_FAILURE_FRACTION * n as f64 || estimates.len() < 2 {
                return Err(Error::Data(format!(
                    "{}: {} of {n} realizations failed (first: {})",
                    config.algorithm,
                    failures.len(),
                    failures.first().map_or("", |f| f.message.as_str())
                )));
            }
            let (mean, std) = mean_and_std(&estimates, model.len());
            Ok(AlgorithmEnsemble {
                config,
                mean,
                std,
                successes: estimates.len(),
                failures,
                estimates: settings.keep_estimates.then_some(estimates),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EnsembleResult {
        heights: model.grid().heights().to_vec(),
        n_realizations: n,
        seed: settings.seed,
        algorithms,
    })
}

/// Two-pass per-altitude mean and sample standard deviation.
fn mean_and_std(estimates: &[Vec<f64>], len: usize) -> (Vec<f64>, Vec<f64>) {
    let count = estimates.len() as f64;
    let mut mean = vec![0.0; len];
    for e in estimates {
        for (m, v) in mean.iter_mut().zip(e) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    let mut var = vec![0.0; len];
    for e in estimates {
        for ((s, v), m) in var.iter_mut().zip(e).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / (count - 1.0)).sqrt()).collect();
    (mean, std)
}

/// Root-mean-square difference over altitudes `z ≤ z_cut`.
pub fn discrepancy(estimate: &[f64], truth: &[f64], heights: &[f64], z_cut: f64) -> Result<f64> {
    if estimate.len() != truth.len() || truth.len() != heights.len() {
        return Err(Error::Dimension {
            context: "discrepancy",
            expected: heights.len(),
            found: estimate.len().min(truth.len()),
        });
    }
    let (sum, count) = estimate
        .iter()
        .zip(truth)
        .zip(heights)
        .filter(|(_, z)| **z <= z_cut)
        .fold((0.0, 0usize), |(s, c), ((e, t), _)| (s + (e - t) * (e - t), c + 1));
    if count == 0 {
        return Err(Error::Config(format!(
            "no grid points at or below z_cut = {z_cut}"
        )));
    }
    Ok((sum / count as f64).sqrt())
}

/// Midpoint of the grid range, the default discrepancy cutoff.
pub fn default_z_cut(heights: &[f64]) -> f64 {
    0.5 * (heights[0] + heights[heights.len() - 1])
}
