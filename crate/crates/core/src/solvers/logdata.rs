//! Log-transformed data `y = log(d / P)` used by the linear baselines, and
//! empirical noise weights for weighted Tikhonov.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::model::{derive_seed, sample_poisson, ExtinctionProfile, ForwardModel, Signal};

/// Count substituted for interior zeros before taking logarithms.
pub const HALF_COUNT: f64 = 0.5;
/// Smallest variance used when inverting empirical variances into weights.
pub const VARIANCE_FLOOR: f64 = 1e-12;

const WEIGHT_CHUNK: usize = 64;

fn log_ratio(d: &[f64], p: &[f64]) -> Vec<f64> {
    d.iter()
        .zip(p)
        .map(|(d, p)| {
            let p = if *p == 0.0 { HALF_COUNT } else { *p };
            (d / p).ln()
        })
        .collect()
}

/// `y_i = log(d_i / P_i)`, with zero counts replaced by [`HALF_COUNT`].
pub fn log_transform(model: &ForwardModel, data: &Signal) -> Result<Vec<f64>> {
    check_len("data", model.len(), data.len())?;
    match data.values().last() {
        Some(p) if *p > 0.0 => {}
        _ => {
            return Err(Error::Data(
                "last data sample is zero; truncate trailing zeros first".into(),
            ))
        }
    }
    let y = log_ratio(model.d(), data.values());
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("log-transformed data not finite at index {i}")));
    }
    Ok(y)
}

/// Diagonal weights `W_ii`, the inverse noise variance of `y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Vec<f64>);

impl WeightMatrix {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Config("weights must be positive and finite".into()));
        }
        Ok(Self(values))
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn truncated(&self, k: usize) -> Self {
        Self(self.0[..k].to_vec())
    }
}

/// Running mean and sum of squared deviations (Chan et al. merge).
#[derive(Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
        }
    }

    fn push(&mut self, y: &[f64]) {
        self.count += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(y) {
            let delta = v - *m;
            *m += delta / self.count;
            *s += delta * (v - *m);
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        let total = self.count + other.count;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * other.count / total;
            self.m2[i] += other.m2[i] + delta * delta * self.count * other.count / total;
        }
        self.count = total;
        self
    }
}

/// Draws `n_realizations` Poisson signals around `forward(alpha)`, log-transforms
/// each and returns `W_ii = 1 / max(var(y_i), VARIANCE_FLOOR)` using the
/// unbiased sample variance.
///
/// Realizations are processed in fixed chunks and merged in order, so the
/// result is independent of the thread count.
pub fn estimate_weights(
    model: &ForwardModel,
    alpha: &ExtinctionProfile,
    n_realizations: usize,
    seed: u64,
) -> Result<WeightMatrix> {
    if n_realizations < 2 {
        return Err(Error::Config(format!(
            "weight estimation needs at least 2 realizations, got {n_realizations}"
        )));
    }
    let expected = model.expected_counts(alpha)?;
    let n = expected.len();
    let chunks: Vec<Moments> = (0..n_realizations.div_ceil(WEIGHT_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut moments = Moments::new(n);
            let end = ((c + 1) * WEIGHT_CHUNK).min(n_realizations);
            for r in c * WEIGHT_CHUNK..end {
                let counts = sample_poisson(&expected, derive_seed(seed, r as u64))?;
                moments.push(&log_ratio(model.d(), counts.values()));
            }
            Ok(moments)
        })
        .collect::<Result<_>>()?;
    let total = chunks
        .iter()
        .skip(1)
        .fold(chunks[0].clone(), |acc, m| acc.merge(m));
    let weights = total
        .m2
        .iter()
        .map(|s| 1.0 / (s / (total.count - 1.0)).max(VARIANCE_FLOOR))
        .collect();
    WeightMatrix::new(weights)
}
