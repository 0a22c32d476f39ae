//! Discretized Raman lidar forward problem.
//!
//! The noise-free signal on an altitude grid is `P* = d ⊙ exp(-L α)`, where
//! `L` is the cumulative-integral operator and `d` the system function
//! `C_μ ρ(z) / z²`. Observed signals are independent Poisson draws around `P*`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Default scale height of the exponential molecular atmosphere, in meters.
pub const DEFAULT_SCALE_HEIGHT: f64 = 8000.0;

/// Strictly increasing, strictly positive altitudes (meters) with per-interval widths.
#[derive(Debug, Clone, PartialEq)]
pub struct AltitudeGrid {
    heights: Vec<f64>,
    widths: Vec<f64>,
}

impl AltitudeGrid {
    /// `n` equally spaced heights from `z_min` to `z_max` inclusive.
    pub fn uniform(z_min: f64, z_max: f64, n: usize) -> Result<Self> {
        if !(z_min.is_finite() && z_max.is_finite()) || z_min <= 0.0 || z_max <= z_min {
            return Err(Error::Config(format!(
                "grid bounds must satisfy 0 < z_min < z_max, got ({z_min}, {z_max})"
            )));
        }
        if n < 2 {
            return Err(Error::Config(format!("grid needs at least 2 points, got {n}")));
        }
        let spacing = (z_max - z_min) / (n - 1) as f64;
        let mut heights: Vec<f64> = (0..n).map(|i| z_min + i as f64 * spacing).collect();
        heights[n - 1] = z_max;
        Ok(Self {
            heights,
            widths: vec![spacing; n],
        })
    }

    /// Arbitrary heights, e.g. read from a file. Width `j` is `z_j - z_{j-1}`;
    /// the first point reuses the first interval.
    pub fn from_heights(heights: Vec<f64>) -> Result<Self> {
        if heights.len() < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 points, got {}",
                heights.len()
            )));
        }
        if heights.iter().any(|z| !z.is_finite() || *z <= 0.0) {
            return Err(Error::Config("grid heights must be finite and positive".into()));
        }
        if heights.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid heights must be strictly increasing".into()));
        }
        let mut widths = Vec::with_capacity(heights.len());
        widths.push(heights[1] - heights[0]);
        widths.extend(heights.windows(2).map(|w| w[1] - w[0]));
        Ok(Self { heights, widths })
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn z_min(&self) -> f64 {
        self.heights[0]
    }

    pub fn z_max(&self) -> f64 {
        self.heights[self.heights.len() - 1]
    }

    /// Leading `k` points. Needs `2 <= k <= len`.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k < 2 || k > self.len() {
            return Err(Error::Data(format!(
                "cannot truncate a grid of {} points to {k}",
                self.len()
            )));
        }
        Ok(Self {
            heights: self.heights[..k].to_vec(),
            widths: self.widths[..k].to_vec(),
        })
    }
}

/// Lower-triangular cumulative-sum operator, `L_ij = w_j` for `j <= i`.
///
/// This is the right-endpoint rectangle rule for `∫ α`. Every diagonal entry
/// is positive, so `L` is invertible, and `(Lᵀ v)_j = w_j Σ_{i≥j} v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeOperator {
    weights: Vec<f64>,
}

impl CumulativeOperator {
    pub fn new(grid: &AltitudeGrid) -> Self {
        Self {
            weights: grid.widths().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Column weights (the nonzero value shared by each column).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.weights[j]
        } else {
            0.0
        }
    }

    /// `L x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.len());
        let mut acc = 0.0;
        self.weights
            .iter()
            .zip(x)
            .map(|(w, v)| {
                acc += w * v;
                acc
            })
            .collect()
    }

    /// `Lᵀ v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.len());
        let mut out = vec![0.0; v.len()];
        let mut tail = 0.0;
        for j in (0..v.len()).rev() {
            tail += v[j];
            out[j] = self.weights[j] * tail;
        }
        out
    }

    /// Solves `L x = b` by forward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut prev = 0.0;
        b.iter()
            .zip(&self.weights)
            .map(|(bi, w)| {
                let x = (bi - prev) / w;
                prev = *bi;
                x
            })
            .collect()
    }

    pub fn truncated(&self, k: usize) -> Self {
        Self {
            weights: self.weights[..k].to_vec(),
        }
    }
}

/// Molecular number-density profile, in arbitrary units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityModel {
    /// `ρ(z) = exp(-z / H)`.
    Exponential { scale_height: f64 },
    /// Linear interpolation of `(z, ρ)` samples.
    Tabulated { heights: Vec<f64>, values: Vec<f64> },
}

impl Default for DensityModel {
    fn default() -> Self {
        DensityModel::Exponential {
            scale_height: DEFAULT_SCALE_HEIGHT,
        }
    }
}

impl DensityModel {
    pub fn evaluate(&self, z: f64) -> Result<f64> {
        let rho = match self {
            DensityModel::Exponential { scale_height } => {
                if !(*scale_height > 0.0) {
                    return Err(Error::Config(format!(
                        "scale height must be positive, got {scale_height}"
                    )));
                }
                (-z / scale_height).exp()
            }
            DensityModel::Tabulated { heights, values } => interpolate(heights, values, z)?,
        };
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Config(format!(
                "molecular density must be positive, got {rho} at z = {z}"
            )));
        }
        Ok(rho)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Result<f64> {
    check_len("tabulated density", xs.len(), ys.len())?;
    if xs.len() < 2 || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "tabulated density needs at least 2 strictly increasing heights".into(),
        ));
    }
    let (first, last) = (xs[0], xs[xs.len() - 1]);
    // Tolerate round-off at the table ends.
    let slack = 1e-9 * (last - first);
    if x < first - slack || x > last + slack {
        return Err(Error::Config(format!(
            "z = {x} outside tabulated density range [{first}, {last}]"
        )));
    }
    let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    Ok(ys[k - 1] + t * (ys[k] - ys[k - 1]))
}

/// `d_i = C_μ ρ(z_i) / z_i²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFunction {
    values: Vec<f64>,
    c_mu: f64,
    rho: Vec<f64>,
}

impl SystemFunction {
    pub fn new(grid: &AltitudeGrid, c_mu: f64, density: &DensityModel) -> Result<Self> {
        if !(c_mu > 0.0) || !c_mu.is_finite() {
            return Err(Error::Config(format!("C_mu must be positive, got {c_mu}")));
        }
        let rho = grid
            .heights()
            .iter()
            .map(|&z| density.evaluate(z))
            .collect::<Result<Vec<_>>>()?;
        let values = grid
            .heights()
            .iter()
            .zip(&rho)
            .map(|(z, r)| c_mu * r / (z * z))
            .collect();
        Ok(Self { values, c_mu, rho })
    }

    /// Wraps measured system-function values. `C_μ` is taken as 1 and `ρ` as `d z²`.
    pub fn from_values(grid: &AltitudeGrid, values: Vec<f64>) -> Result<Self> {
        check_len("system function", grid.len(), values.len())?;
        if values.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::Data("system function values must be positive".into()));
        }
        let rho = grid
            .heights()
            .iter()
            .zip(&values)
            .map(|(z, d)| d * z * z)
            .collect();
        Ok(Self {
            values,
            c_mu: 1.0,
            rho,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn c_mu(&self) -> f64 {
        self.c_mu
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn scaled(&self, multiplier: f64) -> Result<Self> {
        if !(multiplier > 0.0) || !multiplier.is_finite() {
            return Err(Error::Config(format!(
                "C_mu multiplier must be positive, got {multiplier}"
            )));
        }
        Ok(Self {
            values: self.values.iter().map(|d| d * multiplier).collect(),
            c_mu: self.c_mu * multiplier,
            rho: self.rho.clone(),
        })
    }

    fn truncated(&self, k: usize) -> Self {
        Self {
            values: self.values[..k].to_vec(),
            c_mu: self.c_mu,
            rho: self.rho[..k].to_vec(),
        }
    }
}

/// Non-negative extinction coefficients (m⁻¹), one per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionProfile(Vec<f64>);

impl ExtinctionProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((j, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::Data(format!(
                "extinction must be finite and non-negative, got {v} at index {j}"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for ExtinctionProfile {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Real-valued expected counts.
    NoiseFree,
    /// Non-negative integer photon counts.
    Observed,
}

/// Photon counts (or their expectation) on the grid. Stored as `f64` in both cases.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    values: Vec<f64>,
    kind: SignalKind,
}

impl Signal {
    pub fn noise_free(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Data("signal values must be finite and non-negative".into()));
        }
        Ok(Self {
            values,
            kind: SignalKind::NoiseFree,
        })
    }

    pub fn observed(values: Vec<f64>) -> Result<Self> {
        if values
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0 || v.fract() != 0.0)
        {
            return Err(Error::Data(
                "observed counts must be non-negative integers".into(),
            ));
        }
        Ok(Self {
            values,
            kind: SignalKind::Observed,
        })
    }

    /// Observed if every value is a non-negative integer, noise-free otherwise.
    pub fn infer(values: Vec<f64>) -> Result<Self> {
        if values.iter().all(|v| v.fract() == 0.0) {
            Self::observed(values)
        } else {
            Self::noise_free(values)
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// 1-based count of the retained prefix ending at the last non-zero sample.
    pub fn last_nonzero(&self) -> Option<usize> {
        self.values.iter().rposition(|v| *v > 0.0).map(|i| i + 1)
    }

    pub(crate) fn truncated(&self, k: usize) -> Self {
        Self {
            values: self.values[..k].to_vec(),
            kind: self.kind,
        }
    }
}

/// Grid, cumulative operator and system function bound together.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    grid: AltitudeGrid,
    operator: CumulativeOperator,
    system: SystemFunction,
}

impl ForwardModel {
    pub fn new(grid: AltitudeGrid, system: SystemFunction) -> Result<Self> {
        check_len("system function", grid.len(), system.values().len())?;
        let operator = CumulativeOperator::new(&grid);
        Ok(Self {
            grid,
            operator,
            system,
        })
    }

    pub fn with_density(grid: AltitudeGrid, c_mu: f64, density: &DensityModel) -> Result<Self> {
        let system = SystemFunction::new(&grid, c_mu, density)?;
        Self::new(grid, system)
    }

    pub fn grid(&self) -> &AltitudeGrid {
        &self.grid
    }

    pub fn operator(&self) -> &CumulativeOperator {
        &self.operator
    }

    pub fn system(&self) -> &SystemFunction {
        &self.system
    }

    /// System function values `d`.
    pub fn d(&self) -> &[f64] {
        self.system.values()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `d ⊙ exp(-L α)`.
    pub fn expected_counts(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        check_len("forward model", self.len(), alpha.len())?;
        let depth = self.operator.apply(alpha);
        Ok(self
            .d()
            .iter()
            .zip(&depth)
            .map(|(d, t)| d * (-t).exp())
            .collect())
    }

    /// Noise-free signal for a non-negative profile.
    pub fn forward(&self, alpha: &ExtinctionProfile) -> Result<Signal> {
        Signal::noise_free(self.expected_counts(alpha)?)
    }

    /// Same model with `C_μ` multiplied by `multiplier`.
    pub fn with_c_mu_scaled(&self, multiplier: f64) -> Result<Self> {
        Ok(Self {
            grid: self.grid.clone(),
            operator: self.operator.clone(),
            system: self.system.scaled(multiplier)?,
        })
    }

    /// Leading `k` grid points.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        Ok(Self {
            grid: self.grid.truncated(k)?,
            operator: self.operator.truncated(k),
            system: self.system.truncated(k),
        })
    }
}

/// Independent Poisson counts with the given means.
///
/// Component `i` is drawn from its own ChaCha stream `i` under `seed`, so the
/// result depends only on `(seed, i, mean_i)`.
pub fn sample_poisson(expected: &[f64], seed: u64) -> Result<Signal> {
    let counts = expected
        .iter()
        .enumerate()
        .map(|(i, &mean)| {
            if !mean.is_finite() || mean < 0.0 {
                return Err(Error::Data(format!(
                    "Poisson mean must be finite and non-negative, got {mean} at index {i}"
                )));
            }
            if mean == 0.0 {
                return Ok(0.0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let dist = Poisson::new(mean)
                .map_err(|e| Error::Data(format!("Poisson mean {mean} at index {i}: {e}")))?;
            Ok(dist.sample(&mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    Signal::observed(counts)
}

/// Seed for sub-stream `index` of `master`, via two rounds of SplitMix64.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_model(n: usize, d: Vec<f64>) -> ForwardModel {
        let grid = AltitudeGrid::uniform(1.0, n as f64, n).unwrap();
        let system = SystemFunction::from_values(&grid, d).unwrap();
        ForwardModel::new(grid, system).unwrap()
    }

    #[test]
    fn uniform_grid_spacing() {
        let grid = AltitudeGrid::uniform(100.0, 300.0, 3).unwrap();
        assert_eq!(grid.heights(), &[100.0, 200.0, 300.0]);

        let grid = AltitudeGrid::uniform(119.0, 15000.0, 2000).unwrap();
        assert_eq!(grid.len(), 2000);
        let spacing = (15000.0 - 119.0) / 1999.0;
        assert!((grid.widths()[0] - spacing).abs() < 1e-12);
        assert!((spacing - 7.444).abs() < 1e-3);
        assert_eq!(grid.z_max(), 15000.0);
    }

    #[test]
    fn invalid_grids() {
        assert!(matches!(
            AltitudeGrid::uniform(300.0, 100.0, 3),
            Err(Error::Config(_))
        ));
        assert!(AltitudeGrid::uniform(0.0, 100.0, 3).is_err());
        assert!(AltitudeGrid::uniform(1.0, 100.0, 1).is_err());
        assert!(AltitudeGrid::from_heights(vec![1.0, 3.0, 2.0]).is_err());
        assert!(AltitudeGrid::from_heights(vec![-1.0, 3.0]).is_err());
    }

    #[test]
    fn operator_examples() {
        let grid = AltitudeGrid::uniform(1.0, 3.0, 3).unwrap();
        let op = CumulativeOperator::new(&grid);
        assert_eq!(op.apply(&[1.0, 1.0, 1.0]), vec![1.0, 2.0, 3.0]);

        let grid = AltitudeGrid::uniform(2.0, 4.0, 2).unwrap();
        let op = CumulativeOperator::new(&grid);
        assert_eq!(op.apply(&[3.0, 0.0]), vec![6.0, 6.0]);
        assert_eq!(op.apply_transpose(&[0.0, 1.0]), vec![2.0, 2.0]);
    }

    #[test]
    fn operator_transpose_matches_entries() {
        let grid = AltitudeGrid::from_heights(vec![1.0, 1.5, 3.0, 3.2, 5.0]).unwrap();
        let op = CumulativeOperator::new(&grid);
        let v = [0.3, -1.0, 2.0, 0.5, 1.5];
        let lt = op.apply_transpose(&v);
        for j in 0..5 {
            let direct: f64 = (0..5).map(|i| op.entry(i, j) * v[i]).sum();
            assert!((lt[j] - direct).abs() < 1e-12);
        }
        let x = op.solve(&op.apply(&v));
        for (a, b) in x.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn system_function_examples() {
        let grid = AltitudeGrid::from_heights(vec![1.0, 2.0]).unwrap();
        let flat = DensityModel::Tabulated {
            heights: vec![0.5, 3.0],
            values: vec![1.0, 1.0],
        };
        let sf = SystemFunction::new(&grid, 1.0, &flat).unwrap();
        assert_eq!(sf.values(), &[1.0, 0.25]);

        let doubled = SystemFunction::new(&grid, 2.0, &flat).unwrap();
        assert_eq!(doubled.values(), &[2.0, 0.5]);

        let rho = DensityModel::default().evaluate(8000.0).unwrap();
        assert!((rho - (-1.0f64).exp()).abs() < 1e-15);

        assert!(SystemFunction::new(&grid, 0.0, &flat).is_err());
        let negative = DensityModel::Tabulated {
            heights: vec![0.5, 3.0],
            values: vec![-1.0, 1.0],
        };
        assert!(SystemFunction::new(&grid, 1.0, &negative).is_err());
    }

    #[test]
    fn tabulated_density_interpolates() {
        let table = DensityModel::Tabulated {
            heights: vec![0.0, 10.0, 20.0],
            values: vec![1.0, 0.5, 0.3],
        };
        assert!((table.evaluate(5.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((table.evaluate(20.0).unwrap() - 0.3).abs() < 1e-15);
        assert!(table.evaluate(25.0).is_err());
    }

    #[test]
    fn forward_examples() {
        let model = unit_model(2, vec![1.0, 1.0]);
        let p = model
            .forward(&ExtinctionProfile::new(vec![2f64.ln(), 0.0]).unwrap())
            .unwrap();
        assert!((p.values()[0] - 0.5).abs() < 1e-15);
        assert!((p.values()[1] - 0.5).abs() < 1e-15);

        let model = unit_model(3, vec![3.0, 2.0, 1.0]);
        let p = model.forward(&ExtinctionProfile::zeros(3)).unwrap();
        assert_eq!(p.values(), model.d());

        assert!(model.expected_counts(&[0.0; 2]).is_err());
    }

    #[test]
    fn poisson_degenerate_and_deterministic() {
        let means = vec![0.0, 5.0, 1e3, 0.0, 1e6];
        let a = sample_poisson(&means, 42).unwrap();
        let b = sample_poisson(&means, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values()[0], 0.0);
        assert_eq!(a.values()[3], 0.0);
        assert_eq!(a.kind(), SignalKind::Observed);
        assert!(sample_poisson(&[-1.0], 0).is_err());
        assert!(sample_poisson(&[f64::NAN], 0).is_err());
    }

    #[test]
    fn poisson_components_are_independent_of_neighbours() {
        let a = sample_poisson(&[10.0, 20.0, 30.0], 7).unwrap();
        let b = sample_poisson(&[99.0, 20.0, 1.0], 7).unwrap();
        assert_eq!(a.values()[1], b.values()[1]);
    }

    #[test]
    fn poisson_sample_mean() {
        let lambda = 1e4;
        let n = 100_000;
        let s = sample_poisson(&vec![lambda; n], 2024).unwrap();
        let mean = s.values().iter().sum::<f64>() / n as f64;
        assert!((mean - lambda).abs() < 3.0 * (lambda / n as f64).sqrt());
    }

    #[test]
    fn truncation_helpers() {
        let s = Signal::observed(vec![3.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.last_nonzero(), Some(3));
        assert_eq!(Signal::observed(vec![0.0; 3]).unwrap().last_nonzero(), None);
        assert!(Signal::observed(vec![1.5]).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }
}
