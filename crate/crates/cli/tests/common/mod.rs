//! Reference computations for the acceptance suite. Everything here works on
//! dense matrices built from the grid heights with straight loops, so none of
//! the library's cumulative-sum kernels are reused.

#![allow(dead_code)]

use lidar_retrieval::model::sample_poisson;
use lidar_retrieval::{AltitudeGrid, DensityModel, ForwardModel, Signal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Matrix = Vec<Vec<f64>>;

/// `L_ij = z_j − z_{j−1}` (first column `z_1 − z_0`) for `j ≤ i`, else 0.
pub fn dense_operator(heights: &[f64]) -> Matrix {
    let n = heights.len();
    let width = |j: usize| if j == 0 { heights[1] - heights[0] } else { heights[j] - heights[j - 1] };
    (0..n)
        .map(|i| (0..n).map(|j| if j <= i { width(j) } else { 0.0 }).collect())
        .collect()
}

pub fn mat_vec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum()).collect()
}

pub fn mat_t_vec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    let n = a[0].len();
    (0..n).map(|j| a.iter().zip(x).map(|(row, v)| row[j] * v).sum()).collect()
}

/// `Σ_i P_i ln d_i − P_i (Lα)_i − d_i e^{−(Lα)_i}`.
pub fn log_likelihood(l: &Matrix, d: &[f64], p: &[f64], alpha: &[f64]) -> f64 {
    let depth = mat_vec(l, alpha);
    (0..d.len())
        .map(|i| p[i] * d[i].ln() - p[i] * depth[i] - d[i] * (-depth[i]).exp())
        .sum()
}

/// `Lᵀ(d e^{−Lα} − P)`.
pub fn gradient(l: &Matrix, d: &[f64], p: &[f64], alpha: &[f64]) -> Vec<f64> {
    let depth = mat_vec(l, alpha);
    let r: Vec<f64> = (0..d.len()).map(|i| d[i] * (-depth[i]).exp() - p[i]).collect();
    mat_t_vec(l, &r)
}

/// Central difference `∂l/∂α_j` at step `h`, summed term by term so that the
/// large constant parts of `l` cancel before rounding.
fn central_difference(l: &Matrix, d: &[f64], p: &[f64], alpha: &[f64], j: usize, h: f64) -> f64 {
    let mut up = alpha.to_vec();
    let mut down = alpha.to_vec();
    up[j] += h;
    down[j] -= h;
    let (du, dd) = (mat_vec(l, &up), mat_vec(l, &down));
    let diff: f64 = (0..d.len())
        .map(|i| {
            let delta = du[i] - dd[i];
            -p[i] * delta - d[i] * (-dd[i]).exp() * (-delta).exp_m1()
        })
        .sum();
    diff / (2.0 * h)
}

/// Central differences with `h = 1e-6 · max(1, |α_j|)`, Richardson-combined
/// with step `h/2`.
pub fn fd_gradient(l: &Matrix, d: &[f64], p: &[f64], alpha: &[f64]) -> Vec<f64> {
    (0..alpha.len())
        .map(|j| {
            let h = 1e-6 * alpha[j].abs().max(1.0);
            let coarse = central_difference(l, d, p, alpha, j, h);
            let fine = central_difference(l, d, p, alpha, j, 0.5 * h);
            (4.0 * fine - coarse) / 3.0
        })
        .collect()
}

/// `H = −Lᵀ diag(d e^{−Lα}) L`.
pub fn dense_hessian(l: &Matrix, d: &[f64], alpha: &[f64]) -> Matrix {
    let n = alpha.len();
    let depth = mat_vec(l, alpha);
    let mu: Vec<f64> = (0..n).map(|i| d[i] * (-depth[i]).exp()).collect();
    let mut h = vec![vec![0.0; n]; n];
    for (j, row) in h.iter_mut().enumerate() {
        for (k, entry) in row.iter_mut().enumerate() {
            *entry = -(0..n).map(|i| l[i][j] * mu[i] * l[i][k]).sum::<f64>();
        }
    }
    h
}

pub fn quadratic_form(a: &Matrix, v: &[f64]) -> f64 {
    v.iter().zip(mat_vec(a, v)).map(|(x, y)| x * y).sum()
}

/// Two-pass mean and `n − 1` standard deviation.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}

pub struct Instance {
    pub model: ForwardModel,
    pub alpha: Vec<f64>,
    pub data: Signal,
    pub dense: Matrix,
}

impl Instance {
    pub fn d(&self) -> &[f64] {
        self.model.d()
    }
}

/// A family of lidar-like test problems on uniform grids.
#[derive(Clone, Copy)]
pub struct Family {
    pub n: usize,
    /// Grid spacing range in meters.
    pub spacing: (f64, f64),
    /// log10 range of the median expected count.
    pub log_median: (f64, f64),
    pub alpha: (f64, f64),
    /// Poisson data (true) or the exact expected counts (false).
    pub noisy: bool,
    /// Draw data from an independent profile instead of `alpha`.
    pub independent_source: bool,
}

impl Family {
    pub fn instance(&self, seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n;
        let spacing = if self.spacing.0 < self.spacing.1 {
            rng.random_range(self.spacing.0..self.spacing.1)
        } else {
            self.spacing.0
        };
        let grid = AltitudeGrid::uniform(119.0, 119.0 + spacing * (n - 1) as f64, n).unwrap();
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(self.alpha.0..self.alpha.1)).collect()
        };
        let alpha = draw(&mut rng);
        let source = if self.independent_source { draw(&mut rng) } else { alpha.clone() };
        let log_median = if self.log_median.0 < self.log_median.1 {
            rng.random_range(self.log_median.0..self.log_median.1)
        } else {
            self.log_median.0
        };
        let unit = ForwardModel::with_density(grid.clone(), 1.0, &DensityModel::default()).unwrap();
        let mut counts = unit.expected_counts(&source).unwrap();
        counts.sort_by(f64::total_cmp);
        let c_mu = 10f64.powf(log_median) / counts[n / 2];
        let model = ForwardModel::with_density(grid, c_mu, &DensityModel::default()).unwrap();
        let expected = model.expected_counts(&source).unwrap();
        let data = if self.noisy {
            (0..)
                .map(|k| sample_poisson(&expected, seed.wrapping_mul(1_000_003).wrapping_add(k)).unwrap())
                .find(|s| s.values()[n - 1] > 0.0)
                .unwrap()
        } else {
            Signal::noise_free(expected).unwrap()
        };
        let dense = dense_operator(model.grid().heights());
        Instance { model, alpha, data, dense }
    }
}
