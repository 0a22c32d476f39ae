//! Numerical self-verification battery run by the `check` command.
//!
//! Every check draws random instances from a seeded generator, compares an
//! analytic quantity against a brute-force reference and reports the worst
//! deviation it saw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_len, Result};
use crate::model::{
    derive_seed, sample_poisson, AltitudeGrid, DensityModel, ExtinctionProfile, ForwardModel,
    Signal,
};
use crate::objective::{gradient, hessian_quadratic_form, truncate_trailing_zeros};
use crate::solvers::{
    kkt_operator, kkt_scaling, solve_kkt, solve_kkt_l2, Algorithm, SolverConfig, TikhonovSystem,
    WeightMatrix,
};

/// Deliberate defects used to confirm that the battery can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negate the analytic gradient before comparing it.
    GradientSignFlip,
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub seed: u64,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub threshold: f64,
    pub detail: String,
}

/// A random well-posed instance: model, a non-negative profile and Poisson data
/// with a positive last sample.
pub struct Instance {
    pub model: ForwardModel,
    pub alpha: ExtinctionProfile,
    pub data: Signal,
}

/// Grid spacing in [10, 100] m, extinction uniform in [0, 1e-3] m⁻¹ and
/// `C_μ` log-uniform so that counts span roughly 10²–10⁵.
pub fn random_instance(n: usize, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_min = rng.random_range(50.0..200.0);
    let spacing = rng.random_range(10.0..100.0);
    let grid = AltitudeGrid::uniform(z_min, z_min + spacing * (n - 1) as f64, n)?;
    let c_mu = 10f64.powf(rng.random_range(8.0..10.0));
    let model = ForwardModel::with_density(grid, c_mu, &DensityModel::default())?;
    let alpha = ExtinctionProfile::new((0..n).map(|_| rng.random_range(0.0..1e-3)).collect())?;
    let source = ExtinctionProfile::new((0..n).map(|_| rng.random_range(0.0..1e-3)).collect())?;
    let counts = sample_poisson(&model.expected_counts(&source)?, rng.random())?;
    let (data, model) = truncate_trailing_zeros(&counts, &model)?;
    let alpha = ExtinctionProfile::new(alpha[..model.len()].to_vec())?;
    Ok(Instance { model, alpha, data })
}

fn outcome(name: &'static str, worst: f64, threshold: f64, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: worst < threshold,
        worst,
        threshold,
        detail,
    }
}

/// Central differences of the log-likelihood with step `h = 1e-6 · max(1, |α_j|)`,
/// Richardson-extrapolated from steps `h` and `h/2` to cancel the `O(h²)` term.
///
/// `l(α + h e_j) − l(α − h e_j)` is accumulated term by term: the data
/// constant cancels exactly and exponential differences use `expm1`. Summing
/// the two full likelihoods first would bury the difference under the
/// rounding error of `l` itself.
pub fn finite_difference_gradient(model: &ForwardModel, data: &Signal, alpha: &[f64]) -> Result<Vec<f64>> {
    check_len("data", model.len(), data.len())?;
    check_len("extinction profile", model.len(), alpha.len())?;
    let n = alpha.len();
    let op = model.operator();
    let depth_of = |point: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..=i).map(|j| op.entry(i, j) * point[j]).sum())
            .collect()
    };
    let mut point = alpha.to_vec();
    let mut central = |j: usize, h: f64| -> f64 {
        point[j] = alpha[j] + h;
        let up = depth_of(&point);
        point[j] = alpha[j] - h;
        let down = depth_of(&point);
        point[j] = alpha[j];
        let difference: f64 = (0..n)
            .map(|i| {
                let delta = up[i] - down[i];
                -delta * data.values()[i] - model.d()[i] * (-down[i]).exp() * (-delta).exp_m1()
            })
            .sum();
        difference / (2.0 * h)
    };
    Ok((0..n)
        .map(|j| {
            let h = 1e-6 * alpha[j].abs().max(1.0);
            let coarse = central(j, h);
            let fine = central(j, 0.5 * h);
            (4.0 * fine - coarse) / 3.0
        })
        .collect())
}

/// Dense `vᵀHv` with `H_kj = −Σ_i L_ij L_ik d_i e^{−(Lα)_i}`.
pub fn dense_quadratic_form(model: &ForwardModel, alpha: &[f64], v: &[f64]) -> f64 {
    let n = model.len();
    let op = model.operator();
    let weight: Vec<f64> = (0..n)
        .map(|i| {
            let depth: f64 = (0..n).map(|j| op.entry(i, j) * alpha[j]).sum();
            model.d()[i] * (-depth).exp()
        })
        .collect();
    let mut total = 0.0;
    for k in 0..n {
        for j in 0..n {
            let h: f64 = -(0..n)
                .map(|i| op.entry(i, j) * op.entry(i, k) * weight[i])
                .sum::<f64>();
            total += v[k] * h * v[j];
        }
    }
    total
}

fn max_relative_error(approx: &[f64], exact: &[f64]) -> f64 {
    approx
        .iter()
        .zip(exact)
        .map(|(a, e)| (a - e).abs() / e.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

pub fn check_gradient(options: &CheckOptions, instances: usize, n: usize) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for k in 0..instances {
        let inst = random_instance(n, derive_seed(options.seed, k as u64))?;
        let mut g = gradient(&inst.model, &inst.data, &inst.alpha)?;
        if options.fault == Some(Fault::GradientSignFlip) {
            g.iter_mut().for_each(|v| *v = -*v);
        }
        let fd = finite_difference_gradient(&inst.model, &inst.data, &inst.alpha)?;
        worst = worst.max(max_relative_error(&g, &fd));
    }
    Ok(outcome(
        "gradient_vs_finite_differences",
        worst,
        1e-6,
        format!("{instances} instances, N = {n}, max relative component error"),
    ))
}

/// Fails when any sampled quadratic form is non-negative or disagrees with the dense oracle.
pub fn check_hessian(options: &CheckOptions, pairs: usize, n: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.seed, 1 << 32));
    let mut worst_sign = f64::NEG_INFINITY;
    let mut worst_oracle: f64 = 0.0;
    for k in 0..pairs {
        let inst = random_instance(n, derive_seed(options.seed, (1 << 33) + k as u64))?;
        let v: Vec<f64> = (0..inst.model.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q = hessian_quadratic_form(&inst.model, &inst.alpha, &v)?;
        worst_sign = worst_sign.max(q);
        if k < 20 {
            let dense = dense_quadratic_form(&inst.model, &inst.alpha, &v);
            worst_oracle = worst_oracle.max((q - dense).abs() / dense.abs());
        }
    }
    // Negativity holds iff worst_sign < 0; fold both into one pass/fail.
    let worst = if worst_sign < 0.0 { worst_oracle } else { f64::INFINITY };
    Ok(outcome(
        "hessian_negative_definite",
        worst,
        1e-12,
        format!("{pairs} pairs, largest quadratic form {worst_sign:e}, dense-oracle relative error {worst_oracle:e}"),
    ))
}

pub fn check_fixed_point(options: &CheckOptions, instances: usize, n: usize) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for k in 0..instances {
        let inst = random_instance(n, derive_seed(options.seed, (2 << 32) + k as u64))?;
        let (model, alpha) = (&inst.model, &inst.alpha);
        // Identity T(α) − α = D(α)∇l(α) on noisy data.
        let positive: Vec<f64> = alpha.iter().map(|a| a + 1e-5).collect();
        let t = kkt_operator(model, &inst.data, &positive)?;
        let d = kkt_scaling(model, &inst.data, &positive)?;
        let g = gradient(model, &inst.data, &positive)?;
        let scale = positive.iter().fold(0.0, |m: f64, a| m.max(*a));
        for j in 0..positive.len() {
            worst = worst.max((t[j] - positive[j] - d[j] * g[j]).abs() / scale);
        }
        // T(α*) = α* on noise-free data.
        let truth = ExtinctionProfile::new(positive.clone())?;
        let exact = model.forward(&truth)?;
        let t = kkt_operator(model, &exact, &truth)?;
        for j in 0..positive.len() {
            worst = worst.max((t[j] - truth[j]).abs() / scale);
        }
    }
    Ok(outcome(
        "fixed_point_identity",
        worst,
        1e-12,
        format!("{instances} instances, N = {n}, sup-norm deviation relative to ‖α‖∞"),
    ))
}

pub fn check_monotone_ascent(options: &CheckOptions, instances: usize, n: usize, iterations: usize) -> Result<CheckOutcome> {
    let mut violations = 0usize;
    let mut worst_drop: f64 = 0.0;
    for k in 0..instances {
        let inst = random_instance(n, derive_seed(options.seed, (3 << 32) + k as u64))?;
        let kkt = SolverConfig::new(Algorithm::Kkt).with_iterations(iterations);
        let l2 = SolverConfig::new(Algorithm::KktL2).with_iterations(iterations);
        let reports = [
            solve_kkt(&inst.model, &inst.data, &kkt)?,
            solve_kkt_l2(&inst.model, &inst.data, 1e3, &l2)?,
        ];
        for report in &reports {
            for w in report.objective_trace.windows(2) {
                if w[1] < w[0] {
                    violations += 1;
                    worst_drop = worst_drop.max(w[0] - w[1]);
                }
            }
        }
    }
    Ok(outcome(
        "monotone_ascent",
        violations as f64,
        0.5,
        format!("decreasing steps over {instances} instances x 2 solvers x {iterations} iterations, largest drop {worst_drop:e}"),
    ))
}

pub fn check_normal_equations(options: &CheckOptions, instances: usize, n: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.seed, 4 << 32));
    let mut worst: f64 = 0.0;
    for k in 0..instances {
        let inst = random_instance(n, derive_seed(options.seed, (5 << 32) + k as u64))?;
        let m = inst.model.len();
        let weights = WeightMatrix::new((0..m).map(|_| 10f64.powf(rng.random_range(-2.0..4.0))).collect())?;
        let gamma = 10f64.powf(rng.random_range(-2.0..3.0));
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..3.0)).collect();
        let system = TikhonovSystem::new(inst.model.operator(), &weights, gamma)?;
        let alpha = system.solve(&y)?;
        // (LᵀWL + γI)α via two operator applications.
        let la = inst.model.operator().apply(&alpha);
        let wla: Vec<f64> = la.iter().zip(weights.values()).map(|(a, w)| a * w).collect();
        let lhs: Vec<f64> = inst
            .model
            .operator()
            .apply_transpose(&wla)
            .iter()
            .zip(&alpha)
            .map(|(v, a)| v + gamma * a)
            .collect();
        let rhs = system.right_hand_side(&y);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let residual: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&residual) / norm(&rhs));
    }
    Ok(outcome(
        "tikhonov_normal_equations",
        worst,
        1e-8,
        format!("{instances} instances, N = {n}, relative residual"),
    ))
}

/// The full battery at its default sizes.
pub fn run_all(options: &CheckOptions) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        check_gradient(options, 20, 30)?,
        check_hessian(options, 200, 10)?,
        check_fixed_point(options, 20, 30)?,
        check_monotone_ascent(options, 5, 60, 200)?,
        check_normal_equations(options, 10, 50)?,
    ])
}
