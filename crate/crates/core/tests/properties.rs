use lidar_retrieval::experiments::{run_ensemble, EnsembleSettings, SyntheticScenario};
use lidar_retrieval::model::sample_poisson;
use lidar_retrieval::objective::truncate_trailing_zeros;
use lidar_retrieval::solvers::{retrieve, Algorithm, SolverConfig, TikhonovSystem, WeightMatrix};
use lidar_retrieval::{AltitudeGrid, CumulativeOperator, DensityModel, ExtinctionProfile, ForwardModel, Signal};
use proptest::prelude::*;

fn grid(n: usize, spacing: f64) -> AltitudeGrid {
    AltitudeGrid::uniform(100.0, 100.0 + spacing * (n - 1) as f64, n).unwrap()
}

fn model(n: usize, spacing: f64, c_mu: f64) -> ForwardModel {
    ForwardModel::with_density(grid(n, spacing), c_mu, &DensityModel::default()).unwrap()
}

/// Profile, grid spacing and `C_μ` exponent on a shared length.
fn problem() -> impl Strategy<Value = (Vec<f64>, f64, f64)> {
    (2usize..40).prop_flat_map(|n| {
        (prop::collection::vec(0.0..1e-3f64, n), 5.0..200.0f64, 6.0..11.0f64)
    })
}

fn dense(op: &CumulativeOperator, x: &[f64]) -> Vec<f64> {
    (0..x.len()).map(|i| (0..x.len()).map(|j| op.entry(i, j) * x[j]).sum()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attenuation_is_monotone((alpha, spacing, e) in problem()) {
        let m = model(alpha.len(), spacing, 10f64.powf(e));
        let counts = m.expected_counts(&alpha).unwrap();
        let transmission: Vec<f64> = counts.iter().zip(m.d()).map(|(p, d)| p / d).collect();
        prop_assert!(transmission.iter().all(|t| *t > 0.0 && *t <= 1.0));
        prop_assert!(transmission.windows(2).all(|w| w[1] <= w[0]));
        let thicker: Vec<f64> = alpha.iter().map(|a| a + 1e-5).collect();
        let dimmer = m.expected_counts(&thicker).unwrap();
        prop_assert!(dimmer.iter().zip(&counts).all(|(a, b)| a < b));
    }

    #[test]
    fn operator_matches_dense_and_inverts((x, spacing, _) in problem(), seed in any::<u64>()) {
        let op = CumulativeOperator::new(&grid(x.len(), spacing));
        let lx = op.apply(&x);
        let reference = dense(&op, &x);
        for (a, b) in lx.iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-13 * b.abs().max(1e-300));
        }
        let back = op.solve(&lx);
        let scale = x.iter().fold(0.0f64, |m, v| m.max(*v)).max(1e-300);
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
        // Adjoint identity ⟨Lx, y⟩ = ⟨x, Lᵀy⟩.
        let y: Vec<f64> = (0..x.len()).map(|i| ((seed >> (i % 60)) & 0xff) as f64 - 128.0).collect();
        let lhs: f64 = lx.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(op.apply_transpose(&y)).map(|(a, b)| a * b).sum();
        let mag: f64 = lx.iter().zip(&y).map(|(a, b)| (a * b).abs()).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * mag.max(1e-300));
    }

    #[test]
    fn back_projected_data_is_positive(counts in prop::collection::vec(0u32..50, 2..60), spacing in 5.0..200.0f64) {
        let mut counts: Vec<f64> = counts.into_iter().map(f64::from).collect();
        *counts.last_mut().unwrap() += 1.0;
        let op = CumulativeOperator::new(&grid(counts.len(), spacing));
        prop_assert!(op.apply_transpose(&counts).iter().all(|v| *v > 0.0));
    }

    #[test]
    fn tikhonov_is_linear_in_data(
        y1 in prop::collection::vec(-5.0..5.0f64, 20),
        y2 in prop::collection::vec(-5.0..5.0f64, 20),
        s in -3.0..3.0f64,
        log_gamma in 1.0..7.0f64,
    ) {
        let op = CumulativeOperator::new(&grid(20, 50.0));
        let system = TikhonovSystem::new(&op, &WeightMatrix::identity(20), 10f64.powf(log_gamma)).unwrap();
        let a1 = system.solve(&y1).unwrap();
        let a2 = system.solve(&y2).unwrap();
        let y: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + s * b).collect();
        let a = system.solve(&y).unwrap();
        let expected: Vec<f64> = a1.iter().zip(&a2).map(|(a, b)| a + s * b).collect();
        let scale = expected.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for (x, e) in a.iter().zip(&expected) {
            prop_assert!((x - e).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn constrained_estimates_are_non_negative(
        (alpha, spacing, e) in problem(),
        seed in any::<u64>(),
        iterations in 1usize..60,
    ) {
        let m = model(alpha.len(), spacing, 10f64.powf(e - 4.0));
        let data = sample_poisson(&m.expected_counts(&alpha).unwrap(), seed).unwrap();
        prop_assume!(data.last_nonzero().is_some_and(|k| k >= 2));
        for algorithm in [Algorithm::Kkt, Algorithm::KktL2, Algorithm::RichardsonLucy] {
            let config = SolverConfig::new(algorithm).with_iterations(iterations).with_gamma(1e3);
            let report = match retrieve(&m, &data, &config, None) {
                Ok(report) => report,
                // Counts at or above d everywhere leave nothing for RL after clipping y at zero.
                Err(lidar_retrieval::Error::Data(_)) if algorithm == Algorithm::RichardsonLucy => continue,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            prop_assert_eq!(report.estimate.len(), alpha.len());
            prop_assert!(report.estimate.iter().all(|a| a.is_finite() && *a >= 0.0));
        }
    }

    #[test]
    fn truncation_is_consistent(
        counts in prop::collection::vec(1u32..200, 2..30),
        zeros in 1usize..10,
        spacing in 10.0..100.0f64,
    ) {
        let k = counts.len();
        let mut padded: Vec<f64> = counts.into_iter().map(f64::from).collect();
        let prefix = Signal::observed(padded.clone()).unwrap();
        padded.extend(std::iter::repeat(0.0).take(zeros));
        let full = Signal::observed(padded).unwrap();
        let m = model(k + zeros, spacing, 1e9);
        let (cut_data, cut_model) = truncate_trailing_zeros(&full, &m).unwrap();
        prop_assert_eq!(&cut_data, &prefix);
        prop_assert_eq!(cut_model.len(), k);
        let config = SolverConfig::new(Algorithm::Kkt).with_iterations(20);
        let on_full = retrieve(&m, &full, &config, None).unwrap();
        let on_prefix = retrieve(&cut_model, &prefix, &config, None).unwrap();
        prop_assert_eq!(&on_full.estimate[..k], &on_prefix.estimate[..]);
        prop_assert!(on_full.estimate[k..].iter().all(|a| *a == 0.0));
        prop_assert_eq!(on_full.retained, k);
    }

    #[test]
    fn poisson_sampling_is_seeded(expected in prop::collection::vec(0.0..1e4f64, 1..50), seed in any::<u64>()) {
        let a = sample_poisson(&expected, seed).unwrap();
        let b = sample_poisson(&expected, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.values().iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
    }
}

#[test]
fn ensemble_statistics_match_two_pass_oracle() {
    let (truth, model) = SyntheticScenario::simulation_1(60).build().unwrap();
    let mut settings = EnsembleSettings::new(12, 5);
    settings.keep_estimates = true;
    let configs = [
        SolverConfig::new(Algorithm::Kkt).with_iterations(30),
        SolverConfig::new(Algorithm::Tikhonov),
    ];
    let result = run_ensemble(&truth, &model, &configs, &settings).unwrap();
    for a in &result.algorithms {
        let estimates = a.estimates.as_ref().unwrap();
        assert_eq!(estimates.len(), 12);
        for j in 0..60 {
            let column: Vec<f64> = estimates.iter().map(|e| e[j]).collect();
            let mean = column.iter().sum::<f64>() / 12.0;
            let var = column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 11.0;
            assert!((a.mean[j] - mean).abs() <= 1e-12 * mean.abs().max(1e-300));
            assert!((a.std[j] - var.sqrt()).abs() <= 1e-12 * var.sqrt().max(1e-300));
            assert!(a.std[j].is_finite() && a.std[j] >= 0.0);
        }
    }
    let again = run_ensemble(&truth, &model, &configs, &settings).unwrap();
    assert_eq!(result, again);
}

#[test]
fn variance_free_sampling_gives_zero_spread() {
    let (truth, model) = SyntheticScenario::simulation_1(80).build().unwrap();
    let model = model.with_c_mu_scaled(1e4).unwrap();
    let mut settings = EnsembleSettings::new(5, 3);
    settings.sampling = lidar_retrieval::experiments::Sampling::Rounded;
    let config = SolverConfig::new(Algorithm::KktL2).with_iterations(50);
    let result = run_ensemble(&truth, &model, &[config], &settings).unwrap();
    let a = &result.algorithms[0];
    let scale = a.mean.iter().fold(0.0f64, |m, v| m.max(*v));
    assert!(a.std.iter().all(|s| *s < 1e-6 * scale));
}

#[test]
fn kkt_discrepancy_improves_with_signal_strength() {
    let (truth, model) = SyntheticScenario::simulation_1(100).build().unwrap();
    let heights = model.grid().heights().to_vec();
    let z_cut = lidar_retrieval::experiments::default_z_cut(&heights);
    let config = SolverConfig::new(Algorithm::Kkt).with_iterations(100);
    let settings = EnsembleSettings::new(20, 8);
    let scores: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
        .iter()
        .map(|m| {
            let scaled = model.with_c_mu_scaled(*m).unwrap();
            let r = run_ensemble(&truth, &scaled, std::slice::from_ref(&config), &settings).unwrap();
            lidar_retrieval::experiments::discrepancy(&r.algorithms[0].mean, &truth, &heights, z_cut).unwrap()
        })
        .collect();
    let inversions = scores.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{scores:?}");
}

#[test]
fn zero_extinction_reproduces_system_function() {
    let m = model(30, 50.0, 1e9);
    let signal = m.forward(&ExtinctionProfile::zeros(30)).unwrap();
    assert_eq!(signal.values(), m.d());
}
