use std::fmt;
use std::path::PathBuf;

use anyhow::Context;
use lidar_retrieval::experiments::{
    default_z_cut, discrepancy, log_grid, run_ensemble, scan_parameters, set_snr_regime,
    EnsembleSettings, ScanParameter,
};
use lidar_retrieval::io::{
    format_f64, read_profile_csv, write_atomic, write_ensemble_csv, write_profile_csv, write_rows,
    write_scan_csv,
};
use lidar_retrieval::model::{derive_seed, sample_poisson};
use lidar_retrieval::solvers::{estimate_weights, retrieve, KktResiduals};
use lidar_retrieval::verify::{run_all, CheckOptions, Fault};
use lidar_retrieval::{
    Algorithm, AltitudeGrid, Error, ExtinctionProfile, ForwardModel, Signal, SolverConfig,
    SolverReport, SystemFunction,
};
use serde::Serialize;

use crate::config::RunConfig;

/// Seed stream of the weight simulation, disjoint from realization streams.
const WEIGHT_STREAM: u64 = u64::MAX;

/// One or more self-checks failed.
#[derive(Debug)]
pub struct CheckFailed(pub usize);

impl fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} self-check(s) failed", self.0)
    }
}

impl std::error::Error for CheckFailed {}

macro_rules! progress {
    ($cfg:expr, $($arg:tt)*) => {
        if !$cfg.quiet {
            eprintln!($($arg)*);
        }
    };
}

fn truth_and_model(cfg: &RunConfig) -> anyhow::Result<(ExtinctionProfile, ForwardModel)> {
    Ok(match &cfg.truth_profile {
        Some(path) => {
            let (z, values) = read_profile_csv(path)?;
            cfg.scenario
                .with_truth(z, values)
                .with_context(|| format!("truth profile {}", path.display()))?
        }
        None => cfg.scenario.build()?,
    })
}

/// Creates the output directory and echoes the resolved config into it.
fn prepare_output(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let mut text = serde_json::to_string_pretty(cfg)?;
    text.push('\n');
    write_atomic(&dir.join("effective_config.json"), text.as_bytes())?;
    Ok(dir)
}

fn multiplier_label(m: f64) -> String {
    if m.fract() == 0.0 && m < 1e15 {
        format!("{}", m as u64)
    } else {
        format_f64(m)
    }
}

pub fn simulate(cfg: &RunConfig) -> anyhow::Result<()> {
    let (truth, model) = truth_and_model(cfg)?;
    let model = set_snr_regime(&model, cfg.snr_multiplier)?;
    let dir = prepare_output(cfg)?;
    let z = model.grid().heights();
    write_profile_csv(&dir.join("truth.csv"), z, &truth)?;
    write_profile_csv(&dir.join("system_function.csv"), z, model.d())?;
    let expected = model.expected_counts(&truth)?;
    write_profile_csv(&dir.join("signal_noise_free.csv"), z, &expected)?;
    for r in 0..cfg.n_signals {
        let noisy = sample_poisson(&expected, derive_seed(cfg.seed, r as u64))?;
        write_profile_csv(&dir.join(format!("signal_noisy_{r:03}.csv")), z, noisy.values())?;
    }
    progress!(cfg, "simulate: {} grid points, {} noisy signal(s) in {}", z.len(), cfg.n_signals, dir.display());
    Ok(())
}

fn read_inputs(cfg: &RunConfig) -> anyhow::Result<(ForwardModel, Signal)> {
    let missing = |what: &str| Error::Config(format!("retrieve needs inputs.{what} in the config"));
    let signal_path = cfg.inputs.signal.as_deref().ok_or_else(|| missing("signal"))?;
    let system_path = cfg.inputs.system_function.as_deref().ok_or_else(|| missing("system_function"))?;
    let (zs, counts) = read_profile_csv(signal_path)?;
    let (zd, d) = read_profile_csv(system_path)?;
    if zs.len() != zd.len() {
        return Err(Error::Dimension {
            context: "signal vs system-function grid",
            expected: zd.len(),
            found: zs.len(),
        }
        .into());
    }
    if let Some(row) = zs.iter().zip(&zd).position(|(a, b)| a != b) {
        return Err(Error::Data(format!(
            "grid mismatch between {} and {} at row {}: {} vs {}",
            signal_path.display(),
            system_path.display(),
            row + 2,
            zs[row],
            zd[row]
        ))
        .into());
    }
    let grid = AltitudeGrid::from_heights(zs)?;
    let system = SystemFunction::from_values(&grid, d)
        .with_context(|| format!("system function {}", system_path.display()))?;
    let model = ForwardModel::new(grid, system)?;
    let data = Signal::infer(counts).with_context(|| format!("signal {}", signal_path.display()))?;
    Ok((model, data))
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    config: &'a SolverConfig,
    iterations_run: usize,
    converged: bool,
    stagnated: bool,
    retained: usize,
    final_objective: Option<f64>,
    scaled_complementarity: Option<f64>,
    scaled_dual_feasibility: Option<f64>,
    kkt_residuals: Option<KktResiduals>,
    objective_trace: &'a [f64],
    step_trace: &'a [f64],
}

impl<'a> Diagnostics<'a> {
    fn new(config: &'a SolverConfig, report: &'a SolverReport) -> Self {
        let residuals = report.kkt_residuals;
        Self {
            config,
            iterations_run: report.iterations_run,
            converged: report.converged,
            stagnated: report.stagnated,
            retained: report.retained,
            final_objective: report.objective_trace.last().copied(),
            scaled_complementarity: residuals.map(|r| r.scaled_complementarity()),
            scaled_dual_feasibility: residuals.and_then(|r| r.scaled_dual_feasibility()),
            kkt_residuals: residuals,
            objective_trace: &report.objective_trace,
            step_trace: &report.step_trace,
        }
    }
}

pub fn retrieve_cmd(cfg: &RunConfig) -> anyhow::Result<()> {
    let (model, data) = read_inputs(cfg)?;
    let dir = prepare_output(cfg)?;
    let z = model.grid().heights();
    for config in &cfg.algorithms {
        let algorithm = config.algorithm;
        let weights = if algorithm == Algorithm::WeightedTikhonov {
            // No truth is available here, so weights are simulated around a
            // KKT_L2 pilot estimate of the same data.
            let pilot = retrieve(&model, &data, &cfg.solver(Algorithm::KktL2), None)
                .context("weighted_tikhonov: KKT_L2 pilot estimate")?;
            let pilot = ExtinctionProfile::new(pilot.estimate)?;
            let w = estimate_weights(
                &model,
                &pilot,
                config.weight_realizations,
                derive_seed(cfg.seed, WEIGHT_STREAM),
            )
            .context("weighted_tikhonov: weight estimation")?;
            Some(w)
        } else {
            None
        };
        let report = retrieve(&model, &data, config, weights.as_ref())
            .with_context(|| format!("algorithm {algorithm}"))?;
        write_profile_csv(&dir.join(format!("estimate_{algorithm}.csv")), z, &report.estimate)?;
        let mut text = serde_json::to_string_pretty(&Diagnostics::new(config, &report))?;
        text.push('\n');
        write_atomic(&dir.join(format!("diagnostics_{algorithm}.json")), text.as_bytes())?;
        progress!(
            cfg,
            "{algorithm}: {} iteration(s), {} of {} samples retained",
            report.iterations_run,
            report.retained,
            z.len()
        );
    }
    Ok(())
}

pub fn ensemble(cfg: &RunConfig) -> anyhow::Result<()> {
    let (truth, base) = truth_and_model(cfg)?;
    let dir = prepare_output(cfg)?;
    let heights = base.grid().heights();
    let z_cut = cfg.z_cut.unwrap_or_else(|| default_z_cut(heights));
    let settings = EnsembleSettings::new(cfg.n_realizations, cfg.seed);
    let mut summary = Vec::new();
    for &m in &cfg.snr_multipliers {
        let model = set_snr_regime(&base, m)?;
        let result = run_ensemble(&truth, &model, &cfg.algorithms, &settings)
            .with_context(|| format!("ensemble at multiplier {m}"))?;
        write_ensemble_csv(&dir.join(format!("ensemble_x{}.csv", multiplier_label(m))), &result)?;
        for a in &result.algorithms {
            let d = discrepancy(&a.mean, &truth, heights, z_cut)?;
            progress!(cfg, "x{:<6} {:<18} discrepancy {d:.3e}  mean std {:.3e}", multiplier_label(m), a.algorithm().name(), a.mean_std());
            summary.push(vec![
                format_f64(m),
                a.algorithm().name().to_string(),
                format_f64(d),
                format_f64(a.mean_std()),
                a.failures.len().to_string(),
            ]);
        }
    }
    write_rows(
        &dir.join("summary.csv"),
        &["multiplier", "algorithm", "discrepancy", "mean_std", "failures"],
        summary.into_iter(),
    )?;
    Ok(())
}

/// Fills in the scan parameter and grid when the config leaves them open.
pub fn resolve_scan(cfg: &mut RunConfig) -> anyhow::Result<()> {
    let base = cfg.solver(cfg.scan.algorithm);
    let parameter = *cfg
        .scan
        .parameter
        .get_or_insert(ScanParameter::for_algorithm(base.algorithm));
    if cfg.scan.values.is_none() {
        let center = match parameter {
            ScanParameter::Gamma => base.gamma,
            ScanParameter::Iterations => base.stop.max_iterations() as f64,
        };
        if !(center > 0.0) {
            return Err(Error::Config(format!(
                "cannot center a default scan grid for {} on {center}; give scan.values",
                base.algorithm
            ))
            .into());
        }
        cfg.scan.values = Some(log_grid(center, 4, 2, parameter));
    }
    Ok(())
}

pub fn scan(cfg: &RunConfig) -> anyhow::Result<()> {
    let (truth, model) = truth_and_model(cfg)?;
    let model = set_snr_regime(&model, cfg.snr_multiplier)?;
    let base = cfg.solver(cfg.scan.algorithm);
    let parameter = cfg.scan.parameter.unwrap_or(ScanParameter::for_algorithm(base.algorithm));
    let values = cfg.scan.values.clone().unwrap_or_default();
    let dir = prepare_output(cfg)?;
    let z_cut = cfg.z_cut.unwrap_or_else(|| default_z_cut(model.grid().heights()));
    let settings = EnsembleSettings::new(cfg.n_realizations, cfg.seed);
    let table = scan_parameters(&truth, &model, &base, parameter, &values, &settings, z_cut)?;
    write_scan_csv(&dir.join("scan.csv"), &table)?;
    let best = table.best_row();
    progress!(
        cfg,
        "{}: best {:?} = {} (discrepancy {:.3e})",
        table.algorithm,
        parameter,
        format_f64(best.parameter),
        best.discrepancy
    );
    Ok(())
}

pub fn check(seed: u64, fault: Option<Fault>) -> anyhow::Result<()> {
    let outcomes = run_all(&CheckOptions { seed, fault })?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    for o in &outcomes {
        println!(
            "{} {:<20} worst {:.3e} (threshold {:.1e}) {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.worst,
            o.threshold,
            o.detail
        );
    }
    if failed > 0 {
        return Err(CheckFailed(failed).into());
    }
    Ok(())
}

/// Exit status for an error: 2 configuration or I/O, 3 data, 4 numerical or failed check.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<CheckFailed>().is_some() {
        return 4;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Data(_) | Error::Dimension { .. } | Error::Csv { .. }) => 3,
        Some(Error::Numerical { .. }) => 4,
        _ => 2,
    }
}
