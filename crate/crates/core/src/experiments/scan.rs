use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExtinctionProfile, ForwardModel};
use crate::solvers::{Algorithm, SolverConfig, StopRule};

use super::ensemble::{discrepancy, run_ensemble, EnsembleSettings};

/// The tuning knob varied by a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    /// Regularization weight γ.
    Gamma,
    /// Early-stopping iteration count.
    Iterations,
}

impl ScanParameter {
    /// The natural knob for each algorithm.
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Kkt | Algorithm::RichardsonLucy => ScanParameter::Iterations,
            _ => ScanParameter::Gamma,
        }
    }

    /// `config` with the knob set to `value`.
    pub fn apply(self, config: &SolverConfig, value: f64) -> Result<SolverConfig> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::Config(format!("scan value must be positive, got {value}")));
        }
        let mut config = config.clone();
        match self {
            ScanParameter::Gamma => config.gamma = value,
            ScanParameter::Iterations => {
                if value.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "iteration count must be an integer, got {value}"
                    )));
                }
                config.stop = StopRule::Iterations(value as usize);
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub parameter: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanTable {
    pub algorithm: Algorithm,
    pub parameter: ScanParameter,
    pub rows: Vec<ScanRow>,
    /// Index of the smallest discrepancy (first one on ties).
    pub best: usize,
}

impl ScanTable {
    pub fn best_row(&self) -> ScanRow {
        self.rows[self.best]
    }

    pub fn best_config(&self, base: &SolverConfig) -> Result<SolverConfig> {
        self.parameter.apply(base, self.best_row().parameter)
    }
}

/// Runs an ensemble per parameter value and scores the mean profile against
/// the truth below `z_cut`.
pub fn scan_parameters(
    truth: &ExtinctionProfile,
    model: &ForwardModel,
    base: &SolverConfig,
    parameter: ScanParameter,
    values: &[f64],
    settings: &EnsembleSettings,
    z_cut: f64,
) -> Result<ScanTable> {
    if values.is_empty() {
        return Err(Error::Config("parameter grid is empty".into()));
    }
    let heights = model.grid().heights();
    let rows = values
        .iter()
        .map(|&value| {
            let config = parameter.apply(base, value)?;
            let result = run_ensemble(truth, model, std::slice::from_ref(&config), settings)?;
            let d = discrepancy(&result.algorithms[0].mean, truth, heights, z_cut)?;
            Ok(ScanRow {
                parameter: value,
                discrepancy: d,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = rows
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.discrepancy < rows[b].discrepancy { i } else { b });
    Ok(ScanTable {
        algorithm: base.algorithm,
        parameter,
        rows,
        best,
    })
}

/// Log-spaced grid `center · 10^(k / per_decade)` for `k` in `-half..=half`,
/// rounded to integers for iteration scans.
pub fn log_grid(center: f64, half: i32, per_decade: u32, parameter: ScanParameter) -> Vec<f64> {
    let mut values: Vec<f64> = (-half..=half)
        .map(|k| center * 10f64.powf(k as f64 / per_decade as f64))
        .map(|v| match parameter {
            ScanParameter::Iterations => v.round().max(1.0),
            ScanParameter::Gamma => v,
        })
        .collect();
    values.dedup();
    values
}
