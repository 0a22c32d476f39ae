//! The JSON run configuration. Every field is optional; omitted fields take
//! the defaults below and the resolved document is echoed into the output
//! directory as `effective_config.json`.

use std::path::{Path, PathBuf};

use lidar_retrieval::experiments::{ScanParameter, SyntheticScenario};
use lidar_retrieval::{Algorithm, Error, Result, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: SyntheticScenario,
    /// `z_m,value` CSV replacing the parametric truth shape of `scenario`.
    pub truth_profile: Option<PathBuf>,
    pub inputs: Inputs,
    pub algorithms: Vec<SolverConfig>,
    /// `C_μ` multiplier used by `simulate` and `scan`.
    pub snr_multiplier: f64,
    /// `C_μ` multipliers run by `ensemble`, one output file each.
    pub snr_multipliers: Vec<f64>,
    /// Noisy signals written by `simulate`.
    pub n_signals: usize,
    pub n_realizations: usize,
    /// Discrepancy cutoff in meters; defaults to the grid midpoint.
    pub z_cut: Option<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub scan: ScanSpec,
    pub quiet: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: SyntheticScenario::default(),
            truth_profile: None,
            inputs: Inputs::default(),
            algorithms: Algorithm::ALL.into_iter().map(SolverConfig::new).collect(),
            snr_multiplier: 1.0,
            snr_multipliers: vec![1.0, 10.0, 100.0],
            n_signals: 1,
            n_realizations: 100,
            z_cut: None,
            seed: 0,
            output_dir: PathBuf::from("out"),
            scan: ScanSpec::default(),
            quiet: false,
        }
    }
}

/// Files consumed by `retrieve`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub signal: Option<PathBuf>,
    pub system_function: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    pub algorithm: Algorithm,
    /// Defaults to iterations for KKT and RL, γ otherwise.
    pub parameter: Option<ScanParameter>,
    /// Defaults to a log grid around the algorithm's default setting.
    pub values: Option<Vec<f64>>,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::KktL2,
            parameter: None,
            values: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Keeps only `names`, in the given order. Algorithms configured in the
    /// file keep their settings; the rest get defaults.
    pub fn select_algorithms(&mut self, names: &[Algorithm]) {
        self.algorithms = names
            .iter()
            .map(|a| {
                self.algorithms
                    .iter()
                    .find(|c| c.algorithm == *a)
                    .cloned()
                    .unwrap_or_else(|| SolverConfig::new(*a))
            })
            .collect();
    }

    /// Config for `algorithm`: the configured one, or its defaults.
    pub fn solver(&self, algorithm: Algorithm) -> SolverConfig {
        self.algorithms
            .iter()
            .find(|c| c.algorithm == algorithm)
            .cloned()
            .unwrap_or_else(|| SolverConfig::new(algorithm))
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            a.validate()?;
            if self.algorithms[..i].iter().any(|b| b.algorithm == a.algorithm) {
                return Err(Error::Config(format!("algorithm {} listed twice", a.algorithm)));
            }
        }
        for m in std::iter::once(&self.snr_multiplier).chain(&self.snr_multipliers) {
            if !(*m > 0.0) || !m.is_finite() {
                return Err(Error::Config(format!("SNR multipliers must be positive, got {m}")));
            }
        }
        if self.snr_multipliers.is_empty() {
            return Err(Error::Config("snr_multipliers is empty".into()));
        }
        for path in self
            .truth_profile
            .iter()
            .chain(&self.inputs.signal)
            .chain(&self.inputs.system_function)
        {
            if !path.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", path.display())));
            }
        }
        Ok(())
    }
}
