//! Monte Carlo evaluation: synthetic scenarios, SNR regimes, noise ensembles
//! and discrepancy-driven parameter scans.

mod ensemble;
mod scan;
mod scenario;

pub use ensemble::{
    default_z_cut, discrepancy, run_ensemble, AlgorithmEnsemble, EnsembleResult,
    EnsembleSettings, RealizationFailure, Sampling, MAX_FAILURE_FRACTION,
};
pub use scan::{log_grid, scan_parameters, ScanParameter, ScanRow, ScanTable};
pub use scenario::{
    make_scenario, set_snr_regime, BoundaryLayer, GaussianLayer, GridSpec, SnrRegime,
    SyntheticScenario, MAX_LAYERS,
};
