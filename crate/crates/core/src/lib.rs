//! Retrieval of non-negative atmospheric extinction profiles from
//! Poisson-distributed Raman lidar signals.
//!
//! The forward model is `P* = d ⊙ exp(−Lα)` on an altitude grid, with `L`
//! a cumulative-integral operator and `d` the known system function. Observed
//! counts are Poisson with mean `P*`.
//!
//! Five inversions are provided:
//! - [`solvers::solve_kkt`]: early-stopped Poisson maximum likelihood, a
//!   scaled gradient ascent whose unit step is the multiplicative KKT update;
//! - [`solvers::solve_kkt_l2`]: the same with an ℓ² penalty `γ‖α‖²`;
//! - [`solvers::solve_rl`]: Richardson–Lucy on `y = log(d / P)`;
//! - [`solvers::solve_tikhonov`]: plain or weighted Tikhonov on `y`.
//!
//! [`experiments`] reproduces the Monte Carlo protocol (noise ensembles,
//! SNR regimes through `C_μ`, discrepancy scans) and [`verify`] holds the
//! numerical self-checks.
//!
//! ```
//! use lidar_retrieval::experiments::SyntheticScenario;
//! use lidar_retrieval::model::sample_poisson;
//! use lidar_retrieval::solvers::{retrieve, Algorithm, SolverConfig};
//!
//! let (truth, model) = SyntheticScenario::simulation_1(100).build().unwrap();
//! let model = model.with_c_mu_scaled(10.0).unwrap();
//! let counts = sample_poisson(&model.expected_counts(&truth).unwrap(), 7).unwrap();
//! let config = SolverConfig::new(Algorithm::Kkt).with_iterations(50);
//! let report = retrieve(&model, &counts, &config, None).unwrap();
//! assert!(report.estimate.iter().all(|a| *a >= 0.0));
//! ```

pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod objective;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    AltitudeGrid, CumulativeOperator, DensityModel, ExtinctionProfile, ForwardModel, Signal,
    SignalKind, SystemFunction,
};
pub use solvers::{Algorithm, SolverConfig, SolverReport};
