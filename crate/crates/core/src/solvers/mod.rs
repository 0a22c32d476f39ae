//! The five inversion algorithms and the data preparation they share.

mod config;
mod kkt;
mod logdata;
mod report;
mod rl;
mod tikhonov;

pub use config::{
    Algorithm, ArmijoParams, InitRule, SolverConfig, StopRule, DEFAULT_INIT, DEFAULT_TOLERANCE,
    DEFAULT_WEIGHT_REALIZATIONS,
};
pub use kkt::{kkt_operator, kkt_scaling, penalized_kkt_operator, solve_kkt, solve_kkt_l2};
pub use logdata::{estimate_weights, log_transform, WeightMatrix, HALF_COUNT, VARIANCE_FLOOR};
pub use report::{KktResiduals, SolverReport, ACTIVE_BOUND};
pub use rl::{richardson_lucy, solve_rl};
pub use tikhonov::{solve_tikhonov, TikhonovSystem};

use crate::error::{Error, Result};
use crate::model::{ForwardModel, Signal};
use crate::objective::truncate_trailing_zeros;

/// Runs `config.algorithm` on data that may end in zero counts.
///
/// Data and model are cut at the last non-zero sample, the solver runs on the
/// retained range and the estimate is padded back to the full grid with zeros.
/// Weighted Tikhonov requires `weights` on the full grid.
pub fn retrieve(
    model: &ForwardModel,
    data: &Signal,
    config: &SolverConfig,
    weights: Option<&WeightMatrix>,
) -> Result<SolverReport> {
    config.validate()?;
    let full = model.len();
    let (data, model) = truncate_trailing_zeros(data, model)?;
    let k = model.len();
    let report = match config.algorithm {
        Algorithm::Kkt => solve_kkt(&model, &data, config)?,
        Algorithm::KktL2 => solve_kkt_l2(&model, &data, config.gamma, config)?,
        Algorithm::RichardsonLucy => solve_rl(&model, &data, config)?,
        Algorithm::Tikhonov => solve_tikhonov(&model, &data, config.gamma, None)?,
        Algorithm::WeightedTikhonov => {
            let weights = weights.ok_or_else(|| {
                Error::Config("weighted Tikhonov needs an estimated weight matrix".into())
            })?;
            if weights.len() != full {
                return Err(Error::Dimension {
                    context: "weights",
                    expected: full,
                    found: weights.len(),
                });
            }
            solve_tikhonov(&model, &data, config.gamma, Some(&weights.truncated(k)))?
        }
    };
    let mut report = report.padded(full);
    report.retained = k;
    Ok(report)
}
