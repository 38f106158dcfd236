//! Model checking: posterior predictive checks and PSIS-LOO.

pub mod loo;
pub mod ppc;
pub mod psis;

pub use loo::{elpd_loo, LooReport, LooUnit};
pub use ppc::{
    ppc_pvalue, ppc_report, simulate_replicate, stat_positive_per_item, stat_positive_per_rater, vote_histogram, Axis,
    PpcReport, VoteHistogram,
};
pub use psis::{gpd_fit, psis_smooth};
