//! Non-mixture-cure comparators: the two-component PI model fitted by
//! maximum likelihood with bootstrap intervals, and the Turnbull NPMLE.

mod bootstrap;
mod pi_mle;
mod turnbull;

pub use bootstrap::{
    bootstrap_ci, percentile_intervals, pi_summary, resample_estimates, BootstrapConfig,
    BootstrapIntervals, MAX_FAILED_SHARE, MIN_RESAMPLES,
};
pub use pi_mle::{fit_pi_mle, MleConfig, PiFit};
pub use turnbull::{turnbull_npmle, NpmleCurve};
