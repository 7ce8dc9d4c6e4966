//! Posterior sampling, convergence diagnostics and posterior summaries.

mod diagnostics;
mod sampler;
mod summary;

pub use diagnostics::{effective_sample_size, gelman_rubin, quantile_sorted, sorted_copy};
pub use sampler::{
    sample_chains, sample_posterior, sample_prior, ChainSet, Init, LogTarget, PosteriorTarget,
    SamplerConfig,
};
pub use summary::{derived_quantities, natural_draws, summarize, summarize_trace, write_draws_csv, DerivedDraws};
