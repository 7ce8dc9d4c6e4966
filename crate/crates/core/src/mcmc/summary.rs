use std::io::Write;

use crate::error::Result;
use crate::report::{derived_names, derived_values, parameter_names, parameter_values, FitSummary, Profile, SummaryRow};

use super::diagnostics::{effective_sample_size, gelman_rubin, quantile_sorted, sorted_copy};
use super::sampler::ChainSet;

/// Per-chain draws of derived quantities at one covariate profile.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedDraws {
    pub names: Vec<String>,
    /// `values[quantity][chain][iteration]`
    pub values: Vec<Vec<Vec<f64>>>,
}

/// Prevalence, cure (PIC only) and marginal survival at each of `times`
/// for every retained draw.
pub fn derived_quantities(chains: &ChainSet, profile: &Profile, times: &[f64]) -> Result<DerivedDraws> {
    let model = chains.layout.model;
    let names = derived_names(model, profile, times);
    let mut values = vec![vec![Vec::with_capacity(chains.draws_per_chain()); chains.n_chains()]; names.len()];
    for (c, chain) in chains.draws.iter().enumerate() {
        for theta in chain {
            let p = chains.layout.from_sampling(theta);
            for (q, v) in derived_values(&p, model, profile, times)?.into_iter().enumerate() {
                values[q][c].push(v);
            }
        }
    }
    Ok(DerivedDraws { names, values })
}

/// Natural-scale parameter draws `[quantity][chain][iteration]`.
pub fn natural_draws(chains: &ChainSet) -> (Vec<String>, Vec<Vec<Vec<f64>>>) {
    let l = chains.layout;
    let names = parameter_names(l.model, l.q_mix, l.q_inc);
    let mut values = vec![vec![Vec::with_capacity(chains.draws_per_chain()); chains.n_chains()]; names.len()];
    for (c, chain) in chains.draws.iter().enumerate() {
        for theta in chain {
            let p = l.from_sampling(theta);
            for (q, v) in parameter_values(&p, l.model).into_iter().enumerate() {
                values[q][c].push(v);
            }
        }
    }
    (names, values)
}

pub fn summarize_trace(name: &str, per_chain: &[Vec<f64>]) -> SummaryRow {
    let pooled: Vec<f64> = per_chain.iter().flatten().copied().collect();
    let sorted = sorted_copy(&pooled);
    SummaryRow {
        name: name.to_string(),
        estimate: quantile_sorted(&sorted, 0.5),
        lower: Some(quantile_sorted(&sorted, 0.025)),
        upper: Some(quantile_sorted(&sorted, 0.975)),
        rhat: gelman_rubin(per_chain).ok(),
        ess: Some(effective_sample_size(per_chain)),
        se: None,
    }
}

/// Posterior medians and equal-tailed 95% credible intervals for the
/// natural-scale parameters and the derived quantities at each profile.
pub fn summarize(
    chains: &ChainSet,
    profiles: &[Profile],
    times: &[f64],
    time_unit: &str,
    n_records: usize,
) -> Result<FitSummary> {
    let (names, values) = natural_draws(chains);
    let mut rows: Vec<SummaryRow> = names
        .iter()
        .zip(&values)
        .map(|(n, v)| summarize_trace(n, v))
        .collect();
    for profile in profiles {
        let derived = derived_quantities(chains, profile, times)?;
        rows.extend(derived.names.iter().zip(&derived.values).map(|(n, v)| summarize_trace(n, v)));
    }
    let max_rhat = chains.max_rhat();
    Ok(FitSummary {
        method: format!("{}-mcmc", chains.layout.model),
        model: chains.layout.model,
        time_unit: time_unit.to_string(),
        n_records,
        converged: max_rhat < 1.1,
        max_rhat: Some(max_rhat),
        log_likelihood: None,
        rows,
        warnings: chains.warnings.clone(),
    })
}

/// Writes retained draws on natural scales:
/// `chain,iter,alpha,lambda,m_tilde,beta_pi_1..,beta_delta_1..,gamma_1..`.
pub fn write_draws_csv<W: Write>(chains: &ChainSet, mut out: W) -> Result<()> {
    let l = chains.layout;
    let names = parameter_names(l.model, l.q_mix, l.q_inc);
    writeln!(out, "chain,iter,{}", names.join(","))?;
    for (c, chain) in chains.draws.iter().enumerate() {
        for (i, theta) in chain.iter().enumerate() {
            let p = l.from_sampling(theta);
            let vals: Vec<String> = parameter_values(&p, l.model).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{c},{i},{}", vals.join(","))?;
        }
    }
    Ok(())
}
