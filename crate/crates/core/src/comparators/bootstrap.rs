use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{quantile_sorted, sorted_copy};
use crate::model::{ModelKind, ObservationRecord, PicParameters};
use crate::par::map_indexed;
use crate::report::{derived_names, derived_values, parameter_names, parameter_values, FitSummary, Profile, SummaryRow};
use crate::rng::substream;

use super::pi_mle::{refit_from, MleConfig, PiFit};

pub const MIN_RESAMPLES: usize = 100;
/// Largest tolerated share of failed refits.
pub const MAX_FAILED_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    pub mle: MleConfig,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 500,
            seed: 1,
            mle: MleConfig::default(),
        }
    }
}

/// Percentile intervals from case resampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapIntervals {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Quantity values of each successful resample, in resample order.
    pub draws: Vec<Vec<f64>>,
    pub n_failed: usize,
    pub n_resamples: usize,
}

/// Draws `resamples` case resamples of `records` (resample `b` uses stream
/// `b` of `seed`) and applies `estimator` to each. Failed estimates are
/// returned as `None`.
pub fn resample_estimates<F>(
    records: &[ObservationRecord],
    resamples: usize,
    seed: u64,
    estimator: F,
) -> Vec<Option<Vec<f64>>>
where
    F: Fn(&[ObservationRecord], u64) -> Result<Vec<f64>> + Sync + Send,
{
    let n = records.len();
    map_indexed(resamples, |b| {
        let mut rng = substream(seed, b as u64);
        let sample: Vec<ObservationRecord> =
            (0..n).map(|_| records[rng.random_range(0..n)].clone()).collect();
        estimator(&sample, b as u64).ok()
    })
}

/// Equal-tailed 95% percentile intervals per quantity. Errors with
/// [`Error::CiUnavailable`] when more than a fifth of resamples failed.
pub fn percentile_intervals(estimates: &[Option<Vec<f64>>]) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let total = estimates.len();
    let ok: Vec<Vec<f64>> = estimates.iter().flatten().cloned().collect();
    let failed = total - ok.len();
    if ok.is_empty() || failed as f64 > MAX_FAILED_SHARE * total as f64 {
        return Err(Error::CiUnavailable { failed, total });
    }
    let k = ok[0].len();
    let mut lower = Vec::with_capacity(k);
    let mut upper = Vec::with_capacity(k);
    for q in 0..k {
        let sorted = sorted_copy(&ok.iter().map(|v| v[q]).collect::<Vec<_>>());
        lower.push(quantile_sorted(&sorted, 0.025));
        upper.push(quantile_sorted(&sorted, 0.975));
    }
    Ok((lower, upper, ok))
}

fn quantities(p: &PicParameters, profiles: &[Profile], times: &[f64]) -> Result<Vec<f64>> {
    let mut out = parameter_values(p, ModelKind::Pi);
    for profile in profiles {
        out.extend(derived_values(p, ModelKind::Pi, profile, times)?);
    }
    Ok(out)
}

fn quantity_names(fit: &PiFit, profiles: &[Profile], times: &[f64]) -> Vec<String> {
    let mut names = parameter_names(ModelKind::Pi, fit.layout.q_mix, fit.layout.q_inc);
    for profile in profiles {
        names.extend(derived_names(ModelKind::Pi, profile, times));
    }
    names
}

/// Nonparametric bootstrap of a PI fit: every resample is refitted from the
/// original optimum and percentile intervals are formed for the parameters
/// and, at each profile, prevalence and survival at `times`.
pub fn bootstrap_ci(
    records: &[ObservationRecord],
    fit: &mut PiFit,
    config: &BootstrapConfig,
    profiles: &[Profile],
    times: &[f64],
) -> Result<BootstrapIntervals> {
    if config.resamples < MIN_RESAMPLES {
        return Err(Error::InvalidConfig(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {}",
            config.resamples
        )));
    }
    if !fit.converged {
        return Err(Error::InvalidConfig("bootstrap requires a converged fit".into()));
    }
    config.mle.validate()?;
    for profile in profiles {
        profile.check(&fit.point)?;
    }
    let estimates = quantities(&fit.point, profiles, times)?;
    let start = fit.theta.clone();
    let thetas = resample_estimates(records, config.resamples, config.seed, |sample, b| {
        refit_from(sample, &start, &config.mle, config.seed.wrapping_add(b)).map(|f| f.theta)
    });
    let layout = fit.layout;
    let values: Vec<Option<Vec<f64>>> = thetas
        .iter()
        .map(|t| t.as_ref().and_then(|t| quantities(&layout.from_optimizer(t), profiles, times).ok()))
        .collect();
    let n_failed = values.iter().filter(|v| v.is_none()).count();
    let (lower, upper, draws) = percentile_intervals(&values)?;
    fit.bootstrap = Some(thetas.into_iter().flatten().collect());
    Ok(BootstrapIntervals {
        names: quantity_names(fit, profiles, times),
        estimates,
        lower,
        upper,
        draws,
        n_failed,
        n_resamples: config.resamples,
    })
}

/// Summary of a PI fit in the same shape as posterior summaries, with
/// `method = "pi-mle"`.
pub fn pi_summary(
    fit: &PiFit,
    intervals: Option<&BootstrapIntervals>,
    profiles: &[Profile],
    times: &[f64],
    time_unit: &str,
    n_records: usize,
) -> Result<FitSummary> {
    let names = quantity_names(fit, profiles, times);
    let values = quantities(&fit.point, profiles, times)?;
    // parameter_values order: alpha, lambda, m_tilde, beta_pi.., gamma..
    let nat = fit.natural_se();
    let mut se: Vec<Option<f64>> = vec![Some(nat[0]), Some(nat[1]), None];
    se.extend(nat[2..].iter().map(|v| Some(*v)));
    let rows = names
        .into_iter()
        .zip(values)
        .enumerate()
        .map(|(k, (name, estimate))| SummaryRow {
            name,
            estimate,
            lower: intervals.map(|b| b.lower[k]),
            upper: intervals.map(|b| b.upper[k]),
            rhat: None,
            ess: None,
            se: se.get(k).copied().flatten(),
        })
        .collect();
    let mut warnings = Vec::new();
    if let Some(b) = intervals {
        if b.n_failed > 0 {
            warnings.push(format!("{} of {} bootstrap refits failed", b.n_failed, b.n_resamples));
        }
    }
    Ok(FitSummary {
        method: "pi-mle".into(),
        model: ModelKind::Pi,
        time_unit: time_unit.to_string(),
        n_records,
        converged: fit.converged,
        max_rhat: None,
        log_likelihood: Some(fit.log_likelihood),
        rows,
        warnings,
    })
}
