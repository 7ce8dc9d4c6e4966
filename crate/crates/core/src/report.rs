//! Fit summaries shared by the Bayesian and maximum-likelihood routes, and
//! the covariate profiles at which derived quantities are reported.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{check_len, marginal_survival, ModelKind, PicParameters};

/// A covariate pattern at which prevalence, cure and survival are reported.
/// `x_mix` includes the intercept; both vectors are on the model's
/// (possibly centered) covariate scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub x_mix: Vec<f64>,
    pub x_inc: Vec<f64>,
}

impl Profile {
    pub fn new(name: impl Into<String>, x_mix: Vec<f64>, x_inc: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            x_mix,
            x_inc,
        }
    }

    /// All covariates zero.
    pub fn base(q_mix: usize, q_inc: usize) -> Self {
        let mut x_mix = vec![0.0; q_mix];
        x_mix[0] = 1.0;
        Self::new("base", x_mix, vec![0.0; q_inc])
    }

    pub fn check(&self, params: &PicParameters) -> Result<()> {
        check_len("profile x_mix", params.q_mix(), self.x_mix.len())?;
        check_len("profile x_inc", params.q_inc(), self.x_inc.len())
    }
}

/// Scalar quantities derived from one parameter point, in a fixed order:
/// prevalence, cure (PIC only), then survival at each time.
pub fn derived_values(
    params: &PicParameters,
    model: ModelKind,
    profile: &Profile,
    times: &[f64],
) -> Result<Vec<f64>> {
    profile.check(params)?;
    let mix = params.mixture(&profile.x_mix, model)?;
    let mut out = vec![mix.pi];
    if model.has_cure() {
        out.push(mix.delta);
    }
    for &t in times {
        out.push(marginal_survival(t, &profile.x_mix, &profile.x_inc, params, model)?);
    }
    Ok(out)
}

pub fn derived_names(model: ModelKind, profile: &Profile, times: &[f64]) -> Vec<String> {
    let mut out = vec![format!("prevalence[{}]", profile.name)];
    if model.has_cure() {
        out.push(format!("cure[{}]", profile.name));
    }
    out.extend(times.iter().map(|t| format!("survival[{}](t={t})", profile.name)));
    out
}

/// Natural-scale parameter names in reporting order.
pub fn parameter_names(model: ModelKind, q_mix: usize, q_inc: usize) -> Vec<String> {
    let mut out = vec!["alpha".to_string(), "lambda".to_string(), "m_tilde".to_string()];
    out.extend((1..=q_mix).map(|j| format!("beta_pi_{j}")));
    if model.has_cure() {
        out.extend((1..=q_mix).map(|j| format!("beta_delta_{j}")));
    }
    out.extend((1..=q_inc).map(|j| format!("gamma_{j}")));
    out
}

pub fn parameter_values(params: &PicParameters, model: ModelKind) -> Vec<f64> {
    let mut out = vec![params.alpha, params.lambda, params.median_time()];
    out.extend_from_slice(&params.beta_pi);
    if model.has_cure() {
        out.extend_from_slice(&params.beta_delta);
    }
    out.extend_from_slice(&params.gamma);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    /// Posterior median or maximum-likelihood estimate.
    pub estimate: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub rhat: Option<f64>,
    #[serde(default)]
    pub ess: Option<f64>,
    #[serde(default)]
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    /// `pic-mcmc`, `pi-mcmc` or `pi-mle`.
    pub method: String,
    pub model: ModelKind,
    pub time_unit: String,
    pub n_records: usize,
    pub converged: bool,
    #[serde(default)]
    pub max_rhat: Option<f64>,
    #[serde(default)]
    pub log_likelihood: Option<f64>,
    pub rows: Vec<SummaryRow>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl FitSummary {
    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}
