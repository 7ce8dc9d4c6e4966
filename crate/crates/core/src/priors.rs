//! Prior specification built from elicited 95% quantiles.
//!
//! Every prior is a normal on the sampling scale
//! `(log alpha, log m, beta_pi, beta_delta, gamma)`: lognormal priors on the
//! shape, the base-group median time, the prevalence/cure-to-incidence ratios
//! and the odds and hazard ratios become normals on the log scale.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::ParamLayout;
use crate::model::check_len;

/// Standard normal 97.5% quantile.
pub const PHI_INV_975: f64 = 1.959_963_984_540_054_5;

/// Normal distribution on the sampling scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalSpec {
    pub mu: f64,
    pub sigma: f64,
}

/// Lognormal distribution, parameterized on the log scale.
pub type LogNormalSpec = NormalSpec;

impl NormalSpec {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "normal spec needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - 0.5 * (2.0 * PI).ln()
    }

    /// Lower and upper 95% quantiles on the exponentiated scale.
    pub fn lognormal_quantiles(&self) -> (f64, f64) {
        (
            (self.mu - PHI_INV_975 * self.sigma).exp(),
            (self.mu + PHI_INV_975 * self.sigma).exp(),
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mu + self.sigma * z
    }
}

/// Lognormal parameters whose 2.5% and 97.5% quantiles are `(ci_low, ci_high)`.
pub fn lognormal_from_quantiles(ci_low: f64, ci_high: f64) -> Result<LogNormalSpec> {
    if !(ci_low > 0.0 && ci_high > ci_low && ci_high.is_finite()) {
        return Err(Error::QuantileOrder {
            low: ci_low,
            high: ci_high,
        });
    }
    let (lo, hi) = (ci_low.ln(), ci_high.ln());
    NormalSpec::new(0.5 * (lo + hi), (hi - lo) / (2.0 * PHI_INV_975))
}

/// Lognormal priors on the prevalence-to-incidence and cure-to-incidence
/// ratios of the base group are normal priors on the two intercepts.
pub fn ratio_priors_to_intercepts(
    r_pi: LogNormalSpec,
    r_delta: LogNormalSpec,
) -> (NormalSpec, NormalSpec) {
    (r_pi, r_delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicPriorSpec {
    pub alpha: LogNormalSpec,
    /// Median event time of the incident component in the base group.
    pub median_time: LogNormalSpec,
    pub beta_pi: Vec<NormalSpec>,
    #[serde(default)]
    pub beta_delta: Vec<NormalSpec>,
    pub gamma: Vec<NormalSpec>,
    #[serde(default = "default_time_unit")]
    pub time_unit: String,
}

fn default_time_unit() -> String {
    "years".to_string()
}

impl PicPriorSpec {
    /// Checks that the spec covers every coordinate of `layout`.
    pub fn check(&self, layout: &ParamLayout) -> Result<()> {
        check_len("beta_pi prior", layout.q_mix, self.beta_pi.len())?;
        if layout.model.has_cure() {
            check_len("beta_delta prior", layout.q_mix, self.beta_delta.len())?;
        }
        check_len("gamma prior", layout.q_inc, self.gamma.len())?;
        let all = [self.alpha, self.median_time]
            .into_iter()
            .chain(self.beta_pi.iter().copied())
            .chain(self.beta_delta.iter().copied())
            .chain(self.gamma.iter().copied());
        for n in all {
            NormalSpec::new(n.mu, n.sigma)?;
        }
        Ok(())
    }

    /// Per-coordinate normals in sampling-scale order.
    pub fn coordinates(&self, layout: &ParamLayout) -> Vec<NormalSpec> {
        let mut out = vec![self.alpha, self.median_time];
        out.extend_from_slice(&self.beta_pi);
        if layout.model.has_cure() {
            out.extend_from_slice(&self.beta_delta);
        }
        out.extend_from_slice(&self.gamma);
        out
    }

    pub fn draw<R: Rng + ?Sized>(&self, layout: &ParamLayout, rng: &mut R) -> Vec<f64> {
        self.coordinates(layout).iter().map(|n| n.sample(rng)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Log prior density at a sampling-scale point.
pub fn log_prior_density(theta: &[f64], spec: &PicPriorSpec, layout: &ParamLayout) -> Result<f64> {
    layout.check(theta)?;
    spec.check(layout)?;
    Ok(log_prior_unchecked(theta, &spec.coordinates(layout)))
}

pub(crate) fn log_prior_unchecked(theta: &[f64], coords: &[NormalSpec]) -> f64 {
    theta.iter().zip(coords).map(|(x, n)| n.log_density(*x)).sum()
}

/// The three prior presets of the cervical screening simulation
/// (two assignment coefficients, one incidence covariate, time in years).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "informative")]
    InformativeCervical,
    #[serde(rename = "vague")]
    VagueCervical,
    #[serde(rename = "misspecified")]
    MisspecifiedCervical,
}

impl Preset {
    pub const ALL: [Preset; 3] = [
        Preset::InformativeCervical,
        Preset::VagueCervical,
        Preset::MisspecifiedCervical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::InformativeCervical => "informative",
            Preset::VagueCervical => "vague",
            Preset::MisspecifiedCervical => "misspecified",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "informative" | "informativecervical" => Ok(Preset::InformativeCervical),
            "vague" | "vaguecervical" => Ok(Preset::VagueCervical),
            "misspecified" | "misspecifiedcervical" | "misspec" => {
                Ok(Preset::MisspecifiedCervical)
            }
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

fn n(mu: f64, sigma: f64) -> NormalSpec {
    NormalSpec { mu, sigma }
}

pub fn preset(which: Preset) -> PicPriorSpec {
    let ln2 = std::f64::consts::LN_2;
    match which {
        Preset::InformativeCervical => PicPriorSpec {
            alpha: n(ln2, 0.1),
            median_time: n((23.0f64 / 12.0).ln(), 0.2),
            beta_pi: vec![n(-0.07, 0.31), n(-0.89, 0.33)],
            beta_delta: vec![n(1.69, 0.22), n(0.00, 0.05)],
            gamma: vec![n(-0.69, 0.1)],
            time_unit: default_time_unit(),
        },
        Preset::VagueCervical => PicPriorSpec {
            alpha: n(0.0, 1.0),
            median_time: n(ln2, 1.0),
            beta_pi: vec![n(0.0, 1.0), n(0.0, 1.0)],
            beta_delta: vec![n(0.0, 1.0), n(0.0, 1.0)],
            gamma: vec![n(0.0, 1.0)],
            time_unit: default_time_unit(),
        },
        Preset::MisspecifiedCervical => PicPriorSpec {
            alpha: n(0.0, 0.31),
            median_time: n(ln2, 0.03),
            beta_pi: vec![n(0.0, 0.31), n(0.0, 0.31)],
            beta_delta: vec![n(0.0, 0.31), n(0.0, 0.31)],
            gamma: vec![n(0.0, 0.26)],
            time_unit: default_time_unit(),
        },
    }
}

/// Elicited 95% quantiles, each on the exponentiated (ratio) scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitedQuantiles {
    pub alpha: (f64, f64),
    pub median_time: (f64, f64),
    /// First entry: prevalence-to-incidence ratio; the rest: odds ratios.
    pub beta_pi: Vec<(f64, f64)>,
    /// First entry: cure-to-incidence ratio; the rest: odds ratios.
    #[serde(default)]
    pub beta_delta: Vec<(f64, f64)>,
    /// Hazard ratios.
    #[serde(default)]
    pub gamma: Vec<(f64, f64)>,
    #[serde(default = "default_time_unit")]
    pub time_unit: String,
}

pub fn elicit(q: &ElicitedQuantiles) -> Result<PicPriorSpec> {
    let each = |v: &[(f64, f64)]| -> Result<Vec<NormalSpec>> {
        v.iter().map(|&(lo, hi)| lognormal_from_quantiles(lo, hi)).collect()
    };
    let spec = PicPriorSpec {
        alpha: lognormal_from_quantiles(q.alpha.0, q.alpha.1)?,
        median_time: lognormal_from_quantiles(q.median_time.0, q.median_time.1)?,
        beta_pi: each(&q.beta_pi)?,
        beta_delta: each(&q.beta_delta)?,
        gamma: each(&q.gamma)?,
        time_unit: q.time_unit.clone(),
    };
    if spec.beta_pi.is_empty() {
        return Err(Error::InvalidConfig("beta_pi needs at least the intercept ratio".into()));
    }
    if !spec.beta_delta.is_empty() && spec.beta_delta.len() != spec.beta_pi.len() {
        return Err(Error::DimensionMismatch {
            what: "beta_delta quantiles",
            expected: spec.beta_pi.len(),
            actual: spec.beta_delta.len(),
        });
    }
    Ok(spec)
}
