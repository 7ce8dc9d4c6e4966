//! Domain types and closed-form quantities of the prevalence-incidence-cure
//! mixture: observation groups, the three-category logistic assignment model
//! and the Weibull proportional-hazards incidence model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observation group derived from a censoring interval `(left, right]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    /// Positive at the baseline test: `(-inf, 0]`.
    C1,
    /// Interval-censored incident event: `0 <= left < right < inf`.
    C2,
    /// Never observed positive: `0 <= left`, `right = inf`.
    C3,
    /// Baseline test missing, positive at first visit: `(-inf, right]`, `right > 0`.
    C4,
}

impl Group {
    pub fn index(self) -> usize {
        match self {
            Group::C1 => 0,
            Group::C2 => 1,
            Group::C3 => 2,
            Group::C4 => 3,
        }
    }
}

/// Which mixture is being fitted. `Pi` is the two-component model with the
/// cure component removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pic,
    Pi,
}

impl ModelKind {
    pub fn has_cure(self) -> bool {
        matches!(self, ModelKind::Pic)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Pic => f.write_str("pic"),
            ModelKind::Pi => f.write_str("pi"),
        }
    }
}

/// Classifies a censoring interval into one of the four observation groups.
///
/// `left = -inf` is shared by baseline positives and by subjects whose
/// baseline test is missing; `right` disambiguates (`0` versus positive).
/// A subject with no information at all, `(-inf, inf)`, is rejected.
pub fn classify(left: f64, right: f64) -> Result<Group> {
    let illegal = |reason| Error::IllegalInterval {
        left,
        right,
        reason,
    };
    if left.is_nan() || right.is_nan() {
        return Err(illegal("NaN endpoint"));
    }
    if left == f64::INFINITY {
        return Err(illegal("left endpoint cannot be +inf"));
    }
    if right == f64::NEG_INFINITY {
        return Err(illegal("right endpoint cannot be -inf"));
    }
    if left == f64::NEG_INFINITY {
        return if right == 0.0 {
            Ok(Group::C1)
        } else if right == f64::INFINITY {
            Err(illegal("subject carries no information"))
        } else if right > 0.0 {
            Ok(Group::C4)
        } else {
            Err(illegal("negative right endpoint"))
        };
    }
    if left < 0.0 {
        return Err(illegal("negative left endpoint"));
    }
    if right == f64::INFINITY {
        Ok(Group::C3)
    } else if right > left {
        Ok(Group::C2)
    } else {
        Err(illegal("right endpoint must exceed left endpoint"))
    }
}

/// One subject: censoring interval, covariates, and the derived group.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub id: String,
    pub left: f64,
    pub right: f64,
    /// Assignment-model covariates, leading `1.0` intercept included.
    pub x_mix: Vec<f64>,
    /// Incidence-model covariates, no intercept.
    pub x_inc: Vec<f64>,
    pub group: Group,
}

impl ObservationRecord {
    pub fn new(
        id: impl Into<String>,
        left: f64,
        right: f64,
        x_mix: Vec<f64>,
        x_inc: Vec<f64>,
    ) -> Result<Self> {
        let group = classify(left, right)?;
        if x_mix.is_empty() {
            return Err(Error::DimensionMismatch {
                what: "x_mix (intercept required)",
                expected: 1,
                actual: 0,
            });
        }
        if x_mix.iter().chain(&x_inc).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite covariate".into()));
        }
        Ok(Self {
            id: id.into(),
            left,
            right,
            x_mix,
            x_inc,
            group,
        })
    }
}

/// Latent status of a simulated subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LatentStatus {
    Prevalent,
    Incident,
    Cured,
}

impl LatentStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LatentStatus::Prevalent => "prevalent",
            LatentStatus::Incident => "incident",
            LatentStatus::Cured => "cured",
        }
    }
}

/// Simulation truth for one subject. `event_time` is present iff incident.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentTruth {
    pub status: LatentStatus,
    pub event_time: Option<f64>,
}

impl LatentTruth {
    pub fn prevalent() -> Self {
        Self {
            status: LatentStatus::Prevalent,
            event_time: None,
        }
    }

    pub fn cured() -> Self {
        Self {
            status: LatentStatus::Cured,
            event_time: None,
        }
    }

    pub fn incident(t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "incident event time must be positive and finite, got {t}"
            )));
        }
        Ok(Self {
            status: LatentStatus::Incident,
            event_time: Some(t),
        })
    }
}

/// Natural-scale model parameters. For the two-component model `beta_delta`
/// is ignored (conventionally left empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicParameters {
    pub alpha: f64,
    pub lambda: f64,
    pub beta_pi: Vec<f64>,
    pub beta_delta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl PicParameters {
    pub fn validate(&self, model: ModelKind) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.beta_pi.is_empty() {
            return Err(Error::DimensionMismatch {
                what: "beta_pi",
                expected: 1,
                actual: 0,
            });
        }
        if model.has_cure() && self.beta_delta.len() != self.beta_pi.len() {
            return Err(Error::DimensionMismatch {
                what: "beta_delta",
                expected: self.beta_pi.len(),
                actual: self.beta_delta.len(),
            });
        }
        Ok(())
    }

    pub fn q_mix(&self) -> usize {
        self.beta_pi.len()
    }

    pub fn q_inc(&self) -> usize {
        self.gamma.len()
    }

    /// Median event time of the incident component in the base group.
    pub fn median_time(&self) -> f64 {
        scale_to_median(self.lambda, self.alpha)
    }

    pub fn weibull(&self) -> WeibullPh {
        WeibullPh::new(self.alpha, self.lambda)
    }

    /// Mixture probabilities at `x_mix` under `model`.
    pub fn mixture(&self, x_mix: &[f64], model: ModelKind) -> Result<MixtureProbs> {
        match model {
            ModelKind::Pic => mixture_probs(&self.beta_pi, &self.beta_delta, x_mix),
            ModelKind::Pi => {
                check_len("x_mix", self.beta_pi.len(), x_mix.len())?;
                Ok(LogMixture::from_predictors(dot(&self.beta_pi, x_mix), None).probs())
            }
        }
    }
}

/// Probabilities of the three latent components for one covariate pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureProbs {
    pub pi: f64,
    pub delta: f64,
    pub incident: f64,
}

/// Log-probabilities of the three latent components. `log_delta` is `-inf`
/// for the two-component model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMixture {
    pub log_pi: f64,
    pub log_delta: f64,
    pub log_incident: f64,
}

impl LogMixture {
    /// Softmax over `(eta_pi, eta_delta, 0)` with the incident category as
    /// the reference. `eta_delta = None` drops the cure category.
    pub fn from_predictors(eta_pi: f64, eta_delta: Option<f64>) -> Self {
        let eta_delta = eta_delta.unwrap_or(f64::NEG_INFINITY);
        let m = eta_pi.max(eta_delta).max(0.0);
        let lse = m + ((eta_pi - m).exp() + (eta_delta - m).exp() + (-m).exp()).ln();
        Self {
            log_pi: eta_pi - lse,
            log_delta: eta_delta - lse,
            log_incident: -lse,
        }
    }

    pub fn probs(&self) -> MixtureProbs {
        let pi = self.log_pi.exp();
        let delta = self.log_delta.exp();
        MixtureProbs {
            pi,
            delta,
            incident: self.log_incident.exp(),
        }
    }
}

/// Three-category logistic assignment probabilities.
pub fn mixture_probs(beta_pi: &[f64], beta_delta: &[f64], x_mix: &[f64]) -> Result<MixtureProbs> {
    check_len("beta_delta", beta_pi.len(), beta_delta.len())?;
    check_len("x_mix", beta_pi.len(), x_mix.len())?;
    Ok(LogMixture::from_predictors(dot(beta_pi, x_mix), Some(dot(beta_delta, x_mix))).probs())
}

/// Weibull baseline with proportional-hazards covariate effects.
///
/// All methods take the linear predictor `lp = gamma . x_inc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullPh {
    pub alpha: f64,
    pub lambda: f64,
}

impl WeibullPh {
    pub fn new(alpha: f64, lambda: f64) -> Self {
        Self { alpha, lambda }
    }

    pub fn cumulative_hazard(&self, t: f64, lp: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t == f64::INFINITY {
            return f64::INFINITY;
        }
        (self.alpha * (t.ln() - self.lambda.ln()) + lp).exp()
    }

    pub fn survival(&self, t: f64, lp: f64) -> f64 {
        (-self.cumulative_hazard(t, lp)).exp()
    }

    /// Hazard at `t`. At `t = 0` with `alpha < 1` the hazard is singular and
    /// an error is returned.
    pub fn hazard(&self, t: f64, lp: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::InvalidParameter(format!("hazard time must be >= 0, got {t}")));
        }
        if t == 0.0 {
            return if self.alpha > 1.0 {
                Ok(0.0)
            } else if self.alpha == 1.0 {
                Ok(lp.exp() / self.lambda)
            } else {
                Err(Error::InvalidParameter(
                    "hazard at t = 0 is infinite when alpha < 1".into(),
                ))
            };
        }
        Ok(self.alpha / self.lambda.powf(self.alpha) * t.powf(self.alpha - 1.0) * lp.exp())
    }

    pub fn density(&self, t: f64, lp: f64) -> f64 {
        if t < 0.0 || t == f64::INFINITY {
            return 0.0;
        }
        match self.hazard(t, lp) {
            Ok(h) => h * self.survival(t, lp),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn log_density(&self, t: f64, lp: f64) -> f64 {
        if t <= 0.0 || t == f64::INFINITY {
            return self.density(t, lp).ln();
        }
        self.alpha.ln() - self.alpha * self.lambda.ln() + (self.alpha - 1.0) * t.ln() + lp
            - self.cumulative_hazard(t, lp)
    }

    /// Inverse of the survival function: the `t` with `S(t) = u`.
    pub fn inverse_survival(&self, u: f64, lp: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "uniform draw must lie in (0, 1), got {u}"
            )));
        }
        Ok(self.lambda * (-u.ln()).powf(1.0 / self.alpha) * (-lp / self.alpha).exp())
    }
}

pub fn weibull_survival(t: f64, params: &PicParameters, x_inc: &[f64]) -> f64 {
    params.weibull().survival(t, dot(&params.gamma, x_inc))
}

pub fn weibull_hazard(t: f64, params: &PicParameters, x_inc: &[f64]) -> Result<f64> {
    params.weibull().hazard(t, dot(&params.gamma, x_inc))
}

pub fn weibull_density(t: f64, params: &PicParameters, x_inc: &[f64]) -> f64 {
    params.weibull().density(t, dot(&params.gamma, x_inc))
}

/// Population probability of no event by `t`: `delta + (1 - pi - delta) S(t)`.
/// Prevalent subjects count as events before time zero.
pub fn marginal_survival(
    t: f64,
    x_mix: &[f64],
    x_inc: &[f64],
    params: &PicParameters,
    model: ModelKind,
) -> Result<f64> {
    check_len("x_inc", params.gamma.len(), x_inc.len())?;
    let mix = params.mixture(x_mix, model)?;
    Ok(mix.delta + mix.incident * weibull_survival(t, params, x_inc))
}

/// `m = lambda * ln(2)^(1/alpha)`
pub fn scale_to_median(lambda: f64, alpha: f64) -> f64 {
    lambda * std::f64::consts::LN_2.powf(1.0 / alpha)
}

/// `lambda = m / ln(2)^(1/alpha)`
pub fn median_to_scale(median: f64, alpha: f64) -> f64 {
    median / std::f64::consts::LN_2.powf(1.0 / alpha)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot product of vectors with different lengths");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const NEG_INF: f64 = f64::NEG_INFINITY;
    const INF: f64 = f64::INFINITY;

    fn truth() -> PicParameters {
        PicParameters {
            alpha: 2.0,
            lambda: 2.2,
            beta_pi: vec![0.799, -1.498],
            beta_delta: vec![2.296, -0.762],
            gamma: vec![-0.5],
        }
    }

    #[test]
    fn classify_groups() {
        assert_eq!(classify(NEG_INF, 0.0).unwrap(), Group::C1);
        assert_eq!(classify(1.2, 3.4).unwrap(), Group::C2);
        assert_eq!(classify(0.0, 3.4).unwrap(), Group::C2);
        assert_eq!(classify(2.0, INF).unwrap(), Group::C3);
        assert_eq!(classify(NEG_INF, 0.8).unwrap(), Group::C4);
    }

    #[test]
    fn classify_rejects_illegal() {
        for (l, r) in [
            (NEG_INF, INF),
            (2.0, 2.0),
            (3.0, 1.0),
            (-1.0, 2.0),
            (NEG_INF, -1.0),
            (f64::NAN, 1.0),
            (INF, INF),
        ] {
            assert!(
                matches!(classify(l, r), Err(Error::IllegalInterval { .. })),
                "({l}, {r}) accepted"
            );
        }
    }

    #[test]
    fn mixture_symmetric_and_paper_values() {
        let m = mixture_probs(&[0.0], &[0.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(m.pi, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.delta, 1.0 / 3.0, epsilon = 1e-15);

        let p = truth();
        let s16 = mixture_probs(&p.beta_pi, &p.beta_delta, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(s16.pi, 0.169, epsilon = 1e-3);
        assert_abs_diff_eq!(s16.delta, 0.755, epsilon = 1e-3);
        let s18 = mixture_probs(&p.beta_pi, &p.beta_delta, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(s18.pi, 0.081, epsilon = 1e-3);
        assert_abs_diff_eq!(s18.delta, 0.756, epsilon = 1e-3);
    }

    #[test]
    fn mixture_dimension_mismatch() {
        assert!(matches!(
            mixture_probs(&[0.0, 1.0], &[0.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(mixture_probs(&[0.0, 1.0], &[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn mixture_survives_overflow() {
        let m = mixture_probs(&[800.0], &[-800.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(m.pi, 1.0, epsilon = 1e-12);
        assert!(m.delta >= 0.0 && m.incident >= 0.0);
    }

    #[test]
    fn survival_examples() {
        let p = truth();
        assert_eq!(weibull_survival(0.0, &p, &[0.0]), 1.0);
        assert_abs_diff_eq!(weibull_survival(2.2, &p, &[0.0]), (-1.0f64).exp(), epsilon = 1e-12);
        // S(2 | x=1) = exp(-((2/2.2) * exp(-0.25))^2)
        assert_abs_diff_eq!(weibull_survival(2.0, &p, &[1.0]), 0.605_763, epsilon = 1e-5);
    }

    #[test]
    fn hazard_examples() {
        let expo = PicParameters {
            alpha: 1.0,
            ..truth()
        };
        for t in [0.0, 0.3, 5.0] {
            assert_abs_diff_eq!(weibull_hazard(t, &expo, &[0.0]).unwrap(), 1.0 / 2.2, epsilon = 1e-14);
        }
        let p = truth();
        assert_abs_diff_eq!(weibull_hazard(1.0, &p, &[0.0]).unwrap(), 2.0 / 4.84, epsilon = 1e-12);
        for t in [0.1, 1.0, 7.0] {
            let hr = weibull_hazard(t, &p, &[1.0]).unwrap() / weibull_hazard(t, &p, &[0.0]).unwrap();
            assert_abs_diff_eq!(hr, (-0.5f64).exp(), epsilon = 1e-12);
        }
        let shape_half = PicParameters {
            alpha: 0.5,
            ..truth()
        };
        assert!(weibull_hazard(0.0, &shape_half, &[0.0]).is_err());
        assert_eq!(weibull_hazard(0.0, &p, &[0.0]).unwrap(), 0.0);
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn density_normalizes_and_matches_product() {
        let p = truth();
        let total = simpson(|t| weibull_density(t, &p, &[0.0]), 0.0, 50.0, 20_000);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(weibull_density(2.2, &p, &[0.0]), 0.334_43, epsilon = 1e-4);
        assert_eq!(weibull_density(0.0, &p, &[0.0]), 0.0);
        let wb = p.weibull();
        assert_abs_diff_eq!(wb.log_density(1.3, -0.2), wb.density(1.3, -0.2).ln(), epsilon = 1e-12);
    }

    #[test]
    fn survival_difference_is_integrated_density() {
        let p = truth();
        for (l, r, x) in [(0.0, 1.0, 0.0), (0.5, 3.0, 1.0), (2.0, 2.5, 0.0)] {
            let diff = weibull_survival(l, &p, &[x]) - weibull_survival(r, &p, &[x]);
            let quad = simpson(|t| weibull_density(t, &p, &[x]), l, r, 4_000);
            assert!(diff > 0.0 && diff < 1.0);
            assert_abs_diff_eq!(diff, quad, epsilon = 1e-8);
        }
    }

    #[test]
    fn marginal_survival_truths() {
        let p = truth();
        let s16 = |t| marginal_survival(t, &[1.0, 0.0], &[0.0], &p, ModelKind::Pic).unwrap();
        let s18 = |t| marginal_survival(t, &[1.0, 1.0], &[1.0], &p, ModelKind::Pic).unwrap();
        assert_abs_diff_eq!(s16(2.0), 0.788, epsilon = 5e-3);
        assert_abs_diff_eq!(s16(10.0), 0.755, epsilon = 5e-3);
        assert_abs_diff_eq!(s18(5.0), 0.763, epsilon = 5e-3);
        let mix = p.mixture(&[1.0, 0.0], ModelKind::Pic).unwrap();
        assert_abs_diff_eq!(s16(0.0), 1.0 - mix.pi, epsilon = 1e-15);
        assert_abs_diff_eq!(s16(1e6), mix.delta, epsilon = 1e-9);
    }

    #[test]
    fn median_reparameterization() {
        let m = scale_to_median(2.2, 2.0);
        assert_abs_diff_eq!(m, 1.8317, epsilon = 1e-4);
        assert_abs_diff_eq!(m * 12.0, 22.0, epsilon = 0.1);
        assert_abs_diff_eq!(median_to_scale(std::f64::consts::LN_2, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(median_to_scale(m, 2.0), 2.2, epsilon = 1e-12);
    }

    #[test]
    fn inverse_survival_examples() {
        let wb = WeibullPh::new(2.0, 2.2);
        assert_abs_diff_eq!(wb.inverse_survival((-1.0f64).exp(), 0.0).unwrap(), 2.2, epsilon = 1e-12);
        assert_abs_diff_eq!(wb.inverse_survival(0.5, 0.0).unwrap(), 1.8317, epsilon = 1e-4);
        assert!(wb.inverse_survival(0.0, 0.0).is_err());
        assert!(wb.inverse_survival(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn mixture_is_a_distribution(
            bp in prop::collection::vec(-30.0..30.0f64, 2),
            bd in prop::collection::vec(-30.0..30.0f64, 2),
            x in -3.0..3.0f64,
        ) {
            let m = mixture_probs(&bp, &bd, &[1.0, x]).unwrap();
            for v in [m.pi, m.delta, m.incident] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((m.pi + m.delta + m.incident - 1.0).abs() < 1e-12);
        }

        #[test]
        fn mixture_monotone_and_relabel_consistent(
            a in -10.0..10.0f64, b in -10.0..10.0f64, bump in 0.01..3.0f64,
        ) {
            let m = mixture_probs(&[a], &[b], &[1.0]).unwrap();
            let up = mixture_probs(&[a + bump], &[b], &[1.0]).unwrap();
            prop_assert!(up.pi > m.pi);
            let up = mixture_probs(&[a], &[b + bump], &[1.0]).unwrap();
            prop_assert!(up.delta > m.delta);
            let swapped = mixture_probs(&[b], &[a], &[1.0]).unwrap();
            prop_assert!((swapped.pi - m.delta).abs() < 1e-14);
            prop_assert!((swapped.delta - m.pi).abs() < 1e-14);
        }

        #[test]
        fn inverse_survival_round_trip(u in 1e-6..(1.0 - 1e-6), alpha in 0.3..5.0f64, lp in -2.0..2.0f64) {
            let wb = WeibullPh::new(alpha, 2.2);
            let t = wb.inverse_survival(u, lp).unwrap();
            prop_assert!((wb.survival(t, lp) - u).abs() < 1e-12);
        }

        #[test]
        fn median_round_trip(lambda in 0.01..100.0f64, alpha in 0.1..10.0f64) {
            let back = median_to_scale(scale_to_median(lambda, alpha), alpha);
            prop_assert!((back - lambda).abs() <= 1e-12 * lambda.max(1.0));
            prop_assert!(scale_to_median(lambda * 1.01, alpha) > scale_to_median(lambda, alpha));
        }
    }
}
