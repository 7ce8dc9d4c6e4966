//! Observed and complete-data log-likelihoods.
//!
//! Each record contributes the log of one factor, chosen by its group:
//!
//! | group | factor |
//! |-------|--------|
//! | C1 | `pi` |
//! | C2 | `(1 - pi - delta) (S(l) - S(r))` |
//! | C3 | `delta + (1 - pi - delta) S(l)` |
//! | C4 | `pi + (1 - pi - delta) (1 - S(r))` |
//!
//! Sums over mixtures are formed with log-sum-exp, and `S(l) - S(r)` as
//! `S(l) (1 - exp(-(H(r) - H(l))))` so that late intervals do not cancel.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::layout::ParamLayout;
use crate::model::{
    check_len, dot, Group, LatentStatus, LatentTruth, LogMixture, ModelKind, ObservationRecord,
    PicParameters,
};

#[derive(Debug, Clone, Copy)]
struct Prepared {
    group: Group,
    log_left: f64,
    log_right: f64,
    mix: usize,
    inc: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct MixTerms {
    log_pi: f64,
    log_delta: f64,
    log_inc: f64,
    pi: f64,
    delta: f64,
}

/// Precomputed view of a dataset for repeated likelihood evaluation.
///
/// Records are indexed against their distinct covariate patterns so that
/// mixture probabilities and linear predictors are computed once per pattern.
#[derive(Debug, Clone)]
pub struct LikelihoodEvaluator {
    layout: ParamLayout,
    records: Vec<Prepared>,
    mix_patterns: Vec<Vec<f64>>,
    inc_patterns: Vec<Vec<f64>>,
}

fn intern(patterns: &mut Vec<Vec<f64>>, index: &mut HashMap<Vec<u64>, usize>, x: &[f64]) -> usize {
    let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
    *index.entry(key).or_insert_with(|| {
        patterns.push(x.to_vec());
        patterns.len() - 1
    })
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 - exp(-h))` for `h >= 0`.
fn log_one_minus_exp_neg(h: f64) -> f64 {
    if h > std::f64::consts::LN_2 {
        (-(-h).exp()).ln_1p()
    } else {
        (-(-h).exp_m1()).ln()
    }
}

impl LikelihoodEvaluator {
    pub fn new(records: &[ObservationRecord], model: ModelKind) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyDataset)?;
        let layout = ParamLayout::new(model, first.x_mix.len(), first.x_inc.len());
        let mut mix_patterns = Vec::new();
        let mut inc_patterns = Vec::new();
        let mut mix_index = HashMap::new();
        let mut inc_index = HashMap::new();
        let mut prepared = Vec::with_capacity(records.len());
        for rec in records {
            check_len("x_mix", layout.q_mix, rec.x_mix.len())?;
            check_len("x_inc", layout.q_inc, rec.x_inc.len())?;
            prepared.push(Prepared {
                group: rec.group,
                log_left: if rec.left > 0.0 { rec.left.ln() } else { f64::NEG_INFINITY },
                log_right: if rec.right > 0.0 { rec.right.ln() } else { f64::NEG_INFINITY },
                mix: intern(&mut mix_patterns, &mut mix_index, &rec.x_mix),
                inc: intern(&mut inc_patterns, &mut inc_index, &rec.x_inc),
            });
        }
        Ok(Self {
            layout,
            records: prepared,
            mix_patterns,
            inc_patterns,
        })
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn mix_terms(&self, p: &PicParameters) -> Vec<MixTerms> {
        let cure = self.layout.model.has_cure();
        self.mix_patterns
            .iter()
            .map(|x| {
                let eta_delta = cure.then(|| dot(&p.beta_delta, x));
                let lm = LogMixture::from_predictors(dot(&p.beta_pi, x), eta_delta);
                MixTerms {
                    log_pi: lm.log_pi,
                    log_delta: lm.log_delta,
                    log_inc: lm.log_incident,
                    pi: lm.log_pi.exp(),
                    delta: lm.log_delta.exp(),
                }
            })
            .collect()
    }

    /// Log-likelihood at natural parameters; `-inf` if any factor is zero.
    pub fn log_likelihood(&self, p: &PicParameters) -> f64 {
        self.evaluate(p, None, None)
    }

    /// Per-record log factors, in input order.
    pub fn contributions(&self, p: &PicParameters) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.records.len());
        self.evaluate(p, None, Some(&mut out));
        out
    }

    /// Log-likelihood and its gradient on the optimizer scale
    /// `(log alpha, log lambda, beta_pi, [beta_delta], gamma)`.
    pub fn log_likelihood_with_gradient(&self, p: &PicParameters, grad: &mut [f64]) -> f64 {
        assert_eq!(grad.len(), self.layout.dim());
        self.evaluate(p, Some(grad), None)
    }

    fn evaluate(
        &self,
        p: &PicParameters,
        mut grad: Option<&mut [f64]>,
        mut per_record: Option<&mut Vec<f64>>,
    ) -> f64 {
        let mix = self.mix_terms(p);
        let lps: Vec<f64> = self.inc_patterns.iter().map(|x| dot(&p.gamma, x)).collect();
        let alpha = p.alpha;
        let log_lambda = p.lambda.ln();
        let want_grad = grad.is_some();
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut g_eta_pi = vec![0.0; if want_grad { mix.len() } else { 0 }];
        let mut g_eta_delta = g_eta_pi.clone();
        let mut g_lp = vec![0.0; if want_grad { lps.len() } else { 0 }];
        let mut g_log_alpha = 0.0;
        let mut g_log_lambda = 0.0;

        let cum_hazard = |log_t: f64, lp: f64| -> f64 {
            if log_t == f64::NEG_INFINITY {
                0.0
            } else {
                (alpha * (log_t - log_lambda) + lp).exp()
            }
        };

        let mut total = 0.0;
        for rec in &self.records {
            let m = &mix[rec.mix];
            let lp = lps[rec.inc];
            // d(log factor)/d(eta) and weights on dH(l), dH(r)
            let (value, d_pi, d_delta, w_left, h_left, w_right, h_right);
            match rec.group {
                Group::C1 => {
                    value = m.log_pi;
                    d_pi = 1.0 - m.pi;
                    d_delta = -m.delta;
                    (w_left, h_left, w_right, h_right) = (0.0, 0.0, 0.0, 0.0);
                }
                Group::C2 => {
                    let hl = cum_hazard(rec.log_left, lp);
                    let hr = cum_hazard(rec.log_right, lp);
                    let gap = hr - hl;
                    value = m.log_inc - hl + log_one_minus_exp_neg(gap);
                    d_pi = -m.pi;
                    d_delta = -m.delta;
                    let q = 1.0 / gap.exp_m1();
                    (w_left, h_left, w_right, h_right) = (-(1.0 + q), hl, q, hr);
                }
                Group::C3 => {
                    let hl = cum_hazard(rec.log_left, lp);
                    value = log_add_exp(m.log_delta, m.log_inc - hl);
                    d_pi = -m.pi;
                    d_delta = (m.log_delta - value).exp() - m.delta;
                    (w_left, h_left, w_right, h_right) =
                        (-(m.log_inc - hl - value).exp(), hl, 0.0, 0.0);
                }
                Group::C4 => {
                    let hr = cum_hazard(rec.log_right, lp);
                    value = log_add_exp(m.log_pi, m.log_inc + log_one_minus_exp_neg(hr));
                    d_pi = (m.log_pi - value).exp() - m.pi;
                    d_delta = -m.delta;
                    (w_left, h_left, w_right, h_right) =
                        (0.0, 0.0, (m.log_inc - hr - value).exp(), hr);
                }
            }
            total += value;
            if let Some(out) = per_record.as_deref_mut() {
                out.push(value);
            }
            if want_grad && value > f64::NEG_INFINITY {
                g_eta_pi[rec.mix] += d_pi;
                g_eta_delta[rec.mix] += d_delta;
                for (w, h, log_t) in [(w_left, h_left, rec.log_left), (w_right, h_right, rec.log_right)] {
                    if w != 0.0 && h > 0.0 && h.is_finite() {
                        g_log_alpha += w * alpha * (log_t - log_lambda) * h;
                        g_log_lambda -= w * alpha * h;
                        g_lp[rec.inc] += w * h;
                    }
                }
            }
        }

        if let Some(g) = grad {
            g[0] = g_log_alpha;
            g[1] = g_log_lambda;
            let (bp, bd, gm) = (self.layout.beta_pi(), self.layout.beta_delta(), self.layout.gamma());
            for (k, x) in self.mix_patterns.iter().enumerate() {
                for (j, xj) in x.iter().enumerate() {
                    g[bp.start + j] += g_eta_pi[k] * xj;
                    if !bd.is_empty() {
                        g[bd.start + j] += g_eta_delta[k] * xj;
                    }
                }
            }
            for (k, x) in self.inc_patterns.iter().enumerate() {
                for (j, xj) in x.iter().enumerate() {
                    g[gm.start + j] += g_lp[k] * xj;
                }
            }
        }
        total
    }
}

/// Observed-data log-likelihood. A factor that is exactly zero yields
/// [`Error::NonFiniteLikelihood`] naming the first offending record.
pub fn log_likelihood_observed(
    records: &[ObservationRecord],
    params: &PicParameters,
    model: ModelKind,
) -> Result<f64> {
    params.validate(model)?;
    let eval = LikelihoodEvaluator::new(records, model)?;
    check_len("beta_pi", eval.layout.q_mix, params.beta_pi.len())?;
    check_len("gamma", eval.layout.q_inc, params.gamma.len())?;
    let contributions = eval.contributions(params);
    if let Some(i) = contributions.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLikelihood {
            id: records[i].id.clone(),
        });
    }
    Ok(contributions.iter().sum())
}

/// Complete-data log-likelihood given latent status and event times.
pub fn log_likelihood_complete(
    records: &[ObservationRecord],
    truth: &[LatentTruth],
    params: &PicParameters,
) -> Result<f64> {
    params.validate(ModelKind::Pic)?;
    check_len("latent truth", records.len(), truth.len())?;
    let wb = params.weibull();
    let mut total = 0.0;
    for (rec, lt) in records.iter().zip(truth) {
        let lm = LogMixture::from_predictors(
            dot(&params.beta_pi, &rec.x_mix),
            Some(dot(&params.beta_delta, &rec.x_mix)),
        );
        let value = match (lt.status, lt.event_time) {
            (LatentStatus::Prevalent, _) => lm.log_pi,
            (LatentStatus::Cured, _) => lm.log_delta,
            (LatentStatus::Incident, Some(t)) => {
                lm.log_incident + wb.log_density(t, dot(&params.gamma, &rec.x_inc))
            }
            (LatentStatus::Incident, None) => {
                return Err(Error::InvalidParameter(format!(
                    "incident record `{}` has no event time",
                    rec.id
                )))
            }
        };
        if !value.is_finite() {
            return Err(Error::NonFiniteLikelihood { id: rec.id.clone() });
        }
        total += value;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{marginal_survival, mixture_probs, weibull_survival};
    use approx::assert_abs_diff_eq;

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

    fn rec(l: f64, r: f64, x: f64) -> ObservationRecord {
        ObservationRecord::new("s", l, r, vec![1.0, x], vec![x]).unwrap()
    }

    fn mixed_dataset() -> Vec<ObservationRecord> {
        vec![
            rec(NEG_INF, 0.0, 0.0),
            rec(NEG_INF, 0.0, 1.0),
            rec(0.0, 1.3, 0.0),
            rec(1.1, 2.9, 1.0),
            rec(4.0, 6.5, 0.0),
            rec(0.0, INF, 1.0),
            rec(3.2, INF, 0.0),
            rec(17.0, INF, 1.0),
            rec(NEG_INF, 0.7, 0.0),
            rec(NEG_INF, 2.4, 1.0),
        ]
    }

    // Direct, unoptimized evaluation of the four factors.
    fn naive(records: &[ObservationRecord], p: &PicParameters, model: ModelKind) -> f64 {
        records
            .iter()
            .map(|r| {
                let m = p.mixture(&r.x_mix, model).unwrap();
                let s = |t: f64| weibull_survival(t, p, &r.x_inc);
                let inc = m.incident;
                match r.group {
                    Group::C1 => m.pi.ln(),
                    Group::C2 => (inc * (s(r.left) - s(r.right))).ln(),
                    Group::C3 => (m.delta + inc * s(r.left)).ln(),
                    Group::C4 => (m.pi + inc * (1.0 - s(r.right))).ln(),
                }
            })
            .sum()
    }

    #[test]
    fn single_record_examples() {
        let p = truth();
        let ll = log_likelihood_observed(&[rec(NEG_INF, 0.0, 0.0)], &p, ModelKind::Pic).unwrap();
        let pi = p.mixture(&[1.0, 0.0], ModelKind::Pic).unwrap().pi;
        assert_abs_diff_eq!(ll, pi.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(ll, 0.169f64.ln(), epsilon = 2e-3);

        let ll = log_likelihood_observed(&[rec(0.0, INF, 0.0)], &p, ModelKind::Pic).unwrap();
        assert_abs_diff_eq!(ll, (1.0 - pi).ln(), epsilon = 1e-12);

        let ll = log_likelihood_observed(&[rec(NEG_INF, 10.0, 0.0)], &p, ModelKind::Pic).unwrap();
        let m = p.mixture(&[1.0, 0.0], ModelKind::Pic).unwrap();
        let s10 = weibull_survival(10.0, &p, &[0.0]);
        assert!(s10 < 2e-9);
        assert_abs_diff_eq!(ll, (m.pi + m.incident * (1.0 - s10)).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(ll, -1.4065, epsilon = 5e-3);
    }

    #[test]
    fn evaluator_matches_naive_formula() {
        let data = mixed_dataset();
        for model in [ModelKind::Pic, ModelKind::Pi] {
            let p = truth();
            let got = log_likelihood_observed(&data, &p, model).unwrap();
            assert_abs_diff_eq!(got, naive(&data, &p, model), epsilon = 1e-10);
        }
    }

    #[test]
    fn pinned_cure_matches_two_component_model() {
        let data = mixed_dataset();
        let mut p = truth();
        let pi_value = log_likelihood_observed(&data, &p, ModelKind::Pi).unwrap();
        p.beta_delta = vec![-1000.0, 0.0];
        let pic_value = log_likelihood_observed(&data, &p, ModelKind::Pic).unwrap();
        assert_abs_diff_eq!(pi_value, pic_value, epsilon = 1e-10);
    }

    #[test]
    fn zero_factor_is_flagged() {
        // H(l) overflows, so S(l) is exactly 0 with no cure component.
        let data = vec![rec(1e300, INF, 0.0)];
        let err = log_likelihood_observed(&data, &truth(), ModelKind::Pi).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLikelihood { .. }));
        let eval = LikelihoodEvaluator::new(&data, ModelKind::Pi).unwrap();
        assert_eq!(eval.log_likelihood(&truth()), NEG_INF);
    }

    #[test]
    fn late_intervals_do_not_cancel() {
        let data = vec![rec(9.0, 9.5, 0.0)];
        let v = log_likelihood_observed(&data, &truth(), ModelKind::Pic).unwrap();
        assert!(v.is_finite() && v < -15.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = mixed_dataset();
        for model in [ModelKind::Pic, ModelKind::Pi] {
            let eval = LikelihoodEvaluator::new(&data, model).unwrap();
            let layout = eval.layout();
            let mut p = truth();
            p.alpha = 1.4;
            let theta = layout.to_optimizer(&p);
            let mut grad = vec![0.0; layout.dim()];
            eval.log_likelihood_with_gradient(&layout.from_optimizer(&theta), &mut grad);
            let h = 1e-5;
            for k in 0..layout.dim() {
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (eval.log_likelihood(&layout.from_optimizer(&up))
                    - eval.log_likelihood(&layout.from_optimizer(&dn)))
                    / (2.0 * h);
                let rel = (fd - grad[k]).abs() / grad[k].abs().max(1e-2);
                assert!(rel < 1e-4, "{model} coord {k}: analytic {} fd {fd}", grad[k]);
            }
        }
    }

    #[test]
    fn complete_likelihood_examples() {
        let p = truth();
        let one = |lt: LatentTruth| log_likelihood_complete(&[rec(0.0, INF, 0.0)], &[lt], &p).unwrap();
        let m = mixture_probs(&p.beta_pi, &p.beta_delta, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(one(LatentTruth::prevalent()), m.pi.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(one(LatentTruth::cured()), 0.755f64.ln(), epsilon = 2e-3);
        let inc = one(LatentTruth::incident(2.2).unwrap());
        assert_abs_diff_eq!(inc, (m.incident * 0.334_44).ln(), epsilon = 2e-4);
        assert_abs_diff_eq!(inc, (0.076f64 * 0.334_44).ln(), epsilon = 0.02);
    }

    #[test]
    fn marginal_survival_relation_to_c3() {
        // C3 factor at l equals the marginal survival at l.
        let p = truth();
        for l in [0.0, 1.0, 4.0] {
            let ll = log_likelihood_observed(&[rec(l, INF, 1.0)], &p, ModelKind::Pic).unwrap();
            let ms = marginal_survival(l, &[1.0, 1.0], &[1.0], &p, ModelKind::Pic).unwrap();
            assert_abs_diff_eq!(ll.exp(), ms, epsilon = 1e-12);
        }
    }
}
