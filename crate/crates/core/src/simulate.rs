//! Cohort simulation: latent status, Weibull event times, visit schedules
//! and missing baseline tests, with the latent truth kept for checking.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, LatentStatus, LatentTruth, ModelKind, ObservationRecord, PicParameters};
use crate::par::map_indexed;
use crate::rng::{substream, StreamRng};

/// Parameters used to generate the benchmark cohorts (time in years).
pub fn benchmark_truth() -> PicParameters {
    PicParameters {
        alpha: 2.0,
        lambda: 2.2,
        beta_pi: vec![0.799, -1.498],
        beta_delta: vec![2.296, -0.762],
        gamma: vec![-0.5],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VisitSchedule {
    /// Cumulative visits with independent gamma gaps.
    GammaGaps { shape: f64, scale: f64 },
    /// The same visit times for every subject.
    Fixed { times: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpConfig {
    pub n: usize,
    pub p_baseline_test: f64,
    pub visits: VisitSchedule,
    pub max_visits: usize,
    pub horizon: f64,
    /// Probability of the reference strain (`x = 0`).
    pub p_strain16: f64,
    pub truth: PicParameters,
    /// Whether the baseline test uses up one of the `max_visits`.
    pub count_baseline_in_cap: bool,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n: 400,
            p_baseline_test: 0.88,
            visits: VisitSchedule::GammaGaps { shape: 2.0, scale: 1.0 },
            max_visits: 10,
            horizon: 20.0,
            p_strain16: 0.76,
            truth: benchmark_truth(),
            count_baseline_in_cap: false,
            seed: 1,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        for (name, p) in [("p_baseline_test", self.p_baseline_test), ("p_strain16", self.p_strain16)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.max_visits == 0 {
            return bad("max_visits must be positive".into());
        }
        match &self.visits {
            VisitSchedule::GammaGaps { shape, scale } => {
                if !(*shape > 0.0 && *scale > 0.0) {
                    return bad("gamma gap shape and scale must be positive".into());
                }
            }
            VisitSchedule::Fixed { times } => {
                if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("fixed visit times must be positive and increasing".into());
                }
            }
        }
        self.truth.validate(ModelKind::Pic)?;
        if self.truth.q_mix() != 2 || self.truth.q_inc() != 1 {
            return bad("truth must have two assignment and one incidence coefficient".into());
        }
        Ok(())
    }

    fn visit_cap(&self, tested: bool) -> usize {
        if self.count_baseline_in_cap && tested {
            self.max_visits - 1
        } else {
            self.max_visits
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub records: Vec<ObservationRecord>,
    pub truth: Vec<LatentTruth>,
    /// Subjects re-drawn because they carried no information.
    pub redrawn: usize,
}

/// Uniform on the open interval (0, 1).
fn open_unit(rng: &mut StreamRng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Event time with survival `u`: `lambda (-ln u)^(1/alpha) exp(-lp / alpha)`.
pub fn inverse_weibull_sample(u: f64, params: &PicParameters, x_inc: &[f64]) -> Result<f64> {
    params.weibull().inverse_survival(u, dot(&params.gamma, x_inc))
}

struct Subject {
    record: ObservationRecord,
    truth: LatentTruth,
    redrawn: usize,
}

fn simulate_subject(config: &DgpConfig, index: usize) -> Result<Subject> {
    let mut rng = substream(config.seed, index as u64);
    let truth = &config.truth;
    let gaps = match &config.visits {
        VisitSchedule::GammaGaps { shape, scale } => {
            Some(Gamma::new(*shape, *scale).map_err(|e| Error::InvalidConfig(e.to_string()))?)
        }
        VisitSchedule::Fixed { .. } => None,
    };
    let mut redrawn = 0;
    loop {
        let x = if rng.random::<f64>() < config.p_strain16 { 0.0 } else { 1.0 };
        let x_mix = vec![1.0, x];
        let x_inc = vec![x];
        let probs = truth.mixture(&x_mix, ModelKind::Pic)?;
        let u: f64 = rng.random();
        let latent = if u < probs.pi {
            LatentTruth::prevalent()
        } else if u < probs.pi + probs.delta {
            LatentTruth::cured()
        } else {
            LatentTruth::incident(inverse_weibull_sample(open_unit(&mut rng), truth, &x_inc)?)?
        };
        let tested = rng.random::<f64>() < config.p_baseline_test;

        // Time of the event as seen by tests; prevalent events precede 0.
        let event = match latent.status {
            LatentStatus::Prevalent => f64::NEG_INFINITY,
            LatentStatus::Incident => latent.event_time.unwrap_or(f64::INFINITY),
            LatentStatus::Cured => f64::INFINITY,
        };
        let (mut left, mut right) = (f64::NEG_INFINITY, f64::INFINITY);
        if tested {
            if event <= 0.0 {
                right = 0.0;
            } else {
                left = 0.0;
            }
        }
        if right == f64::INFINITY {
            let cap = config.visit_cap(tested);
            let mut t = 0.0;
            for k in 0..cap {
                t = match (&gaps, &config.visits) {
                    (Some(g), _) => t + g.sample(&mut rng),
                    (None, VisitSchedule::Fixed { times }) => match times.get(k) {
                        Some(v) => *v,
                        None => break,
                    },
                    (None, _) => unreachable!(),
                };
                if t > config.horizon {
                    break;
                }
                if t >= event {
                    right = t;
                    break;
                }
                left = t;
            }
        }
        if left == f64::NEG_INFINITY && right == f64::INFINITY {
            redrawn += 1;
            continue;
        }
        let record = ObservationRecord::new((index + 1).to_string(), left, right, x_mix, x_inc)?;
        return Ok(Subject {
            record,
            truth: latent,
            redrawn,
        });
    }
}

/// Simulates `config.n` subjects. Subject `i` draws from stream `i` of
/// `config.seed`, so the cohort does not depend on the worker count.
pub fn simulate_cohort(config: &DgpConfig) -> Result<Cohort> {
    config.validate()?;
    let subjects = map_indexed(config.n, |i| simulate_subject(config, i));
    let mut cohort = Cohort {
        records: Vec::with_capacity(config.n),
        truth: Vec::with_capacity(config.n),
        redrawn: 0,
    };
    for s in subjects {
        let s = s?;
        cohort.records.push(s.record);
        cohort.truth.push(s.truth);
        cohort.redrawn += s.redrawn;
    }
    Ok(cohort)
}

/// `id,status,event_time`; cured subjects have `inf`, prevalent ones an
/// empty event time.
pub fn write_truth_csv<W: Write>(cohort: &Cohort, mut out: W) -> Result<()> {
    writeln!(out, "id,status,event_time")?;
    for (rec, t) in cohort.records.iter().zip(&cohort.truth) {
        let time = match t.status {
            LatentStatus::Prevalent => String::new(),
            LatentStatus::Cured => "inf".to_string(),
            LatentStatus::Incident => t.event_time.map(|v| v.to_string()).unwrap_or_default(),
        };
        writeln!(out, "{},{},{}", rec.id, t.status.as_str(), time)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{weibull_survival, Group};
    use proptest::prelude::*;

    fn cohort(n: usize, seed: u64) -> Cohort {
        simulate_cohort(&DgpConfig { n, seed, ..Default::default() }).unwrap()
    }

    #[test]
    fn inverse_sampling_examples() {
        let p = benchmark_truth();
        assert!((inverse_weibull_sample((-1.0f64).exp(), &p, &[0.0]).unwrap() - 2.2).abs() < 1e-12);
        assert!((inverse_weibull_sample(0.5, &p, &[0.0]).unwrap() - 1.8317).abs() < 1e-4);
        assert!(inverse_weibull_sample(0.0, &p, &[0.0]).is_err());
        assert!(inverse_weibull_sample(1.0, &p, &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn inverse_sampling_round_trip(u in 1e-9..(1.0 - 1e-9), x in 0.0..1.0f64) {
            let p = benchmark_truth();
            let t = inverse_weibull_sample(u, &p, &[x]).unwrap();
            prop_assert!((weibull_survival(t, &p, &[x]) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn validation() {
        for bad in [
            DgpConfig { n: 0, ..Default::default() },
            DgpConfig { p_baseline_test: 1.2, ..Default::default() },
            DgpConfig { horizon: 0.0, ..Default::default() },
            DgpConfig { visits: VisitSchedule::Fixed { times: vec![2.0, 1.0] }, ..Default::default() },
        ] {
            assert!(simulate_cohort(&bad).is_err());
        }
    }

    #[test]
    fn forced_prevalence_is_all_baseline_positive() {
        let mut truth = benchmark_truth();
        truth.beta_pi = vec![40.0, 0.0];
        let c = simulate_cohort(&DgpConfig { n: 200, p_baseline_test: 1.0, truth, ..Default::default() }).unwrap();
        assert!(c.records.iter().all(|r| r.group == Group::C1));
    }

    #[test]
    fn structural_invariants() {
        let c = cohort(5000, 3);
        assert_eq!(c.records.len(), 5000);
        for (r, t) in c.records.iter().zip(&c.truth) {
            if r.left.is_finite() && r.right.is_finite() {
                assert!(r.left < r.right);
            }
            match t.status {
                LatentStatus::Cured => assert_eq!(r.right, f64::INFINITY),
                LatentStatus::Prevalent => {
                    // Baseline-tested prevalent subjects are exactly C1; the
                    // rest are positive at their first visit.
                    assert!(matches!(r.group, Group::C1 | Group::C4), "{r:?}");
                }
                LatentStatus::Incident => {
                    let e = t.event_time.unwrap();
                    assert!(r.left < e && e <= r.right);
                }
            }
            if r.group == Group::C1 {
                assert_eq!(t.status, LatentStatus::Prevalent);
            }
            assert!(r.right <= 20.0 || r.right == f64::INFINITY);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(cohort(300, 11), cohort(300, 11));
        assert_ne!(cohort(300, 11).records, cohort(300, 12).records);
        // Prefixes agree because subjects use their own streams.
        assert_eq!(cohort(100, 11).records[..], cohort(300, 11).records[..100]);
    }

    #[test]
    fn truth_csv_format() {
        let c = cohort(50, 2);
        let mut buf = Vec::new();
        write_truth_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,status,event_time\n1,"));
        assert_eq!(text.lines().count(), 51);
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            match f[1] {
                "prevalent" => assert_eq!(f[2], ""),
                "cured" => assert_eq!(f[2], "inf"),
                _ => assert!(f[2].parse::<f64>().unwrap() > 0.0),
            }
        }
    }
}
