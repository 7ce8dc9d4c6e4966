//! Replication harness: simulate, fit, and score point and interval
//! estimates against the generating truth.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::comparators::{bootstrap_ci, fit_pi_mle, pi_summary, BootstrapConfig, MleConfig};
use crate::error::{Error, Result};
use crate::mcmc::{sample_posterior, summarize, SamplerConfig};
use crate::model::{ModelKind, ObservationRecord, PicParameters};
use crate::par::map_indexed;
use crate::priors::{preset, Preset};
use crate::report::{derived_values, FitSummary, Profile};
use crate::rng::child_seed;
use crate::simulate::{simulate_cohort, DgpConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pic(Preset),
    Pi,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Pic(p) => write!(f, "pic-{}", p.name()),
            Method::Pi => f.write_str("pi"),
        }
    }
}

/// Covariate profiles of the two strains in the benchmark design.
pub fn strain_profiles() -> Vec<Profile> {
    vec![
        Profile::new("16", vec![1.0, 0.0], vec![0.0]),
        Profile::new("18", vec![1.0, 1.0], vec![1.0]),
    ]
}

pub const DEFAULT_TIMES: [f64; 3] = [2.0, 5.0, 10.0];

/// Estimand names in reporting order: parameters, then survival at each
/// time for each strain, then prevalence and cure for each strain.
pub fn estimand_names(times: &[f64]) -> Vec<String> {
    let mut out: Vec<String> = ["alpha", "lambda", "beta_pi_1", "beta_delta_1", "beta_pi_2", "beta_delta_2", "gamma_1"]
        .map(String::from)
        .to_vec();
    let profiles = strain_profiles();
    for t in times {
        out.extend(profiles.iter().map(|p| format!("survival[{}](t={t})", p.name)));
    }
    out.extend(profiles.iter().map(|p| format!("prevalence[{}]", p.name)));
    out.extend(profiles.iter().map(|p| format!("cure[{}]", p.name)));
    out
}

/// Values of [`estimand_names`] at `params`.
pub fn estimand_values(params: &PicParameters, times: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![
        params.alpha,
        params.lambda,
        params.beta_pi[0],
        params.beta_delta[0],
        params.beta_pi[1],
        params.beta_delta[1],
        params.gamma[0],
    ];
    let profiles = strain_profiles();
    let mut derived = Vec::new();
    for p in &profiles {
        derived.push(derived_values(params, ModelKind::Pic, p, times)?);
    }
    // derived_values order: prevalence, cure, survival at each time
    for k in 0..times.len() {
        out.extend(derived.iter().map(|d| d[2 + k]));
    }
    out.extend(derived.iter().map(|d| d[0]));
    out.extend(derived.iter().map(|d| d[1]));
    Ok(out)
}

/// Point estimate and optional 95% interval for one estimand.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub name: String,
    pub point: f64,
    pub interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RepEstimates {
    pub estimates: Vec<Estimate>,
    /// Intervals were requested but could not be computed.
    pub ci_failed: bool,
    /// The fit is usable but suspect (e.g. chains not converged).
    pub flagged: bool,
}

/// A procedure scored by the harness. An `Err` counts as a failed fit.
pub trait Estimator: Sync {
    fn estimate(&self, records: &[ObservationRecord], seed: u64) -> Result<RepEstimates>;
}

fn from_summary(summary: &FitSummary) -> Vec<Estimate> {
    summary
        .rows
        .iter()
        .map(|r| Estimate {
            name: r.name.clone(),
            point: r.estimate,
            interval: r.lower.zip(r.upper),
        })
        .collect()
}

pub struct PicEstimator {
    pub preset: Preset,
    pub sampler: SamplerConfig,
    pub times: Vec<f64>,
}

impl Estimator for PicEstimator {
    fn estimate(&self, records: &[ObservationRecord], seed: u64) -> Result<RepEstimates> {
        let config = SamplerConfig { seed, ..self.sampler.clone() };
        let chains = sample_posterior(records, &preset(self.preset), ModelKind::Pic, &config)?;
        let summary = summarize(&chains, &strain_profiles(), &self.times, "years", records.len())?;
        Ok(RepEstimates {
            estimates: from_summary(&summary),
            ci_failed: false,
            flagged: !summary.converged,
        })
    }
}

pub struct PiEstimator {
    pub mle: MleConfig,
    pub bootstrap: BootstrapConfig,
    pub times: Vec<f64>,
}

impl Estimator for PiEstimator {
    fn estimate(&self, records: &[ObservationRecord], seed: u64) -> Result<RepEstimates> {
        let mut fit = fit_pi_mle(records, &MleConfig { seed, ..self.mle.clone() })?;
        let profiles = strain_profiles();
        let config = BootstrapConfig {
            seed: child_seed(seed, 1),
            mle: self.mle.clone(),
            ..self.bootstrap.clone()
        };
        let (intervals, ci_failed) = match bootstrap_ci(records, &mut fit, &config, &profiles, &self.times) {
            Ok(b) => (Some(b), false),
            Err(Error::CiUnavailable { .. }) => (None, true),
            Err(e) => return Err(e),
        };
        let summary = pi_summary(&fit, intervals.as_ref(), &profiles, &self.times, "years", records.len())?;
        Ok(RepEstimates {
            estimates: from_summary(&summary),
            ci_failed,
            flagged: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub reps: usize,
    pub n: usize,
    pub method: Method,
    pub seed: u64,
    pub dgp: DgpConfig,
    pub sampler: SamplerConfig,
    pub mle: MleConfig,
    pub bootstrap: BootstrapConfig,
    pub times: Vec<f64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            reps: 50,
            n: 400,
            method: Method::Pic(Preset::VagueCervical),
            seed: 1,
            dgp: DgpConfig::default(),
            sampler: SamplerConfig::default(),
            mle: MleConfig::default(),
            bootstrap: BootstrapConfig::default(),
            times: DEFAULT_TIMES.to_vec(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        DgpConfig { n: self.n, ..self.dgp.clone() }.validate()?;
        self.sampler.validate()?;
        self.mle.validate()
    }

    /// Seed of replication `r`; the cohort and the fit derive from it.
    pub fn rep_seed(&self, r: usize) -> u64 {
        child_seed(self.seed, r as u64)
    }

    pub fn estimator(&self) -> Box<dyn Estimator> {
        match self.method {
            Method::Pic(p) => Box::new(PicEstimator {
                preset: p,
                sampler: self.sampler.clone(),
                times: self.times.clone(),
            }),
            Method::Pi => Box::new(PiEstimator {
                mle: self.mle.clone(),
                bootstrap: self.bootstrap.clone(),
                times: self.times.clone(),
            }),
        }
    }
}

/// One replication x estimand outcome. Failed fits have no estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub rep: usize,
    pub seed: u64,
    pub estimand: String,
    pub truth: f64,
    pub estimate: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub fit_failed: bool,
    pub ci_failed: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub estimand: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub mse: f64,
    pub coverage_pct: Option<f64>,
    pub ciw: Option<f64>,
    pub n_point: usize,
    pub n_interval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMetrics {
    pub rows: Vec<MetricRow>,
    pub n_reps: usize,
    pub n_failed_fit: usize,
    pub n_failed_ci: usize,
    pub n_flagged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub raw: Vec<RawRow>,
    pub metrics: StudyMetrics,
    pub seeds: Vec<u64>,
    pub redrawn_subjects: usize,
}

fn sorted_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum()
}

fn mean_of(xs: Vec<f64>) -> f64 {
    let n = xs.len() as f64;
    sorted_sum(xs) / n
}

/// Aggregates raw rows. Failed fits are dropped from point metrics; failed
/// or missing intervals are dropped from interval metrics. Sums run over
/// sorted values, so the result does not depend on row order.
pub fn aggregate(raw: &[RawRow], estimands: &[String]) -> StudyMetrics {
    let mut rows = Vec::new();
    for name in estimands {
        let mine: Vec<&RawRow> = raw.iter().filter(|r| &r.estimand == name).collect();
        let Some(first) = mine.first() else { continue };
        let truth = first.truth;
        let points: Vec<f64> = mine.iter().filter(|r| !r.fit_failed).filter_map(|r| r.estimate).collect();
        if points.is_empty() {
            continue;
        }
        let intervals: Vec<(f64, f64)> = mine
            .iter()
            .filter(|r| !r.fit_failed && !r.ci_failed)
            .filter_map(|r| r.lower.zip(r.upper))
            .collect();
        let covered = intervals.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count();
        let (coverage_pct, ciw) = if intervals.is_empty() {
            (None, None)
        } else {
            (
                Some(100.0 * covered as f64 / intervals.len() as f64),
                Some(mean_of(intervals.iter().map(|(lo, hi)| hi - lo).collect())),
            )
        };
        rows.push(MetricRow {
            estimand: name.clone(),
            truth,
            mean: mean_of(points.clone()),
            bias: mean_of(points.iter().map(|p| p - truth).collect()),
            mse: mean_of(points.iter().map(|p| (p - truth).powi(2)).collect()),
            coverage_pct,
            ciw,
            n_point: points.len(),
            n_interval: intervals.len(),
        });
    }
    let mut reps: Vec<(usize, bool, bool, bool)> = raw.iter().map(|r| (r.rep, r.fit_failed, r.ci_failed, r.flagged)).collect();
    reps.sort_by_key(|r| r.0);
    reps.dedup_by_key(|r| r.0);
    StudyMetrics {
        rows,
        n_reps: reps.len(),
        n_failed_fit: reps.iter().filter(|r| r.1).count(),
        n_failed_ci: reps.iter().filter(|r| !r.1 && r.2).count(),
        n_flagged: reps.iter().filter(|r| r.3).count(),
    }
}

/// Runs the study with an arbitrary estimator; replication `r` simulates
/// from `config.rep_seed(r)` and fits with a seed derived from it.
pub fn run_study_with(config: &StudyConfig, estimator: &dyn Estimator) -> Result<StudyResult> {
    config.validate()?;
    let names = estimand_names(&config.times);
    let truth = estimand_values(&config.dgp.truth, &config.times)?;
    let seeds: Vec<u64> = (0..config.reps).map(|r| config.rep_seed(r)).collect();
    let outcomes = map_indexed(config.reps, |r| -> Result<(Vec<RawRow>, usize)> {
        let dgp = DgpConfig {
            n: config.n,
            seed: seeds[r],
            ..config.dgp.clone()
        };
        let cohort = simulate_cohort(&dgp)?;
        let fit = estimator.estimate(&cohort.records, child_seed(seeds[r], 0));
        let mut rows = Vec::new();
        for (name, &t) in names.iter().zip(&truth) {
            let base = RawRow {
                rep: r,
                seed: seeds[r],
                estimand: name.clone(),
                truth: t,
                estimate: None,
                lower: None,
                upper: None,
                fit_failed: true,
                ci_failed: false,
                flagged: false,
            };
            match &fit {
                Err(_) => rows.push(base),
                Ok(est) => {
                    // Estimands the method does not have (cure under PI) are skipped.
                    if let Some(e) = est.estimates.iter().find(|e| &e.name == name) {
                        rows.push(RawRow {
                            estimate: Some(e.point),
                            lower: e.interval.map(|i| i.0),
                            upper: e.interval.map(|i| i.1),
                            fit_failed: false,
                            ci_failed: est.ci_failed,
                            flagged: est.flagged,
                            ..base
                        });
                    }
                }
            }
        }
        Ok((rows, cohort.redrawn))
    });
    let mut raw = Vec::new();
    let mut redrawn_subjects = 0;
    for o in outcomes {
        let (rows, redrawn) = o?;
        raw.extend(rows);
        redrawn_subjects += redrawn;
    }
    let metrics = aggregate(&raw, &names);
    Ok(StudyResult {
        raw,
        metrics,
        seeds,
        redrawn_subjects,
    })
}

pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    run_study_with(config, config.estimator().as_ref())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str) -> std::result::Result<Option<f64>, std::num::ParseFloatError> {
    if s.is_empty() {
        Ok(None)
    } else {
        f64::from_str(s).map(Some)
    }
}

pub const RAW_HEADER: &str = "rep,seed,estimand,truth,estimate,lower,upper,fit_failed,ci_failed,flagged";
pub const METRICS_HEADER: &str = "estimand,truth,mean,bias,mse,coverage_pct,ciw,n_point,n_interval";

pub fn render_raw_csv(raw: &[RawRow]) -> String {
    let mut out = format!("{RAW_HEADER}\n");
    for r in raw {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.rep,
            r.seed,
            r.estimand,
            r.truth,
            opt(r.estimate),
            opt(r.lower),
            opt(r.upper),
            r.fit_failed as u8,
            r.ci_failed as u8,
            r.flagged as u8
        );
    }
    out
}

fn parse_err(line: usize, message: impl std::fmt::Display) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

fn flag(s: &str, line: usize) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(parse_err(line, format!("expected 0 or 1, got `{other}`"))),
    }
}

fn fields(text: &str, header: &str, width: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 1;
        let rec = rec?;
        let cells: Vec<String> = rec.iter().map(String::from).collect();
        if k == 0 {
            if cells.join(",") != header {
                return Err(parse_err(line, format!("expected header `{header}`")));
            }
            continue;
        }
        if cells.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, got {}", cells.len())));
        }
        out.push((line, cells));
    }
    Ok(out)
}

pub fn parse_raw_csv(text: &str) -> Result<Vec<RawRow>> {
    fields(text, RAW_HEADER, 10)?
        .into_iter()
        .map(|(line, c)| {
            let num = |s: &str| parse_opt(s).map_err(|e| parse_err(line, e));
            Ok(RawRow {
                rep: c[0].parse().map_err(|e| parse_err(line, e))?,
                seed: c[1].parse().map_err(|e| parse_err(line, e))?,
                estimand: c[2].clone(),
                truth: num(&c[3])?.ok_or_else(|| parse_err(line, "missing truth"))?,
                estimate: num(&c[4])?,
                lower: num(&c[5])?,
                upper: num(&c[6])?,
                fit_failed: flag(&c[7], line)?,
                ci_failed: flag(&c[8], line)?,
                flagged: flag(&c[9], line)?,
            })
        })
        .collect()
}

pub fn render_metrics_csv(m: &StudyMetrics) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in &m.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.estimand,
            r.truth,
            r.mean,
            r.bias,
            r.mse,
            opt(r.coverage_pct),
            opt(r.ciw),
            r.n_point,
            r.n_interval
        );
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricRow>> {
    fields(text, METRICS_HEADER, 9)?
        .into_iter()
        .map(|(line, c)| {
            let num = |s: &str| parse_opt(s).map_err(|e| parse_err(line, e));
            let req = |s: &str| num(s)?.ok_or_else(|| parse_err(line, "missing value"));
            Ok(MetricRow {
                estimand: c[0].clone(),
                truth: req(&c[1])?,
                mean: req(&c[2])?,
                bias: req(&c[3])?,
                mse: req(&c[4])?,
                coverage_pct: num(&c[5])?,
                ciw: num(&c[6])?,
                n_point: c[7].parse().map_err(|e| parse_err(line, e))?,
                n_interval: c[8].parse().map_err(|e| parse_err(line, e))?,
            })
        })
        .collect()
}

/// Markdown table with columns True, Mean, Bias, MSE, Cov %, CIW.
pub fn render_metrics_markdown(m: &StudyMetrics) -> String {
    let mut out = String::from("| Estimand | True | Mean | Bias | MSE | Cov % | CIW |\n|---|---|---|---|---|---|---|\n");
    for r in &m.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.estimand,
            r.truth,
            r.mean,
            r.bias,
            r.mse,
            opt(r.coverage_pct),
            opt(r.ciw)
        );
    }
    out
}

/// Writes `raw.csv`, `metrics.csv`, `metrics.md` and `manifest.json`.
pub fn write_study_outputs(dir: &Path, result: &StudyResult, manifest: &serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("raw.csv"), render_raw_csv(&result.raw))?;
    std::fs::write(dir.join("metrics.csv"), render_metrics_csv(&result.metrics))?;
    std::fs::write(dir.join("metrics.md"), render_metrics_markdown(&result.metrics))?;
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}
