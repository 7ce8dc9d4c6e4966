use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::ParamLayout;
use crate::likelihood::LikelihoodEvaluator;
use crate::model::{Group, ModelKind, ObservationRecord, PicParameters};
use crate::par::map_indexed;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MleConfig {
    pub max_iter: usize,
    /// Bound on the gradient infinity-norm of the mean log-likelihood.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-6,
            restarts: 5,
            seed: 1,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::InvalidConfig("max_iter and restarts must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        Ok(())
    }
}

/// Maximum-likelihood fit of the two-component (no cure) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiFit {
    pub layout: ParamLayout,
    pub point: PicParameters,
    /// Optimizer-scale estimate `(log alpha, log lambda, beta_pi, gamma)`.
    pub theta: Vec<f64>,
    /// Standard errors on the optimizer scale, from the observed information.
    pub se: Vec<f64>,
    pub converged: bool,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Optimizer-scale estimates of successful bootstrap refits.
    #[serde(default)]
    pub bootstrap: Option<Vec<Vec<f64>>>,
}

impl PiFit {
    /// Standard errors of `alpha` and `lambda` by the delta method, then the
    /// coefficients unchanged.
    pub fn natural_se(&self) -> Vec<f64> {
        let mut out = self.se.clone();
        out[0] *= self.point.alpha;
        out[1] *= self.point.lambda;
        out
    }
}

pub struct Optimum {
    pub theta: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes `f` by BFGS with Armijo backtracking. `f` writes the gradient
/// into its second argument and may return `+inf` outside its domain.
pub(crate) fn bfgs<F>(f: F, x0: &[f64], max_iter: usize, tol: f64) -> Optimum
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut g = DVector::zeros(n);
    let mut fx = f(x.as_slice(), g.as_mut_slice());
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut x_new = DVector::zeros(n);
    let mut g_new = DVector::zeros(n);
    while iterations < max_iter && fx.is_finite() && inf_norm(g.as_slice()) >= tol {
        iterations += 1;
        let mut d = -(&h * &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            h.fill_with_identity();
            d = -g.clone();
            slope = g.dot(&d);
        }
        // Long steps overflow the hazard; cap the trial move.
        let longest = inf_norm(d.as_slice());
        if longest > 2.0 {
            d *= 2.0 / longest;
            slope *= 2.0 / longest;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            x_new.copy_from(&x);
            x_new.axpy(t, &d, 1.0);
            let f_new = f(x_new.as_slice(), g_new.as_mut_slice());
            if f_new.is_finite() && f_new <= fx + 1e-4 * t * slope {
                let s = &x_new - &x;
                let y = &g_new - &g;
                let sy = s.dot(&y);
                if sy > 1e-12 * s.norm() * y.norm() {
                    if fresh {
                        h *= sy / y.dot(&y);
                        fresh = false;
                    }
                    let rho = 1.0 / sy;
                    let hy = &h * &y;
                    let yhy = y.dot(&hy);
                    // H += (1 + rho yHy) rho s s' - rho (Hy s' + s y'H)
                    let hys = &hy * s.transpose();
                    h += (&s * s.transpose()) * (rho * (1.0 + rho * yhy)) - (&hys + hys.transpose()) * rho;
                }
                std::mem::swap(&mut x, &mut x_new);
                std::mem::swap(&mut g, &mut g_new);
                fx = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if fresh {
                break;
            }
            h.fill_with_identity();
            fresh = true;
        }
    }
    Optimum {
        grad_norm: inf_norm(g.as_slice()),
        theta: x.as_slice().to_vec(),
        value: fx,
        iterations,
    }
}

/// Central-difference Hessian of the total log-likelihood from its analytic
/// gradient, symmetrized.
pub(crate) fn hessian(eval: &LikelihoodEvaluator, theta: &[f64]) -> DMatrix<f64> {
    let layout = eval.layout();
    let k = theta.len();
    let mut out = DMatrix::zeros(k, k);
    let mut gp = vec![0.0; k];
    let mut gm = vec![0.0; k];
    let mut x = theta.to_vec();
    for j in 0..k {
        let h = 1e-5 * theta[j].abs().max(1.0);
        x[j] = theta[j] + h;
        eval.log_likelihood_with_gradient(&layout.from_optimizer(&x), &mut gp);
        x[j] = theta[j] - h;
        eval.log_likelihood_with_gradient(&layout.from_optimizer(&x), &mut gm);
        x[j] = theta[j];
        for i in 0..k {
            out[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    (&out + out.transpose()) * 0.5
}

/// Starting point from the data: unit shape, median-ish scale from the
/// finite endpoints, prevalence intercept from the baseline-positive share.
fn data_start(records: &[ObservationRecord], layout: &ParamLayout) -> Vec<f64> {
    let mut times: Vec<f64> = records
        .iter()
        .flat_map(|r| [r.left, r.right])
        .filter(|t| t.is_finite() && *t > 0.0)
        .collect();
    times.sort_by(f64::total_cmp);
    let scale = if times.is_empty() { 1.0 } else { times[times.len() / 2] };
    let c1 = records.iter().filter(|r| r.group == Group::C1).count() as f64;
    let n = records.len() as f64;
    let mut theta = vec![0.0; layout.dim()];
    theta[1] = scale.ln();
    theta[layout.beta_pi().start] = ((c1 + 0.5) / (n - c1 + 0.5)).ln();
    theta
}

fn dispersed(base: &[f64], seed: u64, index: u64) -> Vec<f64> {
    let mut rng = substream(seed, index);
    base.iter()
        .enumerate()
        .map(|(k, b)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            b + z * if k < 2 { 0.5 } else { 1.0 }
        })
        .collect()
}

/// Runs one optimization from `start` and checks the optimum.
pub fn optimize_from(
    eval: &LikelihoodEvaluator,
    start: &[f64],
    config: &MleConfig,
) -> Option<(Optimum, DMatrix<f64>, bool)> {
    let layout = eval.layout();
    let n = eval.len() as f64;
    let objective = |theta: &[f64], grad: &mut [f64]| -> f64 {
        let p = layout.from_optimizer(theta);
        if !p.alpha.is_finite() || !p.lambda.is_finite() || p.alpha <= 0.0 || p.lambda <= 0.0 {
            return f64::INFINITY;
        }
        let ll = eval.log_likelihood_with_gradient(&p, grad);
        for g in grad.iter_mut() {
            *g = -*g / n;
        }
        if ll.is_finite() && grad.iter().all(|g| g.is_finite()) {
            -ll / n
        } else {
            f64::INFINITY
        }
    };
    let opt = bfgs(objective, start, config.max_iter, config.tol);
    if !opt.value.is_finite() {
        return None;
    }
    let h = hessian(eval, &opt.theta);
    let negative_definite = (-h.clone()).cholesky().is_some();
    let converged = opt.grad_norm < config.tol && negative_definite;
    Some((opt, h, converged))
}

/// Maximum-likelihood fit of the PI model from several starting points.
///
/// The first start is data-driven; the others are random perturbations of
/// it. The best converged optimum wins. Fails with
/// [`Error::NonConvergence`] when no start converges.
pub fn fit_pi_mle(records: &[ObservationRecord], config: &MleConfig) -> Result<PiFit> {
    config.validate()?;
    let eval = LikelihoodEvaluator::new(records, ModelKind::Pi)?;
    let base = data_start(records, &eval.layout());
    let starts: Vec<Vec<f64>> = (0..config.restarts)
        .map(|k| if k == 0 { base.clone() } else { dispersed(&base, config.seed, k as u64) })
        .collect();
    let results = map_indexed(starts.len(), |k| optimize_from(&eval, &starts[k], config));
    best_fit(&eval, results, config.restarts)
}

/// Refit warm-started from a previous optimum, falling back to one
/// dispersed restart.
pub(crate) fn refit_from(
    records: &[ObservationRecord],
    start: &[f64],
    config: &MleConfig,
    seed: u64,
) -> Result<PiFit> {
    let eval = LikelihoodEvaluator::new(records, ModelKind::Pi)?;
    let first = optimize_from(&eval, start, config);
    if matches!(first, Some((_, _, true))) {
        return best_fit(&eval, vec![first], 1);
    }
    let second = optimize_from(&eval, &dispersed(start, seed, 0), config);
    best_fit(&eval, vec![first, second], 2)
}

fn best_fit(
    eval: &LikelihoodEvaluator,
    results: Vec<Option<(Optimum, DMatrix<f64>, bool)>>,
    restarts: usize,
) -> Result<PiFit> {
    let best = results
        .into_iter()
        .flatten()
        .filter(|r| r.2)
        .min_by(|a, b| a.0.value.total_cmp(&b.0.value));
    let Some((opt, h, _)) = best else {
        return Err(Error::NonConvergence { restarts });
    };
    let layout = eval.layout();
    let k = opt.theta.len();
    let se = match (-h).try_inverse() {
        Some(cov) => (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; k],
    };
    let point = layout.from_optimizer(&opt.theta);
    Ok(PiFit {
        layout,
        log_likelihood: eval.log_likelihood(&point),
        point,
        theta: opt.theta,
        se,
        converged: true,
        iterations: opt.iterations,
        bootstrap: None,
    })
}
