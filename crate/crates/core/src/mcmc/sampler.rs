use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::ParamLayout;
use crate::likelihood::LikelihoodEvaluator;
use crate::model::{Group, ModelKind, ObservationRecord};
use crate::priors::{log_prior_unchecked, NormalSpec, PicPriorSpec};
use crate::rng::{substream, StreamRng};

use super::diagnostics::gelman_rubin;

/// Chain initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Independent draws from the prior, one per chain.
    PriorDraw,
    /// The same sampling-scale point for every chain.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_adapt: usize,
    pub n_burnin: usize,
    pub n_keep: usize,
    pub thin: usize,
    pub seed: u64,
    pub init: Init,
    pub target_accept: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_adapt: 2000,
            n_burnin: 5000,
            n_keep: 10_000,
            thin: 1,
            seed: 1,
            init: Init::PriorDraw,
            target_accept: 0.44,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_chains == 0 {
            return bad("n_chains must be positive");
        }
        if self.n_adapt == 0 || self.n_burnin == 0 {
            return bad("n_adapt and n_burnin must be positive");
        }
        if self.n_keep == 0 {
            return bad("n_keep must be positive");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie in (0, 1)");
        }
        Ok(())
    }

    /// Retained draws per chain.
    pub fn draws_per_chain(&self) -> usize {
        self.n_keep.div_ceil(self.thin)
    }
}

/// An unnormalized log density on an unconstrained space.
pub trait LogTarget: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, theta: &[f64]) -> f64;
    /// Initial random-walk scale for coordinate `k`.
    fn initial_step(&self, _k: usize) -> f64 {
        0.5
    }
}

/// Posterior of the mixture model on the sampling scale.
pub struct PosteriorTarget {
    eval: LikelihoodEvaluator,
    layout: ParamLayout,
    prior: Vec<NormalSpec>,
    with_likelihood: bool,
}

impl PosteriorTarget {
    pub fn new(records: &[ObservationRecord], prior: &PicPriorSpec, model: ModelKind) -> Result<Self> {
        let eval = LikelihoodEvaluator::new(records, model)?;
        let layout = eval.layout();
        prior.check(&layout)?;
        Ok(Self {
            eval,
            layout,
            prior: prior.coordinates(&layout),
            with_likelihood: true,
        })
    }

    /// Same target with the likelihood switched off: the prior alone.
    pub fn prior_only(mut self) -> Self {
        self.with_likelihood = false;
        self
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.eval.log_likelihood(&self.layout.from_sampling(theta))
    }
}

impl LogTarget for PosteriorTarget {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let prior = log_prior_unchecked(theta, &self.prior);
        if !self.with_likelihood || prior == f64::NEG_INFINITY {
            return prior;
        }
        let ll = self.log_likelihood(theta);
        if ll.is_nan() {
            f64::NEG_INFINITY
        } else {
            prior + ll
        }
    }

    fn initial_step(&self, k: usize) -> f64 {
        0.5 * self.prior[k].sigma.min(1.0)
    }
}

/// Multi-chain draws on the sampling scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSet {
    pub layout: ParamLayout,
    /// `draws[chain][iteration][coordinate]`
    pub draws: Vec<Vec<Vec<f64>>>,
    /// Post-adaptation acceptance rate per coordinate, averaged over chains.
    pub accept_rates: Vec<f64>,
    /// Split-R-hat per sampling-scale coordinate (`NaN` if not computable).
    pub rhat: Vec<f64>,
    /// `(seed, stream)` per chain.
    pub seeds: Vec<(u64, u64)>,
    pub warnings: Vec<String>,
}

impl ChainSet {
    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    /// Trace of coordinate `k`, per chain.
    pub fn trace(&self, k: usize) -> Vec<Vec<f64>> {
        self.draws
            .iter()
            .map(|c| c.iter().map(|d| d[k]).collect())
            .collect()
    }

    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().filter(|r| !r.is_nan()).fold(1.0, f64::max)
    }

    pub fn converged(&self, threshold: f64) -> bool {
        self.max_rhat() < threshold
    }
}

struct ChainOutput {
    draws: Vec<Vec<f64>>,
    accept_rates: Vec<f64>,
}

fn run_chain<T: LogTarget>(
    target: &T,
    config: &SamplerConfig,
    mut theta: Vec<f64>,
    rng: &mut StreamRng,
) -> ChainOutput {
    let dim = target.dim();
    let mut log_step: Vec<f64> = (0..dim).map(|k| target.initial_step(k).ln()).collect();
    let mut current = target.log_density(&theta);
    let mut accepted = vec![0usize; dim];
    let keep_start = config.n_adapt + config.n_burnin;
    let total = keep_start + config.n_keep;
    let mut draws = Vec::with_capacity(config.draws_per_chain());

    for iter in 0..total {
        let adapting = iter < config.n_adapt;
        let gain = (iter as f64 + 1.0).powf(-0.6);
        for k in 0..dim {
            let old = theta[k];
            let z: f64 = StandardNormal.sample(rng);
            theta[k] = old + log_step[k].exp() * z;
            let proposed = target.log_density(&theta);
            let log_u = rng.random::<f64>().ln();
            let accept = proposed > f64::NEG_INFINITY && log_u < proposed - current;
            if accept {
                current = proposed;
            } else {
                theta[k] = old;
            }
            if adapting {
                let hit = if accept { 1.0 } else { 0.0 };
                log_step[k] += gain * (hit - config.target_accept);
            } else if iter >= keep_start && accept {
                accepted[k] += 1;
            }
        }
        if iter >= keep_start && (iter - keep_start) % config.thin == 0 {
            draws.push(theta.clone());
        }
    }
    ChainOutput {
        draws,
        accept_rates: accepted
            .iter()
            .map(|&a| a as f64 / config.n_keep as f64)
            .collect(),
    }
}

/// Runs `config.n_chains` independent component-wise adaptive random-walk
/// Metropolis chains on `target`.
///
/// Step sizes follow a Robbins-Monro recursion toward `target_accept`
/// during the adaptation phase and are frozen afterwards. Adaptation and
/// burn-in draws are discarded.
pub fn sample_chains<T, I>(target: &T, config: &SamplerConfig, init: I) -> Result<Vec<(Vec<Vec<f64>>, Vec<f64>)>>
where
    T: LogTarget,
    I: Fn(usize, &mut StreamRng) -> Result<Vec<f64>> + Sync,
{
    config.validate()?;
    let outputs = crate::par::map_indexed(config.n_chains, |chain| -> Result<ChainOutput> {
        let mut rng = substream(config.seed, chain as u64);
        let start = init(chain, &mut rng)?;
        if start.len() != target.dim() {
            return Err(Error::DimensionMismatch {
                what: "initial point",
                expected: target.dim(),
                actual: start.len(),
            });
        }
        Ok(run_chain(target, config, start, &mut rng))
    });
    outputs
        .into_iter()
        .map(|o| o.map(|o| (o.draws, o.accept_rates)))
        .collect()
}

const INIT_ATTEMPTS: usize = 100;

fn degenerate_warnings(records: &[ObservationRecord], model: ModelKind) -> Vec<String> {
    let mut counts = [0usize; 4];
    for r in records {
        counts[r.group.index()] += 1;
    }
    let mut out = Vec::new();
    if counts[Group::C1.index()] + counts[Group::C4.index()] == 0 {
        out.push("no C1/C4 records: prevalence is identified by the prior only".to_string());
    }
    if counts[Group::C2.index()] + counts[Group::C4.index()] == 0 {
        out.push("no observed events after baseline: incidence is identified by the prior only".to_string());
    }
    if model.has_cure() && counts[Group::C3.index()] == 0 {
        out.push("no censored records: cure fraction is identified by the prior only".to_string());
    }
    out
}

fn finish(layout: ParamLayout, config: &SamplerConfig, runs: Vec<(Vec<Vec<f64>>, Vec<f64>)>, warnings: Vec<String>) -> ChainSet {
    let dim = layout.dim();
    let n_chains = runs.len() as f64;
    let mut accept_rates = vec![0.0; dim];
    for (_, rates) in &runs {
        for (acc, r) in accept_rates.iter_mut().zip(rates) {
            *acc += r / n_chains;
        }
    }
    let draws: Vec<Vec<Vec<f64>>> = runs.into_iter().map(|(d, _)| d).collect();
    let mut set = ChainSet {
        layout,
        draws,
        accept_rates,
        rhat: Vec::new(),
        seeds: (0..config.n_chains as u64).map(|c| (config.seed, c)).collect(),
        warnings,
    };
    set.rhat = (0..dim)
        .map(|k| gelman_rubin(&set.trace(k)).unwrap_or(f64::NAN))
        .collect();
    set
}

/// Samples the posterior of `model` given `records` and `prior`.
pub fn sample_posterior(
    records: &[ObservationRecord],
    prior: &PicPriorSpec,
    model: ModelKind,
    config: &SamplerConfig,
) -> Result<ChainSet> {
    config.validate()?;
    let target = PosteriorTarget::new(records, prior, model)?;
    let warnings = degenerate_warnings(records, model);
    sample_target(&target, prior, config, warnings)
}

/// Samples the prior alone through the same machinery as the posterior.
pub fn sample_prior(
    records: &[ObservationRecord],
    prior: &PicPriorSpec,
    model: ModelKind,
    config: &SamplerConfig,
) -> Result<ChainSet> {
    config.validate()?;
    let target = PosteriorTarget::new(records, prior, model)?.prior_only();
    sample_target(&target, prior, config, Vec::new())
}

fn sample_target(
    target: &PosteriorTarget,
    prior: &PicPriorSpec,
    config: &SamplerConfig,
    warnings: Vec<String>,
) -> Result<ChainSet> {
    let layout = target.layout();
    let runs = sample_chains(target, config, |_, rng| match &config.init {
        Init::Custom(v) => {
            layout.check(v)?;
            if target.log_density(v) == f64::NEG_INFINITY {
                return Err(Error::NonFiniteInit { attempts: 1 });
            }
            Ok(v.clone())
        }
        Init::PriorDraw => {
            for _ in 0..INIT_ATTEMPTS {
                let theta = prior.draw(&layout, rng);
                if target.log_density(&theta) > f64::NEG_INFINITY {
                    return Ok(theta);
                }
            }
            Err(Error::NonFiniteInit {
                attempts: INIT_ATTEMPTS,
            })
        }
    })?;
    Ok(finish(layout, config, runs, warnings))
}
