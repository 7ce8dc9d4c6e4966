//! Flat parameter-vector layouts.
//!
//! Two unconstrained scales are used. The optimizer works on
//! `(log alpha, log lambda, beta_pi, [beta_delta], gamma)`; the sampler works on
//! `(log alpha, log m, beta_pi, [beta_delta], gamma)` where `m` is the median
//! event time of the base group, so every prior is a normal on that scale.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{median_to_scale, scale_to_median, ModelKind, PicParameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub model: ModelKind,
    pub q_mix: usize,
    pub q_inc: usize,
}

impl ParamLayout {
    pub fn new(model: ModelKind, q_mix: usize, q_inc: usize) -> Self {
        Self { model, q_mix, q_inc }
    }

    pub fn dim(&self) -> usize {
        2 + self.q_mix + self.delta_len() + self.q_inc
    }

    fn delta_len(&self) -> usize {
        if self.model.has_cure() {
            self.q_mix
        } else {
            0
        }
    }

    pub fn beta_pi(&self) -> Range<usize> {
        2..2 + self.q_mix
    }

    /// Empty for the two-component model.
    pub fn beta_delta(&self) -> Range<usize> {
        let start = 2 + self.q_mix;
        start..start + self.delta_len()
    }

    pub fn gamma(&self) -> Range<usize> {
        let start = 2 + self.q_mix + self.delta_len();
        start..start + self.q_inc
    }

    /// Coordinate names on the sampling scale.
    pub fn sampling_names(&self) -> Vec<String> {
        self.names("log_m_tilde")
    }

    /// Coordinate names on the optimizer scale.
    pub fn optimizer_names(&self) -> Vec<String> {
        self.names("log_lambda")
    }

    fn names(&self, second: &str) -> Vec<String> {
        let mut out = vec!["log_alpha".to_string(), second.to_string()];
        out.extend((1..=self.q_mix).map(|j| format!("beta_pi_{j}")));
        if self.model.has_cure() {
            out.extend((1..=self.q_mix).map(|j| format!("beta_delta_{j}")));
        }
        out.extend((1..=self.q_inc).map(|j| format!("gamma_{j}")));
        out
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.dim(),
                actual: theta.len(),
            })
        }
    }

    fn unpack(&self, theta: &[f64], alpha: f64, lambda: f64) -> PicParameters {
        PicParameters {
            alpha,
            lambda,
            beta_pi: theta[self.beta_pi()].to_vec(),
            beta_delta: theta[self.beta_delta()].to_vec(),
            gamma: theta[self.gamma()].to_vec(),
        }
    }

    fn pack(&self, first: f64, second: f64, p: &PicParameters) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.push(first);
        out.push(second);
        out.extend_from_slice(&p.beta_pi);
        if self.model.has_cure() {
            out.extend_from_slice(&p.beta_delta);
        }
        out.extend_from_slice(&p.gamma);
        out
    }

    /// `(log alpha, log lambda, ...)` to natural parameters.
    pub fn from_optimizer(&self, theta: &[f64]) -> PicParameters {
        self.unpack(theta, theta[0].exp(), theta[1].exp())
    }

    pub fn to_optimizer(&self, p: &PicParameters) -> Vec<f64> {
        self.pack(p.alpha.ln(), p.lambda.ln(), p)
    }

    /// `(log alpha, log m, ...)` to natural parameters.
    pub fn from_sampling(&self, theta: &[f64]) -> PicParameters {
        let alpha = theta[0].exp();
        self.unpack(theta, alpha, median_to_scale(theta[1].exp(), alpha))
    }

    pub fn to_sampling(&self, p: &PicParameters) -> Vec<f64> {
        self.pack(p.alpha.ln(), scale_to_median(p.lambda, p.alpha).ln(), p)
    }
}
