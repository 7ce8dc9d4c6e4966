//! Browser bindings. Every export takes plain numbers or JSON text and
//! returns JSON text; failures come back as `{"error": "..."}`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use picsurv::comparators::turnbull_npmle;
use picsurv::simulate::{benchmark_truth, simulate_cohort, DgpConfig};
use picsurv::{lognormal_from_quantiles, marginal_survival, median_to_scale, ModelKind, PicParameters};

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn grid(t_max: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| t_max * k as f64 / steps as f64).collect()
}

/// Population curve for one strain: `[[t, S(t)], ...]` on an even grid.
/// `median` is the Weibull median in the same unit as `t_max`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn marginal_curve(
    alpha: f64,
    median: f64,
    beta_pi: f64,
    beta_delta: f64,
    strain_pi: f64,
    strain_delta: f64,
    gamma: f64,
    strain18: bool,
    t_max: f64,
    steps: usize,
) -> String {
    respond((|| {
        if !(t_max > 0.0 && t_max.is_finite()) || steps == 0 {
            return Err("t_max must be positive and steps at least 1".to_string());
        }
        let params = PicParameters {
            alpha,
            lambda: median_to_scale(median, alpha),
            beta_pi: vec![beta_pi, strain_pi],
            beta_delta: vec![beta_delta, strain_delta],
            gamma: vec![gamma],
        };
        params.validate(ModelKind::Pic).map_err(|e| e.to_string())?;
        let x = if strain18 { 1.0 } else { 0.0 };
        let points = grid(t_max, steps)
            .into_iter()
            .map(|t| {
                marginal_survival(t, &[1.0, x], &[x], &params, ModelKind::Pic)
                    .map(|s| json!([t, s]))
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Value::Array(points))
    })())
}

/// Log-normal hyperparameters matching a 95% interval `(low, high)`.
#[wasm_bindgen]
pub fn elicit(low: f64, high: f64) -> String {
    respond(
        lognormal_from_quantiles(low, high)
            .map(|s| {
                let (q_low, q_high) = s.lognormal_quantiles();
                json!({ "mu": s.mu, "sigma": s.sigma, "median": s.mu.exp(), "check": [q_low, q_high] })
            })
            .map_err(|e| e.to_string()),
    )
}

/// Simulates a benchmark cohort and returns the Turnbull step curve next to
/// the true population survival (strains mixed at the simulated share).
#[wasm_bindgen]
pub fn simulate_npmle(n: usize, seed: u64) -> String {
    respond((|| {
        let config = DgpConfig { n, seed, ..Default::default() };
        let cohort = simulate_cohort(&config).map_err(|e| e.to_string())?;
        let intervals: Vec<(f64, f64)> = cohort.records.iter().map(|r| (r.left, r.right)).collect();
        let curve = turnbull_npmle(&intervals).map_err(|e| e.to_string())?;
        let steps: Vec<Value> = curve.steps().into_iter().map(|(t, s)| json!([t, s])).collect();
        let t_max = steps
            .iter()
            .filter_map(|p| p[0].as_f64())
            .fold(config.horizon.min(10.0), f64::max)
            .min(config.horizon);
        let truth = benchmark_truth();
        let share = config.p_strain16;
        let truth_curve = grid(t_max, 100)
            .into_iter()
            .map(|t| {
                let s16 = marginal_survival(t, &[1.0, 0.0], &[0.0], &truth, ModelKind::Pic)?;
                let s18 = marginal_survival(t, &[1.0, 1.0], &[1.0], &truth, ModelKind::Pic)?;
                Ok(json!([t, share * s16 + (1.0 - share) * s18]))
            })
            .collect::<picsurv::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        Ok(json!({
            "npmle": steps,
            "truth": truth_curve,
            "iterations": curve.iterations,
            "redrawn": cohort.redrawn,
        }))
    })())
}
