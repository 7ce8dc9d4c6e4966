use crate::error::{Error, Result};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Split-chain potential scale reduction factor.
///
/// Chains are trimmed to the shortest length and each is cut into two
/// halves (the middle draw is dropped for odd lengths). Returns `1` when
/// every draw is identical and `+inf` when the halves are internally
/// constant but disagree with each other. Never below `1`.
pub fn gelman_rubin<C: AsRef<[f64]>>(chains: &[C]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::InsufficientDraws {
            what: "chains",
            needed: 2,
            actual: chains.len(),
        });
    }
    let len = chains.iter().map(|c| c.as_ref().len()).min().unwrap_or(0);
    if len < 10 {
        return Err(Error::InsufficientDraws {
            what: "draws per chain",
            needed: 10,
            actual: len,
        });
    }
    let half = len / 2;
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let c = &c.as_ref()[..len];
        halves.push(&c[..half]);
        halves.push(&c[len - half..]);
    }
    let n = half as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let within = mean(&halves.iter().map(|h| sample_variance(h)).collect::<Vec<_>>());
    let between = n * sample_variance(&means);
    if within == 0.0 {
        return Ok(if between > 0.0 { f64::INFINITY } else { 1.0 });
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    // The (n-1)/n factor can push iid chains a hair below one.
    Ok((var_plus / within).sqrt().max(1.0))
}

/// Effective sample size summed over chains, from per-chain
/// autocorrelations truncated at the first negative pair sum.
pub fn effective_sample_size<C: AsRef<[f64]>>(chains: &[C]) -> f64 {
    chains.iter().map(|c| chain_ess(c.as_ref())).sum()
}

fn chain_ess(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(x);
    let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = autocov(0);
    if c0 <= 0.0 {
        return n as f64;
    }
    // Geyer's initial positive sequence on pairs (rho_{2k} + rho_{2k+1}).
    let mut sum_pairs = 0.0;
    let mut lag = 0;
    while lag + 1 < n / 2 {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        sum_pairs += pair;
        lag += 2;
    }
    let tau = 2.0 * sum_pairs - 1.0;
    let cap = n as f64 * (n as f64).log10();
    if tau <= 0.0 {
        cap
    } else {
        (n as f64 / tau).min(cap)
    }
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}
