use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TOL: f64 = 1e-8;
const MAX_ITER: usize = 200_000;

/// Position of an endpoint among ties: a closed left end sorts before right
/// ends at the same value, an open left end after them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Side {
    ClosedLeft,
    Right,
    OpenLeft,
}

#[derive(Debug, Clone, Copy)]
struct Key(f64, Side);

impl Key {
    fn cmp(&self, other: &Key) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// One observation as a set on `[0, inf]`.
#[derive(Debug, Clone, Copy)]
struct Obs {
    lo: Key,
    hi: Key,
}

fn to_set(l: f64, r: f64) -> Result<Obs> {
    let illegal = |reason| Error::IllegalInterval { left: l, right: r, reason };
    if l.is_nan() || r.is_nan() {
        return Err(illegal("NaN endpoint"));
    }
    if r < 0.0 || r == f64::NEG_INFINITY {
        return Err(illegal("negative right endpoint"));
    }
    if l == f64::NEG_INFINITY && r == f64::INFINITY {
        return Err(illegal("subject carries no information"));
    }
    if l == f64::INFINITY || (l.is_finite() && l < 0.0) {
        return Err(illegal("left endpoint must be -inf or nonnegative"));
    }
    if l > r {
        return Err(illegal("left endpoint exceeds right endpoint"));
    }
    let lo = if l == f64::NEG_INFINITY {
        Key(0.0, Side::ClosedLeft)
    } else if l == r {
        Key(l, Side::ClosedLeft)
    } else {
        Key(l, Side::OpenLeft)
    };
    Ok(Obs { lo, hi: Key(r, Side::Right) })
}

/// Turnbull nonparametric MLE of the event-time distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpmleCurve {
    /// Innermost intervals `(q, p]`; `q == p` marks a point mass.
    pub intervals: Vec<(f64, f64)>,
    pub mass: Vec<f64>,
    /// Observed log-likelihood after each EM iteration.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
}

impl NpmleCurve {
    /// `S(t)`, with the mass of each innermost interval placed at its right
    /// end. Mass on `(q, inf)` never leaves the curve.
    pub fn survival(&self, t: f64) -> f64 {
        let dropped: f64 = self
            .intervals
            .iter()
            .zip(&self.mass)
            .filter(|((_, p), _)| *p <= t)
            .map(|(_, m)| m)
            .sum();
        (1.0 - dropped).clamp(0.0, 1.0)
    }

    /// Step points: time zero and every finite right end.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let mut ts: Vec<f64> = std::iter::once(0.0)
            .chain(self.intervals.iter().map(|(_, p)| *p).filter(|p| p.is_finite()))
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts.into_iter().map(|t| (t, self.survival(t))).collect()
    }

    /// `t,survival,lower,upper`; bounds are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,survival,lower,upper")?;
        for (t, s) in self.steps() {
            writeln!(out, "{t},{s},,")?;
        }
        Ok(())
    }
}

/// Self-consistency EM over the Turnbull innermost intervals.
///
/// `(-inf, 0]` is a point mass at zero and `(-inf, r]` becomes `[0, r]`;
/// `l == r` is an exactly observed time; otherwise `(l, r]`.
pub fn turnbull_npmle(intervals: &[(f64, f64)]) -> Result<NpmleCurve> {
    if intervals.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let obs = intervals.iter().map(|&(l, r)| to_set(l, r)).collect::<Result<Vec<_>>>()?;

    let mut keys: Vec<(Key, bool)> = obs.iter().flat_map(|o| [(o.lo, true), (o.hi, false)]).collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0));
    let mut inner: Vec<(Key, Key)> = Vec::new();
    for w in keys.windows(2) {
        if w[0].1 && !w[1].1 {
            inner.push((w[0].0, w[1].0));
        }
    }

    // Membership lists: observation i covers innermost interval j.
    let covers: Vec<Vec<usize>> = obs
        .iter()
        .map(|o| {
            (0..inner.len())
                .filter(|&j| o.lo.cmp(&inner[j].0) != Ordering::Greater && inner[j].1.cmp(&o.hi) != Ordering::Greater)
                .collect()
        })
        .collect();

    let m = inner.len();
    let n = obs.len() as f64;
    let mut mass = vec![1.0 / m as f64; m];
    let log_lik = |mass: &[f64]| -> f64 { covers.iter().map(|c| c.iter().map(|&j| mass[j]).sum::<f64>().ln()).sum() };
    let mut trace = vec![log_lik(&mass)];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut next = vec![0.0; m];
        for c in &covers {
            let denom: f64 = c.iter().map(|&j| mass[j]).sum();
            for &j in c {
                next[j] += mass[j] / denom;
            }
        }
        let mut change = 0.0f64;
        for (old, new) in mass.iter_mut().zip(&next) {
            let v = new / n;
            change = change.max((v - *old).abs());
            *old = v;
        }
        trace.push(log_lik(&mass));
        if change < TOL || iterations >= MAX_ITER {
            break;
        }
    }

    Ok(NpmleCurve {
        intervals: inner.iter().map(|(a, b)| (a.0, b.0)).collect(),
        mass,
        log_likelihood: trace,
        iterations,
    })
}
