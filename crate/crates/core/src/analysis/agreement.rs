use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Methods ordered best-first, with the scores that induced the order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRanking {
    order: Vec<String>,
    scores: BTreeMap<String, f64>,
}

impl MethodRanking {
    /// Sorts by score descending; equal scores keep their input order.
    pub fn from_scores(scores: Vec<(String, f64)>) -> Self {
        let mut order: Vec<(String, f64)> = scores.clone();
        order.sort_by(|a, b| b.1.total_cmp(&a.1));
        Self {
            order: order.into_iter().map(|(m, _)| m).collect(),
            scores: scores.into_iter().collect(),
        }
    }

    /// A strict ranking with no underlying scores.
    pub fn from_order(order: Vec<String>) -> Self {
        let n = order.len();
        let scores = order
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), (n - i) as f64))
            .collect();
        Self { order, scores }
    }

    pub fn methods(&self) -> &[String] {
        &self.order
    }

    pub fn score(&self, method: &str) -> Option<f64> {
        self.scores.get(method).copied()
    }
}

struct PairCounts {
    concordant: usize,
    discordant: usize,
    tied_first: usize,
    tied_second: usize,
    pairs: usize,
}

fn pair_counts(r1: &MethodRanking, r2: &MethodRanking) -> Result<PairCounts> {
    if r1.order.len() != r1.scores.len()
        || r1.scores.len() != r2.scores.len()
        || r1.scores.keys().ne(r2.scores.keys())
    {
        return Err(Error::DimensionMismatch(
            "rankings cover different method sets".into(),
        ));
    }
    if r1.scores.len() < 2 {
        return Err(Error::InvalidArgument("need at least two methods".into()));
    }
    let a: Vec<f64> = r1.scores.values().copied().collect();
    let b: Vec<f64> = r2.scores.values().copied().collect();
    let mut c = PairCounts {
        concordant: 0,
        discordant: 0,
        tied_first: 0,
        tied_second: 0,
        pairs: 0,
    };
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            c.pairs += 1;
            let s1 = a[i].total_cmp(&a[j]) as i8;
            let s2 = b[i].total_cmp(&b[j]) as i8;
            if s1 == 0 {
                c.tied_first += 1;
            }
            if s2 == 0 {
                c.tied_second += 1;
            }
            match s1 * s2 {
                1 => c.concordant += 1,
                -1 => c.discordant += 1,
                _ => {}
            }
        }
    }
    Ok(c)
}

/// Kendall's tau-b between two method rankings. Returns 0 when either ranking
/// ties every pair.
pub fn kendall_tau(r1: &MethodRanking, r2: &MethodRanking) -> Result<f64> {
    let c = pair_counts(r1, r2)?;
    let denom = ((c.pairs - c.tied_first) as f64 * (c.pairs - c.tied_second) as f64).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((c.concordant as f64 - c.discordant as f64) / denom)
}

/// Fraction of method pairs whose relative order flips.
pub fn swap_rate(r1: &MethodRanking, r2: &MethodRanking) -> Result<f64> {
    let c = pair_counts(r1, r2)?;
    Ok(c.discordant as f64 / c.pairs as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PadResult {
    /// Mean percentage absolute difference over all method pairs.
    pub value: f64,
    /// Pairs whose larger average was not positive.
    pub degenerate_pairs: usize,
}

/// Mean over method pairs of `|x1 - x2| / max(x1, x2) * 100`.
///
/// Pairs with both averages 0 contribute 0. When the larger average is negative
/// the divisor is its magnitude; when it is exactly 0 and the other is negative
/// the divisor is the larger magnitude. Both cases are counted as degenerate.
pub fn pad(avg_scores: &[(String, f64)]) -> Result<PadResult> {
    if avg_scores.len() < 2 {
        return Err(Error::InvalidArgument(
            "PAD needs at least two methods".into(),
        ));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    let mut degenerate_pairs = 0usize;
    for (i, (_, x1)) in avg_scores.iter().enumerate() {
        for (_, x2) in &avg_scores[i + 1..] {
            pairs += 1;
            let diff = (x1 - x2).abs();
            let max = x1.max(*x2);
            if diff == 0.0 {
                continue;
            }
            let denom = if max > 0.0 {
                max
            } else {
                degenerate_pairs += 1;
                if max < 0.0 {
                    max.abs()
                } else {
                    x1.abs().max(x2.abs())
                }
            };
            total += diff / denom * 100.0;
        }
    }
    Ok(PadResult {
        value: total / pairs as f64,
        degenerate_pairs,
    })
}
