//! Per-query ideal upper bounds (IUB) and random-ranking lower bounds (RLB).
//!
//! The lower bound is the expected metric under a uniformly random permutation
//! of the query's documents. Three routes are provided:
//!
//! * closed forms computed from the label histogram alone. The DCG form is exact
//!   by linearity of expectation; the SP and ERR forms assume independence
//!   between positions and are approximations.
//! * exhaustive enumeration of the distinct label sequences that can occupy the
//!   first `min(k, n)` positions, each weighted by its probability.
//! * Monte-Carlo sampling of seeded random rankings.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{binarize, histogram, LabelHistogram, QueryDocs};
use crate::error::{Error, Result};
use crate::metrics::{discount, gain, ErrGainMap, MetricKind, MetricSpec};
use crate::ranking::{ideal_ranking, query_rng};

/// Default cap on the number of distinct prefixes the exhaustive oracle visits.
pub const DEFAULT_PREFIX_LIMIT: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RlbMethod {
    Closed,
    Exhaustive,
    MonteCarlo,
}

/// How lower bounds are obtained during evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundMode {
    Closed,
    Exhaustive { limit: u64 },
    MonteCarlo { samples: usize, seed: u64 },
}

impl BoundMode {
    pub fn exhaustive() -> Self {
        BoundMode::Exhaustive {
            limit: DEFAULT_PREFIX_LIMIT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub iub: f64,
    pub rlb: f64,
    pub rlb_method: RlbMethod,
    pub mc_stderr: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedGainStats {
    /// `E[2^R - 1]`
    pub e_gain: f64,
    /// `E[R]` under the ERR probability map.
    pub e_prob: f64,
    pub e_one_minus_prob: f64,
    /// `N_p / (N_p + N_n)`
    pub p_rel: f64,
}

pub fn expected_gain_stats(
    h: &LabelHistogram,
    threshold: u32,
    err_map: ErrGainMap,
) -> Result<ExpectedGainStats> {
    if h.n == 0 {
        return Err(Error::InvalidArgument("histogram is empty".into()));
    }
    let g_max = h.g_max();
    let mut e_gain = 0.0;
    let mut e_prob = 0.0;
    for grade in 0..=g_max {
        let p = h.probability(grade);
        e_gain += gain(grade) * p;
        e_prob += err_map.probability(grade, g_max) * p;
    }
    Ok(ExpectedGainStats {
        e_gain,
        e_prob,
        e_one_minus_prob: 1.0 - e_prob,
        p_rel: binarize(h, threshold)?.p_rel(),
    })
}

/// Metric value of the ideal (label-descending) ranking.
pub fn iub(spec: &MetricSpec, q: &QueryDocs) -> Result<f64> {
    Ok(spec.evaluate(&ideal_ranking(q), q)?.value)
}

/// `E[2^R - 1] * sum_{i <= min(k, n)} 1 / log_b(i + 1)`.
pub fn rlb_dcg_closed(h: &LabelHistogram, k: usize, log_base: f64) -> Result<f64> {
    let stats = expected_gain_stats(h, 0, ErrGainMap::Standard)?;
    let m = k.min(h.n);
    let discounts: f64 = (1..=m).map(|i| discount(i, log_base)).sum();
    Ok(stats.e_gain * discounts)
}

/// `min(k, n) * (N_p / (N_p + N_n))^2`, the independence approximation.
pub fn rlb_sp_closed(h: &LabelHistogram, k: usize, threshold: u32) -> Result<f64> {
    let p = expected_gain_stats(h, threshold, ErrGainMap::Standard)?.p_rel;
    Ok(k.min(h.n) as f64 * p * p)
}

/// `sum_{r <= min(k, n)} (1/r) * E[1 - R]^(r-1) * E[R]`, the independence
/// approximation.
pub fn rlb_err_closed(h: &LabelHistogram, k: usize, err_map: ErrGainMap) -> Result<f64> {
    let stats = expected_gain_stats(h, 0, err_map)?;
    let mut survive = 1.0;
    let mut total = 0.0;
    for r in 1..=k.min(h.n) {
        total += survive * stats.e_prob / r as f64;
        survive *= stats.e_one_minus_prob;
    }
    Ok(total)
}

fn spec_histogram(spec: &MetricSpec, q: &QueryDocs) -> Result<LabelHistogram> {
    histogram(q, spec.scale)
}

/// Closed-form lower bound for any metric spec.
pub fn rlb_closed(spec: &MetricSpec, q: &QueryDocs) -> Result<f64> {
    let h = spec_histogram(spec, q)?;
    match spec.kind {
        MetricKind::Dcg => rlb_dcg_closed(&h, spec.k, spec.log_base),
        MetricKind::Sp => rlb_sp_closed(&h, spec.k, spec.threshold),
        MetricKind::Err => rlb_err_closed(&h, spec.k, spec.err_map),
    }
}

/// Number of distinct label sequences of length `m` drawable without
/// replacement from the histogram, saturating at `u64::MAX`.
pub fn count_prefix_classes(h: &LabelHistogram, m: usize) -> u64 {
    let m = m.min(h.n);
    // binomials up to m
    let mut binom = vec![vec![0u128; m + 1]; m + 1];
    for a in 0..=m {
        binom[a][0] = 1;
        for b in 1..=a {
            binom[a][b] = binom[a - 1][b - 1].saturating_add(binom[a - 1][b]);
        }
    }
    let mut ways = vec![0u128; m + 1];
    ways[0] = 1;
    for &c in &h.counts {
        let mut next = vec![0u128; m + 1];
        for (len, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for t in 0..=c.min(m - len) {
                let add = w.saturating_mul(binom[len + t][t]);
                next[len + t] = next[len + t].saturating_add(add);
            }
        }
        ways = next;
    }
    u64::try_from(ways[m]).unwrap_or(u64::MAX)
}

/// Exact expectation of `f(prefix)` where `prefix` is the label sequence in the
/// first `m` positions of a uniformly random permutation.
pub fn exhaustive_expectation(
    h: &LabelHistogram,
    m: usize,
    limit: u64,
    mut f: impl FnMut(&[u32]) -> f64,
) -> Result<f64> {
    let m = m.min(h.n);
    let prefixes = count_prefix_classes(h, m);
    if prefixes > limit {
        return Err(Error::Intractable { prefixes, limit });
    }
    let mut remaining = h.counts.clone();
    let mut prefix = Vec::with_capacity(m);
    let mut total = 0.0;
    enumerate_prefixes(&mut remaining, h.n, m, 1.0, &mut prefix, &mut |p, w| {
        total += w * f(p)
    });
    Ok(total)
}

fn enumerate_prefixes(
    remaining: &mut [usize],
    left: usize,
    m: usize,
    weight: f64,
    prefix: &mut Vec<u32>,
    visit: &mut impl FnMut(&[u32], f64),
) {
    if prefix.len() == m {
        visit(prefix, weight);
        return;
    }
    for grade in 0..remaining.len() {
        let c = remaining[grade];
        if c == 0 {
            continue;
        }
        remaining[grade] -= 1;
        prefix.push(grade as u32);
        enumerate_prefixes(
            remaining,
            left - 1,
            m,
            weight * c as f64 / left as f64,
            prefix,
            visit,
        );
        prefix.pop();
        remaining[grade] += 1;
    }
}

/// Exact `E[A@k]` over uniform random permutations.
pub fn rlb_exhaustive(spec: &MetricSpec, q: &QueryDocs, limit: u64) -> Result<f64> {
    let h = spec_histogram(spec, q)?;
    exhaustive_expectation(&h, spec.k, limit, |prefix| {
        spec.evaluate_labels(prefix).value
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Mean and standard error of the metric over `samples` random rankings drawn
/// from the generator seeded by `(seed, qid)`.
pub fn rlb_montecarlo(
    spec: &MetricSpec,
    q: &QueryDocs,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "Monte Carlo needs at least 2 samples".into(),
        ));
    }
    let mut rng = query_rng(seed, q.qid());
    let mut labels = q.labels();
    let n = labels.len();
    let m = spec.k.min(n);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for s in 0..samples {
        // partial Fisher-Yates: only the first m positions are read
        for i in 0..m {
            let j = rng.random_range(i..n);
            labels.swap(i, j);
        }
        let x = spec.evaluate_labels(&labels[..m]).value;
        let delta = x - mean;
        mean += delta / (s + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = (m2 / (samples - 1) as f64).max(0.0);
    Ok(MonteCarloEstimate {
        estimate: mean,
        stderr: (var / samples as f64).sqrt(),
    })
}

/// IUB together with an RLB obtained by the requested mode.
pub fn compute_bounds(spec: &MetricSpec, q: &QueryDocs, mode: BoundMode) -> Result<BoundSet> {
    let iub = iub(spec, q)?;
    let (rlb, rlb_method, mc_stderr) = match mode {
        BoundMode::Closed => (rlb_closed(spec, q)?, RlbMethod::Closed, None),
        BoundMode::Exhaustive { limit } => {
            (rlb_exhaustive(spec, q, limit)?, RlbMethod::Exhaustive, None)
        }
        BoundMode::MonteCarlo { samples, seed } => {
            let mc = rlb_montecarlo(spec, q, samples, seed)?;
            (mc.estimate, RlbMethod::MonteCarlo, Some(mc.stderr))
        }
    };
    Ok(BoundSet {
        iub,
        rlb,
        rlb_method,
        mc_stderr,
    })
}

/// Closed-form RLB divided by IUB (0 when IUB is 0).
pub fn expected_normalized(spec: &MetricSpec, q: &QueryDocs) -> Result<f64> {
    let iub = iub(spec, q)?;
    if iub > 0.0 {
        Ok(rlb_closed(spec, q)? / iub)
    } else {
        Ok(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::GradeScale;
    use approx::assert_abs_diff_eq;

    fn spec(kind: MetricKind, k: usize, g_max: u32) -> MetricSpec {
        MetricSpec::new(kind, k, GradeScale::new(g_max).unwrap()).unwrap()
    }

    fn q(labels: &[u32]) -> QueryDocs {
        QueryDocs::from_labels("q", labels).unwrap()
    }

    fn hist(counts: &[usize]) -> LabelHistogram {
        LabelHistogram::from_counts(counts.to_vec()).unwrap()
    }

    #[test]
    fn iub_examples() {
        assert_eq!(iub(&spec(MetricKind::Sp, 2, 1), &q(&[0, 1])).unwrap(), 1.0);
        let v = iub(&spec(MetricKind::Dcg, 2, 3), &q(&[2, 3])).unwrap();
        assert_abs_diff_eq!(v, 8.892789, epsilon = 1e-6);
        for kind in MetricKind::ALL {
            assert_eq!(iub(&spec(kind, 3, 2), &q(&[0, 0, 0])).unwrap(), 0.0);
        }
    }

    #[test]
    fn iub_sp_is_min_np_k() {
        let query = q(&[1, 0, 2, 0, 1]);
        for k in 1..=6 {
            let v = iub(&spec(MetricKind::Sp, k, 2), &query).unwrap();
            assert_eq!(v, k.min(3) as f64);
        }
    }

    #[test]
    fn dcg_closed_examples() {
        let h = hist(&[1, 1, 1]);
        let v = rlb_dcg_closed(&h, 2, 2.0).unwrap();
        assert_abs_diff_eq!(v, 4.0 / 3.0 * (1.0 + 1.0 / 3f64.log2()), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 2.174574, epsilon = 1e-6);
        assert_eq!(rlb_dcg_closed(&hist(&[4, 0, 0]), 3, 2.0).unwrap(), 0.0);

        let s = spec(MetricKind::Dcg, 3, 3);
        let query = q(&[2, 2, 2, 2]);
        let actual = s.evaluate_labels(&query.labels()).value;
        assert_abs_diff_eq!(rlb_closed(&s, &query).unwrap(), actual, epsilon = 1e-12);
    }

    #[test]
    fn sp_closed_examples() {
        assert_eq!(rlb_sp_closed(&hist(&[1, 1]), 2, 0).unwrap(), 0.5);
        assert_eq!(rlb_sp_closed(&hist(&[5, 0]), 3, 0).unwrap(), 0.0);
        assert_eq!(rlb_sp_closed(&hist(&[0, 4]), 3, 0).unwrap(), 3.0);
        // truncated at n
        assert_eq!(rlb_sp_closed(&hist(&[0, 2]), 5, 0).unwrap(), 2.0);
    }

    #[test]
    fn err_closed_examples() {
        let h = hist(&[1, 0, 0, 0, 1]);
        let v = rlb_err_closed(&h, 2, ErrGainMap::Standard).unwrap();
        let e = 15.0 / 32.0;
        assert_abs_diff_eq!(v, e + 0.5 * (17.0 / 32.0) * e, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.593262, epsilon = 1e-6);
        assert_eq!(
            rlb_err_closed(&hist(&[3, 0, 0, 0, 0]), 2, ErrGainMap::Standard).unwrap(),
            0.0
        );
        let single = rlb_err_closed(&hist(&[0, 0, 0, 0, 1]), 1, ErrGainMap::Standard).unwrap();
        assert_eq!(single, 0.9375);
    }

    #[test]
    fn gain_stats_examples() {
        let s = expected_gain_stats(&hist(&[1, 1, 1]), 0, ErrGainMap::Standard).unwrap();
        assert_abs_diff_eq!(s.e_gain, 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.p_rel, 2.0 / 3.0, epsilon = 1e-15);
        let s = expected_gain_stats(&hist(&[3, 0, 0]), 0, ErrGainMap::Standard).unwrap();
        assert_eq!((s.e_gain, s.e_prob, s.p_rel), (0.0, 0.0, 0.0));
        assert_eq!(s.e_one_minus_prob, 1.0);
        let s = expected_gain_stats(&hist(&[1, 0, 0, 0, 1]), 0, ErrGainMap::Standard).unwrap();
        assert_eq!(s.e_prob, 15.0 / 32.0);
        assert!(expected_gain_stats(&hist(&[0, 0]), 0, ErrGainMap::Standard).is_err());
    }

    #[test]
    fn exhaustive_examples() {
        let limit = DEFAULT_PREFIX_LIMIT;
        let v = rlb_exhaustive(&spec(MetricKind::Dcg, 2, 2), &q(&[2, 1, 0]), limit).unwrap();
        assert_abs_diff_eq!(v, 2.174574, epsilon = 1e-6);
        let v = rlb_exhaustive(&spec(MetricKind::Sp, 2, 1), &q(&[1, 0]), limit).unwrap();
        assert_eq!(v, 0.75);
        let v = rlb_exhaustive(&spec(MetricKind::Err, 2, 4), &q(&[4, 0]), limit).unwrap();
        assert_eq!(v, 45.0 / 64.0);
    }

    #[test]
    fn prefix_counts() {
        // 3 distinct labels, 2 positions: 3 * 2 ordered prefixes
        assert_eq!(count_prefix_classes(&hist(&[1, 1, 1]), 2), 6);
        // multiset {0,0,1}: sequences of length 3 are 3
        assert_eq!(count_prefix_classes(&hist(&[2, 1]), 3), 3);
        assert_eq!(count_prefix_classes(&hist(&[5, 0]), 4), 1);
        assert_eq!(
            count_prefix_classes(&hist(&[60, 60, 60, 60, 60]), 30),
            u64::MAX
        );
    }

    #[test]
    fn guard_rejects_large_enumerations() {
        let labels: Vec<u32> = (0..60).map(|i| i % 5).collect();
        let err = rlb_exhaustive(&spec(MetricKind::Dcg, 20, 4), &q(&labels), 1000).unwrap_err();
        assert!(matches!(err, Error::Intractable { limit: 1000, .. }));
        assert!(err.to_string().contains("Monte Carlo"));
    }

    #[test]
    fn montecarlo_constant_labels_has_zero_stderr() {
        let s = spec(MetricKind::Dcg, 3, 2);
        let query = q(&[1, 1, 1, 1]);
        let mc = rlb_montecarlo(&s, &query, 100, 3).unwrap();
        assert_abs_diff_eq!(
            mc.estimate,
            s.evaluate_labels(&[1, 1, 1]).value,
            epsilon = 1e-12
        );
        assert_eq!(mc.stderr, 0.0);
        assert!(rlb_montecarlo(&s, &query, 1, 3).is_err());
    }

    #[test]
    fn montecarlo_is_deterministic() {
        let s = spec(MetricKind::Err, 3, 2);
        let query = q(&[2, 0, 1, 0, 1]);
        assert_eq!(
            rlb_montecarlo(&s, &query, 500, 11).unwrap(),
            rlb_montecarlo(&s, &query, 500, 11).unwrap()
        );
    }

    #[test]
    fn montecarlo_fixture_checks() {
        let s = spec(MetricKind::Dcg, 2, 2);
        let mc = rlb_montecarlo(&s, &q(&[2, 1, 0]), 100_000, 1).unwrap();
        assert!((mc.estimate - 2.174574).abs() <= 4.0 * mc.stderr, "{mc:?}");
        let s = spec(MetricKind::Sp, 2, 1);
        let mc = rlb_montecarlo(&s, &q(&[1, 0]), 100_000, 1).unwrap();
        assert!((mc.estimate - 0.75).abs() <= 4.0 * mc.stderr, "{mc:?}");
    }

    #[test]
    fn compute_bounds_modes() {
        let s = spec(MetricKind::Sp, 2, 1);
        let query = q(&[1, 0]);
        let b = compute_bounds(&s, &query, BoundMode::Closed).unwrap();
        assert_eq!((b.iub, b.rlb, b.rlb_method), (1.0, 0.5, RlbMethod::Closed));
        let b = compute_bounds(&s, &query, BoundMode::exhaustive()).unwrap();
        assert_eq!(b.rlb, 0.75);
        let b = compute_bounds(
            &s,
            &query,
            BoundMode::MonteCarlo {
                samples: 50,
                seed: 1,
            },
        )
        .unwrap();
        assert!(b.mc_stderr.is_some());
        assert_eq!(b.rlb_method, RlbMethod::MonteCarlo);
    }

    #[test]
    fn expected_normalized_zero_iub() {
        let s = spec(MetricKind::Dcg, 2, 2);
        assert_eq!(expected_normalized(&s, &q(&[0, 0])).unwrap(), 0.0);
        let v = expected_normalized(&s, &q(&[1, 1])).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }
}
