//! DCG / nDCG, sum-of-precision / AP, and ERR / nERR at a cutoff.
//!
//! Sums are truncated at `min(k, n)`; the effective cutoff is reported in
//! [`MetricValue::effective_k`]. AP divides by `k` even when `n < k`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{GradeScale, QueryDocs};
use crate::error::{Error, Result};
use crate::ranking::{ideal_ranking, Ranking};

/// The three metric families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    Dcg,
    Sp,
    Err,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Dcg, MetricKind::Sp, MetricKind::Err];

    /// Raw metric name.
    pub fn raw_name(self) -> &'static str {
        match self {
            MetricKind::Dcg => "dcg",
            MetricKind::Sp => "sp",
            MetricKind::Err => "err",
        }
    }

    /// Name of the evaluation family (`ndcg`, `map`, `err`).
    pub fn family_name(self) -> &'static str {
        match self {
            MetricKind::Dcg => "ndcg",
            MetricKind::Sp => "map",
            MetricKind::Err => "err",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.family_name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ndcg" | "dcg" => Ok(MetricKind::Dcg),
            "map" | "ap" | "sp" => Ok(MetricKind::Sp),
            "err" | "nerr" => Ok(MetricKind::Err),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

/// Grade to stopping-probability map used by ERR.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrGainMap {
    /// `(2^g - 1) / 2^g_max`
    #[default]
    Standard,
    /// `R = g`; only meaningful for binary scales.
    LabelAsValue,
}

impl ErrGainMap {
    pub fn probability(self, grade: u32, g_max: u32) -> f64 {
        match self {
            ErrGainMap::Standard => err_probability(grade, g_max),
            ErrGainMap::LabelAsValue => grade as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub k: usize,
    pub log_base: f64,
    pub threshold: u32,
    pub scale: GradeScale,
    pub err_map: ErrGainMap,
}

impl MetricSpec {
    pub fn new(kind: MetricKind, k: usize, scale: GradeScale) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("cutoff k must be at least 1".into()));
        }
        Ok(Self {
            kind,
            k,
            log_base: 2.0,
            threshold: 0,
            scale,
            err_map: ErrGainMap::Standard,
        })
    }

    pub fn with_log_base(mut self, b: f64) -> Result<Self> {
        if !(b > 1.0 && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "log base must exceed 1, got {b}"
            )));
        }
        self.log_base = b;
        Ok(self)
    }

    pub fn with_threshold(mut self, threshold: u32) -> Result<Self> {
        if threshold > self.scale.g_max() {
            return Err(Error::InvalidArgument(format!(
                "threshold {threshold} exceeds g_max {}",
                self.scale.g_max()
            )));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn with_err_map(mut self, map: ErrGainMap) -> Result<Self> {
        if map == ErrGainMap::LabelAsValue && self.scale.g_max() != 1 {
            return Err(Error::InvalidArgument(
                "label-as-value ERR map requires g_max = 1".into(),
            ));
        }
        self.err_map = map;
        Ok(self)
    }

    pub fn with_k(mut self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("cutoff k must be at least 1".into()));
        }
        self.k = k;
        Ok(self)
    }

    /// Stopping probability of a grade under this spec's ERR map.
    pub fn err_prob(&self, grade: u32) -> f64 {
        self.err_map.probability(grade, self.scale.g_max())
    }

    /// Raw metric of a ranked label sequence. Only the first `min(k, n)` labels
    /// are read.
    pub fn evaluate_labels(&self, ranked: &[u32]) -> MetricValue {
        match self.kind {
            MetricKind::Dcg => dcg(ranked, self.k, self.log_base),
            MetricKind::Sp => sp(ranked, self.k, self.threshold),
            MetricKind::Err => err_with(ranked, self.k, |g| self.err_prob(g)),
        }
    }

    pub fn evaluate(&self, ranking: &Ranking, q: &QueryDocs) -> Result<MetricValue> {
        Ok(self.evaluate_labels(&ranking.ranked_labels(q)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub effective_k: usize,
}

/// `1 / log_b(i + 1)` for the 1-based position `i`.
pub fn discount(position: usize, log_base: f64) -> f64 {
    log_base.ln() / ((position + 1) as f64).ln()
}

pub fn gain(grade: u32) -> f64 {
    (2f64).powi(grade as i32) - 1.0
}

/// DCG of a ranked label sequence.
pub fn dcg(ranked: &[u32], k: usize, log_base: f64) -> MetricValue {
    let m = k.min(ranked.len());
    let value = ranked[..m]
        .iter()
        .enumerate()
        .map(|(i, &g)| gain(g) * discount(i + 1, log_base))
        .sum();
    MetricValue {
        value,
        effective_k: m,
    }
}

/// Sum of `Prec(i)` over relevant positions `i <= min(k, n)`.
pub fn sp(ranked: &[u32], k: usize, threshold: u32) -> MetricValue {
    let m = k.min(ranked.len());
    let mut hits = 0usize;
    let mut value = 0.0;
    for (i, &g) in ranked[..m].iter().enumerate() {
        if g > threshold {
            hits += 1;
            value += hits as f64 / (i + 1) as f64;
        }
    }
    MetricValue {
        value,
        effective_k: m,
    }
}

/// Cascade ERR with a caller-supplied grade to probability map.
pub fn err_with(ranked: &[u32], k: usize, prob: impl Fn(u32) -> f64) -> MetricValue {
    let m = k.min(ranked.len());
    let mut not_stopped = 1.0;
    let mut value = 0.0;
    for (i, &g) in ranked[..m].iter().enumerate() {
        let r = prob(g);
        value += not_stopped * r / (i + 1) as f64;
        not_stopped *= 1.0 - r;
    }
    MetricValue {
        value,
        effective_k: m,
    }
}

/// `(2^g - 1) / 2^g_max`.
pub fn err_probability(grade: u32, g_max: u32) -> f64 {
    gain(grade) / (2f64).powi(g_max as i32)
}

pub fn dcg_at_k(ranking: &Ranking, q: &QueryDocs, k: usize, log_base: f64) -> Result<MetricValue> {
    Ok(dcg(&ranking.ranked_labels(q)?, k, log_base))
}

/// DCG divided by the ideal DCG; 0 when the query has no gain at all.
pub fn ndcg_at_k(ranking: &Ranking, q: &QueryDocs, k: usize, log_base: f64) -> Result<MetricValue> {
    let actual = dcg_at_k(ranking, q, k, log_base)?;
    let ideal = dcg_at_k(&ideal_ranking(q), q, k, log_base)?;
    Ok(ratio(actual, ideal.value))
}

pub fn sp_at_k(ranking: &Ranking, q: &QueryDocs, k: usize, threshold: u32) -> Result<MetricValue> {
    Ok(sp(&ranking.ranked_labels(q)?, k, threshold))
}

/// `sp_at_k / k`.
pub fn ap_at_k(ranking: &Ranking, q: &QueryDocs, k: usize, threshold: u32) -> Result<MetricValue> {
    let s = sp_at_k(ranking, q, k, threshold)?;
    Ok(MetricValue {
        value: s.value / k as f64,
        effective_k: s.effective_k,
    })
}

pub fn err_at_k(
    ranking: &Ranking,
    q: &QueryDocs,
    k: usize,
    scale: GradeScale,
) -> Result<MetricValue> {
    let g_max = scale.g_max();
    Ok(err_with(&ranking.ranked_labels(q)?, k, |g| {
        err_probability(g, g_max)
    }))
}

pub fn nerr_at_k(
    ranking: &Ranking,
    q: &QueryDocs,
    k: usize,
    scale: GradeScale,
) -> Result<MetricValue> {
    let actual = err_at_k(ranking, q, k, scale)?;
    let ideal = err_at_k(&ideal_ranking(q), q, k, scale)?;
    Ok(ratio(actual, ideal.value))
}

fn ratio(actual: MetricValue, ideal: f64) -> MetricValue {
    MetricValue {
        value: if ideal > 0.0 {
            actual.value / ideal
        } else {
            0.0
        },
        effective_k: actual.effective_k,
    }
}

/// Arithmetic mean over queries.
pub fn aggregate_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot average an empty list".into(),
        ));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean that optionally drops values flagged degenerate.
pub fn aggregate_mean_excluding(values: &[f64], degenerate: &[bool], exclude: bool) -> Result<f64> {
    if values.len() != degenerate.len() {
        return Err(Error::DimensionMismatch(
            "values and degenerate flags differ in length".into(),
        ));
    }
    if !exclude {
        return aggregate_mean(values);
    }
    let kept: Vec<f64> = values
        .iter()
        .zip(degenerate)
        .filter(|(_, &d)| !d)
        .map(|(&v, _)| v)
        .collect();
    aggregate_mean(&kept)
}
