//! Score matrices and the comparative statistics computed over them.

mod agreement;
mod queries;
mod significance;

pub use agreement::{kendall_tau, pad, swap_rate, MethodRanking, PadResult};
pub use queries::{categorize_queries, query_gaps, QueryGapTable, QuerySets};
pub use significance::{
    bootstrap_test, count_conflicts, count_significant_pairs, paired_ttest, pairwise_pvalues,
    PairTest, SigCount, SignificanceTest, DEFAULT_BOOTSTRAP_B,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{compute_bounds, BoundMode};
use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::metrics::{MetricKind, MetricSpec};
use crate::ranking::{ideal_ranking, Ranking};
use crate::ulnorm::{normalize, Variant};

/// Rankings of one method, keyed by qid.
pub type RunRankings = BTreeMap<String, Ranking>;

/// Per-query metric values indexed by (method, query, cutoff).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub metric: MetricKind,
    pub variant: Variant,
    methods: Vec<String>,
    qids: Vec<String>,
    ks: Vec<usize>,
    values: Vec<f64>,
    degenerate: Vec<bool>,
    /// Queries whose lower bound exceeded the upper bound and was clamped.
    pub clamped_bounds: usize,
}

impl ScoreMatrix {
    /// Builds a matrix from `values[method][query][k]`.
    pub fn from_values(
        metric: MetricKind,
        variant: Variant,
        methods: Vec<String>,
        qids: Vec<String>,
        ks: Vec<usize>,
        values: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let mismatch = || {
            Error::DimensionMismatch(format!(
                "expected {} x {} x {} values",
                methods.len(),
                qids.len(),
                ks.len()
            ))
        };
        if values.len() != methods.len() {
            return Err(mismatch());
        }
        let mut flat = Vec::with_capacity(methods.len() * qids.len() * ks.len());
        for per_method in &values {
            if per_method.len() != qids.len() {
                return Err(mismatch());
            }
            for per_query in per_method {
                if per_query.len() != ks.len() {
                    return Err(mismatch());
                }
                flat.extend_from_slice(per_query);
            }
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "score matrix cells must be finite".into(),
            ));
        }
        let degenerate = vec![false; flat.len()];
        Ok(Self {
            metric,
            variant,
            methods,
            qids,
            ks,
            values: flat,
            degenerate,
            clamped_bounds: 0,
        })
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn qids(&self) -> &[String] {
        &self.qids
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }

    fn index(&self, m: usize, q: usize, k: usize) -> usize {
        (m * self.qids.len() + q) * self.ks.len() + k
    }

    pub fn get(&self, method: usize, query: usize, k: usize) -> f64 {
        self.values[self.index(method, query, k)]
    }

    pub fn is_degenerate(&self, method: usize, query: usize, k: usize) -> bool {
        self.degenerate[self.index(method, query, k)]
    }

    /// Per-query scores of one method at one cutoff, in qid order.
    pub fn column(&self, method: usize, k: usize) -> Vec<f64> {
        (0..self.qids.len())
            .map(|q| self.get(method, q, k))
            .collect()
    }

    /// Mean over queries at one cutoff.
    pub fn mean_at(&self, method: usize, k: usize) -> f64 {
        self.column(method, k).iter().sum::<f64>() / self.qids.len().max(1) as f64
    }

    /// Mean over queries and all cutoffs.
    pub fn method_average(&self, method: usize) -> f64 {
        let ks = self.ks.len();
        (0..ks).map(|k| self.mean_at(method, k)).sum::<f64>() / ks.max(1) as f64
    }

    pub fn degenerate_count(&self, method: usize, k: usize) -> usize {
        (0..self.qids.len())
            .filter(|&q| self.is_degenerate(method, q, k))
            .count()
    }

    /// Methods ordered best-first by their average score.
    pub fn method_ranking(&self) -> MethodRanking {
        MethodRanking::from_scores(
            self.methods
                .iter()
                .enumerate()
                .map(|(m, name)| (name.clone(), self.method_average(m)))
                .collect(),
        )
    }

    /// Sub-matrix over the listed queries, kept in this matrix's qid order.
    pub fn restrict<'a>(&self, keep: impl IntoIterator<Item = &'a str>) -> Result<ScoreMatrix> {
        let wanted: std::collections::BTreeSet<&str> = keep.into_iter().collect();
        for q in &wanted {
            if !self.qids.iter().any(|x| x == q) {
                return Err(Error::MissingQueries(vec![q.to_string()]));
            }
        }
        let rows: Vec<usize> = (0..self.qids.len())
            .filter(|&q| wanted.contains(self.qids[q].as_str()))
            .collect();
        let mut values = Vec::new();
        let mut degenerate = Vec::new();
        for m in 0..self.methods.len() {
            for &q in &rows {
                for k in 0..self.ks.len() {
                    values.push(self.get(m, q, k));
                    degenerate.push(self.is_degenerate(m, q, k));
                }
            }
        }
        Ok(ScoreMatrix {
            metric: self.metric,
            variant: self.variant,
            methods: self.methods.clone(),
            qids: rows.iter().map(|&q| self.qids[q].clone()).collect(),
            ks: self.ks.clone(),
            values,
            degenerate,
            clamped_bounds: 0,
        })
    }

    pub(crate) fn same_shape(&self, other: &ScoreMatrix) -> Result<()> {
        if self.methods != other.methods || self.qids != other.qids || self.ks != other.ks {
            return Err(Error::DimensionMismatch(
                "matrices differ in methods, queries or cutoffs".into(),
            ));
        }
        Ok(())
    }
}

struct QueryCells {
    /// `[variant][method][k]`
    values: Vec<Vec<Vec<f64>>>,
    degenerate: Vec<Vec<Vec<bool>>>,
    clamped: bool,
}

/// Evaluates every method on every corpus query at every cutoff and normalizes
/// the values once per requested variant. Bounds are computed once per
/// (query, cutoff) and shared across variants. Per-query work runs on the
/// current rayon pool; results are assembled in qid order.
pub fn build_score_matrices(
    corpus: &Corpus,
    runs: &[(String, RunRankings)],
    spec: &MetricSpec,
    ks: &[usize],
    variants: &[Variant],
    bound_mode: BoundMode,
) -> Result<Vec<ScoreMatrix>> {
    if ks.is_empty() {
        return Err(Error::InvalidArgument("cutoff list is empty".into()));
    }
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no runs to evaluate".into()));
    }
    for (name, run) in runs {
        let missing: Vec<String> = corpus
            .qids()
            .filter(|q| !run.contains_key(*q))
            .map(|q| format!("{name}:{q}"))
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingQueries(missing));
        }
    }
    let specs: Vec<MetricSpec> = ks.iter().map(|&k| spec.with_k(k)).collect::<Result<_>>()?;
    let queries: Vec<_> = corpus.queries().collect();

    let cells: Vec<QueryCells> = queries
        .par_iter()
        .map(|q| {
            let mut clamped = false;
            let bounds: Vec<(f64, f64)> = specs
                .iter()
                .map(|s| {
                    let b = compute_bounds(s, q, bound_mode)?;
                    if b.rlb > b.iub {
                        clamped = true;
                    }
                    Ok((b.iub, b.rlb.min(b.iub)))
                })
                .collect::<Result<_>>()?;
            let ranked: Vec<Vec<u32>> = runs
                .iter()
                .map(|(_, run)| run[q.qid()].ranked_labels(q))
                .collect::<Result<_>>()?;
            let mut values = Vec::with_capacity(variants.len());
            let mut degenerate = Vec::with_capacity(variants.len());
            for &variant in variants {
                let mut vm = Vec::with_capacity(runs.len());
                let mut dm = Vec::with_capacity(runs.len());
                for labels in &ranked {
                    let mut vk = Vec::with_capacity(ks.len());
                    let mut dk = Vec::with_capacity(ks.len());
                    for (s, &(iub, rlb)) in specs.iter().zip(&bounds) {
                        let raw = s.evaluate_labels(labels).value;
                        let score = if variant == Variant::None {
                            // the traditional figure for the SP family is AP
                            let v = if s.kind == MetricKind::Sp {
                                raw / s.k as f64
                            } else {
                                raw
                            };
                            crate::ulnorm::NormalizedScore {
                                value: v,
                                variant,
                                degenerate: false,
                            }
                        } else {
                            normalize(variant, raw, iub, rlb).map_err(|e| {
                                Error::InvalidArgument(format!("query {}: {e}", q.qid()))
                            })?
                        };
                        vk.push(score.value);
                        dk.push(score.degenerate);
                    }
                    vm.push(vk);
                    dm.push(dk);
                }
                values.push(vm);
                degenerate.push(dm);
            }
            Ok(QueryCells {
                values,
                degenerate,
                clamped,
            })
        })
        .collect::<Result<_>>()?;

    let methods: Vec<String> = runs.iter().map(|(n, _)| n.clone()).collect();
    let qids: Vec<String> = queries.iter().map(|q| q.qid().to_string()).collect();
    let clamped_bounds = cells.iter().filter(|c| c.clamped).count();
    let mut out = Vec::with_capacity(variants.len());
    for (vi, &variant) in variants.iter().enumerate() {
        let mut values = Vec::with_capacity(methods.len() * qids.len() * ks.len());
        let mut degenerate = Vec::with_capacity(values.capacity());
        for m in 0..methods.len() {
            for c in &cells {
                values.extend_from_slice(&c.values[vi][m]);
                degenerate.extend_from_slice(&c.degenerate[vi][m]);
            }
        }
        out.push(ScoreMatrix {
            metric: spec.kind,
            variant,
            methods: methods.clone(),
            qids: qids.clone(),
            ks: ks.to_vec(),
            values,
            degenerate,
            clamped_bounds,
        });
    }
    Ok(out)
}

/// Single-variant convenience wrapper around [`build_score_matrices`].
pub fn build_score_matrix(
    corpus: &Corpus,
    runs: &[(String, RunRankings)],
    spec: &MetricSpec,
    ks: &[usize],
    variant: Variant,
    bound_mode: BoundMode,
) -> Result<ScoreMatrix> {
    let mut v = build_score_matrices(corpus, runs, spec, ks, &[variant], bound_mode)?;
    Ok(v.remove(0))
}

/// Ideal-ranking run for a corpus; handy as a reference method.
pub fn ideal_run(corpus: &Corpus) -> RunRankings {
    corpus
        .queries()
        .map(|q| (q.qid().to_string(), ideal_ranking(q)))
        .collect()
}
