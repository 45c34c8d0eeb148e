//! Python bindings. Queries are passed around as plain label lists and corpora
//! as opaque handles; everything else maps to builtin Python types.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ulbound::analysis::{self, MethodRanking, ScoreMatrix, SignificanceTest};
use ulbound::bounds::{self, BoundMode, DEFAULT_PREFIX_LIMIT};
use ulbound::dataset::{self, GradeScale, QueryDocs};
use ulbound::harness::{self, RankerConfig, RankerPolicy};
use ulbound::metrics::{self as m, MetricKind};
use ulbound::ulnorm::{self, Variant};

fn to_py(e: ulbound::Error) -> PyErr {
    match e {
        ulbound::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        ulbound::Error::File { ref source, .. }
            if matches!(**source, ulbound::Error::Io { .. }) =>
        {
            PyIOError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for ulbound::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

fn query(labels: &[u32]) -> PyResult<QueryDocs> {
    QueryDocs::from_labels("q", labels).py()
}

/// Parses "closed", "exhaustive" or "mc:N".
fn bound_mode(method: &str, limit: u64, seed: u64) -> PyResult<BoundMode> {
    match method {
        "closed" => Ok(BoundMode::Closed),
        "exhaustive" => Ok(BoundMode::Exhaustive { limit }),
        other => match other.strip_prefix("mc:").map(str::parse::<usize>) {
            Some(Ok(samples)) => Ok(BoundMode::MonteCarlo { samples, seed }),
            _ => Err(PyValueError::new_err(format!(
                "unknown bound method {other:?} (closed, exhaustive, mc:N)"
            ))),
        },
    }
}

/// A parsed LETOR corpus.
#[pyclass(frozen, module = "ulbound")]
struct Corpus {
    inner: dataset::Corpus,
}

#[pymethods]
impl Corpus {
    #[staticmethod]
    #[pyo3(signature = (path, g_max=None))]
    fn from_letor(path: &str, g_max: Option<u32>) -> PyResult<Self> {
        let scale = g_max.map(GradeScale::new).transpose().py()?;
        let file =
            std::fs::File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let inner = dataset::parse_letor(std::io::BufReader::new(file), scale)
            .map_err(|e| e.in_file(path))
            .py()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (text, g_max=None))]
    fn parse(text: &str, g_max: Option<u32>) -> PyResult<Self> {
        let scale = g_max.map(GradeScale::new).transpose().py()?;
        Ok(Self {
            inner: dataset::parse_letor_str(text, scale).py()?,
        })
    }

    #[getter]
    fn g_max(&self) -> u32 {
        self.inner.scale().g_max()
    }

    fn qids(&self) -> Vec<String> {
        self.inner.qids().map(str::to_string).collect()
    }

    fn labels(&self, qid: &str) -> PyResult<Vec<u32>> {
        self.inner
            .get(qid)
            .map(QueryDocs::labels)
            .ok_or_else(|| PyValueError::new_err(format!("unknown query {qid}")))
    }

    fn doc_ids(&self, qid: &str) -> PyResult<Vec<String>> {
        self.inner
            .get(qid)
            .map(|q| q.docs().iter().map(|d| d.doc_id.clone()).collect())
            .ok_or_else(|| PyValueError::new_err(format!("unknown query {qid}")))
    }

    fn subsample(&self, size: usize, seed: u64) -> Self {
        Self {
            inner: self.inner.subsample(size, seed),
        }
    }

    /// TREC run text for a reference ranker ("ideal", "worst", "random:SEED",
    /// "feature:ID").
    #[pyo3(signature = (policy, tag=None))]
    fn rank(&self, policy: &str, tag: Option<String>) -> PyResult<String> {
        let policy: RankerPolicy = parse(policy)?;
        let tag = tag.unwrap_or_else(|| policy.to_string().replace(':', "_"));
        let config = RankerConfig::new(policy, tag).py()?;
        harness::generate_run_text(&self.inner, &config).py()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Corpus(queries={}, g_max={})",
            self.inner.len(),
            self.g_max()
        )
    }
}

/// A metric at a cutoff, evaluated on lists of graded labels in ranked order.
#[pyclass(frozen, module = "ulbound")]
struct MetricSpec {
    inner: m::MetricSpec,
}

#[pymethods]
impl MetricSpec {
    #[new]
    #[pyo3(signature = (metric, k, g_max, log_base=2.0, threshold=0))]
    fn new(metric: &str, k: usize, g_max: u32, log_base: f64, threshold: u32) -> PyResult<Self> {
        let kind: MetricKind = parse(metric)?;
        let inner = m::MetricSpec::new(kind, k, GradeScale::new(g_max).py()?)
            .and_then(|s| s.with_log_base(log_base))
            .and_then(|s| s.with_threshold(threshold))
            .py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn metric(&self) -> &'static str {
        self.inner.kind.raw_name()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    fn evaluate(&self, ranked_labels: Vec<u32>) -> PyResult<f64> {
        for &g in &ranked_labels {
            self.inner.scale.check(g).py()?;
        }
        Ok(self.inner.evaluate_labels(&ranked_labels).value)
    }

    fn iub(&self, labels: Vec<u32>) -> PyResult<f64> {
        bounds::iub(&self.inner, &query(&labels)?).py()
    }

    /// Expected metric under a random permutation of `labels`.
    #[pyo3(signature = (labels, method="closed", limit=DEFAULT_PREFIX_LIMIT, seed=0))]
    fn rlb(&self, labels: Vec<u32>, method: &str, limit: u64, seed: u64) -> PyResult<f64> {
        let mode = bound_mode(method, limit, seed)?;
        Ok(bounds::compute_bounds(&self.inner, &query(&labels)?, mode)
            .py()?
            .rlb)
    }

    /// Monte-Carlo estimate and its standard error.
    #[pyo3(signature = (labels, samples, seed=0))]
    fn rlb_montecarlo(&self, labels: Vec<u32>, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
        let e = bounds::rlb_montecarlo(&self.inner, &query(&labels)?, samples, seed).py()?;
        Ok((e.estimate, e.stderr))
    }

    fn __repr__(&self) -> String {
        format!(
            "MetricSpec({}@{})",
            self.inner.kind.raw_name(),
            self.inner.k
        )
    }
}

/// Returns `(value, degenerate)`.
#[pyfunction]
fn normalize(variant: &str, a: f64, iub: f64, rlb: f64) -> PyResult<(f64, bool)> {
    let variant: Variant = parse(variant)?;
    let s = ulnorm::normalize(variant, a, iub, rlb).py()?;
    Ok((s.value, s.degenerate))
}

fn method_ranking(scores: BTreeMap<String, f64>) -> MethodRanking {
    MethodRanking::from_scores(scores.into_iter().collect())
}

/// Kendall's tau-b between the method orderings induced by two score maps.
#[pyfunction]
fn kendall_tau(a: BTreeMap<String, f64>, b: BTreeMap<String, f64>) -> PyResult<f64> {
    analysis::kendall_tau(&method_ranking(a), &method_ranking(b)).py()
}

#[pyfunction]
fn swap_rate(a: BTreeMap<String, f64>, b: BTreeMap<String, f64>) -> PyResult<f64> {
    analysis::swap_rate(&method_ranking(a), &method_ranking(b)).py()
}

/// Percentage absolute difference over all method pairs; returns
/// `(value, degenerate_pairs)`.
#[pyfunction]
fn pad(scores: BTreeMap<String, f64>) -> PyResult<(f64, usize)> {
    let scores: Vec<(String, f64)> = scores.into_iter().collect();
    let r = analysis::pad(&scores).py()?;
    Ok((r.value, r.degenerate_pairs))
}

#[pyfunction]
fn paired_ttest(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    analysis::paired_ttest(&x, &y).py()
}

#[pyfunction]
#[pyo3(signature = (x, y, b=analysis::DEFAULT_BOOTSTRAP_B, seed=0))]
fn bootstrap_test(x: Vec<f64>, y: Vec<f64>, b: usize, seed: u64) -> PyResult<f64> {
    analysis::bootstrap_test(&x, &y, b, seed).py()
}

/// Scores TREC runs (name to run text) against a corpus. Returns
/// `{method: {qid: [score per cutoff]}}`.
#[pyfunction]
#[pyo3(signature = (corpus, runs, metric, ks, variant="v2", bounds="closed", threshold=0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn evaluate_runs(
    corpus: &Corpus,
    runs: BTreeMap<String, String>,
    metric: &str,
    ks: Vec<usize>,
    variant: &str,
    bounds: &str,
    threshold: u32,
    seed: u64,
) -> PyResult<BTreeMap<String, BTreeMap<String, Vec<f64>>>> {
    let corpus = &corpus.inner;
    let kind: MetricKind = parse(metric)?;
    let variant: Variant = parse(variant)?;
    let mode = bound_mode(bounds, DEFAULT_PREFIX_LIMIT, seed)?;
    let spec = m::MetricSpec::new(kind, 1, corpus.scale())
        .and_then(|s| s.with_threshold(threshold))
        .py()?;
    let resolved = runs
        .iter()
        .map(|(name, text)| {
            let entries = dataset::parse_trec_run_str(text)?;
            Ok((name.clone(), harness::resolve_run(corpus, &entries)?))
        })
        .collect::<ulbound::Result<Vec<_>>>()
        .py()?;
    let matrix: ScoreMatrix =
        analysis::build_score_matrix(corpus, &resolved, &spec, &ks, variant, mode).py()?;
    let mut out = BTreeMap::new();
    for (mi, method) in matrix.methods().iter().enumerate() {
        let per_query = matrix
            .qids()
            .iter()
            .enumerate()
            .map(|(qi, qid)| {
                let scores = (0..ks.len()).map(|ki| matrix.get(mi, qi, ki)).collect();
                (qid.clone(), scores)
            })
            .collect();
        out.insert(method.clone(), per_query);
    }
    Ok(out)
}

/// p-values for every (method pair, cutoff) of a score table shaped
/// `{method: {qid: [score per cutoff]}}` as returned by `evaluate_runs`.
#[pyfunction]
#[pyo3(signature = (scores, ks, test="ttest", b=analysis::DEFAULT_BOOTSTRAP_B, seed=0))]
fn pairwise_pvalues(
    scores: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    ks: Vec<usize>,
    test: &str,
    b: usize,
    seed: u64,
) -> PyResult<Vec<(String, String, usize, f64)>> {
    let test = match test {
        "ttest" => SignificanceTest::TTest,
        "bootstrap" => SignificanceTest::Bootstrap { b, seed },
        other => return Err(PyValueError::new_err(format!("unknown test {other:?}"))),
    };
    let methods: Vec<String> = scores.keys().cloned().collect();
    let qids: Vec<String> = scores
        .values()
        .next()
        .map(|q| q.keys().cloned().collect())
        .unwrap_or_default();
    let values = scores
        .into_values()
        .map(|per_query| {
            if per_query.len() != qids.len() || !per_query.keys().eq(qids.iter()) {
                return Err(PyValueError::new_err(
                    "every method must cover the same queries",
                ));
            }
            Ok(per_query.into_values().collect())
        })
        .collect::<PyResult<_>>()?;
    let matrix =
        ScoreMatrix::from_values(MetricKind::Dcg, Variant::None, methods, qids, ks, values).py()?;
    Ok(analysis::pairwise_pvalues(&matrix, test)
        .py()?
        .into_iter()
        .map(|t| (t.method_a, t.method_b, t.k, t.p_value))
        .collect())
}

#[pymodule]
#[pyo3(name = "ulbound")]
fn ulbound_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<MetricSpec>()?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(swap_rate, m)?)?;
    m.add_function(wrap_pyfunction!(pad, m)?)?;
    m.add_function(wrap_pyfunction!(paired_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_test, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_runs, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_pvalues, m)?)?;
    m.add("DEFAULT_PREFIX_LIMIT", DEFAULT_PREFIX_LIMIT)?;
    Ok(())
}
