//! LETOR corpora and TREC run files.
//!
//! A LETOR row looks like
//!
//! ```text
//! 2 qid:10 1:0.5 2:0.3 #docid = GX001
//! ```
//!
//! Rows are grouped by query id, keeping their file order. Documents without a
//! `docid = ...` comment get the synthetic id `<qid>:<row-index-within-query>`.

use std::collections::BTreeMap;
use std::io::BufRead;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The label set `{0, ..., g_max}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeScale {
    g_max: u32,
}

impl GradeScale {
    pub fn new(g_max: u32) -> Result<Self> {
        if g_max == 0 {
            return Err(Error::InvalidArgument("g_max must be at least 1".into()));
        }
        Ok(Self { g_max })
    }

    pub fn g_max(self) -> u32 {
        self.g_max
    }

    pub fn contains(self, label: u32) -> bool {
        label <= self.g_max
    }

    pub fn check(self, label: u32) -> Result<()> {
        if self.contains(label) {
            Ok(())
        } else {
            Err(Error::LabelOutOfScale {
                label,
                g_max: self.g_max,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocEntry {
    pub label: u32,
    pub doc_id: String,
    /// Sparse `(feature_id, value)` pairs with strictly increasing ids.
    pub features: Vec<(u32, f64)>,
}

impl DocEntry {
    pub fn new(label: u32, doc_id: impl Into<String>) -> Self {
        Self {
            label,
            doc_id: doc_id.into(),
            features: Vec::new(),
        }
    }

    /// Value of a feature, 0 when absent.
    pub fn feature(&self, id: u32) -> f64 {
        self.features
            .binary_search_by_key(&id, |&(fid, _)| fid)
            .map(|i| self.features[i].1)
            .unwrap_or(0.0)
    }
}

/// The documents judged for one query, in dataset row order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryDocs {
    qid: String,
    docs: Vec<DocEntry>,
}

impl QueryDocs {
    pub fn new(qid: impl Into<String>, docs: Vec<DocEntry>) -> Result<Self> {
        let qid = qid.into();
        if qid.is_empty() {
            return Err(Error::InvalidArgument("query id must be non-empty".into()));
        }
        if docs.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "query {qid} has no documents"
            )));
        }
        Ok(Self { qid, docs })
    }

    /// Builds a query from bare labels with synthetic document ids.
    pub fn from_labels(qid: impl Into<String>, labels: &[u32]) -> Result<Self> {
        let qid = qid.into();
        let docs = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| DocEntry::new(l, format!("{qid}:{i}")))
            .collect();
        Self::new(qid, docs)
    }

    pub fn qid(&self) -> &str {
        &self.qid
    }

    pub fn docs(&self) -> &[DocEntry] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.docs.iter().map(|d| d.label).collect()
    }

    pub fn max_label(&self) -> u32 {
        self.docs.iter().map(|d| d.label).max().unwrap_or(0)
    }

    /// Index of the document with the given id. Errors if the id is unknown or
    /// occurs more than once in this query.
    pub fn position_of(&self, doc_id: &str) -> Result<usize> {
        let mut found = None;
        for (i, d) in self.docs.iter().enumerate() {
            if d.doc_id == doc_id {
                if found.is_some() {
                    return Err(Error::AmbiguousDocument {
                        qid: self.qid.clone(),
                        doc_id: doc_id.to_string(),
                    });
                }
                found = Some(i);
            }
        }
        found.ok_or_else(|| Error::UnknownDocument {
            qid: self.qid.clone(),
            doc_id: doc_id.to_string(),
        })
    }
}

/// Immutable collection of judged queries, iterated in ascending qid order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    scale: GradeScale,
    queries: BTreeMap<String, QueryDocs>,
}

impl Corpus {
    pub fn new(scale: GradeScale, queries: Vec<QueryDocs>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for q in queries {
            for d in q.docs() {
                scale.check(d.label)?;
            }
            if map.contains_key(q.qid()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate query {}",
                    q.qid()
                )));
            }
            map.insert(q.qid.clone(), q);
        }
        Ok(Self {
            scale,
            queries: map,
        })
    }

    pub fn scale(&self) -> GradeScale {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn get(&self, qid: &str) -> Option<&QueryDocs> {
        self.queries.get(qid)
    }

    pub fn queries(&self) -> impl ExactSizeIterator<Item = &QueryDocs> {
        self.queries.values()
    }

    pub fn qids(&self) -> impl ExactSizeIterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    /// Keeps `size` queries chosen uniformly at random by a seeded generator.
    /// Asking for at least as many queries as exist returns a copy.
    pub fn subsample(&self, size: usize, seed: u64) -> Corpus {
        if size >= self.queries.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, self.queries.len(), size).into_vec();
        picked.sort_unstable();
        let all: Vec<&QueryDocs> = self.queries.values().collect();
        let queries = picked
            .into_iter()
            .map(|i| (all[i].qid.clone(), all[i].clone()))
            .collect();
        Corpus {
            scale: self.scale,
            queries,
        }
    }
}

/// Per-grade document counts of one query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelHistogram {
    pub n: usize,
    pub counts: Vec<usize>,
}

impl LabelHistogram {
    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidArgument(
                "histogram needs at least grades 0 and 1".into(),
            ));
        }
        Ok(Self {
            n: counts.iter().sum(),
            counts,
        })
    }

    pub fn g_max(&self) -> u32 {
        (self.counts.len() - 1) as u32
    }

    /// Empirical `Pr(R = j)`.
    pub fn probability(&self, grade: u32) -> f64 {
        self.counts[grade as usize] as f64 / self.n as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub n_pos: usize,
    pub n_neg: usize,
}

impl BinaryCounts {
    pub fn n(self) -> usize {
        self.n_pos + self.n_neg
    }

    /// Fraction of relevant documents, 0 for an empty collection.
    pub fn p_rel(self) -> f64 {
        if self.n() == 0 {
            0.0
        } else {
            self.n_pos as f64 / self.n() as f64
        }
    }
}

pub fn histogram(q: &QueryDocs, scale: GradeScale) -> Result<LabelHistogram> {
    let mut counts = vec![0usize; scale.g_max() as usize + 1];
    for d in q.docs() {
        scale.check(d.label)?;
        counts[d.label as usize] += 1;
    }
    Ok(LabelHistogram { n: q.len(), counts })
}

/// Splits a histogram into relevant (`label > threshold`) and non-relevant counts.
pub fn binarize(h: &LabelHistogram, threshold: u32) -> Result<BinaryCounts> {
    if threshold > h.g_max() {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} exceeds g_max {}",
            h.g_max()
        )));
    }
    let t = threshold as usize;
    let n_neg = h.counts[..=t].iter().sum();
    let n_pos = h.counts[t + 1..].iter().sum();
    Ok(BinaryCounts { n_pos, n_neg })
}

struct LetorRow {
    label: u32,
    qid: String,
    features: Vec<(u32, f64)>,
    doc_id: Option<String>,
}

fn parse_letor_line(line: &str, lineno: usize) -> Result<Option<LetorRow>> {
    let (body, comment) = match line.find('#') {
        Some(i) => (&line[..i], Some(&line[i + 1..])),
        None => (line, None),
    };
    let mut tokens = body.split_whitespace();
    let Some(label_tok) = tokens.next() else {
        if comment.is_some() {
            return Err(Error::parse(lineno, "missing label"));
        }
        return Ok(None);
    };
    if !label_tok.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::parse(lineno, format!("invalid label {label_tok:?}")));
    }
    let label: u32 = label_tok
        .parse()
        .map_err(|_| Error::parse(lineno, format!("invalid label {label_tok:?}")))?;
    let qid = match tokens.next().and_then(|t| t.strip_prefix("qid:")) {
        Some(q) if !q.is_empty() => q.to_string(),
        _ => return Err(Error::parse(lineno, "missing qid")),
    };
    let mut features: Vec<(u32, f64)> = Vec::new();
    for tok in tokens {
        let bad = || Error::parse(lineno, format!("invalid feature pair {tok:?}"));
        let (fid, val) = tok.split_once(':').ok_or_else(bad)?;
        if !fid.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let fid: u32 = fid.parse().map_err(|_| bad())?;
        let val: f64 = val.parse().map_err(|_| bad())?;
        if fid == 0 {
            return Err(Error::parse(lineno, "feature ids must be positive"));
        }
        if features.last().is_some_and(|&(prev, _)| prev >= fid) {
            return Err(Error::parse(
                lineno,
                format!("feature id {fid} is not strictly increasing"),
            ));
        }
        features.push((fid, val));
    }
    Ok(Some(LetorRow {
        label,
        qid,
        features,
        doc_id: comment.and_then(docid_from_comment),
    }))
}

/// Extracts `<id>` from a comment containing `docid = <id>`.
fn docid_from_comment(comment: &str) -> Option<String> {
    let start = comment.find("docid")? + "docid".len();
    let rest = comment[start..]
        .trim_start()
        .strip_prefix('=')?
        .trim_start();
    let id: String = rest.chars().take_while(|c| !c.is_whitespace()).collect();
    (!id.is_empty()).then_some(id)
}

/// Parses a LETOR stream. With `scale` set, labels above its maximum are errors;
/// otherwise the scale is the largest observed label (at least 1).
pub fn parse_letor<R: BufRead>(reader: R, scale: Option<GradeScale>) -> Result<Corpus> {
    let mut groups: BTreeMap<String, Vec<DocEntry>> = BTreeMap::new();
    let mut max_label = 0;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let Some(row) = parse_letor_line(&line, lineno)? else {
            continue;
        };
        if let Some(s) = scale {
            if !s.contains(row.label) {
                return Err(Error::parse(
                    lineno,
                    format!("label {} exceeds g_max {}", row.label, s.g_max()),
                ));
            }
        }
        max_label = max_label.max(row.label);
        let docs = groups.entry(row.qid.clone()).or_default();
        let doc_id = row
            .doc_id
            .unwrap_or_else(|| format!("{}:{}", row.qid, docs.len()));
        docs.push(DocEntry {
            label: row.label,
            doc_id,
            features: row.features,
        });
    }
    let scale = match scale {
        Some(s) => s,
        None => GradeScale::new(max_label.max(1))?,
    };
    let queries = groups
        .into_iter()
        .map(|(qid, docs)| (qid.clone(), QueryDocs { qid, docs }))
        .collect();
    Ok(Corpus { scale, queries })
}

pub fn parse_letor_str(text: &str, scale: Option<GradeScale>) -> Result<Corpus> {
    parse_letor(text.as_bytes(), scale)
}

/// Serializes a corpus back to LETOR rows, one per document, in qid order.
pub fn write_letor<W: std::io::Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    for q in corpus.queries() {
        for d in q.docs() {
            write!(out, "{} qid:{}", d.label, q.qid())?;
            for (fid, v) in &d.features {
                write!(out, " {fid}:{v}")?;
            }
            writeln!(out, " #docid = {}", d.doc_id)?;
        }
    }
    Ok(())
}

/// `(doc_id, score)` pairs per query, in file order.
pub type RunEntries = BTreeMap<String, Vec<(String, f64)>>;

/// Parses TREC run lines `QID Q0 DOCID RANK SCORE TAG`.
pub fn parse_trec_run<R: BufRead>(reader: R) -> Result<RunEntries> {
    let mut run = RunEntries::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(Error::parse(
                lineno,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        if fields[1] != "Q0" {
            return Err(Error::parse(lineno, "second field must be Q0"));
        }
        fields[3]
            .parse::<u64>()
            .map_err(|_| Error::parse(lineno, format!("invalid rank {:?}", fields[3])))?;
        let score: f64 = fields[4]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid score {:?}", fields[4])))?;
        if !score.is_finite() {
            return Err(Error::parse(lineno, "score must be finite"));
        }
        run.entry(fields[0].to_string())
            .or_default()
            .push((fields[2].to_string(), score));
    }
    Ok(run)
}

pub fn parse_trec_run_str(text: &str) -> Result<RunEntries> {
    parse_trec_run(text.as_bytes())
}

/// Writes run entries in file order; the rank column is the 1-based position.
pub fn write_run_entries<W: std::io::Write>(
    run: &RunEntries,
    tag: &str,
    mut out: W,
) -> std::io::Result<()> {
    for (qid, entries) in run {
        for (i, (doc, score)) in entries.iter().enumerate() {
            writeln!(out, "{qid} Q0 {doc} {} {score} {tag}", i + 1)?;
        }
    }
    Ok(())
}
