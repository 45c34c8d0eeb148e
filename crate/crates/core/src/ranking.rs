//! Per-query rankings: permutations of a query's document indices.
//!
//! Ties are always broken by ascending original document index.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Corpus, QueryDocs};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    qid: String,
    order: Vec<usize>,
}

impl Ranking {
    /// Validates that `order` is a permutation of `0..n`.
    pub fn new(qid: impl Into<String>, order: Vec<usize>) -> Result<Self> {
        let qid = qid.into();
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidRanking { qid, n });
            }
        }
        Ok(Self { qid, order })
    }

    pub fn qid(&self) -> &str {
        &self.qid
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Labels in ranked order. Errors if the ranking does not fit the query.
    pub fn ranked_labels(&self, q: &QueryDocs) -> Result<Vec<u32>> {
        if self.order.len() != q.len() {
            return Err(Error::InvalidRanking {
                qid: q.qid().to_string(),
                n: q.len(),
            });
        }
        Ok(self.order.iter().map(|&i| q.docs()[i].label).collect())
    }
}

fn sorted_by_key_desc(n: usize, key: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps ascending index among equal keys
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)));
    order
}

pub fn ranking_from_scores(q: &QueryDocs, scores: &[f64]) -> Result<Ranking> {
    if scores.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "query {} has {} documents but {} scores",
            q.qid(),
            q.len(),
            scores.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "query {}: non-finite score {s}",
            q.qid()
        )));
    }
    Ok(Ranking {
        qid: q.qid().to_string(),
        order: sorted_by_key_desc(scores.len(), |i| scores[i]),
    })
}

/// Labels non-increasing along the ranking.
pub fn ideal_ranking(q: &QueryDocs) -> Ranking {
    let docs = q.docs();
    Ranking {
        qid: q.qid().to_string(),
        order: sorted_by_key_desc(docs.len(), |i| docs[i].label as f64),
    }
}

/// Labels non-decreasing along the ranking.
pub fn worst_ranking(q: &QueryDocs) -> Ranking {
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by_key(|&i| q.docs()[i].label);
    Ranking {
        qid: q.qid().to_string(),
        order,
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Generator seed for one query: `seed XOR fnv1a64(qid)`.
pub fn query_seed(seed: u64, qid: &str) -> u64 {
    seed ^ fnv1a64(qid.as_bytes())
}

/// The ChaCha8 generator used for every per-query random draw.
pub fn query_rng(seed: u64, qid: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(query_seed(seed, qid))
}

/// Uniformly random permutation (Fisher-Yates) seeded from `(seed, qid)`.
pub fn random_ranking(q: &QueryDocs, seed: u64) -> Ranking {
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.shuffle(&mut query_rng(seed, q.qid()));
    Ranking {
        qid: q.qid().to_string(),
        order,
    }
}

/// Sorts by one feature's value, descending; missing features count as 0.
pub fn feature_ranking(q: &QueryDocs, feature_id: u32) -> Result<Ranking> {
    if feature_id == 0 {
        return Err(Error::InvalidArgument("feature ids are positive".into()));
    }
    let docs = q.docs();
    Ok(Ranking {
        qid: q.qid().to_string(),
        order: sorted_by_key_desc(docs.len(), |i| docs[i].feature(feature_id)),
    })
}

/// Resolves `(doc_id, score)` run entries against a query. Entries are ordered by
/// score descending (ties by document index); documents the run omits follow in
/// index order.
pub fn ranking_from_run(q: &QueryDocs, entries: &[(String, f64)]) -> Result<Ranking> {
    let mut ranked = Vec::with_capacity(entries.len());
    let mut seen = vec![false; q.len()];
    for (doc_id, score) in entries {
        let idx = q.position_of(doc_id)?;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::InvalidArgument(format!(
                "query {}: document {doc_id} ranked twice",
                q.qid()
            )));
        }
        ranked.push((idx, *score));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut order: Vec<usize> = ranked.into_iter().map(|(i, _)| i).collect();
    order.extend((0..q.len()).filter(|&i| !seen[i]));
    Ok(Ranking {
        qid: q.qid().to_string(),
        order,
    })
}

/// Writes rankings in TREC run format, qid order, with score `n - position` so a
/// re-parse reproduces the same order.
pub fn write_trec_run<W: Write>(
    corpus: &Corpus,
    rankings: &BTreeMap<String, Ranking>,
    tag: &str,
    mut out: W,
) -> Result<()> {
    let io = |source| Error::Io {
        path: "<run output>".into(),
        source,
    };
    for (qid, r) in rankings {
        let q = corpus
            .get(qid)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown query {qid}")))?;
        if r.len() != q.len() {
            return Err(Error::InvalidRanking {
                qid: qid.clone(),
                n: q.len(),
            });
        }
        let n = r.len();
        for (pos, &doc) in r.order().iter().enumerate() {
            writeln!(
                out,
                "{qid} Q0 {} {} {} {tag}",
                q.docs()[doc].doc_id,
                pos + 1,
                n - pos
            )
            .map_err(io)?;
        }
    }
    Ok(())
}
