use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScoreMatrix;
use crate::bounds::expected_normalized;
use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::metrics::MetricSpec;
use crate::ulnorm::Variant;

/// Per-query gap between the observed and the random-ranking expectation,
/// sorted ascending (ties by qid).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryGapTable {
    pub entries: Vec<QueryGap>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryGap {
    pub qid: String,
    pub actual: f64,
    pub expected: f64,
    pub gap: f64,
}

impl QueryGapTable {
    pub fn new(mut entries: Vec<QueryGap>) -> Self {
        entries.sort_by(|a, b| a.gap.total_cmp(&b.gap).then_with(|| a.qid.cmp(&b.qid)));
        Self { entries }
    }

    pub fn from_gaps(gaps: impl IntoIterator<Item = (String, f64)>) -> Self {
        Self::new(
            gaps.into_iter()
                .map(|(qid, gap)| QueryGap {
                    qid,
                    actual: gap,
                    expected: 0.0,
                    gap,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Gap per query: the upper-normalized score averaged over methods and cutoffs,
/// minus the closed-form expected upper-normalized score averaged over the same
/// cutoffs. `upper` must be an upper-normalized matrix over `corpus`.
pub fn query_gaps(
    corpus: &Corpus,
    upper: &ScoreMatrix,
    spec: &MetricSpec,
) -> Result<QueryGapTable> {
    if upper.variant != Variant::Upper {
        return Err(Error::InvalidArgument(
            "query gaps need an upper-normalized score matrix".into(),
        ));
    }
    let methods = upper.methods().len();
    let ks = upper.ks();
    let entries = upper
        .qids()
        .par_iter()
        .enumerate()
        .map(|(qi, qid)| {
            let q = corpus
                .get(qid)
                .ok_or_else(|| Error::MissingQueries(vec![qid.clone()]))?;
            let mut expected = 0.0;
            for &k in ks {
                expected += expected_normalized(&spec.with_k(k)?, q)?;
            }
            expected /= ks.len() as f64;
            let mut actual = 0.0;
            for m in 0..methods {
                for ki in 0..ks.len() {
                    actual += upper.get(m, qi, ki);
                }
            }
            actual /= (methods * ks.len()) as f64;
            Ok(QueryGap {
                qid: qid.clone(),
                actual,
                expected,
                gap: actual - expected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QueryGapTable::new(entries))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySets {
    /// Smallest gaps: methods barely beat random ranking.
    pub uninformative: BTreeSet<String>,
    /// Largest gaps.
    pub ideal: BTreeSet<String>,
}

/// Picks the `top_n` smallest-gap and `top_n` largest-gap queries: the two ends
/// of the table's (gap, qid) ascending order, so the sets never overlap.
pub fn categorize_queries(gaps: &QueryGapTable, top_n: usize) -> Result<QuerySets> {
    if top_n > gaps.len() / 2 {
        return Err(Error::InvalidArgument(format!(
            "top_n {top_n} exceeds half of the {} queries",
            gaps.len()
        )));
    }
    let uninformative = gaps.entries[..top_n]
        .iter()
        .map(|g| g.qid.clone())
        .collect();
    let ideal = gaps.entries[gaps.len() - top_n..]
        .iter()
        .map(|g| g.qid.clone())
        .collect();
    Ok(QuerySets {
        uninformative,
        ideal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn categorize_examples() {
        let gaps = QueryGapTable::from_gaps([
            ("q3".to_string(), 0.5),
            ("q1".to_string(), 0.0),
            ("q4".to_string(), 0.6),
            ("q2".to_string(), 0.1),
        ]);
        let s = categorize_queries(&gaps, 2).unwrap();
        assert_eq!(s.uninformative, set(&["q1", "q2"]));
        assert_eq!(s.ideal, set(&["q3", "q4"]));

        let s = categorize_queries(&gaps, 0).unwrap();
        assert!(s.uninformative.is_empty() && s.ideal.is_empty());
        assert!(categorize_queries(&gaps, 3).is_err());
    }

    #[test]
    fn ties_break_by_qid() {
        let gaps = QueryGapTable::from_gaps(["c", "a", "d", "b"].map(|q| (q.to_string(), 0.2)));
        let s = categorize_queries(&gaps, 1).unwrap();
        assert_eq!(s.uninformative, set(&["a"]));
        assert_eq!(s.ideal, set(&["d"]));
        let s = categorize_queries(&gaps, 2).unwrap();
        assert_eq!(s.uninformative, set(&["a", "b"]));
        assert_eq!(s.ideal, set(&["c", "d"]));
    }
}
