//! Reference rankers run over a whole corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::RunRankings;
use crate::dataset::{Corpus, RunEntries};
use crate::error::{Error, Result};
use crate::ranking::{
    feature_ranking, ideal_ranking, random_ranking, ranking_from_run, worst_ranking,
    write_trec_run, Ranking,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankerPolicy {
    Random { seed: u64 },
    Ideal,
    Worst,
    Feature { id: u32 },
}

impl fmt::Display for RankerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankerPolicy::Random { seed } => write!(f, "random:{seed}"),
            RankerPolicy::Ideal => f.write_str("ideal"),
            RankerPolicy::Worst => f.write_str("worst"),
            RankerPolicy::Feature { id } => write!(f, "feature:{id}"),
        }
    }
}

impl FromStr for RankerPolicy {
    type Err = Error;

    /// `ideal`, `worst`, `random[:SEED]` or `feature:ID`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown ranker policy {s:?}"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("ideal", None) => Ok(RankerPolicy::Ideal),
            ("worst", None) => Ok(RankerPolicy::Worst),
            ("random", None) => Ok(RankerPolicy::Random { seed: 0 }),
            ("random", Some(a)) => Ok(RankerPolicy::Random {
                seed: a.parse().map_err(|_| bad())?,
            }),
            ("feature", Some(a)) => Ok(RankerPolicy::Feature {
                id: a.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankerConfig {
    pub policy: RankerPolicy,
    pub tag: String,
}

impl RankerConfig {
    pub fn new(policy: RankerPolicy, tag: impl Into<String>) -> Result<Self> {
        if let RankerPolicy::Feature { id: 0 } = policy {
            return Err(Error::InvalidArgument("feature ids are positive".into()));
        }
        let tag = tag.into();
        if tag.is_empty() || tag.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("invalid run tag {tag:?}")));
        }
        Ok(Self { policy, tag })
    }
}

/// One ranking per corpus query under the configured policy.
pub fn generate_run(corpus: &Corpus, config: &RankerConfig) -> Result<RunRankings> {
    let queries: Vec<_> = corpus.queries().collect();
    let rankings: Vec<Ranking> = queries
        .par_iter()
        .map(|q| match config.policy {
            RankerPolicy::Random { seed } => Ok(random_ranking(q, seed)),
            RankerPolicy::Ideal => Ok(ideal_ranking(q)),
            RankerPolicy::Worst => Ok(worst_ranking(q)),
            RankerPolicy::Feature { id } => feature_ranking(q, id),
        })
        .collect::<Result<_>>()?;
    Ok(rankings
        .into_iter()
        .map(|r| (r.qid().to_string(), r))
        .collect())
}

/// Generates a run and renders it in TREC format.
pub fn generate_run_text(corpus: &Corpus, config: &RankerConfig) -> Result<String> {
    let run = generate_run(corpus, config)?;
    let mut buf = Vec::new();
    write_trec_run(corpus, &run, &config.tag, &mut buf)?;
    Ok(String::from_utf8(buf).expect("run output is UTF-8"))
}

/// Resolves parsed run entries to rankings for every corpus query. Queries in
/// the run but not in the corpus are ignored; corpus queries absent from the run
/// are an error.
pub fn resolve_run(corpus: &Corpus, entries: &RunEntries) -> Result<RunRankings> {
    let missing: Vec<String> = corpus
        .qids()
        .filter(|q| !entries.contains_key(*q))
        .map(str::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingQueries(missing));
    }
    let queries: Vec<_> = corpus.queries().collect();
    let rankings: Vec<Ranking> = queries
        .par_iter()
        .map(|q| ranking_from_run(q, &entries[q.qid()]))
        .collect::<Result<_>>()?;
    Ok(rankings
        .into_iter()
        .map(|r| (r.qid().to_string(), r))
        .collect::<BTreeMap<_, _>>())
}
