//! Ranking evaluation with per-query ideal upper bounds and random-ranking
//! lower bounds.
//!
//! The crate computes DCG/nDCG, sum-of-precision/AP and ERR/nERR at a cutoff,
//! the expected value of each metric under a uniformly random permutation of a
//! query's documents, and two joint upper/lower-bound normalizations built on
//! those bounds. Expected values come from closed forms, from exact enumeration
//! of label prefixes, or from seeded Monte-Carlo sampling, so every closed form
//! can be audited against an exact oracle.
//!
//! On top of per-query scores, [`analysis`] provides the comparative toolkit:
//! Kendall's tau, swap rate, percentage absolute difference, paired t and
//! bootstrap tests, conflict counts and query categorization.
//!
//! ```
//! use ulbound::bounds::{rlb_closed, rlb_exhaustive, DEFAULT_PREFIX_LIMIT};
//! use ulbound::dataset::{GradeScale, QueryDocs};
//! use ulbound::metrics::{MetricKind, MetricSpec};
//!
//! let q = QueryDocs::from_labels("q1", &[2, 1, 0]).unwrap();
//! let spec = MetricSpec::new(MetricKind::Dcg, 2, GradeScale::new(2).unwrap()).unwrap();
//! let closed = rlb_closed(&spec, &q).unwrap();
//! let exact = rlb_exhaustive(&spec, &q, DEFAULT_PREFIX_LIMIT).unwrap();
//! assert!((closed - exact).abs() < 1e-12);
//! ```

pub mod analysis;
pub mod bounds;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod ranking;
pub mod ulnorm;

pub use error::{Error, Result};
