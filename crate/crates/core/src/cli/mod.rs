//! The `ulbound` command line.
//!
//! Subcommands follow the evaluation pipeline: `rank` produces reference runs,
//! `eval` scores runs, `bounds` materializes per-query bounds, `compare` runs the
//! method-agreement and significance analyses, `categorize` splits queries by
//! how far methods beat random ranking, and `report` chains eval, compare and
//! categorize. Every output is a CSV with a header row (and/or a JSON mirror).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::bounds::DEFAULT_PREFIX_LIMIT;
use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::ulnorm::Variant;

pub use output::{Cell, OutputFormat, Table};

#[derive(Debug, Parser)]
#[command(
    name = "ulbound",
    version,
    about = "Ranking evaluation with ideal and random-ranking bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score runs and write aggregate and per-query tables.
    Eval(EvalArgs),
    /// Write per-query upper and lower bounds.
    Bounds(BoundsArgs),
    /// Compare methods across normalization variants.
    Compare(CompareArgs),
    /// Split queries into uninformative and ideal sets.
    Categorize(CompareArgs),
    /// Produce a run file from a reference ranker.
    Rank(RankArgs),
    /// eval, compare and categorize in one go.
    Report(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// LETOR-format dataset.
    #[arg(long)]
    pub dataset: PathBuf,

    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Maximum relevance grade; inferred from the data when omitted.
    #[arg(long)]
    pub gmax: Option<u32>,

    /// Keep N queries chosen with SEED, given as N:SEED.
    #[arg(long)]
    pub subsample: Option<Subsample>,

    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,

    /// Grades above this value count as relevant for MAP.
    #[arg(long, default_value_t = 0)]
    pub threshold: u32,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct MetricArgs {
    /// ndcg, map, err or all; comma-separated lists are accepted.
    #[arg(long, default_value = "all")]
    pub metric: MetricList,

    #[arg(long, default_value = "5,10,15,20,30")]
    pub k: Cutoffs,

    /// none, upper, v1, v2 or all; comma-separated lists are accepted.
    #[arg(long, default_value = "all")]
    pub norm: VariantList,

    /// Lower-bound source: closed, exhaustive or mc:N.
    #[arg(long, default_value = "closed")]
    pub bounds: BoundSpec,

    /// Enumeration limit for exhaustive bounds.
    #[arg(long, default_value_t = DEFAULT_PREFIX_LIMIT)]
    pub prefix_limit: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(flatten)]
    pub metrics: MetricArgs,

    /// Run to evaluate as NAME=PATH; repeatable.
    #[arg(long = "run", required = true)]
    pub runs: Vec<NamedRun>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub eval: EvalArgs,

    /// Size of each query set; defaults to 10% of the queries.
    #[arg(long)]
    pub top_n: Option<usize>,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[arg(long, value_enum, default_value = "ttest")]
    pub test: TestKind,

    #[arg(long, default_value_t = crate::analysis::DEFAULT_BOOTSTRAP_B)]
    pub bootstrap_b: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long, default_value = "all")]
    pub metric: MetricList,

    #[arg(long, default_value = "5,10,15,20,30")]
    pub k: Cutoffs,

    /// Columns to fill besides the closed form: exhaustive and/or mc:N.
    #[arg(long, default_value = "closed")]
    pub bounds: BoundList,

    #[arg(long, default_value_t = DEFAULT_PREFIX_LIMIT)]
    pub prefix_limit: u64,

    /// Bin width of the expected-score histogram.
    #[arg(long, default_value_t = 0.05)]
    pub bin_width: f64,
}

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// ideal, worst, random[:SEED] or feature:ID.
    #[arg(long)]
    pub policy: crate::harness::RankerPolicy,

    /// Run tag; also the output file stem.
    #[arg(long)]
    pub tag: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TestKind {
    Ttest,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subsample {
    pub size: usize,
    pub seed: u64,
}

impl FromStr for Subsample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected N:SEED, got {s:?}"));
        let (n, seed) = s.split_once(':').ok_or_else(bad)?;
        Ok(Self {
            size: n.parse().map_err(|_| bad())?,
            seed: seed.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedRun {
    pub name: String,
    pub path: PathBuf,
}

impl FromStr for NamedRun {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok(Self {
                name: name.to_string(),
                path: PathBuf::from(path),
            }),
            _ => Err(Error::InvalidArgument(format!(
                "expected NAME=PATH, got {s:?}"
            ))),
        }
    }
}

/// Cutoff list, non-empty and strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cutoffs(pub Vec<usize>);

impl FromStr for Cutoffs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ks: Vec<usize> = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("invalid cutoff {t:?}")))
            })
            .collect::<Result<_>>()?;
        if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "cutoffs must be positive and strictly increasing".into(),
            ));
        }
        Ok(Self(ks))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricList(pub Vec<MetricKind>);

impl FromStr for MetricList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for t in s.split(',') {
            if t.trim() == "all" {
                out.extend(MetricKind::ALL);
            } else {
                out.push(t.trim().parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(Self(out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantList(pub Vec<Variant>);

impl FromStr for VariantList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for t in s.split(',') {
            if t.trim() == "all" {
                out.extend(Variant::ALL);
            } else {
                out.push(t.trim().parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(Self(out))
    }
}

/// One lower-bound source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSpec {
    Closed,
    Exhaustive,
    MonteCarlo(usize),
}

impl FromStr for BoundSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "closed" => Ok(BoundSpec::Closed),
            "exhaustive" => Ok(BoundSpec::Exhaustive),
            other => {
                let n = other
                    .strip_prefix("mc:")
                    .or_else(|| other.strip_prefix("montecarlo:"))
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&n| n >= 2)
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "expected closed, exhaustive or mc:N (N >= 2), got {other:?}"
                        ))
                    })?;
                Ok(BoundSpec::MonteCarlo(n))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundList(pub Vec<BoundSpec>);

impl FromStr for BoundList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Self(s.split(',').map(str::parse).collect::<Result<_>>()?))
    }
}

/// Runs a parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    commands::execute(cli.command)
}

/// Entry point used by the binary: parses `std::env::args`, runs, and maps
/// failures to a non-zero exit code.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
