use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;

use super::output::{write_file, Table};
use super::{
    BoundSpec, BoundsArgs, Command, CommonArgs, CompareArgs, EvalArgs, NamedRun, RankArgs, TestKind,
};
use crate::analysis::{
    build_score_matrices, categorize_queries, kendall_tau, pad, pairwise_pvalues, query_gaps,
    swap_rate, QueryGapTable, QuerySets, RunRankings, ScoreMatrix, SignificanceTest,
};
use crate::bounds::{iub, rlb_closed, rlb_exhaustive, rlb_montecarlo, BoundMode};
use crate::dataset::{parse_letor, parse_trec_run, Corpus, GradeScale};
use crate::error::{Error, Result};
use crate::harness::{generate_run_text, resolve_run, RankerConfig};
use crate::metrics::{MetricKind, MetricSpec};
use crate::ulnorm::Variant;

pub(super) fn execute(command: Command) -> Result<()> {
    let threads = match &command {
        Command::Eval(a) => a.common.threads,
        Command::Bounds(a) => a.common.threads,
        Command::Compare(a) | Command::Categorize(a) | Command::Report(a) => a.eval.common.threads,
        Command::Rank(a) => a.common.threads,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| match command {
        Command::Eval(a) => cmd_eval(&a),
        Command::Bounds(a) => cmd_bounds(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Categorize(a) => cmd_categorize(&a),
        Command::Rank(a) => cmd_rank(&a),
        Command::Report(a) => cmd_report(&a),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn prepare_out(common: &CommonArgs) -> Result<()> {
    fs::create_dir_all(&common.out).map_err(|source| Error::Io {
        path: common.out.clone(),
        source,
    })
}

fn load_corpus(common: &CommonArgs) -> Result<Corpus> {
    let scale = common.gmax.map(GradeScale::new).transpose()?;
    let corpus =
        parse_letor(open(&common.dataset)?, scale).map_err(|e| e.in_file(&common.dataset))?;
    if corpus.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: dataset has no queries",
            common.dataset.display()
        )));
    }
    Ok(match common.subsample {
        Some(s) => corpus.subsample(s.size, s.seed),
        None => corpus,
    })
}

fn load_runs(corpus: &Corpus, runs: &[NamedRun]) -> Result<Vec<(String, RunRankings)>> {
    let mut names = BTreeSet::new();
    let mut out = Vec::with_capacity(runs.len());
    for run in runs {
        if !names.insert(run.name.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate run name {}",
                run.name
            )));
        }
        let entries = parse_trec_run(open(&run.path)?).map_err(|e| e.in_file(&run.path))?;
        let rankings = resolve_run(corpus, &entries).map_err(|e| e.in_file(&run.path))?;
        out.push((run.name.clone(), rankings));
    }
    Ok(out)
}

fn base_spec(kind: MetricKind, corpus: &Corpus, threshold: u32) -> Result<MetricSpec> {
    MetricSpec::new(kind, 1, corpus.scale())?.with_threshold(threshold)
}

fn bound_mode(spec: BoundSpec, limit: u64, seed: u64) -> BoundMode {
    match spec {
        BoundSpec::Closed => BoundMode::Closed,
        BoundSpec::Exhaustive => BoundMode::Exhaustive { limit },
        BoundSpec::MonteCarlo(samples) => BoundMode::MonteCarlo { samples, seed },
    }
}

struct Evaluation {
    corpus: Corpus,
    /// One entry per metric: (spec, matrices in variant order).
    metrics: Vec<(MetricSpec, Vec<ScoreMatrix>)>,
    variants: Vec<Variant>,
}

impl Evaluation {
    fn matrix(&self, metric: usize, variant: Variant) -> Option<&ScoreMatrix> {
        self.metrics[metric].1.iter().find(|m| m.variant == variant)
    }
}

/// Scores every run; the upper-normalized matrix is always computed because
/// query categorization depends on it.
fn evaluate(args: &EvalArgs) -> Result<Evaluation> {
    let corpus = load_corpus(&args.common)?;
    let runs = load_runs(&corpus, &args.runs)?;
    let mode = bound_mode(
        args.metrics.bounds,
        args.metrics.prefix_limit,
        args.common.seed,
    );
    let requested = args.metrics.norm.0.clone();
    let mut variants = requested.clone();
    if !variants.contains(&Variant::Upper) {
        variants.push(Variant::Upper);
    }
    let mut metrics = Vec::new();
    for &kind in &args.metrics.metric.0 {
        let spec = base_spec(kind, &corpus, args.common.threshold)?;
        let matrices =
            build_score_matrices(&corpus, &runs, &spec, &args.metrics.k.0, &variants, mode)?;
        metrics.push((spec, matrices));
    }
    Ok(Evaluation {
        corpus,
        metrics,
        variants: requested,
    })
}

fn write_eval(ev: &Evaluation, common: &CommonArgs) -> Result<()> {
    let mut aggregate = Table::new(&[
        "method",
        "metric",
        "variant",
        "k",
        "mean",
        "queries",
        "degenerate",
        "clamped_bounds",
    ]);
    let mut per_query = Table::new(&[
        "method",
        "qid",
        "metric",
        "variant",
        "k",
        "value",
        "degenerate",
    ]);
    for (mi, (spec, _)) in ev.metrics.iter().enumerate() {
        for &variant in &ev.variants {
            let m = ev.matrix(mi, variant).expect("requested variant computed");
            for (method_idx, method) in m.methods().iter().enumerate() {
                for (ki, &k) in m.ks().iter().enumerate() {
                    aggregate.push(vec![
                        method.as_str().into(),
                        spec.kind.family_name().into(),
                        variant.name().into(),
                        k.into(),
                        m.mean_at(method_idx, ki).into(),
                        m.qids().len().into(),
                        m.degenerate_count(method_idx, ki).into(),
                        m.clamped_bounds.into(),
                    ]);
                }
                for (qi, qid) in m.qids().iter().enumerate() {
                    for (ki, &k) in m.ks().iter().enumerate() {
                        per_query.push(vec![
                            method.as_str().into(),
                            qid.as_str().into(),
                            spec.kind.family_name().into(),
                            variant.name().into(),
                            k.into(),
                            m.get(method_idx, qi, ki).into(),
                            usize::from(m.is_degenerate(method_idx, qi, ki)).into(),
                        ]);
                    }
                }
            }
        }
    }
    aggregate.write(&common.out, "aggregate", common.format)?;
    per_query.write(&common.out, "per_query", common.format)?;
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    prepare_out(&args.common)?;
    let ev = evaluate(args)?;
    write_eval(&ev, &args.common)
}

fn default_top_n(queries: usize, top_n: Option<usize>) -> usize {
    top_n.unwrap_or(queries / 10)
}

fn query_sets(ev: &Evaluation, metric: usize, top_n: usize) -> Result<(QueryGapTable, QuerySets)> {
    let upper = ev
        .matrix(metric, Variant::Upper)
        .expect("upper matrix computed");
    let gaps = query_gaps(&ev.corpus, upper, &ev.metrics[metric].0)?;
    let sets = categorize_queries(&gaps, top_n)?;
    Ok((gaps, sets))
}

fn significance_test(args: &CompareArgs) -> SignificanceTest {
    match args.test {
        TestKind::Ttest => SignificanceTest::TTest,
        TestKind::Bootstrap => SignificanceTest::Bootstrap {
            b: args.bootstrap_b,
            seed: args.eval.common.seed,
        },
    }
}

fn write_compare(ev: &Evaluation, args: &CompareArgs) -> Result<()> {
    let common = &args.eval.common;
    if args.eval.runs.len() < 2 {
        return Err(Error::InvalidArgument(
            "compare needs at least two runs".into(),
        ));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {}",
            args.alpha
        )));
    }
    let test = significance_test(args);
    let top_n = default_top_n(ev.corpus.len(), args.top_n);

    let mut rankings = Table::new(&["metric", "subset", "variant", "rank", "method", "score"]);
    let mut kendall = Table::new(&["metric", "subset", "variant_a", "variant_b", "tau"]);
    let mut swaps = Table::new(&["metric", "subset", "variant_a", "variant_b", "swap_rate"]);
    let mut pads = Table::new(&["metric", "subset", "variant", "pad", "degenerate_pairs"]);
    let mut sig = Table::new(&[
        "metric",
        "subset",
        "variant",
        "test",
        "alpha",
        "significant",
        "comparisons",
    ]);
    let mut conflicts = Table::new(&[
        "metric",
        "subset",
        "variant_a",
        "variant_b",
        "test",
        "alpha",
        "conflicts",
        "comparisons",
    ]);

    for (mi, (spec, _)) in ev.metrics.iter().enumerate() {
        let metric = spec.kind.family_name();
        let (_, sets) = query_sets(ev, mi, top_n)?;
        let mut subsets: Vec<(&str, Option<&BTreeSet<String>>)> = vec![("all", None)];
        if sets.uninformative.len() >= 2 {
            subsets.push(("uninformative", Some(&sets.uninformative)));
            subsets.push(("ideal", Some(&sets.ideal)));
        }
        for (subset, keep) in subsets {
            let matrices: Vec<ScoreMatrix> = ev
                .variants
                .iter()
                .map(|&v| {
                    let m = ev.matrix(mi, v).expect("requested variant computed");
                    match keep {
                        Some(set) => m.restrict(set.iter().map(String::as_str)),
                        None => Ok(m.clone()),
                    }
                })
                .collect::<Result<_>>()?;
            let method_rankings: Vec<_> =
                matrices.iter().map(ScoreMatrix::method_ranking).collect();
            let pvalues: Vec<Vec<f64>> = matrices
                .par_iter()
                .map(|m| {
                    Ok(pairwise_pvalues(m, test)?
                        .into_iter()
                        .map(|t| t.p_value)
                        .collect())
                })
                .collect::<Result<_>>()?;

            for (vi, m) in matrices.iter().enumerate() {
                let variant = m.variant.name();
                let r = &method_rankings[vi];
                for (rank, method) in r.methods().iter().enumerate() {
                    rankings.push(vec![
                        metric.into(),
                        subset.into(),
                        variant.into(),
                        (rank + 1).into(),
                        method.as_str().into(),
                        r.score(method).into(),
                    ]);
                }
                let averages: Vec<(String, f64)> = m
                    .methods()
                    .iter()
                    .enumerate()
                    .map(|(i, name)| (name.clone(), m.method_average(i)))
                    .collect();
                let p = pad(&averages)?;
                pads.push(vec![
                    metric.into(),
                    subset.into(),
                    variant.into(),
                    p.value.into(),
                    p.degenerate_pairs.into(),
                ]);
                sig.push(vec![
                    metric.into(),
                    subset.into(),
                    variant.into(),
                    test.name().into(),
                    args.alpha.into(),
                    pvalues[vi]
                        .iter()
                        .filter(|&&p| p < args.alpha)
                        .count()
                        .into(),
                    pvalues[vi].len().into(),
                ]);
            }
            for a in 0..matrices.len() {
                for b in a..matrices.len() {
                    let (va, vb) = (matrices[a].variant.name(), matrices[b].variant.name());
                    kendall.push(vec![
                        metric.into(),
                        subset.into(),
                        va.into(),
                        vb.into(),
                        kendall_tau(&method_rankings[a], &method_rankings[b])?.into(),
                    ]);
                    swaps.push(vec![
                        metric.into(),
                        subset.into(),
                        va.into(),
                        vb.into(),
                        swap_rate(&method_rankings[a], &method_rankings[b])?.into(),
                    ]);
                    let flips = pvalues[a]
                        .iter()
                        .zip(&pvalues[b])
                        .filter(|(x, y)| (**x < args.alpha) != (**y < args.alpha))
                        .count();
                    conflicts.push(vec![
                        metric.into(),
                        subset.into(),
                        va.into(),
                        vb.into(),
                        test.name().into(),
                        args.alpha.into(),
                        flips.into(),
                        pvalues[a].len().into(),
                    ]);
                }
            }
        }
    }
    rankings.write(&common.out, "method_rankings", common.format)?;
    kendall.write(&common.out, "kendall", common.format)?;
    swaps.write(&common.out, "swap_rate", common.format)?;
    pads.write(&common.out, "pad", common.format)?;
    sig.write(&common.out, "sig_counts", common.format)?;
    conflicts.write(&common.out, "conflicts", common.format)?;
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    prepare_out(&args.eval.common)?;
    let ev = evaluate(&args.eval)?;
    write_compare(&ev, args)
}

fn write_categorize(ev: &Evaluation, args: &CompareArgs) -> Result<()> {
    let common = &args.eval.common;
    let top_n = default_top_n(ev.corpus.len(), args.top_n);
    for (mi, (spec, _)) in ev.metrics.iter().enumerate() {
        let metric = spec.kind.family_name();
        let (gaps, sets) = query_sets(ev, mi, top_n)?;
        let mut table = Table::new(&["qid", "actual", "expected", "gap"]);
        for g in &gaps.entries {
            table.push(vec![
                g.qid.as_str().into(),
                g.actual.into(),
                g.expected.into(),
                g.gap.into(),
            ]);
        }
        table.write(&common.out, &format!("query_gaps_{metric}"), common.format)?;
        for (name, set) in [
            ("uninformative", &sets.uninformative),
            ("ideal", &sets.ideal),
        ] {
            let text: String = set.iter().map(|q| format!("{q}\n")).collect();
            write_file(
                &common.out.join(format!("{name}_{metric}.txt")),
                text.as_bytes(),
            )?;
        }
    }
    Ok(())
}

fn cmd_categorize(args: &CompareArgs) -> Result<()> {
    prepare_out(&args.eval.common)?;
    let ev = evaluate(&args.eval)?;
    write_categorize(&ev, args)
}

fn cmd_report(args: &CompareArgs) -> Result<()> {
    prepare_out(&args.eval.common)?;
    let ev = evaluate(&args.eval)?;
    write_eval(&ev, &args.eval.common)?;
    write_compare(&ev, args)?;
    write_categorize(&ev, args)
}

fn cmd_rank(args: &RankArgs) -> Result<()> {
    prepare_out(&args.common)?;
    let corpus = load_corpus(&args.common)?;
    let tag = args
        .tag
        .clone()
        .unwrap_or_else(|| args.policy.to_string().replace(':', "_"));
    let config = RankerConfig::new(args.policy, tag)?;
    let text = generate_run_text(&corpus, &config)?;
    write_file(
        &args.common.out.join(format!("{}.run", config.tag)),
        text.as_bytes(),
    )
}

struct BoundRow {
    metric: MetricKind,
    k: usize,
    iub: f64,
    closed: f64,
    exhaustive: Option<f64>,
    mc: Option<(f64, f64)>,
    warning: Option<String>,
}

fn cmd_bounds(args: &BoundsArgs) -> Result<()> {
    let common = &args.common;
    if !(args.bin_width > 0.0 && args.bin_width <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bin width must lie in (0, 1], got {}",
            args.bin_width
        )));
    }
    prepare_out(common)?;
    let corpus = load_corpus(common)?;
    let want_exhaustive = args.bounds.0.contains(&BoundSpec::Exhaustive);
    let mc_samples = args.bounds.0.iter().find_map(|b| match b {
        BoundSpec::MonteCarlo(n) => Some(*n),
        _ => None,
    });
    let specs: Vec<MetricSpec> = args
        .metric
        .0
        .iter()
        .flat_map(|&kind| args.k.0.iter().map(move |&k| (kind, k)))
        .map(|(kind, k)| base_spec(kind, &corpus, common.threshold)?.with_k(k))
        .collect::<Result<_>>()?;

    let queries: Vec<_> = corpus.queries().collect();
    let rows: Vec<Vec<BoundRow>> = queries
        .par_iter()
        .map(|q| {
            specs
                .iter()
                .map(|spec| {
                    let mut warning = None;
                    let exhaustive = if want_exhaustive {
                        match rlb_exhaustive(spec, q, args.prefix_limit) {
                            Ok(v) => Some(v),
                            Err(e @ Error::Intractable { .. }) => {
                                warning = Some(e.to_string());
                                None
                            }
                            Err(e) => return Err(e),
                        }
                    } else {
                        None
                    };
                    let mc = mc_samples
                        .map(|n| rlb_montecarlo(spec, q, n, common.seed))
                        .transpose()?
                        .map(|e| (e.estimate, e.stderr));
                    Ok(BoundRow {
                        metric: spec.kind,
                        k: spec.k,
                        iub: iub(spec, q)?,
                        closed: rlb_closed(spec, q)?,
                        exhaustive,
                        mc,
                        warning,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(&[
        "qid",
        "metric",
        "k",
        "iub",
        "rlb_closed",
        "rlb_exhaustive",
        "rlb_mc",
        "mc_stderr",
        "gap",
    ]);
    let mut warnings = Table::new(&["qid", "metric", "k", "message"]);
    let bins = (1.0 / args.bin_width).ceil() as usize;
    let mut histogram = vec![vec![0usize; bins]; specs.len()];
    for (q, per_query) in queries.iter().zip(&rows) {
        for (si, r) in per_query.iter().enumerate() {
            let reference = r.exhaustive.or(r.mc.map(|m| m.0));
            table.push(vec![
                q.qid().into(),
                r.metric.raw_name().into(),
                r.k.into(),
                r.iub.into(),
                r.closed.into(),
                r.exhaustive.into(),
                r.mc.map(|m| m.0).into(),
                r.mc.map(|m| m.1).into(),
                reference.map(|v| v - r.closed).into(),
            ]);
            if let Some(msg) = &r.warning {
                warnings.push(vec![
                    q.qid().into(),
                    r.metric.raw_name().into(),
                    r.k.into(),
                    msg.as_str().into(),
                ]);
            }
            let expected = if r.iub > 0.0 {
                (r.closed / r.iub).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let bin = ((expected / args.bin_width) as usize).min(bins - 1);
            histogram[si][bin] += 1;
        }
    }
    let mut hist = Table::new(&["metric", "k", "bin_lo", "bin_hi", "count"]);
    for (spec, counts) in specs.iter().zip(&histogram) {
        for (b, &count) in counts.iter().enumerate() {
            hist.push(vec![
                spec.kind.raw_name().into(),
                spec.k.into(),
                bin_edge(b, args.bin_width).into(),
                bin_edge(b + 1, args.bin_width).min(1.0).into(),
                count.into(),
            ]);
        }
    }
    if let Some(w) = warnings_to_stderr(&warnings) {
        eprintln!("warning: {w}");
    }
    table.write(&common.out, "bounds", common.format)?;
    warnings.write(&common.out, "bounds_warnings", common.format)?;
    hist.write(&common.out, "expected_histogram", common.format)?;
    Ok(())
}

// Rounded so that 3 * 0.05 prints as 0.15.
fn bin_edge(b: usize, width: f64) -> f64 {
    (b as f64 * width * 1e9).round() / 1e9
}

fn warnings_to_stderr(warnings: &Table) -> Option<String> {
    (!warnings.is_empty()).then(|| {
        format!(
            "{} query/metric/cutoff combinations exceeded the enumeration limit; see bounds_warnings",
            warnings.len()
        )
    })
}
