mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use ulbound::bounds::{
    exhaustive_expectation, iub, rlb_closed, rlb_exhaustive, DEFAULT_PREFIX_LIMIT,
};
use ulbound::dataset::{binarize, histogram, parse_trec_run_str, Corpus, GradeScale, QueryDocs};
use ulbound::harness::resolve_run;
use ulbound::metrics::{MetricKind, MetricSpec};
use ulbound::ranking::{ideal_ranking, random_ranking, worst_ranking, write_trec_run, Ranking};
use ulbound::ulnorm::normalize_v2;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn labels_strategy(max_len: usize) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..=4, 1..=max_len)
}

fn kind_strategy() -> impl Strategy<Value = MetricKind> {
    prop::sample::select(MetricKind::ALL.to_vec())
}

fn scale() -> GradeScale {
    GradeScale::new(4).unwrap()
}

fn values_over_permutations(spec: &MetricSpec, labels: &[u32]) -> Vec<(Vec<u32>, f64)> {
    permutations(labels.len())
        .into_iter()
        .map(|p| {
            let ranked: Vec<u32> = p.iter().map(|&i| labels[i]).collect();
            let v = spec.evaluate_labels(&ranked).value;
            (ranked, v)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn ideal_and_worst_are_extremal(labels in labels_strategy(6), k in 1usize..=7, kind in kind_strategy()) {
        let q = QueryDocs::from_labels("q", &labels).unwrap();
        let spec = MetricSpec::new(kind, k, scale()).unwrap();
        let all = values_over_permutations(&spec, &labels);
        let best = all.iter().map(|x| x.1).fold(f64::MIN, f64::max);
        let worst = all.iter().map(|x| x.1).fold(f64::MAX, f64::min);
        let ideal = spec.evaluate(&ideal_ranking(&q), &q).unwrap().value;
        let bottom = spec.evaluate(&worst_ranking(&q), &q).unwrap().value;
        prop_assert!((ideal - best).abs() < 1e-12);
        prop_assert!((bottom - worst).abs() < 1e-12);
        prop_assert!((iub(&spec, &q).unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn normalized_scores_reach_one_only_at_ideal_prefix(labels in labels_strategy(6), k in 1usize..=7) {
        for kind in [MetricKind::Dcg, MetricKind::Err] {
            let spec = MetricSpec::new(kind, k, scale()).unwrap();
            let q = QueryDocs::from_labels("q", &labels).unwrap();
            let ideal_labels = ideal_ranking(&q).ranked_labels(&q).unwrap();
            let top = iub(&spec, &q).unwrap();
            let m = k.min(labels.len());
            for (ranked, v) in values_over_permutations(&spec, &labels) {
                let normalized = if top > 0.0 { v / top } else { 0.0 };
                prop_assert!((0.0..=1.0 + 1e-12).contains(&normalized));
                if top > 0.0 {
                    let at_one = (normalized - 1.0).abs() < 1e-12;
                    prop_assert_eq!(at_one, ranked[..m] == ideal_labels[..m]);
                }
            }
        }
    }

    #[test]
    fn expected_precision_is_base_rate(labels in labels_strategy(8), i in 1usize..=8) {
        let q = QueryDocs::from_labels("q", &labels).unwrap();
        let h = histogram(&q, scale()).unwrap();
        let p = binarize(&h, 0).unwrap().p_rel();
        let m = i.min(labels.len());
        let e = exhaustive_expectation(&h, m, DEFAULT_PREFIX_LIMIT, |prefix| {
            prefix.iter().filter(|&&g| g > 0).count() as f64 / m as f64
        })
        .unwrap();
        prop_assert!((e - p).abs() < 1e-12);
    }

    #[test]
    fn rlb_lies_between_worst_and_iub(labels in labels_strategy(7), k in 1usize..=8, kind in kind_strategy()) {
        let q = QueryDocs::from_labels("q", &labels).unwrap();
        let spec = MetricSpec::new(kind, k, scale()).unwrap();
        let exact = rlb_exhaustive(&spec, &q, DEFAULT_PREFIX_LIMIT).unwrap();
        let bottom = spec.evaluate(&worst_ranking(&q), &q).unwrap().value;
        let top = iub(&spec, &q).unwrap();
        prop_assert!(bottom - 1e-12 <= exact && exact <= top + 1e-12);
        // closed forms may be approximations, but never exceed the ideal
        prop_assert!(rlb_closed(&spec, &q).unwrap() <= top + 1e-12);
    }

    #[test]
    fn histogram_counts_sum_to_n(labels in prop::collection::vec(0u32..=4, 1..50)) {
        let q = QueryDocs::from_labels("q", &labels).unwrap();
        let h = histogram(&q, scale()).unwrap();
        prop_assert_eq!(h.counts.iter().sum::<usize>(), labels.len());
        prop_assert_eq!(h.n, labels.len());
        let b = binarize(&h, 2).unwrap();
        prop_assert_eq!(b.n_pos, labels.iter().filter(|&&g| g > 2).count());
    }

    #[test]
    fn v2_expectation_is_bounded_and_ideal_maps_to_one(labels in labels_strategy(7), k in 1usize..=8, kind in kind_strategy()) {
        let q = QueryDocs::from_labels("q", &labels).unwrap();
        let spec = MetricSpec::new(kind, k, scale()).unwrap();
        let top = iub(&spec, &q).unwrap();
        let rlb = rlb_exhaustive(&spec, &q, DEFAULT_PREFIX_LIMIT).unwrap().min(top);
        let h = histogram(&q, scale()).unwrap();
        let e = exhaustive_expectation(&h, k, DEFAULT_PREFIX_LIMIT, |p| {
            normalize_v2(spec.evaluate_labels(p).value, top, rlb).unwrap().value
        })
        .unwrap();
        prop_assert!((-1.0..=1.0).contains(&e));
        if top > rlb + 1e-9 {
            let ideal = spec.evaluate(&ideal_ranking(&q), &q).unwrap().value;
            prop_assert_eq!(normalize_v2(ideal, top, rlb).unwrap().value, 1.0);
        }
    }
}

#[test]
fn run_files_round_trip() {
    let corpus: Corpus = common::synthetic_corpus(25, 1..=12, 8);
    let run: BTreeMap<String, Ranking> = corpus
        .queries()
        .map(|q| (q.qid().to_string(), random_ranking(q, 77)))
        .collect();
    let mut text = Vec::new();
    write_trec_run(&corpus, &run, "rt", &mut text).unwrap();
    let entries = parse_trec_run_str(std::str::from_utf8(&text).unwrap()).unwrap();
    assert_eq!(resolve_run(&corpus, &entries).unwrap(), run);
}
