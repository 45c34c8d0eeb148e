#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ulbound::dataset::{write_letor, Corpus, DocEntry, GradeScale, QueryDocs};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_labels(rng: &mut impl Rng, n: usize, g_max: u32) -> Vec<u32> {
    (0..n).map(|_| rng.random_range(0..=g_max)).collect()
}

/// Random query with `1..=n_max` documents and grades in `0..=g_max`.
pub fn random_query(rng: &mut impl Rng, qid: &str, n_max: usize, g_max: u32) -> QueryDocs {
    let n = rng.random_range(1..=n_max);
    QueryDocs::from_labels(qid, &random_labels(rng, n, g_max)).unwrap()
}

/// Corpus with skewed grades (mostly non-relevant, like web collections).
/// Feature 1 is a noisy copy of the label, feature 2 is noise.
pub fn synthetic_corpus(
    queries: usize,
    docs: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Corpus {
    let mut rng = rng(seed);
    let grades = [0, 0, 0, 0, 1, 1, 2, 3, 4];
    let qs = (0..queries)
        .map(|qi| {
            let qid = format!("{}", qi + 1);
            let n = rng.random_range(docs.clone());
            let entries = (0..n)
                .map(|i| {
                    let label = grades[rng.random_range(0..grades.len())];
                    let mut d = DocEntry::new(label, format!("d{qid}-{i}"));
                    let f1 = label as f64 + rng.random_range(-1.5..1.5);
                    let f2: f64 = rng.random();
                    d.features = vec![(1, (f1 * 1e4).round() / 1e4), (2, (f2 * 1e4).round() / 1e4)];
                    d
                })
                .collect();
            QueryDocs::new(qid, entries).unwrap()
        })
        .collect();
    Corpus::new(GradeScale::new(4).unwrap(), qs).unwrap()
}

pub fn write_corpus(dir: &Path, name: &str, corpus: &Corpus) -> PathBuf {
    let path = dir.join(name);
    let mut buf = Vec::new();
    write_letor(corpus, &mut buf).unwrap();
    fs::write(&path, buf).unwrap();
    path
}

pub fn ulbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ulbound"))
        .args(args)
        .output()
        .expect("failed to launch ulbound")
}

pub fn ulbound_ok(args: &[&str]) -> Output {
    let out = ulbound(args);
    assert!(
        out.status.success(),
        "ulbound {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// File name to contents for every regular file in `dir`.
pub fn read_dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

/// Parses a CSV file into rows of column name to value.
pub fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            headers
                .iter()
                .map(String::from)
                .zip(r.iter().map(String::from))
                .collect()
        })
        .collect()
}
