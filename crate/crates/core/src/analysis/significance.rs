use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::ScoreMatrix;
use crate::error::{Error, Result};
use crate::ranking::fnv1a64;

pub const DEFAULT_BOOTSTRAP_B: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignificanceTest {
    TTest,
    Bootstrap { b: usize, seed: u64 },
}

impl SignificanceTest {
    pub fn name(&self) -> &'static str {
        match self {
            SignificanceTest::TTest => "ttest",
            SignificanceTest::Bootstrap { .. } => "bootstrap",
        }
    }

    pub fn p_value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match *self {
            SignificanceTest::TTest => paired_ttest(x, y),
            SignificanceTest::Bootstrap { b, seed } => bootstrap_test(x, y, b, seed),
        }
    }
}

struct Moments {
    n: usize,
    mean: f64,
    sd: f64,
}

impl Moments {
    fn of(d: &[f64]) -> Self {
        let n = d.len();
        let mean = d.iter().sum::<f64>() / n as f64;
        let ss: f64 = d.iter().map(|v| (v - mean).powi(2)).sum();
        Self {
            n,
            mean,
            sd: (ss / (n - 1) as f64).sqrt(),
        }
    }

    /// Spread indistinguishable from rounding noise in the differences.
    fn zero_variance(&self, d: &[f64]) -> bool {
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.sd <= 1e-9 * scale
    }

    fn t(&self) -> f64 {
        self.mean / (self.sd / (self.n as f64).sqrt())
    }
}

fn differences(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "paired samples have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "paired tests need at least 2 queries".into(),
        ));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a - b).collect())
}

/// Degenerate cases shared by both tests: identical samples give 1, a constant
/// non-zero difference gives 0.
fn degenerate_p(d: &[f64], m: &Moments) -> Option<f64> {
    if d.iter().all(|&v| v == 0.0) {
        return Some(1.0);
    }
    if m.zero_variance(d) {
        return Some(if m.mean == 0.0 { 1.0 } else { 0.0 });
    }
    None
}

/// Two-sided paired Student's t-test.
pub fn paired_ttest(x: &[f64], y: &[f64]) -> Result<f64> {
    let d = differences(x, y)?;
    let m = Moments::of(&d);
    if let Some(p) = degenerate_p(&d, &m) {
        return Ok(p);
    }
    let dist = StudentsT::new(0.0, 1.0, (m.n - 1) as f64)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((2.0 * dist.sf(m.t().abs())).min(1.0))
}

/// Studentised paired bootstrap. Query indices are resampled `b` times; the
/// p-value is the share of resamples whose centred t statistic is at least as
/// extreme as the observed one. Resamples without spread are skipped.
pub fn bootstrap_test(x: &[f64], y: &[f64], b: usize, seed: u64) -> Result<f64> {
    if b < 100 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least 100 resamples".into(),
        ));
    }
    let d = differences(x, y)?;
    let m = Moments::of(&d);
    if let Some(p) = degenerate_p(&d, &m) {
        return Ok(p);
    }
    let observed = m.t().abs();
    let n = d.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = vec![0.0; n];
    let mut valid = 0usize;
    let mut extreme = 0usize;
    for _ in 0..b {
        for s in sample.iter_mut() {
            *s = d[rng.random_range(0..n)];
        }
        let bm = Moments::of(&sample);
        if bm.zero_variance(&sample) {
            continue;
        }
        valid += 1;
        let t = (bm.mean - m.mean) / (bm.sd / (n as f64).sqrt());
        if t.abs() >= observed {
            extreme += 1;
        }
    }
    if valid == 0 {
        return Ok(1.0);
    }
    Ok(extreme as f64 / valid as f64)
}

/// Outcome of one method-pair comparison at one cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub method_a: String,
    pub method_b: String,
    pub k: usize,
    pub p_value: f64,
}

/// p-values for every method pair at every cutoff, in (a, b, k) order. Each
/// bootstrap comparison gets its own seed derived from the pair and cutoff.
pub fn pairwise_pvalues(matrix: &ScoreMatrix, test: SignificanceTest) -> Result<Vec<PairTest>> {
    let methods = matrix.methods();
    if methods.len() < 2 {
        return Err(Error::InvalidArgument("need at least two methods".into()));
    }
    let mut out = Vec::new();
    for a in 0..methods.len() {
        for b in a + 1..methods.len() {
            for (ki, &k) in matrix.ks().iter().enumerate() {
                let t = match test {
                    SignificanceTest::Bootstrap { b: reps, seed } => {
                        let key = format!("{}\u{1f}{}\u{1f}{k}", methods[a], methods[b]);
                        SignificanceTest::Bootstrap {
                            b: reps,
                            seed: seed ^ fnv1a64(key.as_bytes()),
                        }
                    }
                    t => t,
                };
                let p_value = t.p_value(&matrix.column(a, ki), &matrix.column(b, ki))?;
                out.push(PairTest {
                    method_a: methods[a].clone(),
                    method_b: methods[b].clone(),
                    k,
                    p_value,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigCount {
    pub significant: usize,
    pub comparisons: usize,
}

/// Number of (method pair, cutoff) comparisons with `p < alpha`.
pub fn count_significant_pairs(
    matrix: &ScoreMatrix,
    alpha: f64,
    test: SignificanceTest,
) -> Result<SigCount> {
    let tests = pairwise_pvalues(matrix, test)?;
    Ok(SigCount {
        significant: tests.iter().filter(|t| t.p_value < alpha).count(),
        comparisons: tests.len(),
    })
}

/// Comparisons that are significant under exactly one of the two matrices.
pub fn count_conflicts(
    a: &ScoreMatrix,
    b: &ScoreMatrix,
    alpha: f64,
    test: SignificanceTest,
) -> Result<usize> {
    a.same_shape(b)?;
    let pa = pairwise_pvalues(a, test)?;
    let pb = pairwise_pvalues(b, test)?;
    Ok(pa
        .iter()
        .zip(&pb)
        .filter(|(x, y)| (x.p_value < alpha) != (y.p_value < alpha))
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricKind;
    use crate::ulnorm::Variant;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    /// Student t density integrated with composite Simpson's rule from 0 to |t|.
    fn t_two_sided_quadrature(t: f64, df: f64) -> f64 {
        let ln_c = ln_gamma((df + 1.0) / 2.0)
            - ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln();
        let pdf = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
        let steps = 200_000;
        let h = t.abs() / steps as f64;
        let mut s = pdf(0.0) + pdf(t.abs());
        for i in 1..steps {
            s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        1.0 - 2.0 * s * h / 3.0
    }

    /// Lanczos approximation, independent of statrs.
    fn ln_gamma(x: f64) -> f64 {
        const G: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        let x = x - 1.0;
        let mut a = G[0];
        let t = x + 7.5;
        for (i, g) in G.iter().enumerate().skip(1) {
            a += g / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }

    #[test]
    fn ttest_conventions() {
        let x = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(paired_ttest(&x, &x).unwrap(), 1.0);
        assert_eq!(
            paired_ttest(&[2.0, 2.0, 2.0, 2.0], &[1.0, 1.0, 1.0, 1.0]).unwrap(),
            0.0
        );
        assert_eq!(paired_ttest(&x, &[0.2, 0.3, 0.4, 0.5]).unwrap(), 0.0);
        assert!(paired_ttest(&[1.0], &[2.0]).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn ttest_matches_quadrature_reference() {
        let x = [0.1, 0.2, 0.3, 0.4];
        let y = [0.2, 0.3, 0.4, 0.6];
        let p = paired_ttest(&x, &y).unwrap();
        // t = -5 with 3 degrees of freedom
        let reference = t_two_sided_quadrature(-5.0, 3.0);
        assert_abs_diff_eq!(p, reference, epsilon = 1e-8);
        assert_abs_diff_eq!(p, 0.015392, epsilon = 1e-5);

        let x = [0.31, 0.52, 0.44, 0.12, 0.95, 0.67, 0.28];
        let y = [0.25, 0.50, 0.47, 0.02, 0.81, 0.70, 0.20];
        let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let m = Moments::of(&d);
        assert_abs_diff_eq!(
            paired_ttest(&x, &y).unwrap(),
            t_two_sided_quadrature(m.t(), 6.0),
            epsilon = 1e-8
        );
    }

    #[test]
    fn bootstrap_examples() {
        let x = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(bootstrap_test(&x, &x, 1000, 1).unwrap(), 1.0);
        let y = [0.2, 0.3, 0.4, 0.6];
        let pb = bootstrap_test(&x, &y, 10_000, 1).unwrap();
        let pt = paired_ttest(&x, &y).unwrap();
        assert!((pb - pt).abs() <= 0.03, "bootstrap {pb} vs t {pt}");
        assert!(bootstrap_test(&x, &y, 99, 1).is_err());
        assert_eq!(
            bootstrap_test(&x, &y, 500, 9).unwrap(),
            bootstrap_test(&x, &y, 500, 9).unwrap()
        );
    }

    #[test]
    fn bootstrap_size_calibration() {
        let normal = Normal::new(0.5, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let trials = 200;
        let mut rejections = 0;
        for trial in 0..trials {
            let x: Vec<f64> = (0..30).map(|_| normal.sample(&mut rng)).collect();
            let y: Vec<f64> = (0..30).map(|_| normal.sample(&mut rng)).collect();
            if bootstrap_test(&x, &y, 1000, trial).unwrap() < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / trials as f64;
        assert!((rate - 0.05).abs() <= 0.03, "rejection rate {rate}");
    }

    fn matrix(values: Vec<Vec<Vec<f64>>>, ks: Vec<usize>) -> ScoreMatrix {
        let methods = (0..values.len()).map(|i| format!("m{i}")).collect();
        let qids = (0..values[0].len()).map(|i| format!("q{i}")).collect();
        ScoreMatrix::from_values(MetricKind::Dcg, Variant::Upper, methods, qids, ks, values)
            .unwrap()
    }

    #[test]
    fn significant_pair_counts() {
        let same = vec![vec![vec![0.5, 0.1]; 4]; 3];
        let m = matrix(same.clone(), vec![5, 10]);
        let c = count_significant_pairs(&m, 0.05, SignificanceTest::TTest).unwrap();
        assert_eq!(
            c,
            SigCount {
                significant: 0,
                comparisons: 6
            }
        );

        // method 2 differs from the others by a constant at the second cutoff only
        let mut one = same;
        one[2] = vec![vec![0.5, 0.3]; 4];
        one[1] = vec![vec![0.5, 0.3]; 4];
        let m = matrix(one, vec![5, 10]);
        let c = count_significant_pairs(&m, 0.05, SignificanceTest::TTest).unwrap();
        assert_eq!(c.significant, 2);

        let mut single = vec![vec![vec![0.5]; 4]; 2];
        single[1] = vec![vec![0.7]; 4];
        let m = matrix(single, vec![5]);
        assert_eq!(
            count_significant_pairs(&m, 0.05, SignificanceTest::TTest)
                .unwrap()
                .significant,
            1
        );
    }

    #[test]
    fn all_pairs_significant_is_140() {
        // 8 methods separated by constant offsets over 5 cutoffs
        let values: Vec<Vec<Vec<f64>>> = (0..8)
            .map(|m| {
                (0..6)
                    .map(|q| vec![0.1 * m as f64 + 0.01 * q as f64; 5])
                    .collect()
            })
            .collect();
        let m = matrix(values, vec![5, 10, 15, 20, 30]);
        let c = count_significant_pairs(&m, 0.05, SignificanceTest::TTest).unwrap();
        assert_eq!(
            c,
            SigCount {
                significant: 140,
                comparisons: 140
            }
        );
    }

    #[test]
    fn conflicts() {
        let sig: Vec<Vec<Vec<f64>>> = (0..8)
            .map(|m| {
                (0..6)
                    .map(|q| vec![0.1 * m as f64 + 0.01 * q as f64; 5])
                    .collect()
            })
            .collect();
        let flat = vec![vec![vec![0.5; 5]; 6]; 8];
        let a = matrix(sig.clone(), vec![5, 10, 15, 20, 30]);
        let b = matrix(flat, vec![5, 10, 15, 20, 30]);
        assert_eq!(
            count_conflicts(&a, &a, 0.05, SignificanceTest::TTest).unwrap(),
            0
        );
        assert_eq!(
            count_conflicts(&a, &b, 0.05, SignificanceTest::TTest).unwrap(),
            140
        );

        // equalize methods 0 and 1 at the first cutoff: exactly one comparison flips
        let mut flipped = sig;
        let first: Vec<f64> = flipped[0].iter().map(|ks| ks[0]).collect();
        for (q, v) in first.into_iter().enumerate() {
            flipped[1][q][0] = v;
        }
        let c = matrix(flipped, vec![5, 10, 15, 20, 30]);
        assert_eq!(
            count_conflicts(&a, &c, 0.05, SignificanceTest::TTest).unwrap(),
            1
        );

        let small = matrix(vec![vec![vec![0.5]; 6]; 8], vec![5]);
        assert!(count_conflicts(&a, &small, 0.05, SignificanceTest::TTest).is_err());
    }

    proptest! {
        #[test]
        fn ttest_symmetric(pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..20)) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let p1 = paired_ttest(&x, &y).unwrap();
            let p2 = paired_ttest(&y, &x).unwrap();
            prop_assert!((p1 - p2).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&p1));
        }
    }
}
