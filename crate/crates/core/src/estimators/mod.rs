//! Sample covariance and differential-entropy estimation from finite data.
//!
//! The entropy estimators are nearest-neighbor (Kozachenko-Leonenko) by
//! default, with the conditional and mutual-information variants sharing the
//! joint-space neighbor radius across the marginal terms (the
//! Kraskov-Stögbauer-Grassberger construction) so that their biases largely
//! cancel. A histogram plug-in estimator is available as a fallback.
//!
//! Standard errors come from strided subsampling: the data is split into
//! `folds` interleaved subsets, each subset is estimated independently, and
//! the spread of those estimates is scaled back to the full sample size.

mod kdtree;

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::Covariance2;
use crate::simulator::Quadrature;
use kdtree::KdTree2;

pub const DEFAULT_NEIGHBORS: usize = 4;
pub const DEFAULT_FOLDS: usize = 10;

/// Relative jitter magnitude (in units of the sample standard deviation)
/// applied when exact duplicates are present.
pub const JITTER_SCALE: f64 = 1e-12;
const JITTER_SEED: u64 = 0x6a09_e667_f3bc_c908;
/// Above this fraction of duplicated values the data is rejected outright.
const MAX_DUPLICATE_FRACTION: f64 = 0.01;
/// `det(K) / (var_a var_b)` below which (A, B) is treated as a line.
const COLLINEAR_TOL: f64 = 1e-12;

/// Paired (Alice, Bob) quadrature outcomes in shot-noise units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    a: Vec<f64>,
    b: Vec<f64>,
    /// `None` for data pooled across both quadratures.
    label: Option<Quadrature>,
}

impl SampleSet {
    pub fn new(a: Vec<f64>, b: Vec<f64>, label: Option<Quadrature>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Configuration(format!(
                "sample columns differ in length: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        if a.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: a.len(),
            });
        }
        if let Some(i) = a.iter().chain(&b).position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample value at position {i}")));
        }
        Ok(SampleSet { a, b, label })
    }

    pub fn from_pairs(pairs: &[(f64, f64)], label: Option<Quadrature>) -> Result<Self> {
        let (a, b) = pairs.iter().copied().unzip();
        SampleSet::new(a, b, label)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn alice(&self) -> &[f64] {
        &self.a
    }

    pub fn bob(&self) -> &[f64] {
        &self.b
    }

    pub fn label(&self) -> Option<Quadrature> {
        self.label
    }

    /// Adds `(da, db)` to every pair.
    pub fn translated(&self, da: f64, db: f64) -> SampleSet {
        SampleSet {
            a: self.a.iter().map(|x| x + da).collect(),
            b: self.b.iter().map(|x| x + db).collect(),
            label: self.label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Knn,
    Histogram,
}

/// A differential entropy (or information) estimate in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    /// Infinite when there are too few samples to subsample.
    pub std_error: f64,
    pub estimator: EstimatorKind,
    pub sample_count: usize,
}

/// Which entropy estimator to run and with what settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EntropyMethod {
    Knn { k: usize },
    /// `bins = None` picks the Freedman-Diaconis width.
    Histogram { bins: Option<usize> },
}

impl Default for EntropyMethod {
    fn default() -> Self {
        EntropyMethod::Knn {
            k: DEFAULT_NEIGHBORS,
        }
    }
}

impl EntropyMethod {
    fn kind(&self) -> EstimatorKind {
        match self {
            EntropyMethod::Knn { .. } => EstimatorKind::Knn,
            EntropyMethod::Histogram { .. } => EstimatorKind::Histogram,
        }
    }

    fn min_samples(&self) -> usize {
        match *self {
            EntropyMethod::Knn { k } => k + 1,
            EntropyMethod::Histogram { .. } => 2,
        }
    }
}

/// Streaming accumulator for a 2x2 covariance (Welford updates), usable on
/// data too large to hold in memory.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CovarianceAccumulator {
    count: u64,
    mean_a: f64,
    mean_b: f64,
    m2_a: f64,
    m2_b: f64,
    c_ab: f64,
}

impl CovarianceAccumulator {
    pub fn push(&mut self, a: f64, b: f64) {
        self.count += 1;
        let n = self.count as f64;
        let da = a - self.mean_a;
        self.mean_a += da / n;
        let db = b - self.mean_b;
        self.mean_b += db / n;
        self.m2_a += da * (a - self.mean_a);
        self.m2_b += db * (b - self.mean_b);
        self.c_ab += da * (b - self.mean_b);
    }

    /// Combines two accumulators (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &CovarianceAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (n1, n2) = (self.count as f64, other.count as f64);
        let n = n1 + n2;
        let da = other.mean_a - self.mean_a;
        let db = other.mean_b - self.mean_b;
        self.m2_a += other.m2_a + da * da * n1 * n2 / n;
        self.m2_b += other.m2_b + db * db * n1 * n2 / n;
        self.c_ab += other.c_ab + da * db * n1 * n2 / n;
        self.mean_a += da * n2 / n;
        self.mean_b += db * n2 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn means(&self) -> (f64, f64) {
        (self.mean_a, self.mean_b)
    }

    /// Population-normalized, mean-subtracted covariance, projected onto the
    /// positive semidefinite cone if rounding pushed it just outside.
    pub fn covariance(&self) -> Result<Covariance2> {
        if self.count < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: self.count as usize,
            });
        }
        let n = self.count as f64;
        let var_a = (self.m2_a / n).max(0.0);
        let var_b = (self.m2_b / n).max(0.0);
        let bound = (var_a * var_b).sqrt();
        let cov_ab = (self.c_ab / n).clamp(-bound, bound);
        Covariance2::new(var_a, var_b, cov_ab)
    }
}

/// Sample covariance after subtracting sample means, population-normalized.
pub fn estimate_covariance(s: &SampleSet) -> Result<Covariance2> {
    let n = s.len() as f64;
    let mean_a = s.a.iter().sum::<f64>() / n;
    let mean_b = s.b.iter().sum::<f64>() / n;
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (&a, &b) in s.a.iter().zip(&s.b) {
        let (da, db) = (a - mean_a, b - mean_b);
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    let var_a = saa / n;
    let var_b = sbb / n;
    let bound = (var_a * var_b).sqrt();
    Covariance2::new(var_a, var_b, (sab / n).clamp(-bound, bound))
}

/// Kozachenko-Leonenko estimate of the differential entropy of `values`, in bits.
pub fn knn_differential_entropy(values: &[f64], k: usize) -> Result<EntropyEstimate> {
    differential_entropy(values, EntropyMethod::Knn { k })
}

pub fn differential_entropy(values: &[f64], method: EntropyMethod) -> Result<EntropyEstimate> {
    check_count(values.len(), &method)?;
    if let Some(i) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite sample value at position {i}")));
    }
    let values = prepare_1d(values)?;
    let point = |v: &[f64]| match method {
        EntropyMethod::Knn { k } => knn_entropy_1d(v, k),
        EntropyMethod::Histogram { bins } => histogram_entropy_1d(v, bins),
    };
    let value = point(&values)?;
    let std_error = fold_std_error(values.len(), &method, |idx| {
        let sub: Vec<f64> = idx.map(|i| values[i]).collect();
        point(&sub)
    })?;
    Ok(EntropyEstimate {
        value,
        std_error,
        estimator: method.kind(),
        sample_count: values.len(),
    })
}

/// `H(B|A) = H(A,B) - H(A)` in bits.
pub fn conditional_entropy_estimate(s: &SampleSet, k: usize) -> Result<EntropyEstimate> {
    conditional_entropy(s, EntropyMethod::Knn { k })
}

pub fn conditional_entropy(s: &SampleSet, method: EntropyMethod) -> Result<EntropyEstimate> {
    joint_estimate(s, method, JointQuantity::ConditionalEntropy)
}

/// `I(A;B) = H(B) - H(B|A)` in bits.
pub fn mutual_information_estimate(s: &SampleSet, k: usize) -> Result<EntropyEstimate> {
    mutual_information(s, EntropyMethod::Knn { k })
}

pub fn mutual_information(s: &SampleSet, method: EntropyMethod) -> Result<EntropyEstimate> {
    joint_estimate(s, method, JointQuantity::MutualInformation)
}

#[derive(Debug, Clone, Copy)]
enum JointQuantity {
    ConditionalEntropy,
    MutualInformation,
}

fn joint_estimate(s: &SampleSet, method: EntropyMethod, what: JointQuantity) -> Result<EntropyEstimate> {
    check_count(s.len(), &method)?;
    let k = estimate_covariance(s)?;
    if k.var_a == 0.0 || k.var_b == 0.0 {
        return Err(Error::DegenerateData("a sample column is constant".into()));
    }
    if k.determinant() <= COLLINEAR_TOL * k.var_a * k.var_b {
        return Err(Error::DegenerateData(
            "B is an exact linear function of A: zero conditional spread".into(),
        ));
    }
    let points = prepare_2d(s)?;
    let point = |p: &[[f64; 2]]| match (method, what) {
        (EntropyMethod::Knn { k }, JointQuantity::ConditionalEntropy) => {
            ksg_terms(p, k).map(|t| t.conditional_entropy())
        }
        (EntropyMethod::Knn { k }, JointQuantity::MutualInformation) => {
            ksg_terms(p, k).map(|t| t.mutual_information())
        }
        (EntropyMethod::Histogram { bins }, JointQuantity::ConditionalEntropy) => {
            histogram_conditional_entropy(p, bins)
        }
        (EntropyMethod::Histogram { bins }, JointQuantity::MutualInformation) => {
            let b: Vec<f64> = p.iter().map(|x| x[1]).collect();
            Ok(histogram_entropy_1d(&b, bins)? - histogram_conditional_entropy(p, bins)?)
        }
    };
    let value = point(&points)?;
    let std_error = fold_std_error(points.len(), &method, |idx| {
        let sub: Vec<[f64; 2]> = idx.map(|i| points[i]).collect();
        point(&sub)
    })?;
    Ok(EntropyEstimate {
        value,
        std_error,
        estimator: method.kind(),
        sample_count: points.len(),
    })
}

fn check_count(count: usize, method: &EntropyMethod) -> Result<()> {
    if let EntropyMethod::Knn { k } = method {
        if *k == 0 {
            return Err(Error::Configuration("neighbor order k must be at least 1".into()));
        }
    }
    let needed = method.min_samples();
    if count < needed {
        return Err(Error::InsufficientData { needed, got: count });
    }
    Ok(())
}

/// Subsampling standard error with strided folds `i % folds`.
fn fold_std_error<F>(count: usize, method: &EntropyMethod, estimate: F) -> Result<f64>
where
    F: Fn(std::iter::StepBy<std::ops::Range<usize>>) -> Result<f64> + Sync,
{
    let per_fold = 2 * method.min_samples().max(5);
    let folds = (count / per_fold).min(DEFAULT_FOLDS);
    if folds < 2 {
        return Ok(f64::INFINITY);
    }
    let values: Vec<f64> = (0..folds)
        .into_par_iter()
        .map(|f| estimate((f..count).step_by(folds)))
        .collect::<Result<_>>()?;
    let m = folds as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    // each fold holds count/folds points: its variance is ~folds times the full-sample one
    Ok((var / m).sqrt())
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn jitter_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(JITTER_SEED)
}

/// Rejects duplicate-heavy data and jitters data with a few duplicates.
fn prepare_1d(values: &[f64]) -> Result<Vec<f64>> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let dups = duplicated_count(&sorted, |a, b| a == b);
    if dups == 0 {
        return Ok(values.to_vec());
    }
    check_duplicates(dups, values.len())?;
    let scale = JITTER_SCALE * std_dev(values);
    let mut rng = jitter_rng();
    Ok(values
        .iter()
        .map(|&x| x + scale * rng.random_range(-1.0..1.0))
        .collect())
}

fn prepare_2d(s: &SampleSet) -> Result<Vec<[f64; 2]>> {
    let points: Vec<[f64; 2]> = s.a.iter().zip(&s.b).map(|(&a, &b)| [a, b]).collect();
    let mut sorted = points.clone();
    sorted.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
    let dups = duplicated_count(&sorted, |p, q| p == q);
    if dups == 0 {
        return Ok(points);
    }
    check_duplicates(dups, points.len())?;
    let sa = JITTER_SCALE * std_dev(&s.a);
    let sb = JITTER_SCALE * std_dev(&s.b);
    let mut rng = jitter_rng();
    Ok(points
        .into_iter()
        .map(|[a, b]| [a + sa * rng.random_range(-1.0..1.0), b + sb * rng.random_range(-1.0..1.0)])
        .collect())
}

/// Number of entries equal to at least one other entry of a sorted slice.
fn duplicated_count<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> usize {
    let mut count = 0;
    let mut run = 1;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            if run > 1 {
                count += run;
            }
            run = 1;
        }
    }
    if run > 1 {
        count += run;
    }
    count
}

fn check_duplicates(dups: usize, total: usize) -> Result<()> {
    let frac = dups as f64 / total as f64;
    if frac > MAX_DUPLICATE_FRACTION {
        return Err(Error::DegenerateData(format!(
            "{:.1}% of samples are exact duplicates; nearest-neighbor distances vanish",
            100.0 * frac
        )));
    }
    Ok(())
}

fn check_distances(eps: &[f64]) -> Result<()> {
    if eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::DegenerateData(
            "zero nearest-neighbor distance after jitter".into(),
        ));
    }
    Ok(())
}

/// One-dimensional Kozachenko-Leonenko estimate in bits:
/// `psi(N) - psi(k) + ln 2 + <ln eps_i>` nats, `eps_i` the k-th neighbor distance.
fn knn_entropy_1d(values: &[f64], k: usize) -> Result<f64> {
    let n = values.len();
    if n < k + 1 {
        return Err(Error::InsufficientData { needed: k + 1, got: n });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let eps: Vec<f64> = (0..n)
        .map(|i| {
            let (mut l, mut r) = (i, i);
            let mut d = 0.0;
            for _ in 0..k {
                let dl = if l > 0 { sorted[i] - sorted[l - 1] } else { f64::INFINITY };
                let dr = if r + 1 < n { sorted[r + 1] - sorted[i] } else { f64::INFINITY };
                if dl <= dr {
                    l -= 1;
                    d = dl;
                } else {
                    r += 1;
                    d = dr;
                }
            }
            d
        })
        .collect();
    check_distances(&eps)?;
    let mean_log = eps.iter().map(|e| e.ln()).sum::<f64>() / n as f64;
    Ok((digamma(n as f64) - digamma(k as f64) + LN_2 + mean_log) / LN_2)
}

/// Per-sample averages shared by the joint-space estimators.
struct KsgTerms {
    n: f64,
    k: f64,
    mean_log_eps: f64,
    mean_psi_na: f64,
    mean_psi_nb: f64,
}

impl KsgTerms {
    /// `H(A,B) - H(A)` with both terms evaluated at the joint radius:
    /// `-psi(k) + <psi(n_a + 1)> + ln 2 + <ln eps>`.
    fn conditional_entropy(&self) -> f64 {
        (-digamma(self.k) + self.mean_psi_na + LN_2 + self.mean_log_eps) / LN_2
    }

    /// `H(B) - H(B|A) = psi(N) + psi(k) - <psi(n_a + 1)> - <psi(n_b + 1)>`.
    fn mutual_information(&self) -> f64 {
        (digamma(self.n) + digamma(self.k) - self.mean_psi_na - self.mean_psi_nb) / LN_2
    }
}

fn ksg_terms(points: &[[f64; 2]], k: usize) -> Result<KsgTerms> {
    let n = points.len();
    if n < k + 1 {
        return Err(Error::InsufficientData { needed: k + 1, got: n });
    }
    let tree = KdTree2::build(points);
    let eps: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(i, &p)| tree.kth_distance(p, i as u32, k))
        .collect();
    check_distances(&eps)?;

    let mut sa: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let mut sb: Vec<f64> = points.iter().map(|p| p[1]).collect();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    // Neighbors strictly inside the joint radius along each marginal. The
    // radius shrinks by a relative 1e-9 so that the neighbor sitting exactly
    // on it is excluded regardless of rounding in `x +- e`.
    let strict_count = |sorted: &[f64], x: f64, e: f64| {
        let e = e * (1.0 - 1e-9);
        let lo = sorted.partition_point(|&v| v <= x - e);
        let hi = sorted.partition_point(|&v| v < x + e);
        (hi - lo).saturating_sub(1)
    };
    let (sum_log, sum_na, sum_nb) = points
        .par_iter()
        .zip(eps.par_iter())
        .map(|(p, &e)| {
            let na = strict_count(&sa, p[0], e);
            let nb = strict_count(&sb, p[1], e);
            (e.ln(), digamma(na as f64 + 1.0), digamma(nb as f64 + 1.0))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0, 0.0), |acc, t| (acc.0 + t.0, acc.1 + t.1, acc.2 + t.2));
    let nf = n as f64;
    Ok(KsgTerms {
        n: nf,
        k: k as f64,
        mean_log_eps: sum_log / nf,
        mean_psi_na: sum_na / nf,
        mean_psi_nb: sum_nb / nf,
    })
}

/// Freedman-Diaconis width `2 IQR n^(-1/3)`, generalized to
/// `2 IQR n^(-1/(2 + dims))` for the axes of a `dims`-dimensional grid.
fn freedman_diaconis_width(sorted: &[f64], dims: usize) -> f64 {
    let n = sorted.len();
    let q = |p: f64| sorted[((n - 1) as f64 * p).round() as usize];
    let iqr = q(0.75) - q(0.25);
    let width = 2.0 * iqr * (n as f64).powf(-1.0 / (2.0 + dims as f64));
    if width > 0.0 {
        width
    } else {
        (sorted[n - 1] - sorted[0]) / (n as f64).sqrt()
    }
}

fn bin_layout(values: &[f64], bins: Option<usize>, dims: usize) -> Result<(f64, f64, usize)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    if !(max > min) {
        return Err(Error::DegenerateData("constant data has no differential entropy".into()));
    }
    let count = match bins {
        Some(0) => return Err(Error::Configuration("histogram needs at least one bin".into())),
        Some(b) => b,
        None => (((max - min) / freedman_diaconis_width(&sorted, dims)).ceil() as usize).clamp(1, 1 << 16),
    };
    Ok((min, (max - min) / count as f64, count))
}

fn bin_index(x: f64, min: f64, width: f64, count: usize) -> usize {
    (((x - min) / width) as usize).min(count - 1)
}

/// Plug-in histogram estimate `-sum p_i log2(p_i / width)`.
fn histogram_entropy_1d(values: &[f64], bins: Option<usize>) -> Result<f64> {
    let (min, width, count) = bin_layout(values, bins, 1)?;
    let mut hist = vec![0usize; count];
    for &x in values {
        hist[bin_index(x, min, width, count)] += 1;
    }
    let n = values.len() as f64;
    Ok(hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * (p / width).log2()
        })
        .sum())
}

/// Plug-in `H(A,B) - H(A)` on a rectangular grid.
fn histogram_conditional_entropy(points: &[[f64; 2]], bins: Option<usize>) -> Result<f64> {
    let a: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let b: Vec<f64> = points.iter().map(|p| p[1]).collect();
    let (min_a, wa, ca) = bin_layout(&a, bins, 2)?;
    let (min_b, wb, cb) = bin_layout(&b, bins, 2)?;
    let mut joint = std::collections::HashMap::<(usize, usize), usize>::new();
    let mut marg = vec![0usize; ca];
    for p in points {
        let ia = bin_index(p[0], min_a, wa, ca);
        let ib = bin_index(p[1], min_b, wb, cb);
        *joint.entry((ia, ib)).or_default() += 1;
        marg[ia] += 1;
    }
    let n = points.len() as f64;
    let h_joint: f64 = joint
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * (p / (wa * wb)).log2()
        })
        .sum();
    let h_a: f64 = marg
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * (p / wa).log2()
        })
        .sum();
    Ok(h_joint - h_a)
}

/// Digamma function for positive arguments: recurrence up to x >= 6, then
/// the asymptotic series.
pub(crate) fn digamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 12.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + x.ln() - 0.5 * inv
        - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{gaussian_conditional_entropy, gaussian_entropy};
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn bivariate(n: usize, k: Covariance2, seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sa = k.var_a.sqrt();
        let slope = k.cov_ab / k.var_a;
        let resid = (k.var_b - k.cov_ab * k.cov_ab / k.var_a).sqrt();
        let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let x = sa * z0;
            let z: f64 = StandardNormal.sample(&mut rng);
            a.push(x);
            b.push(slope * x + resid * z);
        }
        SampleSet::new(a, b, None).unwrap()
    }

    #[test]
    fn digamma_reference_values() {
        assert_relative_eq!(digamma(1.0), -0.577_215_664_901_532_9, epsilon = 1e-13);
        assert_relative_eq!(digamma(0.5), -1.963_510_026_021_423_5, epsilon = 1e-13);
        assert_relative_eq!(digamma(10.0), 2.251_752_589_066_721, epsilon = 1e-13);
        // psi(n + 1) = psi(n) + 1/n
        for n in 1..50 {
            let x = n as f64;
            assert_relative_eq!(digamma(x + 1.0), digamma(x) + 1.0 / x, epsilon = 1e-12);
        }
    }

    #[test]
    fn covariance_small_examples() {
        let s = SampleSet::from_pairs(&[(1.0, 1.0), (-1.0, -1.0)], None).unwrap();
        assert_eq!(estimate_covariance(&s).unwrap(), Covariance2 { var_a: 1.0, var_b: 1.0, cov_ab: 1.0 });
        let s = SampleSet::from_pairs(&[(3.0, -2.0); 5], None).unwrap();
        assert_eq!(estimate_covariance(&s).unwrap(), Covariance2 { var_a: 0.0, var_b: 0.0, cov_ab: 0.0 });
        assert!(matches!(
            SampleSet::from_pairs(&[(1.0, 1.0)], None),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn accumulator_matches_batch() {
        let truth = Covariance2::new(2.0, 3.0, 1.2).unwrap();
        let s = bivariate(5000, truth, 3).translated(4.0, -7.0);
        let batch = estimate_covariance(&s).unwrap();
        let mut left = CovarianceAccumulator::default();
        let mut right = CovarianceAccumulator::default();
        for (i, (&a, &b)) in s.alice().iter().zip(s.bob()).enumerate() {
            if i < 1234 { left.push(a, b) } else { right.push(a, b) }
        }
        left.merge(&right);
        let k = left.covariance().unwrap();
        assert_relative_eq!(k.var_a, batch.var_a, max_relative = 1e-10);
        assert_relative_eq!(k.var_b, batch.var_b, max_relative = 1e-10);
        assert_relative_eq!(k.cov_ab, batch.cov_ab, max_relative = 1e-10);
    }

    #[test]
    fn knn_gaussian_close_to_closed_form() {
        let x = normals(200_000, 11);
        let est = knn_differential_entropy(&x, 4).unwrap();
        let truth = gaussian_entropy(1.0).unwrap();
        assert!((est.value - truth).abs() < 4.0 * est.std_error + 1e-3, "{est:?}");
        assert!(est.std_error > 0.0 && est.std_error < 0.01);
    }

    #[test]
    fn knn_scaling_adds_one_bit() {
        let x = normals(50_000, 5);
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let h1 = knn_differential_entropy(&x, 4).unwrap();
        let h2 = knn_differential_entropy(&doubled, 4).unwrap();
        // identical neighbor structure, so the shift is exact up to rounding
        assert_relative_eq!(h2.value - h1.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn knn_error_paths() {
        assert!(matches!(knn_differential_entropy(&[1.0, 2.0], 4), Err(Error::InsufficientData { .. })));
        assert!(matches!(knn_differential_entropy(&[1.0, 2.0, 3.0], 0), Err(Error::Configuration(_))));
        let constant = vec![0.5; 100];
        assert!(matches!(knn_differential_entropy(&constant, 4), Err(Error::DegenerateData(_))));
        let mut x = normals(10_000, 1);
        x[10] = x[11];
        // a single duplicate pair is jittered, not rejected
        assert!(knn_differential_entropy(&x, 4).is_ok());
    }

    #[test]
    fn conditional_entropy_gaussian() {
        let k = Covariance2::new(2.0, 2.0, 1.0).unwrap();
        let s = bivariate(100_000, k, 21);
        let est = conditional_entropy_estimate(&s, 4).unwrap();
        let truth = gaussian_conditional_entropy(&k).unwrap();
        assert!((est.value - truth).abs() < 4.0 * est.std_error + 2e-3, "{est:?} vs {truth}");
    }

    #[test]
    fn conditional_entropy_independent_is_marginal() {
        let k = Covariance2::new(1.0, 3.0, 0.0).unwrap();
        let s = bivariate(100_000, k, 8);
        let c = conditional_entropy_estimate(&s, 4).unwrap();
        let m = knn_differential_entropy(s.bob(), 4).unwrap();
        assert!((c.value - m.value).abs() < 4.0 * (c.std_error + m.std_error), "{c:?} {m:?}");
    }

    #[test]
    fn conditional_entropy_rejects_identical_columns() {
        let a = normals(1000, 2);
        let s = SampleSet::new(a.clone(), a, None).unwrap();
        assert!(matches!(conditional_entropy_estimate(&s, 4), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn mutual_information_matches_gaussian_formula() {
        for (rho, seed) in [(0.0, 1), (0.6, 2), (0.95, 3)] {
            let k = Covariance2::new(1.0, 1.0, rho).unwrap();
            let s = bivariate(100_000, k, seed);
            let mi = mutual_information_estimate(&s, 4).unwrap();
            let truth = -0.5 * (1.0f64 - rho * rho).log2();
            assert!((mi.value - truth).abs() < 4.0 * mi.std_error + 2e-3, "rho={rho}: {mi:?} vs {truth}");
        }
    }

    #[test]
    fn translation_invariance() {
        let k = Covariance2::new(1.0, 2.0, 0.7).unwrap();
        let s = bivariate(20_000, k, 4);
        let shifted = s.translated(0.25, -0.5);
        let h1 = conditional_entropy_estimate(&s, 4).unwrap();
        let h2 = conditional_entropy_estimate(&shifted, 4).unwrap();
        assert!((h1.value - h2.value).abs() < 1e-6);
    }

    #[test]
    fn histogram_fallback_is_reasonable() {
        let x = normals(200_000, 9);
        let h = differential_entropy(&x, EntropyMethod::Histogram { bins: None }).unwrap();
        assert!((h.value - gaussian_entropy(1.0).unwrap()).abs() < 0.02, "{h:?}");
        assert_eq!(h.estimator, EstimatorKind::Histogram);
        let k = Covariance2::new(2.0, 2.0, 1.0).unwrap();
        let s = bivariate(200_000, k, 10);
        let c = conditional_entropy(&s, EntropyMethod::Histogram { bins: None }).unwrap();
        assert!((c.value - gaussian_conditional_entropy(&k).unwrap()).abs() < 0.05, "{c:?}");
    }

    #[test]
    fn estimates_are_deterministic() {
        let k = Covariance2::new(1.0, 1.0, 0.5).unwrap();
        let s = bivariate(10_000, k, 77);
        assert_eq!(
            conditional_entropy_estimate(&s, 4).unwrap(),
            conditional_entropy_estimate(&s, 4).unwrap()
        );
    }
}
