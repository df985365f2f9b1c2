//! Exact Shannon-entropy checks on small discrete joint distributions of
//! block vectors `(A_1..A_n, B_1..B_n)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::InequalityReport;
use crate::error::{Error, Result};

/// Largest probability table enumerated exactly.
pub const MAX_TABLE_ENTRIES: usize = 1 << 20;
/// Exact checks tolerate this much negative slack, in bits.
pub const EXACT_TOLERANCE: f64 = 1e-9;
const NORMALIZATION_TOL: f64 = 1e-12;

/// Joint law of `n` (Alice, Bob) symbol pairs, stored as a dense table.
///
/// Variables are ordered `A_1..A_n, B_1..B_n`; the table is row-major with
/// `A_1` the slowest index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    alphabet_a: Vec<usize>,
    alphabet_b: Vec<usize>,
    probs: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(alphabet_a: Vec<usize>, alphabet_b: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if alphabet_a.is_empty() || alphabet_a.len() != alphabet_b.len() {
            return Err(Error::Configuration(format!(
                "need the same positive number of A and B components, got {} and {}",
                alphabet_a.len(),
                alphabet_b.len()
            )));
        }
        if alphabet_a.iter().chain(&alphabet_b).any(|&s| s == 0) {
            return Err(Error::Configuration("alphabet sizes must be positive".into()));
        }
        let size = table_size(&alphabet_a, &alphabet_b)?;
        if probs.len() != size {
            return Err(Error::Configuration(format!(
                "table holds {} entries, alphabets require {size}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::Configuration(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Configuration(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(DiscreteJoint {
            alphabet_a,
            alphabet_b,
            probs,
        })
    }

    /// Joint law of independent pulses, each given as an `|A_i| x |B_i|` table.
    pub fn product(pulses: &[(usize, usize, Vec<f64>)]) -> Result<Self> {
        let alphabet_a: Vec<usize> = pulses.iter().map(|p| p.0).collect();
        let alphabet_b: Vec<usize> = pulses.iter().map(|p| p.1).collect();
        let size = table_size(&alphabet_a, &alphabet_b)?;
        for (sa, sb, t) in pulses {
            if t.len() != sa * sb {
                return Err(Error::Configuration("pulse table has the wrong size".into()));
            }
        }
        let n = pulses.len();
        let shape = shape_of(&alphabet_a, &alphabet_b);
        let mut probs = vec![0.0; size];
        let mut digits = vec![0usize; 2 * n];
        for (idx, p) in probs.iter_mut().enumerate() {
            decode(idx, &shape, &mut digits);
            *p = (0..n)
                .map(|i| pulses[i].2[digits[i] * pulses[i].1 + digits[n + i]])
                .product();
        }
        DiscreteJoint::new(alphabet_a, alphabet_b, probs)
    }

    /// Uniform draw from the probability simplex (flat Dirichlet).
    pub fn random(n: usize, alphabet: usize, rng: &mut impl Rng) -> Result<Self> {
        let a = vec![alphabet; n];
        let size = table_size(&a, &a)?;
        let mut probs: Vec<f64> = (0..size).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        // renormalize once more so rounding stays inside the tolerance
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        DiscreteJoint::new(a.clone(), a, probs)
    }

    pub fn components(&self) -> usize {
        self.alphabet_a.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    fn shape(&self) -> Vec<usize> {
        shape_of(&self.alphabet_a, &self.alphabet_b)
    }

    fn a_var(&self, i: usize) -> usize {
        i
    }

    fn b_var(&self, i: usize) -> usize {
        self.components() + i
    }

    /// Entropy in bits of the marginal on `vars` (indices into the variable order).
    pub fn marginal_entropy(&self, vars: &[usize]) -> f64 {
        let shape = self.shape();
        let sizes: Vec<usize> = vars.iter().map(|&v| shape[v]).collect();
        let mut marginal = vec![0.0; sizes.iter().product()];
        let mut digits = vec![0usize; shape.len()];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            decode(idx, &shape, &mut digits);
            let m = vars
                .iter()
                .zip(&sizes)
                .fold(0, |acc, (&v, &s)| acc * s + digits[v]);
            marginal[m] += p;
        }
        entropy_bits(&marginal)
    }

    /// `H(X | Y)` for variable sets `x` and `y`.
    pub fn conditional_entropy(&self, x: &[usize], y: &[usize]) -> f64 {
        let joint: Vec<usize> = x.iter().chain(y).copied().collect();
        self.marginal_entropy(&joint) - self.marginal_entropy(y)
    }

    fn all_a(&self) -> Vec<usize> {
        (0..self.components()).map(|i| self.a_var(i)).collect()
    }

    fn all_b(&self) -> Vec<usize> {
        (0..self.components()).map(|i| self.b_var(i)).collect()
    }

    /// `H(B_vec | A_vec)`.
    pub fn block_conditional_entropy(&self) -> f64 {
        self.conditional_entropy(&self.all_b(), &self.all_a())
    }

    /// `H(B_i | A_i)`.
    pub fn pulse_conditional_entropy(&self, i: usize) -> f64 {
        self.conditional_entropy(&[self.b_var(i)], &[self.a_var(i)])
    }

    /// `(1/n) sum_i P(A_i = a, B_i = b)`, row-major `|A| x |B|`.
    pub fn averaged_pair(&self) -> Result<Vec<f64>> {
        let (sa, sb) = (self.alphabet_a[0], self.alphabet_b[0]);
        if self.alphabet_a.iter().any(|&s| s != sa) || self.alphabet_b.iter().any(|&s| s != sb) {
            return Err(Error::Configuration(
                "averaging over pulses needs one shared alphabet per party".into(),
            ));
        }
        let n = self.components();
        let shape = self.shape();
        let mut pair = vec![0.0; sa * sb];
        let mut digits = vec![0usize; shape.len()];
        for (idx, &p) in self.probs.iter().enumerate() {
            decode(idx, &shape, &mut digits);
            for i in 0..n {
                pair[digits[i] * sb + digits[n + i]] += p / n as f64;
            }
        }
        Ok(pair)
    }
}

fn shape_of(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().chain(b).copied().collect()
}

fn table_size(a: &[usize], b: &[usize]) -> Result<usize> {
    let size = a
        .iter()
        .chain(b)
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .filter(|&s| s <= MAX_TABLE_ENTRIES);
    size.ok_or_else(|| {
        Error::Capacity(format!(
            "table for alphabets {a:?} x {b:?} exceeds {MAX_TABLE_ENTRIES} entries"
        ))
    })
}

fn decode(mut idx: usize, shape: &[usize], digits: &mut [usize]) {
    for (d, &s) in digits.iter_mut().zip(shape).rev() {
        *d = idx % s;
        idx /= s;
    }
}

fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// Conditional entropy `H(B|A)` of a row-major `|A| x |B|` pair table.
pub fn pair_conditional_entropy(pair: &[f64], size_b: usize) -> f64 {
    let marg_a: Vec<f64> = pair.chunks(size_b).map(|row| row.iter().sum()).collect();
    entropy_bits(pair) - entropy_bits(&marg_a)
}

/// The three links from the block conditional entropy to per-pulse terms:
/// `H(B|A) <= sum_i H(B_i|A)`, `H(B_i|A) <= H(B_i|A_i)` for each `i`, and
/// their composition `H(B|A) <= sum_i H(B_i|A_i)`.
pub fn check_subadditivity_chain(j: &DiscreteJoint) -> Vec<InequalityReport> {
    let n = j.components();
    let all_a = j.all_a();
    let block = j.block_conditional_entropy();
    let given_block: Vec<f64> = (0..n)
        .map(|i| j.conditional_entropy(&[j.b_var(i)], &all_a))
        .collect();
    let per_pulse: Vec<f64> = (0..n).map(|i| j.pulse_conditional_entropy(i)).collect();

    let mut reports = vec![InequalityReport::new(
        "conditional-subadditivity",
        block,
        given_block.iter().sum(),
        EXACT_TOLERANCE,
    )];
    for i in 0..n {
        reports.push(InequalityReport::new(
            format!("conditioning-reduces-entropy[{i}]"),
            given_block[i],
            per_pulse[i],
            EXACT_TOLERANCE,
        ));
    }
    reports.push(InequalityReport::new(
        "individual-pulse-bound",
        block,
        per_pulse.iter().sum(),
        EXACT_TOLERANCE,
    ));
    reports
}

/// `H(B|A) <= n H(B|A)_avg`, where the right side uses the pulse-averaged pair law.
pub fn check_mixture_lemma(j: &DiscreteJoint) -> Result<InequalityReport> {
    let pair = j.averaged_pair()?;
    let averaged = pair_conditional_entropy(&pair, j.alphabet_b[0]);
    Ok(InequalityReport::new(
        "block-vs-averaged-pair",
        j.block_conditional_entropy(),
        j.components() as f64 * averaged,
        EXACT_TOLERANCE,
    ))
}

/// The intermediate step of the mixture argument: `(1/n) sum_i H(B_i|A_i)`,
/// i.e. `H(B|A, i)` for a uniformly drawn pulse index, is at most the
/// averaged pair's `H(B|A)`.
pub fn check_pulse_index_conditioning(j: &DiscreteJoint) -> Result<InequalityReport> {
    let pair = j.averaged_pair()?;
    let n = j.components();
    let mean: f64 = (0..n).map(|i| j.pulse_conditional_entropy(i)).sum::<f64>() / n as f64;
    Ok(InequalityReport::new(
        "pulse-index-conditioning",
        mean,
        pair_conditional_entropy(&pair, j.alphabet_b[0]),
        EXACT_TOLERANCE,
    ))
}
