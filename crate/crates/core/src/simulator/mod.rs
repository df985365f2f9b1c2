//! Monte Carlo model of the entanglement-based protocols.
//!
//! Alice holds one half of a two-mode squeezed vacuum and measures it
//! (homodyne, or heterodyne through a 50:50 splitter); the other half crosses
//! a lossy, noisy channel controlled by Eve before Bob's homodyne detection.
//! Eve is represented only by the classical noise she adds, whose shape may
//! be Gaussian or not. All variances are in shot-noise units (`n0 = 1`).
//!
//! Randomness is drawn from ChaCha8 with one stream per block, so blocks can
//! be generated on any number of threads and the output depends on the seed
//! alone.

mod record;

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::CovarianceAccumulator;
use crate::info::{Covariance2, ProtocolKind};

pub use record::{BlockRecord, PulseEntry, RecordFormat, RecordHeader, RecordWriter};

/// Relative tolerance for matching a noise shape's variance to `t * eps`.
const SHAPE_VARIANCE_TOL: f64 = 1e-9;
/// Blocks generated per parallel batch are sized to hold about this many pulses.
const BATCH_PULSES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    #[serde(rename = "q")]
    Q,
    #[serde(rename = "p")]
    P,
}

impl Quadrature {
    pub fn as_str(&self) -> &'static str {
        match self {
            Quadrature::Q => "q",
            Quadrature::P => "p",
        }
    }

    fn random(rng: &mut impl Rng) -> Self {
        if rng.random::<bool>() {
            Quadrature::Q
        } else {
            Quadrature::P
        }
    }
}

impl FromStr for Quadrature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(Quadrature::Q),
            "p" => Ok(Quadrature::P),
            other => Err(Error::Parse(format!("quadrature label must be q or p, got '{other}'"))),
        }
    }
}

/// Two-mode squeezed vacuum with quadrature variance `v` on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EprSource {
    v: f64,
}

impl EprSource {
    pub fn new(v: f64) -> Result<Self> {
        if !(v >= 1.0) || !v.is_finite() {
            return Err(Error::Configuration(format!(
                "EPR variance must be at least one shot-noise unit, got {v}"
            )));
        }
        Ok(EprSource { v })
    }

    pub fn variance(&self) -> f64 {
        self.v
    }

    /// `sqrt(v^2 - 1)`: positive between the q quadratures, negative between the p's.
    pub fn correlation(&self) -> f64 {
        (self.v * self.v - 1.0).sqrt()
    }
}

/// Distribution of the excess noise Eve adds on top of the channel's vacuum noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseShape {
    Gaussian,
    /// Zero-mean mixture of two Gaussians.
    TwoComponentMixture { weights: [f64; 2], variances: [f64; 2] },
    /// Uniform on `[-halfwidth, halfwidth]`.
    Uniform { halfwidth: f64 },
    /// `+-magnitude` (equiprobable signs) with total probability
    /// `probability`, zero otherwise.
    DiscreteDisplacement { magnitude: f64, probability: f64 },
}

impl NoiseShape {
    pub fn uniform_matched(excess_variance: f64) -> Self {
        NoiseShape::Uniform {
            halfwidth: (3.0 * excess_variance).sqrt(),
        }
    }

    pub fn discrete_matched(excess_variance: f64, probability: f64) -> Self {
        NoiseShape::DiscreteDisplacement {
            magnitude: (excess_variance / probability).sqrt(),
            probability,
        }
    }

    /// Mixture with weights `(w, 1 - w)` whose second variance is `ratio`
    /// times the first.
    pub fn mixture_matched(excess_variance: f64, weight: f64, ratio: f64) -> Self {
        let first = excess_variance / (weight + (1.0 - weight) * ratio);
        NoiseShape::TwoComponentMixture {
            weights: [weight, 1.0 - weight],
            variances: [first, ratio * first],
        }
    }

    /// Variance implied by the shape's own parameters (`None` for Gaussian,
    /// which takes its variance from the channel).
    pub fn variance(&self) -> Option<f64> {
        match *self {
            NoiseShape::Gaussian => None,
            NoiseShape::TwoComponentMixture { weights, variances } => {
                Some(weights[0] * variances[0] + weights[1] * variances[1])
            }
            NoiseShape::Uniform { halfwidth } => Some(halfwidth * halfwidth / 3.0),
            NoiseShape::DiscreteDisplacement {
                magnitude,
                probability,
            } => Some(probability * magnitude * magnitude),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, NoiseShape::Gaussian)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Configuration(msg));
        match *self {
            NoiseShape::Gaussian => Ok(()),
            NoiseShape::TwoComponentMixture { weights, variances } => {
                if weights.iter().any(|w| !(*w >= 0.0)) || (weights[0] + weights[1] - 1.0).abs() > 1e-12 {
                    return bad(format!("mixture weights {weights:?} must be non-negative and sum to 1"));
                }
                if variances.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return bad(format!("mixture variances {variances:?} must be non-negative"));
                }
                Ok(())
            }
            NoiseShape::Uniform { halfwidth } => {
                if !(halfwidth >= 0.0) || !halfwidth.is_finite() {
                    return bad(format!("uniform half-width must be non-negative, got {halfwidth}"));
                }
                Ok(())
            }
            NoiseShape::DiscreteDisplacement {
                magnitude,
                probability,
            } => {
                if !(magnitude >= 0.0) || !magnitude.is_finite() || !(0.0..=1.0).contains(&probability) {
                    return bad(format!(
                        "discrete displacement needs magnitude >= 0 and probability in [0, 1], got ({magnitude}, {probability})"
                    ));
                }
                Ok(())
            }
        }
    }

    /// One draw of excess noise; `gaussian_std` is used by the Gaussian shape only.
    fn sample(&self, gaussian_std: f64, rng: &mut impl Rng) -> f64 {
        match *self {
            NoiseShape::Gaussian => gaussian_std * normal(rng),
            NoiseShape::TwoComponentMixture { weights, variances } => {
                let i = if rng.random::<f64>() < weights[0] { 0 } else { 1 };
                variances[i].sqrt() * normal(rng)
            }
            NoiseShape::Uniform { halfwidth } => {
                if halfwidth == 0.0 {
                    0.0
                } else {
                    rng.random_range(-halfwidth..halfwidth)
                }
            }
            NoiseShape::DiscreteDisplacement {
                magnitude,
                probability,
            } => {
                let u: f64 = rng.random();
                if u < 0.5 * probability {
                    magnitude
                } else if u < probability {
                    -magnitude
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for NoiseShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NoiseShape::Gaussian => write!(f, "gaussian"),
            NoiseShape::TwoComponentMixture { weights, variances } => write!(
                f,
                "mixture({},{},{},{})",
                weights[0], weights[1], variances[0], variances[1]
            ),
            NoiseShape::Uniform { halfwidth } => write!(f, "uniform({halfwidth})"),
            NoiseShape::DiscreteDisplacement {
                magnitude,
                probability,
            } => write!(f, "discrete({magnitude},{probability})"),
        }
    }
}

impl FromStr for NoiseShape {
    type Err = Error;

    /// Parses the `Display` form: `gaussian`, `mixture(w1,w2,v1,v2)`,
    /// `uniform(h)`, `discrete(d,p)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "gaussian" {
            return Ok(NoiseShape::Gaussian);
        }
        let err = || Error::Parse(format!("malformed noise shape '{s}'"));
        let open = s.find('(').ok_or_else(err)?;
        let body = s[open + 1..].strip_suffix(')').ok_or_else(err)?;
        let args: Vec<f64> = body
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| err()))
            .collect::<Result<_>>()?;
        match (&s[..open], args.as_slice()) {
            ("mixture", &[w1, w2, v1, v2]) => Ok(NoiseShape::TwoComponentMixture {
                weights: [w1, w2],
                variances: [v1, v2],
            }),
            ("uniform", &[h]) => Ok(NoiseShape::Uniform { halfwidth: h }),
            ("discrete", &[d, p]) => Ok(NoiseShape::DiscreteDisplacement {
                magnitude: d,
                probability: p,
            }),
            _ => Err(err()),
        }
    }
}

/// Lossy, noisy channel: `x_out = sqrt(t) x_in + vacuum(1 - t) + excess`, the
/// excess having variance `t * eps` (eps referred to the channel input).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub transmission: f64,
    pub excess_noise: f64,
    pub shape: NoiseShape,
    /// Correlation of the excess noise between pulses of one block; zero
    /// gives an individual attack.
    #[serde(default)]
    pub block_correlation: f64,
}

impl ChannelModel {
    pub fn new(transmission: f64, excess_noise: f64, shape: NoiseShape) -> Result<Self> {
        let ch = ChannelModel {
            transmission,
            excess_noise,
            shape,
            block_correlation: 0.0,
        };
        ch.validate()?;
        Ok(ch)
    }

    /// Lossless, noiseless channel.
    pub fn identity() -> Self {
        ChannelModel {
            transmission: 1.0,
            excess_noise: 0.0,
            shape: NoiseShape::Gaussian,
            block_correlation: 0.0,
        }
    }

    pub fn with_block_correlation(mut self, rho: f64) -> Result<Self> {
        self.block_correlation = rho;
        self.validate()?;
        Ok(self)
    }

    /// Excess-noise variance at Bob, `t * eps`.
    pub fn excess_variance(&self) -> f64 {
        self.transmission * self.excess_noise
    }

    /// Total added noise variance, `(1 - t) + t * eps`.
    pub fn added_noise_variance(&self) -> f64 {
        1.0 - self.transmission + self.excess_variance()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.transmission;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Configuration(format!("transmission must lie in (0, 1], got {t}")));
        }
        if !(self.excess_noise >= 0.0) || !self.excess_noise.is_finite() {
            return Err(Error::Configuration(format!(
                "excess noise must be non-negative, got {}",
                self.excess_noise
            )));
        }
        if !(0.0..=1.0).contains(&self.block_correlation) {
            return Err(Error::Configuration(format!(
                "block correlation must lie in [0, 1], got {}",
                self.block_correlation
            )));
        }
        self.shape.validate()?;
        if let Some(var) = self.shape.variance() {
            let target = self.excess_variance();
            if (var - target).abs() > SHAPE_VARIANCE_TOL * target.max(1.0) {
                return Err(Error::Configuration(format!(
                    "noise shape {} has variance {var}, channel declares t*eps = {target}",
                    self.shape
                )));
            }
        }
        Ok(())
    }
}

/// Classical quadrature values of one EPR pair before Alice's measurement
/// (`qa`, `pa`) and before the channel (`qb0`, `pb0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprPulse {
    pub qa: f64,
    pub pa: f64,
    pub qb0: f64,
    pub pb0: f64,
}

/// What Alice's detector reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AliceOutcome {
    Homodyne { value: f64, label: Quadrature },
    Heterodyne { q: f64, p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiftingMode {
    /// Independent random bases; mismatched pulses are discarded.
    RandomBasis,
    /// Bob waits for Alice's basis announcement, so every pulse is kept.
    QuantumMemory,
}

impl SiftingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SiftingMode::RandomBasis => "random_basis",
            SiftingMode::QuantumMemory => "quantum_memory",
        }
    }
}

impl FromStr for SiftingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_basis" | "random-basis" => Ok(SiftingMode::RandomBasis),
            "quantum_memory" | "quantum-memory" => Ok(SiftingMode::QuantumMemory),
            other => Err(Error::Parse(format!("unknown sifting mode '{other}'"))),
        }
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Samples the two-mode squeezed vacuum: variance `v` per quadrature,
/// `<qa qb0> = sqrt(v^2 - 1)`, `<pa pb0> = -sqrt(v^2 - 1)`.
pub fn simulate_epr_pulse(src: &EprSource, rng: &mut impl Rng) -> EprPulse {
    let v = src.v;
    let slope = src.correlation() / v;
    let resid = (1.0 / v).sqrt();
    let sv = v.sqrt();
    let qa = sv * normal(rng);
    let qb0 = slope * qa + resid * normal(rng);
    let pa = sv * normal(rng);
    let pb0 = -slope * pa + resid * normal(rng);
    EprPulse { qa, pa, qb0, pb0 }
}

/// Sends Bob's pair of quadratures through the channel.
pub fn apply_attack(b0: (f64, f64), ch: &ChannelModel, rng: &mut impl Rng) -> (f64, f64) {
    attack_with_shared(b0, ch, None, rng)
}

/// `shared` carries the block-wide excess-noise draws for correlated attacks;
/// `None` draws them fresh, which has the same single-pulse distribution.
fn attack_with_shared<R: Rng>(
    (qb0, pb0): (f64, f64),
    ch: &ChannelModel,
    shared: Option<(f64, f64)>,
    rng: &mut R,
) -> (f64, f64) {
    let t = ch.transmission;
    let vac = (1.0 - t).sqrt();
    let gstd = ch.excess_variance().sqrt();
    let rho = ch.block_correlation;
    let excess = |shared_draw: Option<f64>, rng: &mut R| {
        let own = ch.shape.sample(gstd, rng);
        if rho == 0.0 {
            return own;
        }
        let common = shared_draw.unwrap_or_else(|| ch.shape.sample(gstd, rng));
        rho.sqrt() * common + (1.0 - rho).sqrt() * own
    };
    let nq = vac * normal(rng) + excess(shared.map(|s| s.0), rng);
    let np = vac * normal(rng) + excess(shared.map(|s| s.1), rng);
    (t.sqrt() * qb0 + nq, t.sqrt() * pb0 + np)
}

/// Alice's detection. Homodyne returns the chosen quadrature exactly;
/// heterodyne mixes the beam with vacuum on a 50:50 splitter, so each output
/// is `(quadrature + vacuum) / sqrt(2)`.
pub fn measure_alice(
    pulse: &EprPulse,
    protocol: ProtocolKind,
    label: Quadrature,
    rng: &mut impl Rng,
) -> AliceOutcome {
    match protocol {
        ProtocolKind::SqueezedHomodyne => AliceOutcome::Homodyne {
            value: match label {
                Quadrature::Q => pulse.qa,
                Quadrature::P => pulse.pa,
            },
            label,
        },
        ProtocolKind::CoherentHeterodyne => AliceOutcome::Heterodyne {
            q: (pulse.qa + normal(rng)) * FRAC_1_SQRT_2,
            p: (pulse.pa + normal(rng)) * FRAC_1_SQRT_2,
        },
    }
}

/// Closed-form second moments of Alice's measured data and Bob's data.
pub fn analytic_covariance(src: &EprSource, ch: &ChannelModel, protocol: ProtocolKind) -> Covariance2 {
    let t = ch.transmission;
    let var_b = t * src.v + ch.added_noise_variance();
    let cov = t.sqrt() * src.correlation();
    match protocol {
        ProtocolKind::SqueezedHomodyne => Covariance2 {
            var_a: src.v,
            var_b,
            cov_ab: cov,
        },
        ProtocolKind::CoherentHeterodyne => Covariance2 {
            var_a: 0.5 * (src.v + 1.0),
            var_b,
            cov_ab: cov * FRAC_1_SQRT_2,
        },
    }
}

/// Everything needed to reproduce a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub source: EprSource,
    pub channel: ChannelModel,
    pub protocol: ProtocolKind,
    pub block_size: usize,
    pub blocks: usize,
    pub sifting: SiftingMode,
    pub seed: u64,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        EprSource::new(self.source.v)?;
        self.channel.validate()?;
        if self.block_size == 0 || self.blocks == 0 {
            return Err(Error::Configuration(format!(
                "need n >= 1 and l >= 1, got n = {}, l = {}",
                self.block_size, self.blocks
            )));
        }
        self.block_size
            .checked_mul(self.blocks)
            .ok_or_else(|| Error::Configuration("n * l overflows".into()))?;
        Ok(())
    }

    pub fn total_pulses(&self) -> usize {
        self.block_size * self.blocks
    }

    pub fn header(&self) -> RecordHeader {
        RecordHeader {
            protocol: self.protocol,
            n: self.block_size,
            l: self.blocks,
            seed: self.seed,
            v: self.source.v,
            t: self.channel.transmission,
            eps: self.channel.excess_noise,
            shape: self.channel.shape,
            block_correlation: self.channel.block_correlation,
            sifting: self.sifting,
        }
    }

    fn block_rng(&self, block: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(block as u64);
        rng
    }

    fn fill_block(&self, block: usize, out: &mut [PulseEntry]) {
        let mut rng = self.block_rng(block);
        let shared = (self.channel.block_correlation > 0.0).then(|| {
            let gstd = self.channel.excess_variance().sqrt();
            (
                self.channel.shape.sample(gstd, &mut rng),
                self.channel.shape.sample(gstd, &mut rng),
            )
        });
        for entry in out.iter_mut() {
            let pulse = simulate_epr_pulse(&self.source, &mut rng);
            let label_a = Quadrature::random(&mut rng);
            let label_b = match (self.protocol, self.sifting) {
                (ProtocolKind::SqueezedHomodyne, SiftingMode::QuantumMemory) => label_a,
                _ => Quadrature::random(&mut rng),
            };
            let (qb, pb) = attack_with_shared((pulse.qb0, pulse.pb0), &self.channel, shared, &mut rng);
            let b = match label_b {
                Quadrature::Q => qb,
                Quadrature::P => pb,
            };
            *entry = match measure_alice(&pulse, self.protocol, label_a, &mut rng) {
                AliceOutcome::Homodyne { value, label } => PulseEntry {
                    a: value,
                    b,
                    label_a: label,
                    label_b,
                    kept: label == label_b,
                },
                // Alice has both quadratures; she keeps the one Bob measured.
                AliceOutcome::Heterodyne { q, p } => PulseEntry {
                    a: match label_b {
                        Quadrature::Q => q,
                        Quadrature::P => p,
                    },
                    b,
                    label_a: label_b,
                    label_b,
                    kept: true,
                },
            };
        }
    }
}

/// Generates the session block by block, handing each batch of consecutive
/// blocks to `sink` in order. `sink` receives the index of the batch's first
/// block and its pulses (`block_size` entries per block).
pub fn stream_session<F>(config: &SessionConfig, mut sink: F) -> Result<()>
where
    F: FnMut(usize, &[PulseEntry]),
{
    config.validate()?;
    let n = config.block_size;
    let per_batch = (BATCH_PULSES / n).max(1);
    let placeholder = PulseEntry {
        a: 0.0,
        b: 0.0,
        label_a: Quadrature::Q,
        label_b: Quadrature::Q,
        kept: false,
    };
    let mut buffer = vec![placeholder; per_batch * n];
    let mut first = 0;
    while first < config.blocks {
        let count = per_batch.min(config.blocks - first);
        let batch = &mut buffer[..count * n];
        batch
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(j, block)| config.fill_block(first + j, block));
        sink(first, batch);
        first += count;
    }
    Ok(())
}

pub fn run_session(config: &SessionConfig) -> Result<BlockRecord> {
    config.validate()?;
    let mut entries = Vec::with_capacity(config.total_pulses());
    stream_session(config, |_, batch| entries.extend_from_slice(batch))?;
    Ok(BlockRecord::new(config.header(), entries))
}

/// Second-moment summary of a session, computed without storing the pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionSummary {
    pub total: usize,
    pub kept: usize,
    /// Kept pulses of both quadratures, Alice's p outcomes sign-flipped.
    pub pooled: CovarianceAccumulator,
    pub q: CovarianceAccumulator,
    pub p: CovarianceAccumulator,
}

impl SessionSummary {
    pub fn kept_fraction(&self) -> f64 {
        self.kept as f64 / self.total as f64
    }
}

pub fn summarize_session(config: &SessionConfig) -> Result<SessionSummary> {
    let mut s = SessionSummary {
        total: 0,
        kept: 0,
        pooled: CovarianceAccumulator::default(),
        q: CovarianceAccumulator::default(),
        p: CovarianceAccumulator::default(),
    };
    stream_session(config, |_, batch| {
        for e in batch {
            s.total += 1;
            if !e.kept {
                continue;
            }
            s.kept += 1;
            match e.label_b {
                Quadrature::Q => {
                    s.q.push(e.a, e.b);
                    s.pooled.push(e.a, e.b);
                }
                Quadrature::P => {
                    s.p.push(e.a, e.b);
                    s.pooled.push(-e.a, e.b);
                }
            }
        }
    })?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn moments(pairs: impl Iterator<Item = (f64, f64)>) -> Covariance2 {
        let mut acc = CovarianceAccumulator::default();
        pairs.for_each(|(a, b)| acc.push(a, b));
        acc.covariance().unwrap()
    }

    #[test]
    fn vacuum_source_is_uncorrelated() {
        let src = EprSource::new(1.0).unwrap();
        let mut r = rng(1);
        let pulses: Vec<_> = (0..200_000).map(|_| simulate_epr_pulse(&src, &mut r)).collect();
        let k = moments(pulses.iter().map(|p| (p.qa, p.qb0)));
        assert!(k.cov_ab.abs() < 0.015);
        assert!((k.var_a - 1.0).abs() < 0.015 && (k.var_b - 1.0).abs() < 0.015);
    }

    #[test]
    fn epr_quadrature_symmetry() {
        let src = EprSource::new(5.0).unwrap();
        let mut r = rng(2);
        let pulses: Vec<_> = (0..200_000).map(|_| simulate_epr_pulse(&src, &mut r)).collect();
        let kq = moments(pulses.iter().map(|p| (p.qa, p.qb0)));
        let kp = moments(pulses.iter().map(|p| (p.pa, -p.pb0)));
        let c = src.correlation();
        assert!((kq.cov_ab - c).abs() < 0.1 && (kp.cov_ab - c).abs() < 0.1, "{kq} {kp}");
    }

    #[test]
    fn identity_channel_passes_through() {
        let ch = ChannelModel::identity();
        let mut r = rng(3);
        assert_eq!(apply_attack((1.25, -0.5), &ch, &mut r), (1.25, -0.5));
    }

    #[test]
    fn lossy_channel_variance() {
        let ch = ChannelModel::new(0.5, 0.0, NoiseShape::Gaussian).unwrap();
        let mut r = rng(4);
        // input variance 3
        let out: Vec<f64> = (0..200_000)
            .map(|_| apply_attack((3f64.sqrt() * normal(&mut r), 0.0), &ch, &mut r).0)
            .collect();
        let var = out.iter().map(|x| x * x).sum::<f64>() / out.len() as f64;
        assert!((var - 2.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn shape_consistency_is_enforced() {
        assert!(ChannelModel::new(0.5, 0.4, NoiseShape::uniform_matched(0.2)).is_ok());
        assert!(matches!(
            ChannelModel::new(0.5, 0.4, NoiseShape::uniform_matched(0.3)),
            Err(Error::Configuration(_))
        ));
        assert!(ChannelModel::new(0.0, 0.0, NoiseShape::Gaussian).is_err());
        assert!(ChannelModel::new(1.5, 0.0, NoiseShape::Gaussian).is_err());
        assert!(ChannelModel::new(0.5, -0.1, NoiseShape::Gaussian).is_err());
        let m = NoiseShape::mixture_matched(0.7, 0.8, 10.0);
        assert_relative_eq!(m.variance().unwrap(), 0.7, max_relative = 1e-12);
        let d = NoiseShape::discrete_matched(0.7, 0.25);
        assert_relative_eq!(d.variance().unwrap(), 0.7, max_relative = 1e-12);
    }

    #[test]
    fn shape_round_trips_through_text() {
        for shape in [
            NoiseShape::Gaussian,
            NoiseShape::mixture_matched(0.3, 0.9, 7.0),
            NoiseShape::uniform_matched(0.45),
            NoiseShape::discrete_matched(0.9, 1.0),
        ] {
            assert_eq!(shape.to_string().parse::<NoiseShape>().unwrap(), shape);
        }
        assert!("triangle(1)".parse::<NoiseShape>().is_err());
    }

    #[test]
    fn heterodyne_of_vacuum_stays_at_shot_noise() {
        let src = EprSource::new(1.0).unwrap();
        let mut r = rng(5);
        let mut acc = CovarianceAccumulator::default();
        for _ in 0..200_000 {
            let pulse = simulate_epr_pulse(&src, &mut r);
            if let AliceOutcome::Heterodyne { q, p } =
                measure_alice(&pulse, ProtocolKind::CoherentHeterodyne, Quadrature::Q, &mut r)
            {
                acc.push(q, p);
            }
        }
        let k = acc.covariance().unwrap();
        assert!((k.var_a - 1.0).abs() < 0.015 && (k.var_b - 1.0).abs() < 0.015);
    }

    #[test]
    fn homodyne_returns_chosen_quadrature() {
        let pulse = EprPulse { qa: 0.3, pa: -1.1, qb0: 0.0, pb0: 0.0 };
        let mut r = rng(6);
        assert_eq!(
            measure_alice(&pulse, ProtocolKind::SqueezedHomodyne, Quadrature::P, &mut r),
            AliceOutcome::Homodyne { value: -1.1, label: Quadrature::P }
        );
    }

    #[test]
    fn analytic_covariance_examples() {
        let src = EprSource::new(2.0).unwrap();
        let k = analytic_covariance(&src, &ChannelModel::identity(), ProtocolKind::SqueezedHomodyne);
        assert_eq!((k.var_a, k.var_b), (2.0, 2.0));
        assert_relative_eq!(k.cov_ab, 3f64.sqrt(), epsilon = 1e-15);
        let src = EprSource::new(20.0).unwrap();
        let ch = ChannelModel::new(0.5, 0.0, NoiseShape::Gaussian).unwrap();
        let k = analytic_covariance(&src, &ch, ProtocolKind::SqueezedHomodyne);
        assert_relative_eq!(k.var_b, 10.5, epsilon = 1e-14);
        assert_relative_eq!(k.cov_ab, 0.5f64.sqrt() * 399f64.sqrt(), epsilon = 1e-14);
        let vac = EprSource::new(1.0).unwrap();
        for protocol in [ProtocolKind::SqueezedHomodyne, ProtocolKind::CoherentHeterodyne] {
            assert_eq!(analytic_covariance(&vac, &ch, protocol).cov_ab, 0.0);
        }
    }

    fn config(sifting: SiftingMode, protocol: ProtocolKind, seed: u64) -> SessionConfig {
        SessionConfig {
            source: EprSource::new(10.0).unwrap(),
            channel: ChannelModel::new(0.7, 0.1, NoiseShape::Gaussian).unwrap(),
            protocol,
            block_size: 3,
            blocks: 40_000,
            sifting,
            seed,
        }
    }

    #[test]
    fn session_is_deterministic_and_blocks_are_well_formed() {
        let cfg = config(SiftingMode::RandomBasis, ProtocolKind::SqueezedHomodyne, 9);
        let a = run_session(&cfg).unwrap();
        let b = run_session(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entries().len(), 120_000);
        assert!(a.entries().iter().all(|e| e.kept == (e.label_a == e.label_b)));
        let other = run_session(&SessionConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn sifting_modes() {
        let rb = summarize_session(&config(SiftingMode::RandomBasis, ProtocolKind::SqueezedHomodyne, 1)).unwrap();
        let frac = rb.kept_fraction();
        // 5 sigma for 120k Bernoulli(1/2) draws
        assert!((frac - 0.5).abs() < 5.0 * (0.25f64 / 120_000.0).sqrt(), "{frac}");
        let qm = summarize_session(&config(SiftingMode::QuantumMemory, ProtocolKind::SqueezedHomodyne, 1)).unwrap();
        assert_eq!(qm.kept, qm.total);
        let het = summarize_session(&config(SiftingMode::RandomBasis, ProtocolKind::CoherentHeterodyne, 1)).unwrap();
        assert_eq!(het.kept, het.total);
    }

    #[test]
    fn session_statistics_match_analytic_model() {
        for protocol in [ProtocolKind::SqueezedHomodyne, ProtocolKind::CoherentHeterodyne] {
            let cfg = config(SiftingMode::QuantumMemory, protocol, 12);
            let s = summarize_session(&cfg).unwrap();
            let k = s.pooled.covariance().unwrap();
            let truth = analytic_covariance(&cfg.source, &cfg.channel, protocol);
            for (est, tru) in [(k.var_a, truth.var_a), (k.var_b, truth.var_b), (k.cov_ab, truth.cov_ab)] {
                assert!((est - tru).abs() < 0.02 * tru.abs().max(1.0), "{protocol}: {k} vs {truth}");
            }
        }
    }

    #[test]
    fn correlated_blocks_keep_marginal_variance() {
        let mut cfg = config(SiftingMode::QuantumMemory, ProtocolKind::SqueezedHomodyne, 4);
        cfg.channel = ChannelModel::new(0.8, 0.5, NoiseShape::Gaussian)
            .unwrap()
            .with_block_correlation(0.6)
            .unwrap();
        let s = summarize_session(&cfg).unwrap();
        let k = s.pooled.covariance().unwrap();
        let truth = analytic_covariance(&cfg.source, &cfg.channel, cfg.protocol);
        assert!((k.var_b - truth.var_b).abs() < 0.03 * truth.var_b, "{k} vs {truth}");
        assert!(cfg.channel.with_block_correlation(1.5).is_err());
    }

    #[test]
    fn invalid_session_config() {
        let mut cfg = config(SiftingMode::QuantumMemory, ProtocolKind::SqueezedHomodyne, 1);
        cfg.block_size = 0;
        assert!(matches!(run_session(&cfg), Err(Error::Configuration(_))));
        assert!(EprSource::new(0.5).is_err());
    }
}
