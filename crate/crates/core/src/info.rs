//! Closed-form Gaussian information quantities and reverse-reconciliation
//! key-rate lower bounds.
//!
//! Everything here is computed from second moments alone. Variances are in
//! shot-noise units (multiples of the vacuum quadrature variance `n0`) and all
//! entropies and rates are in bits.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether a floating-point quantity that
/// should be non-negative is "zero" rather than genuinely negative.
const REL_TOL: f64 = 1e-12;

/// Vacuum quadrature variance, the unit every other variance is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoise(f64);

impl Default for ShotNoise {
    fn default() -> Self {
        ShotNoise::UNIT
    }
}

/// Second-moment matrix of one Alice/Bob quadrature pair.
///
/// ```text
/// | var_a   cov_ab |
/// | cov_ab  var_b  |
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance2 {
    pub var_a: f64,
    pub var_b: f64,
    pub cov_ab: f64,
}

impl Covariance2 {
    /// Builds a covariance matrix, rejecting negative variances and
    /// matrices that are not positive semidefinite.
    pub fn new(var_a: f64, var_b: f64, cov_ab: f64) -> Result<Self> {
        let k = Covariance2 {
            var_a,
            var_b,
            cov_ab,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let Covariance2 {
            var_a,
            var_b,
            cov_ab,
        } = *self;
        if !(var_a.is_finite() && var_b.is_finite() && cov_ab.is_finite()) {
            return Err(Error::Domain(format!("non-finite covariance entry in {self}")));
        }
        if var_a < 0.0 || var_b < 0.0 {
            return Err(Error::Domain(format!("negative variance in {self}")));
        }
        let bound = var_a * var_b;
        if cov_ab * cov_ab > bound * (1.0 + REL_TOL) + f64::MIN_POSITIVE {
            return Err(Error::InconsistentStatistics(format!(
                "covariance {cov_ab} exceeds sqrt(var_a * var_b) = {}",
                bound.sqrt()
            )));
        }
        Ok(())
    }

    pub fn determinant(&self) -> f64 {
        self.var_a * self.var_b - self.cov_ab * self.cov_ab
    }

    /// Pearson correlation, `None` when either variance vanishes.
    pub fn correlation(&self) -> Option<f64> {
        let d = (self.var_a * self.var_b).sqrt();
        (d > 0.0).then(|| self.cov_ab / d)
    }

    /// Multiplies every entry by `factor` (a change of variance unit).
    pub fn scaled(&self, factor: f64) -> Self {
        Covariance2 {
            var_a: self.var_a * factor,
            var_b: self.var_b * factor,
            cov_ab: self.cov_ab * factor,
        }
    }

    /// Residual variance of B after the best linear estimate from A,
    /// `var_b - cov_ab^2 / var_a`.
    pub fn conditional_variance(&self) -> Result<f64> {
        self.validate()?;
        if self.var_a == 0.0 {
            return Err(Error::Domain(
                "conditional variance undefined for var_a = 0".into(),
            ));
        }
        let cv = self.var_b - self.cov_ab * self.cov_ab / self.var_a;
        if cv < 0.0 {
            if cv >= -REL_TOL * self.var_b.max(f64::MIN_POSITIVE) {
                return Ok(0.0);
            }
            return Err(Error::InconsistentStatistics(format!(
                "negative conditional variance {cv} for {self}"
            )));
        }
        Ok(cv)
    }
}

impl fmt::Display for Covariance2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(var_a={}, var_b={}, cov_ab={})",
            self.var_a, self.var_b, self.cov_ab
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Gaussian-modulated squeezed states, Alice and Bob both homodyne.
    SqueezedHomodyne,
    /// Gaussian-modulated coherent states; in the entanglement picture Alice
    /// heterodynes her beam through a 50:50 splitter.
    CoherentHeterodyne,
}

impl ProtocolKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolKind::SqueezedHomodyne => "squeezed",
            ProtocolKind::CoherentHeterodyne => "coherent",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "squeezed" | "squeezed_homodyne" | "homodyne" => Ok(ProtocolKind::SqueezedHomodyne),
            "coherent" | "coherent_heterodyne" | "heterodyne" => {
                Ok(ProtocolKind::CoherentHeterodyne)
            }
            other => Err(Error::Parse(format!("unknown protocol '{other}'"))),
        }
    }
}

/// How Alice's heterodyne-measured statistics are mapped back onto the
/// physical mode she kept before her beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeterodyneTransform {
    /// `var_a' = 2 var_a - n0`, `cov' = sqrt(2) cov`: inverts a 50:50 split
    /// with a vacuum port. Agrees with the simulator's pre-split variance.
    #[default]
    BeamSplitter,
    /// `var_a' = 2 (var_a - n0)`, `cov' = sqrt(2) cov`: subtracts a full
    /// shot-noise unit before rescaling.
    ShotNoiseSubtracted,
}

impl HeterodyneTransform {
    /// Offset `c` such that `var_a' = 2 (var_a - c)`.
    fn offset(self, n0: f64) -> f64 {
        match self {
            HeterodyneTransform::BeamSplitter => 0.5 * n0,
            HeterodyneTransform::ShotNoiseSubtracted => n0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            HeterodyneTransform::BeamSplitter => "beam_splitter",
            HeterodyneTransform::ShotNoiseSubtracted => "shot_noise_subtracted",
        }
    }
}

impl FromStr for HeterodyneTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beam_splitter" | "beam-splitter" => Ok(HeterodyneTransform::BeamSplitter),
            "shot_noise_subtracted" | "shot-noise-subtracted" => {
                Ok(HeterodyneTransform::ShotNoiseSubtracted)
            }
            other => Err(Error::Parse(format!("unknown heterodyne transform '{other}'"))),
        }
    }
}

/// Key-rate lower bound together with the quantities that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub protocol: ProtocolKind,
    pub block_size: u64,
    /// Secret key rate lower bound, bits per pulse.
    pub delta_i_min_per_pulse: f64,
    /// `block_size * delta_i_min_per_pulse`.
    pub delta_i_min_block: f64,
    /// Gaussian-model Alice-Bob mutual information, bits per pulse.
    pub i_ab: f64,
    /// Upper bound on Eve's information on Bob's data, bits per pulse.
    pub i_be_bound: f64,
    pub cond_var_b_given_a: f64,
    /// Conditional variance given Alice's pre-split mode (heterodyne only).
    pub cond_var_b_given_a_prime: Option<f64>,
    pub sifting_applied: bool,
    /// The raw bound exceeded `i_ab` (the statistics sit outside the vacuum
    /// uncertainty limit, e.g. from sampling noise) and was capped at `i_ab`.
    pub saturated: bool,
}

impl RateReport {
    /// Halves every per-pulse information rate for random, independent basis
    /// choices. Idempotent: an already-sifted report is returned unchanged.
    pub fn sifted(mut self) -> Self {
        if self.sifting_applied {
            return self;
        }
        self.delta_i_min_per_pulse = apply_sifting(self.delta_i_min_per_pulse);
        self.delta_i_min_block = apply_sifting(self.delta_i_min_block);
        self.i_ab = apply_sifting(self.i_ab);
        self.i_be_bound = apply_sifting(self.i_be_bound);
        self.sifting_applied = true;
        self
    }

    pub fn is_secure(&self) -> bool {
        self.delta_i_min_per_pulse > 0.0
    }

    fn build(
        protocol: ProtocolKind,
        n: u64,
        raw_rate: f64,
        i_ab: f64,
        cv: f64,
        cv_prime: Option<f64>,
    ) -> Self {
        // Physical statistics give raw_rate <= i_ab; larger values break the
        // vacuum uncertainty bound and are capped.
        let (rate, i_be, saturated) = if raw_rate <= i_ab {
            (raw_rate, i_ab - raw_rate, false)
        } else {
            (i_ab, 0.0, raw_rate - i_ab > REL_TOL * i_ab.abs().max(1.0))
        };
        RateReport {
            protocol,
            block_size: n,
            delta_i_min_per_pulse: rate,
            delta_i_min_block: n as f64 * rate,
            i_ab,
            i_be_bound: i_be,
            cond_var_b_given_a: cv,
            cond_var_b_given_a_prime: cv_prime,
            sifting_applied: false,
            saturated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqueezingVerdict {
    Secure,
    Insecure,
}

/// Differential entropy in bits of a one-dimensional Gaussian,
/// `0.5 * log2(2 pi e variance)`.
pub fn gaussian_entropy(variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::Domain(format!(
            "Gaussian entropy needs a positive finite variance, got {variance}"
        )));
    }
    Ok(0.5 * (2.0 * PI * E * variance).log2())
}

/// Entropy of a vacuum quadrature with `n0 = 1`.
pub fn vacuum_entropy() -> f64 {
    ShotNoise::UNIT.vacuum_entropy()
}

pub fn conditional_variance(k: &Covariance2) -> Result<f64> {
    k.conditional_variance()
}

/// Entropy of B given A for a bivariate Gaussian with covariance `k`.
pub fn gaussian_conditional_entropy(k: &Covariance2) -> Result<f64> {
    let cv = k.conditional_variance()?;
    if cv == 0.0 {
        return Err(Error::Domain(format!(
            "zero conditional variance for {k}: conditional entropy diverges"
        )));
    }
    gaussian_entropy(cv)
}

/// `I(A;B) = 0.5 * log2(var_b / var(B|A))` for a bivariate Gaussian.
pub fn gaussian_mutual_information(k: &Covariance2) -> Result<f64> {
    let cv = k.conditional_variance()?;
    if cv == 0.0 {
        return Err(Error::Domain(format!(
            "zero conditional variance for {k}: mutual information diverges"
        )));
    }
    Ok(0.5 * (k.var_b / cv).log2())
}

/// Random, independent basis choices agree half of the time.
pub fn apply_sifting(rate: f64) -> f64 {
    rate / 2.0
}

pub fn squeezed_rate_bound(k: &Covariance2, n: u64) -> Result<RateReport> {
    ShotNoise::UNIT.squeezed_rate_bound(k, n)
}

pub fn heterodyne_covariance_transform(
    k_measured: &Covariance2,
    transform: HeterodyneTransform,
) -> Result<Covariance2> {
    ShotNoise::UNIT.heterodyne_covariance_transform(k_measured, transform)
}

/// Coherent-state bound with the default (beam-splitter) heterodyne transform.
pub fn coherent_rate_bound(k_measured: &Covariance2, n: u64) -> Result<RateReport> {
    ShotNoise::UNIT.coherent_rate_bound(k_measured, n, HeterodyneTransform::default())
}

pub fn effective_rate(i_eff: f64, k_measured: &Covariance2, protocol: ProtocolKind) -> Result<f64> {
    ShotNoise::UNIT.effective_rate(i_eff, k_measured, protocol, HeterodyneTransform::default())
}

pub fn conditional_squeezing_check(k: &Covariance2) -> Result<SqueezingVerdict> {
    ShotNoise::UNIT.conditional_squeezing_check(k)
}

impl ShotNoise {
    pub const UNIT: ShotNoise = ShotNoise(1.0);

    pub fn new(n0: f64) -> Result<Self> {
        if !(n0 > 0.0) || !n0.is_finite() {
            return Err(Error::Domain(format!("shot-noise variance must be positive, got {n0}")));
        }
        Ok(ShotNoise(n0))
    }

    pub fn n0(self) -> f64 {
        self.0
    }

    pub fn vacuum_entropy(self) -> f64 {
        0.5 * (2.0 * PI * E * self.0).log2()
    }

    fn check_block(n: u64) -> Result<()> {
        if n == 0 {
            return Err(Error::Domain("block size must be at least 1".into()));
        }
        Ok(())
    }

    fn positive_cond_var(k: &Covariance2) -> Result<f64> {
        let cv = k.conditional_variance()?;
        if cv == 0.0 {
            return Err(Error::Domain(format!(
                "zero conditional variance for {k}: the bound diverges"
            )));
        }
        Ok(cv)
    }

    /// Squeezed-state homodyne bound, `log2(n0 / var(B|A))` bits per pulse.
    pub fn squeezed_rate_bound(self, k: &Covariance2, n: u64) -> Result<RateReport> {
        Self::check_block(n)?;
        let cv = Self::positive_cond_var(k)?;
        let rate = (self.0 / cv).log2();
        let i_ab = 0.5 * (k.var_b / cv).log2();
        Ok(RateReport::build(
            ProtocolKind::SqueezedHomodyne,
            n,
            rate,
            i_ab,
            cv,
            None,
        ))
    }

    /// Maps Alice's heterodyne-measured covariance onto her pre-split mode.
    pub fn heterodyne_covariance_transform(
        self,
        k_measured: &Covariance2,
        transform: HeterodyneTransform,
    ) -> Result<Covariance2> {
        k_measured.validate()?;
        if k_measured.var_a <= self.0 {
            return Err(Error::Domain(format!(
                "heterodyne-measured variance {} must exceed shot noise {}",
                k_measured.var_a, self.0
            )));
        }
        let k = Covariance2 {
            var_a: 2.0 * (k_measured.var_a - transform.offset(self.0)),
            var_b: k_measured.var_b,
            cov_ab: std::f64::consts::SQRT_2 * k_measured.cov_ab,
        };
        k.validate().map_err(|_| {
            Error::InconsistentStatistics(format!(
                "transformed covariance {k} is not positive semidefinite"
            ))
        })?;
        Ok(k)
    }

    /// Coherent-state heterodyne bound built from the entropy chain
    /// `2 H0 - H_G(B|A) - H_G(B|A')`.
    pub fn coherent_rate_bound(
        self,
        k_measured: &Covariance2,
        n: u64,
        transform: HeterodyneTransform,
    ) -> Result<RateReport> {
        Self::check_block(n)?;
        let k_prime = self.heterodyne_covariance_transform(k_measured, transform)?;
        let cv1 = Self::positive_cond_var(k_measured)?;
        let cv2 = Self::positive_cond_var(&k_prime)?;
        let rate = 2.0 * self.vacuum_entropy() - gaussian_entropy(cv1)? - gaussian_entropy(cv2)?;
        let i_ab = 0.5 * (k_measured.var_b / cv1).log2();
        Ok(RateReport::build(
            ProtocolKind::CoherentHeterodyne,
            n,
            rate,
            i_ab,
            cv1,
            Some(cv2),
        ))
    }

    /// Product-form coherent bound in bits per block,
    /// `n log2(n0 / sqrt((var_b - cov^2/var_a)(var_b - cov^2/(var_a - c))))`,
    /// evaluated directly from `k_measured` without going through `K'`.
    pub fn coherent_rate_closed_form(
        self,
        k_measured: &Covariance2,
        n: u64,
        transform: HeterodyneTransform,
    ) -> Result<f64> {
        Self::check_block(n)?;
        k_measured.validate()?;
        let Covariance2 {
            var_a,
            var_b,
            cov_ab,
        } = *k_measured;
        let c = transform.offset(self.0);
        if var_a <= self.0 {
            return Err(Error::Domain(format!(
                "heterodyne-measured variance {var_a} must exceed shot noise {}",
                self.0
            )));
        }
        let f1 = var_b - cov_ab * cov_ab / var_a;
        let f2 = var_b - cov_ab * cov_ab / (var_a - c);
        if !(f1 > 0.0 && f2 > 0.0) {
            return Err(Error::Domain(format!(
                "non-positive conditional variance in closed form ({f1}, {f2})"
            )));
        }
        Ok(n as f64 * (self.0 / (f1 * f2).sqrt()).log2())
    }

    pub fn rate_bound(
        self,
        k: &Covariance2,
        n: u64,
        protocol: ProtocolKind,
        transform: HeterodyneTransform,
    ) -> Result<RateReport> {
        match protocol {
            ProtocolKind::SqueezedHomodyne => self.squeezed_rate_bound(k, n),
            ProtocolKind::CoherentHeterodyne => self.coherent_rate_bound(k, n, transform),
        }
    }

    /// Key rate with imperfect reconciliation: `i_eff - i_be_bound`, per pulse.
    pub fn effective_rate(
        self,
        i_eff: f64,
        k_measured: &Covariance2,
        protocol: ProtocolKind,
        transform: HeterodyneTransform,
    ) -> Result<f64> {
        let report = self.rate_bound(k_measured, 1, protocol, transform)?;
        effective_rate_from_report(i_eff, &report)
    }

    pub fn conditional_squeezing_check(self, k: &Covariance2) -> Result<SqueezingVerdict> {
        let cv = k.conditional_variance()?;
        Ok(if cv < self.0 {
            SqueezingVerdict::Secure
        } else {
            SqueezingVerdict::Insecure
        })
    }
}

/// `i_eff - i_be_bound` for an already computed (unsifted or sifted) report.
pub fn effective_rate_from_report(i_eff: f64, report: &RateReport) -> Result<f64> {
    let limit = report.i_ab * (1.0 + REL_TOL) + REL_TOL;
    if !(i_eff >= 0.0) || i_eff > limit {
        return Err(Error::Domain(format!(
            "reconciled information {i_eff} outside [0, I(A;B) = {}]",
            report.i_ab
        )));
    }
    Ok(i_eff - report.i_be_bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const H0: f64 = 2.047_095_585_180_641_4;

    #[test]
    fn gaussian_entropy_reference_values() {
        assert_relative_eq!(gaussian_entropy(1.0).unwrap(), H0, epsilon = 1e-12);
        assert_relative_eq!(gaussian_entropy(4.0).unwrap(), H0 + 1.0, epsilon = 1e-12);
        let zero = 1.0 / (2.0 * PI * E);
        assert!(gaussian_entropy(zero).unwrap().abs() < 1e-12);
        assert!(gaussian_entropy(0.0).is_err());
        assert!(gaussian_entropy(-1.0).is_err());
        assert!(gaussian_entropy(f64::NAN).is_err());
    }

    #[test]
    fn vacuum_entropy_tracks_shot_noise() {
        assert_relative_eq!(vacuum_entropy(), H0, epsilon = 1e-12);
        let quarter = ShotNoise::new(0.25).unwrap();
        assert_relative_eq!(quarter.vacuum_entropy(), H0 - 1.0, epsilon = 1e-12);
        for n0 in [0.1, 0.5, 3.0, 17.0] {
            let s = ShotNoise::new(n0).unwrap();
            assert_relative_eq!(s.vacuum_entropy(), gaussian_entropy(n0).unwrap(), epsilon = 1e-12);
        }
        assert!(ShotNoise::new(0.0).is_err());
    }

    #[test]
    fn conditional_variance_examples() {
        let cv = |a, b, c| Covariance2::new(a, b, c).unwrap().conditional_variance().unwrap();
        assert_eq!(cv(1.0, 1.0, 0.0), 1.0);
        assert_eq!(cv(2.0, 2.0, 1.0), 1.5);
        assert_eq!(cv(4.0, 9.0, 6.0), 0.0);
        let degenerate = Covariance2 { var_a: 0.0, var_b: 1.0, cov_ab: 0.0 };
        assert!(matches!(degenerate.conditional_variance(), Err(Error::Domain(_))));
    }

    #[test]
    fn covariance_rejects_non_psd() {
        assert!(matches!(
            Covariance2::new(1.0, 1.0, 1.5),
            Err(Error::InconsistentStatistics(_))
        ));
        assert!(Covariance2::new(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn gaussian_conditional_entropy_examples() {
        let k = Covariance2::new(1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(gaussian_conditional_entropy(&k).unwrap(), H0, epsilon = 1e-12);
        let k = Covariance2::new(2.0, 2.0, 1.0).unwrap();
        let h = gaussian_conditional_entropy(&k).unwrap();
        assert_relative_eq!(h, 0.5 * (2.0 * PI * E * 1.5).log2(), epsilon = 1e-12);
        assert!((h - 2.3396).abs() < 1e-4);
        let singular = Covariance2::new(4.0, 9.0, 6.0).unwrap();
        assert!(matches!(gaussian_conditional_entropy(&singular), Err(Error::Domain(_))));
    }

    #[test]
    fn squeezed_bound_examples() {
        let r = squeezed_rate_bound(&Covariance2::new(1.0, 1.0, 0.0).unwrap(), 1).unwrap();
        assert_eq!(r.delta_i_min_per_pulse, 0.0);

        // var(B|A) = 1/2 with var_b = 2: cov^2 / var_a = 3/2.
        let k = Covariance2::new(1.0, 2.0, 1.5f64.sqrt()).unwrap();
        let r = squeezed_rate_bound(&k, 10).unwrap();
        assert_relative_eq!(r.delta_i_min_per_pulse, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.delta_i_min_block, 10.0, epsilon = 1e-11);
        assert!(r.delta_i_min_per_pulse <= r.i_ab);

        assert!(squeezed_rate_bound(&k, 0).is_err());
    }

    #[test]
    fn squeezed_bound_worked_channel_example() {
        // v = 20, t = 0.5, eps = 0
        let k = Covariance2::new(20.0, 10.5, 0.5f64.sqrt() * 399f64.sqrt()).unwrap();
        let r = squeezed_rate_bound(&k, 1).unwrap();
        assert_relative_eq!(r.cond_var_b_given_a, 0.525, epsilon = 1e-12);
        assert_relative_eq!(r.delta_i_min_per_pulse, (1.0f64 / 0.525).log2(), epsilon = 1e-12);
        assert!((r.delta_i_min_per_pulse - 0.9297).abs() < 1e-4);
        assert!(!r.saturated);
    }

    #[test]
    fn negative_rates_are_reported() {
        let k = Covariance2::new(1.0, 3.0, 0.5).unwrap();
        let r = squeezed_rate_bound(&k, 4).unwrap();
        assert!(r.delta_i_min_per_pulse < 0.0);
        assert!(!r.is_secure());
    }

    #[test]
    fn heterodyne_transform_examples() {
        let k = Covariance2::new(3.0, 5.0, 2.0).unwrap();
        let kp = heterodyne_covariance_transform(&k, HeterodyneTransform::ShotNoiseSubtracted)
            .unwrap();
        assert_relative_eq!(kp.var_a, 4.0, epsilon = 1e-12);
        assert_eq!(kp.var_b, 5.0);
        assert_relative_eq!(kp.cov_ab, 2.0 * 2f64.sqrt(), epsilon = 1e-12);

        let near = Covariance2::new(1.0 + 1e-9, 1.0, 0.0).unwrap();
        let kp = heterodyne_covariance_transform(&near, HeterodyneTransform::ShotNoiseSubtracted)
            .unwrap();
        assert!(kp.var_a < 1e-8 && kp.cov_ab == 0.0);

        let bs = heterodyne_covariance_transform(&k, HeterodyneTransform::BeamSplitter).unwrap();
        assert_relative_eq!(bs.var_a, 5.0, epsilon = 1e-12);

        let shot = Covariance2::new(1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            heterodyne_covariance_transform(&shot, HeterodyneTransform::BeamSplitter),
            Err(Error::Domain(_))
        ));
        // cov^2 = 1.8 > (var_a - 1) * var_b = 1.0
        let bad = Covariance2::new(1.5, 2.0, 1.8f64.sqrt()).unwrap();
        assert!(matches!(
            heterodyne_covariance_transform(&bad, HeterodyneTransform::ShotNoiseSubtracted),
            Err(Error::InconsistentStatistics(_))
        ));
    }

    fn heterodyne_channel(v: f64, t: f64, eps: f64) -> Covariance2 {
        Covariance2::new(
            (v + 1.0) / 2.0,
            t * v + 1.0 - t + t * eps,
            (t * (v * v - 1.0) / 2.0).sqrt(),
        )
        .unwrap()
    }

    #[test]
    fn coherent_bound_two_routes_agree() {
        let k = heterodyne_channel(21.0, 0.9, 0.05);
        let transform = HeterodyneTransform::BeamSplitter;
        let chain = ShotNoise::UNIT.coherent_rate_bound(&k, 1, transform).unwrap();
        let closed = ShotNoise::UNIT.coherent_rate_closed_form(&k, 1, transform).unwrap();
        assert_relative_eq!(chain.delta_i_min_per_pulse, closed, max_relative = 1e-12);
        // Standard reverse-reconciliation values for this channel:
        // var(B|A) = 1 + t eps, var(B|A') = 1 - t + t eps + t / v.
        let r = coherent_rate_bound(&k, 1).unwrap();
        assert_relative_eq!(r.cond_var_b_given_a, 1.0 + 0.9 * 0.05, max_relative = 1e-12);
        let cv2 = 1.0 - 0.9 + 0.9 * 0.05 + 0.9 / 21.0;
        assert_relative_eq!(r.cond_var_b_given_a_prime.unwrap(), cv2, max_relative = 1e-12);
    }

    #[test]
    fn coherent_bound_boundary_and_symmetric_cases() {
        let k = solve_for_conditional_variances(1.0, 1.0);
        let r = coherent_rate_bound(&k, 1).unwrap();
        assert!(r.delta_i_min_per_pulse.abs() < 1e-12);
        // conditional variances (0.5, 0.5 - 4e-12): rate 1 bit, well below i_ab
        let k = Covariance2::new(1e12, 8.5, 8e12f64.sqrt()).unwrap();
        let r = coherent_rate_bound(&k, 3).unwrap();
        assert!(!r.saturated);
        assert_relative_eq!(r.delta_i_min_per_pulse, 1.0, epsilon = 1e-10);
        assert_relative_eq!(r.delta_i_min_block, 3.0, epsilon = 1e-9);
    }

    /// Finds a measured covariance whose two conditional variances (given A
    /// and given the beam-splitter-reconstructed A') equal `cv1`, `cv2`.
    /// Requires `cv1 >= cv2`; fixes `cov^2 = 1` and solves for `var_a`, `var_b`.
    fn solve_for_conditional_variances(cv1: f64, cv2: f64) -> Covariance2 {
        // var_b - 1/var_a = cv1 and var_b - 1/(var_a - 1/2) = cv2 with cov = 1.
        // Subtracting: 1/(var_a - 1/2) - 1/var_a = cv1 - cv2 =: d.
        let d = cv1 - cv2;
        let var_a = if d == 0.0 {
            // equal conditional variances require var_a -> infinity; use a
            // large var_a and rescale cov instead.
            let var_a = 1e12;
            return Covariance2::new(var_a, cv1 + 1.0, var_a.sqrt()).unwrap();
        } else {
            // (1/2) / (var_a (var_a - 1/2)) = d
            0.25 + (0.0625 + 0.5 / d).sqrt()
        };
        Covariance2::new(var_a, cv1 + 1.0 / var_a, 1.0).unwrap()
    }


    #[test]
    fn effective_rate_examples() {
        let k = Covariance2::new(20.0, 10.5, 0.5f64.sqrt() * 399f64.sqrt()).unwrap();
        let report = squeezed_rate_bound(&k, 1).unwrap();
        let full = effective_rate(report.i_ab, &k, ProtocolKind::SqueezedHomodyne).unwrap();
        assert_relative_eq!(full, report.delta_i_min_per_pulse, epsilon = 1e-12);
        let none = effective_rate(0.0, &k, ProtocolKind::SqueezedHomodyne).unwrap();
        assert_relative_eq!(none, -report.i_be_bound, epsilon = 1e-15);
        assert!(none <= 0.0);

        // Independent recomputation of I(A;B) and the Eve bound from K.
        let cv: f64 = 10.5 - 0.5 * 399.0 / 20.0;
        let i_ab = 0.5 * (10.5 / cv).log2();
        let i_be = i_ab - (1.0 / cv).log2();
        let r = effective_rate(0.9 * i_ab, &k, ProtocolKind::SqueezedHomodyne).unwrap();
        assert_relative_eq!(r, 0.9 * i_ab - i_be, epsilon = 1e-12);

        assert!(effective_rate(i_ab * 1.01, &k, ProtocolKind::SqueezedHomodyne).is_err());
        assert!(effective_rate(-0.1, &k, ProtocolKind::SqueezedHomodyne).is_err());
    }

    #[test]
    fn sifting_halves() {
        assert_eq!(apply_sifting(1.0), 0.5);
        assert_eq!(apply_sifting(0.0), 0.0);
        assert_eq!(apply_sifting(apply_sifting(0.8)), 0.2);
        let k = Covariance2::new(20.0, 10.5, 0.5f64.sqrt() * 399f64.sqrt()).unwrap();
        let r = squeezed_rate_bound(&k, 5).unwrap();
        let s = r.sifted();
        assert!(s.sifting_applied);
        assert_eq!(s.delta_i_min_per_pulse, r.delta_i_min_per_pulse / 2.0);
        assert_eq!(s.sifted(), s);
    }

    #[test]
    fn squeezing_verdict_examples() {
        let k = Covariance2::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(conditional_squeezing_check(&k).unwrap(), SqueezingVerdict::Insecure);
        let k = Covariance2::new(2.0, 2.0, 1.5).unwrap();
        assert_relative_eq!(k.conditional_variance().unwrap(), 0.875);
        assert_eq!(conditional_squeezing_check(&k).unwrap(), SqueezingVerdict::Secure);
    }

    #[test]
    fn saturation_caps_unphysical_statistics() {
        // var_b * var(B|A) = 0.25 < 1 breaks the vacuum bound.
        let k = Covariance2::new(1.0, 0.5, 0.0).unwrap();
        let r = squeezed_rate_bound(&k, 1).unwrap();
        assert!(r.saturated);
        assert_eq!(r.i_be_bound, 0.0);
        assert_relative_eq!(r.delta_i_min_per_pulse, r.i_ab, epsilon = 1e-15);
    }
}
