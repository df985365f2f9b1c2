//! Certification of the entropy inequalities behind the rate bounds: exact
//! checks on discrete surrogates, statistical checks on simulated data, and a
//! manifest collecting every report.

mod discrete;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    conditional_entropy_estimate, estimate_covariance, CovarianceAccumulator, SampleSet,
    DEFAULT_NEIGHBORS,
};
use crate::info::{
    gaussian_conditional_entropy, gaussian_entropy, squeezed_rate_bound, vacuum_entropy,
    Covariance2, HeterodyneTransform, ProtocolKind, ShotNoise,
};
use crate::simulator::{
    measure_alice, run_session, simulate_epr_pulse, AliceOutcome, ChannelModel, EprSource,
    NoiseShape, Quadrature, SessionConfig, SiftingMode,
};

pub use discrete::{
    check_mixture_lemma, check_pulse_index_conditioning, check_subadditivity_chain,
    pair_conditional_entropy, DiscreteJoint, EXACT_TOLERANCE, MAX_TABLE_ENTRIES,
};

/// Statistical checks need at least this many samples.
pub const MIN_STATISTICAL_SAMPLES: usize = 10_000;
/// Statistical tolerances are this many standard errors.
pub const SIGMA_MULTIPLIER: f64 = 3.0;

/// One checked inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub identifier: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`, in bits.
    pub slack: f64,
    pub tolerance: f64,
    pub holds: bool,
}

impl InequalityReport {
    pub fn new(identifier: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        InequalityReport {
            identifier: identifier.into(),
            lhs,
            rhs,
            slack,
            tolerance,
            holds: slack >= -tolerance,
        }
    }
}

impl fmt::Display for InequalityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<44} lhs={:.9} rhs={:.9} slack={:+.3e} tol={:.1e} {}",
            self.identifier,
            self.lhs,
            self.rhs,
            self.slack,
            self.tolerance,
            if self.holds { "holds" } else { "VIOLATED" }
        )
    }
}

/// Empirical `H(B|A)` against the Gaussian value for the sample covariance.
pub fn check_gaussian_dominance(s: &SampleSet) -> Result<InequalityReport> {
    if s.len() < MIN_STATISTICAL_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_STATISTICAL_SAMPLES,
            got: s.len(),
        });
    }
    let est = conditional_entropy_estimate(s, DEFAULT_NEIGHBORS)?;
    let k = estimate_covariance(s)?;
    Ok(InequalityReport::new(
        "gaussian-dominance",
        est.value,
        gaussian_conditional_entropy(&k)?,
        SIGMA_MULTIPLIER * est.std_error,
    ))
}

/// `2 H0 <= H_G(vq) + H_G(vp)` for a single-mode state with quadrature
/// variances `vq`, `vp` (shot-noise units).
pub fn check_pure_state_entropic_sum(vq: f64, vp: f64) -> Result<InequalityReport> {
    check_pure_state_entropic_sum_with(ShotNoise::UNIT, vq, vp)
}

pub fn check_pure_state_entropic_sum_with(
    n0: ShotNoise,
    vq: f64,
    vp: f64,
) -> Result<InequalityReport> {
    if !(vq > 0.0 && vp > 0.0) || !vq.is_finite() || !vp.is_finite() {
        return Err(Error::Domain(format!(
            "quadrature variances must be positive, got {vq} and {vp}"
        )));
    }
    let floor = n0.n0() * n0.n0();
    if vq * vp < floor * (1.0 - 1e-12) {
        return Err(Error::Unphysical(format!(
            "vq * vp = {} violates the uncertainty bound {floor}",
            vq * vp
        )));
    }
    let h = |v: f64| gaussian_entropy(v / n0.n0()).map(|x| x + 0.5 * n0.n0().log2());
    Ok(InequalityReport::new(
        "pure-state-entropic-uncertainty",
        2.0 * n0.vacuum_entropy(),
        h(vq)? + h(vp)?,
        EXACT_TOLERANCE,
    ))
}

/// Attack name with its statistics.
pub type NamedStatistics = (String, AttackStatistics);

/// One attack in the statistical catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CatalogAttack {
    pub name: &'static str,
    pub source: EprSource,
    pub channel: ChannelModel,
}

const CATALOG_V: f64 = 20.0;
const CATALOG_T: f64 = 0.9;
const CATALOG_EPS: f64 = 1.0;

/// Matched-second-moment attacks at `v = 20`, `t = 0.9`, `eps = 1`, one per
/// noise shape.
pub fn attack_catalog() -> Vec<CatalogAttack> {
    let source = EprSource::new(CATALOG_V).expect("valid source");
    let excess = CATALOG_T * CATALOG_EPS;
    let shapes = [
        ("gaussian", NoiseShape::Gaussian),
        ("mixture", NoiseShape::mixture_matched(excess, 0.9, 20.0)),
        ("uniform", NoiseShape::uniform_matched(excess)),
        ("discrete", NoiseShape::discrete_matched(excess, 1.0)),
    ];
    shapes
        .into_iter()
        .map(|(name, shape)| CatalogAttack {
            name,
            source,
            channel: ChannelModel::new(CATALOG_T, CATALOG_EPS, shape).expect("valid channel"),
        })
        .collect()
}

/// Lossless channel with a `+-1` displacement of Bob's quadratures: the
/// conditional variance is `1.05` (above shot noise) while the bimodal
/// conditional law keeps `H(B|A)` near `0.89` bits, below the vacuum's `2.05`.
pub fn squeezing_counterexample() -> CatalogAttack {
    CatalogAttack {
        name: "conditional-vs-entropic",
        source: EprSource::new(20.0).expect("valid source"),
        channel: ChannelModel::new(1.0, 1.0, NoiseShape::discrete_matched(1.0, 1.0))
            .expect("valid channel"),
    }
}

impl CatalogAttack {
    /// Squeezed-state session of `pulses` single-pulse blocks with every basis kept.
    pub fn session(&self, pulses: usize, seed: u64) -> SessionConfig {
        SessionConfig {
            source: self.source,
            channel: self.channel,
            protocol: ProtocolKind::SqueezedHomodyne,
            block_size: 1,
            blocks: pulses,
            sifting: SiftingMode::QuantumMemory,
            seed,
        }
    }

    /// Simulated samples, both quadratures pooled.
    pub fn samples(&self, pulses: usize, seed: u64) -> Result<SampleSet> {
        run_session(&self.session(pulses, seed))?.pooled_samples()
    }
}

/// Empirical and Gaussian conditional entropies of one catalog run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackStatistics {
    pub covariance: Covariance2,
    pub conditional_variance: f64,
    pub empirical_conditional_entropy: f64,
    pub std_error: f64,
    pub gaussian_conditional_entropy: f64,
}

impl AttackStatistics {
    pub fn from_samples(s: &SampleSet) -> Result<Self> {
        if s.len() < MIN_STATISTICAL_SAMPLES {
            return Err(Error::InsufficientData {
                needed: MIN_STATISTICAL_SAMPLES,
                got: s.len(),
            });
        }
        let k = estimate_covariance(s)?;
        let est = conditional_entropy_estimate(s, DEFAULT_NEIGHBORS)?;
        Ok(AttackStatistics {
            covariance: k,
            conditional_variance: k.conditional_variance()?,
            empirical_conditional_entropy: est.value,
            std_error: est.std_error,
            gaussian_conditional_entropy: gaussian_conditional_entropy(&k)?,
        })
    }

    fn tol(&self) -> f64 {
        SIGMA_MULTIPLIER * self.std_error
    }

    pub fn dominance(&self, name: &str) -> InequalityReport {
        InequalityReport::new(
            format!("gaussian-dominance[{name}]"),
            self.empirical_conditional_entropy,
            self.gaussian_conditional_entropy,
            self.tol(),
        )
    }

    /// `|H_emp - H_G| <= 3 SE`: the Gaussian attack attains the bound.
    pub fn saturation(&self, name: &str) -> InequalityReport {
        InequalityReport::new(
            format!("gaussian-saturation[{name}]"),
            (self.empirical_conditional_entropy - self.gaussian_conditional_entropy).abs(),
            0.0,
            self.tol(),
        )
    }

    /// `H_emp + 3 SE <= H_G`: dominance with a margin beyond sampling error.
    pub fn strict_dominance(&self, name: &str) -> InequalityReport {
        InequalityReport::new(
            format!("strict-gaussian-dominance[{name}]"),
            self.empirical_conditional_entropy + self.tol(),
            self.gaussian_conditional_entropy,
            0.0,
        )
    }

    /// Covariance-based rate `<=` the rate implied by the empirical entropy,
    /// `2 (H0 - H_emp)`, whose standard error is `2 SE`.
    pub fn conservative_rate(&self, name: &str) -> Result<InequalityReport> {
        let bound = squeezed_rate_bound(&self.covariance, 1)?;
        Ok(InequalityReport::new(
            format!("covariance-rate-conservative[{name}]"),
            bound.delta_i_min_per_pulse,
            2.0 * (vacuum_entropy() - self.empirical_conditional_entropy),
            2.0 * self.tol(),
        ))
    }
}

/// Outcome of simulating the pre-splitter variance and comparing it with
/// both candidate transforms of the measured heterodyne covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeterodyneCrossCheck {
    pub pulses: usize,
    pub measured: Covariance2,
    pub pre_split: Covariance2,
    pub beam_splitter: Covariance2,
    pub shot_noise_subtracted: Covariance2,
    pub var_tolerance: f64,
    pub cov_tolerance: f64,
    pub matches_beam_splitter: bool,
    pub matches_shot_noise_subtracted: bool,
}

impl HeterodyneCrossCheck {
    pub fn preferred(&self) -> Option<HeterodyneTransform> {
        match (self.matches_beam_splitter, self.matches_shot_noise_subtracted) {
            (true, false) => Some(HeterodyneTransform::BeamSplitter),
            (false, true) => Some(HeterodyneTransform::ShotNoiseSubtracted),
            _ => None,
        }
    }
}

const CROSS_CHECK_CHUNK: usize = 1 << 16;

/// Simulates heterodyne detection while keeping Alice's pre-splitter
/// quadrature, then asks which transform of the measured covariance
/// reproduces the pre-splitter one (within five standard errors).
pub fn heterodyne_cross_check(
    source: &EprSource,
    channel: &ChannelModel,
    pulses: usize,
    seed: u64,
) -> Result<HeterodyneCrossCheck> {
    channel.validate()?;
    if pulses < MIN_STATISTICAL_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_STATISTICAL_SAMPLES,
            got: pulses,
        });
    }
    let chunks = pulses.div_ceil(CROSS_CHECK_CHUNK);
    let partial: Vec<(CovarianceAccumulator, CovarianceAccumulator)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CROSS_CHECK_CHUNK.min(pulses - c * CROSS_CHECK_CHUNK);
            let mut measured = CovarianceAccumulator::default();
            let mut pre = CovarianceAccumulator::default();
            for _ in 0..count {
                let pulse = simulate_epr_pulse(source, &mut rng);
                let (qb, _) = crate::simulator::apply_attack((pulse.qb0, pulse.pb0), channel, &mut rng);
                if let AliceOutcome::Heterodyne { q, .. } =
                    measure_alice(&pulse, ProtocolKind::CoherentHeterodyne, Quadrature::Q, &mut rng)
                {
                    measured.push(q, qb);
                }
                pre.push(pulse.qa, qb);
            }
            (measured, pre)
        })
        .collect();
    let (mut measured, mut pre) = (CovarianceAccumulator::default(), CovarianceAccumulator::default());
    for (m, p) in &partial {
        measured.merge(m);
        pre.merge(p);
    }
    let measured = measured.covariance()?;
    let pre_split = pre.covariance()?;
    let n0 = ShotNoise::UNIT;
    let beam_splitter = n0.heterodyne_covariance_transform(&measured, HeterodyneTransform::BeamSplitter)?;
    let shot_noise_subtracted =
        n0.heterodyne_covariance_transform(&measured, HeterodyneTransform::ShotNoiseSubtracted)?;
    let nf = pulses as f64;
    // standard errors of a Gaussian sample variance and covariance
    let var_tolerance = 5.0 * pre_split.var_a * (2.0 / nf).sqrt();
    let cov_tolerance = 5.0
        * ((pre_split.var_a * pre_split.var_b + pre_split.cov_ab * pre_split.cov_ab) / nf).sqrt();
    let matches = |k: &Covariance2| {
        (k.var_a - pre_split.var_a).abs() <= var_tolerance
            && (k.cov_ab - pre_split.cov_ab).abs() <= cov_tolerance
    };
    Ok(HeterodyneCrossCheck {
        pulses,
        measured,
        pre_split,
        matches_beam_splitter: matches(&beam_splitter),
        matches_shot_noise_subtracted: matches(&shot_noise_subtracted),
        beam_splitter,
        shot_noise_subtracted,
        var_tolerance,
        cov_tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyScope {
    Discrete,
    /// Catalog checks plus the heterodyne cross-check.
    Statistical,
    /// The heterodyne cross-check alone.
    Heterodyne,
    All,
}

impl VerifyScope {
    fn discrete(self) -> bool {
        matches!(self, VerifyScope::Discrete | VerifyScope::All)
    }

    fn statistical(self) -> bool {
        matches!(self, VerifyScope::Statistical | VerifyScope::All)
    }

    fn heterodyne(self) -> bool {
        !matches!(self, VerifyScope::Discrete)
    }
}

impl FromStr for VerifyScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(VerifyScope::Discrete),
            "statistical" => Ok(VerifyScope::Statistical),
            "heterodyne" => Ok(VerifyScope::Heterodyne),
            "all" => Ok(VerifyScope::All),
            other => Err(Error::Parse(format!(
                "unknown scope '{other}' (discrete|statistical|heterodyne|all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub scope: VerifyScope,
    pub seed: u64,
    /// Random tables per (components, alphabet) configuration.
    pub random_tables: usize,
    pub statistical_pulses: usize,
    pub cross_check_pulses: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            scope: VerifyScope::All,
            seed: 0,
            random_tables: 10_000,
            statistical_pulses: 1_000_000,
            cross_check_pulses: 10_000_000,
        }
    }
}

/// Aggregate of many exact checks of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub identifier: String,
    pub tables: usize,
    pub checks: usize,
    pub violations: usize,
    pub min_slack: f64,
    /// The report with the smallest slack.
    pub worst: InequalityReport,
}

impl BatchSummary {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Every check of the suite, in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationManifest {
    pub options: VerifyOptions,
    pub reports: Vec<InequalityReport>,
    pub batches: Vec<BatchSummary>,
    pub attacks: Vec<NamedStatistics>,
    pub heterodyne_cross_check: Option<HeterodyneCrossCheck>,
    pub all_hold: bool,
}

impl VerificationManifest {
    /// Identifiers of violated reports and batches.
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .reports
            .iter()
            .filter(|r| !r.holds)
            .map(|r| r.identifier.clone())
            .collect();
        out.extend(
            self.batches
                .iter()
                .filter(|b| !b.holds())
                .map(|b| format!("{} ({})", b.identifier, b.worst.identifier)),
        );
        out
    }
}

/// Every exact report for one table.
pub fn discrete_reports(j: &DiscreteJoint) -> Result<Vec<InequalityReport>> {
    let mut reports = check_subadditivity_chain(j);
    reports.push(check_pulse_index_conditioning(j)?);
    reports.push(check_mixture_lemma(j)?);
    Ok(reports)
}

fn binary_pair(flip: f64) -> (usize, usize, Vec<f64>) {
    (2, 2, vec![0.5 * (1.0 - flip), 0.5 * flip, 0.5 * flip, 0.5 * (1.0 - flip)])
}

fn labelled(prefix: &str, reports: Vec<InequalityReport>) -> Vec<InequalityReport> {
    reports
        .into_iter()
        .map(|mut r| {
            r.identifier = format!("{prefix}/{}", r.identifier);
            r
        })
        .collect()
}

/// Hand-built tables covering the equality and redundancy cases.
pub fn fixed_discrete_reports() -> Result<Vec<InequalityReport>> {
    let mut out = Vec::new();
    let product = DiscreteJoint::product(&[binary_pair(0.1), binary_pair(0.25), binary_pair(0.4)])?;
    out.extend(labelled("independent-pulses", check_subadditivity_chain(&product)));

    // B_1 = B_2 = A_1 xor N with a fair noise bit N shared by both pulses
    let mut probs = vec![0.0; 16];
    for a1 in 0..2 {
        for a2 in 0..2 {
            for noise in 0..2 {
                let b = a1 ^ noise;
                probs[((a1 * 2 + a2) * 2 + b) * 2 + b] += 0.125;
            }
        }
    }
    let copies = DiscreteJoint::new(vec![2, 2], vec![2, 2], probs)?;
    out.extend(labelled("redundant-copies", discrete_reports(&copies)?));

    // B_1 = B_2 = A_1 exactly
    let mut probs = vec![0.0; 16];
    for a1 in 0..2 {
        for a2 in 0..2 {
            probs[((a1 * 2 + a2) * 2 + a1) * 2 + a1] = 0.25;
        }
    }
    let exact = DiscreteJoint::new(vec![2, 2], vec![2, 2], probs)?;
    out.extend(labelled("copies-of-first-input", discrete_reports(&exact)?));

    let homogeneous = DiscreteJoint::product(&[binary_pair(0.2), binary_pair(0.2)])?;
    out.extend(labelled("homogeneous-pulses", discrete_reports(&homogeneous)?));
    let mixed = DiscreteJoint::product(&[binary_pair(0.0), binary_pair(0.5)])?;
    out.extend(labelled("heterogeneous-pulses", discrete_reports(&mixed)?));
    let single = DiscreteJoint::product(&[binary_pair(0.3)])?;
    out.extend(labelled("single-pulse", discrete_reports(&single)?));
    Ok(out)
}

/// Configurations of the random-table batches: `(components, alphabet)`.
pub const RANDOM_TABLE_SHAPES: [(usize, usize); 4] = [(2, 2), (2, 3), (3, 2), (3, 3)];

/// Exact checks on `tables` flat-Dirichlet tables of the given shape.
pub fn random_table_batch(
    components: usize,
    alphabet: usize,
    tables: usize,
    seed: u64,
) -> Result<Vec<BatchSummary>> {
    let stream_base = ((components as u64) << 40) | ((alphabet as u64) << 32);
    let per_table: Vec<Vec<InequalityReport>> = (0..tables)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_base | i as u64);
            discrete_reports(&DiscreteJoint::random(components, alphabet, &mut rng)?)
        })
        .collect::<Result<_>>()?;
    let mut batches: Vec<BatchSummary> = Vec::new();
    for reports in &per_table {
        for r in reports {
            let family = r.identifier.split('[').next().unwrap_or(&r.identifier);
            let id = format!("random-tables[n={components},alphabet={alphabet}]/{family}");
            let batch = match batches.iter_mut().find(|b| b.identifier == id) {
                Some(b) => b,
                None => {
                    batches.push(BatchSummary {
                        identifier: id,
                        tables,
                        checks: 0,
                        violations: 0,
                        min_slack: f64::INFINITY,
                        worst: r.clone(),
                    });
                    batches.last_mut().expect("just pushed")
                }
            };
            batch.checks += 1;
            batch.violations += usize::from(!r.holds);
            if r.slack < batch.min_slack {
                batch.min_slack = r.slack;
                batch.worst = r.clone();
            }
        }
    }
    Ok(batches)
}

/// Dominance, saturation and conservativeness checks on the attack catalog,
/// plus the conditional-versus-entropic squeezing demonstration.
pub fn statistical_reports(
    pulses: usize,
    seed: u64,
) -> Result<(Vec<InequalityReport>, Vec<NamedStatistics>)> {
    let mut reports = Vec::new();
    let mut stats = Vec::new();
    for (i, attack) in attack_catalog().iter().enumerate() {
        let st = AttackStatistics::from_samples(&attack.samples(pulses, seed.wrapping_add(i as u64))?)?;
        reports.push(st.dominance(attack.name));
        if attack.channel.shape.is_gaussian() {
            reports.push(st.saturation(attack.name));
        }
        if matches!(attack.channel.shape, NoiseShape::DiscreteDisplacement { .. }) {
            reports.push(st.strict_dominance(attack.name));
        }
        reports.push(st.conservative_rate(attack.name)?);
        stats.push((attack.name.to_string(), st));
    }
    let ce = squeezing_counterexample();
    let st = AttackStatistics::from_samples(&ce.samples(pulses, seed.wrapping_add(100))?)?;
    reports.extend(counterexample_reports(&st));
    stats.push((ce.name.to_string(), st));
    Ok((reports, stats))
}

/// `sigma^2(B|A) >= N0` alongside `H(B|A) + 3 SE <= H0`.
pub fn counterexample_reports(st: &AttackStatistics) -> Vec<InequalityReport> {
    vec![
        InequalityReport::new(
            "conditional-variance-above-shot-noise",
            ShotNoise::UNIT.n0(),
            st.conditional_variance,
            0.0,
        ),
        InequalityReport::new(
            "conditional-entropy-below-vacuum",
            st.empirical_conditional_entropy + st.tol(),
            vacuum_entropy(),
            0.0,
        ),
    ]
}

fn pure_state_reports() -> Result<Vec<InequalityReport>> {
    let cases = [(1.0, 1.0), (0.5, 2.0), (0.1, 10.0), (2.0, 2.0), (1.0, 3.0)];
    cases
        .iter()
        .map(|&(q, p)| {
            check_pure_state_entropic_sum(q, p).map(|mut r| {
                r.identifier = format!("{}[vq={q},vp={p}]", r.identifier);
                r
            })
        })
        .collect()
}

/// Runs the suite selected by `options`.
pub fn run_verification(options: &VerifyOptions) -> Result<VerificationManifest> {
    let mut reports = Vec::new();
    let mut batches = Vec::new();
    let mut attacks = Vec::new();
    let mut cross = None;
    if options.scope.discrete() {
        reports.extend(fixed_discrete_reports()?);
        reports.extend(pure_state_reports()?);
        for (n, a) in RANDOM_TABLE_SHAPES {
            if options.random_tables > 0 {
                batches.extend(random_table_batch(n, a, options.random_tables, options.seed)?);
            }
        }
    }
    if options.scope.statistical() {
        let (r, s) = statistical_reports(options.statistical_pulses, options.seed)?;
        reports.extend(r);
        attacks = s;
    }
    if options.scope.heterodyne() {
        let attack = &attack_catalog()[0];
        cross = Some(heterodyne_cross_check(
            &attack.source,
            &attack.channel,
            options.cross_check_pulses,
            options.seed,
        )?);
    }
    let all_hold = reports.iter().all(|r| r.holds) && batches.iter().all(BatchSummary::holds);
    Ok(VerificationManifest {
        options: *options,
        reports,
        batches,
        attacks,
        heterodyne_cross_check: cross,
        all_hold,
    })
}
