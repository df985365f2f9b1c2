use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepParameter, SweepSpec};
use crate::error::{Error, Result};
use crate::estimators::CovarianceAccumulator;
use crate::info::{
    effective_rate_from_report, Covariance2, ProtocolKind, RateReport, ShotNoise, SqueezingVerdict,
};
use crate::simulator::{
    analytic_covariance, stream_session, BlockRecord, PulseEntry, Quadrature, RecordFormat,
    RecordWriter, SiftingMode,
};
use crate::verify::{run_verification, VerificationManifest, VerifyOptions};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Covariance literal `var_a,var_b,cov_ab`.
pub fn parse_covariance(s: &str) -> Result<Covariance2> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("covariance literal '{s}' is not var_a,var_b,cov_ab")))
        })
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        &[a, b, c] => Covariance2::new(a, b, c),
        _ => Err(Error::Parse(format!("covariance literal '{s}' needs three numbers"))),
    }
}

pub fn format_covariance(k: &Covariance2) -> String {
    format!("{},{},{}", k.var_a, k.var_b, k.cov_ab)
}

/// Second moments of the kept pulses, Alice's p outcomes sign-flipped so
/// both quadratures pool.
#[derive(Debug, Clone, Copy, Default)]
struct PooledMoments {
    total: usize,
    kept: usize,
    acc: CovarianceAccumulator,
}

impl PooledMoments {
    fn push_all(&mut self, entries: &[PulseEntry]) {
        for e in entries {
            self.total += 1;
            if e.kept {
                self.kept += 1;
                let a = match e.label_b {
                    Quadrature::Q => e.a,
                    Quadrature::P => -e.a,
                };
                self.acc.push(a, e.b);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutcome {
    pub record: PathBuf,
    pub pulses: usize,
    pub kept: usize,
    pub kept_fraction: f64,
    pub covariance: Covariance2,
    pub analytic_covariance: Covariance2,
}

/// Runs a session, streaming the record to disk, and reports its moments.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    out_path: Option<&Path>,
    log: &mut dyn Write,
) -> Result<SimulateOutcome> {
    let session = cfg.session()?;
    let ext = match cfg.format {
        RecordFormat::Csv => "csv",
        RecordFormat::JsonLines => "jsonl",
    };
    let path = cfg.output_path(out_path, &format!("record.{ext}"));
    let mut file = create(&path)?;
    let mut writer = RecordWriter::new(&mut file, &session.header(), cfg.format)?;
    let mut moments = PooledMoments::default();
    let mut io_result = Ok(());
    stream_session(&session, |_, batch| {
        if io_result.is_ok() {
            io_result = writer.write_entries(batch);
        }
        moments.push_all(batch);
    })?;
    io_result?;
    writer.finish()?;
    let outcome = SimulateOutcome {
        record: path,
        pulses: moments.total,
        kept: moments.kept,
        kept_fraction: moments.kept as f64 / moments.total as f64,
        covariance: moments.acc.covariance()?,
        analytic_covariance: analytic_covariance(&session.source, &session.channel, session.protocol),
    };
    writeln!(log, "record: {}", outcome.record.display())?;
    writeln!(log, "pulses: {} kept: {} ({:.4})", outcome.pulses, outcome.kept, outcome.kept_fraction)?;
    writeln!(log, "covariance: {}", format_covariance(&outcome.covariance))?;
    writeln!(log, "analytic: {}", format_covariance(&outcome.analytic_covariance))?;
    Ok(outcome)
}

/// Where `rate` takes its statistics from.
#[derive(Debug, Clone, PartialEq)]
pub enum RateInput {
    Record(PathBuf),
    Covariance(Covariance2),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOutcome {
    pub covariance: Covariance2,
    pub report: RateReport,
    pub beta: f64,
    /// `beta * i_ab`.
    pub i_eff: f64,
    /// `i_eff - i_be_bound`, bits per pulse.
    pub effective_rate: f64,
    pub squeezing_verdict: SqueezingVerdict,
    pub secure: bool,
}

/// Reads a record, keeping only its pooled second moments.
pub fn record_covariance(path: &Path) -> Result<(Covariance2, BlockRecord)> {
    let record = BlockRecord::read(BufReader::new(File::open(path)?))?;
    let mut m = PooledMoments::default();
    m.push_all(record.entries());
    Ok((m.acc.covariance()?, record))
}

/// Rate bound and verdicts from a record or a covariance literal. Records
/// carry their own protocol, block size and sifting mode; a literal uses the
/// config's.
pub fn cmd_rate(
    cfg: &ExperimentConfig,
    input: &RateInput,
    out_path: Option<&Path>,
    log: &mut dyn Write,
) -> Result<RateOutcome> {
    if !(0.0..=1.0).contains(&cfg.beta) {
        return Err(Error::Configuration(format!(
            "reconciliation efficiency must lie in [0, 1], got {}",
            cfg.beta
        )));
    }
    let (k, protocol, n, sifting) = match input {
        RateInput::Record(path) => {
            let (k, record) = record_covariance(path)?;
            let h = record.header();
            (k, h.protocol, h.n, h.sifting)
        }
        RateInput::Covariance(k) => (*k, cfg.protocol, cfg.n, cfg.sifting),
    };
    let n0 = ShotNoise::UNIT;
    let mut report = n0.rate_bound(&k, n as u64, protocol, cfg.transform)?;
    if sifting == SiftingMode::RandomBasis {
        report = report.sifted();
    }
    let i_eff = cfg.beta * report.i_ab;
    let effective_rate = effective_rate_from_report(i_eff, &report)?;
    let outcome = RateOutcome {
        covariance: k,
        report,
        beta: cfg.beta,
        i_eff,
        effective_rate,
        squeezing_verdict: n0.conditional_squeezing_check(&k)?,
        secure: effective_rate > 0.0,
    };
    writeln!(log, "protocol: {}  block size: {}", protocol, n)?;
    writeln!(log, "covariance: {}", format_covariance(&k))?;
    writeln!(log, "conditional variance: {:.6}", report.cond_var_b_given_a)?;
    if let Some(cv) = report.cond_var_b_given_a_prime {
        writeln!(log, "conditional variance (pre-split): {cv:.6}")?;
    }
    writeln!(
        log,
        "I_AB: {:.6}  I_BE bound: {:.6}  delta_I_min: {:.6} bits/pulse ({:.6} bits/block)",
        report.i_ab, report.i_be_bound, report.delta_i_min_per_pulse, report.delta_i_min_block
    )?;
    if report.sifting_applied {
        writeln!(log, "sifting: random bases, rates halved")?;
    }
    if report.saturated {
        writeln!(log, "warning: statistics exceed the uncertainty bound; rate capped at I_AB")?;
    }
    writeln!(log, "effective rate (beta = {}): {:.6} bits/pulse", cfg.beta, effective_rate)?;
    writeln!(
        log,
        "conditional squeezing: {}",
        match outcome.squeezing_verdict {
            SqueezingVerdict::Secure => "below shot noise (secure)",
            SqueezingVerdict::Insecure => "not below shot noise (insecure)",
        }
    )?;
    writeln!(log, "verdict: {}", if outcome.secure { "secure key" } else { "no secure key" })?;
    if let Some(p) = out_path.or(cfg.out.as_deref()) {
        write_json(p, &outcome)?;
    }
    Ok(outcome)
}

/// Runs the verification suite, writes the manifest, and fails with the
/// offending identifiers if any inequality is violated.
pub fn cmd_verify(
    cfg: &ExperimentConfig,
    options: &VerifyOptions,
    out_path: Option<&Path>,
    log: &mut dyn Write,
) -> Result<VerificationManifest> {
    let manifest = run_verification(options)?;
    let path = cfg.output_path(out_path, "manifest.json");
    write_json(&path, &manifest)?;
    for r in &manifest.reports {
        writeln!(log, "{r}")?;
    }
    for b in &manifest.batches {
        writeln!(
            log,
            "{:<60} checks={} violations={} min_slack={:+.3e}",
            b.identifier, b.checks, b.violations, b.min_slack
        )?;
    }
    if let Some(c) = &manifest.heterodyne_cross_check {
        let verdict = match c.preferred() {
            Some(t) => t.as_str().to_string(),
            None => "inconclusive".into(),
        };
        writeln!(
            log,
            "heterodyne cross-check: pre-split var {:.4}, beam_splitter {:.4}, shot_noise_subtracted {:.4} -> {verdict}",
            c.pre_split.var_a, c.beam_splitter.var_a, c.shot_noise_subtracted.var_a
        )?;
    }
    writeln!(log, "manifest: {}", path.display())?;
    if !manifest.all_hold {
        return Err(Error::VerificationFailed(manifest.failures().join(", ")));
    }
    writeln!(log, "all inequalities hold")?;
    Ok(manifest)
}

/// One grid point of a sweep. Rates are effective rates per pulse; `i_ab`,
/// `i_be_bound` and `cond_var_b_given_a` belong to the configured protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub delta_i_squeezed: f64,
    pub delta_i_coherent: f64,
    pub i_ab: f64,
    pub i_be_bound: f64,
    pub cond_var_b_given_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub table: PathBuf,
    pub plot_data: PathBuf,
    pub rows: Vec<SweepRow>,
    /// Whether the configured protocol's rate is non-increasing along an
    /// eps sweep; `None` for other parameters.
    pub monotone_in_eps: Option<bool>,
}

pub const SWEEP_COLUMNS: [&str; 5] = [
    "delta_i_squeezed",
    "delta_i_coherent",
    "i_ab",
    "i_be_bound",
    "cond_var_b_given_a",
];

fn sweep_point(cfg: &ExperimentConfig, value: f64) -> Result<SweepRow> {
    let source = cfg.source()?;
    // the covariance depends on the excess noise only through its variance
    let channel = crate::simulator::ChannelModel::new(cfg.t, cfg.eps, crate::simulator::NoiseShape::Gaussian)?;
    let n0 = ShotNoise::UNIT;
    let rate = |protocol: ProtocolKind| -> Result<RateReport> {
        let k = analytic_covariance(&source, &channel, protocol);
        let mut r = n0.rate_bound(&k, cfg.n as u64, protocol, cfg.transform)?;
        if cfg.sifting == SiftingMode::RandomBasis {
            r = r.sifted();
        }
        Ok(r)
    };
    let effective = |r: &Result<RateReport>| match r {
        Ok(r) => cfg.beta * r.i_ab - r.i_be_bound,
        Err(_) => f64::NAN,
    };
    let squeezed = rate(ProtocolKind::SqueezedHomodyne);
    let coherent = rate(ProtocolKind::CoherentHeterodyne);
    let own = match cfg.protocol {
        ProtocolKind::SqueezedHomodyne => &squeezed,
        ProtocolKind::CoherentHeterodyne => &coherent,
    };
    let own = own.as_ref().map_err(|e| Error::Configuration(format!("sweep point {value}: {e}")))?;
    Ok(SweepRow {
        value,
        delta_i_squeezed: effective(&squeezed),
        delta_i_coherent: effective(&coherent),
        i_ab: own.i_ab,
        i_be_bound: own.i_be_bound,
        cond_var_b_given_a: own.cond_var_b_given_a,
    })
}

/// Evaluates the closed-form bounds on the analytic covariance at every
/// grid point and writes a CSV table plus a whitespace-separated plot file.
pub fn cmd_sweep(spec: &SweepSpec, out_path: Option<&Path>, log: &mut dyn Write) -> Result<SweepOutcome> {
    spec.validate()?;
    let grid = spec.range.grid();
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&x| {
            let mut cfg = spec.base.clone();
            spec.range.parameter.apply(&mut cfg, x);
            cfg.validate()?;
            sweep_point(&cfg, x)
        })
        .collect::<Result<_>>()?;

    let param = spec.range.parameter.as_str();
    let table = spec.base.output_path(out_path, "sweep.csv");
    let plot_data = table.with_extension("dat");
    let mut w = create(&table)?;
    writeln!(w, "{param},{}", SWEEP_COLUMNS.join(","))?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.value, r.delta_i_squeezed, r.delta_i_coherent, r.i_ab, r.i_be_bound, r.cond_var_b_given_a
        )?;
    }
    w.flush()?;
    let mut w = create(&plot_data)?;
    writeln!(w, "# {param} {}", SWEEP_COLUMNS.join(" "))?;
    for r in &rows {
        writeln!(
            w,
            "{:.10e} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e}",
            r.value, r.delta_i_squeezed, r.delta_i_coherent, r.i_ab, r.i_be_bound, r.cond_var_b_given_a
        )?;
    }
    w.flush()?;

    let monotone_in_eps = (spec.range.parameter == SweepParameter::Eps).then(|| {
        let own = |r: &SweepRow| match spec.base.protocol {
            ProtocolKind::SqueezedHomodyne => r.delta_i_squeezed,
            ProtocolKind::CoherentHeterodyne => r.delta_i_coherent,
        };
        let mut sorted: Vec<&SweepRow> = rows.iter().collect();
        sorted.sort_by(|a, b| a.value.total_cmp(&b.value));
        sorted.windows(2).all(|w| own(w[1]) <= own(w[0]) + 1e-12)
    });
    writeln!(log, "{} points over {param}", rows.len())?;
    writeln!(log, "table: {}", table.display())?;
    writeln!(log, "plot data: {}", plot_data.display())?;
    if monotone_in_eps == Some(false) {
        return Err(Error::VerificationFailed(
            "rate increases with excess noise somewhere on the grid".into(),
        ));
    }
    Ok(SweepOutcome {
        table,
        plot_data,
        rows,
        monotone_in_eps,
    })
}
