//! The `cvqkd` command line: `simulate`, `rate`, `verify` and `sweep`.
//!
//! Settings come from an optional TOML config file; flags override it.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_rate, cmd_simulate, cmd_sweep, cmd_verify, format_covariance, parse_covariance,
    record_covariance, RateInput, RateOutcome, SimulateOutcome, SweepOutcome, SweepRow,
    SWEEP_COLUMNS,
};
pub use config::{
    resolve_shape, ExperimentConfig, SweepParameter, SweepRange, SweepSpec, MIXTURE_RATIO,
    MIXTURE_WEIGHT,
};

use crate::error::{Error, Result};
use crate::info::{HeterodyneTransform, ProtocolKind};
use crate::simulator::{RecordFormat, SiftingMode};
use crate::verify::{VerifyOptions, VerifyScope};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CVQKD_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "cvqkd", version, about = "Continuous-variable QKD key-rate bounds, attack simulation and inequality checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a session and write its record.
    Simulate(ExperimentArgs),
    /// Key-rate bound from a record or a covariance literal.
    Rate(RateArgs),
    /// Run the inequality checks and write a manifest.
    Verify(VerifyArgs),
    /// Tabulate closed-form rates over a parameter range.
    Sweep(SweepArgs),
}

/// Experiment settings shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// squeezed | coherent
    #[arg(long)]
    pub protocol: Option<ProtocolKind>,
    /// Channel transmission.
    #[arg(long = "t")]
    pub t: Option<f64>,
    /// Excess noise, referred to the channel input.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Source quadrature variance.
    #[arg(long = "v")]
    pub v: Option<f64>,
    /// Pulses per block.
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// Number of blocks.
    #[arg(long = "l")]
    pub l: Option<usize>,
    /// Reconciliation efficiency.
    #[arg(long)]
    pub beta: Option<f64>,
    /// gaussian | mixture | uniform | discrete, or an explicit form like uniform(1.5).
    #[arg(long)]
    pub shape: Option<String>,
    /// random_basis | quantum_memory
    #[arg(long)]
    pub sifting: Option<SiftingMode>,
    /// Correlation of the excess noise within a block.
    #[arg(long = "rho-block")]
    pub rho_block: Option<f64>,
    /// Heterodyne covariance transform: beam_splitter | shot_noise_subtracted
    #[arg(long)]
    pub transform: Option<HeterodyneTransform>,
    /// Output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for outputs without an explicit path.
    #[arg(long = "out-dir", env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
    /// csv | json-lines
    #[arg(long)]
    pub format: Option<RecordFormat>,
}

impl ExperimentArgs {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(x) = self.$field.clone() { cfg.$target = x; })*
            };
        }
        set!(seed => seed, protocol => protocol, t => t, eps => eps, v => v, n => n, l => l,
             beta => beta, shape => shape, sifting => sifting, rho_block => block_correlation,
             transform => transform, format => format);
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.out_dir.is_some() {
            cfg.out_dir = self.out_dir.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Record file written by `simulate`.
    #[arg(long, conflicts_with = "cov")]
    pub record: Option<PathBuf>,
    /// Covariance literal `var_a,var_b,cov_ab`.
    #[arg(long, allow_hyphen_values = true)]
    pub cov: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// discrete | statistical | heterodyne | all
    #[arg(long, default_value = "all")]
    pub scope: VerifyScope,
    /// Random tables per (components, alphabet) configuration.
    #[arg(long, default_value_t = 10_000)]
    pub tables: usize,
    /// Pulses per catalog attack.
    #[arg(long, default_value_t = 1_000_000)]
    pub pulses: usize,
    /// Pulses for the heterodyne cross-check.
    #[arg(long = "cross-check-pulses", default_value_t = 10_000_000)]
    pub cross_check_pulses: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// t | eps | v | beta
    #[arg(long)]
    pub param: Option<SweepParameter>,
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
}

impl SweepArgs {
    pub fn resolve(&self) -> Result<SweepSpec> {
        let base = self.experiment.resolve()?;
        let from_file = base.sweep;
        let pick = |flag: Option<f64>, file: Option<f64>, name: &str| {
            flag.or(file)
                .ok_or_else(|| Error::Configuration(format!("sweep needs --{name} or a [sweep] table")))
        };
        let range = SweepRange {
            parameter: self
                .param
                .or(from_file.map(|r| r.parameter))
                .ok_or_else(|| Error::Configuration("sweep needs --param or a [sweep] table".into()))?,
            start: pick(self.start, from_file.map(|r| r.start), "start")?,
            stop: pick(self.stop, from_file.map(|r| r.stop), "stop")?,
            steps: self
                .steps
                .or(from_file.map(|r| r.steps))
                .ok_or_else(|| Error::Configuration("sweep needs --steps or a [sweep] table".into()))?,
        };
        Ok(SweepSpec { range, base })
    }
}

/// Executes a parsed command line, writing human-readable output to `log`.
pub fn run(cli: &Cli, log: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            cmd_simulate(&cfg, None, log)?;
        }
        Command::Rate(args) => {
            let cfg = args.experiment.resolve()?;
            let input = match (&args.record, &args.cov) {
                (Some(p), None) => RateInput::Record(p.clone()),
                (None, Some(c)) => RateInput::Covariance(parse_covariance(c)?),
                _ => {
                    return Err(Error::Configuration(
                        "rate needs exactly one of --record or --cov".into(),
                    ))
                }
            };
            cmd_rate(&cfg, &input, None, log)?;
        }
        Command::Verify(args) => {
            let cfg = args.experiment.resolve()?;
            let options = VerifyOptions {
                scope: args.scope,
                seed: cfg.seed,
                random_tables: args.tables,
                statistical_pulses: args.pulses,
                cross_check_pulses: args.cross_check_pulses,
            };
            cmd_verify(&cfg, &options, None, log)?;
        }
        Command::Sweep(args) => {
            cmd_sweep(&args.resolve()?, None, log)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_line_parses() {
        Cli::command_for_tests().debug_assert();
        let cli = Cli::try_parse_from([
            "cvqkd", "simulate", "--t", "0.7", "--protocol", "coherent", "--n", "4", "--shape",
            "uniform", "--sifting", "random_basis",
        ])
        .unwrap();
        let Command::Simulate(args) = cli.command else { panic!() };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.t, 0.7);
        assert_eq!(cfg.n, 4);
        assert_eq!(cfg.protocol, ProtocolKind::CoherentHeterodyne);
        assert_eq!(cfg.sifting, SiftingMode::RandomBasis);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "t = 0.3\neps = 0.2\nseed = 9\n").unwrap();
        let args = ExperimentArgs {
            config: Some(path),
            eps: Some(0.05),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!((cfg.t, cfg.eps, cfg.seed), (0.3, 0.05, 9));
    }

    impl Cli {
        fn command_for_tests() -> clap::Command {
            <Cli as clap::CommandFactory>::command()
        }
    }
}
