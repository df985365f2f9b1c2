use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{HeterodyneTransform, ProtocolKind};
use crate::simulator::{ChannelModel, EprSource, NoiseShape, RecordFormat, SessionConfig, SiftingMode};

/// Mixture used by the bare `mixture` shape name: weights `(0.9, 0.1)`,
/// second variance twenty times the first.
pub const MIXTURE_WEIGHT: f64 = 0.9;
pub const MIXTURE_RATIO: f64 = 20.0;

/// A full experiment description. Every field has a default, so a config
/// file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    pub v: f64,
    pub t: f64,
    pub eps: f64,
    /// `gaussian`, `mixture`, `uniform`, `discrete` (second moment matched
    /// to `t * eps`) or an explicit form such as `uniform(1.5)`.
    pub shape: String,
    pub block_correlation: f64,
    pub n: usize,
    pub l: usize,
    pub sifting: SiftingMode,
    pub seed: u64,
    /// Reconciliation efficiency: `I_eff = beta * I_AB`.
    pub beta: f64,
    pub transform: HeterodyneTransform,
    pub format: RecordFormat,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub sweep: Option<SweepRange>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocol: ProtocolKind::SqueezedHomodyne,
            v: 20.0,
            t: 0.5,
            eps: 0.0,
            shape: "gaussian".into(),
            block_correlation: 0.0,
            n: 1,
            l: 100_000,
            sifting: SiftingMode::QuantumMemory,
            seed: 0,
            beta: 1.0,
            transform: HeterodyneTransform::default(),
            format: RecordFormat::Csv,
            out: None,
            out_dir: None,
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn noise_shape(&self) -> Result<NoiseShape> {
        resolve_shape(&self.shape, self.t * self.eps)
    }

    pub fn channel(&self) -> Result<ChannelModel> {
        ChannelModel::new(self.t, self.eps, self.noise_shape()?)?
            .with_block_correlation(self.block_correlation)
    }

    pub fn source(&self) -> Result<EprSource> {
        EprSource::new(self.v).map_err(as_configuration)
    }

    pub fn session(&self) -> Result<SessionConfig> {
        self.validate()?;
        let s = SessionConfig {
            source: self.source()?,
            channel: self.channel()?,
            protocol: self.protocol,
            block_size: self.n,
            blocks: self.l,
            sifting: self.sifting,
            seed: self.seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Configuration(format!(
                "reconciliation efficiency must lie in [0, 1], got {}",
                self.beta
            )));
        }
        self.source()?;
        self.channel()?;
        if self.n == 0 || self.l == 0 {
            return Err(Error::Configuration(format!(
                "need n >= 1 and l >= 1, got n = {}, l = {}",
                self.n, self.l
            )));
        }
        Ok(())
    }

    /// `explicit`, else `out`, else `default_name` under the output directory.
    pub fn output_path(&self, explicit: Option<&Path>, default_name: &str) -> PathBuf {
        if let Some(p) = explicit.or(self.out.as_deref()) {
            return p.to_path_buf();
        }
        match &self.out_dir {
            Some(dir) => dir.join(default_name),
            None => PathBuf::from(default_name),
        }
    }
}

fn as_configuration(e: Error) -> Error {
    match e {
        Error::Domain(m) | Error::Unphysical(m) => Error::Configuration(m),
        other => other,
    }
}

/// Resolves a shape name against the excess-noise variance it must carry.
pub fn resolve_shape(spec: &str, excess_variance: f64) -> Result<NoiseShape> {
    let shape = match spec.trim() {
        "gaussian" => NoiseShape::Gaussian,
        "mixture" => NoiseShape::mixture_matched(excess_variance, MIXTURE_WEIGHT, MIXTURE_RATIO),
        "uniform" => NoiseShape::uniform_matched(excess_variance),
        "discrete" => {
            if excess_variance == 0.0 {
                NoiseShape::DiscreteDisplacement {
                    magnitude: 0.0,
                    probability: 1.0,
                }
            } else {
                NoiseShape::discrete_matched(excess_variance, 1.0)
            }
        }
        other => other.parse().map_err(|e: Error| Error::Configuration(e.to_string()))?,
    };
    Ok(shape)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    T,
    Eps,
    V,
    Beta,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::T => "t",
            SweepParameter::Eps => "eps",
            SweepParameter::V => "v",
            SweepParameter::Beta => "beta",
        }
    }

    fn check(&self, x: f64) -> Result<()> {
        let ok = x.is_finite()
            && match self {
                SweepParameter::T => x > 0.0 && x <= 1.0,
                SweepParameter::Eps => x >= 0.0,
                SweepParameter::V => x >= 1.0,
                SweepParameter::Beta => (0.0..=1.0).contains(&x),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Configuration(format!(
                "sweep value {x} is outside the domain of {}",
                self.as_str()
            )))
        }
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig, x: f64) {
        match self {
            SweepParameter::T => cfg.t = x,
            SweepParameter::Eps => cfg.eps = x,
            SweepParameter::V => cfg.v = x,
            SweepParameter::Beta => cfg.beta = x,
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" => Ok(SweepParameter::T),
            "eps" => Ok(SweepParameter::Eps),
            "v" => Ok(SweepParameter::V),
            "beta" => Ok(SweepParameter::Beta),
            other => Err(Error::Parse(format!("unknown sweep parameter '{other}' (t|eps|v|beta)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepRange {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Configuration(format!("a sweep needs at least 2 steps, got {}", self.steps)));
        }
        self.parameter.check(self.start)?;
        self.parameter.check(self.stop)
    }

    /// Evenly spaced grid with both endpoints exact.
    pub fn grid(&self) -> Vec<f64> {
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| {
                if i == last {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / last as f64
                }
            })
            .collect()
    }
}

/// A sweep over one parameter with everything else fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub range: SweepRange,
    pub base: ExperimentConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.range.validate()?;
        if !(0.0..=1.0).contains(&self.base.beta) {
            return Err(Error::Configuration(format!(
                "reconciliation efficiency must lie in [0, 1], got {}",
                self.base.beta
            )));
        }
        Ok(())
    }
}
