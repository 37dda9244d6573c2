//! Run configuration: a TOML document, validated before any computation.
//!
//! Unknown keys are rejected everywhere. Relative paths resolve against the
//! directory holding the configuration file.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use postselect::{Complex, Dim, Error, KrausChannel64, Operator64};
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Single,
    Epr,
    Sweep,
    ChannelInfo,
}

impl ModeName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeName::Single => "single",
            ModeName::Epr => "epr",
            ModeName::Sweep => "sweep",
            ModeName::ChannelInfo => "channel-info",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub mode: ModeName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub exact: bool,
    #[serde(default)]
    pub ensemble: Vec<Component>,
    pub channel: Option<ChannelSpec>,
    pub signal_channel: Option<ChannelSpec>,
    pub reference_channel: Option<ChannelSpec>,
    pub detection: Option<Detection>,
    pub input: Option<Input>,
    pub sampling: Option<Sampling>,
    pub metrics: Option<Metrics>,
    pub timeline: Option<Timeline>,
    pub sweep: Option<Sweep>,
}

/// One `(weight, θ)` term of the source ensemble.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub weight: f64,
    pub theta: f64,
}

/// A catalog channel, or a Kraus set read from a file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Identity,
    PhaseDamping { lambda: f64 },
    PhaseFlip { p: f64 },
    BitFlip { p: f64 },
    BitPhaseFlip { p: f64 },
    AmplitudeDamping { gamma: f64 },
    Depolarizing { p: f64 },
    Rtn { nu: f64, coupling: f64, t: f64 },
    Kraus { path: PathBuf },
}

impl ChannelSpec {
    /// Name of the parameter swept or scheduled for this channel.
    pub fn param_name(&self) -> Option<&'static str> {
        match self {
            ChannelSpec::PhaseDamping { .. } => Some("lambda"),
            ChannelSpec::PhaseFlip { .. } | ChannelSpec::BitFlip { .. } | ChannelSpec::BitPhaseFlip { .. } => Some("p"),
            ChannelSpec::Depolarizing { .. } => Some("p"),
            ChannelSpec::AmplitudeDamping { .. } => Some("gamma"),
            ChannelSpec::Rtn { .. } => Some("t"),
            ChannelSpec::Identity | ChannelSpec::Kraus { .. } => None,
        }
    }

    pub fn param(&self) -> Option<f64> {
        match *self {
            ChannelSpec::PhaseDamping { lambda } => Some(lambda),
            ChannelSpec::PhaseFlip { p }
            | ChannelSpec::BitFlip { p }
            | ChannelSpec::BitPhaseFlip { p }
            | ChannelSpec::Depolarizing { p } => Some(p),
            ChannelSpec::AmplitudeDamping { gamma } => Some(gamma),
            ChannelSpec::Rtn { t, .. } => Some(t),
            ChannelSpec::Identity | ChannelSpec::Kraus { .. } => None,
        }
    }

    /// Copy with the scheduled parameter replaced; `None` if there is none.
    pub fn with_param(&self, value: f64) -> Option<ChannelSpec> {
        let mut out = self.clone();
        match &mut out {
            ChannelSpec::PhaseDamping { lambda } => *lambda = value,
            ChannelSpec::PhaseFlip { p }
            | ChannelSpec::BitFlip { p }
            | ChannelSpec::BitPhaseFlip { p }
            | ChannelSpec::Depolarizing { p } => *p = value,
            ChannelSpec::AmplitudeDamping { gamma } => *gamma = value,
            ChannelSpec::Rtn { t, .. } => *t = value,
            ChannelSpec::Identity | ChannelSpec::Kraus { .. } => return None,
        }
        Some(out)
    }

    /// Catalog channel, or `None` for a Kraus file.
    pub fn catalog(&self) -> Option<postselect::Result<KrausChannel64>> {
        Some(match *self {
            ChannelSpec::Identity => Ok(KrausChannel64::identity(Dim::Two)),
            ChannelSpec::PhaseDamping { lambda } => KrausChannel64::phase_damping(lambda),
            ChannelSpec::PhaseFlip { p } => KrausChannel64::phase_flip(p),
            ChannelSpec::BitFlip { p } => KrausChannel64::bit_flip(p),
            ChannelSpec::BitPhaseFlip { p } => KrausChannel64::bit_phase_flip(p),
            ChannelSpec::AmplitudeDamping { gamma } => KrausChannel64::amplitude_damping(gamma),
            ChannelSpec::Depolarizing { p } => KrausChannel64::depolarizing(p),
            ChannelSpec::Rtn { nu, coupling, t } => KrausChannel64::rtn(nu, coupling, t),
            ChannelSpec::Kraus { .. } => return None,
        })
    }

    /// Builds the channel; `field` prefixes error paths.
    pub fn build(&self, base: &Path, field: &str) -> Result<KrausChannel64, Failure> {
        match (self, self.catalog()) {
            (ChannelSpec::Kraus { path }, _) => load_kraus(&base.join(path), &format!("{field}.path")),
            (_, Some(built)) => built.map_err(|e| match e {
                Error::ParameterOutOfRange { name, .. } => Failure::schema(format!("{field}.{name}"), e),
                other => Failure::schema(field, other),
            }),
            (_, None) => unreachable!("only Kraus files lack a catalog entry"),
        }
    }
}

/// Kraus-set file: `dim` and one `[[kraus]]` table per element with
/// row-major `re` and optional `im` arrays of `dim²` entries.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KrausFile {
    #[serde(default)]
    name: Option<String>,
    dim: usize,
    kraus: Vec<KrausEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KrausEntry {
    re: Vec<f64>,
    #[serde(default)]
    im: Vec<f64>,
}

fn load_kraus(path: &Path, field: &str) -> Result<KrausChannel64, Failure> {
    let raw = std::fs::read_to_string(path).map_err(|e| Failure::schema(field, format!("{}: {e}", path.display())))?;
    let file: KrausFile = parse_toml(&raw).map_err(|f| f.within(&format!("{field} ({})", path.display())))?;
    let dim = Dim::from_size(file.dim).map_err(|e| Failure::schema(format!("{field}: dim"), e))?;
    let n = file.dim * file.dim;
    let mut ops = Vec::with_capacity(file.kraus.len());
    for (k, entry) in file.kraus.iter().enumerate() {
        let at = format!("{field}: kraus[{k}]");
        if entry.re.len() != n || !(entry.im.is_empty() || entry.im.len() == n) {
            return Err(Failure::schema(at, format!("expected {n} entries per part")));
        }
        let entries: Vec<Complex<f64>> = (0..n)
            .map(|i| Complex::new(entry.re[i], entry.im.get(i).copied().unwrap_or(0.0)))
            .collect();
        ops.push(Operator64::from_rows(dim, &entries).map_err(|e| Failure::schema(at, e))?);
    }
    let name = file.name.unwrap_or_else(|| path.display().to_string());
    KrausChannel64::new(name, ops).map_err(|e| Failure::schema(field, e))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionName {
    #[default]
    None,
    BitFlip,
    BitPhaseFlip,
    /// Picks the flip kind from the signal channel, or none.
    Auto,
}

fn half_pi() -> f64 {
    FRAC_PI_2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub epsilon: f64,
    #[serde(default = "half_pi")]
    pub axis: f64,
    #[serde(default)]
    pub extended: bool,
    #[serde(default)]
    pub correction: CorrectionName,
}

/// Exactly one of a waveform file or a fixed phase.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Input {
    pub waveform: Option<PathBuf>,
    pub phi: Option<f64>,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub photons: Option<u64>,
    #[serde(default = "one")]
    pub trials: u64,
    pub allocation: Option<Vec<f64>>,
}

/// Exactly one of an absolute threshold or a multiple of the spread of `Δφ`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub gamma: Option<f64>,
    pub gamma_sigma: Option<f64>,
}

/// Piecewise-linear schedule of the signal channel's parameter over `t`,
/// held constant outside `[times[0], times[last]]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timeline {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Timeline {
    pub fn validate(&self) -> Result<(), Failure> {
        if self.times.is_empty() || self.times.len() != self.values.len() {
            return Err(Failure::schema("timeline", "times and values must be nonempty and of equal length"));
        }
        if let Some(i) = self.times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Failure::schema(format!("timeline.times[{}]", i + 1), "times must increase strictly"));
        }
        if let Some(i) = self.values.iter().chain(&self.times).position(|v| !v.is_finite()) {
            return Err(Failure::schema("timeline", format!("entry {i} is not finite")));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> f64 {
        let (ts, vs) = (&self.times, &self.values);
        if t <= ts[0] {
            return vs[0];
        }
        let last = ts.len() - 1;
        if t >= ts[last] {
            return vs[last];
        }
        let i = ts.partition_point(|&x| x <= t) - 1;
        let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
        vs[i] + w * (vs[i + 1] - vs[i])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkName {
    #[default]
    Single,
    Epr,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub link: LinkName,
    pub phi: f64,
    pub photons: Vec<u64>,
    pub epsilons: Option<Vec<f64>>,
    pub params: Option<Vec<f64>>,
    pub gammas: Vec<f64>,
}

pub(crate) fn parse_toml<T: serde::de::DeserializeOwned>(raw: &str) -> Result<T, Failure> {
    let de = toml::de::Deserializer::parse(raw).map_err(|e| Failure::schema("<document>", e.to_string().trim()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Failure::schema(if path == "." { "<document>".into() } else { path }, e.into_inner().message().trim())
    })
}

impl Config {
    pub fn parse(raw: &str) -> Result<Self, Failure> {
        parse_toml(raw)
    }
}
