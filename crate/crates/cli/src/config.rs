//! Scenario configuration: strict JSON with JSON-pointer error paths.

use std::fmt;
use std::path::Path;

use qgauge::{BasisSpec, Boundary, MomentumScheme, Statistics};
use serde::{Deserialize, Serialize};

use crate::rules::{find_rule, RULES};

/// Parse or validation failure located by a JSON pointer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    fn at(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pointer = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "{pointer}: {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: SystemConfig,
    pub ensemble: EnsembleConfig,
    pub checks: Vec<CheckConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub basis: BasisConfig,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
    /// Particle number, or the largest sector for the grand ensemble.
    #[serde(default = "one_particle")]
    pub particles: usize,
    #[serde(default = "distinguishable")]
    pub statistics: Statistics,
    #[serde(default)]
    pub interaction: Option<InteractionConfig>,
    pub external: ExternalConfig,
    #[serde(default)]
    pub inject_asymmetry: Option<f64>,
    #[serde(default = "asymmetry_seed")]
    pub asymmetry_seed: u64,
}

fn one() -> f64 {
    1.0
}

fn one_particle() -> usize {
    1
}

fn distinguishable() -> Statistics {
    Statistics::Distinguishable
}

fn asymmetry_seed() -> u64 {
    7
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisConfig {
    Oscillator {
        n_max: usize,
        #[serde(default = "one")]
        omega: f64,
    },
    Grid {
        points: usize,
        length: f64,
        #[serde(default = "periodic")]
        boundary: Boundary,
        #[serde(default = "spectral")]
        momentum: MomentumScheme,
    },
}

fn periodic() -> Boundary {
    Boundary::Periodic
}

fn spectral() -> MomentumScheme {
    MomentumScheme::Spectral
}

/// Gaussian pair potential `strength exp(-(x1 - x2)^2 / (2 width^2))`.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    pub strength: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ExternalConfig {
    Free,
    Harmonic { omega: f64 },
    Tilted { omega: f64, force: f64 },
    /// Piecewise-linear interpolation of `(x, V)` pairs, constant outside.
    Tabulated { points: Vec<(f64, f64)> },
}

impl ExternalConfig {
    pub fn value(&self, mass: f64, x: f64) -> f64 {
        match self {
            ExternalConfig::Free => 0.0,
            ExternalConfig::Harmonic { omega } => 0.5 * mass * omega * omega * x * x,
            ExternalConfig::Tilted { omega, force } => 0.5 * mass * omega * omega * x * x + force * x,
            ExternalConfig::Tabulated { points } => {
                let (i, t) = locate(points, x);
                match t {
                    None => points[i].1,
                    Some(t) => points[i].1 + t * (points[i + 1].1 - points[i].1),
                }
            }
        }
    }

    pub fn derivative(&self, mass: f64, x: f64) -> f64 {
        match self {
            ExternalConfig::Free => 0.0,
            ExternalConfig::Harmonic { omega } => mass * omega * omega * x,
            ExternalConfig::Tilted { omega, force } => mass * omega * omega * x + force,
            ExternalConfig::Tabulated { points } => match locate(points, x) {
                (_, None) => 0.0,
                (i, Some(_)) => (points[i + 1].1 - points[i].1) / (points[i + 1].0 - points[i].0),
            },
        }
    }
}

/// Segment index and fractional position, `None` outside the table.
fn locate(points: &[(f64, f64)], x: f64) -> (usize, Option<f64>) {
    let last = points.len() - 1;
    if x <= points[0].0 {
        return (0, None);
    }
    if x >= points[last].0 {
        return (last, None);
    }
    let i = points.partition_point(|p| p.0 <= x) - 1;
    (i, Some((x - points[i].0) / (points[i + 1].0 - points[i].0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Canonical,
    Grand,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "canonical")]
    pub kind: EnsembleKind,
    pub betas: Vec<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
}

fn canonical() -> EnsembleKind {
    EnsembleKind::Canonical
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolConfig {
    NoDrive { duration: f64 },
    TrapQuench { omega: f64, duration: f64 },
    TiltQuench { force: f64, duration: f64 },
}

impl ProtocolConfig {
    pub fn duration(&self) -> f64 {
        match self {
            ProtocolConfig::NoDrive { duration }
            | ProtocolConfig::TrapQuench { duration, .. }
            | ProtocolConfig::TiltQuench { duration, .. } => *duration,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProtocolConfig::NoDrive { .. } => "no_drive".into(),
            ProtocolConfig::TrapQuench { omega, .. } => format!("trap_quench(omega={omega})"),
            ProtocolConfig::TiltQuench { force, .. } => format!("tilt_quench(force={force})"),
        }
    }
}

/// One requested rule with its options. Which options apply depends on the
/// rule; options a rule does not use are rejected.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocols: Option<Vec<ProtocolConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doublings: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<usize>,
}

impl CheckConfig {
    pub fn new(rule: &str) -> Self {
        Self {
            rule: rule.into(),
            ..Self::default()
        }
    }

    fn present_options(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let flags = [
            ("observable", self.observable.is_some()),
            ("observables", self.observables.is_some()),
            ("pairs", self.pairs.is_some()),
            ("lambda", self.lambda.is_some()),
            ("lambdas", self.lambdas.is_some()),
            ("step", self.step.is_some()),
            ("protocols", self.protocols.is_some()),
            ("times", self.times.is_some()),
            ("stride", self.stride.is_some()),
            ("count", self.count.is_some()),
            ("doublings", self.doublings.is_some()),
            ("subspace", self.subspace.is_some()),
        ];
        for (name, set) in flags {
            if set {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
        }
    }
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

/// Observable builtins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableSpec {
    Identity,
    SumX,
    BetaH0,
    NHat,
    H0,
    RandomHermitian(u64),
}

impl ObservableSpec {
    pub fn parse(text: &str) -> Result<Self, String> {
        let t = text.trim();
        match t {
            "identity" => return Ok(Self::Identity),
            "sum_x" => return Ok(Self::SumX),
            "beta_H0" => return Ok(Self::BetaH0),
            "N_hat" => return Ok(Self::NHat),
            "H0" => return Ok(Self::H0),
            _ => {}
        }
        if let Some(inner) = t.strip_prefix("random_hermitian(").and_then(|s| s.strip_suffix(')')) {
            return inner
                .trim()
                .parse::<u64>()
                .map(Self::RandomHermitian)
                .map_err(|_| format!("invalid seed in observable '{text}'"));
        }
        Err(format!(
            "unknown observable '{text}' (expected identity, sum_x, beta_H0, N_hat, H0 or random_hermitian(seed))"
        ))
    }
}

impl fmt::Display for ObservableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::SumX => write!(f, "sum_x"),
            Self::BetaH0 => write!(f, "beta_H0"),
            Self::NHat => write!(f, "N_hat"),
            Self::H0 => write!(f, "H0"),
            Self::RandomHermitian(s) => write!(f, "random_hermitian({s})"),
        }
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Unknown => {}
        }
    }
    out
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        ConfigError::at(pointer, e.into_inner().to_string())
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> anyhow::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))
}

fn positive(value: f64, pointer: &str, what: &str) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::at(pointer, format!("{what} must be positive and finite, got {value}")))
    }
}

pub fn validate(cfg: &ScenarioConfig) -> Result<(), ConfigError> {
    let s = &cfg.system;
    positive(s.hbar, "/system/hbar", "hbar")?;
    positive(s.mass, "/system/mass", "mass")?;
    cfg.system
        .basis_spec()
        .validate()
        .map_err(|e| ConfigError::at("/system/basis", e.to_string()))?;
    if !(1..=2).contains(&s.particles) {
        return Err(ConfigError::at(
            "/system/particles",
            format!("particle number must be 1 or 2, got {}", s.particles),
        ));
    }
    if let Some(i) = &s.interaction {
        positive(i.width, "/system/interaction/width", "interaction width")?;
    }
    if let ExternalConfig::Tabulated { points } = &s.external {
        if points.len() < 2 {
            return Err(ConfigError::at("/system/external/tabulated/points", "need at least two points"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(ConfigError::at(
                "/system/external/tabulated/points",
                "positions must be strictly increasing",
            ));
        }
    }
    if let Some(a) = s.inject_asymmetry {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(ConfigError::at("/system/inject_asymmetry", "amplitude must be non-negative"));
        }
    }
    let e = &cfg.ensemble;
    if e.betas.is_empty() {
        return Err(ConfigError::at("/ensemble/betas", "empty beta list"));
    }
    for (i, b) in e.betas.iter().enumerate() {
        positive(*b, &format!("/ensemble/betas/{i}"), "beta")?;
    }
    match (e.kind, e.mu) {
        (EnsembleKind::Grand, None) => {
            return Err(ConfigError::at("/ensemble/mu", "grand ensemble needs a chemical potential"))
        }
        (EnsembleKind::Canonical, Some(_)) => {
            return Err(ConfigError::at("/ensemble/mu", "chemical potential given for a canonical ensemble"))
        }
        _ => {}
    }
    if cfg.checks.is_empty() {
        return Err(ConfigError::at("/checks", "no checks requested"));
    }
    for (i, check) in cfg.checks.iter().enumerate() {
        validate_check(cfg, i, check)?;
    }
    Ok(())
}

fn validate_check(cfg: &ScenarioConfig, i: usize, check: &CheckConfig) -> Result<(), ConfigError> {
    let base = format!("/checks/{i}");
    let rule = find_rule(&check.rule).ok_or_else(|| {
        let known: Vec<&str> = RULES.iter().map(|r| r.id).collect();
        ConfigError::at(
            format!("{base}/rule"),
            format!("unknown rule id '{}' (known: {})", check.rule, known.join(", ")),
        )
    })?;
    for opt in check.present_options() {
        if !rule.options.contains(&opt) {
            return Err(ConfigError::at(
                format!("{base}/{opt}"),
                format!("option '{opt}' does not apply to rule '{}'", rule.id),
            ));
        }
    }
    if check.stride.is_some() && check.count.is_some() {
        return Err(ConfigError::at(format!("{base}/count"), "give either stride or count, not both"));
    }
    if check.stride == Some(0) {
        return Err(ConfigError::at(format!("{base}/stride"), "stride must be at least 1"));
    }
    if check.count == Some(0) {
        return Err(ConfigError::at(format!("{base}/count"), "count must be at least 1"));
    }
    if let Some(o) = &check.observable {
        ObservableSpec::parse(o).map_err(|m| ConfigError::at(format!("{base}/observable"), m))?;
    }
    if let Some(list) = &check.observables {
        if list.is_empty() {
            return Err(ConfigError::at(format!("{base}/observables"), "empty observable list"));
        }
        for (j, o) in list.iter().enumerate() {
            ObservableSpec::parse(o).map_err(|m| ConfigError::at(format!("{base}/observables/{j}"), m))?;
        }
    }
    if let Some(pairs) = &check.pairs {
        if pairs.is_empty() {
            return Err(ConfigError::at(format!("{base}/pairs"), "empty pair list"));
        }
        for (j, (a, b)) in pairs.iter().enumerate() {
            ObservableSpec::parse(a).map_err(|m| ConfigError::at(format!("{base}/pairs/{j}/0"), m))?;
            ObservableSpec::parse(b).map_err(|m| ConfigError::at(format!("{base}/pairs/{j}/1"), m))?;
        }
    }
    if let Some(l) = check.lambdas.as_ref() {
        if l.is_empty() {
            return Err(ConfigError::at(format!("{base}/lambdas"), "empty lambda list"));
        }
    }
    if let Some(step) = check.step {
        positive(step, &format!("{base}/step"), "step")?;
    }
    if let Some(protocols) = &check.protocols {
        if protocols.is_empty() {
            return Err(ConfigError::at(format!("{base}/protocols"), "empty protocol list"));
        }
        for (j, p) in protocols.iter().enumerate() {
            positive(p.duration(), &format!("{base}/protocols/{j}"), "protocol duration")?;
        }
    }
    if let Some(times) = &check.times {
        if times.is_empty() {
            return Err(ConfigError::at(format!("{base}/times"), "empty time list"));
        }
        let longest = check
            .protocols
            .as_ref()
            .map(|ps| ps.iter().map(ProtocolConfig::duration).fold(f64::INFINITY, f64::min))
            .unwrap_or(f64::INFINITY);
        for (j, t) in times.iter().enumerate() {
            if !(*t >= 0.0 && *t <= longest) {
                return Err(ConfigError::at(
                    format!("{base}/times/{j}"),
                    format!("time {t} outside [0, {longest}]"),
                ));
            }
        }
    }
    if rule.needs_grand && cfg.ensemble.kind != EnsembleKind::Grand {
        return Err(ConfigError::at(format!("{base}/rule"), format!("rule '{}' needs a grand ensemble", rule.id)));
    }
    if rule.needs_grid && !matches!(cfg.system.basis, BasisConfig::Grid { .. }) {
        return Err(ConfigError::at(format!("{base}/rule"), format!("rule '{}' needs a grid basis", rule.id)));
    }
    if rule.id == "fig1" {
        if !matches!(cfg.system.basis, BasisConfig::Oscillator { .. }) {
            return Err(ConfigError::at(format!("{base}/rule"), "fig1 needs an oscillator basis"));
        }
        if cfg.system.particles != 1 || cfg.ensemble.kind != EnsembleKind::Canonical {
            return Err(ConfigError::at(format!("{base}/rule"), "fig1 needs one particle in the canonical ensemble"));
        }
    }
    Ok(())
}

impl SystemConfig {
    pub fn basis_spec(&self) -> BasisSpec {
        let spec = match self.basis {
            BasisConfig::Oscillator { n_max, omega } => BasisSpec::oscillator(n_max, omega),
            BasisConfig::Grid {
                points,
                length,
                boundary,
                momentum,
            } => BasisSpec::grid(points, length, boundary, momentum),
        };
        spec.with_constants(self.hbar, self.mass)
    }

    /// Trap frequency of the external potential, if it has one.
    pub fn trap_omega(&self) -> Option<f64> {
        match self.external {
            ExternalConfig::Harmonic { omega } | ExternalConfig::Tilted { omega, .. } => Some(omega),
            _ => None,
        }
    }
}
