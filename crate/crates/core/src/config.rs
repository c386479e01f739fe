//! Scenario configuration (TOML).

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coordination::stable_p_set;
use crate::curve::{gcd, LissajousParams};
use crate::error::{Error, Result};
use crate::netsim::{LinkCommand, LinkOverride, NetworkConfig};
use crate::planning::{self, MissionSpec};
use crate::tracker::MpcConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    /// Simulated time (s).
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    /// Write every k-th tick to the trace.
    #[serde(default = "one")]
    pub log_every: usize,
    pub curve: LissajousParams,
    pub swarm: SwarmSection,
    pub mission: MissionSection,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub resilience: ResilienceSection,
    #[serde(default)]
    pub failures: Vec<FailureEvent>,
    #[serde(default)]
    pub targets: TargetSection,
    #[serde(default)]
    pub coverage: CoverageSection,
    #[serde(default)]
    pub safety: SafetySection,
    #[serde(default)]
    pub overrides: Overrides,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    Kuramoto,
    /// Constant rate, no neighbour feedback.
    OpenLoop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmSection {
    #[serde(rename = "N")]
    pub n: usize,
    pub omega: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub dt: f64,
    /// Equilibrium index; defaults to the smallest stable value coprime with N.
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default)]
    pub coupling: Coupling,
    /// Integration substeps per tick for stiff gains.
    #[serde(default = "one")]
    pub substeps: usize,
    /// Ticks between broadcasts.
    #[serde(default = "default_comm_period")]
    pub comm_period: usize,
    /// Half-width of the uniform phase offset applied to each robot at start.
    #[serde(default)]
    pub perturbation: f64,
    /// Robots removed at random from the start (permanently failed).
    #[serde(default)]
    pub inactive: usize,
}

fn default_comm_period() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionSection {
    #[serde(rename = "A")]
    pub half_width: f64,
    #[serde(rename = "B")]
    pub half_height: f64,
    /// Sensing radius; defaults to `eta` times the detection bound.
    #[serde(default)]
    pub r_s: Option<f64>,
    #[serde(default = "unit")]
    pub eta: f64,
    #[serde(default = "one")]
    pub kappa: usize,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackerMode {
    /// Robots sit exactly on their reference.
    #[default]
    Ideal,
    Mpc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerSection {
    #[serde(default)]
    pub mode: TrackerMode,
    #[serde(default)]
    pub mpc: MpcConfig,
    /// Standard deviation of the measured-position noise (m).
    #[serde(default = "default_noise")]
    pub position_noise: f64,
    /// Stationary standard deviation of the gust acceleration (m/s²).
    #[serde(default = "default_gust_sigma")]
    pub gust_sigma: f64,
    /// Gust correlation time (s).
    #[serde(default = "default_gust_tau")]
    pub gust_tau: f64,
}

fn default_noise() -> f64 {
    0.1
}
fn default_gust_sigma() -> f64 {
    0.5
}
fn default_gust_tau() -> f64 {
    2.0
}

impl Default for TrackerSection {
    fn default() -> Self {
        Self {
            mode: TrackerMode::Ideal,
            mpc: MpcConfig::default(),
            position_noise: default_noise(),
            gust_sigma: default_gust_sigma(),
            gust_tau: default_gust_tau(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkStateName {
    Up,
    Down,
    DelayOverride,
    ClearOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEvent {
    pub edge: (usize, usize),
    pub at: f64,
    pub state: LinkStateName,
    #[serde(default)]
    pub delay: Option<f64>,
}

impl LinkEvent {
    pub fn command(&self) -> Result<LinkCommand> {
        Ok(match self.state {
            LinkStateName::Up => LinkCommand::Up,
            LinkStateName::Down => LinkCommand::Down,
            LinkStateName::ClearOverride => LinkCommand::ClearOverride,
            LinkStateName::DelayOverride => LinkCommand::DelayOverride {
                delay: self.delay.ok_or_else(|| {
                    Error::Config(vec!["network.events: delay_override needs `delay`".into()])
                })?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default)]
    pub base_delay: f64,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub drop_prob: f64,
    #[serde(default)]
    pub per_link_overrides: Vec<LinkOverride>,
    #[serde(default)]
    pub events: Vec<LinkEvent>,
}

impl NetworkSection {
    pub fn to_config(&self, seed: u64) -> NetworkConfig {
        NetworkConfig {
            base_delay: self.base_delay,
            jitter: self.jitter,
            drop_prob: self.drop_prob,
            per_link_overrides: self.per_link_overrides.clone(),
            seed,
        }
    }

    /// Zero delay, no loss and no scheduled events.
    pub fn is_ideal(&self) -> bool {
        self.base_delay == 0.0
            && self.jitter == 0.0
            && self.drop_prob == 0.0
            && self.per_link_overrides.is_empty()
            && self.events.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResilienceSection {
    /// Run the failure-resilient protocol (detection, spoofing, rejoin).
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_tau_fail")]
    pub tau_fail: f64,
    /// Phase guard; defaults to 15% of the equilibrium spacing.
    #[serde(default)]
    pub eps_th: Option<f64>,
    /// Distance trigger; defaults to twice the inflated detection radius.
    #[serde(default)]
    pub two_eta_rs: Option<f64>,
    #[serde(default = "yes")]
    pub distance_trigger: bool,
    /// Parking point outside the mission rectangle.
    #[serde(default)]
    pub p_out: Option<[f64; 3]>,
    /// Local ring residual below which spacing is sampled.
    #[serde(default = "default_capture")]
    pub capture_threshold: f64,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    /// Position tolerance (m) for completing a rejoin.
    #[serde(default = "unit")]
    pub rejoin_tolerance: f64,
}

fn default_tau_fail() -> f64 {
    1.0
}
fn default_capture() -> f64 {
    1e-2
}
fn default_smoothing() -> f64 {
    crate::resilience::DEFAULT_SMOOTHING
}

impl Default for ResilienceSection {
    fn default() -> Self {
        Self {
            enabled: true,
            tau_fail: default_tau_fail(),
            eps_th: None,
            two_eta_rs: None,
            distance_trigger: true,
            p_out: None,
            capture_threshold: default_capture(),
            smoothing: default_smoothing(),
            rejoin_tolerance: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// Robot declares failure, retreats and later rejoins.
    Retreat,
    /// Both ring links of the robot go down.
    LinkStall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureEvent {
    pub robot: usize,
    pub start: f64,
    pub duration: f64,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    #[serde(default)]
    pub count: usize,
    /// Maximum target speed (m/s).
    #[serde(default = "unit")]
    pub speed: f64,
    /// End the run once every target has been detected.
    #[serde(default)]
    pub stop_when_detected: bool,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            count: 0,
            speed: 1.0,
            stop_when_detected: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Cell edge (m); defaults by mission size.
    #[serde(default)]
    pub cell: Option<f64>,
    /// Footprint radius; defaults to the complete-coverage bound.
    #[serde(default)]
    pub radius: Option<f64>,
}

impl Default for CoverageSection {
    fn default() -> Self {
        Self {
            enabled: true,
            cell: None,
            radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetySection {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// x-y distance that engages the offset; defaults to twice the encumbrance bound.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default = "unit")]
    pub offset: f64,
}

impl Default for SafetySection {
    fn default() -> Self {
        Self {
            enabled: true,
            threshold: None,
            offset: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Run even when the guarantee check fails.
    #[serde(default)]
    pub allow_guarantee_violation: bool,
}

/// Smallest stable equilibrium index that puts every robot in its own slot.
pub fn default_p(n: usize) -> Option<usize> {
    stable_p_set(n)
        .into_iter()
        .find(|&p| gcd(n as u64, p as u64) == 1)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        let problems = cfg.check();
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(v) => Error::Config(
                v.into_iter()
                    .map(|m| format!("{}: {m}", path.display()))
                    .collect(),
            ),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn n(&self) -> usize {
        self.swarm.n
    }

    pub fn p(&self) -> usize {
        self.swarm
            .p
            .or_else(|| default_p(self.swarm.n))
            .unwrap_or(1)
    }

    pub fn spacing(&self) -> f64 {
        TAU * self.p() as f64 / self.swarm.n as f64
    }

    pub fn detection_bound(&self) -> f64 {
        planning::min_radius_detection(
            self.mission.half_width,
            self.mission.half_height,
            self.swarm.n,
            self.mission.kappa.max(1),
        )
    }

    pub fn r_s(&self) -> f64 {
        self.mission
            .r_s
            .unwrap_or_else(|| planning::inflated_radius(self.detection_bound(), self.mission.eta))
    }

    pub fn mission_spec(&self) -> MissionSpec {
        MissionSpec {
            half_width: self.mission.half_width,
            half_height: self.mission.half_height,
            r_s: self.r_s(),
            eta: self.mission.eta,
            kappa: self.mission.kappa,
            n: self.swarm.n,
        }
    }

    pub fn eps_th(&self) -> f64 {
        self.resilience.eps_th.unwrap_or(0.15 * self.spacing())
    }

    pub fn two_eta_rs(&self) -> f64 {
        self.resilience
            .two_eta_rs
            .unwrap_or(2.0 * planning::inflated_radius(self.detection_bound(), self.mission.eta))
    }

    pub fn p_out(&self) -> [f64; 3] {
        self.resilience
            .p_out
            .unwrap_or([self.mission.half_width + 10.0, 0.0, self.curve.amp_z])
    }

    pub fn coverage_radius(&self) -> f64 {
        self.coverage.radius.unwrap_or_else(|| {
            planning::min_radius_coverage(
                self.mission.half_width,
                self.mission.half_height,
                self.curve.freq_x,
                self.curve.freq_y,
            )
        })
    }

    pub fn coverage_cell(&self) -> f64 {
        self.coverage.cell.unwrap_or_else(|| {
            if self.mission.half_width.max(self.mission.half_height) > 50.0 {
                2.0
            } else {
                0.5
            }
        })
    }

    pub fn safety_threshold(&self) -> f64 {
        self.safety.threshold.unwrap_or_else(|| {
            2.0 * planning::max_encumbrance_2d(
                self.mission.half_width,
                self.mission.half_height,
                self.curve.freq_x,
                self.curve.freq_y,
                self.swarm.n,
            )
        })
    }

    pub fn ticks(&self) -> usize {
        (self.duration / self.swarm.dt).round() as usize
    }

    /// All invariant violations, each prefixed with its key path.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |path: &str, msg: String| out.push(format!("{path}: {msg}"));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            push("duration", "must be > 0".into());
        }
        if self.log_every == 0 {
            push("log_every", "must be >= 1".into());
        }
        for p in self.curve.check() {
            push("curve", p);
        }
        if self.curve.amp_x != self.mission.half_width
            || self.curve.amp_y != self.mission.half_height
        {
            push("curve", "A and B must equal mission.A and mission.B".into());
        }
        let s = &self.swarm;
        if s.n == 0 {
            push("swarm.N", "must be >= 1".into());
        }
        if !(s.dt > 0.0) {
            push("swarm.dt", "must be > 0".into());
        }
        if !(s.omega > 0.0 && s.omega.is_finite()) {
            push("swarm.omega", "must be > 0".into());
        }
        if !(s.k >= 0.0 && s.k.is_finite()) {
            push("swarm.K", "must be >= 0".into());
        }
        if s.substeps == 0 {
            push("swarm.substeps", "must be >= 1".into());
        } else if s.dt > 0.0 && s.k * s.dt / s.substeps as f64 > crate::coordination::MAX_GAIN_STEP
        {
            push(
                "swarm",
                format!(
                    "K*dt/substeps = {} exceeds {}; raise swarm.substeps",
                    s.k * s.dt / s.substeps as f64,
                    crate::coordination::MAX_GAIN_STEP
                ),
            );
        }
        if s.comm_period == 0 {
            push("swarm.comm_period", "must be >= 1".into());
        }
        if s.n >= 2 {
            match s.p {
                Some(p) if !stable_p_set(s.n).contains(&p) => push(
                    "swarm.p",
                    format!("p = {p} is not a stable equilibrium index for N = {}", s.n),
                ),
                None if default_p(s.n).is_none() => push(
                    "swarm.p",
                    format!("no stable equilibrium index exists for N = {}", s.n),
                ),
                _ => {}
            }
        }
        if s.inactive > s.n / 2 {
            push(
                "swarm.inactive",
                format!("at most N/2 = {} robots may be inactive", s.n / 2),
            );
        }
        if !(s.perturbation >= 0.0) {
            push("swarm.perturbation", "must be >= 0".into());
        }
        let m = &self.mission;
        if !(m.half_width > 0.0 && m.half_height > 0.0) {
            push("mission", "A and B must be > 0".into());
        }
        if m.kappa == 0 {
            push("mission.kappa", "must be >= 1".into());
        }
        if let Some(r) = m.r_s {
            if !(r > 0.0) {
                push("mission.r_s", "must be > 0".into());
            }
        }
        if !(m.eta >= 1.0) {
            push("mission.eta", "must be >= 1".into());
        }
        for p in self.tracker.mpc.check() {
            push("tracker.mpc", p);
        }
        if self.tracker.mode == TrackerMode::Mpc && s.dt > 0.0 {
            let ratio = self.tracker.mpc.dt / s.dt;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                push(
                    "tracker.mpc.dt",
                    "must be a positive multiple of swarm.dt".into(),
                );
            }
        }
        if !(self.tracker.position_noise >= 0.0) {
            push("tracker.position_noise", "must be >= 0".into());
        }
        if !(self.tracker.gust_sigma >= 0.0) || !(self.tracker.gust_tau > 0.0) {
            push("tracker", "gust_sigma must be >= 0 and gust_tau > 0".into());
        }
        for p in self.network.to_config(0).check() {
            push("network", p);
        }
        let edge_ok = |a: usize, b: usize| {
            s.n >= 2 && a < s.n && b < s.n && ((a + 1) % s.n == b || (b + 1) % s.n == a)
        };
        for (k, o) in self.network.per_link_overrides.iter().enumerate() {
            if !edge_ok(o.edge.0, o.edge.1) {
                push(
                    &format!("network.per_link_overrides[{k}]"),
                    format!("{:?} is not a ring edge", o.edge),
                );
            }
        }
        for (k, e) in self.network.events.iter().enumerate() {
            let path = format!("network.events[{k}]");
            if !edge_ok(e.edge.0, e.edge.1) {
                push(&path, format!("{:?} is not a ring edge", e.edge));
            }
            if let Err(Error::Config(v)) = e.command() {
                for m in v {
                    push(&path, m);
                }
            }
            if !(e.at >= 0.0) {
                push(&path, "at must be >= 0".into());
            }
        }
        let r = &self.resilience;
        if !(r.tau_fail > 0.0) {
            push("resilience.tau_fail", "must be > 0".into());
        }
        if let Some(e) = r.eps_th {
            if !(e > 0.0) {
                push("resilience.eps_th", "must be > 0".into());
            }
        }
        if let Some(d) = r.two_eta_rs {
            if !(d > 0.0) {
                push("resilience.two_eta_rs", "must be > 0".into());
            }
        }
        if !(r.capture_threshold > 0.0) {
            push("resilience.capture_threshold", "must be > 0".into());
        }
        if !(r.smoothing > 0.0 && r.smoothing <= 1.0) {
            push("resilience.smoothing", "must lie in (0, 1]".into());
        }
        if !(r.rejoin_tolerance > 0.0) {
            push("resilience.rejoin_tolerance", "must be > 0".into());
        }
        let p_out = self.p_out();
        if p_out[0].abs() <= m.half_width && p_out[1].abs() <= m.half_height {
            push(
                "resilience.p_out",
                "must lie outside the mission rectangle".into(),
            );
        }
        for (k, f) in self.failures.iter().enumerate() {
            let path = format!("failures[{k}]");
            if f.robot >= s.n {
                push(&path, format!("robot {} out of range", f.robot));
            }
            if !(f.start >= 0.0 && f.duration > 0.0) {
                push(&path, "start must be >= 0 and duration > 0".into());
            }
            if f.kind == FailureKind::LinkStall && s.n < 2 {
                push(&path, "link stalls need at least two robots".into());
            }
        }
        if !(self.targets.speed >= 0.0) {
            push("targets.speed", "must be >= 0".into());
        }
        if let Some(c) = self.coverage.cell {
            if !(c > 0.0) {
                push("coverage.cell", "must be > 0".into());
            }
        }
        if let Some(r) = self.coverage.radius {
            if !(r > 0.0) {
                push("coverage.radius", "must be > 0".into());
            }
        }
        if let Some(t) = self.safety.threshold {
            if !(t > 0.0) {
                push("safety.threshold", "must be > 0".into());
            }
        }
        if !(self.safety.offset >= 0.0) {
            push("safety.offset", "must be >= 0".into());
        }
        out
    }
}

/// Numeric leaves of a TOML document as dotted paths.
pub fn numeric_paths(value: &toml::Value) -> Vec<String> {
    fn walk(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
        match v {
            toml::Value::Integer(_) | toml::Value::Float(_) => out.push(prefix.to_string()),
            toml::Value::Table(t) => {
                for (k, child) in t {
                    let path = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&path, child, out);
                }
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out.sort();
    out
}

/// Copy of `base` with the numeric field at `axis` set to `value`.
///
/// Any path into a table may be swept, including optional fields that are
/// absent from the file; the result is re-validated.
pub fn with_axis(base: &ScenarioConfig, axis: &str, value: f64) -> Result<ScenarioConfig> {
    let mut doc = toml::Value::try_from(base).map_err(|e| Error::Config(vec![e.to_string()]))?;
    let mut parts = axis.split('.').peekable();
    let mut cursor = &mut doc;
    let invalid = |doc: &ScenarioConfig| {
        let full = toml::Value::try_from(doc).expect("serializable");
        Error::Config(vec![format!(
            "`{axis}` is not a sweepable field; numeric fields are: {}",
            numeric_paths(&full).join(", ")
        )])
    };
    while let Some(part) = parts.next() {
        let table = match cursor.as_table_mut() {
            Some(t) => t,
            None => return Err(invalid(base)),
        };
        if parts.peek().is_none() {
            let new = match table.get(part) {
                Some(toml::Value::Integer(_)) => {
                    if value.fract() != 0.0 {
                        return Err(Error::Config(vec![format!(
                            "{axis} takes integers (got {value})"
                        )]));
                    }
                    toml::Value::Integer(value as i64)
                }
                Some(toml::Value::Float(_)) => toml::Value::Float(value),
                Some(_) => return Err(invalid(base)),
                // optional field absent from the file: try a float first
                None => toml::Value::Float(value),
            };
            table.insert(part.to_string(), new);
            break;
        }
        cursor = match table.get_mut(part) {
            Some(v) => v,
            None => return Err(invalid(base)),
        };
    }
    let text = toml::to_string(&doc).map_err(|e| Error::Config(vec![e.to_string()]))?;
    match ScenarioConfig::from_toml_str(&text) {
        Ok(c) => Ok(c),
        Err(Error::Config(v))
            if v.iter().any(|m| m.contains("invalid type")) && value.fract() == 0.0 =>
        {
            // the absent optional field was an integer
            let mut doc2 = doc;
            set_path(&mut doc2, axis, toml::Value::Integer(value as i64));
            ScenarioConfig::from_toml_str(
                &toml::to_string(&doc2).map_err(|e| Error::Config(vec![e.to_string()]))?,
            )
        }
        Err(Error::Config(v)) if v.iter().any(|m| m.contains("unknown field")) => {
            Err(invalid(base))
        }
        Err(e) => Err(e),
    }
}

fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) {
    let mut cursor = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cursor.as_table_mut().expect("validated path");
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return;
        }
        cursor = table.get_mut(*part).expect("validated path");
    }
}
