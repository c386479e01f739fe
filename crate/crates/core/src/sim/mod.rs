//! Scenario engine: per-tick coordination, tracking, failure protocol,
//! targets, coverage and metric extraction.

pub mod coverage;
pub mod safety;
pub mod targets;
pub mod trace;

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::config::{Coupling, FailureKind, ScenarioConfig, TrackerMode};
use crate::coordination::{
    equilibrium_phases, kuramoto_rate, wrap_angle, RingTopology, SwarmParams,
};
use crate::curve::{self, LissajousParams, Point3};
use crate::error::{Error, Result};
use crate::netsim::{LinkCommand, Network};
use crate::planning::{self, GuaranteeReport};
use crate::resilience::{
    detect_failure, estimate_spacing, feasibility_check, rejoin, spoof_virtual, DetectionConfig,
    FailureCause, FailureStatus, Mode, NeighborMonitor, SpacingEstimate,
};
use crate::tracker::{propagate_disturbed, GustModel, KinematicState, MpcTracker};

pub use coverage::CoverageGrid;
pub use safety::z_safety;
pub use targets::{check_detection, spawn_targets, update_targets, Target};
pub use trace::{trace_columns, SimTrace, TRACE_SCHEMA_VERSION};

/// Random streams split off the scenario seed.
mod stream {
    pub const NETWORK: u64 = 1;
    pub const TARGETS: u64 = 3;
    pub const INIT: u64 = 4;
    pub const NOISE: u64 = 5;
    /// Gust of robot `i` uses `GUST_BASE + i`.
    pub const GUST_BASE: u64 = 1000;
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Latest phase heard from a neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeighborInfo {
    pub theta: f64,
    pub sent_at: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RobotState {
    pub id: usize,
    /// Coordination phase (reference parameter on the curve).
    pub theta: f64,
    /// Desired phase after the latest update; the rejoin slot while rejoining.
    pub theta_desired: f64,
    pub kinematic: KinematicState,
    pub neighbor_estimates: BTreeMap<usize, NeighborInfo>,
    pub failure: FailureStatus,
    pub spacing: SpacingEstimate,
    pub monitors: BTreeMap<usize, NeighborMonitor>,
    /// A failed neighbour had no spacing estimate, so its stale phase is used.
    pub degraded: bool,
    pub z_offset: f64,
    pub input: Vector3<f64>,
    recover_at: Option<f64>,
    /// Whether the last tick heard a new message from each neighbour.
    #[serde(skip)]
    fresh: BTreeMap<usize, bool>,
}

impl RobotState {
    pub fn position(&self) -> Point3 {
        self.kinematic.position()
    }

    pub fn is_nominal(&self) -> bool {
        self.failure.is_nominal()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    ModeChange {
        robot: usize,
        from: Mode,
        to: Mode,
        cause: Option<FailureCause>,
    },
    NeighborFlagged {
        robot: usize,
        neighbor: usize,
        cause: FailureCause,
    },
    NeighborCleared {
        robot: usize,
        neighbor: usize,
    },
    SpoofDegraded {
        robot: usize,
        neighbor: usize,
    },
    RejoinDeferred {
        robot: usize,
    },
    SafetyEngaged {
        robot: usize,
    },
    SafetyReleased {
        robot: usize,
    },
    LinkScheduled {
        edge: (usize, usize),
        at: f64,
        command: LinkCommand,
    },
    TargetDetected {
        target: usize,
        robot: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Per-tick scalar metrics over nominal robots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TickMetrics {
    pub t: f64,
    /// Smallest 3D distance between any two nominal robots.
    pub min_distance: f64,
    pub min_distance_xy: f64,
    /// Smallest and largest x-y distance over ring edges with both ends nominal.
    pub min_adjacent_xy: f64,
    pub max_adjacent_xy: f64,
    /// Largest `cos(θ_i − θ_j)` over nominal ring edges.
    pub max_cos: f64,
    /// Largest deviation of a nominal ring edge from the designed spacing.
    pub max_spacing_error: f64,
    pub coverage: f64,
    pub detected: usize,
    /// Largest distance between a nominal robot and its reference.
    pub max_tracking_error: f64,
    pub non_nominal: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bounds {
    pub encumbrance_2d: f64,
    pub two_eta_rs: f64,
    pub t_max: f64,
    pub r_s: f64,
    pub coverage_radius: f64,
    pub eps_th: f64,
    pub safety_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub trace_schema: u32,
    pub robots: usize,
    pub p: usize,
    pub ticks: usize,
    pub duration: f64,
    pub min_distance: f64,
    pub min_distance_xy: f64,
    pub min_adjacent_xy: f64,
    pub max_adjacent_xy: f64,
    pub max_cos: f64,
    pub final_spacing_error: f64,
    pub max_tracking_error: f64,
    pub final_coverage: f64,
    /// First time the coverage reached each percentage.
    pub coverage_milestones: BTreeMap<String, Option<f64>>,
    pub targets: usize,
    pub detected: usize,
    pub max_detection_time: Option<f64>,
    pub mean_detection_time: Option<f64>,
    pub safety_engagements: usize,
    pub failures: usize,
    pub max_concurrent_failures: usize,
    pub feasible_throughout: bool,
    pub mpc_solves: usize,
    pub mpc_infeasible: usize,
    pub bounds: Bounds,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: SimTrace,
    pub events: Vec<Event>,
    pub metrics: Vec<TickMetrics>,
    pub summary: Summary,
    pub guarantees: GuaranteeReport,
    pub robots: Vec<RobotState>,
    pub targets: Vec<Target>,
}

impl SimOutput {
    /// Writes `trace.csv`, `events.json` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let file = fs::File::create(dir.join("trace.csv"))?;
        self.trace.write_csv(std::io::BufWriter::new(file))?;
        fs::write(
            dir.join("events.json"),
            serde_json::to_string_pretty(&self.events)?,
        )?;
        fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&self.summary)?,
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct ScheduledFailure {
    robot: usize,
    start: f64,
    end: f64,
    started: bool,
    ended: bool,
}

pub struct World {
    cfg: ScenarioConfig,
    curve: LissajousParams,
    params: SwarmParams,
    p: usize,
    spacing: f64,
    topology: Option<RingTopology>,
    network: Option<Network>,
    sync: bool,
    pub robots: Vec<RobotState>,
    trackers: Vec<Option<MpcTracker>>,
    gusts: Vec<GustModel>,
    noise: Normal<f64>,
    noise_rng: ChaCha8Rng,
    target_rng: ChaCha8Rng,
    pub targets: Vec<Target>,
    pub coverage: Option<CoverageGrid>,
    detection: DetectionConfig,
    r_s: f64,
    coverage_radius: f64,
    safety_threshold: f64,
    p_out: Point3,
    retreats: Vec<ScheduledFailure>,
    pub events: Vec<Event>,
    pub t: f64,
    pub tick: usize,
    solve_every: usize,
    edges: Vec<(usize, usize)>,
    references: Vec<Point3>,
    detected: usize,
    mpc_solves: usize,
    mpc_infeasible: usize,
    /// Robots whose neighbours were told of an injected failure this tick.
    injected_now: Vec<bool>,
}

impl World {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let problems = cfg.check();
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let n = cfg.n();
        let s = &cfg.swarm;
        let params = SwarmParams {
            n,
            omega: s.omega,
            k: s.k,
            dt: s.dt / s.substeps as f64,
        };
        if n >= 2 {
            params.check()?;
        }
        let p = cfg.p();
        let spacing = TAU * p as f64 / n as f64;
        let topology = (n >= 2).then(|| RingTopology::canonical(n));
        let edges = topology.as_ref().map(|t| t.edges()).unwrap_or_default();
        let sync = cfg.network.is_ideal() && s.comm_period == 1;
        let network = match (&topology, sync) {
            (Some(top), false) => {
                let mut net = Network::with_rng(
                    top.clone(),
                    cfg.network.to_config(cfg.seed),
                    rng_for(cfg.seed, stream::NETWORK),
                )?;
                net.set_logging(false);
                Some(net)
            }
            _ => None,
        };

        let mut init_rng = rng_for(cfg.seed, stream::INIT);
        let designed = equilibrium_phases(n, p, s.theta0);
        let thetas: Vec<f64> = designed
            .iter()
            .map(|th| {
                if s.perturbation > 0.0 {
                    th + init_rng.random_range(-s.perturbation..=s.perturbation)
                } else {
                    *th
                }
            })
            .collect();
        let mut inactive: Vec<usize> = if s.inactive > 0 {
            index::sample(&mut init_rng, n, s.inactive).into_vec()
        } else {
            Vec::new()
        };
        inactive.sort_unstable();

        let curve = cfg.curve;
        let p_out = Point3::from(cfg.p_out());
        let mut robots = Vec::with_capacity(n);
        for i in 0..n {
            let th = thetas[i];
            let nbs: Vec<usize> = topology
                .as_ref()
                .map(|t| t.neighbors(i).to_vec())
                .unwrap_or_default();
            let neighbor_estimates = nbs
                .iter()
                .map(|&j| {
                    (
                        j,
                        NeighborInfo {
                            theta: thetas[j],
                            sent_at: 0.0,
                        },
                    )
                })
                .collect();
            let offsets: Vec<(usize, f64)> = nbs
                .iter()
                .map(|&j| (j, designed[j] - designed[i]))
                .collect();
            robots.push(RobotState {
                id: i,
                theta: th,
                theta_desired: th,
                kinematic: curve_state(&curve, th, s.omega, 0.0),
                neighbor_estimates,
                failure: FailureStatus::default(),
                spacing: SpacingEstimate::seeded(&offsets),
                monitors: nbs
                    .iter()
                    .map(|&j| (j, NeighborMonitor::default()))
                    .collect(),
                degraded: false,
                z_offset: 0.0,
                input: Vector3::zeros(),
                recover_at: None,
                fresh: nbs.iter().map(|&j| (j, false)).collect(),
            });
        }

        let trackers = (0..n)
            .map(|_| match cfg.tracker.mode {
                TrackerMode::Mpc => MpcTracker::new(cfg.tracker.mpc.clone()).map(Some),
                TrackerMode::Ideal => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        let gusts = (0..n)
            .map(|i| {
                GustModel::from_rng(
                    cfg.tracker.gust_sigma,
                    cfg.tracker.gust_tau,
                    rng_for(cfg.seed, stream::GUST_BASE + i as u64),
                )
            })
            .collect();
        let mut target_rng = rng_for(cfg.seed, stream::TARGETS);
        let targets = spawn_targets(
            &mut target_rng,
            cfg.targets.count,
            cfg.mission.half_width,
            cfg.mission.half_height,
            cfg.targets.speed,
        );
        let coverage = cfg.coverage.enabled.then(|| {
            CoverageGrid::new(
                cfg.mission.half_width,
                cfg.mission.half_height,
                cfg.coverage_cell(),
            )
        });
        let solve_every = match cfg.tracker.mode {
            TrackerMode::Mpc => (cfg.tracker.mpc.dt / s.dt).round() as usize,
            TrackerMode::Ideal => 1,
        };

        let mut retreats = Vec::new();
        let mut pending_links = Vec::new();
        for f in &cfg.failures {
            match f.kind {
                FailureKind::Retreat => retreats.push(ScheduledFailure {
                    robot: f.robot,
                    start: f.start,
                    end: f.start + f.duration,
                    started: false,
                    ended: false,
                }),
                FailureKind::LinkStall => {
                    if let Some(top) = &topology {
                        let mut nb = top.neighbors(f.robot).to_vec();
                        nb.dedup();
                        for j in nb {
                            pending_links.push(((f.robot, j), f.start, LinkCommand::Down));
                            pending_links.push((
                                (f.robot, j),
                                f.start + f.duration,
                                LinkCommand::Up,
                            ));
                        }
                    }
                }
            }
        }
        for e in &cfg.network.events {
            pending_links.push((e.edge, e.at, e.command()?));
        }
        retreats.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.robot.cmp(&b.robot)));

        let references = robots.iter().map(|r| r.position()).collect();
        let mut world = Self {
            cfg: cfg.clone(),
            curve,
            params,
            p,
            spacing,
            topology,
            network,
            sync,
            robots,
            trackers,
            gusts,
            noise: Normal::new(0.0, cfg.tracker.position_noise)
                .map_err(|e| Error::Config(vec![e.to_string()]))?,
            noise_rng: rng_for(cfg.seed, stream::NOISE),
            target_rng,
            targets,
            coverage,
            detection: DetectionConfig {
                tau_fail: cfg.resilience.tau_fail,
                eps_th: cfg.eps_th(),
                two_eta_rs: cfg.two_eta_rs(),
            },
            r_s: cfg.r_s(),
            coverage_radius: cfg.coverage_radius(),
            safety_threshold: cfg.safety_threshold(),
            p_out,
            retreats,
            events: Vec::new(),
            t: 0.0,
            tick: 0,
            solve_every,
            edges,
            references,
            detected: 0,
            mpc_solves: 0,
            mpc_infeasible: 0,
            injected_now: vec![false; n],
        };
        for (edge, at, command) in pending_links {
            if let Some(net) = world.network.as_mut() {
                net.set_link(edge, command, at)?;
            }
            world.push(at, EventKind::LinkScheduled { edge, at, command });
        }
        for i in inactive {
            world.fail_robot(i, FailureCause::Injected)?;
            world.enter_exit(i)?;
            world.robots[i].kinematic = KinematicState::at_rest(p_out);
            world.references[i] = p_out;
        }
        world.notify_neighbors();
        world.sense(0.0);
        Ok(world)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn push(&mut self, t: f64, kind: EventKind) {
        self.events.push(Event { t, kind });
    }

    fn neighbors(&self, i: usize) -> Vec<usize> {
        self.topology
            .as_ref()
            .map(|t| t.neighbors(i).to_vec())
            .unwrap_or_default()
    }

    fn transition(&mut self, i: usize, to: Mode, cause: Option<FailureCause>) -> Result<()> {
        let from = self.robots[i].failure.mode;
        self.robots[i].failure.advance(to, self.t, cause)?;
        self.push(
            self.t,
            EventKind::ModeChange {
                robot: i,
                from,
                to,
                cause,
            },
        );
        Ok(())
    }

    fn fail_robot(&mut self, i: usize, cause: FailureCause) -> Result<()> {
        self.transition(i, Mode::Failed, Some(cause))?;
        self.injected_now[i] = cause == FailureCause::Injected;
        Ok(())
    }

    fn enter_exit(&mut self, i: usize) -> Result<()> {
        self.transition(i, Mode::Exiting, None)
    }

    /// Prompt notification of injected failures to ring neighbours.
    fn notify_neighbors(&mut self) {
        if !self.cfg.resilience.enabled {
            self.injected_now.iter_mut().for_each(|f| *f = false);
            return;
        }
        for j in 0..self.robots.len() {
            if !std::mem::take(&mut self.injected_now[j]) {
                continue;
            }
            for i in self.neighbors(j) {
                if !self.robots[i].is_nominal() {
                    continue;
                }
                let theta_i = self.robots[i].theta;
                let t = self.t;
                let eps = self.detection.eps_th;
                let mon = self.robots[i].monitors.get_mut(&j).expect("ring neighbour");
                if mon.update(t, Some(FailureCause::Injected), None, theta_i, None, eps) {
                    self.push(
                        t,
                        EventKind::NeighborFlagged {
                            robot: i,
                            neighbor: j,
                            cause: FailureCause::Injected,
                        },
                    );
                }
            }
        }
    }

    fn apply_schedule(&mut self) -> Result<()> {
        let t = self.t;
        let eps = 1e-9;
        for k in 0..self.retreats.len() {
            let f = self.retreats[k];
            if !f.started && f.start <= t + eps {
                self.retreats[k].started = true;
                if self.robots[f.robot].is_nominal() {
                    self.fail_robot(f.robot, FailureCause::Injected)?;
                    self.robots[f.robot].recover_at = Some(f.end);
                }
            }
        }
        for i in 0..self.robots.len() {
            if self.robots[i].failure.mode == Mode::Failed {
                self.enter_exit(i)?;
            }
            if self.robots[i].failure.mode == Mode::Exiting {
                if let Some(end) = self.robots[i].recover_at {
                    if end <= t + eps {
                        self.robots[i].recover_at = None;
                        for f in self
                            .retreats
                            .iter_mut()
                            .filter(|f| f.robot == i && f.started)
                        {
                            f.ended = true;
                        }
                        self.transition(i, Mode::Rejoining, None)?;
                    }
                }
            }
        }
        self.notify_neighbors();
        Ok(())
    }

    /// Communication: broadcast on comm ticks, then read what has arrived.
    fn sense(&mut self, t: f64) {
        let n = self.robots.len();
        for r in &mut self.robots {
            r.fresh.values_mut().for_each(|f| *f = false);
        }
        if self.topology.is_none() {
            return;
        }
        if self.sync {
            let snapshot: Vec<(bool, f64)> = self
                .robots
                .iter()
                .map(|r| (r.is_nominal(), r.theta))
                .collect();
            for i in 0..n {
                for j in self.neighbors(i) {
                    if snapshot[j].0 {
                        let r = &mut self.robots[i];
                        r.neighbor_estimates.insert(
                            j,
                            NeighborInfo {
                                theta: snapshot[j].1,
                                sent_at: t,
                            },
                        );
                        r.fresh.insert(j, true);
                    }
                }
            }
            return;
        }
        let net = self
            .network
            .as_mut()
            .expect("network exists when not synchronous");
        if self.tick.is_multiple_of(self.cfg.swarm.comm_period) {
            for r in &self.robots {
                if !r.is_nominal() {
                    continue;
                }
                for j in r.neighbor_estimates.keys() {
                    net.send(r.id, *j, r.theta, t).expect("ring edge");
                }
            }
        }
        for i in 0..n {
            for m in net.poll(i, t) {
                let r = &mut self.robots[i];
                let newer = r
                    .neighbor_estimates
                    .get(&m.sender)
                    .is_none_or(|old| m.sent_at > old.sent_at);
                if newer {
                    r.neighbor_estimates.insert(
                        m.sender,
                        NeighborInfo {
                            theta: m.theta,
                            sent_at: m.sent_at,
                        },
                    );
                    r.fresh.insert(m.sender, true);
                }
            }
        }
    }

    fn staleness(&self, i: usize, j: usize) -> f64 {
        self.robots[i]
            .neighbor_estimates
            .get(&j)
            .map_or(f64::INFINITY, |m| self.t - m.sent_at)
    }

    /// Phase of neighbour `j` as robot `i` believes it is now: the last
    /// message advanced at the nominal rate for at most `tau_fail`, then frozen.
    fn heard(&self, i: usize, j: usize) -> Option<f64> {
        let m = self.robots[i].neighbor_estimates.get(&j)?;
        let age = (self.t - m.sent_at).clamp(0.0, self.detection.tau_fail);
        Some(m.theta + self.params.omega * age)
    }

    fn xy(&self, i: usize) -> Vector2<f64> {
        self.robots[i].position().xy()
    }

    /// Failure detection and spacing capture for nominal robots.
    fn monitor(&mut self) {
        if !self.cfg.resilience.enabled {
            return;
        }
        let n = self.robots.len();
        let t = self.t;
        let eps = self.detection.eps_th;
        for i in 0..n {
            if !self.robots[i].is_nominal() {
                continue;
            }
            let mut nbs = self.neighbors(i);
            nbs.dedup();
            for &j in &nbs {
                let stale = self.staleness(i, j);
                let d = if self.cfg.resilience.distance_trigger && self.robots[j].is_nominal() {
                    (self.xy(i) - self.xy(j)).norm()
                } else {
                    0.0
                };
                let trigger = detect_failure(stale, d, false, &self.detection);
                let r = &self.robots[i];
                let fresh = if r.fresh[&j] { self.heard(i, j) } else { None };
                let expected = r.spacing.get(j);
                let theta_i = r.theta;
                let mon = self.robots[i].monitors.get_mut(&j).expect("ring neighbour");
                let was = mon.failed;
                if mon.update(t, trigger, fresh, theta_i, expected, eps) {
                    let kind = if was {
                        EventKind::NeighborCleared {
                            robot: i,
                            neighbor: j,
                        }
                    } else {
                        EventKind::NeighborFlagged {
                            robot: i,
                            neighbor: j,
                            cause: mon.cause.expect("flagged with cause"),
                        }
                    };
                    self.push(t, kind);
                }
            }
            // spacing capture near equilibrium with fresh data from both sides
            let r = &self.robots[i];
            let all_fresh = nbs.iter().all(|j| r.fresh[j] && !r.monitors[j].failed);
            if all_fresh && !nbs.is_empty() {
                let theta_i = r.theta;
                let heard: Vec<(usize, f64)> = self
                    .neighbors(i)
                    .iter()
                    .filter_map(|&j| self.heard(i, j).map(|th| (j, th)))
                    .collect();
                let residual = heard
                    .iter()
                    .map(|(_, th)| (theta_i - th).sin())
                    .sum::<f64>()
                    .abs();
                let uniq: Vec<(usize, f64)> = nbs
                    .iter()
                    .filter_map(|&j| self.heard(i, j).map(|th| (j, th)))
                    .collect();
                if let Some(est) = estimate_spacing(
                    theta_i,
                    &uniq,
                    residual,
                    self.cfg.resilience.capture_threshold,
                    self.cfg.resilience.smoothing,
                    Some(&r.spacing),
                ) {
                    self.robots[i].spacing = est;
                }
            }
        }
    }

    /// Phase inputs of robot `i` given the current phases of everyone.
    fn neighbor_inputs(
        &self,
        i: usize,
        theta_i: f64,
        live: &[f64],
        degraded: &mut Vec<usize>,
    ) -> Vec<f64> {
        let r = &self.robots[i];
        let mut out = Vec::with_capacity(2);
        for j in self.neighbors(i) {
            let flagged = self.cfg.resilience.enabled && r.monitors[&j].failed;
            if flagged {
                match spoof_virtual(theta_i, &r.spacing, j) {
                    Some(v) => out.push(v),
                    None => {
                        degraded.push(j);
                        if let Some(th) = self.heard(i, j) {
                            out.push(th);
                        }
                    }
                }
            } else if self.sync && self.robots[j].is_nominal() {
                out.push(live[j]);
            } else if let Some(th) = self.heard(i, j) {
                out.push(th);
            }
        }
        out
    }

    fn integrate_phases(&mut self) {
        let n = self.robots.len();
        let substeps = self.cfg.swarm.substeps;
        let h = self.params.dt;
        let mut live: Vec<f64> = self.robots.iter().map(|r| r.theta).collect();
        let mut rates = vec![0.0; n];
        let mut degraded = vec![Vec::new(); n];
        for sub in 0..substeps {
            for i in 0..n {
                if !self.robots[i].is_nominal() {
                    continue;
                }
                let mut deg = Vec::new();
                let nb = self.neighbor_inputs(i, live[i], &live, &mut deg);
                rates[i] = match self.cfg.swarm.coupling {
                    Coupling::Kuramoto => kuramoto_rate(live[i], &nb, &self.params),
                    Coupling::OpenLoop => self.params.omega,
                };
                if sub == 0 {
                    degraded[i] = deg;
                }
            }
            for i in 0..n {
                if self.robots[i].is_nominal() {
                    live[i] += h * rates[i];
                }
            }
        }
        for i in 0..n {
            if !self.robots[i].is_nominal() {
                continue;
            }
            let was = self.robots[i].degraded;
            self.robots[i].degraded = !degraded[i].is_empty();
            if !was {
                for &j in &degraded[i] {
                    self.push(
                        self.t,
                        EventKind::SpoofDegraded {
                            robot: i,
                            neighbor: j,
                        },
                    );
                }
            }
            self.robots[i].theta = live[i];
            self.robots[i].theta_desired = live[i];
        }
    }

    /// Rejoin slot and completion for robots in the rejoining mode.
    fn rejoin_step(&mut self) -> Result<()> {
        let tol = self.cfg.resilience.rejoin_tolerance;
        let eps = self.detection.eps_th;
        for i in 0..self.robots.len() {
            if self.robots[i].failure.mode != Mode::Rejoining {
                continue;
            }
            let mut nbs = self.neighbors(i);
            nbs.dedup();
            let live = nbs.iter().copied().find(|&j| {
                self.staleness(i, j) <= self.detection.tau_fail
                    && self.robots[i].spacing.offset_from(j).is_some()
            });
            let Some(j) = live else {
                if self.robots[i].theta_desired.is_finite() {
                    self.robots[i].theta_desired = f64::NAN;
                    self.push(self.t, EventKind::RejoinDeferred { robot: i });
                }
                continue;
            };
            let r = &self.robots[i];
            let offset = r.spacing.offset_from(j).expect("checked");
            let theta_j = self.heard(i, j).expect("live neighbour");
            let target = theta_j + offset;
            let pos = r.position();
            let slot = self.curve.eval(target) + Vector3::new(0.0, 0.0, r.z_offset);
            let measured =
                curve::project(&self.curve, &pos, target, curve::DEFAULT_PROJECTION_WINDOW);
            let directive = rejoin(measured, theta_j, offset, eps);
            let close = (pos - slot).norm() <= tol;
            self.robots[i].theta_desired = directive.target_theta;
            self.robots[i].theta = directive.target_theta;
            if directive.complete && close {
                self.transition(i, Mode::Nominal, None)?;
            }
        }
        Ok(())
    }

    fn on_curve(&self, i: usize) -> bool {
        let r = &self.robots[i];
        r.is_nominal() || (r.failure.mode == Mode::Rejoining && r.theta_desired.is_finite())
    }

    fn apply_safety(&mut self) {
        if !self.cfg.safety.enabled {
            return;
        }
        let xy: Vec<Option<Vector2<f64>>> = (0..self.robots.len())
            .map(|i| self.on_curve(i).then(|| self.xy(i)))
            .collect();
        let adj = z_safety(&xy, self.safety_threshold, self.cfg.safety.offset);
        for (i, a) in adj.into_iter().enumerate() {
            let before = self.robots[i].z_offset;
            if a != before {
                self.robots[i].z_offset = a;
                let kind = if a > 0.0 {
                    EventKind::SafetyEngaged { robot: i }
                } else {
                    EventKind::SafetyReleased { robot: i }
                };
                self.push(self.t, kind);
            }
        }
    }

    fn reference_at(&self, i: usize, theta: f64) -> KinematicState {
        let r = &self.robots[i];
        let omega = self.params.omega;
        let mut pos = self.curve.eval(theta);
        pos.z += r.z_offset;
        KinematicState::from_motion(
            pos,
            self.curve.derivative(theta) * omega,
            self.curve.second_derivative(theta) * (omega * omega),
        )
    }

    fn track(&mut self) -> Result<()> {
        let dt = self.cfg.swarm.dt;
        let omega = self.params.omega;
        for i in 0..self.robots.len() {
            let curve_ref = self.on_curve(i);
            let theta = self.robots[i].theta;
            self.references[i] = if curve_ref {
                self.reference_at(i, theta).position()
            } else {
                self.p_out
            };
            match self.cfg.tracker.mode {
                TrackerMode::Ideal => {
                    self.robots[i].kinematic = if curve_ref {
                        self.reference_at(i, theta)
                    } else {
                        KinematicState::at_rest(self.p_out)
                    };
                }
                TrackerMode::Mpc => {
                    if self.tick.is_multiple_of(self.solve_every) {
                        let cfg = &self.cfg.tracker.mpc;
                        let refs: Vec<KinematicState> = (1..=cfg.horizon)
                            .map(|k| {
                                if curve_ref {
                                    self.reference_at(i, theta + omega * (cfg.dt * k as f64 - dt))
                                } else {
                                    KinematicState::at_rest(self.p_out)
                                }
                            })
                            .collect();
                        let mut measured = self.robots[i].kinematic;
                        if self.cfg.tracker.position_noise > 0.0 {
                            for a in 0..3 {
                                measured.0[3 * a] += self.noise.sample(&mut self.noise_rng);
                            }
                        }
                        let prev = self.robots[i].input;
                        let tracker = self.trackers[i].as_mut().expect("mpc mode");
                        let sol =
                            tracker
                                .solve_trajectory(&measured, &refs, &prev)
                                .map_err(|e| Error::SimulationAborted {
                                    t: self.t,
                                    reason: format!("robot {i}: {e}"),
                                })?;
                        self.mpc_solves += 1;
                        if sol.infeasible {
                            self.mpc_infeasible += 1;
                        }
                        self.robots[i].input = sol.first_input();
                    }
                    let gust = self.gusts[i].sample(dt);
                    let u = self.robots[i].input;
                    self.robots[i].kinematic =
                        propagate_disturbed(&self.robots[i].kinematic, &u, dt, &gust);
                }
            }
        }
        Ok(())
    }

    fn active_xy(&self) -> Vec<Option<Vector2<f64>>> {
        (0..self.robots.len())
            .map(|i| self.robots[i].is_nominal().then(|| self.xy(i)))
            .collect()
    }

    fn observe(&mut self) {
        let xy = self.active_xy();
        let t = self.t;
        if !self.targets.is_empty() {
            for k in check_detection(&mut self.targets, &xy, self.r_s, t) {
                self.detected += 1;
                let robot = self.targets[k].detected_by.expect("just detected");
                self.push(t, EventKind::TargetDetected { target: k, robot });
            }
        }
        if let Some(grid) = self.coverage.as_mut() {
            grid.update(&xy, self.coverage_radius, t);
        }
    }

    fn check_finite(&self) -> Result<()> {
        let bad = self.robots.iter().find(|r| {
            !r.theta.is_finite() && r.failure.mode != Mode::Rejoining || !r.kinematic.is_finite()
        });
        if let Some(r) = bad {
            let dump: Vec<String> = self
                .robots
                .iter()
                .map(|r| {
                    let p = r.position();
                    format!(
                        "robot {}: mode {:?} theta {} pos ({}, {}, {})",
                        r.id, r.failure.mode, r.theta, p.x, p.y, p.z
                    )
                })
                .collect();
            return Err(Error::SimulationAborted {
                t: self.t,
                reason: format!("non-finite state at robot {}\n{}", r.id, dump.join("\n")),
            });
        }
        Ok(())
    }

    /// Advances the world by one tick.
    pub fn step(&mut self) -> Result<()> {
        self.apply_schedule()?;
        let t = self.t;
        self.sense(t);
        self.monitor();
        self.integrate_phases();
        self.rejoin_step()?;
        self.apply_safety();
        self.track()?;
        self.tick += 1;
        self.t = self.tick as f64 * self.cfg.swarm.dt;
        if !self.targets.is_empty() {
            update_targets(
                &mut self.targets,
                self.cfg.swarm.dt,
                &mut self.target_rng,
                self.cfg.mission.half_width,
                self.cfg.mission.half_height,
            );
        }
        self.observe();
        self.check_finite()
    }

    pub fn metrics(&self) -> TickMetrics {
        let n = self.robots.len();
        let nominal: Vec<usize> = (0..n).filter(|&i| self.robots[i].is_nominal()).collect();
        let mut min3 = f64::INFINITY;
        let mut min2 = f64::INFINITY;
        for (a, &i) in nominal.iter().enumerate() {
            let pi = self.robots[i].position();
            for &j in &nominal[a + 1..] {
                let d = pi - self.robots[j].position();
                min3 = min3.min(d.norm_squared());
                min2 = min2.min(d.xy().norm_squared());
            }
        }
        let mut min_adj = f64::INFINITY;
        let mut max_adj: f64 = 0.0;
        let mut max_cos = f64::NEG_INFINITY;
        let mut max_err: f64 = 0.0;
        for &(i, j) in &self.edges {
            if !(self.robots[i].is_nominal() && self.robots[j].is_nominal()) {
                continue;
            }
            let d = (self.xy(i) - self.xy(j)).norm();
            min_adj = min_adj.min(d);
            max_adj = max_adj.max(d);
            let diff = self.robots[j].theta - self.robots[i].theta;
            max_cos = max_cos.max(diff.cos());
            max_err = max_err.max(wrap_angle(diff - self.spacing).abs());
        }
        let max_track = nominal
            .iter()
            .map(|&i| (self.robots[i].position() - self.references[i]).norm())
            .fold(0.0, f64::max);
        let failed_phases: Vec<f64> = (0..n)
            .filter(|&i| !self.robots[i].is_nominal())
            .map(|i| self.robots[i].theta)
            .collect();
        TickMetrics {
            t: self.t,
            min_distance: min3.sqrt(),
            min_distance_xy: min2.sqrt(),
            min_adjacent_xy: min_adj,
            max_adjacent_xy: max_adj,
            max_cos,
            max_spacing_error: max_err,
            coverage: self.coverage.as_ref().map_or(0.0, |g| g.fraction()),
            detected: self.detected,
            max_tracking_error: max_track,
            non_nominal: failed_phases.len(),
            feasible: feasibility_check(n, &failed_phases),
        }
    }

    pub fn trace_row(&self) -> Vec<f64> {
        let mut row = Vec::with_capacity(1 + 4 * self.robots.len() + 3 * self.edges.len() + 2);
        row.push(self.t);
        for r in &self.robots {
            let p = r.position();
            row.extend([r.theta, p.x, p.y, p.z]);
        }
        for &(i, j) in &self.edges {
            row.push((self.xy(i) - self.xy(j)).norm());
            row.push((self.robots[i].theta - self.robots[j].theta).cos());
            row.push(self.staleness(i, j).max(self.staleness(j, i)));
        }
        row.push(100.0 * self.coverage.as_ref().map_or(0.0, |g| g.fraction()));
        row.push(self.detected as f64);
        row
    }

    pub fn all_detected(&self) -> bool {
        !self.targets.is_empty() && self.detected == self.targets.len()
    }
}

/// Curve state of a robot moving at phase rate `omega`, lifted by `z_offset`.
fn curve_state(curve: &LissajousParams, theta: f64, omega: f64, z_offset: f64) -> KinematicState {
    let mut pos = curve.eval(theta);
    pos.z += z_offset;
    KinematicState::from_motion(
        pos,
        curve.derivative(theta) * omega,
        curve.second_derivative(theta) * (omega * omega),
    )
}

pub fn guarantee_report(cfg: &ScenarioConfig) -> GuaranteeReport {
    planning::check_guarantees(&cfg.mission_spec(), &cfg.curve, cfg.swarm.omega)
}

/// Runs a scenario to completion. Refuses scenarios that fail the guarantee
/// check unless the override flag is set.
pub fn run(cfg: &ScenarioConfig) -> Result<SimOutput> {
    let guarantees = guarantee_report(cfg);
    if !guarantees.ok() && !cfg.overrides.allow_guarantee_violation {
        return Err(Error::GuaranteeRefused(guarantees.violated.clone()));
    }
    let mut world = World::new(cfg)?;
    let mut trace = SimTrace::new(trace_columns(cfg.n(), world.edges()));
    let ticks = cfg.ticks();
    let mut metrics = Vec::with_capacity(ticks + 1);
    world.observe();
    trace.rows.push(world.trace_row());
    metrics.push(world.metrics());
    for k in 1..=ticks {
        world.step()?;
        let m = world.metrics();
        metrics.push(m);
        if k % cfg.log_every == 0 || k == ticks {
            trace.rows.push(world.trace_row());
        }
        if cfg.targets.stop_when_detected && world.all_detected() {
            if k % cfg.log_every != 0 && k != ticks {
                trace.rows.push(world.trace_row());
            }
            break;
        }
    }
    let summary = summarize(&world, &metrics);
    Ok(SimOutput {
        trace,
        events: std::mem::take(&mut world.events),
        metrics,
        summary,
        guarantees,
        robots: world.robots.clone(),
        targets: world.targets.clone(),
    })
}

fn summarize(world: &World, metrics: &[TickMetrics]) -> Summary {
    let cfg = &world.cfg;
    let fold_min = |f: fn(&TickMetrics) -> f64| metrics.iter().map(f).fold(f64::INFINITY, f64::min);
    let fold_max =
        |f: fn(&TickMetrics) -> f64| metrics.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let mut milestones = BTreeMap::new();
    for pct in ["50", "90", "99", "99.5", "100"] {
        let level: f64 = pct.parse::<f64>().expect("literal") / 100.0;
        let hit = metrics
            .iter()
            .find(|m| m.coverage >= level - 1e-12)
            .map(|m| m.t);
        milestones.insert(
            pct.to_string(),
            if world.coverage.is_some() { hit } else { None },
        );
    }
    let times: Vec<f64> = world.targets.iter().filter_map(|t| t.detected_at).collect();
    let all = !world.targets.is_empty() && times.len() == world.targets.len();
    let failures = world
        .events
        .iter()
        .filter(|e| {
            matches!(
                e.kind,
                EventKind::ModeChange {
                    to: Mode::Failed,
                    ..
                }
            )
        })
        .count();
    Summary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        trace_schema: TRACE_SCHEMA_VERSION,
        robots: cfg.n(),
        p: world.p,
        ticks: world.tick,
        duration: world.t,
        min_distance: fold_min(|m| m.min_distance),
        min_distance_xy: fold_min(|m| m.min_distance_xy),
        min_adjacent_xy: fold_min(|m| m.min_adjacent_xy),
        max_adjacent_xy: fold_max(|m| m.max_adjacent_xy),
        max_cos: fold_max(|m| m.max_cos),
        final_spacing_error: metrics.last().map_or(0.0, |m| m.max_spacing_error),
        max_tracking_error: fold_max(|m| m.max_tracking_error),
        final_coverage: metrics.last().map_or(0.0, |m| m.coverage),
        coverage_milestones: milestones,
        targets: world.targets.len(),
        detected: times.len(),
        max_detection_time: all.then(|| times.iter().copied().fold(0.0, f64::max)),
        mean_detection_time: all.then(|| times.iter().sum::<f64>() / times.len() as f64),
        safety_engagements: world
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::SafetyEngaged { .. }))
            .count(),
        failures,
        max_concurrent_failures: metrics.iter().map(|m| m.non_nominal).max().unwrap_or(0),
        feasible_throughout: metrics.iter().all(|m| m.feasible),
        mpc_solves: world.mpc_solves,
        mpc_infeasible: world.mpc_infeasible,
        bounds: Bounds {
            encumbrance_2d: planning::max_encumbrance_2d(
                cfg.mission.half_width,
                cfg.mission.half_height,
                cfg.curve.freq_x,
                cfg.curve.freq_y,
                cfg.n(),
            ),
            two_eta_rs: world.detection.two_eta_rs,
            t_max: planning::max_detection_time(cfg.swarm.omega, cfg.n(), cfg.mission.kappa),
            r_s: world.r_s,
            coverage_radius: world.coverage_radius,
            eps_th: world.detection.eps_th,
            safety_threshold: world.safety_threshold,
        },
    }
}
