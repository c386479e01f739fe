//! Failure detection and the failure-resilient protocol: spacing estimation,
//! virtual-neighbour spoofing, retreat to a parking point and rejoin.
//!
//! Spacing convention: `delta_star[j] = wrap(θ_j − θ_i)`, so the virtual
//! neighbour is `θ_i + delta_star[j]` and a robot rejoining behind live
//! neighbour `j` targets `θ_j − delta_star[j]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coordination::wrap_angle;
use crate::curve::Point3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Nominal,
    Failed,
    Exiting,
    Rejoining,
}

impl Mode {
    fn successor(self) -> Mode {
        match self {
            Mode::Nominal => Mode::Failed,
            Mode::Failed => Mode::Exiting,
            Mode::Exiting => Mode::Rejoining,
            Mode::Rejoining => Mode::Nominal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    StaleComm,
    DistanceViolation,
    Injected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureStatus {
    pub mode: Mode,
    pub since: f64,
    pub cause: Option<FailureCause>,
}

impl Default for FailureStatus {
    fn default() -> Self {
        Self {
            mode: Mode::Nominal,
            since: 0.0,
            cause: None,
        }
    }
}

impl FailureStatus {
    /// Moves to the next mode in the cycle; skipping a mode is an error.
    pub fn advance(&mut self, to: Mode, now: f64, cause: Option<FailureCause>) -> Result<()> {
        if self.mode.successor() != to {
            return Err(Error::InvalidSwarm(format!(
                "illegal protocol transition {:?} -> {to:?}",
                self.mode
            )));
        }
        self.mode = to;
        self.since = now;
        if to == Mode::Failed {
            self.cause = cause;
        } else if to == Mode::Nominal {
            self.cause = None;
        }
        Ok(())
    }

    pub fn is_nominal(&self) -> bool {
        self.mode == Mode::Nominal
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpacingEstimate {
    /// Smoothed `wrap(θ_j − θ_i)` per neighbour id.
    pub delta_star: BTreeMap<usize, f64>,
    /// Ring residual at the most recent capture.
    pub confidence: f64,
    pub captures: usize,
}

impl SpacingEstimate {
    /// Estimate seeded from the designed spacing (e.g. `±2πp/N`).
    pub fn seeded(offsets: &[(usize, f64)]) -> Self {
        Self {
            delta_star: offsets.iter().map(|&(j, d)| (j, wrap_angle(d))).collect(),
            confidence: 0.0,
            captures: 0,
        }
    }

    pub fn get(&self, neighbor: usize) -> Option<f64> {
        self.delta_star.get(&neighbor).copied()
    }

    /// Slot offset of this robot relative to `neighbor`, i.e. `θ_i − θ_j`.
    pub fn offset_from(&self, neighbor: usize) -> Option<f64> {
        self.get(neighbor).map(|d| wrap_angle(-d))
    }
}

/// Smoothing factor floor; early captures use a running mean.
pub const DEFAULT_SMOOTHING: f64 = 0.01;

/// Folds one capture into `prior` when `residual < threshold`.
///
/// The gain is `max(1/k, smoothing)` for the k-th capture: a plain average
/// at first, then an exponential filter.
pub fn estimate_spacing(
    theta_i: f64,
    neighbor_thetas: &[(usize, f64)],
    residual: f64,
    threshold: f64,
    smoothing: f64,
    prior: Option<&SpacingEstimate>,
) -> Option<SpacingEstimate> {
    if !(residual < threshold) {
        return None;
    }
    let mut est = prior.cloned().unwrap_or_default();
    est.captures += 1;
    let gain = (1.0 / est.captures as f64).max(smoothing);
    for &(j, theta_j) in neighbor_thetas {
        let meas = wrap_angle(theta_j - theta_i);
        let entry = est.delta_star.entry(j).or_insert(meas);
        *entry = wrap_angle(*entry + gain * wrap_angle(meas - *entry));
    }
    est.confidence = residual;
    Some(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    pub tau_fail: f64,
    pub eps_th: f64,
    pub two_eta_rs: f64,
}

impl DetectionConfig {
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("tau_fail", self.tau_fail),
            ("eps_th", self.eps_th),
            ("two_eta_rs", self.two_eta_rs),
        ] {
            if !(v > 0.0) {
                out.push(format!("resilience.{name} must be > 0"));
            }
        }
        out
    }
}

/// Returns the trigger that fired, if any. An injected event always fires.
pub fn detect_failure(
    staleness: f64,
    d_ij: f64,
    injected: bool,
    cfg: &DetectionConfig,
) -> Option<FailureCause> {
    if injected {
        Some(FailureCause::Injected)
    } else if staleness > cfg.tau_fail {
        Some(FailureCause::StaleComm)
    } else if d_ij > cfg.two_eta_rs {
        Some(FailureCause::DistanceViolation)
    } else {
        None
    }
}

/// Virtual phase standing in for a failed neighbour.
pub fn spoof_virtual(
    theta_i: f64,
    estimate: &SpacingEstimate,
    failed_neighbor: usize,
) -> Option<f64> {
    estimate.get(failed_neighbor).map(|d| theta_i + d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionDirective {
    pub reference: Point3,
}

pub fn exit_to_pout(status: &FailureStatus, p_out: Point3) -> Result<MotionDirective> {
    match status.mode {
        Mode::Failed | Mode::Exiting => Ok(MotionDirective { reference: p_out }),
        m => Err(Error::InvalidSwarm(format!("exit requested in mode {m:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejoinDirective {
    pub target_theta: f64,
    /// The phase error is within `eps_th`, so the nominal loop can resume.
    pub complete: bool,
}

/// Slot target `θ_j + offset` behind a live neighbour. `offset` is the
/// rejoining robot's phase relative to the neighbour (`θ_i − θ_j`).
pub fn rejoin(theta_self: f64, theta_neighbor: f64, offset: f64, eps_th: f64) -> RejoinDirective {
    let target = theta_neighbor + offset;
    RejoinDirective {
        target_theta: target,
        complete: wrap_angle(theta_self - target).abs() <= eps_th,
    }
}

/// Failed robots must be at most `⌊N/2⌋` and pairwise closer than π in phase.
///
/// The pairwise set is taken to be the phases of the failed robots.
pub fn feasibility_check(n: usize, failed_phases: &[f64]) -> bool {
    if failed_phases.len() > n / 2 {
        return false;
    }
    for (k, &a) in failed_phases.iter().enumerate() {
        for &b in &failed_phases[k + 1..] {
            if wrap_angle(a - b).abs() >= PI - 1e-12 {
                return false;
            }
        }
    }
    true
}

/// Per-neighbour failure view kept by each robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NeighborMonitor {
    pub failed: bool,
    pub since: f64,
    pub cause: Option<FailureCause>,
}

impl NeighborMonitor {
    /// Updates the view; returns true when the state flipped.
    ///
    /// A failed neighbour is cleared once a fresh message places it within
    /// `eps_th` of its expected slot.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        now: f64,
        trigger: Option<FailureCause>,
        fresh: Option<f64>,
        theta_i: f64,
        expected_offset: Option<f64>,
        eps_th: f64,
    ) -> bool {
        if !self.failed {
            if let Some(cause) = trigger {
                *self = Self {
                    failed: true,
                    since: now,
                    cause: Some(cause),
                };
                return true;
            }
            return false;
        }
        if let (Some(theta_j), Some(delta)) = (fresh, expected_offset) {
            if trigger.is_none() && wrap_angle(theta_j - theta_i - delta).abs() <= eps_th {
                *self = Self {
                    failed: false,
                    since: now,
                    cause: None,
                };
                return true;
            }
        }
        false
    }
}
