//! Pre-mission bounds: sensing radii, robot count, detection time,
//! collision clearance, and the 3D parameter search.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coordination::stable_p_set;
use crate::curve::{self, gcd, LissajousParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionSpec {
    /// Half width of the mission rectangle.
    #[serde(rename = "A")]
    pub half_width: f64,
    /// Half height of the mission rectangle.
    #[serde(rename = "B")]
    pub half_height: f64,
    /// Sensing radius of each robot.
    pub r_s: f64,
    /// Safety factor on the detection radius.
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: usize,
    #[serde(rename = "N")]
    pub n: usize,
}

fn default_eta() -> f64 {
    1.0
}

fn default_kappa() -> usize {
    1
}

impl MissionSpec {
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.half_width > 0.0 && self.half_height > 0.0) {
            out.push("mission A and B must be > 0".into());
        }
        if !(self.r_s > 0.0) {
            out.push(format!("r_s must be > 0 (got {})", self.r_s));
        }
        if !(self.eta >= 1.0) {
            out.push(format!("eta must be >= 1 (got {})", self.eta));
        }
        if self.kappa == 0 || self.n < 2 * self.kappa {
            out.push(format!(
                "need N/kappa >= 2 (N = {}, kappa = {})",
                self.n, self.kappa
            ));
        }
        out
    }

    pub fn diagonal(&self) -> f64 {
        self.half_width.hypot(self.half_height)
    }
}

/// Radius above which the curve sweeps the whole rectangle (strict bound).
pub fn min_radius_coverage(a_half: f64, b_half: f64, a: u32, b: u32) -> f64 {
    let t1 = b_half * (PI / (2.0 * a as f64)).sin();
    let t2 = a_half * (PI / (2.0 * b as f64)).sin();
    t1.max(t2)
}

/// Radius from which every moving target is detected (non-strict bound).
pub fn min_radius_detection(a_half: f64, b_half: f64, n: usize, kappa: usize) -> f64 {
    let slots = n as f64 / kappa as f64;
    (PI / slots).sin() * a_half.hypot(b_half)
}

pub fn inflated_radius(base: f64, eta: f64) -> f64 {
    assert!(eta >= 1.0, "inflation factor must be >= 1");
    eta * base
}

/// Smallest robot count whose detection bound does not exceed `r_s`.
pub fn min_robots(a_half: f64, b_half: f64, r_s: f64, kappa: usize) -> Result<usize> {
    let diag = a_half.hypot(b_half);
    if r_s >= diag {
        return Err(Error::InvalidPlanning(format!(
            "r_s = {r_s} reaches the mission diagonal {diag}; any robot count detects every target"
        )));
    }
    if r_s <= 0.0 {
        return Err(Error::InvalidPlanning(format!(
            "r_s must be > 0 (got {r_s})"
        )));
    }
    let bound = PI * kappa as f64 / (r_s / diag).asin();
    let snapped = if (bound - bound.round()).abs() < 1e-9 {
        bound.round()
    } else {
        bound
    };
    Ok(snapped.floor() as usize + 1)
}

/// Worst-case revisit time of any point by some robot.
pub fn max_detection_time(omega: f64, n: usize, kappa: usize) -> f64 {
    assert!(omega > 0.0, "omega must be positive");
    (2.0 * PI / omega) / (n as f64 / kappa as f64)
}

/// Largest robot radius that keeps planar equilibria collision free (strict).
pub fn max_encumbrance_2d(a_half: f64, b_half: f64, a: u32, b: u32, n: usize) -> f64 {
    let (fa, fb) = (a as f64, b as f64);
    (PI / n as f64).sin() * a_half * b_half / ((a_half * fa).powi(2) + (b_half * fb).powi(2)).sqrt()
}

/// Half the minimum equilibrium separation of `n` robots on the curve.
pub fn max_encumbrance_3d(params: &LissajousParams, n: usize) -> f64 {
    curve::min_pairwise_separation(params, n) / 2.0
}

pub fn max_encumbrance_3d_with(params: &LissajousParams, n: usize, grid: usize) -> f64 {
    curve::min_pairwise_separation_with(params, n, grid) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Search3dSpace {
    pub c_candidates: Vec<u32>,
    /// Inclusive range of the vertical amplitude.
    pub amp_range: (f64, f64),
    pub amp_points: usize,
    pub phase_grid: Vec<f64>,
    pub grid: usize,
}

impl Default for Search3dSpace {
    fn default() -> Self {
        Self {
            c_candidates: vec![5, 7, 11, 13],
            amp_range: (1.0, 5.0),
            amp_points: 8,
            phase_grid: vec![0.0, PI / 4.0, PI / 2.0],
            grid: 1 << 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Search3dResult {
    pub params: LissajousParams,
    pub separation: f64,
    pub evaluated: usize,
}

impl Search3dSpace {
    pub fn amplitudes(&self) -> Vec<f64> {
        let (lo, hi) = self.amp_range;
        if self.amp_points <= 1 || hi <= lo {
            return vec![hi.max(lo)];
        }
        (0..self.amp_points)
            .map(|k| lo + (hi - lo) * k as f64 / (self.amp_points - 1) as f64)
            .collect()
    }
}

/// Exhaustive search over `(C, c, φ)` for the knot that maximises the
/// minimum equilibrium separation. Ties go to the lexicographically smallest
/// `(C, c, φ)`.
pub fn search_3d_params(
    a_half: f64,
    b_half: f64,
    a: u32,
    b: u32,
    n: usize,
    space: &Search3dSpace,
) -> Result<Search3dResult> {
    let mut rejected = Vec::new();
    let mut best: Option<Search3dResult> = None;
    let mut evaluated = 0;
    for amp in space.amplitudes() {
        for &c in &space.c_candidates {
            if c == 0 || gcd(a as u64, c as u64) != 1 || gcd(b as u64, c as u64) != 1 {
                rejected.push(format!(
                    "c = {c}: gcd(a, c) = {}, gcd(b, c) = {}",
                    gcd(a as u64, c as u64),
                    gcd(b as u64, c as u64)
                ));
                continue;
            }
            for &phi in &space.phase_grid {
                let p = LissajousParams::analysis(a_half, b_half, amp, a, b, c, phi);
                if amp <= 0.0 || !p.check().is_empty() || !curve::is_knot(&p) {
                    continue;
                }
                evaluated += 1;
                let sep = curve::min_pairwise_separation_with(&p, n, space.grid);
                let better = match &best {
                    None => true,
                    Some(cur) => sep > cur.separation,
                };
                if better {
                    best = Some(Search3dResult {
                        params: p,
                        separation: sep,
                        evaluated: 0,
                    });
                }
            }
        }
    }
    rejected.sort();
    rejected.dedup();
    match best {
        Some(mut r) => {
            r.evaluated = evaluated;
            Ok(r)
        }
        None if !rejected.is_empty() => Err(Error::NoAdmissibleParams(rejected.join("; "))),
        None => Err(Error::NoAdmissibleParams(
            "no candidate yields a knot (check amplitude range and phase grid)".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuaranteeReport {
    pub coverage_ok: bool,
    pub detection_ok: bool,
    pub curve_ok: bool,
    /// Closed-form planar encumbrance radius.
    pub collision_bound: f64,
    /// Numeric encumbrance radius for 3D curves.
    pub collision_bound_3d: Option<f64>,
    pub coverage_bound: f64,
    pub detection_bound: f64,
    pub detection_bound_inflated: f64,
    #[serde(rename = "T_max")]
    pub t_max: f64,
    pub min_robots: Option<usize>,
    pub stable_p: Vec<usize>,
    pub violated: Vec<String>,
}

impl GuaranteeReport {
    pub fn ok(&self) -> bool {
        self.violated.is_empty()
    }
}

pub fn check_guarantees(
    mission: &MissionSpec,
    params: &LissajousParams,
    omega: f64,
) -> GuaranteeReport {
    check_guarantees_with(mission, params, omega, None)
}

/// As [`check_guarantees`]; with `grid_3d = Some(g)` also evaluates the
/// numeric 3D encumbrance at grid resolution `g`.
pub fn check_guarantees_with(
    mission: &MissionSpec,
    params: &LissajousParams,
    omega: f64,
    grid_3d: Option<usize>,
) -> GuaranteeReport {
    let mut violated = Vec::new();
    let coverage_bound = min_radius_coverage(
        mission.half_width,
        mission.half_height,
        params.freq_x,
        params.freq_y,
    );
    let detection_bound = min_radius_detection(
        mission.half_width,
        mission.half_height,
        mission.n,
        mission.kappa,
    );
    let coverage_ok = mission.r_s > coverage_bound;
    let detection_ok = mission.r_s >= detection_bound;
    if !coverage_ok {
        violated.push(format!(
            "coverage: r_s = {} must exceed {coverage_bound}",
            mission.r_s
        ));
    }
    if !detection_ok {
        violated.push(format!(
            "detection: r_s = {} below {detection_bound}",
            mission.r_s
        ));
    }
    let mut curve_problems = params.check();
    curve_problems.extend(mission.check());
    if params.amp_x != mission.half_width || params.amp_y != mission.half_height {
        curve_problems.push("curve amplitudes must match the mission rectangle".into());
    }
    let curve_ok = curve_problems.is_empty();
    violated.extend(curve_problems.into_iter().map(|p| format!("curve: {p}")));
    let collision_bound_3d = match grid_3d {
        Some(g) if !params.is_planar() && curve_ok => {
            Some(max_encumbrance_3d_with(params, mission.n, g))
        }
        _ => None,
    };
    let t_max = if omega > 0.0 {
        max_detection_time(omega, mission.n, mission.kappa)
    } else {
        violated.push("omega must be > 0".into());
        f64::INFINITY
    };
    GuaranteeReport {
        coverage_ok,
        detection_ok,
        curve_ok,
        collision_bound: max_encumbrance_2d(
            mission.half_width,
            mission.half_height,
            params.freq_x,
            params.freq_y,
            mission.n,
        ),
        collision_bound_3d,
        coverage_bound,
        detection_bound,
        detection_bound_inflated: detection_bound * mission.eta.max(1.0),
        t_max,
        min_robots: min_robots(
            mission.half_width,
            mission.half_height,
            mission.r_s,
            mission.kappa,
        )
        .ok(),
        stable_p: stable_p_set(mission.n)
            .into_iter()
            .filter(|&p| gcd(mission.n as u64, p as u64) == 1)
            .collect(),
        violated,
    }
}
