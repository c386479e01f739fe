//! Two- and three-dimensional Lissajous curves.
//!
//! The curve is `x = A cos(a γ)`, `y = B sin(b γ)`, `z = C cos(c γ + φ)`,
//! with `C = 0` meaning a planar curve. Besides evaluation this module
//! provides the diagnostics the planner relies on: non-degeneracy and knot
//! checks, numeric self-distance, nearest-point projection and the minimum
//! separation of robots placed at equally spaced parameters.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// Default number of parameter samples over one period for the self-distance
/// and separation scans.
pub const DEFAULT_SCAN_SAMPLES: usize = 1 << 17;

/// Default half-width of the projection search window.
pub const DEFAULT_PROJECTION_WINDOW: f64 = PI / 2.0;

/// Below this refined distance two curve points are treated as coincident.
const COINCIDENCE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LissajousParams {
    /// Half extent along x (`A`).
    #[serde(rename = "A")]
    pub amp_x: f64,
    /// Half extent along y (`B`).
    #[serde(rename = "B")]
    pub amp_y: f64,
    /// Vertical amplitude (`C`); zero for planar curves.
    #[serde(rename = "C", default)]
    pub amp_z: f64,
    #[serde(rename = "a")]
    pub freq_x: u32,
    #[serde(rename = "b")]
    pub freq_y: u32,
    #[serde(rename = "c", default = "default_freq_z")]
    pub freq_z: u32,
    /// Phase of the vertical component (`φ`).
    #[serde(rename = "phi", default)]
    pub phase: f64,
}

fn default_freq_z() -> u32 {
    1
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

impl LissajousParams {
    /// Validated constructor. Rejects parameters that break the mission
    /// invariants (odd `a`, coprime frequencies).
    pub fn new(
        amp_x: f64,
        amp_y: f64,
        amp_z: f64,
        freq_x: u32,
        freq_y: u32,
        freq_z: u32,
        phase: f64,
    ) -> Result<Self> {
        let p = Self::analysis(amp_x, amp_y, amp_z, freq_x, freq_y, freq_z, phase);
        let violations = p.check();
        if violations.is_empty() {
            Ok(p)
        } else {
            Err(Error::InvalidCurve(violations.join("; ")))
        }
    }

    /// Planar curve (`C = 0`).
    pub fn planar(amp_x: f64, amp_y: f64, freq_x: u32, freq_y: u32) -> Result<Self> {
        Self::new(amp_x, amp_y, 0.0, freq_x, freq_y, 1, 0.0)
    }

    /// Unchecked constructor for analysis-only use (circles, ellipses and other
    /// degenerate shapes that are never flown).
    pub fn analysis(
        amp_x: f64,
        amp_y: f64,
        amp_z: f64,
        freq_x: u32,
        freq_y: u32,
        freq_z: u32,
        phase: f64,
    ) -> Self {
        Self {
            amp_x,
            amp_y,
            amp_z,
            freq_x,
            freq_y,
            freq_z,
            phase,
        }
    }

    pub fn is_planar(&self) -> bool {
        self.amp_z == 0.0
    }

    /// Same curve with the vertical component removed.
    pub fn flattened(&self) -> Self {
        Self {
            amp_z: 0.0,
            ..*self
        }
    }

    /// Lists every violated type invariant; empty when the parameters are valid.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.amp_x.is_finite() && self.amp_x > 0.0) {
            out.push(format!("A must be > 0 (got {})", self.amp_x));
        }
        if !(self.amp_y.is_finite() && self.amp_y > 0.0) {
            out.push(format!("B must be > 0 (got {})", self.amp_y));
        }
        if !(self.amp_z.is_finite() && self.amp_z >= 0.0) {
            out.push(format!("C must be >= 0 (got {})", self.amp_z));
        }
        if !self.phase.is_finite() {
            out.push("phi must be finite".into());
        }
        if self.freq_x == 0 || self.freq_y == 0 || (!self.is_planar() && self.freq_z == 0) {
            out.push("frequencies must be positive".into());
            return out;
        }
        if self.freq_x.is_multiple_of(2) {
            out.push(format!(
                "non-degeneracy requires odd a (got {})",
                self.freq_x
            ));
        }
        let (a, b, c) = (self.freq_x as u64, self.freq_y as u64, self.freq_z as u64);
        if gcd(a, b) != 1 {
            out.push(format!(
                "non-degeneracy requires gcd(a, b) = 1 (gcd({a}, {b}) = {})",
                gcd(a, b)
            ));
        }
        if !self.is_planar() {
            if gcd(a, c) != 1 {
                out.push(format!(
                    "3D curve requires gcd(a, c) = 1 (gcd({a}, {c}) = {})",
                    gcd(a, c)
                ));
            }
            if gcd(b, c) != 1 {
                out.push(format!(
                    "3D curve requires gcd(b, c) = 1 (gcd({b}, {c}) = {})",
                    gcd(b, c)
                ));
            }
        }
        out
    }

    pub fn eval(&self, gamma: f64) -> Point3 {
        let z = if self.is_planar() {
            0.0
        } else {
            self.amp_z * (self.freq_z as f64 * gamma + self.phase).cos()
        };
        Vector3::new(
            self.amp_x * (self.freq_x as f64 * gamma).cos(),
            self.amp_y * (self.freq_y as f64 * gamma).sin(),
            z,
        )
    }

    /// `dL/dγ` at `gamma`.
    pub fn derivative(&self, gamma: f64) -> Vector3<f64> {
        let (a, b, c) = (self.freq_x as f64, self.freq_y as f64, self.freq_z as f64);
        let dz = if self.is_planar() {
            0.0
        } else {
            -self.amp_z * c * (c * gamma + self.phase).sin()
        };
        Vector3::new(
            -self.amp_x * a * (a * gamma).sin(),
            self.amp_y * b * (b * gamma).cos(),
            dz,
        )
    }

    /// `d²L/dγ²` at `gamma`.
    pub fn second_derivative(&self, gamma: f64) -> Vector3<f64> {
        let (a, b, c) = (self.freq_x as f64, self.freq_y as f64, self.freq_z as f64);
        let ddz = if self.is_planar() {
            0.0
        } else {
            -self.amp_z * c * c * (c * gamma + self.phase).cos()
        };
        Vector3::new(
            -self.amp_x * a * a * (a * gamma).cos(),
            -self.amp_y * b * b * (b * gamma).sin(),
            ddz,
        )
    }

    /// Velocity of a point moving along the curve with parameter rate `gamma_rate`.
    pub fn eval_velocity(&self, gamma: f64, gamma_rate: f64) -> Vector3<f64> {
        self.derivative(gamma) * gamma_rate
    }

    /// Upper bound of `|dL/dγ|` over the whole curve.
    pub fn max_speed(&self) -> f64 {
        let (a, b, c) = (self.freq_x as f64, self.freq_y as f64, self.freq_z as f64);
        let cz = if self.is_planar() {
            0.0
        } else {
            self.amp_z * c
        };
        ((self.amp_x * a).powi(2) + (self.amp_y * b).powi(2) + cz * cz).sqrt()
    }

    fn max_freq(&self) -> f64 {
        let fz = if self.is_planar() { 0 } else { self.freq_z };
        self.freq_x.max(self.freq_y).max(fz) as f64
    }

    fn scale(&self) -> f64 {
        self.amp_x.max(self.amp_y).max(self.amp_z)
    }
}

/// Result of [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveDiagnostics {
    pub nondegenerate: bool,
    pub knot: bool,
    /// Smallest distance between two non-adjacent points of the curve.
    pub min_self_distance: f64,
    /// Parameter pairs `(γ1, γ2)` at which the curve meets itself.
    pub violating_parameter_pairs: Vec<(f64, f64)>,
}

fn is_multiple_of_pi(x: f64) -> bool {
    let k = (x / PI).round();
    (x - k * PI).abs() < 1e-9
}

/// Analytic knot test: pairwise coprime frequencies, odd `a`, and a vertical
/// phase that keeps the curve away from its singular (self-crossing) family.
///
/// With `x = cos(aγ)`, `y = cos(bγ - π/2)`, `z = cos(cγ + φ)` the curve crosses
/// itself whenever one of `a·φ_y - b·φ_x`, `b·φ_z - c·φ_y`, `c·φ_x - a·φ_z` is
/// a multiple of π. The first term is `-aπ/2`, which is why `a` must be odd.
pub fn is_knot(params: &LissajousParams) -> bool {
    if params.is_planar() || !params.check().is_empty() {
        return false;
    }
    let (a, b, c) = (
        params.freq_x as f64,
        params.freq_y as f64,
        params.freq_z as f64,
    );
    let phi = params.phase;
    !is_multiple_of_pi(b * phi + c * PI / 2.0) && !is_multiple_of_pi(a * phi)
}

pub fn is_nondegenerate(params: &LissajousParams) -> bool {
    params.freq_x > 0
        && params.freq_y > 0
        && params.freq_x % 2 == 1
        && gcd(params.freq_x as u64, params.freq_y as u64) == 1
}

pub fn validate(params: &LissajousParams) -> CurveDiagnostics {
    validate_with(params, DEFAULT_SCAN_SAMPLES)
}

pub fn validate_with(params: &LissajousParams, samples: usize) -> CurveDiagnostics {
    let nondegenerate = is_nondegenerate(params);
    let knot = nondegenerate && is_knot(params);
    let scan = self_distance_scan(params, samples);
    CurveDiagnostics {
        nondegenerate,
        knot,
        min_self_distance: scan.min_distance,
        violating_parameter_pairs: scan.crossings,
    }
}

struct SelfDistanceScan {
    min_distance: f64,
    crossings: Vec<(f64, f64)>,
}

fn circ_index_gap(i: usize, j: usize, m: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(m - d)
}

fn circ_param_gap(u: f64, v: f64) -> f64 {
    let d = (u - v).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Newton refinement of `½|L(u) - L(v)|²` from a sampled pair.
fn refine_pair(params: &LissajousParams, mut u: f64, mut v: f64) -> (f64, f64, f64) {
    let dist = |u: f64, v: f64| (params.eval(u) - params.eval(v)).norm();
    let mut best = dist(u, v);
    let mut lambda = 1e-9;
    for _ in 0..60 {
        let d = params.eval(u) - params.eval(v);
        let du = params.derivative(u);
        let dv = params.derivative(v);
        let g = [d.dot(&du), -d.dot(&dv)];
        if g[0].abs() + g[1].abs() < 1e-16 {
            break;
        }
        let huu = du.dot(&du) + d.dot(&params.second_derivative(u));
        let hvv = dv.dot(&dv) - d.dot(&params.second_derivative(v));
        let huv = -du.dot(&dv);
        let scale = huu.abs().max(hvv.abs()).max(1e-300);
        let mut improved = false;
        for _ in 0..30 {
            let a11 = huu + lambda * scale;
            let a22 = hvv + lambda * scale;
            let det = a11 * a22 - huv * huv;
            if det > 0.0 && a11 > 0.0 {
                let su = -(a22 * g[0] - huv * g[1]) / det;
                let sv = -(a11 * g[1] - huv * g[0]) / det;
                let cand = dist(u + su, v + sv);
                if cand < best {
                    u += su;
                    v += sv;
                    best = cand;
                    lambda = (lambda * 0.1).max(1e-12);
                    improved = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved || best < 1e-13 * params.scale() {
            break;
        }
    }
    (u.rem_euclid(TAU), v.rem_euclid(TAU), best)
}

/// Dense-sampling self-distance scan with Newton refinement.
///
/// Two passes: a coarse all-pairs pass that finds every discrete local
/// minimum of the pairwise distance away from the diagonal, and a dense pass
/// that hashes `samples` points into a uniform grid to catch near-crossings
/// that the coarse pass cannot resolve.
fn self_distance_scan(params: &LissajousParams, samples: usize) -> SelfDistanceScan {
    let samples = samples.max(64);
    let scale = params.scale();
    let mut minima: Vec<(f64, f64, f64)> = Vec::new();

    // Coarse pass.
    let mc = samples.min(2048);
    let hc = TAU / mc as f64;
    let coarse: Vec<Point3> = (0..mc).map(|i| params.eval(i as f64 * hc)).collect();
    let dmat = |i: usize, j: usize| -> f64 { (coarse[i % mc] - coarse[j % mc]).norm() };
    let excl_c = 4;
    let mut coarse_min: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..mc {
        for j in (i + 1)..mc {
            if circ_index_gap(i, j, mc) < excl_c {
                continue;
            }
            let d = dmat(i, j);
            let mut is_min = true;
            'nb: for di in [mc - 1, 0, 1] {
                for dj in [mc - 1, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    if dmat(i + di, j + dj) < d {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                coarse_min.push((d, i, j));
            }
        }
    }
    coarse_min.sort_by(|x, y| x.0.total_cmp(&y.0));
    let vmax = params.max_speed();
    if let Some(&(d0, _, _)) = coarse_min.first() {
        let cutoff = d0 + 2.0 * vmax * hc;
        for &(d, i, j) in coarse_min.iter().take_while(|c| c.0 <= cutoff).take(4096) {
            let _ = d;
            minima.push(refine_pair(params, i as f64 * hc, j as f64 * hc));
        }
    }

    // Dense pass.
    let h = TAU / samples as f64;
    let pts: Vec<Point3> = (0..samples).map(|i| params.eval(i as f64 * h)).collect();
    let tau = 2.0 * vmax * h;
    let cell = tau.max(1e-9);
    let key = |p: &Point3| {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    for (i, p) in pts.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i as u32);
    }
    let dist = |i: usize, j: usize| (pts[i % samples] - pts[j % samples]).norm();
    let excl = 8;
    let mut dense_candidates: Vec<(f64, usize, usize)> = Vec::new();
    let mut keys: Vec<_> = grid.keys().copied().collect();
    keys.sort_unstable();
    for k in keys {
        let members = &grid[&k];
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(other) = grid.get(&(k.0 + dx, k.1 + dy, k.2 + dz)) else {
                        continue;
                    };
                    for &i in members {
                        for &j in other {
                            let (i, j) = (i as usize, j as usize);
                            if j <= i || circ_index_gap(i, j, samples) < excl {
                                continue;
                            }
                            let d = dist(i, j);
                            if d >= tau {
                                continue;
                            }
                            let mut is_min = true;
                            'nb2: for di in [samples - 1, 0, 1] {
                                for dj in [samples - 1, 0, 1] {
                                    if di == 0 && dj == 0 {
                                        continue;
                                    }
                                    if dist(i + di, j + dj) < d {
                                        is_min = false;
                                        break 'nb2;
                                    }
                                }
                            }
                            if is_min {
                                dense_candidates.push((d, i, j));
                            }
                        }
                    }
                }
            }
        }
    }
    dense_candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    dense_candidates.dedup_by(|a, b| a.1 == b.1 && a.2 == b.2);
    for &(_, i, j) in dense_candidates.iter().take(20_000) {
        minima.push(refine_pair(params, i as f64 * h, j as f64 * h));
    }

    let mut min_distance = f64::INFINITY;
    let mut crossings: Vec<(f64, f64)> = Vec::new();
    for (u, v, d) in minima {
        // Refinement that slid onto the diagonal is the trivial solution.
        if circ_param_gap(u, v) < 1e-4 {
            continue;
        }
        if d < min_distance {
            min_distance = d;
        }
        if d < COINCIDENCE_TOL * scale.max(1.0) {
            let (lo, hi) = if u < v { (u, v) } else { (v, u) };
            if !crossings
                .iter()
                .any(|c| circ_param_gap(c.0, lo) < 1e-6 && circ_param_gap(c.1, hi) < 1e-6)
            {
                crossings.push((lo, hi));
            }
        }
    }
    if !min_distance.is_finite() {
        // No off-diagonal approach at all (e.g. an ellipse): fall back to the
        // diameter-scale lower bound of the coarse pass.
        min_distance = coarse_min.first().map(|c| c.0).unwrap_or(0.0);
    }
    crossings.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    SelfDistanceScan {
        min_distance: min_distance.max(0.0),
        crossings,
    }
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Parameter in `[theta_hint - window, theta_hint + window]` whose curve
/// point is closest to `point`.
///
/// Coarse grid search followed by golden-section refinement. Equal minima
/// (e.g. a planar self-crossing) resolve toward `theta_hint`. The returned
/// value is unwrapped, i.e. continuous with the hint.
pub fn project(params: &LissajousParams, point: &Point3, theta_hint: f64, window: f64) -> f64 {
    assert!(window > 0.0, "projection window must be positive");
    let d2 = |g: f64| (params.eval(g) - point).norm_squared();
    let n = ((window * params.max_freq() * 24.0 / PI).ceil() as usize).clamp(64, 1 << 16);
    let step = 2.0 * window / n as f64;
    let lo = theta_hint - window;
    let mut best_k = 0usize;
    let mut best = f64::INFINITY;
    let tie = 1e-12 * params.scale().powi(2).max(1.0);
    for k in 0..=n {
        let g = lo + k as f64 * step;
        let v = d2(g);
        let closer = (g - theta_hint).abs() < (lo + best_k as f64 * step - theta_hint).abs();
        if v < best - tie || ((v - best).abs() <= tie && closer) {
            best = v;
            best_k = k;
        }
    }
    let center = lo + best_k as f64 * step;
    let a = (center - step).max(lo);
    let b = (center + step).min(theta_hint + window);
    let g = golden_section(d2, a, b, 1e-13 * (1.0 + center.abs()));
    if d2(g) <= best {
        g
    } else {
        center
    }
}

/// Smallest distance between any two of `n` robots placed at parameters
/// `γ + 2πi/n`, minimised over `γ`.
pub fn min_pairwise_separation(params: &LissajousParams, n: usize) -> f64 {
    min_pairwise_separation_with(params, n, DEFAULT_SCAN_SAMPLES)
}

/// As [`min_pairwise_separation`] with an explicit grid resolution: `grid` is
/// the number of samples per full period. Shifting `γ` by `2π/n` permutes the
/// robots, so only `[0, 2π/n)` is scanned.
pub fn min_pairwise_separation_with(params: &LissajousParams, n: usize, grid: usize) -> f64 {
    assert!(n >= 2, "separation needs at least two robots");
    let slot = TAU / n as f64;
    let samples = (grid / n).max(16);
    let step = slot / samples as f64;
    let offsets: Vec<f64> = (0..n).map(|i| i as f64 * slot).collect();
    let config_min = |g: f64| -> f64 {
        let pts: Vec<Point3> = offsets.iter().map(|o| params.eval(g + o)).collect();
        let mut m = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (pts[i] - pts[j]).norm_squared();
                if d < m {
                    m = d;
                }
            }
        }
        m.sqrt()
    };
    let values: Vec<f64> = (0..samples).map(|k| config_min(k as f64 * step)).collect();
    let mut order: Vec<usize> = (0..samples)
        .filter(|&k| {
            let prev = values[(k + samples - 1) % samples];
            let next = values[(k + 1) % samples];
            values[k] <= prev && values[k] <= next
        })
        .collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    let mut best = values.iter().copied().fold(f64::INFINITY, f64::min);
    for &k in order.iter().take(8) {
        let c = k as f64 * step;
        let g = golden_section(config_min, c - step, c + step, 1e-12);
        best = best.min(config_min(g));
    }
    best
}

/// Largest deviation of the robots' planar positions from the ellipse family
/// `y²/B² + x²/A² - 2xy sin(Mγ')/(AB) = cos²(Mγ')`, `M = a + b`.
///
/// Robots sit at `L(θ_i + γ)` projected onto the x-y plane. At a splay
/// equilibrium with `a + b = N/κ` every `M θ_i` is congruent mod 2π; the common
/// ellipse angle `Mγ'` is recovered as `arg Σ exp(i M θ_i) + M γ`, so any
/// deviation from equal spacing shows up as a non-zero residual.
pub fn ellipse_residual(params: &LissajousParams, thetas: &[f64], gamma: f64) -> f64 {
    if thetas.is_empty() {
        return 0.0;
    }
    let m = (params.freq_x + params.freq_y) as f64;
    let (s, c) = thetas.iter().fold((0.0, 0.0), |(s, c), t| {
        (s + (m * t).sin(), c + (m * t).cos())
    });
    let angle = s.atan2(c) + m * gamma;
    let (sa, ca) = angle.sin_cos();
    let (aa, bb) = (params.amp_x, params.amp_y);
    thetas
        .iter()
        .map(|t| {
            let p = params.eval(t + gamma);
            let (x, y) = (p.x, p.y);
            (y * y / (bb * bb) + x * x / (aa * aa) - 2.0 * x * y * sa / (aa * bb) - ca * ca).abs()
        })
        .fold(0.0, f64::max)
}
