//! Time-inverted Kuramoto coordination on a ring.
//!
//! Each robot integrates `θ̇_i = ω - K Σ_j sin(θ_j - θ_i)` over its two ring
//! neighbours. The repulsive coupling drives the ring to splay states where
//! consecutive robots are `2πp/N` apart.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::curve::gcd;
use crate::error::{Error, Result};

/// Largest accepted `K·dt` for the explicit Euler integrator.
pub const MAX_GAIN_STEP: f64 = 0.5;

/// Default tolerance for grouping phases into clusters.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwarmParams {
    pub n: usize,
    pub omega: f64,
    pub k: f64,
    pub dt: f64,
}

impl SwarmParams {
    pub fn new(n: usize, omega: f64, k: f64, dt: f64) -> Result<Self> {
        let p = Self { n, omega, k, dt };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n < 2 {
            errs.push(format!("N must be >= 2 (got {})", self.n));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            errs.push(format!("dt must be > 0 (got {})", self.dt));
        }
        if !self.omega.is_finite() || !self.k.is_finite() || self.k < 0.0 {
            errs.push("omega must be finite and K finite and non-negative".into());
        }
        if errs.is_empty() && self.k * self.dt > MAX_GAIN_STEP {
            errs.push(format!(
                "K*dt = {} exceeds {MAX_GAIN_STEP}; reduce dt or add integration substeps",
                self.k * self.dt
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSwarm(errs.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSpec {
    pub n: usize,
    /// Winding number: consecutive ring members sit `2πp/N` apart.
    pub p: usize,
    pub theta0: f64,
    /// Robots per cluster, `gcd(N, p)`.
    pub kappa: usize,
}

impl EquilibriumSpec {
    pub fn new(n: usize, p: usize, theta0: f64) -> Result<Self> {
        if !stable_p_set(n).contains(&p) {
            return Err(Error::InvalidSwarm(format!(
                "p = {p} is not a stable winding number for N = {n} (stable: {:?})",
                stable_p_set(n)
            )));
        }
        Ok(Self {
            n,
            p,
            theta0,
            kappa: cluster_count(n, p),
        })
    }

    /// Phase spacing between consecutive ring members.
    pub fn spacing(&self) -> f64 {
        TAU * self.p as f64 / self.n as f64
    }

    pub fn phases(&self) -> Vec<f64> {
        equilibrium_phases(self.n, self.p, self.theta0)
    }
}

/// Logical communication ring. `order[k]` is the robot in ring slot `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingTopology {
    order: Vec<usize>,
    slot_of: Vec<usize>,
}

impl RingTopology {
    /// Ring `0 - 1 - ... - N-1 - 0`.
    pub fn canonical(n: usize) -> Self {
        Self::from_order((0..n).collect()).expect("identity permutation")
    }

    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        if n < 2 {
            return Err(Error::Topology(format!(
                "ring needs at least 2 robots (got {n})"
            )));
        }
        let mut slot_of = vec![usize::MAX; n];
        for (slot, &id) in order.iter().enumerate() {
            if id >= n || slot_of[id] != usize::MAX {
                return Err(Error::Topology(format!(
                    "order is not a permutation of 0..{n}"
                )));
            }
            slot_of[id] = slot;
        }
        Ok(Self { order, slot_of })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn slot(&self, id: usize) -> usize {
        self.slot_of[id]
    }

    /// `[predecessor, successor]` of robot `id`. For `N = 2` both are the same robot.
    pub fn neighbors(&self, id: usize) -> [usize; 2] {
        let n = self.len();
        let s = self.slot_of[id];
        [self.order[(s + n - 1) % n], self.order[(s + 1) % n]]
    }

    pub fn is_edge(&self, a: usize, b: usize) -> bool {
        a < self.len() && b < self.len() && a != b && self.neighbors(a).contains(&b)
    }

    /// Ring edges `(order[k], order[k+1])`, in slot order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let count = if n == 2 { 1 } else { n };
        (0..count)
            .map(|k| (self.order[k], self.order[(k + 1) % n]))
            .collect()
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(TAU) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

pub fn kuramoto_rate(theta_i: f64, neighbor_thetas: &[f64], params: &SwarmParams) -> f64 {
    params.omega
        - params.k
            * neighbor_thetas
                .iter()
                .map(|t| (t - theta_i).sin())
                .sum::<f64>()
}

/// Uncoupled baseline: every robot advances at `ω`.
pub fn baseline_openloop_rate(params: &SwarmParams) -> f64 {
    params.omega
}

pub fn step(theta: f64, rate: f64, dt: f64) -> f64 {
    theta + rate * dt
}

/// `θ_i = θ₀ + 2πp·i/N` for ring slots `i = 0..N`.
pub fn equilibrium_phases(n: usize, p: usize, theta0: f64) -> Vec<f64> {
    (0..n)
        .map(|i| theta0 + TAU * (p * i) as f64 / n as f64)
        .collect()
}

/// Integers strictly inside `(N/4, 3N/4)`.
pub fn stable_p_set(n: usize) -> Vec<usize> {
    // p > N/4  <=>  4p > N ; p < 3N/4  <=>  4p < 3N
    (1..n).filter(|&p| 4 * p > n && 4 * p < 3 * n).collect()
}

/// Robots sharing each phase slot at the `(N, p)` equilibrium.
pub fn cluster_count(n: usize, p: usize) -> usize {
    gcd(n as u64, p as u64) as usize
}

/// Phases grouped into classes congruent mod 2π.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    /// Number of distinct phase classes.
    pub count: usize,
    /// Size of the largest class.
    pub largest: usize,
    /// Size of every class, in ascending phase order.
    pub sizes: Vec<usize>,
    /// Set when some gap between phases lies close to the tolerance.
    pub ambiguous: bool,
}

/// Groups phases mod 2π: neighbours on the circle closer than the split
/// threshold share a class.
///
/// The threshold is `tol` unless some gap falls within a factor of two of it;
/// then the split is placed in the widest (log-scale) break between the gap
/// sizes near `tol` and the result is flagged ambiguous.
pub fn clusters_from_phases(thetas: &[f64], tol: f64) -> ClusterReport {
    assert!(tol > 0.0, "cluster tolerance must be positive");
    if thetas.is_empty() {
        return ClusterReport {
            count: 0,
            largest: 0,
            sizes: Vec::new(),
            ambiguous: false,
        };
    }
    let mut w: Vec<f64> = thetas.iter().map(|t| t.rem_euclid(TAU)).collect();
    w.sort_by(f64::total_cmp);
    let n = w.len();
    let gaps: Vec<f64> = (0..n)
        .map(|k| {
            if k + 1 < n {
                w[k + 1] - w[k]
            } else {
                w[0] + TAU - w[n - 1]
            }
        })
        .collect();

    let near = |g: f64| g >= 0.5 * tol && g <= 2.0 * tol;
    let ambiguous = gaps.iter().any(|&g| near(g));
    let mut threshold = tol;
    if ambiguous {
        let mut sorted: Vec<f64> = gaps.iter().copied().filter(|g| *g > 0.0).collect();
        sorted.sort_by(f64::total_cmp);
        let mut best_ratio = 0.0;
        for pair in sorted.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            if hi < 0.5 * tol || lo > 2.0 * tol {
                continue;
            }
            let ratio = (hi / lo.max(1e-300)).ln();
            if ratio > best_ratio {
                best_ratio = ratio;
                threshold = (lo * hi).sqrt();
            }
        }
    }

    let breaks: Vec<usize> = (0..n).filter(|&k| gaps[k] > threshold).collect();
    let sizes: Vec<usize> = if breaks.is_empty() {
        vec![n]
    } else {
        let mut s: Vec<usize> = breaks.windows(2).map(|b| b[1] - b[0]).collect();
        s.push(breaks[0] + n - breaks[breaks.len() - 1]);
        s
    };
    ClusterReport {
        count: sizes.len(),
        largest: sizes.iter().copied().max().unwrap_or(0),
        sizes,
        ambiguous,
    }
}

/// Whether a single-robot perturbation `delta` keeps both neighbour
/// couplings repulsive: `cos(θ*_i - θ*_j + δ) < 0` for both ring neighbours.
pub fn perturbation_safe(
    eq: &EquilibriumSpec,
    i: usize,
    delta: f64,
    topology: &RingTopology,
) -> bool {
    let phases = eq.phases();
    let si = topology.slot(i);
    topology.neighbors(i).iter().all(|&j| {
        let sj = topology.slot(j);
        (phases[si] - phases[sj] + delta).cos() < 0.0
    })
}

/// `max_i |Σ_j sin(θ_i - θ_j)|`; zero at any equilibrium of the coupling.
/// `thetas` is indexed by robot id.
pub fn order_residual(thetas: &[f64], topology: &RingTopology) -> f64 {
    (0..thetas.len())
        .map(|i| {
            topology
                .neighbors(i)
                .iter()
                .map(|&j| (thetas[i] - thetas[j]).sin())
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}

/// Synchronous Euler integration of the ring for `steps` ticks with perfect
/// state sharing. `thetas` is indexed by robot id.
pub fn simulate_ring(
    thetas: &mut [f64],
    topology: &RingTopology,
    params: &SwarmParams,
    steps: usize,
) {
    let mut rates = vec![0.0; thetas.len()];
    for _ in 0..steps {
        for (i, r) in rates.iter_mut().enumerate() {
            let nb = topology.neighbors(i).map(|j| thetas[j]);
            *r = kuramoto_rate(thetas[i], &nb, params);
        }
        for (t, r) in thetas.iter_mut().zip(&rates) {
            *t = step(*t, *r, params.dt);
        }
    }
}

/// Phase differences `θ_{order[k+1]} - θ_{order[k]}` along the ring, wrapped
/// to `(-π, π]`.
pub fn ring_differences(thetas: &[f64], topology: &RingTopology) -> Vec<f64> {
    topology
        .edges()
        .iter()
        .map(|&(a, b)| wrap_angle(thetas[b] - thetas[a]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(omega: f64, k: f64) -> SwarmParams {
        SwarmParams::new(5, omega, k, 0.01).unwrap()
    }

    #[test]
    fn rate_examples() {
        let p = params(0.03, 30.0);
        assert_abs_diff_eq!(
            kuramoto_rate(0.0, &[PI / 2.0, -PI / 2.0], &p),
            0.03,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(kuramoto_rate(0.0, &[PI, PI], &p), 0.03, epsilon = 1e-12);
        let p0 = params(0.0, 1.0);
        assert_abs_diff_eq!(
            kuramoto_rate(0.0, &[4.0 * PI / 5.0, -4.0 * PI / 5.0], &p0),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gain_step_guard() {
        assert!(SwarmParams::new(50, 0.01, 1000.0, 0.01).is_err());
        assert!(SwarmParams::new(50, 0.01, 1000.0, 0.0005).is_ok());
        assert!(SwarmParams::new(1, 0.01, 1.0, 0.01).is_err());
    }

    #[test]
    fn step_examples() {
        assert_abs_diff_eq!(step(1.0, 0.03, 0.01), 1.0003, epsilon = 1e-15);
        assert_eq!(step(1.0, 0.0, 0.01), 1.0);
        let mut t = 0.7;
        for _ in 0..100 {
            t = step(t, 0.25, 0.01);
        }
        assert_abs_diff_eq!(t, 0.7 + 100.0 * 0.25 * 0.01, epsilon = 1e-12);
    }

    #[test]
    fn equilibrium_examples() {
        let e = equilibrium_phases(4, 2, 0.0);
        assert_abs_diff_eq!(e[1], PI, epsilon = 1e-15);
        assert_abs_diff_eq!(e[3], 3.0 * PI, epsilon = 1e-15);
        let e = equilibrium_phases(7, 3, 0.0);
        for (i, t) in e.iter().enumerate() {
            assert_abs_diff_eq!(*t, 6.0 * PI * i as f64 / 7.0, epsilon = 1e-12);
        }
        let ring = RingTopology::canonical(7);
        let p = SwarmParams::new(7, 0.0, 1.0, 0.01).unwrap();
        for i in 0..7 {
            let nb = ring.neighbors(i).map(|j| e[j]);
            assert_abs_diff_eq!(kuramoto_rate(e[i], &nb, &p), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn stable_sets() {
        assert_eq!(stable_p_set(7), vec![2, 3, 4, 5]);
        assert_eq!(stable_p_set(4), vec![2]);
        assert_eq!(stable_p_set(50), (13..=37).collect::<Vec<_>>());
        assert_eq!(stable_p_set(2), vec![1]);
        assert!(stable_p_set(1).is_empty());
    }

    #[test]
    fn cluster_counts() {
        assert_eq!(cluster_count(50, 27), 1);
        assert_eq!(cluster_count(50, 26), 2);
        assert_eq!(cluster_count(6, 3), 3);
    }

    #[test]
    fn clusters_from_phase_lists() {
        let r = clusters_from_phases(&[0.0, TAU, 2.0 * TAU], 1e-3);
        assert_eq!((r.count, r.largest), (1, 3));
        let r = clusters_from_phases(&equilibrium_phases(6, 3, 0.0), 1e-3);
        assert_eq!((r.count, r.largest), (2, 3));
        let r = clusters_from_phases(&equilibrium_phases(7, 2, 0.5), 1e-3);
        assert_eq!((r.count, r.largest), (7, 1));
        assert!(!r.ambiguous);
        // wrap-around class straddling 0
        let r = clusters_from_phases(&[-1e-4, 1e-4, PI], 1e-3);
        assert_eq!(r.sizes.iter().sum::<usize>(), 3);
        assert_eq!((r.count, r.largest), (2, 2));
    }

    #[test]
    fn ambiguous_gap_flagged() {
        let r = clusters_from_phases(&[0.0, 0.011, 1.0, 1.0001], 1e-2);
        assert!(r.ambiguous);
        // 0.011 vs 1e-4: the widest break separates the tight pair from the loose one
        assert_eq!(r.count, 3);
    }

    #[test]
    fn perturbation_examples() {
        let eq = EquilibriumSpec::new(5, 2, 0.0).unwrap();
        let ring = RingTopology::canonical(5);
        assert!(perturbation_safe(&eq, 2, 0.2, &ring));
        assert!(!perturbation_safe(&eq, 2, 1.5, &ring));
        assert!(perturbation_safe(&eq, 2, 0.0, &ring));
    }

    #[test]
    fn residual_examples() {
        let ring = RingTopology::canonical(7);
        let mut e = equilibrium_phases(7, 3, 0.2);
        assert!(order_residual(&e, &ring) < 1e-12);
        e[2] += 0.1;
        assert!(order_residual(&e, &ring) > 0.01);
    }

    #[test]
    fn residual_decreases_along_trajectory() {
        let ring = RingTopology::canonical(7);
        let p = SwarmParams::new(7, 0.0, 5.0, 0.01).unwrap();
        let mut th = equilibrium_phases(7, 3, 0.0);
        th[1] += 0.2;
        th[4] -= 0.1;
        let mut last = order_residual(&th, &ring);
        for _ in 0..20 {
            simulate_ring(&mut th, &ring, &p, 100);
            let r = order_residual(&th, &ring);
            assert!(r <= last + 1e-15);
            last = r;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn topology_rejects_non_permutation() {
        assert!(RingTopology::from_order(vec![0, 0, 1]).is_err());
        let r = RingTopology::from_order(vec![2, 0, 1]).unwrap();
        assert_eq!(r.neighbors(0), [2, 1]);
        assert!(r.is_edge(1, 2));
        assert_eq!(r.edges().len(), 3);
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(0.5 + 4.0 * TAU), 0.5, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn rate_is_rotation_invariant(
            ti in -10.0f64..10.0,
            a in -10.0f64..10.0,
            b in -10.0f64..10.0,
            c in -100.0f64..100.0,
        ) {
            let p = params(0.03, 3.0);
            let r0 = kuramoto_rate(ti, &[a, b], &p);
            let r1 = kuramoto_rate(ti + c, &[a + c, b + c], &p);
            prop_assert!((r0 - r1).abs() < 1e-9);
        }

        #[test]
        fn step_is_linear(t in -5.0f64..5.0, r in -2.0f64..2.0, dt in 1e-4f64..0.1, s in 0.1f64..3.0) {
            let d1 = step(t, r * s, dt) - t;
            let d2 = s * (step(t, r, dt) - t);
            prop_assert!((d1 - d2).abs() < 1e-12);
        }

        #[test]
        fn stable_p_inside_window(n in 3usize..200) {
            for p in stable_p_set(n) {
                prop_assert!((TAU * p as f64 / n as f64).cos() < 0.0);
            }
        }
    }
}
