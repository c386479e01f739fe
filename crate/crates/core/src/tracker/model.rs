//! Per-axis triple integrator driven by jerk.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// `[x, ẋ, ẍ, y, ẏ, ÿ, z, ż, z̈]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KinematicState(pub SVector<f64, 9>);

impl KinematicState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self::from_motion(position, Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_motion(
        position: Vector3<f64>,
        velocity: Vector3<f64>,
        acceleration: Vector3<f64>,
    ) -> Self {
        let mut s = SVector::<f64, 9>::zeros();
        for axis in 0..3 {
            s[3 * axis] = position[axis];
            s[3 * axis + 1] = velocity[axis];
            s[3 * axis + 2] = acceleration[axis];
        }
        Self(s)
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[3], self.0[6])
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.0[1], self.0[4], self.0[7])
    }

    pub fn acceleration(&self) -> Vector3<f64> {
        Vector3::new(self.0[2], self.0[5], self.0[8])
    }

    /// `(position, velocity, acceleration)` of one axis.
    pub fn axis(&self, axis: usize) -> Vector3<f64> {
        Vector3::new(self.0[3 * axis], self.0[3 * axis + 1], self.0[3 * axis + 2])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Single-axis transition and input matrices.
pub fn axis_model(dt: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let a = Matrix3::new(1.0, dt, dt * dt / 2.0, 0.0, 1.0, dt, 0.0, 0.0, 1.0);
    let b = Vector3::new(dt * dt * dt / 6.0, dt * dt / 2.0, dt);
    (a, b)
}

/// Block-diagonal model over the three axes.
pub fn build_model(dt: f64) -> (SMatrix<f64, 9, 9>, SMatrix<f64, 9, 3>) {
    assert!(dt > 0.0, "dt must be positive");
    let (a, b) = axis_model(dt);
    let mut am = SMatrix::<f64, 9, 9>::zeros();
    let mut bm = SMatrix::<f64, 9, 3>::zeros();
    for axis in 0..3 {
        am.fixed_view_mut::<3, 3>(3 * axis, 3 * axis).copy_from(&a);
        bm.fixed_view_mut::<3, 1>(3 * axis, axis).copy_from(&b);
    }
    (am, bm)
}

/// One step of the model with jerk `input`.
pub fn propagate(state: &KinematicState, input: &Vector3<f64>, dt: f64) -> KinematicState {
    propagate_disturbed(state, input, dt, &Vector3::zeros())
}

/// One step with an extra acceleration `disturbance` acting over the step.
pub fn propagate_disturbed(
    state: &KinematicState,
    input: &Vector3<f64>,
    dt: f64,
    disturbance: &Vector3<f64>,
) -> KinematicState {
    let (a, b) = axis_model(dt);
    let mut out = SVector::<f64, 9>::zeros();
    for axis in 0..3 {
        let next = a * state.axis(axis) + b * input[axis];
        let d = disturbance[axis];
        out[3 * axis] = next[0] + 0.5 * d * dt * dt;
        out[3 * axis + 1] = next[1] + d * dt;
        out[3 * axis + 2] = next[2];
    }
    KinematicState(out)
}

/// Seeded Ornstein-Uhlenbeck gust acting on acceleration.
#[derive(Debug, Clone)]
pub struct GustModel {
    sigma: f64,
    tau: f64,
    state: Vector3<f64>,
    rng: ChaCha8Rng,
}

impl GustModel {
    /// `sigma` is the stationary standard deviation (m/s²), `tau` the
    /// correlation time (s).
    pub fn new(sigma: f64, tau: f64, seed: u64) -> Self {
        Self {
            sigma,
            tau: tau.max(1e-9),
            state: Vector3::zeros(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn from_rng(sigma: f64, tau: f64, rng: ChaCha8Rng) -> Self {
        Self {
            sigma,
            tau: tau.max(1e-9),
            state: Vector3::zeros(),
            rng,
        }
    }

    pub fn sample(&mut self, dt: f64) -> Vector3<f64> {
        if self.sigma == 0.0 {
            return Vector3::zeros();
        }
        let decay = (-dt / self.tau).exp();
        let kick = self.sigma * (1.0 - decay * decay).sqrt();
        for k in 0..3 {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            self.state[k] = self.state[k] * decay + kick * n;
        }
        self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn coasting_kinematics() {
        let s = KinematicState::from_motion(
            Vector3::new(1.0, 2.0, 3.0),
            Vector3::new(0.5, -1.0, 0.0),
            Vector3::new(0.2, 0.0, -0.4),
        );
        let dt = 0.1;
        let n = propagate(&s, &Vector3::zeros(), dt);
        let expect = s.position() + s.velocity() * dt + s.acceleration() * dt * dt / 2.0;
        assert_abs_diff_eq!(n.position(), expect, epsilon = 1e-14);
        let rest = KinematicState::at_rest(Vector3::new(4.0, 5.0, 6.0));
        assert_eq!(propagate(&rest, &Vector3::zeros(), dt), rest);
    }

    #[test]
    fn unit_jerk_from_rest() {
        let dt = 0.05;
        let mut s = KinematicState::default();
        for _ in 0..40 {
            s = propagate(&s, &Vector3::new(1.0, 0.0, 0.0), dt);
        }
        let t = 40.0 * dt;
        assert_abs_diff_eq!(s.0[2], t, epsilon = 1e-12);
        assert_abs_diff_eq!(s.0[1], t * t / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.0[0], t * t * t / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn matrix_powers_match_repeated_steps() {
        let dt = 0.1;
        let (a, b) = build_model(dt);
        let mut s = KinematicState::from_motion(
            Vector3::new(1.0, -2.0, 0.5),
            Vector3::new(0.3, 0.1, -0.2),
            Vector3::new(0.0, 0.4, 0.1),
        );
        let u = Vector3::new(0.3, -0.7, 1.1);
        let mut lin = s.0;
        for _ in 0..25 {
            s = propagate(&s, &u, dt);
            lin = a * lin + b * u;
        }
        assert!((s.0 - lin).amax() < 1e-12);
        let a5 = a.pow(5);
        let mut rep = SMatrix::<f64, 9, 9>::identity();
        for _ in 0..5 {
            rep = a * rep;
        }
        assert!((a5 - rep).amax() < 1e-12);
    }

    #[test]
    fn gusts_replay_with_seed() {
        let mut g1 = GustModel::new(0.5, 2.0, 11);
        let mut g2 = GustModel::new(0.5, 2.0, 11);
        let mut g3 = GustModel::new(0.5, 2.0, 12);
        let a: Vec<_> = (0..100).map(|_| g1.sample(0.01)).collect();
        let b: Vec<_> = (0..100).map(|_| g2.sample(0.01)).collect();
        let c: Vec<_> = (0..100).map(|_| g3.sample(0.01)).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(GustModel::new(0.0, 1.0, 1).sample(0.01), Vector3::zeros());
    }
}
