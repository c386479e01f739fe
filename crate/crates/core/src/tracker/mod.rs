//! Model-predictive tracking of a point reference.
//!
//! Each axis is an independent triple integrator, so the horizon QP splits
//! into three condensed problems over the jerk sequence of that axis. The
//! objective is `½ Σ_{k=1}^{n-1} e_kᵀ Q e_k + e_nᵀ S e_n` with
//! `e_k = x_k - [ref, 0, 0]`, subject to state, input and slew boxes.

pub mod model;
pub mod qp;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use model::{build_model, propagate, propagate_disturbed, GustModel, KinematicState};
use qp::{AdmmSolver, PolishOutcome, QpSettings, QpStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    /// Horizon length.
    pub horizon: usize,
    /// Step of the prediction model (s).
    pub dt: f64,
    /// Stage weights on `[x, ẋ, ẍ, y, ẏ, ÿ, z, ż, z̈]`.
    pub q: [f64; 9],
    /// Terminal weights.
    pub s: [f64; 9],
    /// Symmetric state bounds.
    pub x_max: [f64; 9],
    /// Jerk bound per axis.
    pub u_max: [f64; 3],
    /// Bound on the jerk rate per axis; consecutive inputs differ by at most `u_dot_max·dt`.
    pub u_dot_max: [f64; 3],
    #[serde(default)]
    pub solver: QpSettings,
}

impl Default for MpcConfig {
    fn default() -> Self {
        let q = [1.0, 0.1, 0.01, 1.0, 0.1, 0.01, 1.0, 0.1, 0.01];
        Self {
            horizon: 10,
            dt: 0.1,
            q,
            s: q.map(|w| 10.0 * w),
            x_max: [1e4, 5.0, 3.0, 1e4, 5.0, 3.0, 1e4, 5.0, 3.0],
            u_max: [10.0; 3],
            u_dot_max: [20.0; 3],
            solver: QpSettings::default(),
        }
    }
}

impl MpcConfig {
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.horizon == 0 {
            out.push("horizon must be >= 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt must be > 0 (got {})", self.dt));
        }
        if self
            .q
            .iter()
            .chain(&self.s)
            .any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            out.push("weights must be finite and non-negative".into());
        }
        if self
            .x_max
            .iter()
            .chain(&self.u_max)
            .chain(&self.u_dot_max)
            .any(|b| !(*b > 0.0))
        {
            out.push("bounds must be > 0".into());
        }
        for axis in 0..3 {
            if self.q[3 * axis] + self.s[3 * axis] == 0.0 {
                out.push(format!("axis {axis} has no position weight"));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MpcSolution {
    /// Jerk inputs `u_1..u_n`; the first one is applied.
    pub inputs: Vec<Vector3<f64>>,
    /// Predicted states `x_1..x_n`.
    pub states: Vec<KinematicState>,
    pub cost: f64,
    /// Largest primal or stationarity residual over the three axes.
    pub residual: f64,
    pub infeasible: bool,
    pub iterations: usize,
    /// Set when every axis ended with an exact active-set solution.
    pub polished: bool,
}

impl MpcSolution {
    pub fn first_input(&self) -> Vector3<f64> {
        self.inputs[0]
    }
}

/// Condensed prediction of one axis: `x_{k+1} = Φ_k x0 + Γ_k u` (block rows of 3).
#[derive(Debug, Clone)]
struct AxisPrediction {
    phi: DMatrix<f64>,
    gamma: DMatrix<f64>,
}

fn axis_prediction(dt: f64, n: usize) -> AxisPrediction {
    let (a, b) = model::axis_model(dt);
    let mut phi = DMatrix::zeros(3 * n, 3);
    let mut gamma = DMatrix::zeros(3 * n, n);
    let mut ak = Matrix3::identity();
    // powers[j] = A^j B
    let mut powers = Vec::with_capacity(n);
    let mut pb = b;
    for _ in 0..n {
        powers.push(pb);
        pb = a * pb;
    }
    for k in 0..n {
        ak = a * ak;
        phi.view_mut((3 * k, 0), (3, 3)).copy_from(&ak);
        for j in 0..=k {
            gamma.view_mut((3 * k, j), (3, 1)).copy_from(&powers[k - j]);
        }
    }
    AxisPrediction { phi, gamma }
}

#[derive(Debug, Clone)]
struct AxisQp {
    pred: AxisPrediction,
    /// Per-step weight matrices on `(pos, vel, acc)`; the last entry uses 2·S.
    weights: Vec<Vector3<f64>>,
    solver: AdmmSolver,
    last_inputs: Option<DVector<f64>>,
}

impl AxisQp {
    fn new(config: &MpcConfig, axis: usize) -> Self {
        let n = config.horizon;
        let pred = axis_prediction(config.dt, n);
        let q = Vector3::new(
            config.q[3 * axis],
            config.q[3 * axis + 1],
            config.q[3 * axis + 2],
        );
        let s = Vector3::new(
            config.s[3 * axis],
            config.s[3 * axis + 1],
            config.s[3 * axis + 2],
        );
        let weights: Vec<Vector3<f64>> = (0..n)
            .map(|k| if k + 1 < n { q } else { s * 2.0 })
            .collect();
        let mut h = DMatrix::zeros(n, n);
        for (k, w) in weights.iter().enumerate() {
            let g = pred.gamma.rows(3 * k, 3);
            let wg = DMatrix::from_diagonal(&DVector::from_column_slice(w.as_slice())) * g;
            h += g.transpose() * wg;
        }
        let h = (&h + h.transpose()) * 0.5;
        let m = 5 * n;
        let mut a = DMatrix::zeros(m, n);
        a.view_mut((0, 0), (3 * n, n)).copy_from(&pred.gamma);
        for k in 0..n {
            a[(3 * n + k, k)] = 1.0;
            a[(4 * n + k, k)] = 1.0;
            if k > 0 {
                a[(4 * n + k, k - 1)] = -1.0;
            }
        }
        let solver = AdmmSolver::new(h, a, config.solver);
        Self {
            pred,
            weights,
            solver,
            last_inputs: None,
        }
    }

    /// `refs[k]` is the `(pos, vel, acc)` target after step `k + 1`.
    fn linear_term(&self, x0: &Vector3<f64>, refs: &[Vector3<f64>]) -> DVector<f64> {
        let n = self.weights.len();
        let mut f = DVector::zeros(n);
        for (k, w) in self.weights.iter().enumerate() {
            let free = self.pred.phi.rows(3 * k, 3) * x0 - refs[k];
            let g = self.pred.gamma.rows(3 * k, 3);
            f += g.transpose() * free.component_mul(w);
        }
        f
    }

    fn bounds(
        &self,
        x0: &Vector3<f64>,
        prev: f64,
        config: &MpcConfig,
        axis: usize,
    ) -> (DVector<f64>, DVector<f64>) {
        let n = config.horizon;
        let m = 5 * n;
        let mut l = DVector::zeros(m);
        let mut u = DVector::zeros(m);
        let free = &self.pred.phi * x0;
        for k in 0..n {
            for c in 0..3 {
                let bound = config.x_max[3 * axis + c];
                l[3 * k + c] = -bound - free[3 * k + c];
                u[3 * k + c] = bound - free[3 * k + c];
            }
            l[3 * n + k] = -config.u_max[axis];
            u[3 * n + k] = config.u_max[axis];
            let slew = config.u_dot_max[axis] * config.dt;
            let anchor = if k == 0 { prev } else { 0.0 };
            l[4 * n + k] = anchor - slew;
            u[4 * n + k] = anchor + slew;
        }
        (l, u)
    }
}

/// Cost of an input sequence under `config`, for one full 9-state problem.
pub fn sequence_cost(
    state: &KinematicState,
    reference: &Vector3<f64>,
    inputs: &[Vector3<f64>],
    config: &MpcConfig,
) -> f64 {
    let fixed = vec![KinematicState::at_rest(*reference); inputs.len()];
    trajectory_cost(state, &fixed, inputs, config)
}

/// Cost of an input sequence against a per-step full-state reference.
pub fn trajectory_cost(
    state: &KinematicState,
    references: &[KinematicState],
    inputs: &[Vector3<f64>],
    config: &MpcConfig,
) -> f64 {
    let n = inputs.len();
    let mut s = *state;
    let mut cost = 0.0;
    for (k, u) in inputs.iter().enumerate() {
        s = propagate(&s, u, config.dt);
        let w = if k + 1 < n { &config.q } else { &config.s };
        let half = if k + 1 < n { 0.5 } else { 1.0 };
        for axis in 0..3 {
            for c in 0..3 {
                let e = s.0[3 * axis + c] - references[k].0[3 * axis + c];
                cost += half * w[3 * axis + c] * e * e;
            }
        }
    }
    cost
}

/// Stateful MPC with cached factorisations and warm starts across solves.
#[derive(Debug, Clone)]
pub struct MpcTracker {
    config: MpcConfig,
    axes: Vec<AxisQp>,
}

impl MpcTracker {
    pub fn new(config: MpcConfig) -> Result<Self> {
        let problems = config.check();
        if !problems.is_empty() {
            return Err(Error::InvalidTracker(problems.join("; ")));
        }
        let axes = (0..3).map(|axis| AxisQp::new(&config, axis)).collect();
        Ok(Self { config, axes })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    /// Tracks a fixed point (zero velocity and acceleration targets).
    pub fn solve(
        &mut self,
        state: &KinematicState,
        reference: &Vector3<f64>,
        prev_input: &Vector3<f64>,
    ) -> Result<MpcSolution> {
        let refs = vec![KinematicState::at_rest(*reference); self.config.horizon];
        self.solve_trajectory(state, &refs, prev_input)
    }

    /// Tracks a full-state reference given for each of the `horizon` steps.
    pub fn solve_trajectory(
        &mut self,
        state: &KinematicState,
        references: &[KinematicState],
        prev_input: &Vector3<f64>,
    ) -> Result<MpcSolution> {
        let n = self.config.horizon;
        if references.len() != n {
            return Err(Error::InvalidTracker(format!(
                "expected {n} reference states, got {}",
                references.len()
            )));
        }
        if !state.is_finite()
            || !references.iter().all(|r| r.is_finite())
            || !prev_input.iter().all(|v| v.is_finite())
        {
            return Err(Error::InvalidTracker(
                "non-finite state, reference or previous input".into(),
            ));
        }
        let mut inputs = vec![Vector3::zeros(); n];
        let mut residual: f64 = 0.0;
        let mut infeasible = false;
        let mut iterations = 0;
        let mut polished = true;
        for axis in 0..3 {
            let x0 = state.axis(axis);
            let qp = &mut self.axes[axis];
            let refs: Vec<Vector3<f64>> = references.iter().map(|r| r.axis(axis)).collect();
            let f = qp.linear_term(&x0, &refs);
            let (l, u) = qp.bounds(&x0, prev_input[axis], &self.config, axis);
            if let Some(prev) = &qp.last_inputs {
                // shift the previous plan by one step
                let mut shifted = DVector::zeros(n);
                for k in 0..n {
                    shifted[k] = prev[(k + 1).min(n - 1)];
                }
                let y = DVector::zeros(5 * n);
                qp.solver.warm_start(&shifted, &y);
            }
            let sol = qp.solver.solve(&f, &l, &u);
            iterations += sol.iterations;
            residual = residual.max(sol.residual());
            infeasible |= sol.status == QpStatus::Infeasible;
            polished &= matches!(
                sol.polish,
                PolishOutcome::ActiveSet | PolishOutcome::DualFallback
            );
            for k in 0..n {
                inputs[k][axis] = sol.x[k];
            }
            qp.last_inputs = Some(sol.x);
        }
        let mut states = Vec::with_capacity(n);
        let mut s = *state;
        for u in &inputs {
            s = propagate(&s, u, self.config.dt);
            states.push(s);
        }
        Ok(MpcSolution {
            cost: trajectory_cost(state, references, &inputs, &self.config),
            inputs,
            states,
            residual,
            infeasible,
            iterations,
            polished,
        })
    }
}

/// One cold-started solve.
pub fn solve(
    state: &KinematicState,
    reference: &Vector3<f64>,
    prev_input: &Vector3<f64>,
    config: &MpcConfig,
) -> Result<MpcSolution> {
    MpcTracker::new(config.clone())?.solve(state, reference, prev_input)
}

/// Largest violation of the state, input and slew bounds by a solution.
pub fn constraint_violation(
    solution: &MpcSolution,
    prev_input: &Vector3<f64>,
    config: &MpcConfig,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut prev = *prev_input;
    for (u, s) in solution.inputs.iter().zip(&solution.states) {
        for axis in 0..3 {
            worst = worst.max(u[axis].abs() - config.u_max[axis]);
            worst = worst.max((u[axis] - prev[axis]).abs() - config.u_dot_max[axis] * config.dt);
        }
        for i in 0..9 {
            worst = worst.max(s.0[i].abs() - config.x_max[i]);
        }
        prev = *u;
    }
    worst.max(0.0)
}
