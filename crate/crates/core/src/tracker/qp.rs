//! Dense convex QP `min ½xᵀPx + qᵀx  s.t.  l ≤ Ax ≤ u`.
//!
//! The main solver is an operator-splitting (ADMM) iteration on the
//! equilibrated problem with a cached factorisation. Its approximate active
//! set is then polished by a primal-dual active-set iteration, which returns
//! an exact KKT point. A dual active-set method serves as the exact fallback
//! when polishing cannot settle the active set.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpSettings {
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub scaling_iters: usize,
    /// Interval (iterations) between step-size updates; 0 disables them.
    pub adapt_interval: usize,
    pub polish: bool,
    /// Interval (iterations) between early polish attempts; 0 polishes only at the end.
    pub polish_interval: usize,
    /// Constraint violation accepted on polished solutions.
    pub feas_tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            max_iter: 500,
            scaling_iters: 10,
            adapt_interval: 25,
            polish: true,
            polish_interval: 10,
            feas_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QpStatus {
    Solved,
    /// Iteration cap hit; the returned point is the last iterate.
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PolishOutcome {
    /// ADMM iterate returned as is.
    Skipped,
    ActiveSet,
    DualFallback,
    Failed,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers, negative on lower-active rows, positive on upper-active rows.
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub polish: PolishOutcome,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl QpSolution {
    pub fn residual(&self) -> f64 {
        self.primal_residual.max(self.dual_residual)
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest bound violation of `Ax` against `[l, u]`.
pub fn violation(a: &DMatrix<f64>, x: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> f64 {
    let ax = a * x;
    (0..ax.len()).fold(0.0, |m, i| m.max(l[i] - ax[i]).max(ax[i] - u[i]))
}

/// Operator-splitting solver for a fixed `(P, A)` pair; `q`, `l`, `u` vary per solve.
#[derive(Debug, Clone)]
pub struct AdmmSolver {
    settings: QpSettings,
    p: DMatrix<f64>,
    a: DMatrix<f64>,
    ps: DMatrix<f64>,
    as_: DMatrix<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
    rho: f64,
    factor: Option<Cholesky<f64, Dyn>>,
    warm: Option<(DVector<f64>, DVector<f64>, DVector<f64>)>,
}

impl AdmmSolver {
    pub fn new(p: DMatrix<f64>, a: DMatrix<f64>, settings: QpSettings) -> Self {
        let n = p.nrows();
        let m = a.nrows();
        assert_eq!(p.ncols(), n);
        assert_eq!(a.ncols(), n);
        let mut d = DVector::from_element(n, 1.0);
        let mut e = DVector::from_element(m, 1.0);
        let mut ps = p.clone();
        let mut as_ = a.clone();
        for _ in 0..settings.scaling_iters {
            let mut dn = DVector::from_element(n, 0.0);
            let mut en = DVector::from_element(m, 0.0);
            for j in 0..n {
                let mut v: f64 = 0.0;
                for i in 0..n {
                    v = v.max(ps[(i, j)].abs());
                }
                for i in 0..m {
                    v = v.max(as_[(i, j)].abs());
                }
                dn[j] = if v < 1e-4 { 1.0 } else { 1.0 / v.sqrt() };
            }
            for i in 0..m {
                let v = (0..n).fold(0.0f64, |acc, j| acc.max(as_[(i, j)].abs()));
                en[i] = if v < 1e-4 { 1.0 } else { 1.0 / v.sqrt() };
            }
            for i in 0..n {
                for j in 0..n {
                    ps[(i, j)] *= dn[i] * dn[j];
                }
            }
            for i in 0..m {
                for j in 0..n {
                    as_[(i, j)] *= en[i] * dn[j];
                }
            }
            d.component_mul_assign(&dn);
            e.component_mul_assign(&en);
        }
        let mean_col = if n == 0 {
            1.0
        } else {
            (0..n)
                .map(|j| (0..n).fold(0.0f64, |acc, i| acc.max(ps[(i, j)].abs())))
                .sum::<f64>()
                / n as f64
        };
        let c = if mean_col < 1e-6 { 1.0 } else { 1.0 / mean_col };
        ps *= c;
        let rho = settings.rho;
        let mut s = Self {
            settings,
            p,
            a,
            ps,
            as_,
            d,
            e,
            c,
            rho,
            factor: None,
            warm: None,
        };
        s.refactor();
        s
    }

    pub fn settings(&self) -> &QpSettings {
        &self.settings
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    fn refactor(&mut self) {
        let n = self.ps.nrows();
        let k = &self.ps
            + DMatrix::identity(n, n) * self.settings.sigma
            + self.as_.transpose() * &self.as_ * self.rho;
        self.factor = Cholesky::new(k);
    }

    pub fn clear_warm_start(&mut self) {
        self.warm = None;
    }

    /// Seeds the next solve with an unscaled primal/dual guess.
    pub fn warm_start(&mut self, x: &DVector<f64>, y: &DVector<f64>) {
        let xs = x.component_div(&self.d);
        let zs = &self.as_ * &xs;
        let ys = y.component_div(&self.e) * self.c;
        self.warm = Some((xs, zs, ys));
    }

    pub fn solve(&mut self, q: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> QpSolution {
        let n = self.ps.nrows();
        let m = self.as_.nrows();
        let qs = q.component_mul(&self.d) * self.c;
        let ls = l.component_mul(&self.e);
        let us = u.component_mul(&self.e);
        let (mut x, mut z, mut y) = match self.warm.take() {
            Some(w) if w.0.len() == n && w.1.len() == m => w,
            _ => (DVector::zeros(n), DVector::zeros(m), DVector::zeros(m)),
        };
        for i in 0..m {
            z[i] = z[i].clamp(ls[i], us[i]);
        }
        let st = self.settings;
        let mut status = QpStatus::MaxIterations;
        let mut iterations = 0;
        let (mut prim, mut dual) = (f64::INFINITY, f64::INFINITY);
        for it in 1..=st.max_iter {
            iterations = it;
            let rhs = &x * st.sigma - &qs + self.as_.transpose() * (&z * self.rho - &y);
            let xt = match &self.factor {
                Some(f) => f.solve(&rhs),
                None => break,
            };
            let zt = &self.as_ * &xt;
            let x_new = &xt * st.alpha + &x * (1.0 - st.alpha);
            let z_relax = &zt * st.alpha + &z * (1.0 - st.alpha);
            let mut z_new = &z_relax + &y / self.rho;
            for i in 0..m {
                z_new[i] = z_new[i].clamp(ls[i], us[i]);
            }
            y += (&z_relax - &z_new) * self.rho;
            x = x_new;
            z = z_new;

            // residuals in the unscaled problem
            let ax = &self.as_ * &x;
            let px = &self.ps * &x;
            let aty = self.as_.transpose() * &y;
            let r_prim = (&ax - &z).component_div(&self.e);
            let r_dual = (&px + &qs + &aty).component_div(&self.d) / self.c;
            prim = inf_norm(&r_prim);
            dual = inf_norm(&r_dual);
            let ax_n = inf_norm(&ax.component_div(&self.e));
            let z_n = inf_norm(&z.component_div(&self.e));
            let px_n = inf_norm(&px.component_div(&self.d)) / self.c;
            let aty_n = inf_norm(&aty.component_div(&self.d)) / self.c;
            let q_n = inf_norm(q);
            let eps_p = st.eps_abs + st.eps_rel * ax_n.max(z_n);
            let eps_d = st.eps_abs + st.eps_rel * px_n.max(aty_n).max(q_n);
            if prim <= eps_p && dual <= eps_d {
                status = QpStatus::Solved;
                break;
            }
            if st.polish && st.polish_interval > 0 && it % st.polish_interval == 0 {
                let x_un = x.component_mul(&self.d);
                let y_un = y.component_mul(&self.e) / self.c;
                let guess = guess_active(&self.a, &x_un, &y_un, l, u);
                if let Some((xp, yp)) =
                    active_set_polish(&self.p, q, &self.a, l, u, guess, st.feas_tol)
                {
                    return self.accept(xp, yp, q, l, u, it, PolishOutcome::ActiveSet);
                }
            }
            if st.adapt_interval > 0 && it % st.adapt_interval == 0 {
                let pn = prim / ax_n.max(z_n).max(1e-12);
                let dn = dual / px_n.max(aty_n).max(q_n).max(1e-12);
                let ratio = (pn / dn.max(1e-30)).sqrt();
                let new_rho = (self.rho * ratio).clamp(1e-6, 1e6);
                if new_rho > 5.0 * self.rho || new_rho < self.rho / 5.0 {
                    self.rho = new_rho;
                    self.refactor();
                }
            }
        }
        self.warm = Some((x.clone(), z.clone(), y.clone()));
        let x_un = x.component_mul(&self.d);
        let y_un = y.component_mul(&self.e) / self.c;
        let mut sol = QpSolution {
            x: x_un,
            y: y_un,
            status,
            iterations,
            polish: PolishOutcome::Skipped,
            primal_residual: prim,
            dual_residual: dual,
        };
        if st.polish {
            self.polish_solution(&mut sol, q, l, u);
        }
        sol
    }

    fn accept(
        &mut self,
        x: DVector<f64>,
        y: DVector<f64>,
        q: &DVector<f64>,
        l: &DVector<f64>,
        u: &DVector<f64>,
        iterations: usize,
        how: PolishOutcome,
    ) -> QpSolution {
        let xs = x.component_div(&self.d);
        let zs = &self.as_ * &xs;
        let ys = y.component_div(&self.e) * self.c;
        self.warm = Some((xs, zs, ys));
        QpSolution {
            primal_residual: violation(&self.a, &x, l, u).max(0.0),
            dual_residual: inf_norm(&(&self.p * &x + q + self.a.transpose() * &y)),
            x,
            y,
            status: QpStatus::Solved,
            iterations,
            polish: how,
        }
    }

    fn polish_solution(
        &mut self,
        sol: &mut QpSolution,
        q: &DVector<f64>,
        l: &DVector<f64>,
        u: &DVector<f64>,
    ) {
        let tol = self.settings.feas_tol;
        let guess = guess_active(&self.a, &sol.x, &sol.y, l, u);
        let outcome = match active_set_polish(&self.p, q, &self.a, l, u, guess, tol) {
            Some((x, y)) => Some((x, y, PolishOutcome::ActiveSet)),
            None => dual_active_set(&self.p, q, &self.a, l, u)
                .ok()
                .map(|(x, y)| {
                    // settle the dual method's working set exactly
                    let guess = guess_active(&self.a, &x, &y, l, u);
                    match active_set_polish(&self.p, q, &self.a, l, u, guess, tol) {
                        Some((xp, yp)) => (xp, yp, PolishOutcome::DualFallback),
                        None => (x, y, PolishOutcome::DualFallback),
                    }
                }),
        };
        match outcome {
            Some((x, y, how)) => {
                *sol = self.accept(x, y, q, l, u, sol.iterations, how);
            }
            None => {
                sol.polish = PolishOutcome::Failed;
                if violation(&self.a, &sol.x, l, u) > 1e-4 {
                    sol.status = QpStatus::Infeasible;
                }
            }
        }
    }
}

/// Working-set guess from an approximate primal/dual pair.
fn guess_active(
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
) -> Vec<i8> {
    let ax = a * x;
    (0..ax.len())
        .map(|i| {
            if ax[i] - l[i] < -y[i] {
                -1
            } else if u[i] - ax[i] < y[i] {
                1
            } else {
                0
            }
        })
        .collect()
}

/// Solves the equality-constrained KKT system for a working set.
fn kkt_solve(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    rows: &[(usize, f64)],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = p.nrows();
    let k = rows.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(p);
    let reg = 1e-12 * (1.0 + p.amax());
    for i in 0..n {
        kkt[(i, i)] += reg;
    }
    let mut rhs = DVector::zeros(n + k);
    for i in 0..n {
        rhs[i] = -q[i];
    }
    for (r, &(row, b)) in rows.iter().enumerate() {
        for j in 0..n {
            kkt[(n + r, j)] = a[(row, j)];
            kkt[(j, n + r)] = a[(row, j)];
        }
        rhs[n + r] = b;
    }
    let lu = kkt.clone().lu();
    let mut sol = lu.solve(&rhs)?;
    // one step of iterative refinement
    let res = &rhs - &kkt * &sol;
    if let Some(c) = lu.solve(&res) {
        sol += c;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, k).into_owned()))
}

/// Primal-dual active-set iteration from an initial working set.
/// `active[i]` is -1 (lower bound), +1 (upper bound) or 0.
fn active_set_polish(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    mut active: Vec<i8>,
    tol: f64,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let m = a.nrows();
    let n = p.nrows();
    let mut seen: Vec<Vec<i8>> = Vec::new();
    for _ in 0..(4 * m + 10) {
        if seen.contains(&active) {
            return None;
        }
        seen.push(active.clone());
        let rows: Vec<(usize, f64)> = (0..m)
            .filter(|&i| active[i] != 0)
            .map(|i| (i, if active[i] < 0 { l[i] } else { u[i] }))
            .collect();
        if rows.len() > n {
            // drop the extra rows with the weakest claim
            return None;
        }
        let (x, lam) = kkt_solve(p, q, a, &rows)?;
        let ax = a * &x;
        let mut y = DVector::zeros(m);
        for (r, &(row, _)) in rows.iter().enumerate() {
            y[row] = lam[r];
        }
        let mut next = active.clone();
        let mut ok = true;
        for i in 0..m {
            match active[i] {
                -1 if y[i] > tol => {
                    next[i] = 0;
                    ok = false;
                }
                1 if y[i] < -tol => {
                    next[i] = 0;
                    ok = false;
                }
                0 if ax[i] < l[i] - tol => {
                    next[i] = -1;
                    ok = false;
                }
                0 if ax[i] > u[i] + tol => {
                    next[i] = 1;
                    ok = false;
                }
                _ => {}
            }
        }
        if ok {
            for i in 0..m {
                match active[i] {
                    -1 => y[i] = y[i].min(0.0),
                    1 => y[i] = y[i].max(0.0),
                    _ => {}
                }
            }
            return Some((x, y));
        }
        active = next;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualActiveSetError {
    Infeasible,
    NotConvex,
    IterationLimit,
}

/// Exact dual active-set solve (Goldfarb-Idnani). Requires `P` positive
/// definite; a tiny ridge is added for semidefinite inputs.
pub fn dual_active_set(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), DualActiveSetError> {
    let n = p.nrows();
    let m = a.nrows();
    let mut g = p.clone();
    let ridge = 1e-12 * (1.0 + p.amax());
    for i in 0..n {
        g[(i, i)] += ridge;
    }
    let chol = Cholesky::new(g).ok_or(DualActiveSetError::NotConvex)?;
    let ginv = chol.inverse();

    // one-sided constraints nᵀx ≥ b; index 2i is the lower side, 2i+1 the upper side
    let normal = |k: usize| -> DVector<f64> {
        let row = a.row(k / 2).transpose();
        if k.is_multiple_of(2) {
            row
        } else {
            -row
        }
    };
    let bound = |k: usize| {
        if k.is_multiple_of(2) {
            l[k / 2]
        } else {
            -u[k / 2]
        }
    };
    let slack = |k: usize, x: &DVector<f64>| normal(k).dot(x) - bound(k);
    let scale = 1.0 + a.amax() * 1.0;
    let tol = 1e-12 * scale;

    let mut x = -(&ginv * q);
    let mut act: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();

    for _ in 0..(10 * (m + n) + 50) {
        // most violated constraint
        let mut pick = None;
        let mut worst = -tol;
        for k in 0..2 * m {
            if act.contains(&k) {
                continue;
            }
            if bound(k).is_infinite() {
                continue;
            }
            let s = slack(k, &x);
            let rel = s / (1.0 + bound(k).abs());
            if rel < worst {
                worst = rel;
                pick = Some(k);
            }
        }
        let Some(pk) = pick else {
            let mut y = DVector::zeros(m);
            for (c, &k) in act.iter().enumerate() {
                if k % 2 == 0 {
                    y[k / 2] -= mult[c];
                } else {
                    y[k / 2] += mult[c];
                }
            }
            return Ok((x, y));
        };
        let np = normal(pk);
        let mut up = 0.0;
        loop {
            // step directions for the current working set
            let (z, r) = if act.is_empty() {
                (&ginv * &np, DVector::zeros(0))
            } else {
                let nmat =
                    DMatrix::from_columns(&act.iter().map(|&k| normal(k)).collect::<Vec<_>>());
                let gn = &ginv * &nmat;
                let m_small = nmat.transpose() * &gn;
                let inv = m_small
                    .clone()
                    .try_inverse()
                    .ok_or(DualActiveSetError::NotConvex)?;
                let nstar = &inv * gn.transpose();
                let r = &nstar * &np;
                let z = &ginv * &np - &gn * &r;
                (z, r)
            };
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (c, &rc) in r.iter().enumerate() {
                if rc > 1e-14 {
                    let t = mult[c] / rc;
                    if t < t1 {
                        t1 = t;
                        drop = Some(c);
                    }
                }
            }
            let zn = z.dot(&np);
            let t2 = if z.amax() > 1e-14 * (1.0 + np.amax()) && zn > 0.0 {
                -slack(pk, &x) / zn
            } else {
                f64::INFINITY
            };
            if t1.is_infinite() && t2.is_infinite() {
                return Err(DualActiveSetError::Infeasible);
            }
            if t2.is_infinite() {
                for (c, v) in mult.iter_mut().enumerate() {
                    *v -= t1 * r[c];
                }
                up += t1;
                let d = drop.expect("finite partial step has a blocking constraint");
                act.remove(d);
                mult.remove(d);
                continue;
            }
            let t = t1.min(t2);
            x += &z * t;
            for (c, v) in mult.iter_mut().enumerate() {
                *v -= t * r[c];
            }
            up += t;
            if t2 <= t1 {
                act.push(pk);
                mult.push(up);
                break;
            }
            let d = drop.expect("partial step has a blocking constraint");
            act.remove(d);
            mult.remove(d);
        }
    }
    Err(DualActiveSetError::IterationLimit)
}
