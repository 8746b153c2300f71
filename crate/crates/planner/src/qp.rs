//! Dense ADMM solver for convex quadratic programs of the form
//! `min 0.5 x'Hx + g'x  s.t.  l <= Ax <= u`.
//!
//! Operator-splitting iteration with over-relaxation, adaptive penalty, and
//! a primal infeasibility certificate; sized for the planner's condensed
//! problems (tens of variables, hundreds of rows), where one dense Cholesky
//! refactorization per penalty change is cheap. A terminal active-set
//! polish solves the KKT system of the rows the duals mark active, which
//! recovers high accuracy even when the splitting iteration stops early.

use nalgebra::{Cholesky, DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpSettings {
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation in (1, 2).
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings { rho: 1.0, sigma: 1e-6, alpha: 1.6, eps_abs: 1e-6, eps_rel: 1e-6, max_iter: 400 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIter,
    PrimalInfeasible,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
}

/// Problem data; rows of `a` should be scaled to comparable magnitudes by
/// the caller (the planner normalizes each row to unit infinity norm).
#[derive(Clone, Debug)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
}

impl QpProblem {
    fn dims(&self) -> (usize, usize) {
        (self.h.nrows(), self.a.nrows())
    }
}

fn clamp_vec(v: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| v[i].clamp(l[i], u[i]))
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn factor(p: &QpProblem, rho: f64, sigma: f64) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let n = p.h.nrows();
    let mut k = p.h.clone();
    for i in 0..n {
        k[(i, i)] += sigma;
    }
    k += rho * p.a.transpose() * &p.a;
    Cholesky::new(k)
}

/// Worst constraint violation of `x` and stationarity of `(x, y)`.
fn kkt_residuals(p: &QpProblem, x: &DVector<f64>, y: &DVector<f64>) -> (f64, f64) {
    let ax = &p.a * x;
    let mut prim = 0.0f64;
    for i in 0..ax.len() {
        prim = prim.max(p.l[i] - ax[i]).max(ax[i] - p.u[i]);
    }
    let dual = inf_norm(&(&p.h * x + &p.g + p.a.transpose() * y));
    (prim, dual)
}

/// Re-solves the problem as an equality-constrained program over the rows
/// the iterate marks active (dual away from zero, or slack at a finite
/// bound), with light regularization and iterative refinement. The refined
/// point replaces the iterate only when it does at least as well on both
/// the constraint-violation and stationarity residuals, so a wrong
/// active-set guess degrades nothing.
fn polish(p: &QpProblem, sol: &mut QpSolution) {
    let (n, m) = p.dims();
    let y_tol = 1e-7 * (1.0 + inf_norm(&sol.y));
    let mut rows: Vec<usize> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    for i in 0..m {
        let z_lo = p.l[i].is_finite() && sol.z[i] - p.l[i] <= 1e-9 * (1.0 + p.l[i].abs());
        let z_hi = p.u[i].is_finite() && p.u[i] - sol.z[i] <= 1e-9 * (1.0 + p.u[i].abs());
        if p.l[i].is_finite() && (sol.y[i] < -y_tol || z_lo) {
            rows.push(i);
            b.push(p.l[i]);
        } else if p.u[i].is_finite() && (sol.y[i] > y_tol || z_hi) {
            rows.push(i);
            b.push(p.u[i]);
        }
    }
    let k = rows.len();
    let dim = n + k;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&p.h);
    for (j, &i) in rows.iter().enumerate() {
        for c in 0..n {
            kkt[(n + j, c)] = p.a[(i, c)];
            kkt[(c, n + j)] = p.a[(i, c)];
        }
    }
    let delta = 1e-9;
    let mut kkt_reg = kkt.clone();
    for d in 0..n {
        kkt_reg[(d, d)] += delta;
    }
    for d in n..dim {
        kkt_reg[(d, d)] -= delta;
    }
    let mut rhs = DVector::<f64>::zeros(dim);
    for r in 0..n {
        rhs[r] = -p.g[r];
    }
    for (j, &bv) in b.iter().enumerate() {
        rhs[n + j] = bv;
    }
    let lu = kkt_reg.lu();
    let Some(mut v) = lu.solve(&rhs) else { return };
    // Refine against the unregularized system.
    for _ in 0..2 {
        let r = &rhs - &kkt * &v;
        match lu.solve(&r) {
            Some(d) => v += d,
            None => break,
        }
    }
    let x_new = v.rows(0, n).clone_owned();
    let mut y_new = DVector::<f64>::zeros(m);
    for (j, &i) in rows.iter().enumerate() {
        y_new[i] = v[n + j];
    }
    let (old_p, old_d) = kkt_residuals(p, &sol.x, &sol.y);
    let (new_p, new_d) = kkt_residuals(p, &x_new, &y_new);
    if new_p <= old_p + 1e-12 && new_d <= old_d + 1e-12 {
        sol.z = &p.a * &x_new;
        sol.x = x_new;
        sol.y = y_new;
    }
}

pub fn solve_qp(
    p: &QpProblem,
    settings: &QpSettings,
    warm: Option<&QpSolution>,
) -> QpSolution {
    let (n, m) = p.dims();
    let mut rho = settings.rho;
    let mut chol = match factor(p, rho, settings.sigma) {
        Some(c) => c,
        None => {
            return QpSolution {
                x: DVector::zeros(n),
                z: DVector::zeros(m),
                y: DVector::zeros(m),
                status: QpStatus::MaxIter,
                iterations: 0,
            }
        }
    };
    let (mut x, mut z, mut y) = match warm {
        Some(w) if w.x.len() == n && w.z.len() == m => (w.x.clone(), w.z.clone(), w.y.clone()),
        _ => (DVector::zeros(n), DVector::zeros(m), DVector::zeros(m)),
    };
    let mut y_prev = y.clone();
    for it in 1..=settings.max_iter {
        let rhs = settings.sigma * &x - &p.g + p.a.transpose() * (rho * &z - &y);
        let x_tilde = chol.solve(&rhs);
        let ax = &p.a * &x_tilde;
        let z_hat = settings.alpha * &ax + (1.0 - settings.alpha) * &z;
        let z_new = clamp_vec(&(&z_hat + &y / rho), &p.l, &p.u);
        y_prev.copy_from(&y);
        y += rho * (&z_hat - &z_new);
        x = x_tilde;
        z = z_new;
        if it % 10 == 0 || it == settings.max_iter {
            let ax_now = &p.a * &x;
            let r_prim = inf_norm(&(&ax_now - &z));
            let hx = &p.h * &x;
            let aty = p.a.transpose() * &y;
            let r_dual = inf_norm(&(&hx + &p.g + &aty));
            let eps_prim = settings.eps_abs
                + settings.eps_rel * inf_norm(&ax_now).max(inf_norm(&z));
            let eps_dual = settings.eps_abs
                + settings.eps_rel * inf_norm(&hx).max(inf_norm(&p.g)).max(inf_norm(&aty));
            if r_prim <= eps_prim && r_dual <= eps_dual {
                let mut sol = QpSolution { x, z, y, status: QpStatus::Solved, iterations: it };
                polish(p, &mut sol);
                return sol;
            }
            // Primal infeasibility certificate from the dual update
            // direction.
            let dy = &y - &y_prev;
            let dy_norm = inf_norm(&dy);
            if dy_norm > 1e-12 {
                let at_dy = inf_norm(&(p.a.transpose() * &dy));
                let mut support = 0.0;
                for i in 0..m {
                    if dy[i] > 0.0 {
                        support += p.u[i] * dy[i];
                    } else {
                        support += p.l[i] * dy[i];
                    }
                }
                if at_dy <= 1e-8 * dy_norm && support < -1e-8 * dy_norm {
                    return QpSolution { x, z, y, status: QpStatus::PrimalInfeasible, iterations: it };
                }
            }
            // Rebalance the penalty when the residuals diverge.
            if it % 50 == 0 && it < settings.max_iter {
                let ratio = (r_prim + 1e-30) / (r_dual + 1e-30);
                let new_rho = if ratio > 10.0 {
                    rho * 5.0
                } else if ratio < 0.1 {
                    rho / 5.0
                } else {
                    rho
                };
                if new_rho != rho {
                    if let Some(c) = factor(p, new_rho, settings.sigma) {
                        rho = new_rho;
                        chol = c;
                    }
                }
            }
        }
    }
    let mut sol = QpSolution { x, z, y, status: QpStatus::MaxIter, iterations: settings.max_iter };
    polish(p, &mut sol);
    // The polished point may reach full accuracy even though the splitting
    // iteration ran out; report it as solved when it does.
    let (rp, rd) = kkt_residuals(p, &sol.x, &sol.y);
    let ax = &p.a * &sol.x;
    let hx = &p.h * &sol.x;
    let aty = p.a.transpose() * &sol.y;
    let eps_prim = settings.eps_abs + settings.eps_rel * inf_norm(&ax).max(inf_norm(&sol.z));
    let eps_dual =
        settings.eps_abs + settings.eps_rel * inf_norm(&hx).max(inf_norm(&p.g)).max(inf_norm(&aty));
    if rp <= eps_prim && rd <= eps_dual {
        sol.status = QpStatus::Solved;
    }
    sol
}
