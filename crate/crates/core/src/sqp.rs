//! Sequential quadratic programming for small dense problems with inequality
//! constraints `c(x) ≥ 0` and box bounds, in the spirit of SLSQP:
//! finite-difference derivatives, a damped BFGS model of the Lagrangian
//! Hessian, an elastic QP subproblem and an L1 merit line search.
//!
//! Evaluations may return NaN where a function is undefined; the line search
//! treats such points as infinitely bad.

use nalgebra::{DMatrix, DVector};

use crate::qp;

pub trait Problem {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Objective to minimize.
    fn objective(&self, x: &[f64]) -> f64;
    /// Writes `c_i(x)`; the feasible set is `c(x) ≥ 0`.
    fn constraints(&self, x: &[f64], out: &mut [f64]);
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub max_iter: usize,
    /// Relative change in objective or step length that ends the iteration.
    pub tol: f64,
    /// Largest constraint violation accepted as feasible.
    pub feas_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options { max_iter: 500, tol: 1e-9, feas_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub converged: bool,
    pub iterations: usize,
    pub hit_iteration_cap: bool,
}

impl Outcome {
    pub fn is_feasible(&self, feas_tol: f64) -> bool {
        self.max_violation <= feas_tol && self.objective.is_finite()
    }
}

struct Eval {
    f: f64,
    c: Vec<f64>,
}

impl Eval {
    fn violation(&self) -> f64 {
        self.c
            .iter()
            .map(|&ci| if ci.is_nan() { f64::INFINITY } else { (-ci).max(0.0) })
            .fold(0.0, f64::max)
    }

    fn total_violation(&self) -> f64 {
        self.c
            .iter()
            .map(|&ci| if ci.is_nan() { f64::INFINITY } else { (-ci).max(0.0) })
            .sum()
    }

    fn merit(&self, rho: f64) -> f64 {
        let m = self.f + rho * self.total_violation();
        if m.is_nan() {
            f64::INFINITY
        } else {
            m
        }
    }
}

fn evaluate<P: Problem + ?Sized>(p: &P, x: &[f64]) -> Eval {
    let mut c = vec![0.0; p.num_constraints()];
    p.constraints(x, &mut c);
    Eval { f: p.objective(x), c }
}

/// Gradient of the objective and Jacobian of the constraints by central
/// differences, falling back to one-sided differences at the bounds or where
/// one side is undefined.
fn derivatives<P: Problem + ?Sized>(p: &P, x: &[f64], at: &Eval) -> (DVector<f64>, DMatrix<f64>) {
    let n = p.dim();
    let m = p.num_constraints();
    let (lo, hi) = (p.lower(), p.upper());
    let mut grad = DVector::zeros(n);
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = 1e-6 * x[j].abs().max(1.0);
        let can_up = x[j] + h <= hi[j];
        let can_down = x[j] - h >= lo[j];
        let side = |probe: &mut Vec<f64>, v: f64| {
            probe[j] = v;
            let e = evaluate(p, probe);
            probe[j] = x[j];
            e
        };
        let up = can_up.then(|| side(&mut probe, x[j] + h));
        let down = can_down.then(|| side(&mut probe, x[j] - h));
        let diff = |fu: Option<f64>, fd: Option<f64>, f0: f64| -> f64 {
            let fu = fu.filter(|v| v.is_finite());
            let fd = fd.filter(|v| v.is_finite());
            match (fu, fd) {
                (Some(u), Some(d)) => (u - d) / (2.0 * h),
                (Some(u), None) if f0.is_finite() => (u - f0) / h,
                (None, Some(d)) if f0.is_finite() => (f0 - d) / h,
                _ => 0.0,
            }
        };
        grad[j] = diff(up.as_ref().map(|e| e.f), down.as_ref().map(|e| e.f), at.f);
        for i in 0..m {
            jac[(i, j)] = diff(up.as_ref().map(|e| e.c[i]), down.as_ref().map(|e| e.c[i]), at.c[i]);
        }
    }
    (grad, jac)
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

/// Elastic subproblem over `(d, ξ)`:
/// min ½dᵀBd + gᵀd + ρ_ξ ξ + ½ξ²
/// s.t. c_i + J_i d ≥ c_i ξ for violated rows, c_i + J_i d ≥ 0 otherwise,
///      bounds on x + d, 0 ≤ ξ ≤ 1.
/// `(d, ξ) = (0, 1)` is always feasible.
fn subproblem(
    b: &DMatrix<f64>,
    grad: &DVector<f64>,
    jac: &DMatrix<f64>,
    c: &[f64],
    x: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> (DVector<f64>, f64, DVector<f64>) {
    let n = x.len();
    let m = c.len();
    let nz = n + 1;
    let mut g = DMatrix::zeros(nz, nz);
    g.view_mut((0, 0), (n, n)).copy_from(b);
    g[(n, n)] = 1.0;
    let mut lin = DVector::zeros(nz);
    lin.rows_mut(0, n).copy_from(grad);
    lin[n] = 1e4 * (1.0 + grad.amax());

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m + 2 * n + 2);
    for i in 0..m {
        let ci = if c[i].is_finite() { c[i] } else { -1e6 };
        let mut row: Vec<f64> = jac.row(i).iter().copied().collect();
        row.push(if ci < 0.0 { -ci } else { 0.0 });
        rows.push((row, -ci));
    }
    for j in 0..n {
        if lo[j].is_finite() {
            let mut row = vec![0.0; nz];
            row[j] = 1.0;
            rows.push((row, lo[j] - x[j]));
        }
        if hi[j].is_finite() {
            let mut row = vec![0.0; nz];
            row[j] = -1.0;
            rows.push((row, x[j] - hi[j]));
        }
    }
    let mut row = vec![0.0; nz];
    row[n] = 1.0;
    rows.push((row.clone(), 0.0));
    row[n] = -1.0;
    rows.push((row, -1.0));

    let a = DMatrix::from_fn(rows.len(), nz, |i, j| rows[i].0[j]);
    let bvec = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let mut z0 = DVector::zeros(nz);
    z0[n] = 1.0;
    let sol = qp::solve(&g, &lin, &a, &bvec, z0, 20 * (nz + rows.len()) + 100);
    let d = sol.z.rows(0, n).into_owned();
    let xi = sol.z[n].clamp(0.0, 1.0);
    let lambda = sol.multipliers.rows(0, m).into_owned();
    (d, xi, lambda)
}

fn lagrangian_gradient(grad: &DVector<f64>, jac: &DMatrix<f64>, lambda: &DVector<f64>) -> DVector<f64> {
    grad - jac.transpose() * lambda
}

/// Minimizes `p` from `x0` (projected onto the bounds).
pub fn minimize<P: Problem + ?Sized>(p: &P, x0: &[f64], opts: &Options) -> Outcome {
    let n = p.dim();
    let (lo, hi) = (p.lower(), p.upper());
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut cur = evaluate(p, &x);

    if n == 0 {
        return Outcome {
            objective: cur.f,
            max_violation: cur.violation(),
            x,
            converged: true,
            iterations: 0,
            hit_iteration_cap: false,
        };
    }

    let mut b = DMatrix::<f64>::identity(n, n);
    let mut rho: f64 = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let (mut grad, mut jac) = derivatives(p, &x, &cur);

    while iterations < opts.max_iter {
        iterations += 1;
        let (d, xi, lambda) = subproblem(&b, &grad, &jac, &cur.c, &x, lo, hi);
        rho = rho.max(2.0 * lambda.amax() + 1e-3);

        let x_scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        // a vanishing step is a stationary point; when infeasible it is a
        // local minimizer of the violation and the caller sees max_violation
        if d.amax() <= opts.tol * x_scale {
            converged = true;
            break;
        }

        let viol = cur.total_violation();
        let slope = grad.dot(&d) - rho * (1.0 - xi) * viol;
        let m0 = cur.merit(rho);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(d.iter()).map(|(xi, di)| xi + alpha * di).collect();
            project(&mut trial, lo, hi);
            let e = evaluate(p, &trial);
            let mt = e.merit(rho);
            if mt.is_finite() && mt <= m0 + 1e-4 * alpha * slope.min(0.0) {
                accepted = Some((trial, e));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, next)) = accepted else {
            converged = cur.violation() <= opts.feas_tol && d.amax() <= 1e-6 * x_scale;
            break;
        };

        let (grad_new, jac_new) = derivatives(p, &x_new, &next);
        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let mut y = lagrangian_gradient(&grad_new, &jac_new, &lambda) - lagrangian_gradient(&grad, &jac, &lambda);
        let bs = &b * &s;
        let sbs = s.dot(&bs);
        if sbs > 1e-300 {
            let sy = s.dot(&y);
            if sy < 0.2 * sbs {
                let theta = 0.8 * sbs / (sbs - sy);
                y = theta * &y + (1.0 - theta) * &bs;
            }
            let sy = s.dot(&y);
            if sy > 1e-300 {
                b += &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
            }
        }

        let df = (next.f - cur.f).abs();
        let step = s.amax();
        x = x_new;
        let f_scale = 1.0 + next.f.abs();
        cur = next;
        grad = grad_new;
        jac = jac_new;
        if cur.violation() <= opts.feas_tol && (df <= opts.tol * f_scale && step <= opts.tol.sqrt() * x_scale) {
            converged = true;
            break;
        }
    }

    Outcome {
        objective: cur.f,
        max_violation: cur.violation(),
        x,
        converged,
        iterations,
        hit_iteration_cap: !converged && iterations >= opts.max_iter,
    }
}
