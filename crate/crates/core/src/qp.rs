//! Dense strictly convex quadratic programs with linear inequality constraints,
//! solved by a primal active-set method started from a known feasible point.
//!
//! minimize ½ zᵀ G z + cᵀ z  subject to  A z ≥ b

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// One multiplier per constraint row, zero for rows not in the final working set.
    pub multipliers: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const STEP_TOL: f64 = 1e-12;
const MULTIPLIER_TOL: f64 = 1e-12;

/// `z0` must satisfy `A z0 ≥ b` (up to rounding). `G` must be positive definite.
pub fn solve(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    z0: DVector<f64>,
    max_iter: usize,
) -> QpSolution {
    let n = g.nrows();
    let m = a.nrows();
    let mut z = z0;
    let mut working: Vec<usize> = Vec::new();
    let mut multipliers = DVector::zeros(m);
    // after a zero-length step, pick by lowest index (Bland) so degenerate
    // vertices cannot cycle
    let mut bland = false;
    // set after an unblocked full step: z already minimizes on the working set
    let mut at_minimum = false;

    for iter in 0..max_iter {
        let k = working.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(g);
        for (r, &i) in working.iter().enumerate() {
            for j in 0..n {
                kkt[(j, n + r)] = -a[(i, j)];
                kkt[(n + r, j)] = a[(i, j)];
            }
        }
        let mut rhs = DVector::zeros(n + k);
        let grad = g * &z + c;
        rhs.rows_mut(0, n).copy_from(&(-grad));
        let Some(sol) = kkt.lu().solve(&rhs) else {
            break;
        };
        let p = sol.rows(0, n).into_owned();
        let scale = 1.0 + z.amax();

        if at_minimum || p.amax() <= STEP_TOL * scale {
            at_minimum = false;
            multipliers.fill(0.0);
            let mut leaving: Option<(usize, f64)> = None;
            for (r, &i) in working.iter().enumerate() {
                let lambda = sol[n + r];
                multipliers[i] = lambda;
                if lambda >= -MULTIPLIER_TOL {
                    continue;
                }
                let better = match leaving {
                    None => true,
                    Some((q, l)) => if bland { i < working[q] } else { lambda < l },
                };
                if better {
                    leaving = Some((r, lambda));
                }
            }
            match leaving {
                None => {
                    return QpSolution { z, multipliers, iterations: iter + 1, converged: true };
                }
                Some((r, _)) => {
                    working.remove(r);
                    continue;
                }
            }
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..m {
            if working.contains(&i) {
                continue;
            }
            let ap = a.row(i).dot(&p.transpose());
            if ap < -1e-14 {
                let slack = (a.row(i).dot(&z.transpose()) - b[i]).max(0.0);
                let step = slack / -ap;
                // ties go to the first index, which is the lowest
                if step < alpha {
                    alpha = step;
                    blocking = Some(i);
                }
            }
        }
        bland = blocking.is_some() && alpha <= STEP_TOL;
        at_minimum = blocking.is_none();
        z += alpha * &p;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    QpSolution { z, multipliers, iterations: max_iter, converged: false }
}
