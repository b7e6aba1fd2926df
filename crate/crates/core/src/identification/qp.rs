//! Dense primal active-set solver for strictly convex quadratic programs
//!
//! ```text
//! minimize ½ xᵀ H x + gᵀ x   subject to   A x ≥ b
//! ```
//!
//! started from a feasible point. Constraints only enter the working set
//! when they block a nonzero step, so the working set stays linearly
//! independent without explicit rank checks.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub(crate) struct QpSolution {
    pub x: DVector<f64>,
    /// Indices of constraints in the final working set.
    #[cfg_attr(not(test), allow(dead_code))]
    pub active: Vec<usize>,
    pub converged: bool,
}

pub(crate) fn solve(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x0: DVector<f64>,
) -> QpSolution {
    let n = h.nrows();
    let m = a.nrows();
    let mut x = x0;
    let mut working: Vec<usize> = Vec::new();
    let max_iter = 50 * (n + m) + 50;
    let row_norm: Vec<f64> = (0..m).map(|i| a.row(i).norm()).collect();

    for _ in 0..max_iter {
        let c = h * &x + g;
        let Some((p, mu)) = solve_eqp(h, &c, a, &working) else {
            break;
        };
        let p_norm = p.amax();
        if p_norm <= 1e-14 * (1.0 + x.amax()) {
            // Stationary on the working set: check multiplier signs.
            let worst = mu
                .iter()
                .enumerate()
                .min_by(|l, r| l.1.total_cmp(r.1))
                .map(|(k, &v)| (k, v));
            match worst {
                Some((k, v)) if v < -1e-12 * (1.0 + c.amax()) => {
                    working.remove(k);
                }
                _ => {
                    return QpSolution {
                        x,
                        active: working,
                        converged: true,
                    }
                }
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..m {
            if working.contains(&i) {
                continue;
            }
            let ap = a.row(i).dot(&p.transpose());
            if ap < -1e-13 * row_norm[i] * p_norm {
                let slack = a.row(i).dot(&x.transpose()) - b[i];
                let step = (slack / -ap).max(0.0);
                if step < alpha {
                    alpha = step;
                    blocking = Some(i);
                }
            }
        }
        x += &p * alpha;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    QpSolution {
        x,
        active: working,
        converged: false,
    }
}

/// Equality-constrained step: minimize ½ pᵀHp + cᵀp with A_W p = 0.
/// Returns the step and the working-set multipliers.
fn solve_eqp(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    working: &[usize],
) -> Option<(DVector<f64>, Vec<f64>)> {
    let n = h.nrows();
    let w = working.len();
    let mut kkt = DMatrix::<f64>::zeros(n + w, n + w);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    for (k, &i) in working.iter().enumerate() {
        for j in 0..n {
            kkt[(n + k, j)] = a[(i, j)];
            kkt[(j, n + k)] = -a[(i, j)];
        }
    }
    let mut rhs = DVector::<f64>::zeros(n + w);
    rhs.rows_mut(0, n).copy_from(&(-c));
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let p = sol.rows(0, n).into_owned();
    let mu = sol.rows(n, w).iter().copied().collect();
    Some((p, mu))
}
