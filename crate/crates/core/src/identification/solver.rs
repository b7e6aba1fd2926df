//! Levenberg-Marquardt iteration with linear inequality constraints.
//!
//! Each step minimizes the damped Gauss-Newton model subject to the linear
//! constraints through the active-set QP, so every iterate stays feasible.

use nalgebra::{DMatrix, DVector};

use super::problem::Problem;
use super::qp;
use super::SolverOptions;
use crate::error::Result;

#[derive(Clone, Debug)]
pub(crate) struct RunOutcome {
    pub z: DVector<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    pub hit_max_iter: bool,
    pub optimality: f64,
    pub history: Vec<f64>,
}

pub(crate) fn levenberg_marquardt(
    prob: &Problem<'_>,
    z0: DVector<f64>,
    opts: &SolverOptions,
) -> Result<RunOutcome> {
    let n = prob.n();
    let mut z = z0;
    let (mut f, mut r, mut jac) = prob.eval_jac(&z)?;
    let mut history = vec![f];
    if n == 0 {
        return Ok(RunOutcome {
            z,
            f,
            iterations: 0,
            converged: true,
            hit_max_iter: false,
            optimality: 0.0,
            history,
        });
    }

    let mut lambda = opts.initial_damping;
    let mut nu = 2.0;
    let mut diag = DVector::<f64>::zeros(n);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let jtj = jac.tr_mul(&jac);
        let g = jac.tr_mul(&r);
        let dmax = jtj.diagonal().amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            diag[i] = diag[i].max(jtj[(i, i)]).max(1e-12 * dmax);
        }
        let mut h = jtj.clone();
        for i in 0..n {
            h[(i, i)] += lambda * diag[i];
        }
        let rhs = step_bounds(prob, &z);
        let sol = qp::solve(&h, &g, &prob.a, &rhs, DVector::zeros(n));
        if !sol.converged {
            log::debug!("step subproblem hit its iteration limit at iteration {iterations}");
        }
        let d = sol.x;

        if d.amax() <= opts.xtol * (opts.xtol + z.amax()) {
            converged = true;
            break;
        }
        let predicted = -(2.0 * g.dot(&d) + d.dot(&(&jtj * &d)));
        let trial = &z + &d;
        let outcome = if predicted > 0.0 && prob.is_feasible(&trial) {
            prob.eval(&trial).ok()
        } else {
            None
        };
        let rho = outcome
            .as_ref()
            .map_or(f64::NEG_INFINITY, |(f_new, _)| (f - f_new) / predicted);

        if rho > 1e-4 {
            let (f_new, _) = outcome.expect("accepted step was evaluated");
            let reduction = f - f_new;
            z = trial;
            (f, r, jac) = prob.eval_jac(&z)?;
            debug_assert!((f - f_new).abs() <= 1e-12 * f.max(1e-300));
            history.push(f);
            lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            nu = 2.0;
            if f <= opts.fatol || reduction <= opts.ftol * f {
                converged = true;
                break;
            }
        } else {
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e20 {
                // No descent possible from here at working precision.
                converged = true;
                break;
            }
        }
    }

    let optimality = projected_gradient(prob, &z, &jac.tr_mul(&r));
    Ok(RunOutcome {
        z,
        f,
        iterations,
        converged,
        hit_max_iter: !converged && iterations >= opts.max_iter,
        optimality,
        history,
    })
}

/// Right-hand side of the step constraints `a d ≥ b − a z`; clipped at zero
/// so that `d = 0` is always feasible.
fn step_bounds(prob: &Problem<'_>, z: &DVector<f64>) -> DVector<f64> {
    (-prob.slack(z)).map(|v| v.min(0.0))
}

/// Infinity norm of the projected steepest-descent step of the objective.
fn projected_gradient(prob: &Problem<'_>, z: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let n = prob.n();
    if n == 0 {
        return 0.0;
    }
    let grad = g * 2.0;
    let rhs = step_bounds(prob, z);
    let sol = qp::solve(&DMatrix::identity(n, n), &grad, &prob.a, &rhs, DVector::zeros(n));
    sol.x.amax()
}
