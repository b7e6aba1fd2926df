//! Constrained output-error identification of the model parameters.
//!
//! The estimate minimizes the normalized squared output error
//!
//! ```text
//! Σ_k (P_k − P̂_k(θ))² / P₀² + (Q_k − Q̂_k(θ))² / Q₀²
//! ```
//!
//! over the identification window, where `P̂, Q̂` are obtained by replaying
//! the model from its steady state at the first sample. Parameters are
//! confined to percentage confidence boxes around their initial values and
//! to the machine's modeling and operational constraints.

pub mod constraints;
mod problem;
mod qp;
mod solver;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use constraints::{
    alpha_inverse, alpha_transform, constraints, operational_linear_forms, ConstraintConfig,
    ConstraintKind, Residual, EPS_STRICT,
};

use crate::dataset::Dataset;
use crate::error::{EdmError, Result};
use crate::model::{ParamId, Theta, N_PARAMS};
use crate::simulator::{self, SimOptions};
use problem::Problem;

/// Initial parameter values and their percentage confidence intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitSpec {
    pub theta0: Theta,
    /// Per-parameter tolerance in percent; zero freezes the parameter.
    pub tol_pct: [f64; N_PARAMS],
}

impl InitSpec {
    pub fn uniform(theta0: Theta, tol_pct: f64) -> InitSpec {
        InitSpec {
            theta0,
            tol_pct: [tol_pct; N_PARAMS],
        }
    }

    pub fn with(mut self, id: ParamId, value: f64, tol_pct: f64) -> InitSpec {
        self.theta0.set(id, value);
        self.tol_pct[id.index()] = tol_pct;
        self
    }

    pub fn with_tol(mut self, id: ParamId, tol_pct: f64) -> InitSpec {
        self.tol_pct[id.index()] = tol_pct;
        self
    }

    pub fn tol(&self, id: ParamId) -> f64 {
        self.tol_pct[id.index()]
    }

    /// Generator out of service: nominal power frozen at zero, so only the
    /// static parameters are estimated.
    pub fn chp_out_of_service(theta0: Theta, tol_pct: f64) -> InitSpec {
        InitSpec::uniform(theta0, tol_pct).with(ParamId::Sn, 0.0, 0.0)
    }

    /// Generator in service: nominal power and mechanical torque are known
    /// exactly, the inertia constant is known to ±40 % around 0.35 s.
    pub fn chp_in_service(theta0: Theta, s_n: f64, t_ms: f64, tol_pct: f64) -> InitSpec {
        InitSpec::uniform(theta0, tol_pct)
            .with(ParamId::Sn, s_n, 0.0)
            .with(ParamId::Tms, t_ms, 0.0)
            .with(ParamId::Hs, 0.35, 40.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.theta0.validate()?;
        for id in ParamId::ALL {
            let t = self.tol(id);
            if !(t >= 0.0) || !t.is_finite() {
                return Err(EdmError::InfeasibleInit(format!(
                    "tolerance of {id} must be a finite non-negative percentage, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn is_frozen(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Per-parameter boxes `θ⁰(1 ∓ tol/100)`, intersected with the single
/// parameter modeling bounds of the machine.
///
/// When the machine's nominal power is frozen at zero its parameters are
/// irrelevant and are returned as frozen at their initial values.
pub fn box_bounds(init: &InitSpec, cfg: &ConstraintConfig) -> Result<[Bounds; N_PARAMS]> {
    init.validate()?;
    let machine = init.theta0.sm.s_n > 0.0;
    let mut out = [Bounds { lo: 0.0, hi: 0.0 }; N_PARAMS];
    for id in ParamId::ALL {
        let x0 = init.theta0.get(id);
        let tol = init.tol(id) / 100.0;
        let (a, b) = (x0 * (1.0 - tol), x0 * (1.0 + tol));
        let (mut lo, mut hi) = (a.min(b), a.max(b));
        if id.is_sm() && !machine {
            out[id.index()] = Bounds { lo: x0, hi: x0 };
            continue;
        }
        let (mlo, mhi) = modeling_bounds(id, cfg);
        if tol > 0.0 {
            lo = lo.max(mlo);
            hi = hi.min(mhi);
        }
        if !(lo <= hi) || x0 < mlo || x0 > mhi {
            return Err(EdmError::InfeasibleInit(format!(
                "{id}: confidence interval around {x0} does not meet [{mlo}, {mhi}]"
            )));
        }
        out[id.index()] = Bounds { lo, hi };
    }
    Ok(out)
}

fn modeling_bounds(id: ParamId, cfg: &ConstraintConfig) -> (f64, f64) {
    match id {
        ParamId::TDsPrime => (EPS_STRICT, cfg.t_ds_max),
        ParamId::Xs | ParamId::XsPrime | ParamId::D => (EPS_STRICT, f64::INFINITY),
        ParamId::Hs => (EPS_STRICT, cfg.h_s_max),
        ParamId::Sn => (0.0, f64::INFINITY),
        ParamId::Tms => (0.0, 1.0),
        _ => (f64::NEG_INFINITY, f64::INFINITY),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveOptions {
    pub sim: SimOptions,
    /// Floor of the active-power normalization [W].
    pub eps_p: f64,
    /// Floor of the reactive-power normalization [var].
    pub eps_q: f64,
}

impl Default for ObjectiveOptions {
    fn default() -> Self {
        ObjectiveOptions {
            sim: SimOptions::default(),
            eps_p: 100.0,
            eps_q: 100.0,
        }
    }
}

/// Output scales `P₀`, `Q₀` of the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub p0: f64,
    pub q0: f64,
}

/// `P₀ = max(mean |P_k|, ε_P)` and likewise for `Q₀`.
pub fn normalization(ds: &Dataset, opts: &ObjectiveOptions) -> Normalization {
    let mean_abs = |x: &[f64]| {
        if x.is_empty() {
            0.0
        } else {
            x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64
        }
    };
    Normalization {
        p0: mean_abs(&ds.p).max(opts.eps_p),
        q0: mean_abs(&ds.q).max(opts.eps_q),
    }
}

/// Value returned for parameter sets that cannot be simulated.
pub const DIVERGENCE_PENALTY: f64 = 1e30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    /// Set when the simulation failed and `value` is the penalty.
    pub diverged: bool,
}

/// Normalized squared output error of `theta` on `ds`.
pub fn objective(theta: &Theta, ds: &Dataset, opts: &ObjectiveOptions) -> Result<ObjectiveValue> {
    if ds.is_empty() {
        return Err(EdmError::TooShort { need: 1, got: 0 });
    }
    theta.validate()?;
    let norm = normalization(ds, opts);
    match simulator::simulate_from_steady_state(theta, &ds.trace, &opts.sim) {
        Ok(sim) => {
            let value = (0..ds.len())
                .map(|k| {
                    let ep = (ds.p[k] - sim.p_hat[k]) / norm.p0;
                    let eq = (ds.q[k] - sim.q_hat[k]) / norm.q0;
                    ep * ep + eq * eq
                })
                .sum();
            Ok(ObjectiveValue {
                value,
                diverged: false,
            })
        }
        Err(EdmError::Diverged { .. } | EdmError::InfeasibleSteadyState { .. }) => {
            Ok(ObjectiveValue {
                value: DIVERGENCE_PENALTY,
                diverged: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// Objective and its exact gradient with respect to the sixteen
/// identifiable parameters (in [`ParamId`] order).
pub fn objective_gradient(
    theta: &Theta,
    ds: &Dataset,
    opts: &ObjectiveOptions,
) -> Result<(f64, [f64; N_PARAMS])> {
    if ds.is_empty() {
        return Err(EdmError::TooShort { need: 1, got: 0 });
    }
    let norm = normalization(ds, opts);
    let (sim, sens) = simulator::simulate_with_sensitivities(theta, &ds.trace, &opts.sim)?;
    let mut f = 0.0;
    let mut grad = [0.0; N_PARAMS];
    for k in 0..ds.len() {
        let ep = (ds.p[k] - sim.p_hat[k]) / norm.p0;
        let eq = (ds.q[k] - sim.q_hat[k]) / norm.q0;
        f += ep * ep + eq * eq;
        for i in 0..N_PARAMS {
            grad[i] -= 2.0 * (ep * sens.dp[k][i] / norm.p0 + eq * sens.dq[k][i] / norm.q0);
        }
    }
    Ok((f, grad))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stop when an accepted step reduces the objective by less than
    /// `ftol · f`.
    pub ftol: f64,
    /// Stop when the objective falls below this absolute value.
    pub fatol: f64,
    /// Stop when the scaled step is below `xtol` relative to the iterate.
    pub xtol: f64,
    pub initial_damping: f64,
    /// Additional starts drawn inside the parameter boxes.
    pub restarts: usize,
    pub seed: u64,
    pub objective: ObjectiveOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 1000,
            ftol: 1e-10,
            fatol: 1e-24,
            xtol: 1e-12,
            initial_damping: 1e-3,
            restarts: 0,
            seed: 0,
            objective: ObjectiveOptions::default(),
        }
    }
}

/// Result of one identification run.
#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub theta_star: Theta,
    pub objective_value: f64,
    pub iterations: usize,
    /// Largest violation of the machine constraints and parameter boxes.
    pub constraint_violation: f64,
    /// Constraints holding with equality at the estimate.
    pub active_bounds: Vec<String>,
    pub converged: bool,
    /// The iteration limit was reached; the estimate is the best found.
    pub hit_max_iter: bool,
    /// Infinity norm of the projected gradient step in scaled variables.
    pub first_order_optimality: f64,
    pub normalization: Normalization,
    pub free_parameters: Vec<ParamId>,
    /// Final objective of each start; `None` when no feasible start could
    /// be drawn or its run failed.
    pub start_objectives: Vec<Option<f64>>,
    pub best_start: usize,
    /// Objective after every accepted step of the winning start.
    pub history: Vec<f64>,
    pub n_samples: usize,
}

impl FitReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.hit_max_iter {
            w.push("iteration limit reached; returning best iterate".to_string());
        }
        if !self.converged {
            w.push("solver did not report convergence".to_string());
        }
        w
    }
}

/// Identifies the model parameters on `ds` (normally the identification
/// window). Start 0 is `init.theta0`; further starts are drawn from
/// independent random streams so that adding restarts never changes the
/// earlier ones.
pub fn identify(
    ds: &Dataset,
    init: &InitSpec,
    cfg: &ConstraintConfig,
    opts: &SolverOptions,
) -> Result<FitReport> {
    ds.validate()?;
    if ds.is_empty() {
        return Err(EdmError::TooShort { need: 1, got: 0 });
    }
    cfg.validate()?;
    let bounds = box_bounds(init, cfg)?;
    let prob = Problem::new(ds, init, bounds, cfg, &opts.objective)?;
    let z0 = prob.z0();
    if !prob.is_feasible(&z0) {
        let worst = prob
            .slack(&z0)
            .iter()
            .zip(&prob.labels)
            .min_by(|a, b| a.0.total_cmp(b.0))
            .map(|(_, l)| l.describe())
            .unwrap_or_default();
        return Err(EdmError::InfeasibleInit(format!(
            "initial parameters violate {worst}"
        )));
    }
    prob.eval(&z0).map_err(|e| match e {
        EdmError::InfeasibleSteadyState { .. } => {
            EdmError::InfeasibleInit(format!("initial parameters: {e}"))
        }
        other => other,
    })?;

    let runs: Vec<_> = (0..=opts.restarts)
        .into_par_iter()
        .map(|i| {
            let start = if i == 0 {
                Some(z0.clone())
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(i as u64);
                prob.sample_start(&mut rng, 200)
            };
            start.and_then(|z| solver::levenberg_marquardt(&prob, z, opts).ok())
        })
        .collect();

    let start_objectives: Vec<Option<f64>> = runs.iter().map(|r| r.as_ref().map(|r| r.f)).collect();
    let (best_start, best) = runs
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|r| (i, r)))
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f).then(a.0.cmp(&b.0)))
        .ok_or_else(|| EdmError::Solver("every start failed".into()))?;

    let theta_star = prob.theta(&best.z);
    let slack = prob.slack(&best.z);
    let active_bounds = slack
        .iter()
        .zip(&prob.labels)
        .filter(|(s, _)| s.abs() <= 1e-9)
        .map(|(_, l)| l.describe())
        .collect();
    let free_parameters = ParamId::ALL
        .into_iter()
        .filter(|id| {
            let b = bounds[id.index()];
            !b.is_frozen() && (!id.is_sm() || bounds[ParamId::Sn.index()].hi > 0.0)
        })
        .collect();

    Ok(FitReport {
        theta_star,
        objective_value: best.f,
        iterations: best.iterations,
        constraint_violation: max_violation(&theta_star, &bounds, cfg),
        active_bounds,
        converged: best.converged,
        hit_max_iter: best.hit_max_iter,
        first_order_optimality: best.optimality,
        normalization: prob.norm,
        free_parameters,
        start_objectives,
        best_start,
        history: best.history,
        n_samples: ds.len(),
    })
}

/// Largest violation of the machine constraints (when the machine is
/// active) and of the parameter boxes.
pub fn max_violation(theta: &Theta, bounds: &[Bounds; N_PARAMS], cfg: &ConstraintConfig) -> f64 {
    let mut worst: f64 = 0.0;
    if bounds[ParamId::Sn.index()].hi > 0.0 {
        for r in constraints(theta, cfg) {
            worst = worst.max(r.violation());
        }
    }
    for id in ParamId::ALL {
        let b = bounds[id.index()];
        let x = theta.get(id);
        worst = worst.max(b.lo - x).max(x - b.hi);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use crate::simulator::Trace;

    fn sc3() -> Theta {
        reference::scenario("3").unwrap()
    }

    #[test]
    fn inertia_box_examples() {
        let cfg = ConstraintConfig::default();
        let init = InitSpec::uniform(sc3(), 10.0).with(ParamId::Hs, 0.35, 40.0);
        let b = box_bounds(&init, &cfg).unwrap()[ParamId::Hs.index()];
        assert!((b.lo - 0.21).abs() < 1e-15 && (b.hi - 0.49).abs() < 1e-15);

        let init = InitSpec::uniform(sc3(), 10.0).with(ParamId::Hs, 5.0, 100.0);
        let b = box_bounds(&init, &cfg).unwrap()[ParamId::Hs.index()];
        assert_eq!(b.lo, EPS_STRICT);
        assert_eq!(b.hi, 10.0);
    }

    #[test]
    fn zero_tolerance_freezes() {
        let init = InitSpec::uniform(sc3(), 0.0);
        let b = box_bounds(&init, &ConstraintConfig::default()).unwrap();
        for id in ParamId::ALL {
            assert_eq!(b[id.index()].lo, sc3().get(id));
            assert_eq!(b[id.index()].hi, sc3().get(id));
        }
    }

    #[test]
    fn negative_values_get_ordered_boxes() {
        let init = InitSpec::uniform(sc3(), 20.0);
        let b = box_bounds(&init, &ConstraintConfig::default()).unwrap();
        let pi = b[ParamId::PiPrime.index()];
        assert!(pi.lo < pi.hi && pi.contains(-460.0));
    }

    #[test]
    fn empty_intersection_is_infeasible() {
        let cfg = ConstraintConfig {
            h_s_max: 0.1,
            ..ConstraintConfig::default()
        };
        let init = InitSpec::uniform(sc3(), 10.0);
        assert!(matches!(box_bounds(&init, &cfg), Err(EdmError::InfeasibleInit(_))));
    }

    #[test]
    fn constant_offset_objective() {
        let mut theta = sc3();
        theta.sm.s_n = 0.0;
        let n = 50;
        let trace = Trace::constant(n, 0.02, 1.0, 1.0);
        let sim = simulator::simulate_from_steady_state(&theta, &trace, &SimOptions::default()).unwrap();
        let ds = Dataset::new(trace, sim.p_hat.clone(), sim.q_hat.clone(), Default::default()).unwrap();
        let opts = ObjectiveOptions::default();
        assert_eq!(objective(&theta, &ds, &opts).unwrap().value, 0.0);

        let dp = 12.5;
        let mut shifted = theta;
        shifted.v.p_p += dp;
        let p0 = normalization(&ds, &opts).p0;
        let f = objective(&shifted, &ds, &opts).unwrap();
        let expected = n as f64 * dp * dp / (p0 * p0);
        assert!((f.value - expected).abs() <= 1e-12 * expected);
        assert!(!f.diverged);
    }

    #[test]
    fn normalization_floor() {
        let trace = Trace::constant(4, 0.02, 1.0, 1.0);
        let ds = Dataset::new(trace, vec![1000.0, -1000.0, 1000.0, -1000.0], vec![1.0; 4], Default::default()).unwrap();
        let n = normalization(&ds, &ObjectiveOptions::default());
        assert_eq!(n.p0, 1000.0);
        assert_eq!(n.q0, 100.0);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let trace = Trace::constant(10, 0.02, 1.0, 1.0);
        let ds = Dataset::new(trace, vec![0.0; 10], vec![0.0; 10], Default::default()).unwrap();
        let mut theta = sc3();
        theta.sm.e_f = 0.5;
        let cfg = ConstraintConfig::default();
        let err = identify(&ds, &InitSpec::uniform(theta, 10.0), &cfg, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, EdmError::InfeasibleInit(_)), "{err}");
    }
}
