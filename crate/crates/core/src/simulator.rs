//! Steady-state initialization and fixed-step replay of the equivalent model
//! over recorded PCC voltage/frequency traces.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{EdmError, Result};
use crate::model::{self, PccInput, SmParams, SmState, Theta, N_PARAMS, N_SM_PARAMS};

/// Default upper limit of the steady-state rotor angle, 70°.
pub const DEFAULT_DELTA0_MAX: f64 = 70.0 * std::f64::consts::PI / 180.0;
/// PMU sampling period [s].
pub const DEFAULT_DT: f64 = 0.02;

/// States whose magnitude exceeds this are treated as diverged.
const DIVERGENCE_LIMIT: f64 = 1.0e6;
const ROOT_SCAN_POINTS: usize = 512;

/// Uniformly sampled voltage and frequency at the PCC.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub t0: f64,
    pub dt: f64,
    pub v: Vec<f64>,
    pub omega: Vec<f64>,
}

impl Trace {
    pub fn new(t0: f64, dt: f64, v: Vec<f64>, omega: Vec<f64>) -> Result<Trace> {
        let trace = Trace { t0, dt, v, omega };
        trace.validate()?;
        Ok(trace)
    }

    /// Constant trace of `n` samples.
    pub fn constant(n: usize, dt: f64, v: f64, omega: f64) -> Trace {
        Trace {
            t0: 0.0,
            dt,
            v: vec![v; n],
            omega: vec![omega; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !self.t0.is_finite() {
            return Err(EdmError::InvalidParameter(format!(
                "sampling period must be positive and finite, got {}",
                self.dt
            )));
        }
        if self.v.len() != self.omega.len() {
            return Err(EdmError::LengthMismatch {
                left: self.v.len(),
                right: self.omega.len(),
            });
        }
        if self.v.iter().chain(&self.omega).any(|x| !x.is_finite()) {
            return Err(EdmError::NonFinite { what: "trace" });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn input(&self, k: usize) -> PccInput {
        PccInput::new(self.v[k], self.omega[k])
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Sub-trace of samples `range`, with the start time shifted accordingly.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Trace {
        Trace {
            t0: self.time(range.start),
            dt: self.dt,
            v: self.v[range.clone()].to_vec(),
            omega: self.omega[range].to_vec(),
        }
    }
}

/// Simulated PCC powers and machine states, one entry per trace sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub t0: f64,
    pub dt: f64,
    pub p_hat: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub states: Vec<SmState>,
}

impl SimResult {
    pub fn len(&self) -> usize {
        self.p_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_hat.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    /// Runge-Kutta substeps per sampling interval.
    pub n_sub: usize,
    /// Upper limit of the steady-state rotor angle used for initialization.
    pub delta_max: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            n_sub: 4,
            delta_max: DEFAULT_DELTA0_MAX,
        }
    }
}

/// Steady state of the machine at the given PCC operating point with the
/// default rotor-angle limit.
pub fn steady_state(theta: &Theta, v0: f64, omega0: f64) -> Result<SmState> {
    steady_state_within(theta, v0, omega0, DEFAULT_DELTA0_MAX)
}

/// Steady state with the rotor angle restricted to `(0, delta_max]`.
///
/// With `ω_s = ω0`, the flux equation gives
/// `e'_s(δ) = (x'_s e_f + (x_s − x'_s) v0 cos δ) / x_s`, and the swing
/// equation reduces to the scalar root problem
/// `(v0 e'_s(δ) / x'_s) sin δ = t_ms`. The smallest root is returned.
/// Without a machine (`s_n = 0`) an inert state is returned.
pub fn steady_state_within(
    theta: &Theta,
    v0: f64,
    omega0: f64,
    delta_max: f64,
) -> Result<SmState> {
    if !v0.is_finite() || !omega0.is_finite() {
        return Err(EdmError::NonFinite {
            what: "operating point",
        });
    }
    if !theta.has_machine() {
        return Ok(SmState {
            e_s_prime: v0,
            omega_s: omega0,
            delta_s: 0.0,
        });
    }
    let p = &theta.sm;
    p.validate()?;
    if !(delta_max > 0.0 && delta_max < std::f64::consts::FRAC_PI_2) {
        return Err(EdmError::Domain(format!(
            "delta_max must lie in (0, pi/2), got {delta_max}"
        )));
    }
    let flux = |d: f64| (p.x_s_prime * p.e_f + (p.x_s - p.x_s_prime) * v0 * d.cos()) / p.x_s;
    let g = |d: f64| v0 * flux(d) / p.x_s_prime * d.sin() - p.t_ms;
    let infeasible = |reason: String| EdmError::InfeasibleSteadyState { delta_max, reason };

    let delta = if p.t_ms == 0.0 {
        0.0
    } else {
        let mut lo = 0.0;
        let mut hi = None;
        for i in 1..=ROOT_SCAN_POINTS {
            let d = delta_max * i as f64 / ROOT_SCAN_POINTS as f64;
            if g(d) >= 0.0 {
                hi = Some(d);
                break;
            }
            lo = d;
        }
        let mut hi = hi.ok_or_else(|| {
            infeasible(format!(
                "electrical torque at delta_max is below t_ms = {}",
                p.t_ms
            ))
        })?;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if g(lo).abs() < g(hi).abs() && lo > 0.0 {
            lo
        } else {
            hi
        }
    };
    let e = flux(delta);
    if e <= 0.0 {
        return Err(infeasible(format!("e'_s = {e} is not positive")));
    }
    Ok(SmState {
        e_s_prime: e,
        omega_s: omega0,
        delta_s: delta,
    })
}

/// Replays the model over `trace` from `init` with classical fourth-order
/// Runge-Kutta, inputs linearly interpolated between samples.
pub fn simulate(theta: &Theta, trace: &Trace, init: SmState, opts: &SimOptions) -> Result<SimResult> {
    check_inputs(theta, trace, opts)?;
    let n = trace.len();
    let mut out = SimResult {
        t0: trace.t0,
        dt: trace.dt,
        p_hat: Vec::with_capacity(n),
        q_hat: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
    };
    let mut y = init.to_array();
    let dynamic = theta.has_machine();
    for k in 0..n {
        let pw = model::pcc(&y, trace.input(k), theta);
        out.p_hat.push(pw.p);
        out.q_hat.push(pw.q);
        out.states.push(SmState::from_array(y));
        if k + 1 < n && dynamic {
            y = advance(&y, trace.input(k), trace.input(k + 1), trace.dt, opts.n_sub, &theta.sm);
            if !is_sane(&y) {
                return Err(EdmError::Diverged { index: k + 1 });
            }
        }
    }
    Ok(out)
}

/// Steady state at the first sample followed by [`simulate`].
pub fn simulate_from_steady_state(theta: &Theta, trace: &Trace, opts: &SimOptions) -> Result<SimResult> {
    if trace.is_empty() {
        return Err(EdmError::TooShort { need: 1, got: 0 });
    }
    let init = steady_state_within(theta, trace.v[0], trace.omega[0], opts.delta_max)?;
    simulate(theta, trace, init, opts)
}

fn check_inputs(theta: &Theta, trace: &Trace, opts: &SimOptions) -> Result<()> {
    if opts.n_sub == 0 {
        return Err(EdmError::InvalidParameter("n_sub must be >= 1".into()));
    }
    trace.validate()?;
    theta.validate()
}

fn is_sane(y: &[f64; 3]) -> bool {
    y.iter().all(|x| x.is_finite() && x.abs() < DIVERGENCE_LIMIT)
}

fn lerp(a: PccInput, b: PccInput, s: f64) -> PccInput {
    PccInput::new(a.v + (b.v - a.v) * s, a.omega + (b.omega - a.omega) * s)
}

fn axpy(y: &[f64; 3], a: f64, k: &[f64; 3]) -> [f64; 3] {
    [y[0] + a * k[0], y[1] + a * k[1], y[2] + a * k[2]]
}

/// Integrates one sampling interval.
fn advance(y: &[f64; 3], from: PccInput, to: PccInput, dt: f64, n_sub: usize, p: &SmParams) -> [f64; 3] {
    let h = dt / n_sub as f64;
    let mut y = *y;
    for j in 0..n_sub {
        let s0 = j as f64 / n_sub as f64;
        let s1 = (j + 1) as f64 / n_sub as f64;
        let u0 = lerp(from, to, s0);
        let um = lerp(from, to, 0.5 * (s0 + s1));
        let u1 = lerp(from, to, s1);
        let k1 = model::rhs(&y, u0, p);
        let k2 = model::rhs(&axpy(&y, 0.5 * h, &k1), um, p);
        let k3 = model::rhs(&axpy(&y, 0.5 * h, &k2), um, p);
        let k4 = model::rhs(&axpy(&y, h, &k3), u1, p);
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

type StateSens = SMatrix<f64, 3, N_SM_PARAMS>;

/// Derivatives of the simulated powers with respect to the sixteen
/// identifiable parameters, one row per sample.
#[derive(Clone, Debug)]
pub struct Sensitivities {
    pub dp: Vec<[f64; N_PARAMS]>,
    pub dq: Vec<[f64; N_PARAMS]>,
}

/// [`simulate_from_steady_state`] together with the exact derivatives of
/// the discrete outputs, including the dependence of the initial steady
/// state on the parameters.
pub fn simulate_with_sensitivities(
    theta: &Theta,
    trace: &Trace,
    opts: &SimOptions,
) -> Result<(SimResult, Sensitivities)> {
    if trace.is_empty() {
        return Err(EdmError::TooShort { need: 1, got: 0 });
    }
    check_inputs(theta, trace, opts)?;
    let init = steady_state_within(theta, trace.v[0], trace.omega[0], opts.delta_max)?;
    let n = trace.len();
    let p = &theta.sm;
    let dynamic = theta.has_machine();

    let mut y = init.to_array();
    let mut sens = if dynamic {
        let (fy, fp) = model::rhs_jacobians(&y, trace.input(0), p);
        let inv: Matrix3<f64> = fy.try_inverse().ok_or_else(|| {
            EdmError::InfeasibleSteadyState {
                delta_max: opts.delta_max,
                reason: "singular Jacobian at the steady state".into(),
            }
        })?;
        -(inv * fp)
    } else {
        StateSens::zeros()
    };

    let mut out = SimResult {
        t0: trace.t0,
        dt: trace.dt,
        p_hat: Vec::with_capacity(n),
        q_hat: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
    };
    let mut dsens = Sensitivities {
        dp: Vec::with_capacity(n),
        dq: Vec::with_capacity(n),
    };
    for k in 0..n {
        let u = trace.input(k);
        let pw = model::pcc(&y, u, theta);
        out.p_hat.push(pw.p);
        out.q_hat.push(pw.q);
        out.states.push(SmState::from_array(y));

        let partials = model::pcc_partials(&y, u, theta);
        let mut rows = partials.dtheta;
        for (row, dy) in rows.iter_mut().zip(&partials.dy) {
            let through_state = dy.transpose() * sens;
            for j in 0..N_SM_PARAMS {
                row[j] += through_state[j];
            }
        }
        dsens.dp.push(rows[0]);
        dsens.dq.push(rows[1]);

        if k + 1 < n && dynamic {
            (y, sens) = advance_with_sens(&y, &sens, u, trace.input(k + 1), trace.dt, opts.n_sub, p);
            if !is_sane(&y) {
                return Err(EdmError::Diverged { index: k + 1 });
            }
        }
    }
    Ok((out, dsens))
}

fn advance_with_sens(
    y: &[f64; 3],
    sens: &StateSens,
    from: PccInput,
    to: PccInput,
    dt: f64,
    n_sub: usize,
    p: &SmParams,
) -> ([f64; 3], StateSens) {
    let h = dt / n_sub as f64;
    let mut y = Vector3::from(*y);
    let mut s = *sens;
    let stage = |y: &Vector3<f64>, s: &StateSens, u: PccInput| {
        let ya = [y[0], y[1], y[2]];
        let f = Vector3::from(model::rhs(&ya, u, p));
        let (fy, fp) = model::rhs_jacobians(&ya, u, p);
        (f, fy * s + fp)
    };
    for j in 0..n_sub {
        let s0 = j as f64 / n_sub as f64;
        let s1 = (j + 1) as f64 / n_sub as f64;
        let u0 = lerp(from, to, s0);
        let um = lerp(from, to, 0.5 * (s0 + s1));
        let u1 = lerp(from, to, s1);
        let (k1, l1) = stage(&y, &s, u0);
        let (k2, l2) = stage(&(y + k1 * (0.5 * h)), &(s + l1 * (0.5 * h)), um);
        let (k3, l3) = stage(&(y + k2 * (0.5 * h)), &(s + l2 * (0.5 * h)), um);
        let (k4, l4) = stage(&(y + k3 * h), &(s + l3 * h), u1);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        s += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
    }
    ([y[0], y[1], y[2]], s)
}
