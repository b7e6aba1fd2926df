//! Equivalent dynamic model of a microgrid seen from the point of common
//! coupling (PCC).
//!
//! The model aggregates three components:
//!
//! - an equivalent synchronous machine (SM) with a third-order
//!   flux-decay/swing model,
//! - a static source with linear voltage and frequency droop,
//! - a ZIP static load.
//!
//! ```text
//! ė'_s = (e_f − (x_s/x'_s) e'_s + ((x_s − x'_s)/x'_s) v cos δ_s) / T'_ds
//! ω̇_s  = (t_ms − (v e'_s/x'_s) sin δ_s − D (ω_s − ω)) / H_s
//! δ̇_s  = Ω_n (ω_s − ω)
//!
//! P = P_Z v² + P'_I v + P_P + D_P (ω − 1) − S_n (v e'_s/x'_s) sin δ_s
//! Q = Q_Z v² + Q'_I v + Q_P + D_Q (ω − 1) + S_n ((v e'_s/x'_s) cos δ_s − v²/x'_s)
//! ```
//!
//! Powers are in W / var, positive values mean import at the PCC. The static
//! source's voltage coefficients are merged into `P'_I` and `Q'_I`.

use std::f64::consts::PI;
use std::ops::{Add, Sub};

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{EdmError, Result};

/// Default nominal angular velocity, 50 Hz grid.
pub const DEFAULT_OMEGA_N: f64 = 2.0 * PI * 50.0;

/// Parameters of the equivalent synchronous machine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmParams {
    /// Direct-axis transient time constant T'_ds [s].
    pub t_ds_prime: f64,
    /// Inertia constant H_s [s].
    pub h_s: f64,
    /// Steady-state reactance x_s [pu].
    pub x_s: f64,
    /// Transient reactance x'_s [pu].
    pub x_s_prime: f64,
    /// Mechanical torque t_ms [pu].
    pub t_ms: f64,
    /// Field voltage e_f [pu].
    pub e_f: f64,
    /// Damping factor D [pu].
    pub d: f64,
    /// Nominal apparent power S_n [VA].
    pub s_n: f64,
    /// Nominal angular velocity Ω_n [rad/s].
    pub omega_n: f64,
}

impl SmParams {
    /// Checks the modeling assumptions on the machine parameters.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.t_ds_prime,
            self.h_s,
            self.x_s,
            self.x_s_prime,
            self.t_ms,
            self.e_f,
            self.d,
            self.s_n,
            self.omega_n,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(EdmError::NonFinite {
                what: "SM parameters",
            });
        }
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(EdmError::InvalidParameter(msg.to_string()))
            }
        };
        check(self.t_ds_prime > 0.0, "t_ds_prime must be > 0")?;
        check(self.h_s > 0.0, "h_s must be > 0")?;
        check(self.d > 0.0, "d must be > 0")?;
        check(self.s_n >= 0.0, "s_n must be >= 0")?;
        check(
            self.x_s_prime > 0.0 && self.x_s_prime < self.x_s,
            "reactances must satisfy 0 < x_s_prime < x_s",
        )?;
        check(
            (0.0..=1.0).contains(&self.t_ms),
            "t_ms must lie in [0, 1]",
        )?;
        check(self.omega_n > 0.0, "omega_n must be > 0")
    }
}

/// Voltage-dependent static parameters (ZIP load with the static source's
/// voltage term folded into the constant-current coefficients).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VoltageParams {
    pub p_z: f64,
    pub p_i_prime: f64,
    pub p_p: f64,
    pub q_z: f64,
    pub q_i_prime: f64,
    pub q_p: f64,
}

/// Frequency droop coefficients of the static source, per pu of frequency.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FreqParams {
    /// W per pu frequency deviation.
    pub d_p: f64,
    /// var per pu frequency deviation.
    pub d_q: f64,
}

/// Full parameter set of the equivalent model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Theta {
    pub sm: SmParams,
    pub v: VoltageParams,
    pub w: FreqParams,
}

/// Identifiable parameters in the order `[θ_sm, θ_v, θ_ω]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamId {
    TDsPrime,
    Xs,
    XsPrime,
    Hs,
    Tms,
    Sn,
    Ef,
    D,
    Pz,
    PiPrime,
    Pp,
    Qz,
    QiPrime,
    Qp,
    Dp,
    Dq,
}

/// Number of identifiable parameters.
pub const N_PARAMS: usize = 16;
/// Number of machine parameters, which lead the parameter vector.
pub const N_SM_PARAMS: usize = 8;

impl ParamId {
    pub const ALL: [ParamId; N_PARAMS] = [
        ParamId::TDsPrime,
        ParamId::Xs,
        ParamId::XsPrime,
        ParamId::Hs,
        ParamId::Tms,
        ParamId::Sn,
        ParamId::Ef,
        ParamId::D,
        ParamId::Pz,
        ParamId::PiPrime,
        ParamId::Pp,
        ParamId::Qz,
        ParamId::QiPrime,
        ParamId::Qp,
        ParamId::Dp,
        ParamId::Dq,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_sm(self) -> bool {
        self.index() < N_SM_PARAMS
    }

    /// Key used in configuration and report files.
    pub fn name(self) -> &'static str {
        match self {
            ParamId::TDsPrime => "t_ds_prime",
            ParamId::Xs => "x_s",
            ParamId::XsPrime => "x_s_prime",
            ParamId::Hs => "h_s",
            ParamId::Tms => "t_ms",
            ParamId::Sn => "s_n",
            ParamId::Ef => "e_f",
            ParamId::D => "d",
            ParamId::Pz => "p_z",
            ParamId::PiPrime => "p_i_prime",
            ParamId::Pp => "p_p",
            ParamId::Qz => "q_z",
            ParamId::QiPrime => "q_i_prime",
            ParamId::Qp => "q_p",
            ParamId::Dp => "d_p",
            ParamId::Dq => "d_q",
        }
    }

    pub fn from_name(name: &str) -> Option<ParamId> {
        ParamId::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl std::fmt::Display for ParamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Theta {
    pub fn get(&self, id: ParamId) -> f64 {
        match id {
            ParamId::TDsPrime => self.sm.t_ds_prime,
            ParamId::Xs => self.sm.x_s,
            ParamId::XsPrime => self.sm.x_s_prime,
            ParamId::Hs => self.sm.h_s,
            ParamId::Tms => self.sm.t_ms,
            ParamId::Sn => self.sm.s_n,
            ParamId::Ef => self.sm.e_f,
            ParamId::D => self.sm.d,
            ParamId::Pz => self.v.p_z,
            ParamId::PiPrime => self.v.p_i_prime,
            ParamId::Pp => self.v.p_p,
            ParamId::Qz => self.v.q_z,
            ParamId::QiPrime => self.v.q_i_prime,
            ParamId::Qp => self.v.q_p,
            ParamId::Dp => self.w.d_p,
            ParamId::Dq => self.w.d_q,
        }
    }

    pub fn set(&mut self, id: ParamId, value: f64) {
        let slot = match id {
            ParamId::TDsPrime => &mut self.sm.t_ds_prime,
            ParamId::Xs => &mut self.sm.x_s,
            ParamId::XsPrime => &mut self.sm.x_s_prime,
            ParamId::Hs => &mut self.sm.h_s,
            ParamId::Tms => &mut self.sm.t_ms,
            ParamId::Sn => &mut self.sm.s_n,
            ParamId::Ef => &mut self.sm.e_f,
            ParamId::D => &mut self.sm.d,
            ParamId::Pz => &mut self.v.p_z,
            ParamId::PiPrime => &mut self.v.p_i_prime,
            ParamId::Pp => &mut self.v.p_p,
            ParamId::Qz => &mut self.v.q_z,
            ParamId::QiPrime => &mut self.v.q_i_prime,
            ParamId::Qp => &mut self.v.q_p,
            ParamId::Dp => &mut self.w.d_p,
            ParamId::Dq => &mut self.w.d_q,
        };
        *slot = value;
    }

    pub fn to_array(&self) -> [f64; N_PARAMS] {
        ParamId::ALL.map(|id| self.get(id))
    }

    /// Builds a parameter set from the identifiable vector; `omega_n` is
    /// carried separately because it is never identified.
    pub fn from_array(values: &[f64; N_PARAMS], omega_n: f64) -> Theta {
        let mut theta = Theta {
            sm: SmParams {
                t_ds_prime: 0.0,
                h_s: 0.0,
                x_s: 0.0,
                x_s_prime: 0.0,
                t_ms: 0.0,
                e_f: 0.0,
                d: 0.0,
                s_n: 0.0,
                omega_n,
            },
            v: VoltageParams::default(),
            w: FreqParams::default(),
        };
        for (id, &v) in ParamId::ALL.iter().zip(values) {
            theta.set(*id, v);
        }
        theta
    }

    /// True when the equivalent machine contributes to the PCC exchange.
    pub fn has_machine(&self) -> bool {
        self.sm.s_n > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        self.sm.validate()?;
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return Err(EdmError::NonFinite { what: "theta" });
        }
        Ok(())
    }
}

/// Dynamic state of the equivalent machine. Also used as the container for
/// its time derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmState {
    /// Voltage behind the transient reactance e'_s [pu].
    pub e_s_prime: f64,
    /// Machine angular velocity ω_s [pu].
    pub omega_s: f64,
    /// Rotor angle δ_s between e'_s and v [rad].
    pub delta_s: f64,
}

impl SmState {
    pub fn to_array(self) -> [f64; 3] {
        [self.e_s_prime, self.omega_s, self.delta_s]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        SmState {
            e_s_prime: a[0],
            omega_s: a[1],
            delta_s: a[2],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.e_s_prime.is_finite() && self.omega_s.is_finite() && self.delta_s.is_finite()
    }

    /// Largest absolute component.
    pub fn norm_inf(&self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Exogenous quantities measured at the PCC.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PccInput {
    /// Bus voltage magnitude [pu].
    pub v: f64,
    /// Grid angular velocity [pu].
    pub omega: f64,
}

impl PccInput {
    pub fn new(v: f64, omega: f64) -> Self {
        PccInput { v, omega }
    }

    fn check(&self) -> Result<()> {
        if !self.v.is_finite() || !self.omega.is_finite() {
            return Err(EdmError::NonFinite { what: "PCC input" });
        }
        Ok(())
    }
}

/// Active/reactive power pair in W and var.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Power {
    pub p: f64,
    pub q: f64,
}

impl Power {
    pub fn new(p: f64, q: f64) -> Self {
        Power { p, q }
    }
}

impl Add for Power {
    type Output = Power;
    fn add(self, rhs: Power) -> Power {
        Power::new(self.p + rhs.p, self.q + rhs.q)
    }
}

impl Sub for Power {
    type Output = Power;
    fn sub(self, rhs: Power) -> Power {
        Power::new(self.p - rhs.p, self.q - rhs.q)
    }
}

/// Time derivative of the machine state.
pub fn sm_rhs(state: SmState, input: PccInput, p: &SmParams) -> Result<SmState> {
    if !state.is_finite() {
        return Err(EdmError::NonFinite { what: "SM state" });
    }
    input.check()?;
    p.validate()?;
    Ok(SmState::from_array(rhs(&state.to_array(), input, p)))
}

#[inline]
pub(crate) fn rhs(y: &[f64; 3], u: PccInput, p: &SmParams) -> [f64; 3] {
    let [e, ws, delta] = *y;
    let (sin_d, cos_d) = delta.sin_cos();
    let de = (p.e_f - p.x_s / p.x_s_prime * e
        + (p.x_s - p.x_s_prime) / p.x_s_prime * u.v * cos_d)
        / p.t_ds_prime;
    let dw = (p.t_ms - u.v * e / p.x_s_prime * sin_d - p.d * (ws - u.omega)) / p.h_s;
    let dd = p.omega_n * (ws - u.omega);
    [de, dw, dd]
}

/// Jacobians of the machine dynamics with respect to the state and to the
/// eight machine parameters (columns ordered as [`ParamId`]).
pub(crate) fn rhs_jacobians(
    y: &[f64; 3],
    u: PccInput,
    p: &SmParams,
) -> (Matrix3<f64>, SMatrix<f64, 3, N_SM_PARAMS>) {
    let [e, ws, delta] = *y;
    let (sin_d, cos_d) = delta.sin_cos();
    let (x, xp, t, h) = (p.x_s, p.x_s_prime, p.t_ds_prime, p.h_s);
    let v = u.v;
    let f = rhs(y, u, p);

    let fy = Matrix3::new(
        -(x / xp) / t,
        0.0,
        -((x - xp) / xp) * v * sin_d / t,
        -(v / xp) * sin_d / h,
        -p.d / h,
        -(v * e / xp) * cos_d / h,
        0.0,
        p.omega_n,
        0.0,
    );

    let mut fp = SMatrix::<f64, 3, N_SM_PARAMS>::zeros();
    fp[(0, ParamId::TDsPrime.index())] = -f[0] / t;
    fp[(0, ParamId::Xs.index())] = (-e + v * cos_d) / (xp * t);
    fp[(0, ParamId::XsPrime.index())] = x * (e - v * cos_d) / (xp * xp * t);
    fp[(0, ParamId::Ef.index())] = 1.0 / t;
    fp[(1, ParamId::Hs.index())] = -f[1] / h;
    fp[(1, ParamId::XsPrime.index())] = v * e * sin_d / (xp * xp * h);
    fp[(1, ParamId::Tms.index())] = 1.0 / h;
    fp[(1, ParamId::D.index())] = -(ws - u.omega) / h;
    (fy, fp)
}

/// Power generated by the equivalent machine (subtracted at the PCC).
pub fn sm_power(state: SmState, input: PccInput, p: &SmParams) -> Result<Power> {
    if p.x_s_prime == 0.0 {
        return Err(EdmError::SingularParameter("x_s_prime"));
    }
    if !state.is_finite() {
        return Err(EdmError::NonFinite { what: "SM state" });
    }
    input.check()?;
    Ok(machine_power(&state.to_array(), input, p))
}

#[inline]
fn machine_power(y: &[f64; 3], u: PccInput, p: &SmParams) -> Power {
    let (sin_d, cos_d) = y[2].sin_cos();
    let k = u.v * y[0] / p.x_s_prime;
    Power::new(
        p.s_n * k * sin_d,
        -p.s_n * (k * cos_d - u.v * u.v / p.x_s_prime),
    )
}

/// Linear static source. Only used to generate data with explicit `R_P`,
/// `R_Q`; the identified model carries them inside `P'_I`, `Q'_I`.
pub fn static_source_power(input: PccInput, w: &FreqParams, r_p: f64, r_q: f64) -> Power {
    let dw = input.omega - 1.0;
    Power::new(r_p * input.v + w.d_p * dw, r_q * input.v + w.d_q * dw)
}

/// ZIP load. Here `p_i_prime`/`q_i_prime` are read as the plain constant
/// current coefficients.
pub fn zip_power(v: f64, z: &VoltageParams) -> Power {
    let v2 = v * v;
    Power::new(
        z.p_z * v2 + z.p_i_prime * v + z.p_p,
        z.q_z * v2 + z.q_i_prime * v + z.q_p,
    )
}

/// Active and reactive power imported at the PCC.
pub fn pcc_power(state: SmState, input: PccInput, theta: &Theta) -> Result<Power> {
    if theta.sm.x_s_prime == 0.0 && theta.sm.s_n != 0.0 {
        return Err(EdmError::SingularParameter("x_s_prime"));
    }
    if !state.is_finite() {
        return Err(EdmError::NonFinite { what: "SM state" });
    }
    input.check()?;
    Ok(pcc(&state.to_array(), input, theta))
}

#[inline]
pub(crate) fn pcc(y: &[f64; 3], u: PccInput, theta: &Theta) -> Power {
    let static_part = zip_power(u.v, &theta.v) + static_source_power(u, &theta.w, 0.0, 0.0);
    if theta.sm.s_n == 0.0 {
        return static_part;
    }
    static_part - machine_power(y, u, &theta.sm)
}

/// Partial derivatives of the PCC powers.
pub(crate) struct OutputPartials {
    /// d(P, Q)/d(state), rows P and Q.
    pub dy: [Vector3<f64>; 2],
    /// Direct d(P, Q)/dθ at fixed state, rows P and Q.
    pub dtheta: [[f64; N_PARAMS]; 2],
}

pub(crate) fn pcc_partials(y: &[f64; 3], u: PccInput, theta: &Theta) -> OutputPartials {
    let v = u.v;
    let mut dtheta = [[0.0; N_PARAMS]; 2];
    dtheta[0][ParamId::Pz.index()] = v * v;
    dtheta[0][ParamId::PiPrime.index()] = v;
    dtheta[0][ParamId::Pp.index()] = 1.0;
    dtheta[0][ParamId::Dp.index()] = u.omega - 1.0;
    dtheta[1][ParamId::Qz.index()] = v * v;
    dtheta[1][ParamId::QiPrime.index()] = v;
    dtheta[1][ParamId::Qp.index()] = 1.0;
    dtheta[1][ParamId::Dq.index()] = u.omega - 1.0;

    let sm = &theta.sm;
    let mut dy = [Vector3::zeros(), Vector3::zeros()];
    if sm.s_n != 0.0 {
        let [e, _, delta] = *y;
        let (sin_d, cos_d) = delta.sin_cos();
        let xp = sm.x_s_prime;
        let s = sm.s_n;
        dy[0] = Vector3::new(-s * v * sin_d / xp, 0.0, -s * v * e * cos_d / xp);
        dy[1] = Vector3::new(s * v * cos_d / xp, 0.0, -s * v * e * sin_d / xp);
        let q_core = (v * e * cos_d - v * v) / xp;
        dtheta[0][ParamId::Sn.index()] = -v * e * sin_d / xp;
        dtheta[0][ParamId::XsPrime.index()] = s * v * e * sin_d / (xp * xp);
        dtheta[1][ParamId::Sn.index()] = q_core;
        dtheta[1][ParamId::XsPrime.index()] = -s * q_core / xp;
    }
    OutputPartials { dy, dtheta }
}
