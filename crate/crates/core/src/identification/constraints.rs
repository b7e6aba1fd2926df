//! Modeling and operational constraints on the machine parameters, and the
//! reactance substitution that makes the operational ones linear.
//!
//! With `α_s = x_s / x'_s` and `α'_s = 1 / x'_s`, dividing the three
//! operational constraints by `x'_s > 0` gives
//!
//! ```text
//! flux floor:   α_s (cos δ⁰max − e'min) + e_f − cos δ⁰max > 0
//! flux ceiling: α_s (e'max − 1) − e_f + 1                 ≥ 0
//! angle limit:  e'max sin δ⁰max · α'_s − t_ms            ≥ 0
//! ```

use std::fmt;

use crate::error::{EdmError, Result};
use crate::model::Theta;
use crate::simulator::DEFAULT_DELTA0_MAX;

/// Margin used to implement strict inequalities.
pub const EPS_STRICT: f64 = 1e-6;

/// Limits entering the constraint set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintConfig {
    /// Upper limit of T'_ds [s].
    pub t_ds_max: f64,
    /// Upper limit of H_s [s].
    pub h_s_max: f64,
    /// Upper limit of the steady-state rotor angle [rad], in (0, π/2).
    pub delta0_max: f64,
    /// Lower limit of the steady-state e'_s [pu].
    pub e_s_min: f64,
    /// Upper limit of the steady-state e'_s [pu].
    pub e_s_max: f64,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        ConstraintConfig {
            t_ds_max: 10.0,
            h_s_max: 10.0,
            delta0_max: DEFAULT_DELTA0_MAX,
            e_s_min: 0.4,
            e_s_max: 2.5,
        }
    }
}

impl ConstraintConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_ds_max > 0.0
            && self.h_s_max > 0.0
            && self.delta0_max > 0.0
            && self.delta0_max < std::f64::consts::FRAC_PI_2
            && self.e_s_min > 0.0
            && self.e_s_min < self.e_s_max
            && [self.t_ds_max, self.h_s_max, self.e_s_max]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(EdmError::Config(format!(
                "invalid constraint configuration {self:?}"
            )))
        }
    }
}

/// Reactance substitution `(x_s, x'_s) → (α_s, α'_s)`.
pub fn alpha_transform(x_s: f64, x_s_prime: f64) -> Result<(f64, f64)> {
    if !(x_s_prime > 0.0) || !x_s.is_finite() || !x_s_prime.is_finite() {
        return Err(EdmError::Domain(format!(
            "x_s_prime must be positive and finite, got {x_s_prime}"
        )));
    }
    Ok((x_s / x_s_prime, 1.0 / x_s_prime))
}

/// Inverse substitution `(α_s, α'_s) → (x_s, x'_s)`.
pub fn alpha_inverse(alpha_s: f64, alpha_s_prime: f64) -> Result<(f64, f64)> {
    if !(alpha_s_prime > 0.0) || !alpha_s.is_finite() || !alpha_s_prime.is_finite() {
        return Err(EdmError::Domain(format!(
            "alpha_s_prime must be positive and finite, got {alpha_s_prime}"
        )));
    }
    Ok((alpha_s / alpha_s_prime, 1.0 / alpha_s_prime))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    TDsPositive,
    TDsMax,
    XsPrimePositive,
    XsPrimeBelowXs,
    HsPositive,
    HsMax,
    SnNonNegative,
    DPositive,
    TmsNonNegative,
    TmsAtMostOne,
    FluxFloor,
    FluxCeiling,
    AngleLimit,
}

impl ConstraintKind {
    pub fn name(self) -> &'static str {
        match self {
            ConstraintKind::TDsPositive => "t_ds_prime>0",
            ConstraintKind::TDsMax => "t_ds_prime<=t_ds_max",
            ConstraintKind::XsPrimePositive => "x_s_prime>0",
            ConstraintKind::XsPrimeBelowXs => "x_s_prime<x_s",
            ConstraintKind::HsPositive => "h_s>0",
            ConstraintKind::HsMax => "h_s<=h_s_max",
            ConstraintKind::SnNonNegative => "s_n>=0",
            ConstraintKind::DPositive => "d>0",
            ConstraintKind::TmsNonNegative => "t_ms>=0",
            ConstraintKind::TmsAtMostOne => "t_ms<=1",
            ConstraintKind::FluxFloor => "flux_floor",
            ConstraintKind::FluxCeiling => "flux_ceiling",
            ConstraintKind::AngleLimit => "angle_limit",
        }
    }

    /// Whether the inequality is strict.
    pub fn is_strict(self) -> bool {
        matches!(
            self,
            ConstraintKind::TDsPositive
                | ConstraintKind::XsPrimePositive
                | ConstraintKind::XsPrimeBelowXs
                | ConstraintKind::HsPositive
                | ConstraintKind::DPositive
                | ConstraintKind::FluxFloor
        )
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Signed constraint residual; non-negative (positive for strict
/// inequalities) means satisfied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub kind: ConstraintKind,
    pub value: f64,
}

impl Residual {
    pub fn satisfied(&self) -> bool {
        if self.kind.is_strict() {
            self.value > 0.0
        } else {
            self.value >= 0.0
        }
    }

    /// Amount by which the constraint is violated, zero when satisfied.
    pub fn violation(&self) -> f64 {
        (-self.value).max(0.0)
    }
}

/// Residuals of the machine constraints in the original parameters.
pub fn constraints(theta: &Theta, cfg: &ConstraintConfig) -> Vec<Residual> {
    let p = &theta.sm;
    let (cd, sd) = (cfg.delta0_max.cos(), cfg.delta0_max.sin());
    let r = |kind, value| Residual { kind, value };
    vec![
        r(ConstraintKind::TDsPositive, p.t_ds_prime),
        r(ConstraintKind::TDsMax, cfg.t_ds_max - p.t_ds_prime),
        r(ConstraintKind::XsPrimePositive, p.x_s_prime),
        r(ConstraintKind::XsPrimeBelowXs, p.x_s - p.x_s_prime),
        r(ConstraintKind::HsPositive, p.h_s),
        r(ConstraintKind::HsMax, cfg.h_s_max - p.h_s),
        r(ConstraintKind::SnNonNegative, p.s_n),
        r(ConstraintKind::DPositive, p.d),
        r(ConstraintKind::TmsNonNegative, p.t_ms),
        r(ConstraintKind::TmsAtMostOne, 1.0 - p.t_ms),
        r(
            ConstraintKind::FluxFloor,
            p.x_s * (cd - cfg.e_s_min) + p.x_s_prime * p.e_f - p.x_s_prime * cd,
        ),
        r(
            ConstraintKind::FluxCeiling,
            p.x_s * (cfg.e_s_max - 1.0) - p.x_s_prime * p.e_f + p.x_s_prime,
        ),
        r(
            ConstraintKind::AngleLimit,
            -p.x_s_prime * p.t_ms + cfg.e_s_max * sd,
        ),
    ]
}

/// Operational constraints in substituted coordinates: flux floor, flux
/// ceiling and angle limit, each linear in `(α_s, α'_s, e_f, t_ms)`.
pub fn operational_linear_forms(
    alpha_s: f64,
    alpha_s_prime: f64,
    e_f: f64,
    t_ms: f64,
    cfg: &ConstraintConfig,
) -> [f64; 3] {
    let (cd, sd) = (cfg.delta0_max.cos(), cfg.delta0_max.sin());
    [
        alpha_s * (cd - cfg.e_s_min) + e_f - cd,
        alpha_s * (cfg.e_s_max - 1.0) - e_f + 1.0,
        cfg.e_s_max * sd * alpha_s_prime - t_ms,
    ]
}
