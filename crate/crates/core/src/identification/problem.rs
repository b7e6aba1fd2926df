//! Decision-variable layout of the identification problem.
//!
//! The internal coordinates are the identifiable parameters with the two
//! reactances replaced by `(α_s, α'_s)`. Every constraint is linear in these
//! coordinates. Free coordinates are mapped affinely (with scaling) onto the
//! decision vector `z`; frozen parameters never leave their initial values.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::constraints::{ConstraintConfig, ConstraintKind, EPS_STRICT};
use super::{Bounds, InitSpec, Normalization, ObjectiveOptions};
use crate::dataset::Dataset;
use crate::error::{EdmError, Result};
use crate::model::{ParamId, Theta, N_PARAMS};
use crate::simulator::{self, SimOptions};

const XS: usize = ParamId::Xs as usize;
const XSP: usize = ParamId::XsPrime as usize;

/// What a linear constraint row stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum RowLabel {
    Model(ConstraintKind),
    Lower(ParamId),
    Upper(ParamId),
}

impl RowLabel {
    pub fn describe(self) -> String {
        match self {
            RowLabel::Model(k) => k.name().to_string(),
            RowLabel::Lower(p) => format!("{p}>=lower"),
            RowLabel::Upper(p) => format!("{p}<=upper"),
        }
    }
}

pub(crate) struct Problem<'a> {
    ds: &'a Dataset,
    theta0: Theta,
    bounds: [Bounds; N_PARAMS],
    frozen: [bool; N_PARAMS],
    /// Internal coordinates `q = offset + map · z`.
    offset: DVector<f64>,
    map: DMatrix<f64>,
    /// Internal coordinate and scale behind each decision variable.
    columns: Vec<(usize, f64)>,
    z0: DVector<f64>,
    /// Linear constraints `a z ≥ b`, rows normalized.
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub labels: Vec<RowLabel>,
    pub norm: Normalization,
    sim: SimOptions,
}

impl<'a> Problem<'a> {
    pub fn new(
        ds: &'a Dataset,
        init: &InitSpec,
        bounds: [Bounds; N_PARAMS],
        cfg: &ConstraintConfig,
        opts: &ObjectiveOptions,
    ) -> Result<Problem<'a>> {
        let theta0 = init.theta0;
        let machine = bounds[ParamId::Sn.index()].hi > 0.0;
        let mut frozen = [false; N_PARAMS];
        for id in ParamId::ALL {
            frozen[id.index()] = bounds[id.index()].is_frozen() || (id.is_sm() && !machine);
        }
        let (alpha0, alpha_p0) = super::alpha_transform(theta0.sm.x_s, theta0.sm.x_s_prime)?;
        let mut q0 = theta0.to_array();
        q0[XS] = alpha0;
        q0[XSP] = alpha_p0;

        // Internal coordinates that carry a decision variable. α_s follows
        // α'_s when only x_s is frozen.
        let mut columns: Vec<(usize, f64)> = Vec::new();
        let mut offset = DVector::from_row_slice(&q0);
        let mut col_of = [None; N_PARAMS];
        for i in 0..N_PARAMS {
            let free = if i == XS || i == XSP {
                match (frozen[XS], frozen[XSP]) {
                    (false, _) if i == XS => true,
                    (_, false) if i == XSP => true,
                    _ => false,
                }
            } else {
                !frozen[i]
            };
            if free {
                let b = &bounds[i];
                let width = if i == XS || i == XSP {
                    0.0
                } else {
                    0.5 * (b.hi - b.lo)
                };
                let scale = q0[i].abs().max(width).max(1e-12);
                col_of[i] = Some(columns.len());
                columns.push((i, scale));
                offset[i] = 0.0;
            }
        }
        let n = columns.len();
        let mut map = DMatrix::<f64>::zeros(N_PARAMS, n);
        let mut z0 = DVector::<f64>::zeros(n);
        for (j, &(i, scale)) in columns.iter().enumerate() {
            map[(i, j)] = scale;
            z0[j] = q0[i] / scale;
        }
        if frozen[XS] && !frozen[XSP] && machine {
            let j = col_of[XSP].expect("alpha_s_prime column");
            offset[XS] = 0.0;
            map[(XS, j)] = theta0.sm.x_s * columns[j].1;
        }

        let rows = internal_rows(&bounds, &frozen, machine, cfg);
        let mut a_rows = Vec::new();
        let mut b_rows = Vec::new();
        let mut labels = Vec::new();
        for (coeffs, rhs, label) in rows {
            let mut row = DVector::<f64>::zeros(n);
            let mut shift = 0.0;
            for &(i, c) in &coeffs {
                row += map.row(i).transpose() * c;
                shift += c * offset[i];
            }
            let rhs = rhs - shift;
            let norm = row.amax();
            if norm == 0.0 || norm < 1e-14 * coeffs.iter().fold(0.0_f64, |m, c| m.max(c.1.abs())) {
                if rhs > 1e-12 * (1.0 + rhs.abs()) {
                    return Err(EdmError::InfeasibleInit(format!(
                        "frozen parameters violate {}",
                        label.describe()
                    )));
                }
                continue;
            }
            a_rows.push(row / norm);
            b_rows.push(rhs / norm);
            labels.push(label);
        }
        let m = a_rows.len();
        let mut a = DMatrix::<f64>::zeros(m, n);
        for (k, row) in a_rows.iter().enumerate() {
            a.set_row(k, &row.transpose());
        }
        let b = DVector::from_vec(b_rows);
        let sim = SimOptions {
            delta_max: cfg.delta0_max,
            ..opts.sim
        };
        Ok(Problem {
            ds,
            theta0,
            bounds,
            frozen,
            offset,
            map,
            columns,
            z0,
            a,
            b,
            labels,
            norm: super::normalization(ds, opts),
            sim,
        })
    }

    pub fn n(&self) -> usize {
        self.z0.len()
    }

    pub fn z0(&self) -> DVector<f64> {
        self.z0.clone()
    }

    pub fn slack(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.a * z - &self.b
    }

    pub fn is_feasible(&self, z: &DVector<f64>) -> bool {
        self.slack(z).iter().all(|s| *s >= -1e-12)
    }

    fn internal(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.offset + &self.map * z
    }

    pub fn theta(&self, z: &DVector<f64>) -> Theta {
        let q = self.internal(z);
        let mut theta = self.theta0;
        for id in ParamId::ALL {
            let i = id.index();
            if self.frozen[i] {
                continue;
            }
            let value = match i {
                XS => q[XS] / q[XSP],
                XSP => 1.0 / q[XSP],
                _ => q[i],
            };
            theta.set(id, value);
        }
        theta
    }

    /// d(natural parameters)/dz.
    fn natural_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let q = self.internal(z);
        let mut t = self.map.clone();
        let (al, ap) = (q[XS], q[XSP]);
        let row_al = self.map.row(XS).into_owned();
        let row_ap = self.map.row(XSP).into_owned();
        t.set_row(XS, &(row_al / ap - &row_ap * (al / (ap * ap))));
        t.set_row(XSP, &(row_ap * (-1.0 / (ap * ap))));
        for i in 0..N_PARAMS {
            if self.frozen[i] {
                t.row_mut(i).fill(0.0);
            }
        }
        t
    }

    fn residuals(&self, p_hat: &[f64], q_hat: &[f64]) -> DVector<f64> {
        let n = self.ds.len();
        let mut r = DVector::<f64>::zeros(2 * n);
        for k in 0..n {
            r[k] = (self.ds.p[k] - p_hat[k]) / self.norm.p0;
            r[n + k] = (self.ds.q[k] - q_hat[k]) / self.norm.q0;
        }
        r
    }

    pub fn eval(&self, z: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let theta = self.theta(z);
        let sim = simulator::simulate_from_steady_state(&theta, &self.ds.trace, &self.sim)?;
        let r = self.residuals(&sim.p_hat, &sim.q_hat);
        Ok((r.norm_squared(), r))
    }

    pub fn eval_jac(&self, z: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let theta = self.theta(z);
        let (sim, sens) = simulator::simulate_with_sensitivities(&theta, &self.ds.trace, &self.sim)?;
        let r = self.residuals(&sim.p_hat, &sim.q_hat);
        let t = self.natural_jacobian(z);
        let n = self.ds.len();
        let nz = self.n();
        let mut jac = DMatrix::<f64>::zeros(2 * n, nz);
        for k in 0..n {
            for j in 0..nz {
                let mut dp = 0.0;
                let mut dq = 0.0;
                for i in 0..N_PARAMS {
                    let tij = t[(i, j)];
                    if tij != 0.0 {
                        dp += sens.dp[k][i] * tij;
                        dq += sens.dq[k][i] * tij;
                    }
                }
                jac[(k, j)] = -dp / self.norm.p0;
                jac[(n + k, j)] = -dq / self.norm.q0;
            }
        }
        Ok((r.norm_squared(), r, jac))
    }

    /// Draws a feasible start uniformly inside the parameter boxes.
    pub fn sample_start<R: Rng>(&self, rng: &mut R, attempts: usize) -> Option<DVector<f64>> {
        for _ in 0..attempts {
            let mut q = self.internal(&self.z0);
            let mut nat = self.theta0.to_array();
            for i in 0..N_PARAMS {
                if !self.frozen[i] {
                    let b = &self.bounds[i];
                    nat[i] = rng.random_range(b.lo..=b.hi);
                }
            }
            for i in 0..N_PARAMS {
                if i != XS && i != XSP {
                    q[i] = nat[i];
                }
            }
            q[XSP] = 1.0 / nat[XSP];
            q[XS] = nat[XS] / nat[XSP];
            let z = DVector::from_iterator(
                self.n(),
                self.columns.iter().map(|&(i, scale)| q[i] / scale),
            );
            if self.is_feasible(&z) {
                return Some(z);
            }
        }
        None
    }
}

type Row = (Vec<(usize, f64)>, f64, RowLabel);

/// Constraints on the internal coordinates as `Σ c_i q_i ≥ rhs`.
fn internal_rows(
    bounds: &[Bounds; N_PARAMS],
    frozen: &[bool; N_PARAMS],
    machine: bool,
    cfg: &ConstraintConfig,
) -> Vec<Row> {
    use ConstraintKind as K;
    let idx = |p: ParamId| p.index();
    let mut rows: Vec<Row> = Vec::new();
    if machine {
        let (cd, sd) = (cfg.delta0_max.cos(), cfg.delta0_max.sin());
        let (t, al, ap, h, tm, sn, ef, d) = (
            idx(ParamId::TDsPrime),
            XS,
            XSP,
            idx(ParamId::Hs),
            idx(ParamId::Tms),
            idx(ParamId::Sn),
            idx(ParamId::Ef),
            idx(ParamId::D),
        );
        rows.push((vec![(t, 1.0)], EPS_STRICT, RowLabel::Model(K::TDsPositive)));
        rows.push((vec![(t, -1.0)], -cfg.t_ds_max, RowLabel::Model(K::TDsMax)));
        rows.push((vec![(ap, 1.0)], EPS_STRICT, RowLabel::Model(K::XsPrimePositive)));
        rows.push((vec![(al, 1.0)], 1.0 + EPS_STRICT, RowLabel::Model(K::XsPrimeBelowXs)));
        rows.push((vec![(h, 1.0)], EPS_STRICT, RowLabel::Model(K::HsPositive)));
        rows.push((vec![(h, -1.0)], -cfg.h_s_max, RowLabel::Model(K::HsMax)));
        rows.push((vec![(sn, 1.0)], 0.0, RowLabel::Model(K::SnNonNegative)));
        rows.push((vec![(d, 1.0)], EPS_STRICT, RowLabel::Model(K::DPositive)));
        rows.push((vec![(tm, 1.0)], 0.0, RowLabel::Model(K::TmsNonNegative)));
        rows.push((vec![(tm, -1.0)], -1.0, RowLabel::Model(K::TmsAtMostOne)));
        rows.push((
            vec![(al, cd - cfg.e_s_min), (ef, 1.0)],
            cd + EPS_STRICT,
            RowLabel::Model(K::FluxFloor),
        ));
        rows.push((
            vec![(al, cfg.e_s_max - 1.0), (ef, -1.0)],
            -1.0,
            RowLabel::Model(K::FluxCeiling),
        ));
        rows.push((
            vec![(ap, cfg.e_s_max * sd), (tm, -1.0)],
            0.0,
            RowLabel::Model(K::AngleLimit),
        ));
    }
    for id in ParamId::ALL {
        let i = id.index();
        if frozen[i] {
            continue;
        }
        let b = &bounds[i];
        match i {
            XS => {
                rows.push((vec![(XS, 1.0), (XSP, -b.lo)], 0.0, RowLabel::Lower(id)));
                rows.push((vec![(XS, -1.0), (XSP, b.hi)], 0.0, RowLabel::Upper(id)));
            }
            XSP => {
                rows.push((vec![(XSP, 1.0)], 1.0 / b.hi, RowLabel::Upper(id)));
                rows.push((vec![(XSP, -1.0)], -1.0 / b.lo, RowLabel::Lower(id)));
            }
            _ => {
                rows.push((vec![(i, 1.0)], b.lo, RowLabel::Lower(id)));
                rows.push((vec![(i, -1.0)], -b.hi, RowLabel::Upper(id)));
            }
        }
    }
    rows
}
