//! Dataset splitting and RMSE reporting.

use std::fmt;

use crate::dataset::Dataset;
use crate::error::{EdmError, Result};
use crate::model::Theta;
use crate::simulator::{self, SimOptions, SimResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Identification,
    Validation,
    Full,
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Identification => "identification",
            Window::Validation => "validation",
            Window::Full => "full",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmseReport {
    /// Active-power RMSE [W].
    pub sigma_p: f64,
    /// Reactive-power RMSE [var].
    pub sigma_q: f64,
    pub window: Window,
    pub n_samples: usize,
}

/// Index at which the validation window starts: `⌈N/2⌉`.
pub fn split_index(n: usize) -> usize {
    n.div_ceil(2)
}

/// First `⌈N/2⌉` samples for identification, the rest for validation.
pub fn split(ds: &Dataset) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if n < 2 {
        return Err(EdmError::TooShort { need: 2, got: n });
    }
    let m = split_index(n);
    Ok((ds.slice(0..m), ds.slice(m..n)))
}

/// Root mean square of `measured − simulated`.
pub fn rmse(measured: &[f64], simulated: &[f64]) -> Result<f64> {
    if measured.len() != simulated.len() {
        return Err(EdmError::LengthMismatch {
            left: measured.len(),
            right: simulated.len(),
        });
    }
    if measured.is_empty() {
        return Err(EdmError::TooShort { need: 1, got: 0 });
    }
    let ss: f64 = measured
        .iter()
        .zip(simulated)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / measured.len() as f64).sqrt())
}

/// How the state is initialized at the start of the validation window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ValidationStart {
    /// Steady state at the window's first sample.
    #[default]
    SteadyState,
    /// Continue the trajectory simulated over the identification window.
    WarmStart,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalOptions {
    pub sim: SimOptions,
    pub start: ValidationStart,
}

/// Simulation of `theta` over the whole dataset.
pub fn replay(theta: &Theta, ds: &Dataset, sim: &SimOptions) -> Result<SimResult> {
    simulator::simulate_from_steady_state(theta, &ds.trace, sim)
}

/// RMSE of `theta` over the full dataset, initialized at steady state.
pub fn evaluate_window(theta: &Theta, ds: &Dataset, window: Window, sim: &SimOptions) -> Result<RmseReport> {
    let r = replay(theta, ds, sim)?;
    report(ds, &r, window)
}

fn report(ds: &Dataset, sim: &SimResult, window: Window) -> Result<RmseReport> {
    Ok(RmseReport {
        sigma_p: rmse(&ds.p, &sim.p_hat)?,
        sigma_q: rmse(&ds.q, &sim.q_hat)?,
        window,
        n_samples: ds.len(),
    })
}

/// Identification and validation RMSEs of `theta` on the two halves of `ds`.
pub fn evaluate(theta: &Theta, ds: &Dataset, opts: &EvalOptions) -> Result<(RmseReport, RmseReport)> {
    theta.validate()?;
    let (id, val) = split(ds)?;
    match opts.start {
        ValidationStart::SteadyState => Ok((
            evaluate_window(theta, &id, Window::Identification, &opts.sim)?,
            evaluate_window(theta, &val, Window::Validation, &opts.sim)?,
        )),
        ValidationStart::WarmStart => {
            let full = replay(theta, ds, &opts.sim)?;
            let m = id.len();
            let n = ds.len();
            let part = |range: std::ops::Range<usize>| SimResult {
                t0: full.time(range.start),
                dt: full.dt,
                p_hat: full.p_hat[range.clone()].to_vec(),
                q_hat: full.q_hat[range.clone()].to_vec(),
                states: full.states[range].to_vec(),
            };
            Ok((
                report(&id, &part(0..m), Window::Identification)?,
                report(&val, &part(m..n), Window::Validation)?,
            ))
        }
    }
}

/// Full-window RMSE of a model identified elsewhere applied to `ds`.
pub fn cross_validate(theta: &Theta, ds: &Dataset, sim: &SimOptions) -> Result<RmseReport> {
    theta.validate()?;
    evaluate_window(theta, ds, Window::Full, sim)
}
