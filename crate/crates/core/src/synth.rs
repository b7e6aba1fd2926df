//! Synthetic PCC datasets generated from a known parameter set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Configuration, Dataset, DatasetMeta};
use crate::error::{EdmError, Result};
use crate::identification::{constraints, ConstraintConfig};
use crate::model::Theta;
use crate::simulator::{self, SimOptions, Trace};

/// Input excitation added on top of the base operating point.
#[derive(Clone, Debug, PartialEq)]
pub enum Excitation {
    None,
    /// Piecewise-constant voltage levels. A new level is set every
    /// `period` seconds starting at `first`; levels alternate in sign with
    /// magnitude drawn from `[amplitude / 2, amplitude]`.
    VSteps { amplitude: f64, period: f64, first: f64 },
    /// Same as `VSteps` for the frequency.
    OmegaSteps { amplitude: f64, period: f64, first: f64 },
    /// First-order filtered random walk with stationary standard
    /// deviations `std_v`, `std_omega` and time constant `tau`.
    RandomWalk { std_v: f64, std_omega: f64, tau: f64 },
    Composite(Vec<Excitation>),
}

impl Excitation {
    /// Voltage and frequency steps interleaved over the experiment.
    pub fn default_steps() -> Excitation {
        Excitation::Composite(vec![
            Excitation::VSteps {
                amplitude: 0.004,
                period: 5.0,
                first: 1.0,
            },
            Excitation::OmegaSteps {
                amplitude: 0.002,
                period: 5.0,
                first: 3.5,
            },
        ])
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(EdmError::Config(format!("invalid excitation: {what}")));
        match self {
            Excitation::None => Ok(()),
            Excitation::VSteps { amplitude, period, first }
            | Excitation::OmegaSteps { amplitude, period, first } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0 && *period > 0.0 && first.is_finite()) {
                    return bad("step amplitude must be >= 0 and period > 0");
                }
                Ok(())
            }
            Excitation::RandomWalk { std_v, std_omega, tau } => {
                if !(*std_v >= 0.0 && *std_omega >= 0.0 && *tau > 0.0) {
                    return bad("random walk deviations must be >= 0 and tau > 0");
                }
                Ok(())
            }
            Excitation::Composite(parts) => parts.iter().try_for_each(Excitation::validate),
        }
    }

    /// Adds the excitation to `dv`, `dw` (deviations from the base point).
    fn apply<R: Rng>(&self, dt: f64, dv: &mut [f64], dw: &mut [f64], rng: &mut R) {
        match self {
            Excitation::None => {}
            Excitation::VSteps { amplitude, period, first } => steps(*amplitude, *period, *first, dt, dv, rng),
            Excitation::OmegaSteps { amplitude, period, first } => steps(*amplitude, *period, *first, dt, dw, rng),
            Excitation::RandomWalk { std_v, std_omega, tau } => {
                walk(*std_v, *tau, dt, dv, rng);
                walk(*std_omega, *tau, dt, dw, rng);
            }
            Excitation::Composite(parts) => {
                for p in parts {
                    p.apply(dt, dv, dw, rng);
                }
            }
        }
    }
}

fn steps<R: Rng>(amplitude: f64, period: f64, first: f64, dt: f64, out: &mut [f64], rng: &mut R) {
    let mut level = 0.0;
    let mut next = first;
    let mut sign = 1.0;
    for (k, x) in out.iter_mut().enumerate() {
        let t = k as f64 * dt;
        while t >= next - 1e-9 * dt {
            level = sign * amplitude * rng.random_range(0.5..=1.0);
            sign = -sign;
            next += period;
        }
        *x += level;
    }
}

fn walk<R: Rng>(std: f64, tau: f64, dt: f64, out: &mut [f64], rng: &mut R) {
    if std == 0.0 {
        return;
    }
    let a = (-dt / tau).exp();
    let b = std * (1.0 - a * a).sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut x = 0.0;
    for y in out.iter_mut() {
        *y += x;
        x = a * x + b * normal.sample(rng);
    }
}

/// Description of a synthetic experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub label: String,
    pub theta_true: Theta,
    /// Experiment duration [s]; must be a whole number of samples.
    pub duration: f64,
    pub dt: f64,
    pub v0: f64,
    pub omega0: f64,
    pub excitation: Excitation,
    /// Standard deviation of the additive active-power noise [W].
    pub noise_p: f64,
    /// Standard deviation of the additive reactive-power noise [var].
    pub noise_q: f64,
    pub configuration: Option<Configuration>,
    pub constraints: ConstraintConfig,
    pub sim: SimOptions,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(label: &str, theta_true: Theta) -> ScenarioSpec {
        ScenarioSpec {
            label: label.to_string(),
            theta_true,
            duration: 60.0,
            dt: simulator::DEFAULT_DT,
            v0: 1.0,
            omega0: 1.0,
            excitation: Excitation::default_steps(),
            noise_p: 0.0,
            noise_q: 0.0,
            configuration: Some(Configuration::A),
            constraints: ConstraintConfig::default(),
            sim: SimOptions::default(),
            seed: 0,
        }
    }

    /// Number of samples, `duration / dt`.
    pub fn samples(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.duration > 0.0 && self.duration.is_finite()) {
            return Err(EdmError::Config("duration and dt must be positive".into()));
        }
        let steps = self.duration / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(EdmError::Config(format!(
                "duration {} is not a whole number of {} s samples",
                self.duration, self.dt
            )));
        }
        Ok(steps.round() as usize)
    }
}

/// Simulates the scenario and adds measurement noise. Identical specs
/// (including the seed) give identical datasets.
pub fn generate(spec: &ScenarioSpec) -> Result<Dataset> {
    let n = spec.samples()?;
    spec.excitation.validate()?;
    if !(spec.noise_p >= 0.0 && spec.noise_q >= 0.0) {
        return Err(EdmError::Config("noise standard deviations must be >= 0".into()));
    }
    let theta = &spec.theta_true;
    theta.validate()?;
    spec.constraints.validate()?;
    if theta.has_machine() {
        if let Some(r) = constraints(theta, &spec.constraints).into_iter().find(|r| !r.satisfied()) {
            return Err(EdmError::InfeasibleInit(format!(
                "true parameters violate {} (residual {})",
                r.kind, r.value
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut dv = vec![0.0; n];
    let mut dw = vec![0.0; n];
    spec.excitation.apply(spec.dt, &mut dv, &mut dw, &mut rng);
    let v = dv.iter().map(|d| spec.v0 + d).collect();
    let omega = dw.iter().map(|d| spec.omega0 + d).collect();
    let trace = Trace::new(0.0, spec.dt, v, omega)?;

    let sim = SimOptions {
        delta_max: spec.constraints.delta0_max,
        ..spec.sim
    };
    let out = simulator::simulate_from_steady_state(theta, &trace, &sim)?;
    let mut p = out.p_hat;
    let mut q = out.q_hat;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(1);
    add_noise(&mut p, spec.noise_p, &mut noise_rng);
    add_noise(&mut q, spec.noise_q, &mut noise_rng);

    let meta = DatasetMeta {
        scenario: spec.label.clone(),
        configuration: spec.configuration,
        chp_in_service: Some(theta.has_machine()),
    };
    Dataset::new(trace, p, q, meta)
}

fn add_noise<R: Rng>(x: &mut [f64], std: f64, rng: &mut R) {
    if std == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, std).expect("finite std");
    for y in x {
        *y += normal.sample(rng);
    }
}
