//! TOML run configuration.
//!
//! ```toml
//! [theta]                 # parameter set used by simulate / validate / synth
//! reference = "3"         # start from a published scenario (optional)
//! h_s = 0.3               # any parameter can be given or overridden
//!
//! [init]                  # identification start, defaults to [theta]
//! profile = "chp-in"      # or "chp-out"; optional
//! tol_pct = 30            # default confidence interval
//! [init.h_s]
//! value = 5.0
//! tol_pct = 100
//!
//! [constraints]
//! t_ds_max_s = 10
//! h_s_max_s = 10
//! delta0_max_deg = 70
//! e_s_min_pu = 0.4
//! e_s_max_pu = 2.5
//!
//! [solver]
//! max_iter = 1000
//! restarts = 0
//! seed = 0
//!
//! [scenario]              # synthetic experiment
//! label = "3"
//! duration_s = 60
//! noise_p_w = 100
//! [scenario.excitation]
//! kind = "steps"          # none | steps | v-steps | omega-steps | random-walk
//! ```
//!
//! Parameter values are in SI units (W, var, VA); reactances and voltages
//! in pu, times in s.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Value;

use crate::dataset::Configuration;
use crate::error::{EdmError, Result};
use crate::identification::{ConstraintConfig, InitSpec, ObjectiveOptions, SolverOptions};
use crate::model::{ParamId, Theta, DEFAULT_OMEGA_N};
use crate::reference;
use crate::simulator::{SimOptions, DEFAULT_DT};
use crate::synth::{Excitation, ScenarioSpec};
use crate::validation::{EvalOptions, ValidationStart};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    theta: Option<BTreeMap<String, Value>>,
    init: Option<BTreeMap<String, Value>>,
    constraints: Option<RawConstraints>,
    solver: Option<RawSolver>,
    scenario: Option<RawScenario>,
    validation: Option<RawValidation>,
    // Echo of an identification report; ignored on input.
    #[allow(dead_code)]
    fit: Option<Value>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraints {
    t_ds_max_s: Option<f64>,
    h_s_max_s: Option<f64>,
    delta0_max_deg: Option<f64>,
    e_s_min_pu: Option<f64>,
    e_s_max_pu: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    max_iter: Option<usize>,
    ftol: Option<f64>,
    fatol: Option<f64>,
    xtol: Option<f64>,
    initial_damping: Option<f64>,
    restarts: Option<usize>,
    seed: Option<u64>,
    n_sub: Option<usize>,
    eps_p_w: Option<f64>,
    eps_q_var: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    label: Option<String>,
    duration_s: Option<f64>,
    dt_s: Option<f64>,
    v0_pu: Option<f64>,
    omega0_pu: Option<f64>,
    noise_p_w: Option<f64>,
    noise_q_var: Option<f64>,
    configuration: Option<String>,
    seed: Option<u64>,
    excitation: Option<RawExcitation>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExcitation {
    kind: Option<String>,
    v_amplitude_pu: Option<f64>,
    omega_amplitude_pu: Option<f64>,
    period_s: Option<f64>,
    v_first_s: Option<f64>,
    omega_first_s: Option<f64>,
    std_v_pu: Option<f64>,
    std_omega_pu: Option<f64>,
    tau_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidation {
    warm_start: Option<bool>,
}

/// Validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub theta: Option<Theta>,
    pub init: Option<InitSpec>,
    pub constraints: ConstraintConfig,
    pub solver: SolverOptions,
    pub scenario: Option<ScenarioSpec>,
    pub eval: EvalOptions,
    pub source: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            theta: None,
            init: None,
            constraints: ConstraintConfig::default(),
            solver: SolverOptions::default(),
            scenario: None,
            eval: EvalOptions::default(),
            source: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| EdmError::io(path, e))?;
        let mut cfg = RunConfig::parse(&text).map_err(|e| match e {
            EdmError::Config(m) => EdmError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.source = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| EdmError::Config(e.to_string()))?;
        let constraints = constraint_config(raw.constraints.unwrap_or_default())?;
        let (solver, sim) = solver_options(raw.solver.unwrap_or_default())?;
        let theta = raw.theta.as_ref().map(|t| parse_theta(t, "theta")).transpose()?;
        let init = match (&raw.init, theta) {
            (Some(table), _) => Some(parse_init(table, theta)?),
            (None, Some(t)) => Some(InitSpec::uniform(t, 0.0)),
            (None, None) => None,
        };
        let scenario = raw
            .scenario
            .map(|s| scenario_spec(s, theta, constraints, sim))
            .transpose()?;
        let eval = EvalOptions {
            sim,
            start: match raw.validation.and_then(|v| v.warm_start) {
                Some(true) => ValidationStart::WarmStart,
                _ => ValidationStart::SteadyState,
            },
        };
        Ok(RunConfig {
            theta,
            init,
            constraints,
            solver,
            scenario,
            eval,
            source: None,
        })
    }

    pub fn require_theta(&self) -> Result<Theta> {
        self.theta
            .ok_or_else(|| EdmError::Config("a [theta] section is required".into()))
    }

    pub fn require_init(&self) -> Result<InitSpec> {
        self.init
            .ok_or_else(|| EdmError::Config("an [init] or [theta] section is required".into()))
    }
}

fn constraint_config(raw: RawConstraints) -> Result<ConstraintConfig> {
    let d = ConstraintConfig::default();
    let cfg = ConstraintConfig {
        t_ds_max: raw.t_ds_max_s.unwrap_or(d.t_ds_max),
        h_s_max: raw.h_s_max_s.unwrap_or(d.h_s_max),
        delta0_max: raw.delta0_max_deg.map_or(d.delta0_max, f64::to_radians),
        e_s_min: raw.e_s_min_pu.unwrap_or(d.e_s_min),
        e_s_max: raw.e_s_max_pu.unwrap_or(d.e_s_max),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn solver_options(raw: RawSolver) -> Result<(SolverOptions, SimOptions)> {
    let d = SolverOptions::default();
    let sim = SimOptions {
        n_sub: raw.n_sub.unwrap_or(d.objective.sim.n_sub),
        ..d.objective.sim
    };
    if sim.n_sub == 0 {
        return Err(EdmError::Config("solver.n_sub must be at least 1".into()));
    }
    let opts = SolverOptions {
        max_iter: raw.max_iter.unwrap_or(d.max_iter),
        ftol: raw.ftol.unwrap_or(d.ftol),
        fatol: raw.fatol.unwrap_or(d.fatol),
        xtol: raw.xtol.unwrap_or(d.xtol),
        initial_damping: raw.initial_damping.unwrap_or(d.initial_damping),
        restarts: raw.restarts.unwrap_or(d.restarts),
        seed: raw.seed.unwrap_or(d.seed),
        objective: ObjectiveOptions {
            sim,
            eps_p: raw.eps_p_w.unwrap_or(d.objective.eps_p),
            eps_q: raw.eps_q_var.unwrap_or(d.objective.eps_q),
        },
    };
    let positive = [opts.ftol, opts.xtol, opts.initial_damping, opts.objective.eps_p, opts.objective.eps_q];
    if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !(opts.fatol >= 0.0) {
        return Err(EdmError::Config("solver tolerances must be positive and finite".into()));
    }
    Ok((opts, sim))
}

fn as_f64(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(EdmError::Config(format!("{key} must be a number"))),
    }
}

fn reference_theta(v: &Value, key: &str) -> Result<Theta> {
    let label = v
        .as_str()
        .ok_or_else(|| EdmError::Config(format!("{key}.reference must be a string")))?;
    reference::scenario(label).ok_or_else(|| {
        EdmError::Config(format!(
            "unknown reference scenario `{label}` (known: {})",
            reference::SCENARIOS.join(", ")
        ))
    })
}

fn parse_theta(table: &BTreeMap<String, Value>, section: &str) -> Result<Theta> {
    let mut theta = match table.get("reference") {
        Some(v) => Some(reference_theta(v, section)?),
        None => None,
    };
    let mut given = [false; 16];
    let mut values = theta.map_or([0.0; 16], |t| t.to_array());
    let mut omega_n = theta.map_or(DEFAULT_OMEGA_N, |t| t.sm.omega_n);
    for (key, v) in table {
        match key.as_str() {
            "reference" => {}
            "omega_n" => omega_n = as_f64(v, key)?,
            name => {
                let id = ParamId::from_name(name)
                    .ok_or_else(|| EdmError::Config(format!("unknown parameter `{section}.{name}`")))?;
                values[id.index()] = as_f64(v, key)?;
                given[id.index()] = true;
            }
        }
    }
    if theta.is_none() {
        if let Some(id) = ParamId::ALL.into_iter().find(|id| !given[id.index()]) {
            return Err(EdmError::Config(format!(
                "`{section}.{id}` missing; give every parameter or a reference scenario"
            )));
        }
    }
    theta = Some(Theta::from_array(&values, omega_n));
    let theta = theta.expect("set above");
    theta.validate().map_err(|e| EdmError::Config(format!("[{section}]: {e}")))?;
    Ok(theta)
}

fn parse_init(table: &BTreeMap<String, Value>, theta: Option<Theta>) -> Result<InitSpec> {
    let base: BTreeMap<String, Value> = table
        .iter()
        .filter(|(k, v)| !v.is_table() && k.as_str() != "profile" && k.as_str() != "tol_pct")
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let theta0 = if base.is_empty() {
        theta.ok_or_else(|| EdmError::Config("[init] needs a reference, parameter values or a [theta] section".into()))?
    } else {
        let mut merged = BTreeMap::new();
        if let Some(t) = theta {
            for id in ParamId::ALL {
                merged.insert(id.name().to_string(), Value::Float(t.get(id)));
            }
            merged.insert("omega_n".into(), Value::Float(t.sm.omega_n));
        }
        if base.contains_key("reference") {
            merged.clear();
        }
        merged.extend(base);
        parse_theta(&merged, "init")?
    };
    let tol = match table.get("tol_pct") {
        Some(v) => as_f64(v, "init.tol_pct")?,
        None => 0.0,
    };
    let mut init = match table.get("profile").map(|v| v.as_str()) {
        None => InitSpec::uniform(theta0, tol),
        Some(Some("chp-out")) => InitSpec::chp_out_of_service(theta0, tol),
        Some(Some("chp-in")) => InitSpec::chp_in_service(theta0, theta0.sm.s_n, theta0.sm.t_ms, tol),
        Some(other) => {
            return Err(EdmError::Config(format!(
                "init.profile must be \"chp-in\" or \"chp-out\", got {other:?}"
            )))
        }
    };
    for (key, v) in table {
        let Some(sub) = v.as_table() else { continue };
        let id = ParamId::from_name(key)
            .ok_or_else(|| EdmError::Config(format!("unknown parameter `init.{key}`")))?;
        for (k, x) in sub {
            match k.as_str() {
                "value" => init.theta0.set(id, as_f64(x, k)?),
                "tol_pct" => init.tol_pct[id.index()] = as_f64(x, k)?,
                other => return Err(EdmError::Config(format!("unknown key `init.{key}.{other}`"))),
            }
        }
    }
    init.validate().map_err(|e| EdmError::Config(format!("[init]: {e}")))?;
    Ok(init)
}

fn scenario_spec(
    raw: RawScenario,
    theta: Option<Theta>,
    constraints: ConstraintConfig,
    sim: SimOptions,
) -> Result<ScenarioSpec> {
    let label = raw.label.unwrap_or_default();
    let theta_true = match theta {
        Some(t) => t,
        None => reference::scenario(&label).ok_or_else(|| {
            EdmError::Config("[scenario] needs a [theta] section or a reference label".into())
        })?,
    };
    let mut spec = ScenarioSpec::new(&label, theta_true);
    spec.duration = raw.duration_s.unwrap_or(spec.duration);
    spec.dt = raw.dt_s.unwrap_or(DEFAULT_DT);
    spec.v0 = raw.v0_pu.unwrap_or(spec.v0);
    spec.omega0 = raw.omega0_pu.unwrap_or(spec.omega0);
    spec.noise_p = raw.noise_p_w.unwrap_or(0.0);
    spec.noise_q = raw.noise_q_var.unwrap_or(0.0);
    spec.seed = raw.seed.unwrap_or(0);
    spec.constraints = constraints;
    spec.sim = sim;
    if let Some(c) = raw.configuration {
        spec.configuration = Some(c.parse::<Configuration>()?);
    }
    if let Some(e) = raw.excitation {
        spec.excitation = excitation(e)?;
    }
    spec.samples()?;
    Ok(spec)
}

fn excitation(raw: RawExcitation) -> Result<Excitation> {
    let Excitation::Composite(parts) = Excitation::default_steps() else {
        unreachable!("default excitation is composite")
    };
    let (dv, dw) = match (&parts[0], &parts[1]) {
        (
            Excitation::VSteps { amplitude: av, period, first: fv },
            Excitation::OmegaSteps { amplitude: aw, first: fw, .. },
        ) => (
            (raw.v_amplitude_pu.unwrap_or(*av), raw.period_s.unwrap_or(*period), raw.v_first_s.unwrap_or(*fv)),
            (raw.omega_amplitude_pu.unwrap_or(*aw), raw.period_s.unwrap_or(*period), raw.omega_first_s.unwrap_or(*fw)),
        ),
        _ => unreachable!("default excitation layout"),
    };
    let v_steps = Excitation::VSteps {
        amplitude: dv.0,
        period: dv.1,
        first: dv.2,
    };
    let w_steps = Excitation::OmegaSteps {
        amplitude: dw.0,
        period: dw.1,
        first: dw.2,
    };
    let walk = Excitation::RandomWalk {
        std_v: raw.std_v_pu.unwrap_or(0.002),
        std_omega: raw.std_omega_pu.unwrap_or(0.001),
        tau: raw.tau_s.unwrap_or(1.0),
    };
    Ok(match raw.kind.as_deref().unwrap_or("steps") {
        "none" => Excitation::None,
        "steps" => Excitation::Composite(vec![v_steps, w_steps]),
        "v-steps" => v_steps,
        "omega-steps" => w_steps,
        "random-walk" => walk,
        "composite" => Excitation::Composite(vec![v_steps, w_steps, walk]),
        other => return Err(EdmError::Config(format!("unknown excitation kind `{other}`"))),
    })
}
