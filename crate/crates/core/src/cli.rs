//! Command-line front end.
//!
//! Every subcommand writes its artifacts into `--out` (created if needed).
//! All results are computed before anything is written and every file is
//! written to a temporary name first and then renamed. Log verbosity is
//! taken from `EDM_LOG` (`error`, `warn`, `info`, `debug`, `trace`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::error::{EdmError, Result};
use crate::identification::{self, FitReport};
use crate::io;
use crate::model::{ParamId, Theta};
use crate::simulator::SimResult;
use crate::synth;
use crate::validation::{self, RmseReport};

pub const LOG_ENV: &str = "EDM_LOG";

#[derive(Debug, Parser)]
#[command(name = "edm", version, about = "Equivalent dynamic model of a microgrid at its PCC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Identify the model on the first half of a dataset.
    Identify(RunArgs),
    /// Replay a parameter set on the inputs of a dataset.
    Simulate(RunArgs),
    /// RMSEs of a parameter set on the identification and validation halves.
    Validate(RunArgs),
    /// Full-window RMSE of a parameter set on another scenario's dataset.
    CrossValidate(RunArgs),
    /// Generate a synthetic dataset.
    Synth(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset file (`t_s,v_pu,omega_pu,p_w,q_var`).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the solver and scenario seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the number of additional identification starts.
    #[arg(long)]
    pub restarts: Option<usize>,
}

pub const FIT_FILE: &str = "fit.toml";
pub const RMSE_FILE: &str = "rmse.txt";
pub const CROSS_FILE: &str = "cross.txt";
pub const SERIES_FILE: &str = "series.csv";
pub const SIMULATED_FILE: &str = "simulated.csv";
pub const DATASET_FILE: &str = "dataset.csv";

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            let cat = e.category();
            eprintln!("error[{}]: {e}", cat.as_str());
            cat.exit_code()
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::default().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs one subcommand; returns the written files.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Identify(a) => run_identify(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Validate(a) => run_validate(a),
        Command::CrossValidate(a) => run_cross(a),
        Command::Synth(a) => run_synth(a),
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.solver.seed = seed;
        if let Some(s) = cfg.scenario.as_mut() {
            s.seed = seed;
        }
    }
    if let Some(r) = args.restarts {
        cfg.solver.restarts = r;
    }
    Ok(cfg)
}

fn load_dataset(args: &RunArgs) -> Result<Dataset> {
    let path = args
        .dataset
        .as_ref()
        .ok_or_else(|| EdmError::Config("--dataset is required".into()))?;
    let ds = io::read_dataset(path)?;
    info!("{}: {} samples, dt = {} s", path.display(), ds.len(), ds.dt());
    Ok(ds)
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| EdmError::io(dir, e))
}

fn write_all(dir: &Path, files: Vec<(&str, String)>) -> Result<Vec<PathBuf>> {
    prepare_out(dir)?;
    let mut out = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        io::write_atomic(&path, body.as_bytes())?;
        out.push(path);
    }
    Ok(out)
}

pub fn run_identify(args: &RunArgs) -> Result<Vec<PathBuf>> {
    let cfg = load_config(args)?;
    let init = cfg.require_init()?;
    let ds = load_dataset(args)?;
    let (id_window, _) = validation::split(&ds)?;
    info!(
        "identifying on {} of {} samples with {} restarts",
        id_window.len(),
        ds.len(),
        cfg.solver.restarts
    );
    let fit = identification::identify(&id_window, &init, &cfg.constraints, &cfg.solver)?;
    for w in fit.warnings() {
        warn!("{w}");
    }
    let (a, b) = validation::evaluate(&fit.theta_star, &ds, &cfg.eval)?;
    let sim = validation::replay(&fit.theta_star, &ds, &cfg.eval.sim)?;
    let label = scenario_label(&ds);
    write_all(
        &args.out,
        vec![
            (FIT_FILE, format_fit(&fit)),
            (RMSE_FILE, format_rmse_table(&[(label.clone(), a), (label, b)])),
            (SERIES_FILE, format_series(&ds, &sim)),
        ],
    )
}

pub fn run_simulate(args: &RunArgs) -> Result<Vec<PathBuf>> {
    let cfg = load_config(args)?;
    let theta = cfg.require_theta()?;
    let ds = load_dataset(args)?;
    let sim = validation::replay(&theta, &ds, &cfg.eval.sim)?;
    let out = Dataset::new(ds.trace.clone(), sim.p_hat, sim.q_hat, ds.meta.clone())?;
    write_all(&args.out, vec![(SIMULATED_FILE, io::format_dataset(&out))])
}

pub fn run_validate(args: &RunArgs) -> Result<Vec<PathBuf>> {
    let cfg = load_config(args)?;
    let theta = cfg.require_theta()?;
    let ds = load_dataset(args)?;
    let (a, b) = validation::evaluate(&theta, &ds, &cfg.eval)?;
    let sim = validation::replay(&theta, &ds, &cfg.eval.sim)?;
    let label = scenario_label(&ds);
    write_all(
        &args.out,
        vec![
            (RMSE_FILE, format_rmse_table(&[(label.clone(), a), (label, b)])),
            (SERIES_FILE, format_series(&ds, &sim)),
        ],
    )
}

pub fn run_cross(args: &RunArgs) -> Result<Vec<PathBuf>> {
    let cfg = load_config(args)?;
    let theta = cfg.require_theta()?;
    let ds = load_dataset(args)?;
    let r = validation::cross_validate(&theta, &ds, &cfg.eval.sim)?;
    let sim = validation::replay(&theta, &ds, &cfg.eval.sim)?;
    let model = cfg
        .source
        .as_deref()
        .and_then(Path::file_stem)
        .map_or_else(|| "-".to_string(), |s| s.to_string_lossy().into_owned());
    write_all(
        &args.out,
        vec![
            (CROSS_FILE, format_cross_table(&[(model, scenario_label(&ds), r)])),
            (SERIES_FILE, format_series(&ds, &sim)),
        ],
    )
}

pub fn run_synth(args: &RunArgs) -> Result<Vec<PathBuf>> {
    let cfg = load_config(args)?;
    let spec = cfg
        .scenario
        .ok_or_else(|| EdmError::Config("a [scenario] section is required".into()))?;
    let ds = synth::generate(&spec)?;
    info!("generated {} samples for scenario `{}`", ds.len(), spec.label);
    write_all(&args.out, vec![(DATASET_FILE, io::format_dataset(&ds))])
}

fn scenario_label(ds: &Dataset) -> String {
    if ds.meta.scenario.is_empty() {
        "-".to_string()
    } else {
        ds.meta.scenario.clone()
    }
}

/// One row per window: scenario, window, samples, σ in W/var and kW/kvar.
pub fn format_rmse_table(rows: &[(String, RmseReport)]) -> String {
    let mut s = String::from("scenario\twindow\tn_samples\tsigma_p_w\tsigma_q_var\tsigma_p_kw\tsigma_q_kvar\n");
    for (label, r) in rows {
        let _ = writeln!(
            s,
            "{label}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.4}\t{:.4}",
            r.window,
            r.n_samples,
            r.sigma_p,
            r.sigma_q,
            r.sigma_p / 1e3,
            r.sigma_q / 1e3
        );
    }
    s
}

/// One row per (model, dataset) pair.
pub fn format_cross_table(rows: &[(String, String, RmseReport)]) -> String {
    let mut s = String::from("model\tdataset\tn_samples\tsigma_p_w\tsigma_q_var\tsigma_p_kw\tsigma_q_kvar\n");
    for (model, data, r) in rows {
        let _ = writeln!(
            s,
            "{model}\t{data}\t{}\t{:.6e}\t{:.6e}\t{:.4}\t{:.4}",
            r.n_samples,
            r.sigma_p,
            r.sigma_q,
            r.sigma_p / 1e3,
            r.sigma_q / 1e3
        );
    }
    s
}

/// Measured and simulated powers per sample.
pub fn format_series(ds: &Dataset, sim: &SimResult) -> String {
    let mut s = String::from("t_s,p_w,q_var,p_hat_w,q_hat_var\n");
    for k in 0..ds.len() {
        let _ = writeln!(s, "{},{},{},{},{}", ds.trace.time(k), ds.p[k], ds.q[k], sim.p_hat[k], sim.q_hat[k]);
    }
    s
}

/// `[theta]` table readable by [`RunConfig`].
pub fn format_theta(theta: &Theta) -> String {
    let mut t = toml::Table::new();
    for id in ParamId::ALL {
        t.insert(id.name().into(), toml::Value::Float(theta.get(id)));
    }
    t.insert("omega_n".into(), toml::Value::Float(theta.sm.omega_n));
    let mut root = toml::Table::new();
    root.insert("theta".into(), toml::Value::Table(t));
    toml::to_string(&root).expect("theta serializes")
}

/// Identified parameters followed by a `[fit]` summary.
pub fn format_fit(fit: &FitReport) -> String {
    let mut t = toml::Table::new();
    let f = |x: f64| toml::Value::Float(x);
    t.insert("objective".into(), f(fit.objective_value));
    t.insert("iterations".into(), toml::Value::Integer(fit.iterations as i64));
    t.insert("converged".into(), toml::Value::Boolean(fit.converged));
    t.insert("hit_max_iter".into(), toml::Value::Boolean(fit.hit_max_iter));
    t.insert("first_order_optimality".into(), f(fit.first_order_optimality));
    t.insert("constraint_violation".into(), f(fit.constraint_violation));
    t.insert("n_samples".into(), toml::Value::Integer(fit.n_samples as i64));
    t.insert("p0_w".into(), f(fit.normalization.p0));
    t.insert("q0_var".into(), f(fit.normalization.q0));
    t.insert("best_start".into(), toml::Value::Integer(fit.best_start as i64));
    let strings = |v: Vec<String>| toml::Value::Array(v.into_iter().map(toml::Value::String).collect());
    t.insert("active_bounds".into(), strings(fit.active_bounds.clone()));
    t.insert(
        "free_parameters".into(),
        strings(fit.free_parameters.iter().map(|p| p.name().to_string()).collect()),
    );
    t.insert(
        "start_objectives".into(),
        toml::Value::Array(fit.start_objectives.iter().map(|o| f(o.unwrap_or(f64::NAN))).collect()),
    );
    let mut root = toml::Table::new();
    root.insert("fit".into(), toml::Value::Table(t));
    format!("{}\n{}", format_theta(&fit.theta_star), toml::to_string(&root).expect("fit serializes"))
}
