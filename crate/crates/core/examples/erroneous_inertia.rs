//! Starts the machine inertia an order of magnitude too high (H = 5 s) with
//! a wide box, once from a single start and once with four restarts.

use microgrid_edm::identification::{identify, ConstraintConfig, InitSpec, SolverOptions};
use microgrid_edm::model::ParamId;
use microgrid_edm::reference;
use microgrid_edm::synth::{self, ScenarioSpec};
use microgrid_edm::validation;

fn main() -> microgrid_edm::Result<()> {
    let truth = reference::scenario("3").expect("known scenario");
    let mut spec = ScenarioSpec::new("3", truth);
    spec.noise_p = 100.0;
    spec.noise_q = 100.0;
    spec.seed = 2;
    let ds = synth::generate(&spec)?;
    let (id, _) = validation::split(&ds)?;

    let init = InitSpec::uniform(truth, 30.0).with(ParamId::Hs, 5.0, 100.0);
    for restarts in [0, 4] {
        let opts = SolverOptions {
            restarts,
            seed: 7,
            ..SolverOptions::default()
        };
        let fit = identify(&id, &init, &ConstraintConfig::default(), &opts)?;
        println!(
            "restarts {restarts}: H = {:.3} s (true {:.2}), objective {:.4e}, best start {}",
            fit.theta_star.sm.h_s, truth.sm.h_s, fit.objective_value, fit.best_start
        );
    }
    Ok(())
}
