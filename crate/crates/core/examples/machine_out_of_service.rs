//! Scenario 5 has no machine in service. Identification then only fits the
//! static ZIP and droop part and leaves the machine block frozen. With small
//! voltage steps the split between the ZIP shares is weakly determined, the
//! outputs are not.

use microgrid_edm::identification::{identify, ConstraintConfig, InitSpec, SolverOptions};
use microgrid_edm::reference;
use microgrid_edm::synth::{self, ScenarioSpec};
use microgrid_edm::validation::{self, EvalOptions};

fn main() -> microgrid_edm::Result<()> {
    let truth = reference::scenario("5").expect("known scenario");
    let mut spec = ScenarioSpec::new("5", truth);
    spec.noise_p = 100.0;
    spec.noise_q = 100.0;
    spec.seed = 5;
    let ds = synth::generate(&spec)?;
    let (id, _) = validation::split(&ds)?;

    let mut theta0 = truth;
    theta0.v.p_z += 500.0;
    theta0.v.q_z -= 300.0;
    theta0.w.d_p *= 1.5;
    let init = InitSpec::chp_out_of_service(theta0, 50.0);
    let fit = identify(&id, &init, &ConstraintConfig::default(), &SolverOptions::default())?;

    let names: Vec<_> = fit.free_parameters.iter().map(|p| p.to_string()).collect();
    println!("free parameters: {}", names.join(", "));
    println!("P_Z {:9.1} W   (true {:9.1})", fit.theta_star.v.p_z, truth.v.p_z);
    println!("Q_Z {:9.1} var (true {:9.1})", fit.theta_star.v.q_z, truth.v.q_z);
    println!("D_P {:9.1} W/pu (true {:9.1})", fit.theta_star.w.d_p, truth.w.d_p);
    let (_, val) = validation::evaluate(&fit.theta_star, &ds, &EvalOptions::default())?;
    println!("validation sigma_p {:.2} W, sigma_q {:.2} var", val.sigma_p, val.sigma_q);
    Ok(())
}
