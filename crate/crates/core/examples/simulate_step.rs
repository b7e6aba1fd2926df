//! Replays a -0.01 pu grid frequency step through the scenario 3 model and
//! prints the swing of the PCC powers.

use microgrid_edm::reference;
use microgrid_edm::simulator::{self, SimOptions, Trace};

fn main() -> microgrid_edm::Result<()> {
    let theta = reference::scenario("3").expect("known scenario");
    let x0 = simulator::steady_state(&theta, 1.0, 1.0)?;
    println!(
        "steady state: e' = {:.5} pu, delta = {:.3} deg",
        x0.e_s_prime,
        x0.delta_s.to_degrees()
    );

    let n = 300;
    let omega = (0..n).map(|k| if k < 50 { 1.0 } else { 0.99 }).collect();
    let trace = Trace::new(0.0, 0.02, vec![1.0; n], omega)?;
    let sim = simulator::simulate(&theta, &trace, x0, &SimOptions::default())?;

    println!("{:>6} {:>11} {:>11}", "t_s", "p_w", "q_var");
    for k in (40..150).step_by(5) {
        println!("{:>6.2} {:>11.1} {:>11.1}", sim.time(k), sim.p_hat[k], sim.q_hat[k]);
    }
    Ok(())
}
