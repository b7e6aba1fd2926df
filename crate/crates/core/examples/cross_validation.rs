//! Applies each reference model to every other scenario's data and prints
//! the full-window RMSE matrix in kW.

use microgrid_edm::reference;
use microgrid_edm::simulator::SimOptions;
use microgrid_edm::synth::{self, ScenarioSpec};
use microgrid_edm::validation;

const LABELS: [&str; 4] = ["3", "4", "4e", "8"];

fn main() -> microgrid_edm::Result<()> {
    let data = LABELS
        .iter()
        .map(|&l| {
            let mut spec = ScenarioSpec::new(l, reference::scenario(l).expect("known scenario"));
            spec.noise_p = 100.0;
            spec.noise_q = 100.0;
            synth::generate(&spec)
        })
        .collect::<microgrid_edm::Result<Vec<_>>>()?;

    print!("{:>8}", "model");
    for l in LABELS {
        print!("{l:>10}");
    }
    println!();
    for m in LABELS {
        let theta = reference::scenario(m).expect("known scenario");
        print!("{m:>8}");
        for ds in &data {
            let r = validation::cross_validate(&theta, ds, &SimOptions::default())?;
            print!("{:>10.3}", r.sigma_p / 1000.0);
        }
        println!();
    }
    Ok(())
}
