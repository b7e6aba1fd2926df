//! Generates a noisy synthetic measurement set for scenario 4e and writes it
//! as CSV. Pass an output path, otherwise `scenario_4e.csv` in the temp dir.

use std::path::PathBuf;

use microgrid_edm::io;
use microgrid_edm::reference;
use microgrid_edm::synth::{self, Excitation, ScenarioSpec};

fn main() -> microgrid_edm::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("scenario_4e.csv"));

    let mut spec = ScenarioSpec::new("4e", reference::scenario("4e").expect("known scenario"));
    spec.duration = 60.0;
    spec.noise_p = 100.0;
    spec.noise_q = 100.0;
    spec.seed = 11;
    spec.excitation = Excitation::Composite(vec![
        Excitation::default_steps(),
        Excitation::RandomWalk {
            std_v: 0.0005,
            std_omega: 0.0002,
            tau: 2.0,
        },
    ]);
    let ds = synth::generate(&spec)?;
    io::write_dataset(&path, &ds)?;

    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    println!("{} samples at dt = {} s -> {}", ds.len(), ds.dt(), path.display());
    println!("mean P = {:.1} W, mean Q = {:.1} var", mean(&ds.p), mean(&ds.q));
    Ok(())
}
