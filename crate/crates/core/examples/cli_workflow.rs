//! Drives the `edm` command pipeline in-process: synth, identify, validate
//! and cross-validate against a TOML run configuration.

use std::fs;

use microgrid_edm::cli::{self, main_with_args};

const CONFIG: &str = r#"
[theta]
reference = "4"

[init]
profile = "chp-in"
tol_pct = 30

[solver]
restarts = 2
seed = 3

[scenario]
label = "4"
duration_s = 30
noise_p_w = 100
noise_q_var = 100
"#;

fn main() {
    let dir = std::env::temp_dir().join("edm-cli-workflow");
    fs::create_dir_all(&dir).expect("temp dir");
    let cfg = dir.join("sc4.toml");
    fs::write(&cfg, CONFIG).expect("config");
    let (cfg, dir) = (cfg.to_str().unwrap(), dir.to_str().unwrap());
    let data = format!("{dir}/data/{}", cli::DATASET_FILE);
    let fit = format!("{dir}/fit/{}", cli::FIT_FILE);

    let steps: [&[&str]; 4] = [
        &["synth", "--config", cfg, "--out", &format!("{dir}/data")],
        &["identify", "--config", cfg, "--dataset", &data, "--out", &format!("{dir}/fit")],
        &["validate", "--config", &fit, "--dataset", &data, "--out", &format!("{dir}/val")],
        &["cross-validate", "--config", &fit, "--dataset", &data, "--out", &format!("{dir}/cross")],
    ];
    for args in steps {
        let code = main_with_args(std::iter::once("edm").chain(args.iter().copied()));
        println!("edm {} -> exit {code}", args[0]);
        if code != 0 {
            std::process::exit(code);
        }
    }
    print!("{}", fs::read_to_string(format!("{dir}/val/{}", cli::RMSE_FILE)).unwrap());
}
