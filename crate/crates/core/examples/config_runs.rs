//! Config-driven runs, the same path the `elapsed-lab` binary takes.
//!
//! Run with `cargo run --release --example config_runs`.

use time_elapsed::config::ExperimentConfig;
use time_elapsed::experiments::{run, Command, RunOptions};

const CONFIG: &str = r#"
eps = [0.1, 0.3]
t_final = 30.0
seed = 7

[rate]
kind = "soft_sigmoid"
a0 = 1.0
a1 = 2.0
lx = 1.0
lmu = 1.0

[grid]
x_max = 30.0
n = 300

[basin]
amplitudes = [0.25, 0.5, 0.75, 0.95]
shape = "bump"
"#;

fn main() -> time_elapsed::Result<()> {
    let config = ExperimentConfig::from_toml_str(CONFIG)?;
    let root = std::env::temp_dir().join("elapsed-lab-example");
    for command in [Command::Steady, Command::Basin, Command::Check] {
        let opts = RunOptions {
            out: Some(root.join(command.name())),
            workers: Some(1),
            seed: None,
        };
        let manifest = run(command, &config, &opts)?;
        println!(
            "{:<7} {} files, {}/{} checks, config {}",
            command.name(),
            manifest.files.len(),
            manifest.checks.iter().filter(|c| c.passed).count(),
            manifest.checks.len(),
            &manifest.config_hash[..12]
        );
    }
    let basin = std::fs::read_to_string(root.join("basin").join("basin.csv"))?;
    print!("\n{basin}");
    Ok(())
}
