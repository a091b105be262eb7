//! Builds a run configuration in code, writes it as JSON and drives the
//! command-line runner with it, as `micz simulate --config ...` would.
//!
//! ```bash
//! cargo run --release --example run_config
//! ```

use micz::cli::{self, Args, DyonEntry, FamilyName, InitialState, IntegratorConfig, MetricConfig, Mode, RunConfig, SystemConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = RunConfig {
        mode: Some(Mode::Simulate),
        system: SystemConfig {
            family: FamilyName::StarkZeemanParabolic,
            e: 1.0,
            dyons: vec![DyonEntry { position: [0.0; 3], g: 0.7, q: -1.0, string_dir: None }],
            b0: [0.0, 0.0, 0.05],
            e0: [0.0, 0.0, 0.02],
            metric: MetricConfig::Flat,
        },
        initial: Some(InitialState { t: 0.0, r: [1.0, 0.0, 0.3], v: [0.1, 0.7, 0.2] }),
        t_end: Some(30.0),
        integrator: IntegratorConfig::default(),
        stride: Some(5),
        out_dir: None,
        sweep: None,
        green: None,
    };
    let dir = std::env::temp_dir().join("micz-run-config-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config)?)?;

    let args = Args { mode: Mode::Simulate, config: path, out: Some(dir.clone()), stride: None, quiet: false };
    println!("{}", cli::run(&args)?);
    let csv = std::fs::read_to_string(dir.join("trajectory.csv"))?;
    for line in csv.lines().take(3) {
        println!("{line}");
    }
    println!("{}", std::fs::read_to_string(dir.join("report.json"))?);
    Ok(())
}
