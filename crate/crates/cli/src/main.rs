use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use picard_op::{parse_seeds, resolve_output_dir, run, ExperimentConfig, HarnessError};

#[derive(Parser, Debug)]
#[command(name = "picard-op", version, about = "Run a Picard operator experiment")]
struct Cli {
    /// Scenario name, e.g. truncation-decay, or `validate`
    scenario: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides OUTPUT_DIR and the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list replacing the config's
    #[arg(long)]
    seeds: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, HarnessError> {
    if !picard_op::SCENARIOS.contains(&cli.scenario.as_str()) {
        return Err(HarnessError::UnknownScenario(cli.scenario.clone()));
    }
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seeds) = &cli.seeds {
        cfg.seeds = parse_seeds(seeds)?;
    }
    let outcome = run(&cli.scenario, &cfg)?;
    if cli.scenario == "validate" {
        for ineq in cfg.params.inequalities() {
            println!("{ineq}");
        }
    }
    let env = std::env::var("OUTPUT_DIR").ok();
    let dir = resolve_output_dir(cli.out.as_deref(), env.as_deref(), &cfg).join(&cli.scenario);
    outcome.write(&dir)?;
    for check in &outcome.checks {
        let verdict = if check.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {}: {}", check.name, check.detail);
    }
    println!("wrote {}", dir.display());
    Ok(outcome.passed())
}
