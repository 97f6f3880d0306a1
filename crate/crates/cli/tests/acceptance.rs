//! Runs every acceptance criterion against the shipped configs and prints one
//! PASS/FAIL line each. Exits nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use picard_op::{run, ExperimentConfig, Outcome};

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    body: fn() -> Result<Vec<String>, String>,
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).expect("shipped config parses")
}

fn scenario(name: &str, text: &str) -> Result<Vec<String>, String> {
    let outcome = run(name, &config(text)).map_err(|e| e.to_string())?;
    report(&outcome)
}

fn report(outcome: &Outcome) -> Result<Vec<String>, String> {
    let lines: Vec<String> = outcome
        .checks
        .iter()
        .map(|c| format!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail))
        .collect();
    if outcome.passed() {
        Ok(lines)
    } else {
        Err(lines.join("\n      "))
    }
}

fn truncation() -> Result<Vec<String>, String> {
    scenario("truncation-decay", include_str!("../../../configs/truncation-decay.toml"))
}

fn linear_oracle() -> Result<Vec<String>, String> {
    scenario("linear-oracle", include_str!("../../../configs/linear-oracle.toml"))
}

fn contraction() -> Result<Vec<String>, String> {
    scenario("contraction-audit", include_str!("../../../configs/contraction-audit.toml"))
}

fn implementation() -> Result<Vec<String>, String> {
    scenario("implementation-error", include_str!("../../../configs/implementation-error.toml"))
}

fn rho_cert() -> Result<Vec<String>, String> {
    scenario("rho-certification", include_str!("../../../configs/rho-certification.toml"))
}

fn reconstruction() -> Result<Vec<String>, String> {
    scenario("reconstruction-rate", include_str!("../../../configs/reconstruction-rate.toml"))
}

fn generalization() -> Result<Vec<String>, String> {
    let cfg = config(include_str!("../../../configs/erm-generalization.toml"));
    if cfg.seeds.len() != 20 || cfg.run.n != 128 || cfg.run.q != 4 {
        return Err("config must use 20 seeds, n = 128, q = 4".into());
    }
    let outcome = run("erm-generalization", &cfg).map_err(|e| e.to_string())?;
    let family = outcome.metrics["family_size"];
    if family != 16.0 {
        return Err(format!("family has {family} members, expected 16"));
    }
    let mut lines = report(&outcome)?;
    lines.push(format!("     C_min = {:.4}", outcome.metrics["c_min"]));
    Ok(lines)
}

fn rollout() -> Result<Vec<String>, String> {
    scenario("rollout-propagation", include_str!("../../../configs/rollout-propagation.toml"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("picard-acceptance-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let p = e.expect("entry").path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).expect("readable"),
            )
        })
        .collect();
    out.sort();
    out
}

/// Compares two dataset CSVs: comments and text fields exactly, numbers to `tol`.
fn dataset_diff(a: &str, b: &str, tol: f64) -> Result<f64, String> {
    let la: Vec<&str> = a.lines().collect();
    let lb: Vec<&str> = b.lines().collect();
    if la.len() != lb.len() {
        return Err(format!("line count {} vs {}", la.len(), lb.len()));
    }
    let mut worst = 0.0f64;
    for (k, (x, y)) in la.iter().zip(&lb).enumerate() {
        if x.starts_with('#') || k <= 1 {
            if x != y {
                return Err(format!("line {}: `{x}` vs `{y}`", k + 1));
            }
            continue;
        }
        for (fx, fy) in x.split(',').zip(y.split(',')) {
            match (fx.parse::<f64>(), fy.parse::<f64>()) {
                (Ok(u), Ok(v)) => worst = worst.max((u - v).abs()),
                _ if fx == fy => {}
                _ => return Err(format!("line {}: `{fx}` vs `{fy}`", k + 1)),
            }
        }
    }
    if worst > tol {
        return Err(format!("largest numeric difference {worst:.3e} > {tol:.0e}"));
    }
    Ok(worst)
}

fn determinism() -> Result<Vec<String>, String> {
    let mut lines = Vec::new();
    for (name, text) in [
        ("export-dataset", include_str!("../../../configs/export-dataset.toml")),
        ("truncation-decay", include_str!("../../../configs/truncation-decay.toml")),
        ("rho-certification", include_str!("../../../configs/rho-certification.toml")),
    ] {
        let cfg = config(text);
        let dirs = [scratch(&format!("{name}-a")), scratch(&format!("{name}-b"))];
        for d in &dirs {
            run(name, &cfg).map_err(|e| e.to_string())?.write(d).map_err(|e| e.to_string())?;
        }
        let (a, b) = (files(&dirs[0]), files(&dirs[1]));
        for d in &dirs {
            let _ = std::fs::remove_dir_all(d);
        }
        if a != b {
            return Err(format!("{name}: repeated runs differ"));
        }
        lines.push(format!("ok   {name}: {} files byte-identical", a.len()));
    }
    let cfg = config(include_str!("../../../configs/export-dataset.toml"));
    let outcome = run("export-dataset", &cfg).map_err(|e| e.to_string())?;
    let fresh = outcome.tables[0].to_csv().map_err(|e| e.to_string())?;
    let worst = dataset_diff(&fresh, include_str!("data/golden_dataset.csv"), 1e-10)?;
    lines.push(format!("ok   golden dataset: largest difference {worst:.1e}"));
    Ok(lines)
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, title: "geometric truncation decay", budget: Duration::from_secs(10), body: truncation },
        Criterion { id: 2, title: "closed-form linear oracle", budget: Duration::from_secs(1), body: linear_oracle },
        Criterion { id: 3, title: "contraction audit", budget: Duration::from_secs(30), body: contraction },
        Criterion { id: 4, title: "implementation-error decay", budget: Duration::from_secs(60), body: implementation },
        Criterion { id: 5, title: "rho certification", budget: Duration::from_secs(5), body: rho_cert },
        Criterion { id: 6, title: "reconstruction rate", budget: Duration::from_secs(60), body: reconstruction },
        Criterion { id: 7, title: "generalization-bound validity", budget: Duration::from_secs(300), body: generalization },
        Criterion { id: 8, title: "rollout propagation", budget: Duration::from_secs(120), body: rollout },
        Criterion { id: 9, title: "determinism and serialization", budget: Duration::from_secs(10), body: determinism },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.title.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = (c.body)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let passed = result.is_ok() && in_time;
        failed += usize::from(!passed);
        println!(
            "{} criterion {}: {} ({:.2} s, budget {} s)",
            if passed { "PASS" } else { "FAIL" },
            c.id,
            c.title,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
        match result {
            Ok(lines) => lines.iter().for_each(|l| println!("      {l}")),
            Err(e) => println!("      {e}"),
        }
        if !in_time {
            println!("      over the runtime budget");
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
