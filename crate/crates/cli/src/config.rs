//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use picard_core::data::InitialLaw;
use picard_core::nonlinearity::Nonlinearity;
use picard_core::picard::PicardParams;
use picard_core::spectral::GridSpec;
use serde::Deserialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub dim: usize,
    pub points_per_axis: usize,
    pub time_nodes: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub nonlinearity: String,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            nonlinearity: "sin(a=0.5)".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    /// Catalog specs, e.g. `sin(a=0.5)`.
    pub members: Vec<String>,
    /// Extra members: jittered knot tables of the truth's `rho`.
    pub perturbed: usize,
    pub perturb_scale: f64,
}

/// Scenario knobs; each scenario reads the ones it needs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub depths: Vec<usize>,
    pub nonlinearities: Vec<String>,
    pub ref_tol: f64,
    pub max_ratio: f64,
    /// Ratios are only checked while the previous error is above this floor.
    pub ratio_floor: f64,
    pub oracle_tol: f64,
    pub fixed_point_tol: f64,
    pub test_size: usize,
    pub pairs: usize,
    pub eta: f64,
    pub etas: Vec<f64>,
    pub ranks: Vec<usize>,
    pub sensors: Vec<usize>,
    pub n_mc: usize,
    pub slope_range: [f64; 2],
    pub n: usize,
    pub q: usize,
    pub n_test: usize,
    pub q_test: usize,
    pub rho: f64,
    pub c: f64,
    pub min_pass_fraction: f64,
    pub draws: usize,
    pub rademacher_sizes: Vec<usize>,
    pub rademacher_depth: usize,
    pub rademacher_spread: f64,
    pub budget_sizes: Vec<usize>,
    pub beta: Option<f64>,
    pub alpha: f64,
    pub kappa: usize,
    pub rollouts: usize,
    pub contraction_pairs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            depths: (1..=10).collect(),
            nonlinearities: Vec::new(),
            ref_tol: 1e-13,
            max_ratio: 0.30,
            ratio_floor: 1e-12,
            oracle_tol: 1e-10,
            fixed_point_tol: 1e-8,
            test_size: 16,
            pairs: 200,
            eta: 0.01,
            etas: vec![0.1, 0.01, 0.001],
            ranks: vec![4, 8, 16, 32],
            sensors: vec![8, 16, 32, 64, 128],
            n_mc: 200,
            slope_range: [-3.5, -2.5],
            n: 128,
            q: 4,
            n_test: 256,
            q_test: 16,
            rho: 0.1,
            c: 1.0,
            min_pass_fraction: 0.85,
            draws: 400,
            rademacher_sizes: vec![32, 128, 512],
            rademacher_depth: 4,
            rademacher_spread: 0.30,
            budget_sizes: vec![1, 10, 100, 1_000, 10_000, 100_000],
            beta: None,
            alpha: 0.0,
            kappa: 8,
            rollouts: 4,
            contraction_pairs: 32,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub grid: GridConfig,
    pub params: PicardParams,
    #[serde(default)]
    pub law: Option<InitialLaw>,
    #[serde(default)]
    pub truth: TruthConfig,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub run: RunConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    /// Parses TOML text; errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            HarnessError::Parse(msg) => HarnessError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(
            self.grid.dim,
            self.grid.points_per_axis,
            self.grid.time_nodes,
        )?)
    }

    pub fn law(&self) -> Result<InitialLaw> {
        self.law
            .ok_or_else(|| HarnessError::Config("this scenario needs a [law] section".into()))
    }

    pub fn truth(&self) -> Result<Nonlinearity> {
        Ok(Nonlinearity::parse(
            &self.truth.nonlinearity,
            self.params.m,
            self.params.l,
        )?)
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    /// Checks everything that can be checked without running a scenario.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let grid = self.grid()?;
        if self.params.rank > 0 {
            grid.check_rank(self.params.rank)?;
        }
        if let Some(law) = &self.law {
            law.validate(&grid)?;
            if law.radius > self.params.r {
                return Err(HarnessError::Config(format!(
                    "law sup radius {} exceeds R = {}",
                    law.radius, self.params.r
                )));
            }
        }
        self.truth()?;
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seed list is empty".into()));
        }
        Ok(())
    }
}

/// Catalog members scaled so that each has Lipschitz constant `l` on `[-m, m]`.
pub fn scaled_catalog(m: f64, l: f64) -> Vec<String> {
    let cubic = 3.0 * m * m;
    vec![
        "zero".into(),
        format!("linear(a={l})"),
        format!("sin(a={l})"),
        format!("tanh(a={l})"),
        format!("exp_minus_one(a={})", l / m.exp()),
        format!("allen_cahn(a={})", l / (1.0 - cubic).abs().max(1.0)),
        format!("power(lambda={},p=3)", l / cubic),
        format!("defocusing(alpha={},beta={},p=3)", l / 2.0, l / (2.0 * cubic)),
    ]
}
