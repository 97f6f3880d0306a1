//! Scenario runners. Each returns an [`Outcome`] holding its tables, checks and metrics.

use std::sync::Arc;

use picard_core::data::{reconstruction_error, sample_initial, sample_range, InitialLaw, SensorSet};
use picard_core::nonlinearity::{build_rho, certify_rho, Nonlinearity, NonlinearityKind};
use picard_core::picard::{implementation_error, PicardModel, PicardParams};
use picard_core::risk::{
    bound_rhs, default_beta, empirical_risk, erm, make_dataset, make_dataset_range,
    perturbed_tables, plan_budget, prediction_table, rademacher_bound, rademacher_mc,
    BoundInputs, CandidateFamily,
};
use picard_core::rollout::{
    dissipative_ceiling, rollout, stability_envelope, terminal_contraction, EnvelopeMode,
};
use picard_core::semigroup::{Propagator, SemigroupKind};
use picard_core::spectral::{GridSpec, TorusField, TrajectoryField};
use picard_core::PicardError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{scaled_catalog, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::output::{Outcome, Table};

pub const SCENARIOS: [&str; 11] = [
    "truncation-decay",
    "linear-oracle",
    "contraction-audit",
    "implementation-error",
    "rho-certification",
    "reconstruction-rate",
    "erm-generalization",
    "depth-sensor-plan",
    "rollout-propagation",
    "export-dataset",
    "validate",
];

/// Held-out blocks are drawn from this stream offset so they never overlap training blocks.
pub const HELD_OUT_OFFSET: u64 = 1 << 40;

/// Seed for the jittered family members; fixed so the family does not change across seeds.
const FAMILY_SEED: u64 = 0x5eed;

/// Runs `name` against `cfg`. Every scenario except `validate` first validates the config.
pub fn run(name: &str, cfg: &ExperimentConfig) -> Result<Outcome> {
    if !SCENARIOS.contains(&name) {
        return Err(HarnessError::UnknownScenario(name.to_string()));
    }
    if name == "validate" {
        return Ok(validate(cfg));
    }
    cfg.validate()?;
    match name {
        "truncation-decay" => truncation_decay(cfg),
        "linear-oracle" => linear_oracle(cfg),
        "contraction-audit" => contraction_audit(cfg),
        "implementation-error" => implementation_scan(cfg),
        "rho-certification" => rho_certification(cfg),
        "reconstruction-rate" => reconstruction_rate(cfg),
        "erm-generalization" => erm_generalization(cfg),
        "depth-sensor-plan" => depth_sensor_plan(cfg),
        "rollout-propagation" => rollout_propagation(cfg),
        "export-dataset" => export_dataset(cfg),
        _ => unreachable!("checked above"),
    }
}

fn nonlinearity_specs(cfg: &ExperimentConfig) -> Vec<String> {
    if cfg.run.nonlinearities.is_empty() {
        vec![cfg.truth.nonlinearity.clone()]
    } else {
        cfg.run.nonlinearities.clone()
    }
}

fn catalog_specs(cfg: &ExperimentConfig) -> Vec<String> {
    if cfg.run.nonlinearities.is_empty() {
        scaled_catalog(cfg.params.m, cfg.params.l)
    } else {
        cfg.run.nonlinearities.clone()
    }
}

fn parse_f(cfg: &ExperimentConfig, spec: &str) -> Result<Nonlinearity> {
    Ok(Nonlinearity::parse(spec, cfg.params.m, cfg.params.l)?)
}

fn samples(law: &InitialLaw, grid: &GridSpec, seed: u64, count: usize) -> Result<Vec<TorusField>> {
    Ok(sample_initial(&law.with_seed(seed), grid, count)?)
}

fn ok_or_fail(passed: bool) -> &'static str {
    if passed { "ok" } else { "FAILED" }
}

fn validate(cfg: &ExperimentConfig) -> Outcome {
    let mut out = Outcome::new("validate", cfg.seeds());
    let mut table = Table::new("inequalities", &["inequality", "lhs", "op", "rhs", "holds"]);
    for ineq in cfg.params.inequalities() {
        table.push(vec![
            ineq.name.into(),
            ineq.lhs.into(),
            (if ineq.strict { "<" } else { "<=" }).into(),
            ineq.rhs.into(),
            ineq.holds.into(),
        ]);
        out.check(ineq.name, ineq.holds, ineq.to_string());
    }
    out.tables.push(table);
    if cfg.params.validate().is_ok() {
        let rest = cfg.validate();
        out.check(
            "grid, law and truth",
            rest.is_ok(),
            rest.err().map_or_else(|| "ok".to_string(), |e| e.to_string()),
        );
    }
    out
}

fn truncation_decay(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let law = cfg.law()?;
    let params = cfg.params;
    let run = &cfg.run;
    let mut out = Outcome::new("truncation-decay", cfg.seeds());
    let mut table = Table::new(
        "truncation",
        &["seed", "nonlinearity", "ell", "measured_error", "bound", "ratio", "ratio_checked"],
    );
    let max_depth = run.depths.iter().copied().max().unwrap_or(0);
    let mut bound_ok = true;
    let mut ratio_ok = true;
    let mut worst_ratio = 0.0f64;
    let mut worst_slack = f64::NEG_INFINITY;
    for &seed in cfg.seeds() {
        let u0s = samples(&law, &grid, seed, run.test_size)?;
        for spec in nonlinearity_specs(cfg) {
            let model = PicardModel::exact(grid, params, parse_f(cfg, &spec)?)?;
            let mut errors = vec![0.0f64; max_depth + 1];
            for u0 in &u0s {
                let reference = model.solve_fixed_point(u0, run.ref_tol)?.solution;
                for (ell, it) in model.iterates(u0, max_depth)?.iter().enumerate() {
                    errors[ell] = errors[ell].max(it.distance(&reference)?);
                }
            }
            let mut prev: Option<f64> = None;
            for &ell in &run.depths {
                let err = errors[ell];
                let bound = params.truncation_bound(ell);
                bound_ok &= err <= bound;
                worst_slack = worst_slack.max(err - bound);
                let (ratio, checked) = match prev {
                    Some(p) if p > 0.0 => (err / p, p > run.ratio_floor),
                    _ => (f64::NAN, false),
                };
                if checked {
                    worst_ratio = worst_ratio.max(ratio);
                    ratio_ok &= ratio <= run.max_ratio;
                }
                table.push(vec![
                    seed.into(),
                    spec.as_str().into(),
                    ell.into(),
                    err.into(),
                    bound.into(),
                    ratio.into(),
                    checked.into(),
                ]);
                prev = Some(err);
            }
        }
    }
    out.check(
        "measured error <= M delta^ell / (1 - delta)",
        bound_ok,
        format!("largest error - bound = {worst_slack:.3e}"),
    );
    out.check(
        "successive ratios <= max_ratio",
        ratio_ok,
        format!(
            "largest checked ratio {worst_ratio:.4} (limit {}, floor {:.0e})",
            run.max_ratio, run.ratio_floor
        ),
    );
    out.metric("max_checked_ratio", worst_ratio);
    out.metric("max_bound_slack", worst_slack);
    out.tables.push(table);
    Ok(out)
}

fn linear_oracle(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let params = cfg.params;
    let run = &cfg.run;
    let f = cfg.truth()?;
    let a = match f.kind() {
        NonlinearityKind::Linear { a } => *a,
        _ => {
            return Err(HarnessError::Config(
                "linear-oracle needs a linear truth, e.g. `linear(a=0.5)`".into(),
            ))
        }
    };
    let value = params.r;
    let u0 = TorusField::constant(grid, value);
    let model = PicardModel::exact(grid, params, f)?;
    let times = grid.times(params.t);
    let zero_mode = |u: &TrajectoryField| -> Result<Vec<f64>> {
        u.slices()
            .iter()
            .map(|s| Ok(s.to_spectrum()?.coefficient(&vec![0; grid.dim()]).re))
            .collect()
    };
    let mut out = Outcome::new("linear-oracle", cfg.seeds());
    let mut table = Table::new("linear_oracle", &["ell", "taylor_degree", "max_abs_error"]);
    let max_depth = run.depths.iter().copied().max().unwrap_or(0);
    let iterates = model.iterates(&u0, max_depth)?;
    let mut worst = 0.0f64;
    for &ell in &run.depths {
        // u^(0) = 0, so depth ell carries the Taylor terms of degree < ell
        let modes = zero_mode(&iterates[ell])?;
        let err = modes
            .iter()
            .zip(&times)
            .map(|(&u, &t)| {
                let mut term = value;
                let mut sum = 0.0;
                for k in 0..ell {
                    sum += term;
                    term *= a * t / (k + 1) as f64;
                }
                (u - sum).abs()
            })
            .fold(0.0, f64::max);
        worst = worst.max(err);
        table.push(vec![ell.into(), ell.saturating_sub(1).into(), err.into()]);
    }
    let fp = model.solve_fixed_point(&u0, run.ref_tol)?;
    let fp_err = zero_mode(&fp.solution)?
        .iter()
        .zip(&times)
        .map(|(&u, &t)| (u - value * (a * t).exp()).abs())
        .fold(0.0, f64::max);
    out.check(
        "iterates match Taylor partial sums",
        worst <= run.oracle_tol,
        format!("max error {worst:.3e} (tol {:.0e})", run.oracle_tol),
    );
    out.check(
        "fixed point matches exponential",
        fp_err <= run.fixed_point_tol,
        format!(
            "max error {fp_err:.3e} after {} iterations (tol {:.0e})",
            fp.iterations, run.fixed_point_tol
        ),
    );
    out.metric("taylor_max_error", worst);
    out.metric("fixed_point_error", fp_err);
    out.metric("fixed_point_iterations", fp.iterations as f64);
    out.tables.push(table);
    Ok(out)
}

/// Random trajectory with sup norm at most `m`: iid nodes when `rough`, a few
/// low space-time modes otherwise.
fn random_trajectory(grid: &GridSpec, horizon: f64, m: f64, rough: bool, rng: &mut ChaCha8Rng) -> TrajectoryField {
    if rough {
        let slices = (0..grid.time_nodes())
            .map(|_| {
                let values = (0..grid.len()).map(|_| rng.random_range(-m..=m)).collect();
                TorusField::from_values(*grid, values).expect("finite values")
            })
            .collect();
        return TrajectoryField::new(*grid, horizon, slices).expect("matching slices");
    }
    let terms: Vec<(f64, f64, [f64; 3], f64)> = (0..4)
        .map(|_| {
            let mut k = [0.0; 3];
            for kr in k.iter_mut().take(grid.dim()) {
                *kr = rng.random_range(-3i32..=3) as f64;
            }
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..std::f64::consts::TAU),
                k,
                rng.random_range(0.0..4.0),
            )
        })
        .collect();
    let raw = TrajectoryField::from_fn(*grid, horizon, |t, x| {
        terms
            .iter()
            .map(|(c, phase, k, w)| {
                let kx: f64 = x.iter().zip(k).map(|(a, b)| a * b).sum();
                c * (kx + w * t + phase).cos()
            })
            .sum()
    });
    let sup = raw.sup_norm();
    if sup == 0.0 {
        return raw;
    }
    let scale = m * rng.random_range(0.2..=1.0) / sup;
    raw.map(move |v| v * scale)
}

fn contraction_audit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let params = cfg.params;
    let run = &cfg.run;
    if params.rank == 0 {
        return Err(HarnessError::Config("contraction-audit needs params.rank > 0".into()));
    }
    let exact_prop = Arc::new(Propagator::new(grid, SemigroupKind::Exact, params.t)?);
    let fno_prop = Arc::new(Propagator::new(
        grid,
        SemigroupKind::Truncated { rank: params.rank },
        params.t,
    )?);
    let mut out = Outcome::new("contraction-audit", cfg.seeds());
    let mut table = Table::new(
        "contraction",
        &["seed", "nonlinearity", "kind", "pairs", "max_ratio", "data_ratio", "delta"],
    );
    let mut solution = Table::new(
        "solution_lipschitz",
        &["seed", "nonlinearity", "pairs", "max_ratio", "bound"],
    );
    let mut worst = 0.0f64;
    let mut worst_data = 0.0f64;
    let mut worst_solution = 0.0f64;
    let solution_bound = params.c_s / (1.0 - params.delta);
    for &seed in cfg.seeds() {
        let u0s = match &cfg.law {
            Some(law) => samples(law, &grid, seed, run.contraction_pairs.max(2))?,
            None => vec![TorusField::zeros(grid)],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // constant pairs of opposite sign attain the bound T*L for linear F
        let extremal = (
            TrajectoryField::constant(grid, params.t, params.m),
            TrajectoryField::constant(grid, params.t, -params.m),
        );
        let pairs: Vec<(TrajectoryField, TrajectoryField)> = std::iter::once(extremal)
            .chain((1..run.pairs).map(|k| {
                let rough = k % 2 == 0;
                let v = random_trajectory(&grid, params.t, params.m, rough, &mut rng);
                let w = random_trajectory(&grid, params.t, params.m, rough, &mut rng);
                (v, w)
            }))
            .collect();
        for spec in catalog_specs(cfg) {
            let f = parse_f(cfg, &spec)?;
            let rho = Nonlinearity::from_table(
                build_rho(&f, params.m, params.l, run.eta)?,
                format!("rho[{}]", f.tag()),
            );
            let exact = PicardModel::with_propagator(params, f, exact_prop.clone())?;
            let fno = PicardModel::with_propagator(params, rho, fno_prop.clone())?;
            for (kind, model) in [("exact", &exact), ("truncated", &fno)] {
                let mut ratio = 0.0f64;
                for (k, (v, w)) in pairs.iter().enumerate() {
                    let u0 = &u0s[k % u0s.len()];
                    let gap = v.distance(w)?;
                    if gap > 0.0 {
                        let d = model.picard_step(u0, v)?.distance(&model.picard_step(u0, w)?)?;
                        ratio = ratio.max(d / gap);
                    }
                }
                let mut data_ratio = 0.0f64;
                for (k, pair) in u0s.windows(2).enumerate() {
                    let gap = pair[0].distance(&pair[1])?;
                    if gap > 0.0 {
                        let v = &pairs[k % pairs.len()].0;
                        let d = model
                            .picard_step(&pair[0], v)?
                            .distance(&model.picard_step(&pair[1], v)?)?;
                        data_ratio = data_ratio.max(d / gap);
                    }
                }
                worst = worst.max(ratio);
                worst_data = worst_data.max(data_ratio);
                table.push(vec![
                    seed.into(),
                    spec.as_str().into(),
                    kind.into(),
                    run.pairs.into(),
                    ratio.into(),
                    data_ratio.into(),
                    params.delta.into(),
                ]);
            }
            let mut sol = 0.0f64;
            for pair in u0s.windows(2) {
                let gap = pair[0].distance(&pair[1])?;
                if gap > 0.0 {
                    let a = exact.solve_fixed_point(&pair[0], run.ref_tol)?.solution;
                    let b = exact.solve_fixed_point(&pair[1], run.ref_tol)?.solution;
                    sol = sol.max(a.distance(&b)? / gap);
                }
            }
            worst_solution = worst_solution.max(sol);
            solution.push(vec![
                seed.into(),
                spec.as_str().into(),
                u0s.len().saturating_sub(1).into(),
                sol.into(),
                solution_bound.into(),
            ]);
        }
    }
    out.check(
        "Picard map is delta-contractive in the trajectory",
        worst <= params.delta + 1e-6,
        format!("largest ratio {worst:.6} (delta {})", params.delta),
    );
    out.check(
        "Picard map is C_S-Lipschitz in the initial datum",
        worst_data <= params.c_s + 1e-8,
        format!("largest ratio {worst_data:.9} (C_S {})", params.c_s),
    );
    out.check(
        "solution map is C_S/(1 - delta)-Lipschitz",
        worst_solution <= solution_bound + 1e-8,
        format!("largest ratio {worst_solution:.6} (bound {solution_bound:.6})"),
    );
    out.metric("max_ratio", worst);
    out.metric("max_data_ratio", worst_data);
    out.metric("max_solution_ratio", worst_solution);
    out.tables.push(table);
    out.tables.push(solution);
    Ok(out)
}

fn implementation_scan(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let law = cfg.law()?;
    let params = cfg.params;
    let run = &cfg.run;
    let truth = cfg.truth()?;
    let rho_bound = params.rho_bound(params.ell, run.eta);
    let mut out = Outcome::new("implementation-error", cfg.seeds());
    let mut table = Table::new(
        "implementation_error",
        &["seed", "rank", "ell", "total", "rho_term", "fourier_term", "rho_bound"],
    );
    let mut ranks = run.ranks.clone();
    ranks.sort_unstable();
    let mut monotone = true;
    let mut final_ok = true;
    let mut rho_ok = true;
    let mut last_total = 0.0f64;
    let exact = PicardModel::exact(grid, params, truth.clone())?;
    for &seed in cfg.seeds() {
        let test_set = samples(&law, &grid, seed, run.test_size)?;
        let mut prev = f64::INFINITY;
        for &rank in &ranks {
            let fno = PicardModel::fno(grid, params.with_rank(rank), &truth, run.eta)?;
            let report = implementation_error(&exact, &fno, &test_set)?;
            monotone &= report.total <= prev;
            rho_ok &= report.rho_term <= rho_bound;
            prev = report.total;
            table.push(vec![
                seed.into(),
                rank.into(),
                params.ell.into(),
                report.total.into(),
                report.rho_term.into(),
                report.fourier_term.into(),
                rho_bound.into(),
            ]);
        }
        final_ok &= prev <= 2.0 * rho_bound;
        last_total = last_total.max(prev);
    }
    let top = ranks.last().copied().unwrap_or(0);
    out.check("error envelope non-increasing in rank", monotone, ok_or_fail(monotone));
    out.check(
        "largest-rank error <= 2 x rho term",
        final_ok,
        format!("N={top}: {last_total:.4e} vs 2 x {rho_bound:.4e}"),
    );
    out.check("rho term within its bound", rho_ok, ok_or_fail(rho_ok));
    out.metric("rho_bound", rho_bound);
    out.metric("largest_rank_total", last_total);
    out.tables.push(table);
    Ok(out)
}

fn rho_certification(cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = cfg.params;
    let run = &cfg.run;
    let mut out = Outcome::new("rho-certification", cfg.seeds());
    let mut table = Table::new(
        "rho_certification",
        &["nonlinearity", "eta", "sup_error", "max_slope", "knot_count", "mesh", "zero_exact", "knot_ratio"],
    );
    let mut etas = run.etas.clone();
    etas.sort_by(|a, b| b.total_cmp(a));
    let (mut sup_ok, mut zero_ok, mut slope_ok, mut ratio_ok) = (true, true, true, true);
    let mut ratio_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut worst_error = 0.0f64;
    for spec in catalog_specs(cfg) {
        let f = parse_f(cfg, &spec)?;
        let mut prev_knots: Option<usize> = None;
        for &eta in &etas {
            let rho = build_rho(&f, params.m, params.l, eta)?;
            let cert = certify_rho(&f, &rho);
            sup_ok &= cert.sup_error <= eta;
            zero_ok &= cert.zero_exact;
            slope_ok &= cert.max_slope <= params.l + 1e-12;
            worst_error = worst_error.max(cert.sup_error / eta);
            let ratio = prev_knots.map_or(f64::NAN, |p| cert.knot_count as f64 / p as f64);
            if ratio.is_finite() {
                ratio_ok &= (9.0..=11.0).contains(&ratio);
                ratio_range = (ratio_range.0.min(ratio), ratio_range.1.max(ratio));
            }
            prev_knots = Some(cert.knot_count);
            table.push(vec![
                spec.as_str().into(),
                eta.into(),
                cert.sup_error.into(),
                cert.max_slope.into(),
                cert.knot_count.into(),
                cert.mesh.into(),
                cert.zero_exact.into(),
                ratio.into(),
            ]);
        }
    }
    out.check("sup error <= eta", sup_ok, format!("largest error/eta {worst_error:.4}"));
    out.check("rho(0) = 0 exactly", zero_ok, ok_or_fail(zero_ok));
    out.check("slopes <= L", slope_ok, ok_or_fail(slope_ok));
    out.check(
        "knot count ratio per decade in [9, 11]",
        ratio_ok,
        format!("observed [{:.4}, {:.4}]", ratio_range.0, ratio_range.1),
    );
    out.metric("max_error_over_eta", worst_error);
    out.tables.push(table);
    Ok(out)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn reconstruction_rate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let law = cfg.law()?;
    let run = &cfg.run;
    let mut out = Outcome::new("reconstruction-rate", cfg.seeds());
    let mut table = Table::new("reconstruction", &["seed", "sensors", "eps_rec_sq"]);
    let mut slopes = Vec::new();
    let mut monotone = true;
    for &seed in cfg.seeds() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &s in &run.sensors {
            let sensors = SensorSet::equispaced(grid, s)?;
            let err = reconstruction_error(&law.with_seed(seed), &sensors, run.n_mc)?;
            if let Some(&last) = ys.last() {
                monotone &= err.ln() < last;
            }
            xs.push((s as f64).ln());
            ys.push(err.ln());
            table.push(vec![seed.into(), s.into(), err.into()]);
        }
        slopes.push(fit_slope(&xs, &ys));
    }
    let [lo, hi] = run.slope_range;
    let in_range = slopes.iter().all(|s| (lo..=hi).contains(s));
    out.check(
        "log-log slope in range",
        in_range,
        format!("slopes {slopes:.4?} (range [{lo}, {hi}])"),
    );
    out.check("error decreases with sensor count", monotone, ok_or_fail(monotone));
    out.metric(
        "slope_mean",
        slopes.iter().sum::<f64>() / slopes.len().max(1) as f64,
    );
    out.metric(
        "beta",
        default_beta(law.s0, grid.dim()),
    );
    out.tables.push(table);
    Ok(out)
}

fn budget_beta(cfg: &ExperimentConfig) -> Result<f64> {
    match (cfg.run.beta, &cfg.law) {
        (Some(b), _) => Ok(b),
        (None, Some(law)) => Ok(default_beta(law.s0, cfg.grid.dim)),
        (None, None) => Err(HarnessError::Config(
            "set run.beta or provide a [law] with s0".into(),
        )),
    }
}

/// Truth's `rho` first, then the configured catalog members, then jittered tables.
pub fn build_family(cfg: &ExperimentConfig, params: PicardParams) -> Result<CandidateFamily> {
    let grid = cfg.grid()?;
    let truth = cfg.truth()?;
    let eta = cfg.run.eta;
    let prop = Arc::new(Propagator::new(
        grid,
        SemigroupKind::Truncated { rank: params.rank },
        params.t,
    )?);
    let as_rho = |f: &Nonlinearity| -> Result<Nonlinearity> {
        Ok(Nonlinearity::from_table(
            build_rho(f, params.m, params.l, eta)?,
            format!("rho[{}]", f.tag()),
        ))
    };
    let mut fs = vec![as_rho(&truth)?];
    for spec in &cfg.family.members {
        fs.push(as_rho(&parse_f(cfg, spec)?)?);
    }
    fs.extend(perturbed_tables(
        &truth,
        &params,
        eta,
        cfg.family.perturbed,
        cfg.family.perturb_scale,
        FAMILY_SEED,
    )?);
    let members = fs
        .into_iter()
        .map(|f| PicardModel::with_propagator(params, f, prop.clone()))
        .collect::<picard_core::Result<Vec<_>>>()?;
    Ok(CandidateFamily::new(members, Some(0))?)
}

fn erm_generalization(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let law = cfg.law()?;
    let run = &cfg.run;
    let truth_f = cfg.truth()?;
    let budget = plan_budget(cfg.params.delta, run.n, budget_beta(cfg)?, run.alpha)?;
    let params = cfg.params.with_depth(budget.ell_n);
    let truth = PicardModel::exact(grid, params, truth_f.clone())?;
    let family = build_family(cfg, params)?;
    let tags = family.tags();

    // Fourier part of the implementation error, measured once on held-out draws.
    let probe = sample_initial(
        &law.with_seed(cfg.seeds()[0]),
        &grid,
        run.test_size,
    )?;
    let a_n = implementation_error(&truth, &family.members[0], &probe)?.fourier_term;

    let mut out = Outcome::new("erm-generalization", cfg.seeds());
    let mut table = Table::new(
        "erm",
        &["seed", "ell", "selected", "selected_tag", "train_risk", "heldout_risk", "bound", "holds", "c_needed"],
    );
    let mut held = 0usize;
    let mut c_min = 0.0f64;
    for &seed in cfg.seeds() {
        let train = make_dataset(&law, &truth, run.n, run.q, seed, run.ref_tol)?;
        let test =
            make_dataset_range(&law, &truth, HELD_OUT_OFFSET, run.n_test, run.q_test, seed, run.ref_tol)?;
        let result = erm(&family, &train)?;
        let chosen = &family.members[result.selected];
        let heldout = empirical_risk(chosen, &test, params.m)?.empirical;
        let mut inputs = BoundInputs::new(run.n, run.q, run.rho, run.eta, a_n);
        inputs.c = run.c;
        let bound = bound_rhs(&params, &inputs)?;
        let holds = heldout <= bound.total;
        held += holds as usize;
        let fixed = bound.imp_term + bound.truncation_term;
        let per_c = (bound.rademacher_term + bound.concentration_term) / bound.c;
        let needed = ((heldout - fixed) / per_c).max(0.0);
        c_min = c_min.max(needed);
        table.push(vec![
            seed.into(),
            params.ell.into(),
            result.selected.into(),
            tags[result.selected].as_str().into(),
            result.risks[result.selected].empirical.into(),
            heldout.into(),
            bound.total.into(),
            holds.into(),
            needed.into(),
        ]);
    }
    let fraction = held as f64 / cfg.seeds().len() as f64;
    out.check(
        "held-out risk <= bound in enough seeds",
        fraction >= run.min_pass_fraction,
        format!("{held}/{} seeds (need {:.0}%)", cfg.seeds().len(), 100.0 * run.min_pass_fraction),
    );
    out.check("family contains the truth", family.contains_truth(), format!("{} members", family.len()));
    out.metric("pass_fraction", fraction);
    out.metric("c_min", c_min);
    out.metric("a_n", a_n);
    out.metric("ell", params.ell as f64);
    out.metric("family_size", family.len() as f64);

    // Rademacher complexity at a depth where the candidates differ.
    let r_params = cfg.params.with_depth(run.rademacher_depth);
    let r_family = family.at_depth(run.rademacher_depth);
    let r_truth = truth.at_depth(run.rademacher_depth);
    let mut rtable = Table::new(
        "rademacher",
        &["n", "ell", "value", "std_error", "scaled", "closed_form"],
    );
    let mut scaled = Vec::new();
    let mut below = true;
    let seed = cfg.seeds()[0];
    for &n in &run.rademacher_sizes {
        let data = make_dataset(&law, &r_truth, n, run.q, seed, run.ref_tol)?;
        let preds = prediction_table(&r_family, &data)?;
        let est = rademacher_mc(&preds, n, run.q, run.draws, seed)?;
        let closed = rademacher_bound(&r_params, n, run.c);
        below &= est.value <= closed;
        let s = est.value * (n as f64).sqrt();
        scaled.push(s);
        rtable.push(vec![
            n.into(),
            run.rademacher_depth.into(),
            est.value.into(),
            est.std_error.into(),
            s.into(),
            closed.into(),
        ]);
    }
    let mean = scaled.iter().sum::<f64>() / scaled.len().max(1) as f64;
    let spread = scaled
        .iter()
        .map(|s| (s / mean - 1.0).abs())
        .fold(0.0, f64::max);
    out.check(
        "Rademacher sqrt(n) scaling stable",
        spread <= run.rademacher_spread,
        format!("largest deviation from mean {:.1}% (limit {:.0}%)", 100.0 * spread, 100.0 * run.rademacher_spread),
    );
    out.check(
        "Rademacher estimate below closed form",
        below,
        ok_or_fail(below),
    );
    out.metric("rademacher_spread", spread);
    out.tables.push(table);
    out.tables.push(rtable);
    Ok(out)
}

fn depth_sensor_plan(cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = cfg.params;
    let run = &cfg.run;
    let beta = budget_beta(cfg)?;
    let mut out = Outcome::new("depth-sensor-plan", cfg.seeds());
    let mut table = Table::new(
        "budget",
        &["n", "ell_n", "m_n", "ell_clamped", "m_clamped", "truncation_term"],
    );
    let mut floors = true;
    let mut monotone = true;
    let mut prev = (0usize, 0usize);
    let mut sizes = run.budget_sizes.clone();
    sizes.sort_unstable();
    for &n in &sizes {
        let b = plan_budget(params.delta, n, beta, run.alpha)?;
        floors &= b.ell_n >= 1 && b.m_n >= 2;
        monotone &= b.ell_n >= prev.0 && b.m_n >= prev.1;
        prev = (b.ell_n, b.m_n);
        let trunc = params.m * params.m * params.delta.powi(2 * b.ell_n as i32)
            / (1.0 - params.delta).powi(2);
        table.push(vec![
            n.into(),
            b.ell_n.into(),
            b.m_n.into(),
            b.ell_clamped.into(),
            b.m_clamped.into(),
            trunc.into(),
        ]);
    }
    out.check("ell_n >= 1 and m_n >= 2", floors, ok_or_fail(floors));
    out.check("plan nondecreasing in n", monotone, ok_or_fail(monotone));
    out.metric("beta", beta);
    out.tables.push(table);
    Ok(out)
}

fn rollout_propagation(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let law = cfg.law()?;
    let params = cfg.params;
    let run = &cfg.run;
    let truth_f = cfg.truth()?;
    let lambda = truth_f.dissipation_rate();
    let truth = PicardModel::exact(grid, params, truth_f.clone())?;
    let approx = PicardModel::fno(grid, params, &truth_f, run.eta)?;
    let mut out = Outcome::new("rollout-propagation", cfg.seeds());
    let mut table = Table::new(
        "rollout",
        &[
            "seed",
            "sample",
            "j",
            "e_j",
            "block_risk",
            "envelope_generic",
            "envelope_dissipative",
            "clip_count",
        ],
    );
    let mut horizon_errors = 0usize;
    let mut clips = 0usize;
    let (mut generic_ok, mut dissipative_ok, mut sup_ok) = (true, true, true);
    let mut slack = f64::NEG_INFINITY;
    let mut measured_q = 0.0f64;
    let mut eps_max = 0.0f64;
    for &seed in cfg.seeds() {
        let u0s = samples(&law, &grid, seed, run.rollouts)?;
        for (k, u0) in u0s.iter().enumerate() {
            let trace = match rollout(u0, &truth, &approx, run.kappa, run.ref_tol) {
                Ok(t) => t,
                Err(PicardError::HorizonExceeded { .. }) => {
                    horizon_errors += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let generic = stability_envelope(&params, run.kappa, trace.eps_loc, EnvelopeMode::Generic)?;
            let dissipative = match lambda {
                Some(lambda) => Some(stability_envelope(
                    &params,
                    run.kappa,
                    trace.eps_loc,
                    EnvelopeMode::Dissipative { lambda },
                )?),
                None => None,
            };
            let ceiling = lambda.map(|l| dissipative_ceiling(&params, l) * trace.eps_loc.powi(2));
            for j in 0..run.kappa {
                let risk = trace.block_risks[j];
                generic_ok &= risk <= generic[j];
                let env_d = dissipative.as_ref().map_or(f64::NAN, |d| d[j]);
                if let Some(c) = ceiling {
                    dissipative_ok &= risk <= env_d && risk <= c;
                }
                table.push(vec![
                    seed.into(),
                    k.into(),
                    j.into(),
                    trace.block_errors[j].into(),
                    risk.into(),
                    generic[j].into(),
                    env_d.into(),
                    trace.clip_counts[j].into(),
                ]);
            }
            for w in trace.exact_states.windows(2) {
                sup_ok &= w[1].sup_norm() <= w[0].sup_norm() + 1e-12;
            }
            clips += trace.total_clips();
            slack = slack.max(trace.recursion_slack(&params));
            eps_max = eps_max.max(trace.eps_loc);
            measured_q = trace.terminal_ratios.iter().copied().fold(measured_q, f64::max);
        }
        let extra = sample_range(&law.with_seed(seed), &grid, HELD_OUT_OFFSET, 2 * run.contraction_pairs)?;
        let pairs: Vec<(TorusField, TorusField)> = extra
            .chunks(2)
            .map(|c| (c[0].clone(), c[1].clone()))
            .collect();
        measured_q = measured_q.max(terminal_contraction(&truth, &pairs, run.ref_tol)?);
    }
    out.check("block risk below generic envelope", generic_ok, ok_or_fail(generic_ok));
    match lambda {
        Some(lambda) => {
            let q = (-lambda * params.t).exp();
            out.check(
                "block risk below dissipative envelope",
                dissipative_ok,
                format!("ceiling factor {:.5}", dissipative_ceiling(&params, lambda)),
            );
            out.check(
                "measured terminal contraction <= e^(-lambda T) + 0.02",
                measured_q <= q + 0.02,
                format!("measured {measured_q:.5}, e^(-lambda T) = {q:.5}"),
            );
            out.metric("q_theory", q);
        }
        None => out.check(
            "truth is strictly dissipative",
            false,
            format!("`{}` has no closed-form dissipation rate", truth_f.tag()),
        ),
    }
    out.check("no horizon-exceeded errors", horizon_errors == 0, format!("{horizon_errors} rollouts aborted"));
    out.check("no clip events", clips == 0, format!("{clips} clipped grid points"));
    out.check(
        "error recursion holds",
        slack <= 1e-6,
        format!("largest slack {slack:.3e}"),
    );
    out.check("exact ladder sup norm non-increasing", sup_ok, ok_or_fail(sup_ok));
    out.metric("q_measured", measured_q);
    out.metric("eps_loc_max", eps_max);
    out.metric("recursion_slack", slack);
    out.tables.push(table);
    Ok(out)
}

fn export_dataset(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let law = cfg.law()?;
    let run = &cfg.run;
    let truth = PicardModel::exact(grid, cfg.params, cfg.truth()?)?;
    let mut out = Outcome::new("export-dataset", cfg.seeds());
    for &seed in cfg.seeds() {
        let data = make_dataset(&law, &truth, run.n, run.q, seed, run.ref_tol)?;
        let mut table = Table::new(
            format!("dataset_seed{seed}"),
            &["block", "record", "index", "time_index", "value"],
        );
        table.preamble.push(format!(
            "grid dim={} points_per_axis={} time_nodes={} horizon={}",
            grid.dim(),
            grid.points_per_axis(),
            grid.time_nodes(),
            cfg.params.t
        ));
        for (b, block) in data.iter().enumerate() {
            for (i, &v) in block.u0.values().iter().enumerate() {
                table.push(vec![b.into(), "u0".into(), i.into(), 0usize.into(), v.into()]);
            }
            for (z, &t) in block.queries.iter().zip(&block.targets) {
                table.push(vec![
                    b.into(),
                    "target".into(),
                    z.flat.into(),
                    z.time_index.into(),
                    t.into(),
                ]);
            }
        }
        out.metric(&format!("blocks_seed{seed}"), data.len() as f64);
        out.tables.push(table);
    }
    out.check("dataset written", true, "ok");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = [8.0f64, 16.0, 32.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [8.0f64, 16.0, 32.0].iter().map(|x| x.powf(-3.0).ln()).collect();
        assert!((fit_slope(&xs, &ys) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_scenario_lists_names() {
        let cfg = ExperimentConfig::parse(
            "[grid]\npoints_per_axis = 16\ntime_nodes = 5\n[params]\nr = 0.4\nm = 1.0\nl = 0.5\nt = 0.5\ndelta = 0.25\n",
        )
        .unwrap();
        let err = run("nope", &cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("truncation-decay"));
    }

    #[test]
    fn rough_and_smooth_trajectories_respect_m() {
        let g = GridSpec::new(2, 8, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for rough in [true, false] {
            let v = random_trajectory(&g, 0.5, 0.7, rough, &mut rng);
            assert!(v.sup_norm() <= 0.7 + 1e-12);
            assert!(v.sup_norm() > 0.0);
        }
    }
}
