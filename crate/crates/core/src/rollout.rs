//! Long-time prediction by chaining block models through their terminal slices.

use serde::Serialize;

use crate::error::{PicardError, Result};
use crate::picard::{PicardModel, PicardParams};
use crate::risk::clipped_loss;
use crate::spectral::{TorusField, TrajectoryField};

/// `psi(u) = u(., T)`.
pub fn terminal_trace(u: &TrajectoryField) -> TorusField {
    u.last().clone()
}

/// Pointwise clipping to `[-r, r]` and the number of grid points that moved.
pub fn clip_state(f: &TorusField, r: f64) -> (TorusField, usize) {
    let clipped = f.map(|v| v.clamp(-r, r));
    let count = f
        .values()
        .iter()
        .zip(clipped.values())
        .filter(|(a, b)| a != b)
        .count();
    (clipped, count)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EnvelopeMode {
    Generic,
    /// Strictly dissipative nonlinearity with rate `lambda`; `q = e^{-lambda T}`.
    Dissipative { lambda: f64 },
}

/// Certified bound on the risk of each block `j = 0..kappa` given a local error `eps`.
pub fn stability_envelope(
    params: &PicardParams,
    kappa: usize,
    eps: f64,
    mode: EnvelopeMode,
) -> Result<Vec<f64>> {
    match mode {
        EnvelopeMode::Generic => {
            let a = params.c_s / (1.0 - params.delta);
            let mut out = Vec::with_capacity(kappa);
            let mut sum = 0.0;
            let mut power = 1.0;
            for _ in 0..kappa {
                sum += power;
                power *= a;
                out.push(sum * sum * eps * eps);
            }
            Ok(out)
        }
        EnvelopeMode::Dissipative { lambda } => {
            if !(lambda > 0.0) {
                return Err(PicardError::Domain(format!(
                    "dissipation rate must be positive, got {lambda}"
                )));
            }
            let q = (-lambda * params.t).exp();
            Ok((0..kappa)
                .map(|j| {
                    let f = 1.0 + (1.0 - q.powi(j as i32)) / (1.0 - q);
                    f * f * eps * eps
                })
                .collect())
        }
    }
}

/// Uniform-in-`j` dissipative factor `(1 + 1/(1 - q))^2`.
pub fn dissipative_ceiling(params: &PicardParams, lambda: f64) -> f64 {
    let q = (-lambda * params.t).exp();
    let f = 1.0 + 1.0 / (1.0 - q);
    f * f
}

#[derive(Debug, Clone, Serialize)]
pub struct RolloutTrace {
    pub kappa: usize,
    #[serde(skip)]
    pub exact_states: Vec<TorusField>,
    #[serde(skip)]
    pub approx_states: Vec<TorusField>,
    /// `e_j = sup |v_hat_j - v_j|`, `j = 0..=kappa`.
    pub block_errors: Vec<f64>,
    /// Mean squared clipped loss of block `j` over all space-time nodes.
    pub block_risks: Vec<f64>,
    /// `sup |clip(G_hat(v_hat_j)) - G(v_j)|` over block `j`.
    pub block_sup_errors: Vec<f64>,
    /// Largest local error `sup |clip(G_hat(v)) - G(v)|` over visited states.
    pub eps_loc: f64,
    pub clip_counts: Vec<usize>,
    /// `||Phi(v_hat_j) - Phi(v_j)|| / ||v_hat_j - v_j||` where the denominator is positive.
    pub terminal_ratios: Vec<f64>,
}

impl RolloutTrace {
    pub fn total_clips(&self) -> usize {
        self.clip_counts.iter().sum()
    }

    /// Largest violation of `e_{j+1} <= eps + C_S/(1 - delta) e_j`; nonpositive when it holds.
    pub fn recursion_slack(&self, params: &PicardParams) -> f64 {
        let a = params.c_s / (1.0 - params.delta);
        self.block_errors
            .windows(2)
            .map(|w| w[1] - (self.eps_loc + a * w[0]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn mean_square(pred: &TrajectoryField, truth: &TrajectoryField, m: f64) -> (f64, f64) {
    let mut total = 0.0;
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for (a, b) in pred.slices().iter().zip(truth.slices()) {
        for (&x, &y) in a.values().iter().zip(b.values()) {
            total += clipped_loss(x, y, m);
            worst = worst.max((x.clamp(-m, m) - y).abs());
            count += 1;
        }
    }
    (total / count as f64, worst)
}

/// Runs `kappa` blocks of the exact ladder `v_{j+1} = psi(G(v_j))` and the
/// approximate ladder `v_hat_{j+1} = P_R psi(G_hat(v_hat_j))`.
pub fn rollout(
    u0: &TorusField,
    truth: &PicardModel,
    approx: &PicardModel,
    kappa: usize,
    ref_tol: f64,
) -> Result<RolloutTrace> {
    let r = truth.params().r;
    let m = truth.params().m;
    let solve = |v: &TorusField| truth.solve_fixed_point(v, ref_tol).map(|fp| fp.solution);
    let mut exact = vec![u0.clone()];
    let mut approx_states = vec![u0.clone()];
    let mut block_errors = vec![0.0];
    let mut block_risks = Vec::with_capacity(kappa);
    let mut block_sup_errors = Vec::with_capacity(kappa);
    let mut clip_counts = Vec::with_capacity(kappa);
    let mut terminal_ratios = Vec::new();
    let mut eps_loc = 0.0f64;
    for j in 0..kappa {
        let v = &exact[j];
        let v_hat = &approx_states[j];
        let sup = v.sup_norm();
        if sup > r {
            return Err(PicardError::HorizonExceeded {
                block: j,
                sup,
                radius: r,
            });
        }
        let g_v = solve(v)?;
        let pred = approx.predict(v_hat)?;
        let (risk, sup_err) = mean_square(&pred, &g_v, m);
        block_risks.push(risk);
        block_sup_errors.push(sup_err);

        // local errors at both visited states
        let (_, local_exact) = mean_square(&approx.predict(v)?, &g_v, m);
        let g_hat_state = solve(v_hat)?;
        let (_, local_approx) = mean_square(&pred, &g_hat_state, m);
        eps_loc = eps_loc.max(local_exact).max(local_approx);

        let next = terminal_trace(&g_v);
        let (next_hat, clips) = clip_state(&terminal_trace(&pred), r);
        let gap = v_hat.distance(v)?;
        if gap > 0.0 {
            terminal_ratios.push(terminal_trace(&g_hat_state).distance(&next)? / gap);
        }
        block_errors.push(next_hat.distance(&next)?);
        clip_counts.push(clips);
        exact.push(next);
        approx_states.push(next_hat);
    }
    let last = exact.last().expect("initial state");
    if last.sup_norm() > r {
        return Err(PicardError::HorizonExceeded {
            block: kappa,
            sup: last.sup_norm(),
            radius: r,
        });
    }
    Ok(RolloutTrace {
        kappa,
        exact_states: exact,
        approx_states,
        block_errors,
        block_risks,
        block_sup_errors,
        eps_loc,
        clip_counts,
        terminal_ratios,
    })
}

/// Largest `||psi G(a) - psi G(b)|| / ||a - b||` over the given pairs.
pub fn terminal_contraction(
    truth: &PicardModel,
    pairs: &[(TorusField, TorusField)],
    ref_tol: f64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (a, b) in pairs {
        let gap = a.distance(b)?;
        if gap == 0.0 {
            continue;
        }
        let ta = terminal_trace(&truth.solve_fixed_point(a, ref_tol)?.solution);
        let tb = terminal_trace(&truth.solve_fixed_point(b, ref_tol)?.solution);
        worst = worst.max(ta.distance(&tb)? / gap);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Nonlinearity;
    use crate::spectral::GridSpec;

    fn params() -> PicardParams {
        PicardParams::new(0.4, 1.0, 0.5, 0.5, 0.25).unwrap()
    }

    #[test]
    fn trace_and_clip_examples() {
        let g = GridSpec::new(1, 32, 5).unwrap();
        let c = TrajectoryField::constant(g, 0.5, 0.3);
        assert_eq!(terminal_trace(&c), TorusField::constant(g, 0.3));
        assert_eq!(terminal_trace(&TrajectoryField::zeros(g, 0.5)).sup_norm(), 0.0);
        let zero = Nonlinearity::parse("zero", 1.0, 0.5).unwrap();
        let model = PicardModel::exact(g, params(), zero).unwrap();
        let u0 = TorusField::from_fn(g, |x| 0.3 * x[0].cos());
        let end = terminal_trace(&model.iterate(&u0, 1).unwrap());
        let expect = u0.scale((-0.5f64).exp());
        assert!(end.distance(&expect).unwrap() < 1e-15);

        let r = 0.4;
        let (same, n) = clip_state(&u0, r);
        assert_eq!((same, n), (u0.clone(), 0));
        let (flat, n) = clip_state(&TorusField::constant(g, 2.0 * r), r);
        assert_eq!(flat, TorusField::constant(g, r));
        assert_eq!(n, 32);
        let wave = TorusField::from_fn(g, |x| 1.5 * r * x[0].cos());
        let (capped, _) = clip_state(&wave, r);
        for (k, v) in capped.values().iter().enumerate() {
            let c = g.coordinate(k).cos();
            if c.abs() > 2.0 / 3.0 + 1e-12 {
                assert_eq!(v.abs(), r);
            } else {
                assert!((v - 1.5 * r * c).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn envelope_examples() {
        let p = PicardParams::new(0.25, 1.0, 0.5, 0.5, 0.5).unwrap();
        let env = stability_envelope(&p, 3, 1.0, EnvelopeMode::Generic).unwrap();
        assert_eq!(env, vec![1.0, 9.0, 49.0]);
        let p = PicardParams::new(0.25, 1.0, 0.5, 0.5, 0.25).unwrap();
        let dis = stability_envelope(&p, 50, 1.0, EnvelopeMode::Dissipative { lambda: 1.0 }).unwrap();
        assert_eq!(dis[0], 1.0);
        let ceiling = dissipative_ceiling(&p, 1.0);
        // (1 + 1/(1 - e^{-0.5}))^2
        assert!((ceiling - 12.542_18).abs() < 1e-4, "{ceiling}");
        assert!(dis.iter().all(|&v| v <= ceiling));
        assert!(stability_envelope(&p, 3, 1.0, EnvelopeMode::Dissipative { lambda: 0.0 }).is_err());
    }

    #[test]
    fn rollout_with_zero_nonlinearity() {
        let g = GridSpec::new(1, 32, 9).unwrap();
        let zero = Nonlinearity::parse("zero", 1.0, 0.5).unwrap();
        let truth = PicardModel::exact(g, params(), zero.clone()).unwrap();
        let approx = truth.at_depth(4);
        let u0 = TorusField::from_fn(g, |x| 0.3 * x[0].sin());
        let trace = rollout(&u0, &truth, &approx, 5, 1e-12).unwrap();
        assert_eq!(trace.block_errors[0], 0.0);
        assert!(trace.block_errors.iter().all(|&e| e < 1e-15));
        assert_eq!(trace.total_clips(), 0);
        let again = rollout(&u0, &truth, &approx, 5, 1e-12).unwrap();
        assert_eq!(trace.block_errors, again.block_errors);
        assert_eq!(trace.approx_states, again.approx_states);
    }

    #[test]
    fn linear_decay_contracts_terminal_map() {
        let g = GridSpec::new(1, 32, 257).unwrap();
        let f = Nonlinearity::parse("linear(a=-0.5)", 1.0, 0.5).unwrap();
        let truth = PicardModel::exact(g, params(), f).unwrap();
        let pairs: Vec<_> = (1..6)
            .map(|k| {
                let a = TorusField::from_fn(g, |x| 0.05 * k as f64 + 0.1 * (k as f64 * x[0]).cos());
                let b = TorusField::from_fn(g, |x| 0.1 * x[0].sin());
                (a, b)
            })
            .collect();
        let q = terminal_contraction(&truth, &pairs, 1e-12).unwrap();
        assert!(q <= (-0.25f64).exp() + 1e-6, "{q}");
    }

    #[test]
    fn horizon_exceeded_is_reported() {
        let g = GridSpec::new(1, 32, 9).unwrap();
        let f = Nonlinearity::parse("linear(a=0.5)", 1.0, 0.5).unwrap();
        let truth = PicardModel::exact(g, params(), f).unwrap();
        let u0 = TorusField::constant(g, 0.39);
        match rollout(&u0, &truth, &truth.at_depth(6), 4, 1e-12) {
            Err(PicardError::HorizonExceeded { block, .. }) => assert_eq!(block, 1),
            other => panic!("expected horizon error, got {other:?}"),
        }
    }
}
