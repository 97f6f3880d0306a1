//! Clipped squared loss, trajectory-block datasets, empirical risks, ERM over a
//! finite candidate family, Rademacher estimates, and generalization-bound terms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{reconstruct, sample_range, InitialLaw, Observation, SensorSet, SobolevBall};
use crate::error::{PicardError, Result};
use crate::nonlinearity::{build_rho, Nonlinearity, PiecewiseLinear};
use crate::picard::{PicardModel, PicardParams};
use crate::semigroup::SemigroupKind;
use crate::spectral::{TorusField, TrajectoryField};

/// Streams at and above this index drive query sampling; lower ones drive initial data.
const QUERY_STREAM_BASE: u64 = 1 << 62;

/// `(clip(pred, [-M, M]) - target)^2`.
pub fn clipped_loss(pred: f64, target: f64, m: f64) -> f64 {
    let d = pred.clamp(-m, m) - target;
    d * d
}

/// Fixed-tree pairwise sum; the result depends only on the slice contents.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        pairwise_sum(values) / values.len() as f64
    }
}

/// A space-time query `z = (x, t)` on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QueryPoint {
    pub time_index: usize,
    pub flat: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub u0: TorusField,
    pub queries: Vec<QueryPoint>,
    pub targets: Vec<f64>,
}

/// Blocks `start..start + n` of the dataset stream for `seed`.
#[allow(clippy::too_many_arguments)]
pub fn make_dataset_range(
    law: &InitialLaw,
    truth: &PicardModel,
    start: u64,
    n: usize,
    q: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<TrajectorySample>> {
    if truth.kind() != SemigroupKind::Exact {
        return Err(PicardError::Config(
            "dataset targets need an exact-semigroup truth model".into(),
        ));
    }
    if !(tol > 0.0 && tol <= 1e-8) {
        return Err(PicardError::Config(format!(
            "reference tolerance must be in (0, 1e-8], got {tol}"
        )));
    }
    let grid = *truth.grid();
    let initial = sample_range(&law.with_seed(seed), &grid, start, n)?;
    let m = truth.params().m;
    initial
        .into_par_iter()
        .enumerate()
        .map(|(k, u0)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(QUERY_STREAM_BASE + start + k as u64);
            let queries: Vec<QueryPoint> = (0..q)
                .map(|_| QueryPoint {
                    time_index: rng.random_range(0..grid.time_nodes()),
                    flat: rng.random_range(0..grid.len()),
                })
                .collect();
            let reference = truth.solve_fixed_point(&u0, tol)?.solution;
            let targets: Vec<f64> = queries
                .iter()
                .map(|z| reference.value(z.time_index, z.flat))
                .collect();
            if let Some(t) = targets.iter().find(|t| t.abs() > m) {
                return Err(PicardError::Domain(format!("target {t} exceeds M = {m}")));
            }
            Ok(TrajectorySample {
                u0,
                queries,
                targets,
            })
        })
        .collect()
}

/// `n` trajectory blocks with `q` uniform queries each.
pub fn make_dataset(
    law: &InitialLaw,
    truth: &PicardModel,
    n: usize,
    q: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<TrajectorySample>> {
    make_dataset_range(law, truth, 0, n, q, seed, tol)
}

/// A map from initial data to trajectories.
pub trait OperatorModel: Sync {
    fn predict(&self, u0: &TorusField) -> Result<TrajectoryField>;
}

impl OperatorModel for PicardModel {
    fn predict(&self, u0: &TorusField) -> Result<TrajectoryField> {
        PicardModel::predict(self, u0)
    }
}

/// Predicts the same value everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantModel {
    pub value: f64,
    pub horizon: f64,
}

impl OperatorModel for ConstantModel {
    fn predict(&self, u0: &TorusField) -> Result<TrajectoryField> {
        Ok(TrajectoryField::constant(*u0.grid(), self.horizon, self.value))
    }
}

/// A model that only sees sensor readings.
pub trait FiniteObservationModel: Sync {
    fn predict_from(&self, obs: &Observation) -> Result<TrajectoryField>;
}

/// `Gamma_m(y) = G(E(y))`: reconstruct, then apply a full-information model.
pub struct ReconstructThen<'a, M: OperatorModel> {
    pub sensors: &'a SensorSet,
    pub ball: SobolevBall,
    pub inner: &'a M,
}

impl<M: OperatorModel> FiniteObservationModel for ReconstructThen<'_, M> {
    fn predict_from(&self, obs: &Observation) -> Result<TrajectoryField> {
        let u0 = reconstruct(self.sensors, obs, &self.ball)?;
        self.inner.predict(&u0)
    }
}

/// `Gamma_m^up(u0) = Gamma_m(P_m u0)`.
pub struct Lifted<'a, F: FiniteObservationModel> {
    pub model: &'a F,
    pub sensors: &'a SensorSet,
}

impl<F: FiniteObservationModel> OperatorModel for Lifted<'_, F> {
    fn predict(&self, u0: &TorusField) -> Result<TrajectoryField> {
        self.model.predict_from(&self.sensors.observe(u0)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub empirical: f64,
    pub per_block: Vec<f64>,
    pub n: usize,
    pub q: usize,
}

fn block_loss(prediction: &TrajectoryField, block: &TrajectorySample, m: f64) -> f64 {
    let losses: Vec<f64> = block
        .queries
        .iter()
        .zip(&block.targets)
        .map(|(z, &t)| clipped_loss(prediction.value(z.time_index, z.flat), t, m))
        .collect();
    pairwise_mean(&losses)
}

fn report(per_block: Vec<f64>, data: &[TrajectorySample]) -> RiskReport {
    RiskReport {
        empirical: pairwise_mean(&per_block),
        n: data.len(),
        q: data.first().map_or(0, |b| b.queries.len()),
        per_block,
    }
}

/// Full-information empirical risk with predictions clipped to `[-m, m]`.
pub fn empirical_risk(
    model: &impl OperatorModel,
    data: &[TrajectorySample],
    m: f64,
) -> Result<RiskReport> {
    let per_block = data
        .par_iter()
        .map(|b| Ok(block_loss(&model.predict(&b.u0)?, b, m)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(report(per_block, data))
}

/// Finite-observation empirical risk: the model sees `P_m u0` only.
pub fn finite_observation_risk(
    model: &impl FiniteObservationModel,
    sensors: &SensorSet,
    data: &[TrajectorySample],
    m: f64,
) -> Result<RiskReport> {
    let per_block = data
        .par_iter()
        .map(|b| {
            let obs = sensors.observe(&b.u0)?;
            Ok(block_loss(&model.predict_from(&obs)?, b, m))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(report(per_block, data))
}

/// A finite set of candidate models sharing grid and parameters.
#[derive(Debug, Clone)]
pub struct CandidateFamily {
    pub members: Vec<PicardModel>,
    /// Index of the member built from the true nonlinearity, if any.
    pub truth_index: Option<usize>,
}

impl CandidateFamily {
    pub fn new(members: Vec<PicardModel>, truth_index: Option<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(PicardError::Config("candidate family is empty".into()));
        }
        if truth_index.is_some_and(|i| i >= members.len()) {
            return Err(PicardError::Config("truth index out of range".into()));
        }
        Ok(Self {
            members,
            truth_index,
        })
    }

    pub fn contains_truth(&self) -> bool {
        self.truth_index.is_some()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn at_depth(&self, ell: usize) -> Self {
        Self {
            members: self.members.iter().map(|m| m.at_depth(ell)).collect(),
            truth_index: self.truth_index,
        }
    }

    pub fn tags(&self) -> Vec<String> {
        self.members.iter().map(|m| m.nonlinearity().tag().to_string()).collect()
    }
}

/// Knot tables of `rho_F` with values jittered by up to `scale * h` per knot,
/// rescaled where needed so every secant slope stays within `L`.
pub fn perturbed_tables(
    f: &Nonlinearity,
    params: &PicardParams,
    eta: f64,
    count: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<Nonlinearity>> {
    let base = build_rho(f, params.m, params.l, eta)?;
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let knots = base.knots().to_vec();
            let h = knots[1] - knots[0];
            let mut values: Vec<f64> = base
                .values()
                .iter()
                .zip(&knots)
                .map(|(&v, &x)| {
                    let jitter = scale * h * rng.random_range(-1.0..1.0);
                    if x == 0.0 {
                        0.0
                    } else {
                        v + jitter
                    }
                })
                .collect();
            let trial = PiecewiseLinear::new(knots.clone(), values.clone())?;
            let slope = trial.max_slope();
            if slope > params.l {
                let shrink = params.l / slope;
                values.iter_mut().for_each(|v| *v *= shrink);
            }
            let table = PiecewiseLinear::new(knots, values)?;
            Ok(Nonlinearity::from_table(
                table,
                format!("perturbed[{}; #{k}]", f.tag()),
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErmResult {
    pub selected: usize,
    pub risks: Vec<RiskReport>,
}

/// Exhaustive minimization of the empirical risk; ties go to the lowest index.
pub fn erm(family: &CandidateFamily, data: &[TrajectorySample]) -> Result<ErmResult> {
    let risks = family
        .members
        .iter()
        .map(|b| empirical_risk(b, data, b.params().m))
        .collect::<Result<Vec<_>>>()?;
    let mut selected = 0;
    for (i, r) in risks.iter().enumerate() {
        if r.empirical < risks[selected].empirical {
            selected = i;
        }
    }
    Ok(ErmResult { selected, risks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RademacherEstimate {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Monte-Carlo estimate of `E_sigma max_b (n sqrt q)^{-1} sum_{ij} sigma_ij b(u0_i)(z_ij)`
/// over clipped predictions. The signed sum of the family-mean prediction has
/// zero expectation, so it is subtracted from every member before the max.
pub fn rademacher_mc(
    predictions: &[Vec<f64>],
    n: usize,
    q: usize,
    draws: usize,
    seed: u64,
) -> Result<RademacherEstimate> {
    if draws == 0 {
        return Err(PicardError::Config("need at least one sign draw".into()));
    }
    if predictions.is_empty() || predictions.iter().any(|p| p.len() != n * q) {
        return Err(PicardError::Config(format!(
            "prediction table must have n*q = {} entries per member",
            n * q
        )));
    }
    let len = n * q;
    let members = predictions.len() as f64;
    let mean: Vec<f64> = (0..len)
        .map(|k| predictions.iter().map(|p| p[k]).sum::<f64>() / members)
        .collect();
    let centered: Vec<Vec<f64>> = predictions
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(a, b)| a - b).collect())
        .collect();
    let norm = n as f64 * (q as f64).sqrt();
    let values: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let signs: Vec<f64> = (0..len)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            centered
                .iter()
                .map(|p| p.iter().zip(&signs).map(|(a, s)| a * s).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
                / norm
        })
        .collect();
    let value = pairwise_mean(&values);
    let var = if draws > 1 {
        values.iter().map(|v| (v - value) * (v - value)).sum::<f64>() / (draws - 1) as f64
    } else {
        0.0
    };
    Ok(RademacherEstimate {
        value,
        std_error: (var / draws as f64).sqrt(),
        draws,
    })
}

/// Clipped predictions of every member at every query, flattened block-major.
pub fn prediction_table(
    family: &CandidateFamily,
    data: &[TrajectorySample],
) -> Result<Vec<Vec<f64>>> {
    family
        .members
        .iter()
        .map(|b| {
            let m = b.params().m;
            let blocks = data
                .par_iter()
                .map(|s| {
                    let pred = b.predict(&s.u0)?;
                    Ok(s.queries
                        .iter()
                        .map(|z| pred.value(z.time_index, z.flat).clamp(-m, m))
                        .collect::<Vec<f64>>())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(blocks.concat())
        })
        .collect()
}

/// Closed-form Rademacher bound of the Picard class, `C M sqrt(L T (1 - delta^ell) / ((1 - delta) n))`.
pub fn rademacher_bound(params: &PicardParams, n: usize, c: f64) -> f64 {
    let p = params;
    c * p.m
        * (p.l * p.t * (1.0 - p.delta.powi(p.ell as i32)) / ((1.0 - p.delta) * n as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: usize,
    pub q: usize,
    /// Confidence level `rho` in `(0, 1)`.
    pub rho: f64,
    pub eta: f64,
    /// Measured Fourier part of the implementation error.
    pub a_n: f64,
    /// Universal constant, 1 by default.
    pub c: f64,
    /// Measured empirical Rademacher complexity; the closed form is used when absent.
    pub rademacher: Option<f64>,
}

impl BoundInputs {
    pub fn new(n: usize, q: usize, rho: f64, eta: f64, a_n: f64) -> Self {
        Self {
            n,
            q,
            rho,
            eta,
            a_n,
            c: 1.0,
            rademacher: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub imp_term: f64,
    pub truncation_term: f64,
    pub rademacher_term: f64,
    pub concentration_term: f64,
    pub total: f64,
    pub rho: f64,
    pub c: f64,
    pub ell: usize,
    pub n: usize,
}

/// `4M{(1-delta^ell)/(1-delta) T eta + a_N} + M^2 delta^{2 ell}/(1-delta)^2
///  + C M^2 sqrt(L T (1-delta^ell)/((1-delta) n)) + C M^2 sqrt(log(1/rho)/n)`.
pub fn bound_rhs(params: &PicardParams, inputs: &BoundInputs) -> Result<BoundReport> {
    let BoundInputs {
        n,
        rho,
        eta,
        a_n,
        c,
        rademacher,
        ..
    } = *inputs;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(PicardError::Domain(format!("confidence must lie in (0, 1), got {rho}")));
    }
    if n == 0 {
        return Err(PicardError::Domain("sample size must be positive".into()));
    }
    if eta < 0.0 || a_n < 0.0 || c <= 0.0 {
        return Err(PicardError::Domain(
            "eta and a_N must be >= 0 and C > 0".into(),
        ));
    }
    let p = params;
    let m = p.m;
    let ell = p.ell;
    let imp_term = 4.0 * m * (p.rho_bound(ell, eta) + a_n);
    let truncation_term = m * m * p.delta.powi(2 * ell as i32) / (1.0 - p.delta).powi(2);
    let rademacher_term = match rademacher {
        Some(r) => c * m * r,
        None => m * rademacher_bound(p, n, c),
    };
    let concentration_term = c * m * m * ((1.0 / rho).ln() / n as f64).sqrt();
    Ok(BoundReport {
        imp_term,
        truncation_term,
        rademacher_term,
        concentration_term,
        total: imp_term + truncation_term + rademacher_term + concentration_term,
        rho,
        c,
        ell,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budget {
    pub ell_n: usize,
    pub m_n: usize,
    /// The raw depth was 0 and has been raised to 1.
    pub ell_clamped: bool,
    pub m_clamped: bool,
}

/// Reconstruction rate `(s0 - d/2) / d`.
pub fn default_beta(s0: f64, dim: usize) -> f64 {
    (s0 - dim as f64 / 2.0) / dim as f64
}

/// `ell_n = ceil(log n / (4 |log delta|))` and `m_n = round(n^{1/(2(2 beta + alpha))})`,
/// clamped to at least 1 and 2.
pub fn plan_budget(delta: f64, n: usize, beta: f64, alpha: f64) -> Result<Budget> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PicardError::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(beta > 0.0) || !(alpha >= 0.0) {
        return Err(PicardError::Domain(format!(
            "need beta > 0 and alpha >= 0, got beta={beta} alpha={alpha}"
        )));
    }
    if n == 0 {
        return Err(PicardError::Domain("sample size must be positive".into()));
    }
    let raw_ell = ((n as f64).ln() / (4.0 * delta.ln().abs())).ceil() as usize;
    let raw_m = (n as f64).powf(1.0 / (2.0 * (2.0 * beta + alpha))).round() as usize;
    Ok(Budget {
        ell_n: raw_ell.max(1),
        m_n: raw_m.max(2),
        ell_clamped: raw_ell < 1,
        m_clamped: raw_m < 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::ScalarMap;
    use crate::spectral::GridSpec;

    #[test]
    fn loss_examples() {
        assert_eq!(clipped_loss(0.3, 0.3, 1.0), 0.0);
        assert_eq!(clipped_loss(3.0, -1.0, 1.0), 4.0);
        assert!((clipped_loss(0.5, 0.2, 1.0) - 0.09).abs() < 1e-15);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..37).map(|k| k as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), v.iter().sum::<f64>());
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn bound_terms() {
        let p = PicardParams::new(0.25, 1.0, 0.5, 0.5, 0.5).unwrap().with_depth(4);
        let r = bound_rhs(&p, &BoundInputs::new(100, 4, 0.1, 0.0, 0.0)).unwrap();
        assert_eq!(r.truncation_term, 0.015625);
        assert_eq!(r.imp_term, 0.0);
        let sum = r.imp_term + r.truncation_term + r.rademacher_term + r.concentration_term;
        assert_eq!(r.total, sum);
        assert!(bound_rhs(&p, &BoundInputs::new(100, 4, 1.0, 0.0, 0.0)).is_err());
        assert!(bound_rhs(&p, &BoundInputs::new(100, 4, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn budget_examples() {
        assert_eq!(plan_budget(0.5, 10_000, 1.5, 0.0).unwrap().ell_n, 4);
        assert_eq!(plan_budget(0.5, 4096, 1.5, 0.0).unwrap().m_n, 4);
        let one = plan_budget(0.5, 1, 1.5, 0.0).unwrap();
        assert_eq!((one.ell_n, one.m_n), (1, 2));
        assert!(one.ell_clamped && one.m_clamped);
        assert!(plan_budget(1.0, 10, 1.5, 0.0).is_err());
        assert_eq!(default_beta(2.0, 1), 1.5);
    }

    #[test]
    fn rademacher_of_zero_and_symmetric_families() {
        let zero = vec![vec![0.0; 12]];
        let r = rademacher_mc(&zero, 3, 4, 50, 1).unwrap();
        assert_eq!(r.value, 0.0);
        // {b, -b}: max of +-s is |s|, centered at the zero mean
        let b: Vec<f64> = (0..12).map(|k| (k as f64 * 0.7).sin()).collect();
        let neg: Vec<f64> = b.iter().map(|v| -v).collect();
        let sym = rademacher_mc(&[b.clone(), neg], 3, 4, 2000, 2).unwrap();
        assert!(sym.value > 0.0);
        let single = rademacher_mc(&[b], 3, 4, 10, 2).unwrap();
        assert_eq!(single.value, 0.0);
        assert!(rademacher_mc(&zero, 3, 4, 0, 1).is_err());
    }

    #[test]
    fn dataset_and_risks() {
        let g = GridSpec::new(1, 16, 9).unwrap();
        let params = PicardParams::new(0.4, 1.0, 0.5, 0.5, 0.25).unwrap().with_depth(6);
        let law = InitialLaw {
            s_gp: 3.0,
            amplitude: 0.2,
            band: 4,
            s0: 2.0,
            r0: None,
            radius: 0.4,
            seed: 0,
        };
        let zero_f = Nonlinearity::parse("zero", 1.0, 0.5).unwrap();
        let zero_truth = PicardModel::exact(g, params, zero_f).unwrap();
        let data = make_dataset(&law, &zero_truth, 5, 3, 7, 1e-12).unwrap();
        for b in &data {
            let free = zero_truth.propagator().free_evolution(&b.u0).unwrap();
            for (z, t) in b.queries.iter().zip(&b.targets) {
                assert_eq!(free.value(z.time_index, z.flat), *t);
            }
        }
        assert!(make_dataset(&law, &zero_truth, 0, 3, 7, 1e-12).unwrap().is_empty());
        assert_eq!(make_dataset(&law, &zero_truth, 5, 3, 7, 1e-12).unwrap(), data);

        let zero_pred = ConstantModel { value: 0.0, horizon: 0.5 };
        let mut flat = data.clone();
        for b in &mut flat {
            b.targets.iter_mut().for_each(|t| *t = 0.0);
        }
        assert_eq!(empirical_risk(&zero_pred, &flat, 1.0).unwrap().empirical, 0.0);
        for b in &mut flat {
            b.targets.iter_mut().for_each(|t| *t = 1.0);
        }
        assert_eq!(empirical_risk(&zero_pred, &flat, 1.0).unwrap().empirical, 1.0);
    }

    #[test]
    fn erm_prefers_truth_and_breaks_ties_low() {
        let g = GridSpec::new(1, 16, 9).unwrap();
        let params = PicardParams::new(0.4, 1.0, 0.5, 0.5, 0.25).unwrap().with_depth(8);
        let law = InitialLaw {
            s_gp: 2.0,
            amplitude: 0.1,
            band: 4,
            s0: 2.0,
            r0: None,
            radius: 0.4,
            seed: 0,
        };
        let sin = Nonlinearity::parse("sin(a=0.5)", 1.0, 0.5).unwrap();
        let truth = PicardModel::exact(g, params, sin.clone()).unwrap();
        let data = make_dataset(&law, &truth, 16, 4, 3, 1e-12).unwrap();
        let zero = truth
            .with_nonlinearity(Nonlinearity::parse("zero", 1.0, 0.5).unwrap())
            .unwrap();
        let fam = CandidateFamily::new(vec![zero.clone(), truth.clone()], Some(1)).unwrap();
        let out = erm(&fam, &data).unwrap();
        assert_eq!(out.selected, 1);
        let bound = params.truncation_bound(8) + 1e-12;
        assert!(out.risks[1].empirical <= bound * bound);
        let dup = CandidateFamily::new(vec![truth.clone(), truth.clone()], Some(0)).unwrap();
        assert_eq!(erm(&dup, &data).unwrap().selected, 0);
        let only = CandidateFamily::new(vec![truth], Some(0)).unwrap();
        assert_eq!(erm(&only, &data).unwrap().selected, 0);
    }

    #[test]
    fn perturbed_tables_are_admissible() {
        let params = PicardParams::new(0.4, 1.0, 0.5, 0.5, 0.25).unwrap();
        let sin = Nonlinearity::parse("sin(a=0.5)", 1.0, 0.5).unwrap();
        let tables = perturbed_tables(&sin, &params, 0.05, 5, 0.3, 4).unwrap();
        assert_eq!(tables.len(), 5);
        for t in &tables {
            assert!(t.lipschitz() <= 0.5 + 1e-12);
            assert_eq!(t.eval(0.0), 0.0);
        }
        assert_ne!(tables[0], tables[1]);
    }
}
