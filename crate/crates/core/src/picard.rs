//! The Picard map `T[v](t) = S(t) u0 + K[F(v)](t)`, its iterates from the zero
//! trajectory, a fixed-point reference solver, and error meters.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PicardError, Result};
use crate::nonlinearity::{build_rho, Nonlinearity, ScalarMap};
use crate::semigroup::{Propagator, SemigroupKind};
use crate::spectral::{GridSpec, TorusField, TrajectoryField};

/// Allowed excursion above `M` before an iterate counts as leaving `U_M`.
pub const SELF_MAP_SLACK: f64 = 1e-8;

/// Slack on the initial-data bound `sup |u0| <= R`.
const RADIUS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardParams {
    /// Sup bound on initial data.
    pub r: f64,
    /// Sup bound on solutions.
    pub m: f64,
    /// Lipschitz bound of the nonlinearity class.
    pub l: f64,
    /// Block horizon.
    pub t: f64,
    pub delta: f64,
    #[serde(default = "unit")]
    pub c_s: f64,
    /// Picard depth.
    #[serde(default)]
    pub ell: usize,
    /// Fourier rank `N` of the truncated semigroup.
    #[serde(default)]
    pub rank: usize,
}

fn unit() -> f64 {
    1.0
}

/// One evaluated constraint on the parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub holds: bool,
}

impl std::fmt::Display for Inequality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = if self.strict { "<" } else { "<=" };
        let verdict = if self.holds { "ok" } else { "VIOLATED" };
        write!(f, "{}: {} {} {} [{}]", self.name, self.lhs, op, self.rhs, verdict)
    }
}

impl PicardParams {
    pub fn new(r: f64, m: f64, l: f64, t: f64, delta: f64) -> Result<Self> {
        let params = Self {
            r,
            m,
            l,
            t,
            delta,
            c_s: 1.0,
            ell: 1,
            rank: 0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_depth(mut self, ell: usize) -> Self {
        self.ell = ell;
        self
    }

    pub fn with_rank(mut self, rank: usize) -> Self {
        self.rank = rank;
        self
    }

    /// Every constraint with both sides evaluated.
    pub fn inequalities(&self) -> Vec<Inequality> {
        let le = |name, lhs: f64, rhs: f64| Inequality {
            name,
            lhs,
            rhs,
            strict: false,
            holds: lhs <= rhs * (1.0 + 1e-12) + 1e-15,
        };
        let lt = |name, lhs: f64, rhs: f64| Inequality {
            name,
            lhs,
            rhs,
            strict: true,
            holds: lhs < rhs,
        };
        vec![
            le("R + T*L*M <= M", self.r + self.t * self.l * self.m, self.m),
            le("T*L <= delta", self.t * self.l, self.delta),
            lt("delta < 1", self.delta, 1.0),
            lt("0 < delta", 0.0, self.delta),
            lt("0 < M", 0.0, self.m),
            lt("0 < T", 0.0, self.t),
            le("0 <= R", 0.0, self.r),
            le("0 <= L", 0.0, self.l),
            le("C_S <= 1", self.c_s, 1.0),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let values = [self.r, self.m, self.l, self.t, self.delta, self.c_s];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PicardError::Config("parameters must be finite".into()));
        }
        let failed: Vec<String> = self
            .inequalities()
            .into_iter()
            .filter(|i| !i.holds)
            .map(|i| i.to_string())
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(PicardError::Config(failed.join("; ")))
        }
    }

    /// `M delta^ell / (1 - delta)`.
    pub fn truncation_bound(&self, ell: usize) -> f64 {
        self.m * self.delta.powi(ell as i32) / (1.0 - self.delta)
    }

    /// `(1 - delta^ell) / (1 - delta) * T * eta`.
    pub fn rho_bound(&self, ell: usize, eta: f64) -> f64 {
        (1.0 - self.delta.powi(ell as i32)) / (1.0 - self.delta) * self.t * eta
    }
}

/// Picard transition model: exact semigroup with `F`, or the Fejer-truncated
/// semigroup with a knot table (the Picard-type FNO).
#[derive(Debug, Clone)]
pub struct PicardModel {
    params: PicardParams,
    nonlinearity: Nonlinearity,
    propagator: Arc<Propagator>,
}

/// Result of [`PicardModel::solve_fixed_point`].
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub solution: TrajectoryField,
    pub iterations: usize,
    pub last_increment: f64,
    /// `delta / (1 - delta) * last_increment`.
    pub error_bound: f64,
}

impl PicardModel {
    pub fn new(
        grid: GridSpec,
        params: PicardParams,
        nonlinearity: Nonlinearity,
        kind: SemigroupKind,
    ) -> Result<Self> {
        let propagator = Arc::new(Propagator::new(grid, kind, params.t)?);
        Self::with_propagator(params, nonlinearity, propagator)
    }

    /// Shares precomputed quadrature weights between models on the same grid.
    pub fn with_propagator(
        params: PicardParams,
        nonlinearity: Nonlinearity,
        propagator: Arc<Propagator>,
    ) -> Result<Self> {
        params.validate()?;
        nonlinearity.check_admissible(params.l)?;
        if nonlinearity.interval() < params.m * (1.0 - 1e-12) {
            return Err(PicardError::Config(format!(
                "`{}` is certified on [-{}, {}] but M = {}",
                nonlinearity.tag(),
                nonlinearity.interval(),
                nonlinearity.interval(),
                params.m
            )));
        }
        if (propagator.horizon() - params.t).abs() > 1e-15 * params.t.max(1.0) {
            return Err(PicardError::Config(format!(
                "propagator horizon {} differs from T = {}",
                propagator.horizon(),
                params.t
            )));
        }
        Ok(Self {
            params,
            nonlinearity,
            propagator,
        })
    }

    /// Exact semigroup with `F` itself.
    pub fn exact(grid: GridSpec, params: PicardParams, f: Nonlinearity) -> Result<Self> {
        Self::new(grid, params, f, SemigroupKind::Exact)
    }

    /// Picard-type FNO: truncated semigroup of rank `params.rank` with `rho_F` at accuracy `eta`.
    pub fn fno(grid: GridSpec, params: PicardParams, f: &Nonlinearity, eta: f64) -> Result<Self> {
        let rho = build_rho(f, params.m, params.l, eta)?;
        let tag = format!("rho[{}; eta={eta}]", f.tag());
        Self::new(
            grid,
            params,
            Nonlinearity::from_table(rho, tag),
            SemigroupKind::Truncated { rank: params.rank },
        )
    }

    pub fn params(&self) -> &PicardParams {
        &self.params
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn kind(&self) -> SemigroupKind {
        self.propagator.kind()
    }

    pub fn grid(&self) -> &GridSpec {
        self.propagator.grid()
    }

    pub fn propagator(&self) -> &Arc<Propagator> {
        &self.propagator
    }

    pub fn depth(&self) -> usize {
        self.params.ell
    }

    /// Same model with a different depth.
    pub fn at_depth(&self, ell: usize) -> Self {
        let mut out = self.clone();
        out.params.ell = ell;
        out
    }

    /// Same semigroup and parameters with another nonlinearity.
    pub fn with_nonlinearity(&self, f: Nonlinearity) -> Result<Self> {
        Self::with_propagator(self.params, f, Arc::clone(&self.propagator))
    }

    fn check_initial(&self, u0: &TorusField) -> Result<()> {
        self.propagator.check_field(u0)?;
        let sup = u0.sup_norm();
        if sup > self.params.r + RADIUS_SLACK {
            return Err(PicardError::Domain(format!(
                "initial datum has sup norm {sup} > R = {}",
                self.params.r
            )));
        }
        Ok(())
    }

    fn check_iterate(&self, v: &TrajectoryField) -> Result<()> {
        let bound = self.params.m + SELF_MAP_SLACK;
        for (slice, field) in v.slices().iter().enumerate() {
            let sup = field.sup_norm();
            if !(sup <= bound) {
                return Err(PicardError::DomainViolation {
                    slice,
                    value: sup,
                    bound: self.params.m,
                });
            }
        }
        Ok(())
    }

    fn free_part(&self, u0: &TorusField) -> Vec<Vec<Complex64>> {
        self.propagator
            .free_evolution_spectral(&u0.spectrum_unchecked())
    }

    fn step_from(&self, free: &[Vec<Complex64>], v: &TrajectoryField) -> TrajectoryField {
        let g: Vec<Vec<Complex64>> = v
            .slices()
            .iter()
            .map(|s| {
                s.map(|x| self.nonlinearity.eval(x))
                    .spectrum_unchecked()
                    .into_coefficients()
            })
            .collect();
        let mut out = self.propagator.duhamel_spectral(&g);
        for (o, f) in out.iter_mut().zip(free) {
            for (a, b) in o.iter_mut().zip(f) {
                *a += b;
            }
        }
        self.propagator.synthesize(out)
    }

    /// One application of the Picard map.
    pub fn picard_step(&self, u0: &TorusField, v: &TrajectoryField) -> Result<TrajectoryField> {
        self.check_initial(u0)?;
        self.propagator.check_trajectory(v)?;
        self.check_iterate(v)?;
        let free = self.free_part(u0);
        Ok(self.step_from(&free, v))
    }

    /// Picard map without the `R` and `M` preconditions, for audits on arbitrary inputs.
    pub fn picard_map_unchecked(&self, u0: &TorusField, v: &TrajectoryField) -> Result<TrajectoryField> {
        self.propagator.check_field(u0)?;
        self.propagator.check_trajectory(v)?;
        let free = self.free_part(u0);
        Ok(self.step_from(&free, v))
    }

    /// `u^{(ell)}` with `u^{(0)} = 0`.
    pub fn iterate(&self, u0: &TorusField, ell: usize) -> Result<TrajectoryField> {
        let mut all = self.iterates(u0, ell)?;
        Ok(all.pop().expect("at least the zero iterate"))
    }

    /// `u^{(0)}, ..., u^{(ell)}`.
    pub fn iterates(&self, u0: &TorusField, ell: usize) -> Result<Vec<TrajectoryField>> {
        self.check_initial(u0)?;
        let free = self.free_part(u0);
        let mut out = Vec::with_capacity(ell + 1);
        out.push(TrajectoryField::zeros(*self.grid(), self.params.t));
        for _ in 0..ell {
            let next = self.step_from(&free, out.last().expect("nonempty"));
            self.check_iterate(&next)?;
            out.push(next);
        }
        Ok(out)
    }

    /// Output of the model at its configured depth.
    pub fn predict(&self, u0: &TorusField) -> Result<TrajectoryField> {
        self.iterate(u0, self.params.ell)
    }

    /// Iterates until `||u^{(k+1)} - u^{(k)}|| <= tol (1 - delta)`.
    pub fn solve_fixed_point(&self, u0: &TorusField, tol: f64) -> Result<FixedPoint> {
        if !(tol > 0.0) {
            return Err(PicardError::Domain(format!("tolerance must be positive, got {tol}")));
        }
        self.check_initial(u0)?;
        let delta = self.params.delta;
        let cap = 10 * ((tol.ln() / delta.ln()).ceil().max(1.0) as usize);
        let free = self.free_part(u0);
        let mut current = TrajectoryField::zeros(*self.grid(), self.params.t);
        let mut increment = f64::INFINITY;
        for k in 1..=cap {
            let next = self.step_from(&free, &current);
            self.check_iterate(&next)?;
            increment = next.distance(&current)?;
            current = next;
            if increment <= tol * (1.0 - delta) {
                return Ok(FixedPoint {
                    solution: current,
                    iterations: k,
                    last_increment: increment,
                    error_bound: delta / (1.0 - delta) * increment,
                });
            }
        }
        Err(PicardError::SolverStall {
            iterations: cap,
            increment,
        })
    }

    /// `sup |u^{(ell)} - reference|`.
    pub fn truncation_error(
        &self,
        u0: &TorusField,
        ell: usize,
        reference: &TrajectoryField,
    ) -> Result<f64> {
        self.iterate(u0, ell)?.distance(reference)
    }
}

/// Worst-case gaps over a test set between the exact `ell`-step iterate, the
/// exact-semigroup model with `rho`, and the FNO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImplementationReport {
    pub total: f64,
    /// Exact semigroup, `F` versus `rho`.
    pub rho_term: f64,
    /// Exact versus truncated semigroup, both with `rho`.
    pub fourier_term: f64,
    pub depth: usize,
}

pub fn implementation_error(
    exact: &PicardModel,
    fno: &PicardModel,
    test_set: &[TorusField],
) -> Result<ImplementationReport> {
    if exact.depth() != fno.depth() {
        return Err(PicardError::Config(format!(
            "depth mismatch: exact model has {}, FNO has {}",
            exact.depth(),
            fno.depth()
        )));
    }
    let middle = exact.with_nonlinearity(fno.nonlinearity().clone())?;
    let ell = exact.depth();
    let mut report = ImplementationReport {
        total: 0.0,
        rho_term: 0.0,
        fourier_term: 0.0,
        depth: ell,
    };
    for u0 in test_set {
        let a = exact.iterate(u0, ell)?;
        let b = middle.iterate(u0, ell)?;
        let c = fno.iterate(u0, ell)?;
        report.total = report.total.max(a.distance(&c)?);
        report.rho_term = report.rho_term.max(a.distance(&b)?);
        report.fourier_term = report.fourier_term.max(b.distance(&c)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PicardParams {
        PicardParams::new(0.4, 1.0, 0.5, 0.5, 0.25).unwrap()
    }

    fn grid(n_t: usize) -> GridSpec {
        GridSpec::new(1, 32, n_t).unwrap()
    }

    fn linear_model(n_t: usize) -> PicardModel {
        let f = Nonlinearity::parse("linear(a=0.5)", 1.0, 0.5).unwrap();
        PicardModel::exact(grid(n_t), params(), f).unwrap()
    }

    #[test]
    fn parameter_inequalities() {
        assert!(PicardParams::new(0.4, 1.0, 0.5, 0.5, 0.25).is_ok());
        let err = PicardParams::new(0.4, 1.0, 0.5, 0.5, 1.0).unwrap_err();
        assert!(err.to_string().contains("delta < 1"));
        let err = PicardParams::new(1.0, 1.0, 0.5, 0.5, 0.25).unwrap_err();
        assert!(err.to_string().contains("R + T*L*M <= M"));
        let ok = params().inequalities();
        assert_eq!(ok[0].lhs, 0.65);
        assert_eq!(ok[1].lhs, 0.25);
        assert!(ok.iter().all(|i| i.holds));
        assert!((params().truncation_bound(4) - 0.25f64.powi(4) / 0.75).abs() < 1e-16);
        let p = PicardParams::new(0.4, 1.0, 0.5, 0.5, 0.5).unwrap();
        assert_eq!(p.truncation_bound(4), 0.125);
    }

    #[test]
    fn step_with_zero_nonlinearity_is_free_flow() {
        let g = grid(9);
        let zero = Nonlinearity::parse("zero", 1.0, 0.5).unwrap();
        let model = PicardModel::exact(g, params(), zero).unwrap();
        let u0 = TorusField::from_fn(g, |x| 0.3 * x[0].cos());
        let v = TrajectoryField::constant(g, 0.5, 0.7);
        let out = model.picard_step(&u0, &v).unwrap();
        for (t, s) in out.times().iter().zip(out.slices()) {
            let expect = TorusField::from_fn(g, |x| 0.3 * (-t).exp() * x[0].cos());
            assert!(s.distance(&expect).unwrap() < 1e-15);
        }
        assert!(out.slice(0).distance(&u0).unwrap() < 1e-16);
        let zero_u0 = TorusField::zeros(g);
        let none = model
            .picard_step(&zero_u0, &TrajectoryField::zeros(g, 0.5))
            .unwrap();
        assert_eq!(none.sup_norm(), 0.0);
    }

    #[test]
    fn linear_step_zero_mode() {
        let model = linear_model(5);
        let g = *model.grid();
        let u0 = TorusField::constant(g, 0.4);
        let v = TrajectoryField::constant(g, 0.5, 0.4);
        let out = model.picard_step(&u0, &v).unwrap();
        // scaled by 0.4 to fit R: 0.4 * (1 + 0.5 * 0.5)
        assert!((out.last().value(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_iterates_are_taylor_sums() {
        let model = linear_model(5);
        let g = *model.grid();
        let u0 = TorusField::constant(g, 0.4);
        assert_eq!(model.iterate(&u0, 0).unwrap().sup_norm(), 0.0);
        let one = model.iterate(&u0, 1).unwrap();
        assert!(one.distance(&TrajectoryField::constant(g, 0.5, 0.4)).unwrap() < 1e-16);
        // the quadrature is exact on polynomials only up to degree 1 in time,
        // so compare against a fine time grid
        let fine = linear_model(4097);
        let three = fine.iterate(&TorusField::constant(*fine.grid(), 0.4), 3).unwrap();
        let expect = 0.4 * 1.28125;
        assert!((three.last().value(0) - expect).abs() < 1e-7);
    }

    #[test]
    fn fixed_point_of_linear_and_decaying_flows() {
        let model = linear_model(4097);
        let g = *model.grid();
        let u0 = TorusField::constant(g, 0.4);
        let fp = model.solve_fixed_point(&u0, 1e-12).unwrap();
        assert!((fp.solution.last().value(0) - 0.4 * 0.25f64.exp()).abs() < 1e-8);
        assert!(fp.error_bound <= 1e-12);
        let f = Nonlinearity::parse("linear(a=-0.5)", 1.0, 0.5).unwrap();
        let decay = PicardModel::exact(g, params(), f).unwrap();
        let fp = decay.solve_fixed_point(&u0, 1e-12).unwrap();
        let zero_mode: Vec<f64> = fp.solution.slices().iter().map(|s| s.value(0)).collect();
        assert!(zero_mode.windows(2).all(|w| w[1] < w[0]));
        assert!((zero_mode[4096] - 0.4 * (-0.25f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_nonlinearity_converges_after_one_step() {
        let g = grid(9);
        let zero = Nonlinearity::parse("zero", 1.0, 0.5).unwrap();
        let model = PicardModel::exact(g, params(), zero).unwrap();
        let u0 = TorusField::from_fn(g, |x| 0.2 * x[0].sin());
        let fp = model.solve_fixed_point(&u0, 1e-12).unwrap();
        assert_eq!(fp.iterations, 2);
        assert_eq!(fp.solution, model.iterate(&u0, 1).unwrap());
    }

    #[test]
    fn truncation_error_is_taylor_remainder() {
        let model = linear_model(4097);
        let g = *model.grid();
        let u0 = TorusField::constant(g, 1.0);
        // unit datum violates R; use the unchecked map for the scalar oracle
        let mut v = TrajectoryField::zeros(g, 0.5);
        for _ in 0..3 {
            v = model.picard_map_unchecked(&u0, &v).unwrap();
        }
        let err = (v.last().value(0) - 0.25f64.exp()).abs();
        assert!((err - 0.002_775).abs() < 1e-5, "{err}");
    }

    #[test]
    fn preconditions_are_enforced() {
        let model = linear_model(5);
        let g = *model.grid();
        let big = TorusField::constant(g, 0.5);
        assert!(matches!(
            model.picard_step(&big, &TrajectoryField::zeros(g, 0.5)),
            Err(PicardError::Domain(_))
        ));
        let u0 = TorusField::zeros(g);
        assert!(matches!(
            model.picard_step(&u0, &TrajectoryField::constant(g, 0.5, 1.5)),
            Err(PicardError::DomainViolation { .. })
        ));
        let other = PicardModel::exact(grid(5), params(), Nonlinearity::parse("zero", 1.0, 0.5).unwrap())
            .unwrap()
            .at_depth(3);
        let fno = PicardModel::fno(grid(5), params().with_rank(4), &Nonlinearity::parse("zero", 1.0, 0.5).unwrap(), 0.1)
            .unwrap();
        assert!(implementation_error(&other, &fno, &[u0]).is_err());
    }

    #[test]
    fn fno_of_zero_initial_datum_is_zero() {
        let g = grid(9);
        let f = Nonlinearity::parse("sin(a=0.5)", 1.0, 0.5).unwrap();
        let fno = PicardModel::fno(g, params().with_rank(8).with_depth(4), &f, 0.01).unwrap();
        assert_eq!(fno.predict(&TorusField::zeros(g)).unwrap().sup_norm(), 0.0);
    }
}
