//! Scalar nonlinearities `F : [-M, M] -> R` with `F(0) = 0` and a certified
//! Lipschitz bound, and the piecewise-linear interpolant `rho_F` that stands in
//! for a one-dimensional ReLU network.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{PicardError, Result};
use crate::spectral::{TorusField, TrajectoryField};

/// Sampling resolution used to certify Lipschitz constants empirically.
pub const LIPSCHITZ_SAMPLES: usize = 10_000;

/// Slack allowed when comparing a certified Lipschitz constant to a class bound.
const LIPSCHITZ_SLACK: f64 = 1e-12;

/// Names accepted by [`Nonlinearity::catalog`].
pub const CATALOG_NAMES: [&str; 8] = [
    "zero",
    "linear",
    "sin",
    "tanh",
    "exp_minus_one",
    "allen_cahn",
    "power",
    "defocusing",
];

pub trait ScalarMap {
    fn eval(&self, x: f64) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum NonlinearityKind {
    Zero,
    /// `a u`
    Linear { a: f64 },
    /// `a sin(u)`
    Sin { a: f64 },
    /// `a tanh(u)`
    Tanh { a: f64 },
    /// `a (e^u - 1)`
    ExpMinusOne { a: f64 },
    /// `a (u - u^3)`
    AllenCahn { a: f64 },
    /// `lambda |u|^{p-1} u`
    Power { lambda: f64, p: f64 },
    /// `-alpha u - beta |u|^{p-1} u`
    Defocusing { alpha: f64, beta: f64, p: f64 },
    Table(PiecewiseLinear),
}

impl NonlinearityKind {
    fn eval(&self, u: f64) -> f64 {
        match self {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Linear { a } => a * u,
            NonlinearityKind::Sin { a } => a * u.sin(),
            NonlinearityKind::Tanh { a } => a * u.tanh(),
            NonlinearityKind::ExpMinusOne { a } => a * u.exp_m1(),
            NonlinearityKind::AllenCahn { a } => a * (u - u * u * u),
            NonlinearityKind::Power { lambda, p } => lambda * signed_power(u, *p),
            NonlinearityKind::Defocusing { alpha, beta, p } => {
                -alpha * u - beta * signed_power(u, *p)
            }
            NonlinearityKind::Table(t) => t.eval(u),
        }
    }

    /// Closed-form Lipschitz constant on `[-m, m]`.
    fn lipschitz_on(&self, m: f64) -> f64 {
        match self {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Linear { a } => a.abs(),
            NonlinearityKind::Sin { a } | NonlinearityKind::Tanh { a } => a.abs(),
            NonlinearityKind::ExpMinusOne { a } => a.abs() * m.exp(),
            NonlinearityKind::AllenCahn { a } => a.abs() * (1.0 - 3.0 * m * m).abs().max(1.0),
            NonlinearityKind::Power { lambda, p } => lambda.abs() * p * m.powf(p - 1.0),
            NonlinearityKind::Defocusing { alpha, beta, p } => alpha + beta * p * m.powf(p - 1.0),
            NonlinearityKind::Table(t) => t.max_slope(),
        }
    }
}

fn signed_power(u: f64, p: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(p)
    }
}

/// An element of the admissible class `F_{M,L}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    interval: f64,
    lipschitz_cert: f64,
    tag: String,
}

impl ScalarMap for Nonlinearity {
    fn eval(&self, x: f64) -> f64 {
        self.kind.eval(x)
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag)
    }
}

impl Nonlinearity {
    /// Builds a catalog member on `[-interval, interval]`, rejecting it when its
    /// Lipschitz constant exceeds `lipschitz_bound`.
    pub fn catalog(
        name: &str,
        params: &BTreeMap<String, f64>,
        interval: f64,
        lipschitz_bound: f64,
    ) -> Result<Self> {
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(PicardError::Domain(format!(
                "interval half-width must be positive, got {interval}"
            )));
        }
        let allowed: &[&str] = match name {
            "zero" => &[],
            "linear" | "sin" | "tanh" | "exp_minus_one" | "allen_cahn" => &["a"],
            "power" => &["lambda", "p"],
            "defocusing" => &["alpha", "beta", "p"],
            other => return Err(PicardError::UnknownNonlinearity(other.to_string())),
        };
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(PicardError::Config(format!(
                "nonlinearity `{name}` has no parameter `{bad}` (allowed: {allowed:?})"
            )));
        }
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let kind = match name {
            "zero" => NonlinearityKind::Zero,
            "linear" => NonlinearityKind::Linear { a: get("a", 1.0) },
            "sin" => NonlinearityKind::Sin { a: get("a", 1.0) },
            "tanh" => NonlinearityKind::Tanh { a: get("a", 1.0) },
            "exp_minus_one" => NonlinearityKind::ExpMinusOne { a: get("a", 1.0) },
            "allen_cahn" => NonlinearityKind::AllenCahn { a: get("a", 1.0) },
            "power" => NonlinearityKind::Power {
                lambda: get("lambda", 1.0),
                p: get("p", 3.0),
            },
            "defocusing" => NonlinearityKind::Defocusing {
                alpha: get("alpha", 1.0),
                beta: get("beta", 0.0),
                p: get("p", 3.0),
            },
            _ => unreachable!(),
        };
        match &kind {
            NonlinearityKind::Power { p, .. } if *p < 1.0 => {
                return Err(PicardError::Config(format!(
                    "power nonlinearity needs p >= 1 for Lipschitz continuity, got {p}"
                )))
            }
            NonlinearityKind::Defocusing { alpha, beta, p } => {
                if *alpha < 0.0 || *beta < 0.0 || *p < 1.0 {
                    return Err(PicardError::Config(format!(
                        "defocusing needs alpha, beta >= 0 and p >= 1, got alpha={alpha} beta={beta} p={p}"
                    )));
                }
            }
            _ => {}
        }
        if params.values().any(|v| !v.is_finite()) {
            return Err(PicardError::Config(format!(
                "nonlinearity `{name}` has non-finite parameters"
            )));
        }
        let lipschitz_cert = kind.lipschitz_on(interval);
        let tag = describe(name, params);
        let out = Self {
            kind,
            interval,
            lipschitz_cert,
            tag,
        };
        out.check_admissible(lipschitz_bound)?;
        Ok(out)
    }

    /// Parses `name` or `name(key=value, ...)`.
    pub fn parse(spec: &str, interval: f64, lipschitz_bound: f64) -> Result<Self> {
        let (name, params) = parse_catalog_spec(spec)?;
        Self::catalog(&name, &params, interval, lipschitz_bound)
    }

    /// Wraps a knot table; the certified constant is its largest secant slope.
    pub fn from_table(table: PiecewiseLinear, tag: impl Into<String>) -> Self {
        let interval = table.half_width();
        let lipschitz_cert = table.max_slope();
        Self {
            kind: NonlinearityKind::Table(table),
            interval,
            lipschitz_cert,
            tag: tag.into(),
        }
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz_cert
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn zero_at_zero(&self) -> bool {
        self.eval(0.0) == 0.0
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            NonlinearityKind::Zero => true,
            NonlinearityKind::Table(t) => t.values().iter().all(|&v| v == 0.0),
            _ => self.lipschitz_cert == 0.0,
        }
    }

    pub fn check_admissible(&self, lipschitz_bound: f64) -> Result<()> {
        if !self.zero_at_zero() {
            return Err(PicardError::Certification(format!(
                "`{}` does not vanish at zero",
                self.tag
            )));
        }
        if self.lipschitz_cert > lipschitz_bound + LIPSCHITZ_SLACK {
            return Err(PicardError::Admissibility {
                tag: self.tag.clone(),
                lipschitz: self.lipschitz_cert,
                bound: lipschitz_bound,
            });
        }
        Ok(())
    }

    /// Largest |secant slope| between adjacent points of a uniform sample of `[-M, M]`.
    pub fn sampled_lipschitz(&self, samples: usize) -> f64 {
        let (xs, ys) = self.sample(samples);
        xs.windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max)
    }

    /// Largest signed secant slope on a uniform sample. Strict dissipativity
    /// with rate `lambda` holds on the sample iff this is `<= -lambda`.
    pub fn sampled_max_slope(&self, samples: usize) -> f64 {
        let (xs, ys) = self.sample(samples);
        xs.windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `a F(a) <= 0` at every sample point.
    pub fn is_defocusing(&self, samples: usize) -> bool {
        let (xs, ys) = self.sample(samples);
        xs.iter().zip(&ys).all(|(x, y)| x * y <= 0.0)
    }

    /// Rate `lambda` of strict dissipativity guaranteed in closed form, if any.
    pub fn dissipation_rate(&self) -> Option<f64> {
        match &self.kind {
            NonlinearityKind::Defocusing { alpha, .. } if *alpha > 0.0 => Some(*alpha),
            NonlinearityKind::Linear { a } if *a < 0.0 => Some(-a),
            _ => None,
        }
    }

    fn sample(&self, samples: usize) -> (Vec<f64>, Vec<f64>) {
        let n = samples.max(2);
        let xs: Vec<f64> = (0..n)
            .map(|k| -self.interval + 2.0 * self.interval * k as f64 / (n - 1) as f64)
            .collect();
        let ys = xs.iter().map(|&x| self.eval(x)).collect();
        (xs, ys)
    }
}

fn describe(name: &str, params: &BTreeMap<String, f64>) -> String {
    if params.is_empty() {
        name.to_string()
    } else {
        let args: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{name}({})", args.join(","))
    }
}

/// Splits `name(key=value, ...)` into its parts.
pub fn parse_catalog_spec(spec: &str) -> Result<(String, BTreeMap<String, f64>)> {
    let spec = spec.trim();
    let mut params = BTreeMap::new();
    let Some(open) = spec.find('(') else {
        return Ok((spec.to_string(), params));
    };
    if !spec.ends_with(')') {
        return Err(PicardError::Config(format!("unbalanced parentheses in `{spec}`")));
    }
    let name = spec[..open].trim().to_string();
    let inner = &spec[open + 1..spec.len() - 1];
    for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| PicardError::Config(format!("expected key=value, got `{part}`")))?;
        let value: f64 = value.trim().parse().map_err(|_| {
            PicardError::Config(format!("parameter `{}` is not a number", key.trim()))
        })?;
        params.insert(key.trim().to_string(), value);
    }
    Ok((name, params))
}

/// Continuous piecewise-affine interpolation on a knot table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl ScalarMap for PiecewiseLinear {
    fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        let last = k.len() - 1;
        // segment index; the end segments extend affinely outside the table
        let seg = match k.partition_point(|&knot| knot <= x) {
            0 => 0,
            i if i > last => last - 1,
            i => i - 1,
        };
        let (x0, x1) = (k[seg], k[seg + 1]);
        let (y0, y1) = (self.values[seg], self.values[seg + 1]);
        if x == x0 {
            return y0;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(PicardError::Config(format!(
                "knot table needs >= 2 matching knots and values, got {} and {}",
                knots.len(),
                values.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(PicardError::Config("knots must be strictly increasing".into()));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(PicardError::Config("knot table has non-finite entries".into()));
        }
        match knots.iter().position(|&k| k == 0.0) {
            Some(i) if values[i] == 0.0 => {}
            Some(_) => {
                return Err(PicardError::Certification(
                    "knot table must vanish at 0".into(),
                ))
            }
            None => {
                return Err(PicardError::Config("knot table must contain 0".into()));
            }
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Network-size surrogate `H`: the number of knots.
    pub fn knot_count(&self) -> usize {
        self.knots.len()
    }

    pub fn half_width(&self) -> f64 {
        self.knots[0].abs().min(self.knots[self.knots.len() - 1].abs())
    }

    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
    }

    pub fn max_slope(&self) -> f64 {
        self.slopes().map(f64::abs).fold(0.0, f64::max)
    }

    /// Number of distinct affine pieces after merging collinear neighbours.
    pub fn affine_pieces(&self) -> usize {
        let slopes: Vec<f64> = self.slopes().collect();
        1 + slopes
            .windows(2)
            .filter(|w| (w[1] - w[0]).abs() > 1e-12 * (1.0 + w[0].abs()))
            .count()
    }

    /// Sup distance to `f` measured on a grid `refine` times finer than the knots.
    pub fn sup_error(&self, f: &impl ScalarMap, refine: usize) -> f64 {
        let refine = refine.max(1);
        let mut worst = 0.0f64;
        for w in self.knots.windows(2) {
            for s in 0..=refine {
                let x = w[0] + (w[1] - w[0]) * s as f64 / refine as f64;
                worst = worst.max((self.eval(x) - f.eval(x)).abs());
            }
        }
        worst
    }
}

/// Properties of a built `rho_F` checked against its construction targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoCertificate {
    pub sup_error: f64,
    pub max_slope: f64,
    pub knot_count: usize,
    pub mesh: f64,
    pub zero_exact: bool,
}

/// Uniform-knot interpolant with mesh `h = min(eta / L, M / 2)` whose knots
/// include `-M`, `0` and `M`.
pub fn build_rho(f: &Nonlinearity, interval: f64, lipschitz_bound: f64, eta: f64) -> Result<PiecewiseLinear> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(PicardError::Domain(format!("accuracy must be positive, got {eta}")));
    }
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(PicardError::Domain(format!(
            "interval half-width must be positive, got {interval}"
        )));
    }
    if lipschitz_bound < 0.0 {
        return Err(PicardError::Domain(format!(
            "Lipschitz bound must be >= 0, got {lipschitz_bound}"
        )));
    }
    if lipschitz_bound == 0.0 && !f.is_zero() {
        return Err(PicardError::Certification(format!(
            "class bound L = 0 but `{}` is not identically zero",
            f.tag()
        )));
    }
    f.check_admissible(lipschitz_bound)?;
    let target = if lipschitz_bound > 0.0 {
        (eta / lipschitz_bound).min(interval / 2.0)
    } else {
        interval / 2.0
    };
    let per_side = (interval / target - 1e-9).ceil().max(1.0) as usize;
    let knots: Vec<f64> = (0..=2 * per_side)
        .map(|k| {
            if k == per_side {
                0.0
            } else {
                interval * (k as f64 - per_side as f64) / per_side as f64
            }
        })
        .collect();
    let values = knots
        .iter()
        .map(|&x| if x == 0.0 { 0.0 } else { f.eval(x) })
        .collect();
    PiecewiseLinear::new(knots, values)
}

pub fn certify_rho(f: &Nonlinearity, rho: &PiecewiseLinear) -> RhoCertificate {
    let mesh = rho
        .knots()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    RhoCertificate {
        sup_error: rho.sup_error(f, 10),
        max_slope: rho.max_slope(),
        knot_count: rho.knot_count(),
        mesh,
        zero_exact: rho.eval(0.0) == 0.0,
    }
}

/// Grid-pointwise composition `(t, x) -> F(u(t, x))`. Fails if some value
/// leaves `[-bound, bound]`.
pub fn apply_pointwise(
    f: &impl ScalarMap,
    u: &TrajectoryField,
    bound: f64,
) -> Result<TrajectoryField> {
    for (slice, field) in u.slices().iter().enumerate() {
        let sup = field.sup_norm();
        if sup > bound {
            return Err(PicardError::DomainViolation {
                slice,
                value: sup,
                bound,
            });
        }
    }
    let slices = u
        .slices()
        .iter()
        .map(|s| s.map(|v| f.eval(v)))
        .collect::<Vec<TorusField>>();
    TrajectoryField::new(*u.grid(), u.horizon(), slices)
}
