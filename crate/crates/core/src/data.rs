//! Initial data drawn from a band-limited Gaussian spectral law conditioned on
//! a Sobolev ball, point sensors, and trigonometric reconstruction.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PicardError, Result};
use crate::spectral::{
    fft_cube, mode_norm_sq, spectrum_sobolev_norm, GridSpec, Spectrum, TorusField, MAX_DIM,
};

/// Raw draws allowed per accepted sample before the law is declared misconfigured.
pub const MAX_DRAWS: usize = 10_000;

/// Smallest acceptable acceptance rate of the ball conditioning.
pub const MIN_ACCEPTANCE: f64 = 1e-3;

/// `{v : ||v||_{H^{s0}} <= r0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevBall {
    pub s0: f64,
    pub r0: f64,
}

impl SobolevBall {
    /// Rescales `spectrum` onto the ball if it lies outside.
    pub fn project(&self, spectrum: &mut Spectrum) {
        let norm = spectrum_sobolev_norm(spectrum, self.s0);
        if norm > self.r0 {
            let factor = self.r0 / norm;
            for c in spectrum.coefficients_mut() {
                *c *= factor;
            }
        }
    }
}

/// `sqrt(sum_{|xi_r| <= band} (1 + |xi|^2)^{-s0})`: for fields with that band,
/// `sup |u| <= C * ||u||_{H^{s0}}` by Cauchy-Schwarz.
pub fn embedding_constant(dim: usize, band: usize, s0: f64) -> f64 {
    let k = band as i64;
    let mut total = 0.0;
    let mut xi = [0i64; MAX_DIM];
    let side = 2 * band + 1;
    for flat in 0..side.pow(dim as u32) {
        let mut rest = flat;
        for axis in (0..dim).rev() {
            xi[axis] = (rest % side) as i64 - k;
            rest /= side;
        }
        total += (1.0 + mode_norm_sq(&xi)).powf(-s0);
    }
    total.sqrt()
}

/// Centered Gaussian coefficients with variance `amplitude^2 (1 + |xi|^2)^{-s_gp}`
/// on `|xi_r| <= band`, conditioned on `||u||_{H^{s0}} <= r0` and `sup |u| <= radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialLaw {
    pub s_gp: f64,
    pub amplitude: f64,
    pub band: usize,
    pub s0: f64,
    /// Ball radius; `radius / C_sob` when absent.
    #[serde(default)]
    pub r0: Option<f64>,
    /// Sup bound `R` every sample must satisfy.
    pub radius: f64,
    #[serde(default)]
    pub seed: u64,
}

impl InitialLaw {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn ball(&self, dim: usize) -> SobolevBall {
        SobolevBall {
            s0: self.s0,
            r0: self
                .r0
                .unwrap_or_else(|| self.radius / embedding_constant(dim, self.band, self.s0)),
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let bad = |msg: String| Err(PicardError::LawMisconfigured(msg));
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return bad(format!("amplitude must be >= 0, got {}", self.amplitude));
        }
        if !self.s_gp.is_finite() {
            return bad("spectral decay exponent must be finite".into());
        }
        if !(self.s0 > grid.dim() as f64 / 2.0) {
            return bad(format!(
                "Sobolev index {} must exceed d/2 = {}",
                self.s0,
                grid.dim() as f64 / 2.0
            ));
        }
        if 2 * self.band >= grid.points_per_axis() {
            return bad(format!(
                "band {} needs more than {} points per axis",
                self.band,
                2 * self.band
            ));
        }
        if !(self.radius > 0.0) {
            return bad(format!("sup radius must be positive, got {}", self.radius));
        }
        if let Some(r0) = self.r0 {
            if !(r0 > 0.0 && r0.is_finite()) {
                return bad(format!("ball radius must be positive, got {r0}"));
            }
        }
        Ok(())
    }

    /// One unconditioned draw.
    fn draw(&self, grid: &GridSpec, std_devs: &[(usize, usize, f64)], rng: &mut ChaCha8Rng) -> Spectrum {
        let mut spectrum = Spectrum::zeros(*grid);
        let coeffs = spectrum.coefficients_mut();
        for &(i, j, sd) in std_devs {
            if i == j {
                let g: f64 = rng.sample(StandardNormal);
                coeffs[i] = Complex64::new(sd * g, 0.0);
            } else {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let c = Complex64::new(a, b) * (sd / 2f64.sqrt());
                coeffs[i] = c;
                coeffs[j] = c.conj();
            }
        }
        spectrum
    }

    /// `(index, index of -xi, standard deviation)` for one representative per conjugate pair.
    fn modes(&self, grid: &GridSpec) -> Vec<(usize, usize, f64)> {
        let band = self.band as i64;
        let mut out = Vec::new();
        for i in 0..grid.len() {
            let xi = grid.mode(i);
            if xi.iter().any(|f| f.abs() > band) {
                continue;
            }
            match xi.iter().find(|&&f| f != 0) {
                Some(&f) if f < 0 => continue,
                _ => {}
            }
            let neg: Vec<i64> = xi.iter().map(|f| -f).collect();
            let j = grid.mode_index(&neg).expect("band below Nyquist");
            let sd = self.amplitude * (1.0 + mode_norm_sq(&xi)).powf(-self.s_gp / 2.0);
            out.push((i, j, sd));
        }
        out
    }

    fn accepts(&self, ball: &SobolevBall, spectrum: &Spectrum) -> Option<TorusField> {
        if spectrum_sobolev_norm(spectrum, ball.s0) > ball.r0 {
            return None;
        }
        let field = spectrum.to_field();
        (field.sup_norm() <= self.radius).then_some(field)
    }

    fn sample_one(
        &self,
        grid: &GridSpec,
        modes: &[(usize, usize, f64)],
        ball: &SobolevBall,
        index: u64,
    ) -> Result<(TorusField, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        for attempt in 1..=MAX_DRAWS {
            let spectrum = self.draw(grid, modes, &mut rng);
            if let Some(field) = self.accepts(ball, &spectrum) {
                return Ok((field, attempt));
            }
        }
        Err(PicardError::LawMisconfigured(format!(
            "sample {index}: no draw accepted in {MAX_DRAWS} attempts (acceptance < {MIN_ACCEPTANCE})"
        )))
    }
}

/// `count` samples from stream indices `0..count`.
pub fn sample_initial(law: &InitialLaw, grid: &GridSpec, count: usize) -> Result<Vec<TorusField>> {
    sample_range(law, grid, 0, count)
}

/// Samples from stream indices `start..start + count`; disjoint ranges give
/// independent sets.
pub fn sample_range(
    law: &InitialLaw,
    grid: &GridSpec,
    start: u64,
    count: usize,
) -> Result<Vec<TorusField>> {
    law.validate(grid)?;
    let modes = law.modes(grid);
    let ball = law.ball(grid.dim());
    let drawn = (0..count as u64)
        .into_par_iter()
        .map(|k| law.sample_one(grid, &modes, &ball, start + k))
        .collect::<Result<Vec<_>>>()?;
    let draws: usize = drawn.iter().map(|(_, d)| d).sum();
    if draws >= MAX_DRAWS && (count as f64) < MIN_ACCEPTANCE * draws as f64 {
        return Err(PicardError::LawMisconfigured(format!(
            "acceptance rate {} below {MIN_ACCEPTANCE} after {draws} draws",
            count as f64 / draws as f64
        )));
    }
    Ok(drawn.into_iter().map(|(f, _)| f).collect())
}

/// Fraction of `draws` unconditioned draws that land in the ball and the sup bound.
pub fn acceptance_rate(law: &InitialLaw, grid: &GridSpec, draws: usize) -> Result<f64> {
    law.validate(grid)?;
    let modes = law.modes(grid);
    let ball = law.ball(grid.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(law.seed);
    rng.set_stream(u64::MAX);
    let mut accepted = 0usize;
    for _ in 0..draws {
        let spectrum = law.draw(grid, &modes, &mut rng);
        if law.accepts(&ball, &spectrum).is_some() {
            accepted += 1;
        }
    }
    Ok(accepted as f64 / draws.max(1) as f64)
}

/// Point sensors on grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorSet {
    grid: GridSpec,
    indices: Vec<usize>,
    /// Sensors per axis when the set is an equispaced tensor grid.
    per_axis: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub readings: Vec<f64>,
}

impl SensorSet {
    /// Tensor grid of `per_axis` equispaced sensors per axis; `per_axis` must divide the grid size.
    pub fn equispaced(grid: GridSpec, per_axis: usize) -> Result<Self> {
        let m = grid.points_per_axis();
        if per_axis == 0 || !m.is_multiple_of(per_axis) {
            return Err(PicardError::Config(format!(
                "{per_axis} sensors per axis do not divide the {m}-point grid"
            )));
        }
        let stride = m / per_axis;
        let dim = grid.dim();
        let count = per_axis.pow(dim as u32);
        let mut indices = Vec::with_capacity(count);
        let mut axis_idx = [0usize; MAX_DIM];
        for flat in 0..count {
            let mut rest = flat;
            for axis in (0..dim).rev() {
                axis_idx[axis] = (rest % per_axis) * stride;
                rest /= per_axis;
            }
            indices.push(grid.flat_index(&axis_idx[..dim]));
        }
        Ok(Self {
            grid,
            indices,
            per_axis: Some(per_axis),
        })
    }

    /// Arbitrary sensor coordinates; each must coincide with a grid node.
    pub fn from_points(grid: GridSpec, points: &[Vec<f64>]) -> Result<Self> {
        let m = grid.points_per_axis() as f64;
        let mut indices = Vec::with_capacity(points.len());
        for p in points {
            if p.len() != grid.dim() {
                return Err(PicardError::Config(format!(
                    "sensor {p:?} has {} coordinates, grid has {}",
                    p.len(),
                    grid.dim()
                )));
            }
            let mut axis_idx = [0usize; MAX_DIM];
            for (axis, &x) in p.iter().enumerate() {
                let k = x.rem_euclid(2.0 * PI) * m / (2.0 * PI);
                let r = k.round();
                if (k - r).abs() > 1e-9 {
                    return Err(PicardError::Config(format!(
                        "sensor {p:?} is not on the grid"
                    )));
                }
                axis_idx[axis] = (r as usize) % grid.points_per_axis();
            }
            indices.push(grid.flat_index(&axis_idx[..grid.dim()]));
        }
        Ok(Self {
            grid,
            indices,
            per_axis: None,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn per_axis(&self) -> Option<usize> {
        self.per_axis
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn locations(&self) -> Vec<Vec<f64>> {
        self.indices
            .iter()
            .map(|&i| self.grid.point(i)[..self.grid.dim()].to_vec())
            .collect()
    }

    /// `P_m u0`.
    pub fn observe(&self, u0: &TorusField) -> Result<Observation> {
        if *u0.grid() != self.grid {
            return Err(PicardError::Config(
                "field grid does not match the sensor grid".into(),
            ));
        }
        Ok(Observation {
            readings: self.indices.iter().map(|&i| u0.value(i)).collect(),
        })
    }
}

/// Trigonometric interpolation through equispaced readings (Nyquist term
/// split evenly between `+-s/2`), followed by projection onto `ball`.
pub fn reconstruct(sensors: &SensorSet, obs: &Observation, ball: &SobolevBall) -> Result<TorusField> {
    let s = sensors.per_axis.ok_or_else(|| {
        PicardError::Config("reconstruction needs equispaced tensor sensors".into())
    })?;
    if obs.readings.len() != sensors.len() {
        return Err(PicardError::Config(format!(
            "expected {} readings, got {}",
            sensors.len(),
            obs.readings.len()
        )));
    }
    if let Some(i) = obs.readings.iter().position(|v| !v.is_finite()) {
        return Err(PicardError::NonFinite { index: i });
    }
    let grid = sensors.grid;
    let dim = grid.dim();
    let m = grid.points_per_axis();
    let mut coarse: Vec<Complex64> = obs.readings.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_cube(dim, s, &mut coarse, false);
    let scale = 1.0 / coarse.len() as f64;

    // per-axis targets (fine frequency, weight) of each coarse slot
    let targets: Vec<Vec<(i64, f64)>> = (0..s)
        .map(|k| {
            let (k, s_i, m_i) = (k as i64, s as i64, m as i64);
            if s % 2 == 0 && k == s_i / 2 {
                if s == m {
                    vec![(-m_i / 2, 1.0)]
                } else {
                    vec![(s_i / 2, 0.5), (-s_i / 2, 0.5)]
                }
            } else if 2 * k < s_i {
                vec![(k, 1.0)]
            } else {
                vec![(k - s_i, 1.0)]
            }
        })
        .collect();

    let mut spectrum = Spectrum::zeros(grid);
    let fine = spectrum.coefficients_mut();
    let mut axis_idx = [0usize; MAX_DIM];
    for (flat, &c) in coarse.iter().enumerate() {
        let mut rest = flat;
        for axis in (0..dim).rev() {
            axis_idx[axis] = rest % s;
            rest /= s;
        }
        let mut stack: Vec<(Vec<i64>, f64)> = vec![(Vec::with_capacity(dim), 1.0)];
        for &k in &axis_idx[..dim] {
            stack = stack
                .into_iter()
                .flat_map(|(xi, w)| {
                    targets[k].iter().map(move |&(f, wf)| {
                        let mut next = xi.clone();
                        next.push(f);
                        (next, w * wf)
                    })
                })
                .collect();
        }
        for (xi, w) in stack {
            let i = grid.mode_index(&xi).expect("sensor band fits the grid");
            fine[i] += c * (w * scale);
        }
    }
    ball.project(&mut spectrum);
    Ok(spectrum.to_field())
}

/// Monte-Carlo mean of `sup |E(P_m u0) - u0|^2` over `n_mc` samples of the law.
pub fn reconstruction_error(law: &InitialLaw, sensors: &SensorSet, n_mc: usize) -> Result<f64> {
    let grid = sensors.grid;
    let ball = law.ball(grid.dim());
    let samples = sample_initial(law, &grid, n_mc.max(1))?;
    let errs = samples
        .par_iter()
        .map(|u0| {
            let rec = reconstruct(sensors, &sensors.observe(u0)?, &ball)?;
            let e = rec.distance(u0)?;
            Ok(e * e)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}
