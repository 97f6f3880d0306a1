//! Heat semigroup `e^{t Delta}` on the torus, its Fejer-truncated variant
//! `S_N(t) = P_N e^{t Delta}`, and the Duhamel operator
//! `K[g](t) = int_0^t S(t - tau) g(tau) dtau`.
//!
//! The Duhamel integral is evaluated per Fourier mode by integrating the
//! piecewise-linear-in-time interpolant of `g_hat(., xi)` exactly against the
//! exponential kernel. With `z = lambda h`, `lambda = |xi|^2`, one step reads
//!
//! ```text
//! y_{j+1} = e^{-z} y_j + h psi(z) g_j + h (phi(z) - psi(z)) g_{j+1}
//! phi(z) = (1 - e^{-z}) / z,   psi(z) = (1 - (1 + z) e^{-z}) / z^2
//! ```
//!
//! which reduces to the trapezoid rule at `lambda = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PicardError, Result};
use crate::spectral::{
    fejer_mask, fft_nd, mode_norm_sq, GridSpec, Spectrum, TorusField, TrajectoryField,
};

/// Below this `z` the quadrature weights come from their Taylor series.
const SERIES_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SemigroupKind {
    Exact,
    Truncated { rank: usize },
}

impl SemigroupKind {
    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        match self {
            SemigroupKind::Exact => Ok(()),
            SemigroupKind::Truncated { rank } => grid.check_rank(*rank),
        }
    }

    /// Output weight applied to mode `xi`: 1 for the exact flow, the Fejer mask otherwise.
    pub fn mask(&self, xi: &[i64]) -> f64 {
        match self {
            SemigroupKind::Exact => 1.0,
            SemigroupKind::Truncated { rank } => fejer_mask(*rank, xi),
        }
    }
}

/// `e^{-t |xi|^2}`.
pub fn heat_multiplier(xi: &[i64], t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(PicardError::Domain(format!("time must be >= 0, got {t}")));
    }
    let norm_sq: f64 = xi.iter().map(|&f| (f * f) as f64).sum();
    Ok((-t * norm_sq).exp())
}

pub fn apply_semigroup(kind: SemigroupKind, f: &TorusField, t: f64) -> Result<TorusField> {
    kind.check(f.grid())?;
    if t.is_nan() || t < 0.0 {
        return Err(PicardError::Domain(format!("time must be >= 0, got {t}")));
    }
    Ok(f
        .to_spectrum()?
        .multiply(|xi| kind.mask(xi) * (-t * mode_norm_sq(xi)).exp())
        .to_field())
}

pub fn duhamel(kind: SemigroupKind, g: &TrajectoryField) -> Result<TrajectoryField> {
    let propagator = Propagator::new(*g.grid(), kind, g.horizon())?;
    let spectra = g
        .slices()
        .iter()
        .map(|s| s.to_spectrum().map(|sp| sp.coefficients().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let out = propagator.duhamel_spectral(&spectra);
    Ok(propagator.synthesize(out))
}

/// `phi(z) = (1 - e^{-z}) / z` and `psi(z) = (1 - (1 + z) e^{-z}) / z^2`.
fn quadrature_factors(z: f64) -> (f64, f64) {
    if z < SERIES_THRESHOLD {
        let z2 = z * z;
        let z3 = z2 * z;
        let z4 = z3 * z;
        let phi = 1.0 - z / 2.0 + z2 / 6.0 - z3 / 24.0 + z4 / 120.0;
        let psi = 0.5 - z / 3.0 + z2 / 8.0 - z3 / 30.0 + z4 / 144.0;
        (phi, psi)
    } else {
        let e = (-z).exp();
        let phi = -(-z).exp_m1() / z;
        let psi = (-(-z).exp_m1() - z * e) / (z * z);
        (phi, psi)
    }
}

#[derive(Debug, Clone, Copy)]
struct ModeWeights {
    decay: f64,
    w_prev: f64,
    w_next: f64,
    mask: f64,
}

/// Per-mode weights for a fixed grid, semigroup kind and horizon.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: GridSpec,
    kind: SemigroupKind,
    horizon: f64,
    weights: Vec<ModeWeights>,
    /// `mask(xi) * e^{-t_j |xi|^2}`, indexed `[j * len + mode]`.
    free: Vec<f64>,
}

impl Propagator {
    pub fn new(grid: GridSpec, kind: SemigroupKind, horizon: f64) -> Result<Self> {
        kind.check(&grid)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(PicardError::Domain(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let h = grid.time_step(horizon);
        let times = grid.times(horizon);
        let len = grid.len();
        let mut weights = Vec::with_capacity(len);
        let mut free = vec![0.0; len * grid.time_nodes()];
        for i in 0..len {
            let xi = grid.mode(i);
            let lambda = mode_norm_sq(&xi);
            let mask = kind.mask(&xi);
            let z = lambda * h;
            let (phi, psi) = quadrature_factors(z);
            weights.push(ModeWeights {
                decay: (-z).exp(),
                w_prev: h * psi,
                w_next: h * (phi - psi),
                mask,
            });
            for (j, t) in times.iter().enumerate() {
                free[j * len + i] = mask * (-t * lambda).exp();
            }
        }
        Ok(Self {
            grid,
            kind,
            horizon,
            weights,
            free,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> SemigroupKind {
        self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Spectra of `S(t_j) u0` for every node.
    pub(crate) fn free_evolution_spectral(&self, u0: &Spectrum) -> Vec<Vec<Complex64>> {
        let len = self.grid.len();
        (0..self.grid.time_nodes())
            .map(|j| {
                u0.coefficients()
                    .iter()
                    .zip(&self.free[j * len..(j + 1) * len])
                    .map(|(c, w)| c * w)
                    .collect()
            })
            .collect()
    }

    /// Duhamel integral of slice spectra `g[j][mode]`; returns output spectra.
    pub(crate) fn duhamel_spectral(&self, g: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let nodes = self.grid.time_nodes();
        let len = self.grid.len();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); len]; nodes];
        for (i, w) in self.weights.iter().enumerate() {
            if w.mask == 0.0 {
                continue;
            }
            let mut y = Complex64::new(0.0, 0.0);
            for j in 0..nodes - 1 {
                y = y * w.decay + g[j][i] * w.w_prev + g[j + 1][i] * w.w_next;
                out[j + 1][i] = y * w.mask;
            }
        }
        out
    }

    /// Inverse transform of per-slice spectra into a trajectory.
    pub(crate) fn synthesize(&self, spectra: Vec<Vec<Complex64>>) -> TrajectoryField {
        let slices = spectra
            .into_iter()
            .map(|mut buf| {
                fft_nd(&self.grid, &mut buf, true);
                TorusField::from_values(self.grid, buf.into_iter().map(|c| c.re).collect())
                    .expect("buffer length matches grid")
            })
            .collect();
        TrajectoryField::from_parts(self.grid, self.horizon, slices)
    }

    /// `t -> S(t) u0` on the time nodes.
    pub fn free_evolution(&self, u0: &TorusField) -> Result<TrajectoryField> {
        self.check_field(u0)?;
        let spectrum = u0.to_spectrum()?;
        Ok(self.synthesize(self.free_evolution_spectral(&spectrum)))
    }

    pub(crate) fn check_field(&self, f: &TorusField) -> Result<()> {
        if *f.grid() != self.grid {
            return Err(PicardError::Config(
                "field grid does not match the propagator grid".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn check_trajectory(&self, v: &TrajectoryField) -> Result<()> {
        if *v.grid() != self.grid {
            return Err(PicardError::Config(
                "trajectory grid does not match the propagator grid".into(),
            ));
        }
        if (v.horizon() - self.horizon).abs() > 1e-15 * self.horizon.max(1.0) {
            return Err(PicardError::Config(format!(
                "trajectory horizon {} does not match {}",
                v.horizon(),
                self.horizon
            )));
        }
        Ok(())
    }
}
