//! Periodic fields on the torus `T^d = R^d / (2 pi Z)^d`.
//!
//! Fields live on a uniform grid with `m` points per axis. Fourier
//! coefficients use the discrete mean convention
//!
//! ```text
//! u_hat(xi) = m^{-d} * sum_k u(x_k) exp(-i xi . x_k)
//! ```
//!
//! so that `u(x) = sum_xi u_hat(xi) exp(i xi . x)`. The coefficient against the
//! orthonormal basis `e_xi = (2 pi)^{-d/2} exp(i xi . x)` is `(2 pi)^{d/2} u_hat(xi)`.
//! Every multiplier used in this crate (Fejer, heat) is a function of `xi`
//! alone, so the convention only affects the absolute scale of Sobolev norms.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{PicardError, Result};

/// Largest spatial dimension the index helpers handle.
pub const MAX_DIM: usize = 3;

/// A lattice frequency, padded with zeros beyond the active dimension.
pub type Mode = [i64; MAX_DIM];

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Uniform space-time discretization of `T^d x [0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    points_per_axis: usize,
    time_nodes: usize,
}

impl GridSpec {
    pub fn new(dim: usize, points_per_axis: usize, time_nodes: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(PicardError::Config(format!(
                "dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if points_per_axis < 2 || !points_per_axis.is_multiple_of(2) {
            return Err(PicardError::Config(format!(
                "points per axis must be even and >= 2, got {points_per_axis}"
            )));
        }
        if time_nodes < 2 {
            return Err(PicardError::Config(format!(
                "need at least 2 time nodes, got {time_nodes}"
            )));
        }
        Ok(Self {
            dim,
            points_per_axis,
            time_nodes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn time_nodes(&self) -> usize {
        self.time_nodes
    }

    /// Number of spatial grid points, `m^d`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same spatial grid with a different number of time nodes.
    pub fn with_time_nodes(&self, time_nodes: usize) -> Result<Self> {
        Self::new(self.dim, self.points_per_axis, time_nodes)
    }

    /// Whether a Fejer rank `N` is exactly representable: `m >= 2N + 2`.
    pub fn resolves(&self, rank: usize) -> bool {
        self.points_per_axis >= 2 * rank + 2
    }

    pub fn check_rank(&self, rank: usize) -> Result<()> {
        if self.resolves(rank) {
            Ok(())
        } else {
            Err(PicardError::Config(format!(
                "rank {rank} needs at least {} points per axis, grid has {}",
                2 * rank + 2,
                self.points_per_axis
            )))
        }
    }

    /// Largest rank the grid resolves.
    pub fn max_rank(&self) -> usize {
        (self.points_per_axis - 2) / 2
    }

    /// Coordinate of the `k`-th grid point along an axis.
    pub fn coordinate(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.points_per_axis as f64
    }

    /// Per-axis indices of a flat (row-major, axis 0 slowest) index.
    pub fn axis_indices(&self, flat: usize) -> [usize; MAX_DIM] {
        let m = self.points_per_axis;
        let mut out = [0usize; MAX_DIM];
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % m;
            rest /= m;
        }
        out
    }

    pub fn flat_index(&self, axis_indices: &[usize]) -> usize {
        axis_indices[..self.dim]
            .iter()
            .fold(0, |acc, &k| acc * self.points_per_axis + k)
    }

    /// Physical coordinates of a flat grid index.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.axis_indices(flat);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    /// Signed frequency stored at FFT position `k`. The Nyquist slot maps to `-m/2`.
    pub fn frequency(&self, k: usize) -> i64 {
        let m = self.points_per_axis as i64;
        let k = k as i64;
        if k < m / 2 {
            k
        } else {
            k - m
        }
    }

    /// Lattice mode stored at a flat spectral index.
    pub fn mode(&self, flat: usize) -> Mode {
        let idx = self.axis_indices(flat);
        let mut xi = [0i64; MAX_DIM];
        for axis in 0..self.dim {
            xi[axis] = self.frequency(idx[axis]);
        }
        xi
    }

    /// Flat spectral index holding mode `xi`, if the grid represents it.
    pub fn mode_index(&self, xi: &[i64]) -> Option<usize> {
        let m = self.points_per_axis as i64;
        let mut flat = 0usize;
        for axis in 0..self.dim {
            let f = xi.get(axis).copied().unwrap_or(0);
            if f < -m / 2 || f >= m / 2 {
                return None;
            }
            flat = flat * self.points_per_axis + f.rem_euclid(m) as usize;
        }
        if xi.iter().skip(self.dim).any(|&f| f != 0) {
            return None;
        }
        Some(flat)
    }

    /// Node times `t_j = j T / (n_t - 1)`.
    pub fn times(&self, horizon: f64) -> Vec<f64> {
        let steps = (self.time_nodes - 1) as f64;
        (0..self.time_nodes)
            .map(|j| horizon * j as f64 / steps)
            .collect()
    }

    pub fn time_step(&self, horizon: f64) -> f64 {
        horizon / (self.time_nodes - 1) as f64
    }
}

/// `|xi|^2`.
pub fn mode_norm_sq(xi: &Mode) -> f64 {
    xi.iter().map(|&f| (f * f) as f64).sum()
}

/// Tensor-product Fejer weight `prod_r (1 - |xi_r| / (N + 1))_+`.
pub fn fejer_mask(rank: usize, xi: &[i64]) -> f64 {
    let denom = (rank + 1) as f64;
    xi.iter()
        .map(|&f| (1.0 - f.unsigned_abs() as f64 / denom).max(0.0))
        .product()
}

/// In-place d-dimensional FFT over a row-major buffer. Unnormalized.
pub(crate) fn fft_nd(grid: &GridSpec, data: &mut [Complex64], inverse: bool) {
    fft_cube(grid.dim(), grid.points_per_axis(), data, inverse);
}

/// Same as [`fft_nd`] for an `m^dim` cube of any side length.
pub(crate) fn fft_cube(dim: usize, m: usize, data: &mut [Complex64], inverse: bool) {
    let fft = plan(m, inverse);
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let total = data.len();
    for axis in 0..dim {
        let stride = m.pow((dim - 1 - axis) as u32);
        let block = stride * m;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, value) in line.iter().enumerate() {
                    data[base + k * stride] = *value;
                }
            }
        }
    }
}

/// Fourier coefficients of a real field in FFT storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Wraps raw coefficients; the caller guarantees conjugate symmetry.
    pub fn from_coefficients(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(PicardError::Config(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of mode `xi`; zero for modes outside the grid.
    pub fn coefficient(&self, xi: &[i64]) -> Complex64 {
        self.grid
            .mode_index(xi)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Iterates `(mode, coefficient)` pairs in storage order.
    pub fn modes(&self) -> impl Iterator<Item = (Mode, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (self.grid.mode(i), *c))
    }

    /// Multiplies every coefficient by a real symbol of the mode.
    pub fn multiply(mut self, symbol: impl Fn(&Mode) -> f64) -> Self {
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c *= symbol(&self.grid.mode(i));
        }
        self
    }

    /// Largest deviation from `u_hat(-xi) = conj(u_hat(xi))`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, c) in self.coeffs.iter().enumerate() {
            let xi = self.grid.mode(i);
            let mut neg = [0i64; MAX_DIM];
            for axis in 0..self.grid.dim() {
                // -(-m/2) aliases back onto the Nyquist slot.
                let m = self.grid.points_per_axis() as i64;
                neg[axis] = if xi[axis] == -m / 2 { xi[axis] } else { -xi[axis] };
            }
            let partner = self.coefficient(&neg);
            worst = worst.max((c - partner.conj()).norm());
        }
        worst
    }

    pub fn to_field(&self) -> TorusField {
        let mut buf = self.coeffs.clone();
        fft_nd(&self.grid, &mut buf, true);
        TorusField {
            grid: self.grid,
            values: buf.into_iter().map(|c| c.re).collect(),
        }
    }
}

/// A real scalar field sampled on the spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl TorusField {
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(PicardError::Config(format!(
                "field needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| f(&grid.point(i)[..grid.dim()]))
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn to_spectrum(&self) -> Result<Spectrum> {
        if let Some(index) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(PicardError::NonFinite { index });
        }
        Ok(self.spectrum_unchecked())
    }

    pub(crate) fn spectrum_unchecked(&self) -> Spectrum {
        let scale = 1.0 / self.grid.len() as f64;
        let mut buf: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_nd(&self.grid, &mut buf, false);
        for c in &mut buf {
            *c *= scale;
        }
        Spectrum {
            grid: self.grid,
            coeffs: buf,
        }
    }

    /// Fejer projection `P_N`.
    pub fn apply_fejer(&self, rank: usize) -> Result<TorusField> {
        self.grid.check_rank(rank)?;
        Ok(self
            .to_spectrum()?
            .multiply(|xi| fejer_mask(rank, xi))
            .to_field())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Root-mean-square over the grid; equals the Sobolev norm of order 0.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// `(sum_xi (1 + |xi|^2)^s |u_hat(xi)|^2)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        spectrum_sobolev_norm(&self.spectrum_unchecked(), s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TorusField {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &TorusField, f: impl Fn(f64, f64) -> f64) -> Result<TorusField> {
        if self.grid != other.grid {
            return Err(PicardError::Config("fields live on different grids".into()));
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &TorusField) -> Result<TorusField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &TorusField) -> Result<TorusField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, factor: f64) -> TorusField {
        self.map(|v| v * factor)
    }

    /// `sup |self - other|`.
    pub fn distance(&self, other: &TorusField) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }
}

pub fn spectrum_sobolev_norm(spectrum: &Spectrum, s: f64) -> f64 {
    spectrum
        .modes()
        .map(|(xi, c)| (1.0 + mode_norm_sq(&xi)).powf(s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Time-indexed slices on the uniform nodes of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryField {
    grid: GridSpec,
    horizon: f64,
    slices: Vec<TorusField>,
}

impl TrajectoryField {
    pub fn new(grid: GridSpec, horizon: f64, slices: Vec<TorusField>) -> Result<Self> {
        if slices.len() != grid.time_nodes() {
            return Err(PicardError::Config(format!(
                "trajectory needs {} slices, got {}",
                grid.time_nodes(),
                slices.len()
            )));
        }
        if slices.iter().any(|s| *s.grid() != grid) {
            return Err(PicardError::Config(
                "trajectory slices must share the grid".into(),
            ));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(PicardError::Domain(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            grid,
            horizon,
            slices,
        })
    }

    pub fn zeros(grid: GridSpec, horizon: f64) -> Self {
        Self::constant(grid, horizon, 0.0)
    }

    pub fn constant(grid: GridSpec, horizon: f64, value: f64) -> Self {
        Self {
            grid,
            horizon,
            slices: vec![TorusField::constant(grid, value); grid.time_nodes()],
        }
    }

    /// Evaluates `f(t, x)` on every node.
    pub fn from_fn(grid: GridSpec, horizon: f64, f: impl Fn(f64, &[f64]) -> f64) -> Self {
        let slices = grid
            .times(horizon)
            .into_iter()
            .map(|t| TorusField::from_fn(grid, |x| f(t, x)))
            .collect();
        Self {
            grid,
            horizon,
            slices,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn slices(&self) -> &[TorusField] {
        &self.slices
    }

    pub fn slice(&self, j: usize) -> &TorusField {
        &self.slices[j]
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times(self.horizon)
    }

    /// Slice at `t = T`.
    pub fn last(&self) -> &TorusField {
        self.slices.last().expect("at least two time nodes")
    }

    pub fn value(&self, time_index: usize, flat: usize) -> f64 {
        self.slices[time_index].value(flat)
    }

    pub fn sup_norm(&self) -> f64 {
        self.slices.iter().fold(0.0, |acc, s| acc.max(s.sup_norm()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> TrajectoryField {
        Self {
            grid: self.grid,
            horizon: self.horizon,
            slices: self.slices.iter().map(|s| s.map(f)).collect(),
        }
    }

    pub fn sub(&self, other: &TrajectoryField) -> Result<TrajectoryField> {
        self.check_compatible(other)?;
        let slices = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: self.grid,
            horizon: self.horizon,
            slices,
        })
    }

    /// `sup_{t,x} |self - other|`.
    pub fn distance(&self, other: &TrajectoryField) -> Result<f64> {
        self.check_compatible(other)?;
        let mut worst = 0.0f64;
        for (a, b) in self.slices.iter().zip(&other.slices) {
            for (x, y) in a.values().iter().zip(b.values()) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }

    /// Mean of squared pointwise differences over all space-time nodes.
    pub fn mean_square_distance(&self, other: &TrajectoryField) -> Result<f64> {
        self.check_compatible(other)?;
        let count = (self.grid.len() * self.grid.time_nodes()) as f64;
        let total: f64 = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| {
                a.values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
            })
            .sum();
        Ok(total / count)
    }

    pub(crate) fn check_compatible(&self, other: &TrajectoryField) -> Result<()> {
        if self.grid != other.grid {
            return Err(PicardError::Config(
                "trajectories live on different grids".into(),
            ));
        }
        if (self.horizon - other.horizon).abs() > 1e-15 * self.horizon.max(1.0) {
            return Err(PicardError::Config(format!(
                "trajectory horizons differ: {} vs {}",
                self.horizon, other.horizon
            )));
        }
        Ok(())
    }

    pub(crate) fn from_parts(grid: GridSpec, horizon: f64, slices: Vec<TorusField>) -> Self {
        debug_assert_eq!(slices.len(), grid.time_nodes());
        Self {
            grid,
            horizon,
            slices,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid1(m: usize) -> GridSpec {
        GridSpec::new(1, m, 3).unwrap()
    }

    /// Direct O(m^2) discrete Fourier sum.
    fn direct_dft(values: &[f64]) -> Vec<Complex64> {
        let m = values.len();
        (0..m)
            .map(|k| {
                let xi = if k < m / 2 { k as f64 } else { k as f64 - m as f64 };
                values
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let x = 2.0 * PI * j as f64 / m as f64;
                        Complex64::from_polar(v, -xi * x)
                    })
                    .sum::<Complex64>()
                    / m as f64
            })
            .collect()
    }

    #[test]
    fn grid_rejects_odd_or_tiny_sizes() {
        assert!(GridSpec::new(1, 7, 3).is_err());
        assert!(GridSpec::new(1, 0, 3).is_err());
        assert!(GridSpec::new(1, 8, 1).is_err());
        assert!(GridSpec::new(4, 8, 3).is_err());
        assert!(GridSpec::new(2, 8, 3).is_ok());
    }

    #[test]
    fn mode_index_round_trip() {
        let g = GridSpec::new(2, 8, 2).unwrap();
        for i in 0..g.len() {
            let xi = g.mode(i);
            assert_eq!(g.mode_index(&xi), Some(i));
        }
        assert_eq!(g.mode_index(&[4, 0, 0]), None);
    }

    #[test]
    fn constant_field_has_only_zero_mode() {
        let g = GridSpec::new(2, 8, 2).unwrap();
        let s = TorusField::constant(g, 2.5).to_spectrum().unwrap();
        for (xi, c) in s.modes() {
            if xi == [0, 0, 0] {
                assert!((c.re - 2.5).abs() < 1e-14 && c.im.abs() < 1e-14);
            } else {
                assert!(c.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn cosine_has_two_equal_modes() {
        let g = grid1(16);
        let s = TorusField::from_fn(g, |x| x[0].cos()).to_spectrum().unwrap();
        for (xi, c) in s.modes() {
            if xi[0].abs() == 1 {
                assert!((c.re - 0.5).abs() < 1e-14 && c.im.abs() < 1e-14);
            } else {
                assert!(c.norm() < 1e-14, "mode {xi:?} = {c}");
            }
        }
    }

    #[test]
    fn fast_transform_matches_direct_sum() {
        let g = grid1(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = TorusField::from_values(g, values.clone()).unwrap();
        let fast = f.to_spectrum().unwrap();
        let slow = direct_dft(&values);
        for (a, b) in fast.coefficients().iter().zip(&slow) {
            assert!((a - b).norm() < 1e-14);
        }
        let back = fast.to_field();
        for (a, b) in back.values().iter().zip(&values) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let g = grid1(8);
        let mut v = vec![0.0; 8];
        v[5] = f64::NAN;
        let f = TorusField::from_values(g, v).unwrap();
        assert_eq!(f.to_spectrum(), Err(PicardError::NonFinite { index: 5 }));
    }

    #[test]
    fn fejer_mask_values() {
        assert_eq!(fejer_mask(7, &[0]), 1.0);
        assert_eq!(fejer_mask(0, &[0, 0]), 1.0);
        assert!((fejer_mask(3, &[2]) - 0.5).abs() < 1e-15);
        assert!((fejer_mask(1, &[1, 1]) - 0.25).abs() < 1e-15);
        assert_eq!(fejer_mask(3, &[4]), 0.0);
        assert_eq!(fejer_mask(3, &[-9]), 0.0);
    }

    #[test]
    fn fejer_halves_cosine_at_rank_one() {
        let g = grid1(16);
        let f = TorusField::from_fn(g, |x| x[0].cos());
        let p = f.apply_fejer(1).unwrap();
        let expect = f.scale(0.5);
        assert!(p.distance(&expect).unwrap() < 1e-14);
        let c = TorusField::constant(g, 0.3);
        assert!(c.apply_fejer(2).unwrap().distance(&c).unwrap() < 1e-15);
    }

    #[test]
    fn fejer_rank_too_large_for_grid() {
        let g = grid1(8);
        assert!(matches!(
            TorusField::zeros(g).apply_fejer(4),
            Err(PicardError::Config(_))
        ));
        assert!(TorusField::zeros(g).apply_fejer(3).is_ok());
    }

    /// Fejer-weighted partial sum evaluated pointwise from directly computed coefficients.
    fn direct_fejer(values: &[f64], rank: usize) -> Vec<f64> {
        let m = values.len();
        let coeffs = direct_dft(values);
        (0..m)
            .map(|j| {
                let x = 2.0 * PI * j as f64 / m as f64;
                let mut acc = 0.0;
                for xi in -(rank as i64)..=(rank as i64) {
                    let c = coeffs[xi.rem_euclid(m as i64) as usize];
                    let w = 1.0 - xi.unsigned_abs() as f64 / (rank + 1) as f64;
                    acc += w * (c * Complex64::from_polar(1.0, xi as f64 * x)).re;
                }
                acc
            })
            .collect()
    }

    #[test]
    fn fejer_error_on_smooth_field_decreases_with_rank() {
        let g = grid1(256);
        let f = TorusField::from_fn(g, |x| x[0].cos().exp());
        let mut last = f64::INFINITY;
        for rank in [4, 8, 16, 32, 64] {
            let p = f.apply_fejer(rank).unwrap();
            let oracle = direct_fejer(f.values(), rank);
            for (a, b) in p.values().iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12);
            }
            let err = p.distance(&f).unwrap();
            assert!(err < last, "rank {rank}: {err} !< {last}");
            assert!(err > 0.0);
            last = err;
        }
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = grid1(16);
        assert_eq!(TorusField::zeros(g).sobolev_norm(1.0), 0.0);
        let c = TorusField::constant(g, -0.7);
        assert!((c.sobolev_norm(2.0) - 0.7).abs() < 1e-14);
        let f = TorusField::from_fn(g, |x| x[0].cos());
        // two modes at |xi| = 1, each |u_hat|^2 = 1/4, weight (1 + 1)^1
        let expect = (2.0 * 2.0 * 0.25f64).sqrt();
        assert!((f.sobolev_norm(1.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn sup_norm_examples() {
        let g = grid1(64);
        assert_eq!(TorusField::zeros(g).sup_norm(), 0.0);
        let f = TorusField::from_fn(g, |x| 2.0 * x[0].cos());
        assert_eq!(f.sup_norm(), 2.0);
        let clipped = f.map(|v| v.clamp(-1.5, 1.5));
        assert!(clipped.sup_norm() <= 1.5);
    }

    #[test]
    fn trajectory_sup_is_max_over_slices() {
        let g = GridSpec::new(1, 8, 5).unwrap();
        let traj = TrajectoryField::from_fn(g, 1.0, |t, x| t * x[0].sin());
        let per_slice = traj.slices().iter().map(|s| s.sup_norm()).fold(0.0, f64::max);
        assert_eq!(traj.sup_norm(), per_slice);
        assert!((traj.last().sup_norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_dimensional_transform_round_trips() {
        let g = GridSpec::new(2, 8, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = TorusField::from_values(g, values).unwrap();
        let s = f.to_spectrum().unwrap();
        assert!(s.symmetry_defect() < 1e-14);
        assert!(s.to_field().distance(&f).unwrap() < 1e-13);
        // cos(x_0 + 2 x_1) sits on modes +-(1, 2)
        let h = TorusField::from_fn(g, |x| (x[0] + 2.0 * x[1]).cos());
        let hs = h.to_spectrum().unwrap();
        assert!((hs.coefficient(&[1, 2]).re - 0.5).abs() < 1e-14);
        assert!((hs.coefficient(&[-1, -2]).re - 0.5).abs() < 1e-14);
        assert!(hs.coefficient(&[1, -2]).norm() < 1e-14);
    }
}
