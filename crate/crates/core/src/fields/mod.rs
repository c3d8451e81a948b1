//! Periodic grids and sampled fields on the unit torus.
//!
//! A [`Grid2`] samples `(R/Z)^2` at `x = (i/n1, j/n2)`; values are stored
//! row-major with `i` (the `x1` index) outermost. Derivatives, the Leray
//! projector and dealiasing act in Fourier space, see [`spectral`] and
//! [`ops`]. The three-dimensional counterparts live in [`grid3`].

pub mod grid3;
pub mod ops;
pub mod snapshot;
pub mod spectral;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, RelaxError, Result};
use crate::numerics::pairwise_sum_by;

pub use ops::{
    curl2d, dealias_field, divergence, divergence_max, grad_perp, gradient, laplacian,
    leray_project,
};
pub use spectral::SpectralCoeffs;

/// Uniform periodic grid on the unit torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid2 {
    n1: usize,
    n2: usize,
}

impl Grid2 {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        for (axis, n) in [(1, n1), (2, n2)] {
            if n < 8 || n % 2 != 0 {
                return Err(RelaxError::InvalidArgument(format!(
                    "grid size n{axis} = {n} must be even and at least 8"
                )));
            }
        }
        Ok(Self { n1, n2 })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h1(&self) -> f64 {
        1.0 / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        1.0 / self.n2 as f64
    }

    pub fn h_min(&self) -> f64 {
        self.h1().min(self.h2())
    }

    /// Quadrature weight of one node.
    pub fn cell_area(&self) -> f64 {
        self.h1() * self.h2()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let i = idx / self.n2;
        let j = idx % self.n2;
        (i as f64 * self.h1(), j as f64 * self.h2())
    }

    /// Number of stored half-spectrum columns, `n2/2 + 1`.
    pub fn half_n2(&self) -> usize {
        self.n2 / 2 + 1
    }

    /// Largest retained integer wavenumber per axis under the two-thirds rule.
    pub fn dealias_cutoff(&self) -> (i64, i64) {
        ((self.n1 / 3) as i64, (self.n2 / 3) as i64)
    }

    /// Signed integer wavenumber of FFT row `i` (Nyquist reported as `-n1/2`).
    pub fn k1(&self, i: usize) -> i64 {
        signed_wavenumber(i, self.n1)
    }

    /// Derivative symbol `2πk` along axis 1; zero at the Nyquist row so that
    /// odd derivatives of real fields stay real.
    pub fn kd1(&self, i: usize) -> f64 {
        if 2 * i == self.n1 {
            0.0
        } else {
            2.0 * PI * self.k1(i) as f64
        }
    }

    pub fn kd2(&self, j: usize) -> f64 {
        if 2 * j == self.n2 {
            0.0
        } else {
            2.0 * PI * j as f64
        }
    }
}

pub(crate) fn signed_wavenumber(i: usize, n: usize) -> i64 {
    if 2 * i >= n {
        i as i64 - n as i64
    } else {
        i as i64
    }
}

/// Real scalar samples on a [`Grid2`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid2,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid2, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(RelaxError::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x1, x2) = grid.coords(idx);
                f(x1, x2)
            })
            .collect();
        Self { grid, values }
    }

    /// Samples `f(i, j)` at every node.
    pub fn from_fn_index(grid: Grid2, f: impl Fn(usize, usize) -> f64) -> Self {
        let n2 = grid.n2;
        let values = (0..grid.len()).map(|idx| f(idx / n2, idx % n2)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid2 {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        ensure_finite(&self.values, "scalar field")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    /// Discrete `L²` inner product `∫ f g dx` (node quadrature).
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let (a, b) = (&self.values, &other.values);
        pairwise_sum_by(a.len(), |i| a[i] * b[i]) * self.grid.cell_area()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// `∫ f dx`.
    pub fn integral(&self) -> f64 {
        let v = &self.values;
        pairwise_sum_by(v.len(), |i| v[i]) * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Two-component vector field on a [`Grid2`].
#[derive(Clone, Debug, PartialEq)]
pub struct VecField {
    comps: [ScalarField; 2],
}

impl VecField {
    pub fn zeros(grid: Grid2) -> Self {
        Self {
            comps: [ScalarField::zeros(grid), ScalarField::zeros(grid)],
        }
    }

    pub fn new(c1: ScalarField, c2: ScalarField) -> Result<Self> {
        if c1.grid() != c2.grid() {
            return Err(RelaxError::InvalidArgument(
                "vector components live on different grids".into(),
            ));
        }
        Ok(Self { comps: [c1, c2] })
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let c1 = ScalarField::from_fn(grid, |x1, x2| f(x1, x2)[0]);
        let c2 = ScalarField::from_fn(grid, |x1, x2| f(x1, x2)[1]);
        Self { comps: [c1, c2] }
    }

    pub fn grid(&self) -> Grid2 {
        self.comps[0].grid()
    }

    pub fn comp(&self, i: usize) -> &ScalarField {
        &self.comps[i]
    }

    pub fn comp_mut(&mut self, i: usize) -> &mut ScalarField {
        &mut self.comps[i]
    }

    pub fn comps(&self) -> &[ScalarField; 2] {
        &self.comps
    }

    pub fn into_comps(self) -> [ScalarField; 2] {
        self.comps
    }

    pub fn check_finite(&self) -> Result<()> {
        self.comps[0].check_finite()?;
        self.comps[1].check_finite()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            comps: [self.comps[0].scaled(c), self.comps[1].scaled(c)],
        }
    }

    pub fn axpy(&mut self, c: f64, other: &Self) {
        self.comps[0].axpy(c, &other.comps[0]);
        self.comps[1].axpy(c, &other.comps[1]);
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.comps[0].dot(&other.comps[0]) + self.comps[1].dot(&other.comps[1])
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Pointwise maximum of `|V(x)|`.
    pub fn max_magnitude(&self) -> f64 {
        let (a, b) = (self.comps[0].values(), self.comps[1].values());
        a.iter()
            .zip(b)
            .fold(0.0_f64, |m, (x, y)| m.max((x * x + y * y).sqrt()))
    }

    /// Largest component modulus, used as the reference scale in relative checks.
    pub fn scale(&self) -> f64 {
        self.comps[0].max_abs().max(self.comps[1].max_abs())
    }
}
