//! Three-dimensional periodic grids with a full complex spectrum.
//!
//! Only the Born–Infeld solver works in 3D and it stays at modest sizes, so
//! the transform keeps all `n1·n2·n3` complex coefficients instead of a half
//! spectrum.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::signed_wavenumber;
use super::spectral::{plan_forward, plan_inverse};
use crate::error::{ensure_finite, RelaxError, Result};
use crate::numerics::pairwise_sum_by;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid3 {
    n: [usize; 3],
}

impl Grid3 {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Result<Self> {
        for (axis, n) in [(1, n1), (2, n2), (3, n3)] {
            if n < 8 || n % 2 != 0 {
                return Err(RelaxError::InvalidArgument(format!(
                    "grid size n{axis} = {n} must be even and at least 8"
                )));
            }
        }
        Ok(Self { n: [n1, n2, n3] })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h_min(&self) -> f64 {
        1.0 / *self.n.iter().max().unwrap() as f64
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + k
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let k = idx % self.n[2];
        let j = (idx / self.n[2]) % self.n[1];
        let i = idx / (self.n[1] * self.n[2]);
        [
            i as f64 / self.n[0] as f64,
            j as f64 / self.n[1] as f64,
            k as f64 / self.n[2] as f64,
        ]
    }

    /// Integer wavenumber of FFT index `i` along `axis`.
    pub fn wavenumber(&self, axis: usize, i: usize) -> i64 {
        signed_wavenumber(i, self.n[axis])
    }

    /// Derivative symbol `2πk`, zero at Nyquist.
    pub fn kd(&self, axis: usize, i: usize) -> f64 {
        if 2 * i == self.n[axis] {
            0.0
        } else {
            2.0 * PI * self.wavenumber(axis, i) as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField3 {
    grid: Grid3,
    values: Vec<f64>,
}

impl ScalarField3 {
    pub fn zeros(grid: Grid3) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid3, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(RelaxError::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.coords(idx))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        ensure_finite(&self.values, "scalar field")
    }

    pub fn integral(&self) -> f64 {
        let v = &self.values;
        pairwise_sum_by(v.len(), |i| v[i]) * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VecField3 {
    comps: [ScalarField3; 3],
}

impl VecField3 {
    pub fn zeros(grid: Grid3) -> Self {
        Self {
            comps: std::array::from_fn(|_| ScalarField3::zeros(grid)),
        }
    }

    pub fn new(comps: [ScalarField3; 3]) -> Result<Self> {
        if comps.iter().any(|c| c.grid() != comps[0].grid()) {
            return Err(RelaxError::InvalidArgument(
                "vector components live on different grids".into(),
            ));
        }
        Ok(Self { comps })
    }

    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let v = f(grid.coords(idx));
            for (c, x) in out.comps.iter_mut().zip(v) {
                c.values[idx] = x;
            }
        }
        out
    }

    /// Build a field node by node from the values of other fields.
    pub fn from_nodes(grid: Grid3, f: impl Fn(usize) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let v = f(idx);
            for (c, x) in out.comps.iter_mut().zip(v) {
                c.values[idx] = x;
            }
        }
        out
    }

    pub fn grid(&self) -> Grid3 {
        self.comps[0].grid()
    }

    pub fn comp(&self, i: usize) -> &ScalarField3 {
        &self.comps[i]
    }

    pub fn comps(&self) -> &[ScalarField3; 3] {
        &self.comps
    }

    pub fn at(&self, idx: usize) -> [f64; 3] {
        [
            self.comps[0].values[idx],
            self.comps[1].values[idx],
            self.comps[2].values[idx],
        ]
    }

    pub fn check_finite(&self) -> Result<()> {
        self.comps.iter().try_for_each(|c| c.check_finite())
    }

    pub fn axpy(&mut self, c: f64, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.values.iter_mut().zip(&b.values) {
                *x += c * y;
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        let n = self.grid().len();
        pairwise_sum_by(n, |i| {
            let v = self.at(i);
            v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
        }) * self.grid().cell_volume()
    }

    pub fn max_magnitude(&self) -> f64 {
        (0..self.grid().len()).fold(0.0_f64, |m, i| {
            let v = self.at(i);
            m.max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
        })
    }

    pub fn scale(&self) -> f64 {
        self.comps.iter().fold(0.0_f64, |m, c| m.max(c.max_abs()))
    }
}

/// Full complex spectrum, same index layout as the samples.
#[derive(Clone, Debug)]
pub struct Spectrum3 {
    grid: Grid3,
    data: Vec<Complex64>,
}

fn fft_axis(grid: Grid3, data: &mut [Complex64], axis: usize, inverse: bool) {
    let n = grid.dims();
    let len = n[axis];
    let plan = if inverse {
        plan_inverse(len)
    } else {
        plan_forward(len)
    };
    let stride = match axis {
        0 => n[1] * n[2],
        1 => n[2],
        _ => 1,
    };
    let mut line = vec![Complex64::new(0.0, 0.0); len];
    for base in 0..grid.len() {
        // visit each line once, from its first element
        let pos = (base / stride) % len;
        if pos != 0 {
            continue;
        }
        for (t, l) in line.iter_mut().enumerate() {
            *l = data[base + t * stride];
        }
        plan.process(&mut line);
        for (t, l) in line.iter().enumerate() {
            data[base + t * stride] = *l;
        }
    }
}

impl Spectrum3 {
    pub fn forward(f: &ScalarField3) -> Result<Self> {
        f.check_finite()?;
        let grid = f.grid();
        let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for axis in 0..3 {
            fft_axis(grid, &mut data, axis, false);
        }
        let s = 1.0 / grid.len() as f64;
        data.iter_mut().for_each(|c| *c *= s);
        Ok(Self { grid, data })
    }

    pub fn inverse(&self) -> Result<ScalarField3> {
        let mut data = self.data.clone();
        for axis in 0..3 {
            fft_axis(self.grid, &mut data, axis, true);
        }
        let out = ScalarField3 {
            grid: self.grid,
            values: data.iter().map(|c| c.re).collect(),
        };
        out.check_finite()?;
        Ok(out)
    }

    fn symbols(&self, idx: usize) -> [f64; 3] {
        let n = self.grid.dims();
        let k = idx % n[2];
        let j = (idx / n[2]) % n[1];
        let i = idx / (n[1] * n[2]);
        [self.grid.kd(0, i), self.grid.kd(1, j), self.grid.kd(2, k)]
    }

    fn integer_modes(&self, idx: usize) -> [i64; 3] {
        let n = self.grid.dims();
        let k = idx % n[2];
        let j = (idx / n[2]) % n[1];
        let i = idx / (n[1] * n[2]);
        [
            self.grid.wavenumber(0, i),
            self.grid.wavenumber(1, j),
            self.grid.wavenumber(2, k),
        ]
    }

    pub fn partial(&self, axis: usize) -> Self {
        let mut out = self.clone();
        for (idx, c) in out.data.iter_mut().enumerate() {
            let k = self.symbols(idx)[axis];
            *c = Complex64::new(-k * c.im, k * c.re);
        }
        out
    }

    /// Two-thirds truncation.
    pub fn dealias(&mut self) {
        let n = self.grid.dims();
        for idx in 0..self.data.len() {
            let k = self.integer_modes(idx);
            if (0..3).any(|a| k[a].unsigned_abs() as usize > n[a] / 3) {
                self.data[idx] = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Multiply by `exp(-c |2πk|²)`.
    pub fn heat(&mut self, c: f64) {
        for idx in 0..self.data.len() {
            let k = self.symbols(idx);
            self.data[idx] *= (-c * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2])).exp();
        }
    }
}

pub fn partial3(f: &ScalarField3, axis: usize) -> Result<ScalarField3> {
    Spectrum3::forward(f)?.partial(axis).inverse()
}

/// All nine first derivatives `g[i][j] = ∂_j V_i`.
pub fn gradient3(v: &VecField3) -> Result<[[ScalarField3; 3]; 3]> {
    let mut out: [[ScalarField3; 3]; 3] =
        std::array::from_fn(|_| std::array::from_fn(|_| ScalarField3::zeros(v.grid())));
    for (i, row) in out.iter_mut().enumerate() {
        let s = Spectrum3::forward(v.comp(i))?;
        for (j, g) in row.iter_mut().enumerate() {
            *g = s.partial(j).inverse()?;
        }
    }
    Ok(out)
}

pub fn curl3(v: &VecField3) -> Result<VecField3> {
    let g = gradient3(v)?;
    let grid = v.grid();
    Ok(VecField3::from_nodes(grid, |idx| {
        let d = |i: usize, j: usize| g[i][j].values[idx];
        [d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)]
    }))
}

/// Curl evaluated mode by mode after two-thirds truncation of `v`: three
/// forward and three inverse transforms.
pub fn curl3_dealiased(v: &VecField3) -> Result<VecField3> {
    let mut s: Vec<Spectrum3> = (0..3).map(|i| Spectrum3::forward(v.comp(i))).collect::<Result<_>>()?;
    s.iter_mut().for_each(Spectrum3::dealias);
    let grid = v.grid();
    let mut out: [Spectrum3; 3] = std::array::from_fn(|_| Spectrum3 {
        grid,
        data: vec![Complex64::new(0.0, 0.0); grid.len()],
    });
    for idx in 0..grid.len() {
        let k = s[0].symbols(idx);
        let c = [s[0].data[idx], s[1].data[idx], s[2].data[idx]];
        let i = Complex64::new(0.0, 1.0);
        out[0].data[idx] = i * (k[1] * c[2] - k[2] * c[1]);
        out[1].data[idx] = i * (k[2] * c[0] - k[0] * c[2]);
        out[2].data[idx] = i * (k[0] * c[1] - k[1] * c[0]);
    }
    let [a, b, c] = out;
    VecField3::new([a.inverse()?, b.inverse()?, c.inverse()?])
}

pub fn divergence3(v: &VecField3) -> Result<ScalarField3> {
    let mut acc = partial3(v.comp(0), 0)?;
    for axis in 1..3 {
        let d = partial3(v.comp(axis), axis)?;
        for (a, b) in acc.values.iter_mut().zip(&d.values) {
            *a += b;
        }
    }
    Ok(acc)
}

pub fn dealias3(v: &VecField3) -> Result<VecField3> {
    let mut comps: [ScalarField3; 3] = std::array::from_fn(|_| ScalarField3::zeros(v.grid()));
    for (i, c) in comps.iter_mut().enumerate() {
        let mut s = Spectrum3::forward(v.comp(i))?;
        s.dealias();
        *c = s.inverse()?;
    }
    VecField3::new(comps)
}
