//! Real-to-half-complex transforms on [`Grid2`].
//!
//! Coefficients are normalised so that `f(x) = Σ_k c_k exp(2πi k·x)`; only
//! the columns `k2 = 0..=n2/2` are stored, the rest follow from conjugate
//! symmetry.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Grid2, ScalarField};
use crate::error::{ensure_finite, Result};
use crate::numerics::pairwise_sum_by;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan_forward(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub(crate) fn plan_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Half spectrum of a real field: `n1 × (n2/2 + 1)` complex coefficients,
/// rows in FFT order of `k1`, columns `k2 = 0..=n2/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    grid: Grid2,
    data: Vec<Complex64>,
}

/// One stored Fourier mode together with its derivative symbols.
#[derive(Clone, Copy, Debug)]
pub struct Mode {
    pub row: usize,
    pub col: usize,
    pub k1: i64,
    pub k2: i64,
    /// `2πk1`, zero on the Nyquist row.
    pub kd1: f64,
    /// `2πk2`, zero on the Nyquist column.
    pub kd2: f64,
}

impl Mode {
    /// `|2πk|²` built from the derivative symbols, so that the Laplacian
    /// equals `div ∘ grad` exactly.
    pub fn k_sq(&self) -> f64 {
        self.kd1 * self.kd1 + self.kd2 * self.kd2
    }

    /// Parseval weight of the stored column (interior columns stand for two
    /// conjugate modes).
    pub fn weight(&self, grid: &Grid2) -> f64 {
        if self.col == 0 || 2 * self.col == grid.n2() {
            1.0
        } else {
            2.0
        }
    }
}

impl SpectralCoeffs {
    pub fn zeros(grid: Grid2) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.n1() * grid.half_n2()],
        }
    }

    pub fn grid(&self) -> Grid2 {
        self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn mode(&self, idx: usize) -> Mode {
        let hn = self.grid.half_n2();
        let row = idx / hn;
        let col = idx % hn;
        Mode {
            row,
            col,
            k1: self.grid.k1(row),
            k2: col as i64,
            kd1: self.grid.kd1(row),
            kd2: self.grid.kd2(col),
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        (0..self.data.len()).map(|i| self.mode(i))
    }

    /// Coefficient of the integer wavenumber `(k1, k2)`; negative `k2` is
    /// read through conjugate symmetry.
    pub fn get(&self, k1: i64, k2: i64) -> Complex64 {
        let (n1, n2) = (self.grid.n1() as i64, self.grid.n2() as i64);
        let (k1, k2, conj) = if k2 < 0 { (-k1, -k2, true) } else { (k1, k2, false) };
        let row = k1.rem_euclid(n1) as usize;
        let col = k2.rem_euclid(n2) as usize;
        let c = self.data[row * self.grid.half_n2() + col];
        if conj {
            c.conj()
        } else {
            c
        }
    }

    /// Forward transform of a real field.
    pub fn forward(f: &ScalarField) -> Result<Self> {
        f.check_finite()?;
        Ok(Self::forward_unchecked(f))
    }

    pub(crate) fn forward_unchecked(f: &ScalarField) -> Self {
        let grid = f.grid();
        let (n1, n2, hn) = (grid.n1(), grid.n2(), grid.half_n2());
        let row_fft = plan_forward(n2);
        let col_fft = plan_forward(n1);
        let mut out = Self::zeros(grid);
        let mut buf = vec![Complex64::new(0.0, 0.0); n2.max(n1)];
        let mut scratch =
            vec![Complex64::new(0.0, 0.0); row_fft.get_inplace_scratch_len().max(col_fft.get_inplace_scratch_len())];
        let vals = f.values();
        for i in 0..n1 {
            let row = &mut buf[..n2];
            for (b, &v) in row.iter_mut().zip(&vals[i * n2..(i + 1) * n2]) {
                *b = Complex64::new(v, 0.0);
            }
            row_fft.process_with_scratch(row, &mut scratch);
            out.data[i * hn..(i + 1) * hn].copy_from_slice(&row[..hn]);
        }
        let scale = 1.0 / (n1 * n2) as f64;
        for j in 0..hn {
            let col = &mut buf[..n1];
            for (i, c) in col.iter_mut().enumerate() {
                *c = out.data[i * hn + j];
            }
            col_fft.process_with_scratch(col, &mut scratch);
            for (i, c) in col.iter().enumerate() {
                out.data[i * hn + j] = *c * scale;
            }
        }
        out
    }

    /// Inverse transform back to real samples.
    pub fn inverse(&self) -> Result<ScalarField> {
        let f = self.inverse_unchecked();
        ensure_finite(f.values(), "inverse transform")?;
        Ok(f)
    }

    pub(crate) fn inverse_unchecked(&self) -> ScalarField {
        let grid = self.grid;
        let (n1, n2, hn) = (grid.n1(), grid.n2(), grid.half_n2());
        let row_fft = plan_inverse(n2);
        let col_fft = plan_inverse(n1);
        let mut tmp = self.data.clone();
        let mut buf = vec![Complex64::new(0.0, 0.0); n2.max(n1)];
        let mut scratch =
            vec![Complex64::new(0.0, 0.0); row_fft.get_inplace_scratch_len().max(col_fft.get_inplace_scratch_len())];
        for j in 0..hn {
            let col = &mut buf[..n1];
            for (i, c) in col.iter_mut().enumerate() {
                *c = tmp[i * hn + j];
            }
            col_fft.process_with_scratch(col, &mut scratch);
            for (i, c) in col.iter().enumerate() {
                tmp[i * hn + j] = *c;
            }
        }
        let mut values = vec![0.0; grid.len()];
        for i in 0..n1 {
            let row = &mut buf[..n2];
            let half = &tmp[i * hn..(i + 1) * hn];
            row[..hn].copy_from_slice(half);
            for j in 1..n2 / 2 {
                row[n2 - j] = half[j].conj();
            }
            row_fft.process_with_scratch(row, &mut scratch);
            for (v, c) in values[i * n2..(i + 1) * n2].iter_mut().zip(row.iter()) {
                *v = c.re;
            }
        }
        ScalarField::from_values(grid, values).expect("grid size matches")
    }

    /// `Σ_k |c_k|²` over the full spectrum; equals `∫ f²` by Parseval.
    pub fn energy(&self) -> f64 {
        pairwise_sum_by(self.data.len(), |i| {
            self.mode(i).weight(&self.grid) * self.data[i].norm_sqr()
        })
    }

    /// Full-spectrum inner product `Σ_k a_k conj(b_k)` (real part), equal to
    /// `∫ f g` for the underlying real fields.
    pub fn dot(&self, other: &Self) -> f64 {
        pairwise_sum_by(self.data.len(), |i| {
            let w = self.mode(i).weight(&self.grid);
            w * (self.data[i] * other.data[i].conj()).re
        })
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn axpy(&mut self, c: f64, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b * c;
        }
    }

    /// Multiply every mode by `symbol(mode)`.
    pub fn apply(&mut self, symbol: impl Fn(&Mode) -> Complex64) {
        for idx in 0..self.data.len() {
            let m = self.mode(idx);
            self.data[idx] *= symbol(&m);
        }
    }

    /// Zero every mode with `|k_i| > n_i/3` (two-thirds rule).
    pub fn dealias(&mut self) {
        let (c1, c2) = self.grid.dealias_cutoff();
        for idx in 0..self.data.len() {
            let m = self.mode(idx);
            if m.k1.abs() > c1 || m.k2.abs() > c2 {
                self.data[idx] = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn dealiased(mut self) -> Self {
        self.dealias();
        self
    }

    /// Largest `|k_i|` (per axis) carrying a coefficient above `tol`.
    pub fn bandwidth(&self, tol: f64) -> (i64, i64) {
        let mut kmax = (0, 0);
        for (idx, c) in self.data.iter().enumerate() {
            if c.norm() > tol {
                let m = self.mode(idx);
                kmax.0 = kmax.0.max(m.k1.abs());
                kmax.1 = kmax.1.max(m.k2.abs());
            }
        }
        kmax
    }
}
