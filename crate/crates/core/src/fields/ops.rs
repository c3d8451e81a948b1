//! Spectral differential operators, the Helmholtz–Leray projector and
//! dealiasing. All operators use the derivative symbols of [`Mode`], so the
//! discrete identities `div ∘ grad_perp = 0` and `curl ∘ grad_perp = -Δ`
//! hold to rounding.

use num_complex::Complex64;

use super::spectral::{Mode, SpectralCoeffs};
use super::{ScalarField, VecField};
use crate::error::Result;

/// Spectrum of a 2-component field.
pub type VecSpectrum = [SpectralCoeffs; 2];

fn i_times(c: Complex64, k: f64) -> Complex64 {
    Complex64::new(-k * c.im, k * c.re)
}

pub fn spec_of(v: &VecField) -> Result<VecSpectrum> {
    Ok([
        SpectralCoeffs::forward(v.comp(0))?,
        SpectralCoeffs::forward(v.comp(1))?,
    ])
}

pub fn field_of(s: &VecSpectrum) -> Result<VecField> {
    VecField::new(s[0].inverse()?, s[1].inverse()?)
}

/// `∂_axis` of a spectrum (`axis` is 0 for `x1`, 1 for `x2`).
pub fn spec_partial(c: &SpectralCoeffs, axis: usize) -> SpectralCoeffs {
    let mut out = c.clone();
    out.apply(|m| {
        let k = if axis == 0 { m.kd1 } else { m.kd2 };
        Complex64::new(0.0, k)
    });
    out
}

pub fn spec_grad(c: &SpectralCoeffs) -> VecSpectrum {
    [spec_partial(c, 0), spec_partial(c, 1)]
}

pub fn spec_div(v: &VecSpectrum) -> SpectralCoeffs {
    let mut out = SpectralCoeffs::zeros(v[0].grid());
    for (idx, o) in out.data_mut().iter_mut().enumerate() {
        let m = v[0].mode(idx);
        *o = i_times(v[0].data()[idx], m.kd1) + i_times(v[1].data()[idx], m.kd2);
    }
    out
}

/// `(∂2 a, -∂1 a)`.
pub fn spec_grad_perp(a: &SpectralCoeffs) -> VecSpectrum {
    let mut b1 = a.clone();
    b1.apply(|m| Complex64::new(0.0, m.kd2));
    let mut b2 = a.clone();
    b2.apply(|m| Complex64::new(0.0, -m.kd1));
    [b1, b2]
}

/// `∂1 v2 - ∂2 v1`.
pub fn spec_curl(v: &VecSpectrum) -> SpectralCoeffs {
    let mut out = SpectralCoeffs::zeros(v[0].grid());
    for (idx, o) in out.data_mut().iter_mut().enumerate() {
        let m = v[0].mode(idx);
        *o = i_times(v[1].data()[idx], m.kd1) - i_times(v[0].data()[idx], m.kd2);
    }
    out
}

pub fn spec_laplacian(c: &SpectralCoeffs) -> SpectralCoeffs {
    let mut out = c.clone();
    out.apply(|m| Complex64::new(-m.k_sq(), 0.0));
    out
}

/// Mode-wise `V̂ - k (k·V̂)/|k|²`; the mean mode (and any mode whose
/// derivative symbol vanishes) passes through.
pub fn spec_leray(v: &mut VecSpectrum) {
    let grid = v[0].grid();
    let n = v[0].data().len();
    for idx in 0..n {
        let m: Mode = v[0].mode(idx);
        let k2 = m.k_sq();
        if k2 == 0.0 {
            continue;
        }
        let a = v[0].data()[idx];
        let b = v[1].data()[idx];
        let proj = (a * m.kd1 + b * m.kd2) / k2;
        v[0].data_mut()[idx] = a - proj * m.kd1;
        v[1].data_mut()[idx] = b - proj * m.kd2;
    }
    debug_assert_eq!(v[1].grid(), grid);
}

/// Inverse Laplacian on mean-free modes; the mean mode is set to zero.
pub fn spec_inverse_laplacian(c: &SpectralCoeffs) -> SpectralCoeffs {
    let mut out = c.clone();
    out.apply(|m| {
        let k2 = m.k_sq();
        if k2 == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(-1.0 / k2, 0.0)
        }
    });
    out
}

pub fn gradient(f: &ScalarField) -> Result<VecField> {
    field_of(&spec_grad(&SpectralCoeffs::forward(f)?))
}

pub fn divergence(v: &VecField) -> Result<ScalarField> {
    spec_div(&spec_of(v)?).inverse()
}

/// Maximum modulus of the spectral divergence.
pub fn divergence_max(v: &VecField) -> Result<f64> {
    Ok(divergence(v)?.max_abs())
}

pub fn curl2d(v: &VecField) -> Result<ScalarField> {
    spec_curl(&spec_of(v)?).inverse()
}

pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    spec_laplacian(&SpectralCoeffs::forward(f)?).inverse()
}

/// `B = (∂2 A, -∂1 A)`.
pub fn grad_perp(a: &ScalarField) -> Result<VecField> {
    field_of(&spec_grad_perp(&SpectralCoeffs::forward(a)?))
}

/// `L²` projection onto divergence-free fields.
pub fn leray_project(v: &VecField) -> Result<VecField> {
    let mut s = spec_of(v)?;
    spec_leray(&mut s);
    field_of(&s)
}

pub fn dealias_field(f: &ScalarField) -> Result<ScalarField> {
    SpectralCoeffs::forward(f)?.dealiased().inverse()
}

/// Stream function `ψ` with `grad_perp(ψ) = V` for a divergence-free,
/// mean-free `V` (solves `Δψ = -curl V`).
pub fn stream_function(v: &VecField) -> Result<ScalarField> {
    let mut w = spec_curl(&spec_of(v)?);
    w.scale(-1.0);
    spec_inverse_laplacian(&w).inverse()
}

/// Spectral interpolation of a scalar field onto a finer grid (zero
/// padding). Modes on the source Nyquist lines are dropped.
pub fn refine(f: &ScalarField, factor: usize) -> Result<ScalarField> {
    let src = SpectralCoeffs::forward(f)?;
    let g = f.grid();
    let fine = super::Grid2::new(g.n1() * factor, g.n2() * factor)?;
    let mut out = SpectralCoeffs::zeros(fine);
    let hn = fine.half_n2();
    for m in src.modes() {
        if 2 * m.k1.unsigned_abs() as usize == g.n1() || 2 * m.k2 as usize == g.n2() {
            continue;
        }
        let row = m.k1.rem_euclid(fine.n1() as i64) as usize;
        out.data_mut()[row * hn + m.k2 as usize] = src.data()[m.row * g.half_n2() + m.col];
    }
    out.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid2;
    use std::f64::consts::PI;

    fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.zip_map(b, |x, y| x - y).max_abs()
    }

    #[test]
    fn grad_perp_of_sine() {
        let g = Grid2::square(32).unwrap();
        let a = ScalarField::from_fn(g, |x1, _| (2.0 * PI * x1).sin() / (2.0 * PI));
        let b = grad_perp(&a).unwrap();
        assert!(b.comp(0).max_abs() < 1e-14);
        let expect = ScalarField::from_fn(g, |x1, _| -(2.0 * PI * x1).cos());
        assert!(max_diff(b.comp(1), &expect) < 1e-13);
    }

    #[test]
    fn grad_perp_identities() {
        let g = Grid2::new(32, 16).unwrap();
        let a = ScalarField::from_fn(g, |x1, x2| {
            (2.0 * PI * (2.0 * x1 + x2)).sin() + 0.3 * (2.0 * PI * 3.0 * x2).cos() * (2.0 * PI * x1).sin()
        });
        let b = grad_perp(&a).unwrap();
        assert!(divergence_max(&b).unwrap() < 1e-12);
        let curl = curl2d(&b).unwrap();
        let lap = laplacian(&a).unwrap();
        assert!(max_diff(&curl, &lap.scaled(-1.0)) < 1e-10);
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        // centred second differences at n = 256 as an independent check
        let g = Grid2::square(256).unwrap();
        let f = ScalarField::from_fn(g, |x1, _| (2.0 * PI * x1).cos());
        let lap = laplacian(&f).unwrap();
        let exact = f.scaled(-4.0 * PI * PI);
        // rounding in the high modes is amplified by |2πk|² ~ 1e6, so the
        // bound is taken relative to the output amplitude 4π²
        let err = max_diff(&lap, &exact);
        assert!(err < 1e-10 * exact.max_abs(), "spectral laplacian error {err}");
        let h = g.h1();
        let n = g.n1();
        let v = f.values();
        let mut fd_err: f64 = 0.0;
        for i in 0..n {
            let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
            let fd = (v[g.index(ip, 0)] - 2.0 * v[g.index(i, 0)] + v[g.index(im, 0)]) / (h * h);
            fd_err = fd_err.max((fd - lap.values()[g.index(i, 0)]).abs());
        }
        // second-order FD error ≈ (2π)^4 h²/12
        assert!(fd_err < 2.0 * (2.0 * PI).powi(4) * h * h / 12.0);
    }

    #[test]
    fn leray_fixed_point_and_gradients() {
        let g = Grid2::square(32).unwrap();
        let shear = VecField::from_fn(g, |_, x2| [(2.0 * PI * x2).sin(), 0.0]);
        let p = leray_project(&shear).unwrap();
        assert!(max_diff(p.comp(0), shear.comp(0)) < 1e-14);
        let phi = ScalarField::from_fn(g, |x1, _| (2.0 * PI * x1).cos());
        let gp = leray_project(&gradient(&phi).unwrap()).unwrap();
        assert!(gp.scale() < 1e-13);
        let single = VecField::from_fn(g, |x1, _| [(2.0 * PI * x1).cos(), 0.0]);
        assert!(leray_project(&single).unwrap().scale() < 1e-14);
    }

    #[test]
    fn dealias_cuts_high_modes() {
        let g = Grid2::square(64).unwrap();
        let low = ScalarField::from_fn(g, |x1, x2| (2.0 * PI * (21.0 * x1 - 5.0 * x2)).cos());
        assert!(max_diff(&dealias_field(&low).unwrap(), &low) < 1e-12);
        let high = ScalarField::from_fn(g, |x1, _| (2.0 * PI * 31.0 * x1).cos());
        assert!(dealias_field(&high).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn dealiased_product_matches_fine_grid() {
        // product of two |k| = n/4 modes; the 2x finer grid resolves it exactly
        let n = 64;
        let g = Grid2::square(n).unwrap();
        let fine = Grid2::square(2 * n).unwrap();
        let k = (n / 4) as f64;
        let mode = |x1: f64, x2: f64| (2.0 * PI * k * x1).cos() * (2.0 * PI * k * x2).sin();
        let coarse = ScalarField::from_fn(g, |a, b| mode(a, b) * mode(a, b));
        let exact = ScalarField::from_fn(fine, |a, b| mode(a, b) * mode(a, b));
        let cc = SpectralCoeffs::forward(&coarse).unwrap().dealiased();
        let cf = SpectralCoeffs::forward(&exact).unwrap();
        let (c1, c2) = g.dealias_cutoff();
        for m in cc.modes() {
            if m.k1.abs() <= c1 && m.k2.abs() <= c2 {
                let d = (cc.get(m.k1, m.k2) - cf.get(m.k1, m.k2)).norm();
                assert!(d < 1e-12, "mode ({}, {}) differs by {d}", m.k1, m.k2);
            }
        }
    }

    #[test]
    fn stream_function_inverts_grad_perp() {
        let g = Grid2::square(32).unwrap();
        let a = ScalarField::from_fn(g, |x1, x2| (2.0 * PI * x1).sin() * (4.0 * PI * x2).cos());
        let psi = stream_function(&grad_perp(&a).unwrap()).unwrap();
        assert!(max_diff(&psi, &a) < 1e-13);
    }

    #[test]
    fn refine_interpolates_band_limited_fields() {
        let g = Grid2::square(16).unwrap();
        let f = |x1: f64, x2: f64| (2.0 * PI * x1).sin() + (2.0 * PI * 3.0 * x2).cos();
        let fine = refine(&ScalarField::from_fn(g, f), 2).unwrap();
        let exact = ScalarField::from_fn(fine.grid(), f);
        assert!(max_diff(&fine, &exact) < 1e-13);
    }
}
