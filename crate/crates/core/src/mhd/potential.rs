//! Transport of the 2D potential `A` (`B = grad_perp A`) and the level-set
//! area distribution of `A`, used as a topology diagnostic.

use std::f64::consts::PI;

use crate::error::{RelaxError, Result};
use crate::fields::ops::{refine, spec_grad};
use crate::fields::{Grid2, ScalarField, SpectralCoeffs, VecField};

/// `−Π(v·∇A)` for the spectrum `a`.
fn advection_rhs(a: &SpectralCoeffs, v: &VecField) -> Result<SpectralCoeffs> {
    let g = spec_grad(a);
    let d1 = g[0].inverse()?;
    let d2 = g[1].inverse()?;
    let (v1, v2) = (v.comp(0).values(), v.comp(1).values());
    let vals: Vec<f64> = (0..d1.values().len())
        .map(|i| -(v1[i] * d1.values()[i] + v2[i] * d2.values()[i]))
        .collect();
    let mut out = SpectralCoeffs::forward(&ScalarField::from_values(a.grid(), vals)?)?;
    out.dealias();
    Ok(out)
}

fn diffuse(a: &mut SpectralCoeffs, nu: f64, t: f64) {
    if nu > 0.0 {
        a.apply(|m| num_complex::Complex64::new((-nu * m.k_sq() * t).exp(), 0.0));
    }
}

/// One step of `∂t A + ∇·(A v) = νΔA` for divergence-free `v`: exact
/// spectral diffusion half steps around a dealiased RK4 advection step.
pub fn potential_advect_step(a: &ScalarField, v: &VecField, nu: f64, dt: f64) -> Result<ScalarField> {
    if !(nu >= 0.0 && dt > 0.0) {
        return Err(RelaxError::InvalidArgument(format!("need nu >= 0 and dt > 0 (nu = {nu}, dt = {dt})")));
    }
    let mut x = SpectralCoeffs::forward(a)?;
    v.check_finite()?;
    diffuse(&mut x, nu, 0.5 * dt);
    let k1 = advection_rhs(&x, v)?;
    let mut y = x.clone();
    y.axpy(0.5 * dt, &k1);
    let k2 = advection_rhs(&y, v)?;
    let mut y = x.clone();
    y.axpy(0.5 * dt, &k2);
    let k3 = advection_rhs(&y, v)?;
    let mut y = x.clone();
    y.axpy(dt, &k3);
    let k4 = advection_rhs(&y, v)?;
    x.axpy(dt / 6.0, &k1);
    x.axpy(dt / 3.0, &k2);
    x.axpy(dt / 3.0, &k3);
    x.axpy(dt / 6.0, &k4);
    diffuse(&mut x, nu, 0.5 * dt);
    x.inverse()
}

/// Fractions of samples per bin on `[lo, hi]`; values outside fall in the
/// end bins.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let w = (hi - lo) / bins as f64;
    for &v in values {
        let b = if w > 0.0 { ((v - lo) / w).floor() } else { 0.0 };
        let b = b.clamp(0.0, (bins - 1) as f64) as usize;
        h[b] += 1.0;
    }
    let total = values.len().max(1) as f64;
    h.iter_mut().for_each(|x| *x /= total);
    h
}

/// Like [`histogram`] but each sample is shared linearly between the two
/// nearest bin centres, which makes the result a Lipschitz function of the
/// sample values.
pub fn linear_histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let w = (hi - lo) / bins as f64;
    let last = (bins - 1) as f64;
    for &v in values {
        let x = if w > 0.0 { ((v - lo) / w - 0.5).clamp(0.0, last) } else { 0.0 };
        let i = (x.floor() as usize).min(bins - 1);
        let f = x - i as f64;
        h[i] += 1.0 - f;
        if f > 0.0 {
            h[i + 1] += f;
        }
    }
    let total = values.len().max(1) as f64;
    h.iter_mut().for_each(|x| *x /= total);
    h
}

/// `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// The cellular flow `v = grad_perp(sin 2πx1 sin 2πx2 / 2π)`.
pub fn cellular_flow(grid: Grid2) -> VecField {
    let tau = 2.0 * PI;
    VecField::from_fn(grid, |x1, x2| {
        [
            (tau * x1).sin() * (tau * x2).cos(),
            -(tau * x1).cos() * (tau * x2).sin(),
        ]
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopologyReport {
    pub nu: f64,
    /// `|∫A(T) − ∫A(0)| / T`.
    pub mean_drift: f64,
    /// `|∫A(T)² − ∫A(0)²| / T`.
    pub square_drift: f64,
    /// Total variation between the initial and final 64-bin histograms of `A`,
    /// per unit time.
    pub histogram_drift: f64,
}

pub const HISTOGRAM_BINS: usize = 64;

/// Linear-deposit histogram of `A` sampled on a grid refined
/// `refine_factor` times by spectral interpolation.
pub fn potential_histogram(a: &ScalarField, lo: f64, hi: f64, refine_factor: usize) -> Result<Vec<f64>> {
    let fine = if refine_factor > 1 { refine(a, refine_factor)? } else { a.clone() };
    Ok(linear_histogram(fine.values(), lo, hi, HISTOGRAM_BINS))
}

/// Advects `a0` by a steady flow `v` up to `t_final` and reports the drift of
/// the conserved quantities of pure transport.
pub fn topology_drift(a0: &ScalarField, v: &VecField, nu: f64, dt: f64, t_final: f64, refine_factor: usize) -> Result<TopologyReport> {
    let steps = (t_final / dt).round().max(1.0) as usize;
    let fine0 = refine(a0, refine_factor.max(1))?;
    let (lo, hi) = (fine0.min(), fine0.max());
    let h0 = linear_histogram(fine0.values(), lo, hi, HISTOGRAM_BINS);
    let mut a = a0.clone();
    for _ in 0..steps {
        a = potential_advect_step(&a, v, nu, dt)?;
    }
    let t = steps as f64 * dt;
    let h1 = potential_histogram(&a, lo, hi, refine_factor)?;
    Ok(TopologyReport {
        nu,
        mean_drift: (a.integral() - a0.integral()).abs() / t,
        square_drift: (a.norm_sq() - a0.norm_sq()).abs() / t,
        histogram_drift: total_variation(&h0, &h1) / t,
    })
}
