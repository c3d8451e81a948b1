//! Magnetic energy, the Euler residual `L(B) = ||ℙ∇·(B⊗B)||²` and certified
//! lower bounds of its convex relaxations
//!
//! ```text
//! K_r(B) = sup_z ∫ (B⊗B):(∇z + ∇zᵀ + rI) dx − ||z||²,
//! ```
//!
//! the sup running over divergence-free `z` with `∇z + ∇zᵀ + rI ⪰ 0`.
//!
//! Every value returned for `K_r` comes from an explicit feasible witness and
//! is therefore a lower bound. Witnesses are band-limited to the dealiasing
//! cutoff; for band-limited `B` the node quadrature of `B·(S + rI)·B` is then
//! exact, and it is always a nonnegative-weight quadrature, so `B ↦ value` is
//! a positive semidefinite quadratic form for any feasible witness.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{RelaxError, Result};
use crate::fields::ops::{field_of, spec_leray, spec_of, VecSpectrum};
use crate::fields::{Grid2, ScalarField, SpectralCoeffs, VecField};
use crate::numerics::pairwise_sum_by;

/// Floor below which a witness counts as infeasible.
pub const FEASIBILITY_FLOOR: f64 = -1e-10;

/// `∫ |B|² dx` (no factor 1/2), evaluated by Parseval.
pub fn magnetic_energy(b: &VecField) -> Result<f64> {
    let s = spec_of(b)?;
    Ok(s[0].energy() + s[1].energy())
}

/// Spectrum of `∂_j (a_i c_j)`, the divergence of the tensor product `a⊗c`
/// formed pointwise on the grid.
pub fn tensor_divergence(a: &VecField, c: &VecField, dealias: bool) -> Result<VecSpectrum> {
    let g = a.grid();
    let mut out = [SpectralCoeffs::zeros(g), SpectralCoeffs::zeros(g)];
    for (i, o) in out.iter_mut().enumerate() {
        for j in 0..2 {
            let prod = a.comp(i).zip_map(c.comp(j), |x, y| x * y);
            let mut p = SpectralCoeffs::forward(&prod)?;
            if dealias {
                p.dealias();
            }
            for (idx, (od, pd)) in o.data_mut().iter_mut().zip(p.data()).enumerate() {
                let m = p.mode(idx);
                let k = if j == 0 { m.kd1 } else { m.kd2 };
                *od += Complex64::new(-k * pd.im, k * pd.re);
            }
        }
    }
    Ok(out)
}

/// Spectrum of `ℙ∇·(B⊗B)` with a dealiased product.
pub fn lorentz_force_spec(b: &VecField) -> Result<VecSpectrum> {
    let mut f = tensor_divergence(b, b, true)?;
    spec_leray(&mut f);
    Ok(f)
}

/// `ℙ∇·(B⊗B) = ℙ (B·∇)B` for divergence-free `B`.
pub fn lorentz_force(b: &VecField) -> Result<VecField> {
    field_of(&lorentz_force_spec(b)?)
}

/// `L(B) = ||ℙ∇·(B⊗B)||²`.
pub fn euler_residual(b: &VecField) -> Result<f64> {
    let f = lorentz_force_spec(b)?;
    Ok(f[0].energy() + f[1].energy())
}

/// Pointwise entries `(a, b, c)` of the symmetric matrix `∇z + ∇zᵀ = [[a, b], [b, c]]`.
pub fn strain(z: &VecField) -> Result<[ScalarField; 3]> {
    let s = spec_of(z)?;
    strain_from_spec(&s)
}

fn strain_from_spec(s: &VecSpectrum) -> Result<[ScalarField; 3]> {
    let g = s[0].grid();
    let mut a = SpectralCoeffs::zeros(g);
    let mut b = SpectralCoeffs::zeros(g);
    let mut c = SpectralCoeffs::zeros(g);
    for idx in 0..a.data().len() {
        let m = a.mode(idx);
        let (z1, z2) = (s[0].data()[idx], s[1].data()[idx]);
        let d = |z: Complex64, k: f64| Complex64::new(-k * z.im, k * z.re);
        a.data_mut()[idx] = 2.0 * d(z1, m.kd1);
        c.data_mut()[idx] = 2.0 * d(z2, m.kd2);
        b.data_mut()[idx] = d(z1, m.kd2) + d(z2, m.kd1);
    }
    Ok([a.inverse()?, b.inverse()?, c.inverse()?])
}

/// Smallest eigenvalue of `[[a, b], [b, c]]`: mean of the diagonal minus the
/// root of the discriminant.
pub fn sym2_min_eigenvalue(a: f64, b: f64, c: f64) -> f64 {
    let m = 0.5 * (a + c);
    let h = 0.5 * (a - c);
    m - (h * h + b * b).sqrt()
}

/// Projection of `[[a, b], [b, c]]` onto the positive semidefinite cone in
/// the Frobenius norm.
pub fn sym2_psd_project(a: f64, b: f64, c: f64) -> [f64; 3] {
    let m = 0.5 * (a + c);
    let h = 0.5 * (a - c);
    let d = (h * h + b * b).sqrt();
    let (lo, hi) = (m - d, m + d);
    if lo >= 0.0 {
        [a, b, c]
    } else if hi <= 0.0 {
        [0.0, 0.0, 0.0]
    } else {
        // hi times the spectral projector (X - lo I)/(hi - lo)
        let s = hi / (2.0 * d);
        [s * (a - lo), s * b, s * (c - lo)]
    }
}

fn min_eigen_over_grid(s: &[ScalarField; 3]) -> f64 {
    let (a, b, c) = (s[0].values(), s[1].values(), s[2].values());
    (0..a.len()).fold(f64::INFINITY, |m, i| m.min(sym2_min_eigenvalue(a[i], b[i], c[i])))
}

/// A divergence-free test field `z` paired with the parameter `r` of the
/// constraint `∇z + ∇zᵀ + rI ⪰ 0`.
#[derive(Clone, Debug)]
pub struct DualWitness {
    r: f64,
    z: VecField,
    margin: f64,
}

impl DualWitness {
    /// Wraps `z`, computing its feasibility margin `min_x λ_min(∇z + ∇zᵀ) + r`.
    /// Infeasible witnesses are representable; they are rejected on use.
    pub fn new(r: f64, z: VecField) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(RelaxError::InvalidArgument(format!("r = {r} must be finite and nonnegative")));
        }
        z.check_finite()?;
        let spec = spec_of(&z)?;
        let s = strain_from_spec(&spec)?;
        let div_scale = 1.0 + s.iter().fold(0.0_f64, |m, f| m.max(f.max_abs()));
        let div = crate::fields::ops::spec_div(&spec).inverse()?.max_abs();
        if div > 1e-10 * div_scale {
            return Err(RelaxError::InvalidArgument(format!(
                "witness is not divergence-free (max |div z| = {div:.3e})"
            )));
        }
        let margin = min_eigen_over_grid(&s) + r;
        Ok(Self { r, z, margin })
    }

    /// The always-admissible witness `z = 0`.
    pub fn zero(grid: Grid2, r: f64) -> Self {
        Self {
            r,
            z: VecField::zeros(grid),
            margin: r,
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn z(&self) -> &VecField {
        &self.z
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn is_feasible(&self) -> bool {
        self.margin >= FEASIBILITY_FLOOR
    }

    /// The same direction used at parameter `r`. If `z` is too steep for the
    /// smaller `r` it is shrunk by the exact factor that restores feasibility.
    pub fn retarget(&self, r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(RelaxError::InvalidArgument(format!("r = {r} must be finite and nonnegative")));
        }
        let lmin = self.margin - self.r;
        if lmin + r >= 0.0 {
            return Ok(Self {
                r,
                z: self.z.clone(),
                margin: lmin + r,
            });
        }
        let t = r / -lmin;
        Ok(Self {
            r,
            z: self.z.scaled(t),
            margin: t * lmin + r,
        })
    }
}

/// `∫ B·(∇z + ∇zᵀ)·B dx`, by node quadrature.
fn strain_form(b: &VecField, s: &[ScalarField; 3]) -> f64 {
    let (b1, b2) = (b.comp(0).values(), b.comp(1).values());
    let (a, o, c) = (s[0].values(), s[1].values(), s[2].values());
    pairwise_sum_by(b1.len(), |i| {
        a[i] * b1[i] * b1[i] + 2.0 * o[i] * b1[i] * b2[i] + c[i] * b2[i] * b2[i]
    }) * b.grid().cell_area()
}

/// The integrand of the `K_r` supremum at a feasible witness, a certified
/// lower bound of `K_r(B)`.
pub fn kr_value_for_witness(b: &VecField, w: &DualWitness) -> Result<f64> {
    if !w.is_feasible() {
        return Err(RelaxError::InfeasibleWitness { margin: w.margin });
    }
    if b.grid() != w.z.grid() {
        return Err(RelaxError::InvalidArgument("B and witness live on different grids".into()));
    }
    b.check_finite()?;
    let s = strain(&w.z)?;
    Ok(strain_form(b, &s) - w.z.norm_sq() + w.r * b.norm_sq())
}

/// Result of [`kr_maximize`].
#[derive(Clone, Debug)]
pub struct KrEstimate {
    pub r: f64,
    /// Certified lower bound of `K_r(B)`.
    pub value: f64,
    pub witness: DualWitness,
    pub iterations: usize,
    /// Upper bound of `K_r(B)` over band-limited witnesses from the last
    /// multiplier; only informative, `value` is what is certified.
    pub dual_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct KrEstimateJson {
    r: f64,
    value: f64,
    iterations: usize,
    feasibility_margin: f64,
}

impl KrEstimate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&KrEstimateJson {
            r: self.r,
            value: self.value,
            iterations: self.iterations,
            feasibility_margin: self.witness.margin,
        })
        .expect("plain struct serialises")
    }
}

/// Band-limited divergence-free part: `Π_band ℙ`.
fn project_witness_space(s: &mut VecSpectrum) {
    spec_leray(s);
    for c in s.iter_mut() {
        c.dealias();
        // drop the mean: witnesses are gradients of a periodic stream function
        c.data_mut()[0] = Complex64::new(0.0, 0.0);
    }
}

/// Maximise the `K_r` integrand over band-limited divergence-free witnesses.
///
/// The constrained problem is attacked through its Lagrangian dual: for a
/// pointwise multiplier `Λ ⪰ 0` the best witness is
/// `z(Λ) = −Π ℙ ∇·(B⊗B + Λ)`, and `Λ` follows accelerated projected
/// gradient steps on the dual function, whose gradient is `∇z + ∇zᵀ + rI`.
/// Every `z(Λ)` is turned into a feasible candidate by the exact scaling
/// `t z` with `t ≤ r / max(0, −λ_min)`, the scalar `t` being chosen to
/// maximise the concave quadratic `t ↦ value(t z)` on that range. The best
/// candidate is kept, so the result is nondecreasing in `budget` and never
/// below the `z = 0` value `r||B||²`.
pub fn kr_maximize(b: &VecField, r: f64, budget: usize) -> Result<KrEstimate> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(RelaxError::InvalidArgument(format!("r = {r} must be finite and nonnegative")));
    }
    b.check_finite()?;
    let g = b.grid();
    let n = g.len();
    let b_sq = b.norm_sq();
    let base = r * b_sq;
    let mut best = DualWitness::zero(g, r);
    let mut best_value = base;

    // F = ∇·(B⊗B), undealiased: ⟨z, F⟩ is then the exact adjoint of the
    // node quadrature of (B⊗B):∇z for any grid witness.
    let force = tensor_divergence(b, b, false)?;
    let (c1, c2) = g.dealias_cutoff();
    let kmax_sq = (2.0 * std::f64::consts::PI).powi(2) * ((c1 * c1 + c2 * c2) as f64);
    let tau = 1.0 / (2.0 * kmax_sq.max(1.0));

    let zero = || ScalarField::zeros(g);
    let mut lam = [zero(), zero(), zero()];
    let mut lam_prev = lam.clone();
    let mut dual_bound = f64::INFINITY;
    let mut iterations = 0;
    let mut last_best = best_value;
    let mut stall = 0;

    for k in 0..budget {
        iterations = k + 1;
        // extrapolated multiplier
        let beta = k as f64 / (k as f64 + 3.0);
        let y: [ScalarField; 3] = std::array::from_fn(|e| {
            lam[e].zip_map(&lam_prev[e], |a, p| a + beta * (a - p))
        });
        // z(y) = −Π ℙ (F + ∇·y)
        let lam_vec = [
            VecField::new(y[0].clone(), y[1].clone())?,
            VecField::new(y[1].clone(), y[2].clone())?,
        ];
        let mut zs = force.clone();
        for (i, row) in lam_vec.iter().enumerate() {
            let d = crate::fields::ops::spec_div(&spec_of(row)?);
            zs[i].axpy(1.0, &d);
        }
        project_witness_space(&mut zs);
        let w_energy = zs[0].energy() + zs[1].energy();
        for c in zs.iter_mut() {
            c.scale(-1.0);
        }
        let s = strain_from_spec(&zs)?;
        let trace_y = y[0].integral() + y[2].integral();
        dual_bound = dual_bound.min(base + w_energy + r * trace_y);

        // scaled candidate
        let lmin = min_eigen_over_grid(&s);
        let t_max = if lmin >= 0.0 {
            f64::INFINITY
        } else {
            r / (-lmin)
        };
        let lin = strain_form(b, &s);
        let quad = w_energy;
        if quad > 0.0 && lin > 0.0 {
            let t = (lin / (2.0 * quad)).min(t_max);
            let z = field_of(&zs)?.scaled(t);
            let cand = DualWitness::new(r, z)?;
            if cand.is_feasible() {
                let v = kr_value_for_witness(b, &cand)?;
                if v > best_value {
                    best_value = v;
                    best = cand;
                }
            }
        }

        // projected dual step
        lam_prev = lam;
        let (ya, yb, yc) = (y[0].values(), y[1].values(), y[2].values());
        let (sa, sb, sc) = (s[0].values(), s[1].values(), s[2].values());
        let mut na = vec![0.0; n];
        let mut nb = vec![0.0; n];
        let mut nc = vec![0.0; n];
        for i in 0..n {
            let p = sym2_psd_project(
                ya[i] - tau * (sa[i] + r),
                yb[i] - tau * sb[i],
                yc[i] - tau * (sc[i] + r),
            );
            na[i] = p[0];
            nb[i] = p[1];
            nc[i] = p[2];
        }
        lam = [
            ScalarField::from_values(g, na)?,
            ScalarField::from_values(g, nb)?,
            ScalarField::from_values(g, nc)?,
        ];

        let gap = dual_bound - best_value;
        if gap <= 1e-9 * dual_bound.abs().max(1e-300) {
            break;
        }
        if best_value - last_best <= 1e-9 * best_value.abs() {
            stall += 1;
        } else {
            stall = 0;
        }
        last_best = best_value;
        if stall >= 200 {
            break;
        }
    }

    Ok(KrEstimate {
        r,
        value: best_value,
        witness: best,
        iterations,
        dual_bound,
    })
}

/// `max_{r ∈ r_grid} (K_r(B) − r||B||²)` with certified `K_r` values; a lower
/// bound of `L(B)`.
pub fn recover_l(b: &VecField, r_grid: &[f64], budget: usize) -> Result<f64> {
    if r_grid.is_empty() {
        return Err(RelaxError::InvalidArgument("r grid is empty".into()));
    }
    let b_sq = b.norm_sq();
    let mut best = f64::NEG_INFINITY;
    for &r in r_grid {
        let est = kr_maximize(b, r, budget)?;
        best = best.max(est.value - r * b_sq);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::grad_perp;
    use std::f64::consts::PI;

    fn ot(n: usize) -> VecField {
        let g = Grid2::square(n).unwrap();
        let a = ScalarField::from_fn(g, |x1, x2| {
            (2.0 * PI * x1).cos() / (2.0 * PI) + (4.0 * PI * x2).cos() / (4.0 * PI)
        });
        grad_perp(&a).unwrap()
    }

    #[test]
    fn energy_of_shear() {
        let g = Grid2::square(16).unwrap();
        let b = VecField::from_fn(g, |_, x2| [(2.0 * PI * x2).sin(), 0.0]);
        assert!((magnetic_energy(&b).unwrap() - 0.5).abs() < 1e-15);
        assert!(euler_residual(&b).unwrap() < 1e-28);
    }

    #[test]
    fn psd_projection_is_a_projection() {
        for (a, b, c) in [(1.0, 0.3, -2.0), (-1.0, 0.0, -3.0), (2.0, 0.1, 1.0), (0.0, 1.0, 0.0)] {
            let p = sym2_psd_project(a, b, c);
            assert!(sym2_min_eigenvalue(p[0], p[1], p[2]) > -1e-14);
            let q = sym2_psd_project(p[0], p[1], p[2]);
            for i in 0..3 {
                assert!((p[i] - q[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_witness_gives_r_energy() {
        let b = ot(32);
        let w = DualWitness::zero(b.grid(), 2.0);
        let v = kr_value_for_witness(&b, &w).unwrap();
        assert!((v - 2.0 * b.norm_sq()).abs() < 1e-14);
    }

    #[test]
    fn ot_residual_matches_closed_form() {
        // ℙF has the two modes (1, ±2) with amplitudes (−6π/5, ±3π/5)
        let l = euler_residual(&ot(64)).unwrap();
        assert!((l - 1.8 * PI * PI).abs() < 1e-11, "L = {l}");
    }

    #[test]
    fn dual_bound_brackets_the_certified_value() {
        let b = ot(32);
        for r in [1.0, 5.0] {
            let e = kr_maximize(&b, r, 60).unwrap();
            assert!(e.value <= e.dual_bound + 1e-9);
            assert!(e.witness.is_feasible());
        }
    }
}
