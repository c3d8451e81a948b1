//! Regularised MHD on the 2D torus:
//!
//! ```text
//! ε(∂t v + ∇·(v⊗v)) + v + ∇p − μΔv = ∇·(B⊗B)
//! ∂t B + ∇·(B⊗v − v⊗B) − νΔB = 0,      ∇·v = ∇·B = 0
//! ```
//!
//! The state is advanced in Fourier space. The default scheme is the
//! implicit midpoint rule solved by fixed-point iteration: linear terms are
//! diagonal, nonlinear terms are dealiased products evaluated at the step
//! midpoint. For states band-limited to the two-thirds cutoff the products
//! are exact before truncation, the transport and Lorentz terms cancel in the
//! energy identity, and the discrete balance
//!
//! ```text
//! (E^{n+1} − E^n)/dt + ||v||² + μ||∇v||² + ν||∇B||² = 0,   E = (||B||² + ε||v||²)/2
//! ```
//!
//! holds with midpoint dissipation up to rounding and the fixed-point
//! tolerance. A first-order IMEX variant is kept for comparison.

mod ledger;
pub mod potential;
pub mod sweep;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RelaxError, Result};
use crate::fields::ops::{field_of, spec_grad_perp, spec_leray, spec_of, VecSpectrum};
use crate::fields::{Grid2, ScalarField, SpectralCoeffs, VecField};
use crate::functionals::{euler_residual, tensor_divergence};

pub use ledger::{energy_balance_residual, BalanceResiduals, Ledger, LedgerRow};

/// Initial magnetic field, always given through its potential `A` with
/// `B = (∂2 A, −∂1 A)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `B = (c sin 2πx2, 0)`.
    Shear { amplitude: f64 },
    /// `A = (sin 2πx1 + cos 2πx2)/(2π)`, a Laplacian eigenfunction.
    Eigen,
    /// `A = cos(2πx1)/(2π) + cos(4πx2)/(4π)`.
    #[serde(rename = "ot")]
    OrszagTang,
    /// Seeded random potential with modes `|k_i| ≤ 4`.
    Random,
}

impl InitialCondition {
    pub fn potential(&self, grid: Grid2, seed: u64) -> ScalarField {
        let tau = 2.0 * PI;
        match self {
            Self::Shear { amplitude } => {
                let c = *amplitude;
                ScalarField::from_fn(grid, |_, x2| -c * (tau * x2).cos() / tau)
            }
            Self::Eigen => ScalarField::from_fn(grid, |x1, x2| ((tau * x1).sin() + (tau * x2).cos()) / tau),
            Self::OrszagTang => ScalarField::from_fn(grid, |x1, x2| {
                (tau * x1).cos() / tau + (2.0 * tau * x2).cos() / (2.0 * tau)
            }),
            Self::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut modes = Vec::new();
                for k1 in -4i64..=4 {
                    for k2 in 0i64..=4 {
                        if k2 == 0 && k1 <= 0 {
                            continue;
                        }
                        let scale = 1.0 / (tau * ((k1 * k1 + k2 * k2) as f64));
                        let c = scale * rng.random_range(-1.0..1.0);
                        let s = scale * rng.random_range(-1.0..1.0);
                        modes.push((k1 as f64, k2 as f64, c, s));
                    }
                }
                ScalarField::from_fn(grid, |x1, x2| {
                    modes
                        .iter()
                        .map(|&(k1, k2, c, s)| {
                            let th = tau * (k1 * x1 + k2 * x2);
                            c * th.cos() + s * th.sin()
                        })
                        .sum()
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Midpoint,
    Imex1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MreParams {
    pub epsilon: f64,
    pub mu: f64,
    pub nu: f64,
    pub dt: f64,
    pub t_final: f64,
    pub n: usize,
    pub seed: u64,
    pub initial: InitialCondition,
    pub scheme: Scheme,
    /// Snapshot every this many steps (0: first and last only).
    pub snap_every: usize,
    /// Evolve the potential `A` alongside `B`.
    pub track_potential: bool,
}

impl Default for MreParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            mu: 1e-2,
            nu: 1e-3,
            dt: 1e-3,
            t_final: 1.0,
            n: 64,
            seed: 0,
            initial: InitialCondition::OrszagTang,
            scheme: Scheme::Midpoint,
            snap_every: 0,
            track_potential: false,
        }
    }
}

impl MreParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [("epsilon", self.epsilon), ("mu", self.mu), ("nu", self.nu)];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(RelaxError::InvalidArgument(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        for (name, v) in [("dt", self.dt), ("t_final", self.t_final)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(RelaxError::InvalidArgument(format!("{name} = {v} must be finite and > 0")));
            }
        }
        Grid2::square(self.n)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2> {
        Grid2::square(self.n)
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }
}

/// Largest admissible step for the explicit transport terms, `0.5 h / max|v|`.
pub fn stability_bound(grid: Grid2, v: &VecField) -> f64 {
    let vmax = v.max_magnitude();
    if vmax == 0.0 {
        f64::INFINITY
    } else {
        0.5 * grid.h_min() / vmax
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MhdState {
    pub time: f64,
    pub b: VecField,
    pub v: VecField,
    pub a: Option<ScalarField>,
}

impl MhdState {
    /// Initial state with `v(0) = 0` (or the quasi-static velocity when `ε = 0`).
    pub fn initial(p: &MreParams) -> Result<Self> {
        p.validate()?;
        let grid = p.grid()?;
        let a = p.initial.potential(grid, p.seed);
        let mut ah = SpectralCoeffs::forward(&a)?;
        ah.dealias();
        let a = ah.inverse()?;
        let b = field_of(&spec_grad_perp(&ah))?;
        let v = if p.epsilon == 0.0 {
            quasi_static_velocity(&b, p.mu)?
        } else {
            VecField::zeros(grid)
        };
        Ok(Self {
            time: 0.0,
            b,
            v,
            a: p.track_potential.then_some(a),
        })
    }

    /// Max spectral divergence of `B` and `v`, and `||B − grad_perp A||`.
    pub fn invariant_errors(&self) -> Result<(f64, f64, f64)> {
        let db = crate::fields::divergence_max(&self.b)?;
        let dv = crate::fields::divergence_max(&self.v)?;
        let da = match &self.a {
            Some(a) => crate::fields::grad_perp(a)?.sub(&self.b).norm_sq().sqrt(),
            None => 0.0,
        };
        Ok((db, dv, da))
    }
}

/// Quantities of one step evaluated at the step midpoint.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub v2: f64,
    pub mu_gradv2: f64,
    pub nu_grad_b2: f64,
    /// `∫ (B⊗B):∇v`.
    pub work: f64,
    pub iterations: usize,
}

/// `v̂ = ℙ F̂ / (1 + μ|2πk|²)` with `F = ∇·(B⊗B)`, the `ε = 0` momentum solve.
pub fn quasi_static_velocity(b: &VecField, mu: f64) -> Result<VecField> {
    let mut f = tensor_divergence(b, b, true)?;
    spec_leray(&mut f);
    for c in f.iter_mut() {
        c.apply(|m| Complex64::new(1.0 / (1.0 + mu * m.k_sq()), 0.0));
    }
    field_of(&f)
}

struct Spectra {
    b: VecSpectrum,
    v: VecSpectrum,
    a: Option<SpectralCoeffs>,
}

impl Spectra {
    fn of(s: &MhdState) -> Result<Self> {
        Ok(Self {
            b: spec_of(&s.b)?,
            v: spec_of(&s.v)?,
            a: s.a.as_ref().map(SpectralCoeffs::forward).transpose()?,
        })
    }

    fn max_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        let pairs = self.b.iter().zip(&other.b).chain(self.v.iter().zip(&other.v));
        for (x, y) in pairs {
            for (p, q) in x.data().iter().zip(y.data()) {
                m = m.max((p - q).norm());
            }
        }
        if let (Some(x), Some(y)) = (&self.a, &other.a) {
            for (p, q) in x.data().iter().zip(y.data()) {
                m = m.max((p - q).norm());
            }
        }
        m
    }

    fn scale(&self) -> f64 {
        let mut m: f64 = 0.0;
        for c in self.b.iter().chain(&self.v) {
            for p in c.data() {
                m = m.max(p.norm());
            }
        }
        m
    }
}

/// Dealiased nonlinear terms at a given state: the projected momentum
/// forcing `ℙ[∇·(B⊗B) − ε∇·(v⊗v)]`, the induction term
/// `−∇·(B⊗v − v⊗B) = −grad_perp(B1 v2 − B2 v1)` and the potential term
/// `−v·∇A`.
struct Nonlinear {
    force: VecSpectrum,
    lorentz: VecSpectrum,
    induction: VecSpectrum,
    potential: Option<SpectralCoeffs>,
}

fn nonlinear(b: &VecField, v: &VecField, a: Option<&SpectralCoeffs>, epsilon: f64) -> Result<Nonlinear> {
    let mut lorentz = tensor_divergence(b, b, true)?;
    spec_leray(&mut lorentz);
    let mut force = lorentz.clone();
    if epsilon > 0.0 {
        let mut adv = tensor_divergence(v, v, true)?;
        spec_leray(&mut adv);
        for (f, c) in force.iter_mut().zip(&adv) {
            f.axpy(-epsilon, c);
        }
    }
    let m = b.comp(0).zip_map(v.comp(1), |x, y| x * y).zip_map(
        &b.comp(1).zip_map(v.comp(0), |x, y| x * y),
        |p, q| p - q,
    );
    let mut mh = SpectralCoeffs::forward(&m)?;
    mh.dealias();
    let mut induction = spec_grad_perp(&mh);
    for c in induction.iter_mut() {
        c.scale(-1.0);
    }
    let potential = a.map(|_| {
        mh.scale(-1.0);
        mh
    });
    Ok(Nonlinear {
        force,
        lorentz,
        induction,
        potential,
    })
}

/// Mode-wise `(c0 x + y) / (c0 + c1 |2πk|² + c2)` helper for the implicit solves.
fn implicit_solve(x: &SpectralCoeffs, y: &SpectralCoeffs, c0: f64, c1: f64, c2: f64) -> SpectralCoeffs {
    let mut out = x.clone();
    for (idx, o) in out.data_mut().iter_mut().enumerate() {
        let m = x.mode(idx);
        *o = (c0 * x.data()[idx] + y.data()[idx]) / (c0 + c2 + c1 * m.k_sq());
    }
    out
}

fn grad_energy(s: &SpectralCoeffs) -> f64 {
    let g = s.grid();
    s.modes()
        .map(|m| m.weight(&g) * m.k_sq() * s.data()[m.row * g.half_n2() + m.col].norm_sqr())
        .sum()
}

fn vec_grad_energy(s: &VecSpectrum) -> f64 {
    grad_energy(&s[0]) + grad_energy(&s[1])
}

fn vec_dot(a: &VecSpectrum, b: &VecSpectrum) -> f64 {
    a[0].dot(&b[0]) + a[1].dot(&b[1])
}

fn fields_of(s: &Spectra) -> Result<(VecField, VecField)> {
    Ok((field_of(&s.b)?, field_of(&s.v)?))
}

const PICARD_MAX: usize = 60;

/// Advance one step, returning the new state and the midpoint diagnostics.
pub fn mhd_step_diag(s: &MhdState, p: &MreParams) -> Result<(MhdState, StepDiagnostics)> {
    let grid = s.b.grid();
    let bound = stability_bound(grid, &s.v);
    if p.dt > bound {
        return Err(RelaxError::CflViolation { dt: p.dt, bound });
    }
    let old = Spectra::of(s)?;
    let (eps, mu, nu, dt) = (p.epsilon, p.mu, p.nu, p.dt);
    let (new, diag) = match p.scheme {
        Scheme::Midpoint => midpoint(&old, eps, mu, nu, dt)?,
        Scheme::Imex1 => imex1(&old, s, eps, mu, nu, dt)?,
    };
    let (b, mut v) = fields_of(&new)?;
    if eps == 0.0 {
        v = quasi_static_velocity(&b, mu)?;
    }
    let a = new.a.as_ref().map(|c| c.inverse()).transpose()?;
    let out = MhdState {
        time: s.time + dt,
        b,
        v,
        a,
    };
    out.b.check_finite()?;
    out.v.check_finite()?;
    Ok((out, diag))
}

/// One step of the regularised MHD system.
pub fn mhd_step(s: &MhdState, p: &MreParams) -> Result<MhdState> {
    Ok(mhd_step_diag(s, p)?.0)
}

fn midpoint(old: &Spectra, eps: f64, mu: f64, nu: f64, dt: f64) -> Result<(Spectra, StepDiagnostics)> {
    let mut mid = Spectra {
        b: old.b.clone(),
        v: old.v.clone(),
        a: old.a.clone(),
    };
    let scale = old.scale().max(1e-300);
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    loop {
        iterations += 1;
        let (b, v) = fields_of(&mid)?;
        let nl = nonlinear(&b, &v, mid.a.as_ref(), eps)?;
        let next_b: VecSpectrum =
            std::array::from_fn(|i| implicit_solve(&old.b[i], &nl.induction[i], 2.0 / dt, nu, 0.0));
        let next_v: VecSpectrum = if eps > 0.0 {
            std::array::from_fn(|i| implicit_solve(&old.v[i], &nl.force[i], 2.0 * eps / dt, mu, 1.0))
        } else {
            std::array::from_fn(|i| implicit_solve(&old.v[i], &nl.force[i], 0.0, mu, 1.0))
        };
        let next_a = match (&old.a, &nl.potential) {
            (Some(a0), Some(na)) => Some(implicit_solve(a0, na, 2.0 / dt, nu, 0.0)),
            _ => None,
        };
        let next = Spectra {
            b: next_b,
            v: next_v,
            a: next_a,
        };
        let change = next.max_diff(&mid);
        mid = next;
        if !change.is_finite() || change > 1e6 * scale {
            return Err(RelaxError::NumericFailure(
                "midpoint iteration diverged (dt too large for the stiff quasi-static coupling; reduce dt or raise mu)".into(),
            ));
        }
        // stop at rounding level, or once the iteration stops contracting
        if change <= 4.0 * f64::EPSILON * scale || (change >= 0.5 * last_change && change <= 1e-12 * scale) {
            break;
        }
        if iterations >= PICARD_MAX {
            if change <= 1e-10 * scale {
                break;
            }
            return Err(RelaxError::NumericFailure(format!(
                "midpoint iteration did not converge (last change {change:.3e})"
            )));
        }
        last_change = change;
    }
    // diagnostics at the converged midpoint
    let (b, v) = fields_of(&mid)?;
    let nl = nonlinear(&b, &v, None, 0.0)?;
    let diag = StepDiagnostics {
        v2: mid.v[0].energy() + mid.v[1].energy(),
        mu_gradv2: mu * vec_grad_energy(&mid.v),
        nu_grad_b2: nu * vec_grad_energy(&mid.b),
        work: -vec_dot(&mid.v, &nl.lorentz),
        iterations,
    };
    let extrapolate = |m: &SpectralCoeffs, o: &SpectralCoeffs| {
        let mut x = m.clone();
        x.scale(2.0);
        x.axpy(-1.0, o);
        x
    };
    let new = Spectra {
        b: std::array::from_fn(|i| extrapolate(&mid.b[i], &old.b[i])),
        v: std::array::from_fn(|i| extrapolate(&mid.v[i], &old.v[i])),
        a: match (&mid.a, &old.a) {
            (Some(m), Some(o)) => Some(extrapolate(m, o)),
            _ => None,
        },
    };
    Ok((new, diag))
}

/// First order: nonlinear terms at `t_n`, linear terms implicit, the
/// induction step using the updated velocity.
fn imex1(old: &Spectra, s: &MhdState, eps: f64, mu: f64, nu: f64, dt: f64) -> Result<(Spectra, StepDiagnostics)> {
    let nl0 = nonlinear(&s.b, &s.v, old.a.as_ref(), eps)?;
    let v_new: VecSpectrum = if eps > 0.0 {
        std::array::from_fn(|i| implicit_solve(&old.v[i], &nl0.force[i], eps / dt, mu, 1.0))
    } else {
        std::array::from_fn(|i| implicit_solve(&old.v[i], &nl0.force[i], 0.0, mu, 1.0))
    };
    let v_field = field_of(&v_new)?;
    let nl1 = nonlinear(&s.b, &v_field, old.a.as_ref(), 0.0)?;
    let b_new: VecSpectrum = std::array::from_fn(|i| implicit_solve(&old.b[i], &nl1.induction[i], 1.0 / dt, nu, 0.0));
    let a_new = match (&old.a, &nl1.potential) {
        (Some(a0), Some(na)) => Some(implicit_solve(a0, na, 1.0 / dt, nu, 0.0)),
        _ => None,
    };
    let diag = StepDiagnostics {
        v2: v_new[0].energy() + v_new[1].energy(),
        mu_gradv2: mu * vec_grad_energy(&v_new),
        nu_grad_b2: nu * vec_grad_energy(&b_new),
        work: -vec_dot(&v_new, &nl1.lorentz),
        iterations: 1,
    };
    Ok((
        Spectra {
            b: b_new,
            v: v_new,
            a: a_new,
        },
        diag,
    ))
}

/// Time-indexed snapshots plus the scalar ledger.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub params: MreParams,
    pub ledger: Ledger,
    pub snapshots: Vec<MhdState>,
}

impl Trajectory {
    pub fn initial_energy(&self) -> f64 {
        self.ledger.rows.first().map_or(0.0, |r| r.b2 + r.epsv2)
    }
}

fn ledger_row(s: &MhdState, p: &MreParams, diag: Option<&StepDiagnostics>) -> Result<LedgerRow> {
    let b2 = s.b.norm_sq();
    let v2n = s.v.norm_sq();
    let d = match diag {
        Some(d) => *d,
        None => {
            let vs = spec_of(&s.v)?;
            let bs = spec_of(&s.b)?;
            let lor = tensor_divergence(&s.b, &s.b, true)?;
            StepDiagnostics {
                v2: v2n,
                mu_gradv2: p.mu * vec_grad_energy(&vs),
                nu_grad_b2: p.nu * vec_grad_energy(&bs),
                work: -vec_dot(&vs, &lor),
                iterations: 0,
            }
        }
    };
    Ok(LedgerRow {
        time: s.time,
        b2,
        epsv2: p.epsilon * v2n,
        v2: d.v2,
        mu_gradv2: d.mu_gradv2,
        nu_grad_b2: d.nu_grad_b2,
        lb: euler_residual(&s.b)?,
        res_total: 0.0,
        res_mom: 0.0,
        res_ind: 0.0,
        work: d.work,
    })
}

/// Outcome of a run that may have stopped early.
#[derive(Debug)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub failure: Option<RelaxError>,
}

/// Run to `t_final`, keeping the partial trajectory if a step fails.
pub fn run_mhd_partial(p: &MreParams) -> Result<RunOutcome> {
    run_mhd_from(p, MhdState::initial(p)?)
}

/// Like [`run_mhd_partial`] but from a caller-supplied state.
pub fn run_mhd_from(p: &MreParams, initial: MhdState) -> Result<RunOutcome> {
    p.validate()?;
    if initial.b.grid() != p.grid()? || initial.v.grid() != initial.b.grid() {
        return Err(RelaxError::InvalidArgument("initial state does not match the grid size n".into()));
    }
    let mut state = initial;
    let t0 = state.time;
    let mut ledger = Ledger::default();
    ledger.rows.push(ledger_row(&state, p, None)?);
    let mut snapshots = vec![state.clone()];
    let steps = p.steps();
    let mut failure = None;
    for k in 1..=steps {
        match mhd_step_diag(&state, p) {
            Ok((mut next, diag)) => {
                next.time = t0 + k as f64 * p.dt;
                let mut row = ledger_row(&next, p, Some(&diag))?;
                ledger.fill_residuals(&mut row, p.dt);
                ledger.rows.push(row);
                state = next;
                let due = p.snap_every > 0 && k % p.snap_every == 0;
                if due || k == steps {
                    snapshots.push(state.clone());
                }
            }
            Err(e) => {
                if snapshots.last().map(|s| s.time) != Some(state.time) {
                    snapshots.push(state.clone());
                }
                failure = Some(e);
                break;
            }
        }
    }
    Ok(RunOutcome {
        trajectory: Trajectory {
            params: p.clone(),
            ledger,
            snapshots,
        },
        failure,
    })
}

pub fn run_mhd(p: &MreParams) -> Result<Trajectory> {
    let out = run_mhd_partial(p)?;
    match out.failure {
        Some(e) => Err(e),
        None => Ok(out.trajectory),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(initial: InitialCondition) -> MreParams {
        MreParams {
            n: 32,
            t_final: 0.05,
            initial,
            ..MreParams::default()
        }
    }

    #[test]
    fn shear_is_a_fixed_point() {
        let mut p = params(InitialCondition::Shear { amplitude: 1.3 });
        p.epsilon = 0.0;
        p.nu = 0.0;
        let s0 = MhdState::initial(&p).unwrap();
        let s1 = mhd_step(&s0, &p).unwrap();
        assert!(s1.b.sub(&s0.b).scale() < 1e-10);
        assert_eq!(s1.v.scale(), 0.0);
    }

    #[test]
    fn quasi_static_velocity_cases() {
        let g = Grid2::square(32).unwrap();
        let b = crate::fields::grad_perp(&InitialCondition::OrszagTang.potential(g, 0)).unwrap();
        let v0 = quasi_static_velocity(&b, 0.0).unwrap();
        let lf = crate::functionals::lorentz_force(&b).unwrap();
        assert!(v0.sub(&lf).scale() < 1e-14);
        assert!(crate::fields::divergence_max(&v0).unwrap() < 1e-12);

        // B = (c, sin 2πx1): the force c·2π cos(2πx1) e2 is one solenoidal |k| = 1 mode
        let b = VecField::from_fn(g, |x1, _| [0.7, (2.0 * PI * x1).sin()]);
        let v0 = quasi_static_velocity(&b, 0.0).unwrap();
        let v1 = quasi_static_velocity(&b, 1.0).unwrap();
        assert!(v0.scale() > 1.0);
        assert!(v1.sub(&v0.scaled(1.0 / (1.0 + 4.0 * PI * PI))).scale() < 1e-14);

        let shear = VecField::from_fn(g, |_, x2| [(2.0 * PI * x2).sin(), 0.0]);
        assert_eq!(quasi_static_velocity(&shear, 0.3).unwrap().scale(), 0.0);
    }

    #[test]
    fn midpoint_energy_identity() {
        let mut p = params(InitialCondition::OrszagTang);
        p.t_final = 0.02;
        let t = run_mhd(&p).unwrap();
        let e0 = t.initial_energy();
        for row in &t.ledger.rows[1..] {
            assert!(row.res_total.abs() < 1e-9 * e0, "{row:?}");
            assert!((row.res_mom + row.res_ind - row.res_total).abs() < 1e-12 * e0);
        }
    }

    #[test]
    fn potential_stays_consistent() {
        let mut p = params(InitialCondition::OrszagTang);
        p.track_potential = true;
        p.t_final = 0.02;
        let t = run_mhd(&p).unwrap();
        let (db, dv, da) = t.snapshots.last().unwrap().invariant_errors().unwrap();
        assert!(db < 1e-10 && dv < 1e-10, "{db} {dv}");
        assert!(da < 1e-10, "{da}");
    }

    #[test]
    fn cfl_violation_aborts() {
        let mut p = params(InitialCondition::OrszagTang);
        p.epsilon = 0.0;
        p.mu = 0.0;
        p.dt = 0.05;
        let out = run_mhd_partial(&p).unwrap();
        assert!(matches!(out.failure, Some(RelaxError::CflViolation { .. })));
        assert_eq!(out.trajectory.ledger.rows.len(), 1);
    }
}
