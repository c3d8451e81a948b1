//! Discrete dissipation inequalities for admissible pairs.
//!
//! A trajectory is a list of snapshots at increasing times together with one
//! flux (or 1-form `E`) per step, held constant over the step. Entropy time
//! derivatives are forward differences over a step, the `E`-dependent term
//! uses the step-averaged state and the state-only term is averaged over the
//! two ends, so all residuals are second order in the step around its
//! midpoint.

use crate::error::{ensure_finite, RelaxError, Result};
use crate::fields::grid3::{curl3, VecField3};
use crate::fields::{divergence, gradient, ScalarField, VecField};
use crate::numerics::{pairwise_sum, pairwise_sum_by};

use super::diffusion::{entropy_integral, face_gradients, face_means, Cost, FaceFlux, ScalarEntropy};
use super::legendre::{legendre_transform, Lagrangian, SearchGrid};

/// Absolute bound on the discrete continuity residual of an admissible pair,
/// scaled by `max(1, max|div q|)`.
pub const CONTINUITY_TOL: f64 = 1e-8;

/// A flux field: on cell faces (finite-volume divergence) or at the nodes
/// (spectral divergence).
#[derive(Clone, Debug, PartialEq)]
pub enum Flux {
    Faces(FaceFlux),
    Nodes(VecField),
}

impl Flux {
    pub fn divergence(&self) -> Result<ScalarField> {
        match self {
            Flux::Faces(q) => Ok(q.divergence()),
            Flux::Nodes(q) => divergence(q),
        }
    }

    /// `∫|q|²/ρ`.
    fn kinetic(&self, rho: &ScalarField) -> f64 {
        let g = rho.grid();
        match self {
            Flux::Faces(q) => {
                let (f1, f2) = face_means(rho);
                let (a, b) = (q.q1.values(), q.q2.values());
                pairwise_sum_by(g.len(), |i| a[i] * a[i] / f1.values()[i] + b[i] * b[i] / f2.values()[i])
                    * g.cell_area()
            }
            Flux::Nodes(q) => {
                let (a, b, r) = (q.comp(0).values(), q.comp(1).values(), rho.values());
                pairwise_sum_by(g.len(), |i| (a[i] * a[i] + b[i] * b[i]) / r[i]) * g.cell_area()
            }
        }
    }

    fn is_faces(&self) -> bool {
        matches!(self, Flux::Faces(_))
    }
}

/// `∫ρ|∇log ρ|²`, discretised on faces or spectrally.
fn fisher(rho: &ScalarField, faces: bool) -> Result<f64> {
    let g = rho.grid();
    let log = rho.map(f64::ln);
    if faces {
        let (f1, f2) = face_means(rho);
        let (d1, d2) = face_gradients(&log);
        let (a, b) = (d1.values(), d2.values());
        Ok(pairwise_sum_by(g.len(), |i| f1.values()[i] * a[i] * a[i] + f2.values()[i] * b[i] * b[i])
            * g.cell_area())
    } else {
        let d = gradient(&log)?;
        let (a, b, r) = (d.comp(0).values(), d.comp(1).values(), rho.values());
        Ok(pairwise_sum_by(g.len(), |i| r[i] * (a[i] * a[i] + b[i] * b[i])) * g.cell_area())
    }
}

fn check_density(rho: &ScalarField) -> Result<()> {
    ensure_finite(rho.values(), "density")?;
    if rho.min() <= 0.0 {
        return Err(RelaxError::DomainViolation(format!("density must be positive, min is {}", rho.min())));
    }
    Ok(())
}

fn midpoint(a: &ScalarField, b: &ScalarField) -> ScalarField {
    a.zip_map(b, |x, y| 0.5 * (x + y))
}

/// Per-step values of `2 d/dt∫ρ log ρ + ∫|q|²/ρ + ∫|∇ρ|²/ρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct HvReport {
    /// Step midpoints.
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    /// `max|(ρⁿ⁺¹ − ρⁿ)/dt + div qⁿ|` per step.
    pub continuity: Vec<f64>,
}

impl HvReport {
    pub fn worst(&self) -> f64 {
        self.lhs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }
}

fn step_times(times: &[f64], snapshots: usize, fluxes: usize) -> Result<()> {
    if snapshots < 2 || times.len() != snapshots || fluxes + 1 != snapshots {
        return Err(RelaxError::IncompleteTrajectory(format!(
            "need n >= 2 snapshots with n times and n - 1 fluxes, got {snapshots} snapshots, {} times, {fluxes} fluxes",
            times.len()
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(RelaxError::InvalidArgument("times must increase strictly".into()));
    }
    Ok(())
}

/// Continuity residual of one step.
pub fn continuity_residual(rho0: &ScalarField, rho1: &ScalarField, q: &Flux, dt: f64) -> Result<(f64, f64)> {
    let div = q.divergence()?;
    let res = rho1
        .zip_map(rho0, |a, b| (a - b) / dt)
        .zip_map(&div, |a, b| a + b)
        .max_abs();
    Ok((res, CONTINUITY_TOL * div.max_abs().max(1.0)))
}

/// The heat-flow dissipation functional along an admissible pair `(ρ, q)`.
/// Fails with `NotAdmissible` when a step violates the discrete continuity
/// equation. True heat trajectories give values near zero; the excess over
/// zero equals `∫|q + ∇ρ|²/ρ`.
pub fn hv_residual(times: &[f64], rho: &[ScalarField], q: &[Flux]) -> Result<HvReport> {
    step_times(times, rho.len(), q.len())?;
    let faces = q[0].is_faces();
    if q.iter().any(|f| f.is_faces() != faces) {
        return Err(RelaxError::InvalidArgument("fluxes must all live on faces or all at nodes".into()));
    }
    for r in rho {
        check_density(r)?;
    }
    let entropy: Vec<f64> = rho.iter().map(|r| entropy_integral(ScalarEntropy::RhoLogRho, r)).collect();
    let fish = rho.iter().map(|r| fisher(r, faces)).collect::<Result<Vec<_>>>()?;
    let mut out = HvReport {
        times: Vec::with_capacity(q.len()),
        lhs: Vec::with_capacity(q.len()),
        continuity: Vec::with_capacity(q.len()),
    };
    for (n, flux) in q.iter().enumerate() {
        let dt = times[n + 1] - times[n];
        let (res, bound) = continuity_residual(&rho[n], &rho[n + 1], flux, dt)?;
        if !(res <= bound) {
            return Err(RelaxError::NotAdmissible { residual: res, bound });
        }
        let kin = flux.kinetic(&midpoint(&rho[n], &rho[n + 1]));
        let lhs = 2.0 * (entropy[n + 1] - entropy[n]) / dt + kin + 0.5 * (fish[n] + fish[n + 1]);
        out.times.push(0.5 * (times[n] + times[n + 1]));
        out.lhs.push(lhs);
        out.continuity.push(res);
    }
    Ok(out)
}

/// `L(E, ρ) = ρ c(E/ρ)` for a scalar density `b = [ρ]`, with conjugate
/// `H(D, ρ) = ρ c*(D)`.
#[derive(Clone, Copy, Debug)]
pub struct ScalarCostLagrangian {
    pub cost: Cost,
}

impl Lagrangian for ScalarCostLagrangian {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, e: &[f64], b: &[f64]) -> f64 {
        let rho = b[0];
        if rho > 0.0 {
            rho * self.cost.c(&[e[0] / rho, e[1] / rho])
        } else if rho == 0.0 && e.iter().all(|x| *x == 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn hamiltonian(&self, d: &[f64], b: &[f64]) -> Option<f64> {
        Some(b[0] * self.cost.c_star(d))
    }

    fn hamiltonian_grad(&self, d: &[f64], b: &[f64]) -> Option<Vec<f64>> {
        let g = self.cost.grad_c_star([d[0], d[1]]);
        Some(vec![b[0] * g[0], b[0] * g[1]])
    }

    fn search_radius(&self, d: &[f64], b: &[f64]) -> f64 {
        match self.cost {
            Cost::Quadratic => (1.0 + 2.0 * (d[0].hypot(d[1]))) * b[0].abs().max(1.0),
            Cost::Relativistic => b[0].abs().max(1e-12),
        }
    }
}

/// Entropy of a 3-vector field.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorEntropy {
    /// `|B|²/2`.
    Quadratic,
    /// `√(δ² + |B|²)`, a smoothing of `|B|`.
    Abs { delta: f64 },
}

impl VectorEntropy {
    pub fn theta(&self, b: [f64; 3]) -> f64 {
        let b2 = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
        match self {
            VectorEntropy::Quadratic => 0.5 * b2,
            VectorEntropy::Abs { delta } => (delta * delta + b2).sqrt(),
        }
    }

    pub fn theta_prime(&self, b: [f64; 3]) -> [f64; 3] {
        match self {
            VectorEntropy::Quadratic => b,
            VectorEntropy::Abs { delta } => {
                let s = (delta * delta + b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
                [b[0] / s, b[1] / s, b[2] / s]
            }
        }
    }

    pub fn integral(&self, b: &VecField3) -> f64 {
        let vals: Vec<f64> = (0..b.grid().len()).map(|i| self.theta(b.at(i))).collect();
        pairwise_sum(&vals) * b.grid().cell_volume()
    }

    /// `θ'(B)` as a field.
    pub fn derivative_field(&self, b: &VecField3) -> VecField3 {
        VecField3::from_nodes(b.grid(), |i| self.theta_prime(b.at(i)))
    }
}

/// Entropy used by [`general_dissipation_residual`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Theta {
    Scalar(ScalarEntropy),
    Vector(VectorEntropy),
}

/// An admissible pair in one of the two supported degrees.
pub enum FormTrajectory<'a> {
    /// `k = d = 2`: densities `ρ` and `E = −q`, so that `∂tρ − ∇·E = 0` and
    /// `D = ∇θ'(ρ)`.
    Density {
        times: &'a [f64],
        rho: &'a [ScalarField],
        e: &'a [VecField],
    },
    /// `k = 2, d = 3`: divergence-free `B` and `E` with `∂tB + ∇×E = 0`,
    /// `D = ∇×θ'(B)`.
    TwoForm {
        times: &'a [f64],
        b: &'a [VecField3],
        e: &'a [VecField3],
    },
}

/// Per-step terms of the general dissipation inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct DissipationReport {
    pub times: Vec<f64>,
    /// `d/dt∫θ(B) + ∫(L(E, B) + H(D, B))`.
    pub residual: Vec<f64>,
    /// `∫θ(B)` at every snapshot.
    pub entropy: Vec<f64>,
    /// `∫(L + H)` per step.
    pub action: Vec<f64>,
}

/// `∫ H(D, B)` over nodes, closed form when available.
fn integral_h(l: &dyn Lagrangian, n: usize, cell: f64, at: impl Fn(usize) -> (Vec<f64>, Vec<f64>)) -> Result<f64> {
    let vals = (0..n)
        .map(|i| {
            let (d, b) = at(i);
            match l.hamiltonian(&d, &b) {
                Some(h) => Ok(h),
                None => legendre_transform(l, &d, &b, &SearchGrid::default()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&vals) * cell)
}

fn integral_l(l: &dyn Lagrangian, n: usize, cell: f64, at: impl Fn(usize) -> (Vec<f64>, Vec<f64>)) -> f64 {
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let (e, b) = at(i);
            l.value(&e, &b)
        })
        .collect();
    pairwise_sum(&vals) * cell
}

/// `d/dt∫θ(B) + ∫(L(E, B) + H(D, B))` per step for the degrees `(k, d)`
/// the framework is realised for: `k = d = 2` (scalar diffusion) and
/// `k = 2, d = 3` (divergence-free fields).
pub fn general_dissipation_residual(
    k: usize,
    d: usize,
    traj: &FormTrajectory,
    l: &dyn Lagrangian,
    theta: Theta,
) -> Result<DissipationReport> {
    match (k, d, traj, theta) {
        (2, 2, FormTrajectory::Density { times, rho, e }, Theta::Scalar(ent)) => {
            step_times(times, rho.len(), e.len())?;
            if l.dim() != 2 {
                return Err(RelaxError::InvalidArgument("the density case needs a 2-component Lagrangian".into()));
            }
            for r in rho.iter() {
                check_density(r)?;
            }
            let g = rho[0].grid();
            let cell = g.cell_area();
            let entropy: Vec<f64> = rho.iter().map(|r| entropy_integral(ent, r)).collect();
            let h_int = rho
                .iter()
                .map(|r| {
                    let dd = gradient(&r.map(|x| ent.theta_prime(x)))?;
                    integral_h(l, g.len(), cell, |i| {
                        (vec![dd.comp(0).values()[i], dd.comp(1).values()[i]], vec![r.values()[i]])
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut rep = report(times, entropy);
            for (n, en) in e.iter().enumerate() {
                let bar = midpoint(&rho[n], &rho[n + 1]);
                let l_int = integral_l(l, g.len(), cell, |i| {
                    (vec![en.comp(0).values()[i], en.comp(1).values()[i]], vec![bar.values()[i]])
                });
                rep.push(n, times, l_int + 0.5 * (h_int[n] + h_int[n + 1]));
            }
            Ok(rep)
        }
        (2, 3, FormTrajectory::TwoForm { times, b, e }, Theta::Vector(ent)) => {
            step_times(times, b.len(), e.len())?;
            if l.dim() != 3 {
                return Err(RelaxError::InvalidArgument("the two-form case needs a 3-component Lagrangian".into()));
            }
            let g = b[0].grid();
            let cell = g.cell_volume();
            let entropy: Vec<f64> = b.iter().map(|f| ent.integral(f)).collect();
            let h_int = b
                .iter()
                .map(|f| {
                    let dd = curl3(&ent.derivative_field(f))?;
                    integral_h(l, g.len(), cell, |i| (dd.at(i).to_vec(), f.at(i).to_vec()))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut rep = report(times, entropy);
            for (n, en) in e.iter().enumerate() {
                let bar = |i: usize| {
                    let (x, y) = (b[n].at(i), b[n + 1].at(i));
                    vec![0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1]), 0.5 * (x[2] + y[2])]
                };
                let l_int = integral_l(l, g.len(), cell, |i| (en.at(i).to_vec(), bar(i)));
                rep.push(n, times, l_int + 0.5 * (h_int[n] + h_int[n + 1]));
            }
            Ok(rep)
        }
        (2, 2, ..) | (2, 3, ..) => Err(RelaxError::InvalidArgument(format!(
            "trajectory and entropy kinds do not match the degree (k, d) = ({k}, {d})"
        ))),
        _ => Err(RelaxError::UnsupportedDegree { k, d }),
    }
}

fn report(times: &[f64], entropy: Vec<f64>) -> DissipationReport {
    let n = times.len() - 1;
    DissipationReport {
        times: Vec::with_capacity(n),
        residual: Vec::with_capacity(n),
        entropy,
        action: Vec::with_capacity(n),
    }
}

impl DissipationReport {
    fn push(&mut self, n: usize, times: &[f64], action: f64) {
        let dt = times[n + 1] - times[n];
        self.times.push(0.5 * (times[n] + times[n + 1]));
        self.residual.push((self.entropy[n + 1] - self.entropy[n]) / dt + action);
        self.action.push(action);
    }

    pub fn worst(&self) -> f64 {
        self.residual.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }
}
