//! Born–Infeld Lagrangian and Hamiltonian, the Maxwell limit, and the
//! degenerate `λ = 0` flow
//!
//! ```text
//! ∂tB + ∇×E = 0,  E = B×v,  v = D×B / √(|B|² + |D×B|²),  D = ∇×θ'(B)
//! ```
//!
//! solved on a periodic 3D grid with spectral derivatives and Heun's method.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, RelaxError, Result};
use crate::fields::grid3::{curl3, curl3_dealiased, divergence3, partial3, Grid3, ScalarField3, VecField3};
use crate::gradient_flow::{Lagrangian, VectorEntropy};
use crate::numerics::linear_fit;

type V3 = [f64; 3];

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn v3(x: &[f64]) -> V3 {
    [x[0], x[1], x[2]]
}

/// Relative slack on the `λ = 0` constraints `E·B = 0`, `|E| ≤ |B|`.
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// `L_λ(E, B) = −√(λ² + |B|² − |E|² − λ⁻²(E·B)²)`, `+∞` where the radicand is
/// negative. At `λ = 0` this is `−√(|B|² − |E|²)` on `E·B = 0`, `|E| ≤ |B|`.
pub fn bi_lagrangian(e: V3, b: V3, lambda: f64) -> f64 {
    let (e2, b2, eb) = (dot(e, e), dot(b, b), dot(e, b));
    if !(lambda >= 0.0) {
        return f64::INFINITY;
    }
    if lambda == 0.0 {
        let scale = (e2 * b2).sqrt();
        if eb.abs() > CONSTRAINT_TOL * scale.max(f64::MIN_POSITIVE) || e2 > b2 * (1.0 + CONSTRAINT_TOL) {
            return f64::INFINITY;
        }
        return -(b2 - e2).max(0.0).sqrt();
    }
    let s = lambda * lambda + b2 - e2 - eb * eb / (lambda * lambda);
    if s < 0.0 {
        f64::INFINITY
    } else {
        -s.sqrt()
    }
}

/// Both closed forms of `H_λ(D, B)`:
/// `√(λ² + |B|² + λ²|D|² + |D×B|²)` and `√((λ² + |B|²)(1 + |D|²) − (D·B)²)`.
pub fn bi_hamiltonian_forms(d: V3, b: V3, lambda: f64) -> (f64, f64) {
    let l2 = lambda * lambda;
    let (d2, b2, db) = (dot(d, d), dot(b, b), dot(d, b));
    let dxb = cross(d, b);
    let first = (l2 + b2 + l2 * d2 + dot(dxb, dxb)).sqrt();
    let second = ((l2 + b2) * (1.0 + d2) - db * db).max(0.0).sqrt();
    (first, second)
}

/// `H_λ(D, B)`.
pub fn bi_hamiltonian(d: V3, b: V3, lambda: f64) -> f64 {
    let (h, other) = bi_hamiltonian_forms(d, b, lambda);
    debug_assert!((h - other).abs() <= 1e-12 * h.max(1.0), "{h} vs {other}");
    h
}

/// `∂₁H_λ(D, B) = ((λ² + |B|²)D − (D·B)B) / H_λ`; zero where `H_λ = 0`.
pub fn bi_hamiltonian_grad(d: V3, b: V3, lambda: f64) -> V3 {
    let h = bi_hamiltonian(d, b, lambda);
    if h == 0.0 {
        return [0.0; 3];
    }
    let a = lambda * lambda + dot(b, b);
    let db = dot(d, b);
    [(a * d[0] - db * b[0]) / h, (a * d[1] - db * b[1]) / h, (a * d[2] - db * b[2]) / h]
}

/// `v = D×B / √(|B|² + |D×B|²)`, and `v = 0` where the denominator
/// vanishes (that is, where `B = 0`).
pub fn bi_velocity_zero_lambda(d: V3, b: V3) -> V3 {
    let dxb = cross(d, b);
    let h0 = (dot(b, b) + dot(dxb, dxb)).sqrt();
    if h0 == 0.0 {
        return [0.0; 3];
    }
    [dxb[0] / h0, dxb[1] / h0, dxb[2] / h0]
}

/// The same velocity through `E = ∂₁H₀(D, B)` and `v = E×B/|B|²`.
pub fn bi_velocity_via_e(d: V3, b: V3) -> V3 {
    let b2 = dot(b, b);
    if b2 == 0.0 {
        return [0.0; 3];
    }
    let v = cross(bi_hamiltonian_grad(d, b, 0.0), b);
    [v[0] / b2, v[1] / b2, v[2] / b2]
}

/// The Born–Infeld Lagrangian as a [`Lagrangian`] in `E`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BornInfeld {
    pub lambda: f64,
}

impl Lagrangian for BornInfeld {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, e: &[f64], b: &[f64]) -> f64 {
        bi_lagrangian(v3(e), v3(b), self.lambda)
    }

    fn hamiltonian(&self, d: &[f64], b: &[f64]) -> Option<f64> {
        Some(bi_hamiltonian(v3(d), v3(b), self.lambda))
    }

    fn hamiltonian_grad(&self, d: &[f64], b: &[f64]) -> Option<Vec<f64>> {
        Some(bi_hamiltonian_grad(v3(d), v3(b), self.lambda).to_vec())
    }

    fn search_radius(&self, _d: &[f64], b: &[f64]) -> f64 {
        // the domain lies inside the ball |E|² ≤ λ² + |B|²
        (1.02 * (self.lambda * self.lambda + dot(v3(b), v3(b))).sqrt()).max(1e-6)
    }
}

/// `g(λ) = λ(λ + L_λ(E, B))` against its `λ → ∞` limit `(|E|² − |B|²)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxwellLimit {
    pub lambdas: Vec<f64>,
    pub g: Vec<f64>,
    pub limit: f64,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log|g − limit|` against `log λ`; `None` when
    /// some error is exactly zero.
    pub slope: Option<f64>,
}

pub fn maxwell_limit_check(e: V3, b: V3, lambdas: &[f64]) -> Result<MaxwellLimit> {
    ensure_finite(&[e, b].concat(), "Maxwell limit fields")?;
    let limit = 0.5 * (dot(e, e) - dot(b, b));
    let mut g = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        if !(lam > 0.0 && lam.is_finite()) {
            return Err(RelaxError::InvalidArgument(format!("λ must be positive, got {lam}")));
        }
        let eb = dot(e, b);
        let s = dot(b, b) - dot(e, e) - eb * eb / (lam * lam);
        if lam * lam + s < 0.0 {
            return Err(RelaxError::DomainViolation(format!("(E, B) is outside the domain of L_λ at λ = {lam}")));
        }
        // λ(λ − √(λ² + s)) without the cancellation
        g.push(-lam * s / (lam + (lam * lam + s).sqrt()));
    }
    let errors: Vec<f64> = g.iter().map(|x| (x - limit).abs()).collect();
    let slope = if lambdas.len() >= 2 && errors.iter().all(|&x| x > 0.0) {
        let lx: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
        let ly: Vec<f64> = errors.iter().map(|x| x.ln()).collect();
        Some(linear_fit(&lx, &ly).0)
    } else {
        None
    };
    Ok(MaxwellLimit {
        lambdas: lambdas.to_vec(),
        g,
        limit,
        errors,
        slope,
    })
}

/// The pointwise `λ = 0` quantities of a field.
#[derive(Clone, Debug)]
pub struct Derived {
    pub d: VecField3,
    pub v: VecField3,
    pub e: VecField3,
}

/// `D = ∇×θ'(B)`, then `v` and `E = B×v` at every node.
pub fn derive(b: &VecField3, theta: VectorEntropy) -> Result<Derived> {
    let d = curl3(&theta.derivative_field(b))?;
    let v = VecField3::from_nodes(b.grid(), |i| bi_velocity_zero_lambda(d.at(i), b.at(i)));
    let e = VecField3::from_nodes(b.grid(), |i| cross(b.at(i), v.at(i)));
    Ok(Derived { d, v, e })
}

/// Both expressions of the velocity for `θ(B) = |B|` (smoothed by `δ`).
#[derive(Clone, Debug)]
pub struct AbsVelocity {
    /// `∇·(B⊗B/H₀)`.
    pub divergence_form: VecField3,
    /// `D×B/H₀` with `D = ∇×θ_δ'(B)`.
    pub cross_form: VecField3,
    /// Largest pointwise distance between the two.
    pub discrepancy: f64,
}

pub fn theta_abs_velocity(b: &VecField3, delta: f64) -> Result<AbsVelocity> {
    if !(delta > 0.0) {
        return Err(RelaxError::InvalidArgument(format!("smoothing δ must be positive, got {delta}")));
    }
    b.check_finite()?;
    let g = b.grid();
    let der = derive(b, VectorEntropy::Abs { delta })?;
    let h0: Vec<f64> = (0..g.len())
        .map(|i| {
            let dxb = cross(der.d.at(i), b.at(i));
            let bi = b.at(i);
            (dot(bi, bi) + dot(dxb, dxb)).sqrt()
        })
        .collect();
    let mut comps: [ScalarField3; 3] = std::array::from_fn(|_| ScalarField3::zeros(g));
    for (i, out) in comps.iter_mut().enumerate() {
        for j in 0..3 {
            let m = ScalarField3::from_values(
                g,
                (0..g.len())
                    .map(|n| if h0[n] == 0.0 { 0.0 } else { b.at(n)[i] * b.at(n)[j] / h0[n] })
                    .collect(),
            )?;
            let dm = partial3(&m, j)?;
            for (o, x) in out.values_mut().iter_mut().zip(dm.values()) {
                *o += x;
            }
        }
    }
    let divergence_form = VecField3::new(comps)?;
    let discrepancy = (0..g.len())
        .map(|n| {
            let (a, c) = (divergence_form.at(n), der.v.at(n));
            let diff = [a[0] - c[0], a[1] - c[1], a[2] - c[2]];
            dot(diff, diff).sqrt()
        })
        .fold(0.0, f64::max);
    Ok(AbsVelocity {
        divergence_form,
        cross_form: der.v,
        discrepancy,
    })
}

/// Initial fields for the `λ = 0` flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiInitial {
    Uniform { b: V3 },
    /// `(b0 + a sin 2πx3, 0, 0)`.
    Sheared { background: f64, amplitude: f64 },
    /// `(a cos 2πx3, a sin 2πx3, c)`.
    Helical { a: f64, c: f64 },
    /// The Arnold–Beltrami–Childress field with `A = B = C = 1`, plus
    /// `p (0, 0, sin 2π(x1 + 2x2))`.
    Abc { perturbation: f64 },
}

impl BiInitial {
    pub fn field(&self, grid: Grid3) -> VecField3 {
        let tau = 2.0 * std::f64::consts::PI;
        match *self {
            BiInitial::Uniform { b } => VecField3::from_fn(grid, |_| b),
            BiInitial::Sheared { background, amplitude } => {
                VecField3::from_fn(grid, |x| [background + amplitude * (tau * x[2]).sin(), 0.0, 0.0])
            }
            BiInitial::Helical { a, c } => VecField3::from_fn(grid, |x| [a * (tau * x[2]).cos(), a * (tau * x[2]).sin(), c]),
            BiInitial::Abc { perturbation } => VecField3::from_fn(grid, |x| {
                [
                    (tau * x[2]).sin() + (tau * x[1]).cos(),
                    (tau * x[0]).sin() + (tau * x[2]).cos(),
                    (tau * x[1]).sin() + (tau * x[0]).cos() + perturbation * (tau * (x[0] + 2.0 * x[1])).sin(),
                ]
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiParams {
    /// Only `λ = 0` is evolved; positive values are for the pointwise algebra.
    pub lambda: f64,
    pub theta: VectorEntropy,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub snap_every: usize,
    pub initial: BiInitial,
}

impl Default for BiParams {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            theta: VectorEntropy::Quadratic,
            n: 32,
            dt: 2e-5,
            t_final: 0.01,
            snap_every: 50,
            initial: BiInitial::Abc { perturbation: 0.5 },
        }
    }
}

impl BiParams {
    pub fn validate(&self) -> Result<Grid3> {
        if self.lambda != 0.0 {
            return Err(RelaxError::InvalidArgument(format!(
                "only the λ = 0 flow is evolved, got λ = {}",
                self.lambda
            )));
        }
        if let VectorEntropy::Abs { delta } = self.theta {
            if !(delta > 0.0) {
                return Err(RelaxError::InvalidArgument("θ = |B| needs a smoothing δ > 0".into()));
            }
        }
        if !(self.dt > 0.0 && self.t_final > 0.0 && self.snap_every > 0) {
            return Err(RelaxError::InvalidArgument("need dt > 0, t_final > 0, snap_every >= 1".into()));
        }
        Grid3::cube(self.n)
    }
}

#[derive(Clone, Debug)]
pub struct BiState {
    pub time: f64,
    pub b: VecField3,
}

/// Step-size bound: the transport bound `0.5h` from `|v| < 1`, and the
/// explicit diffusive bound `h²/(8κ)` with `κ = max |B|θ''` the effective
/// diffusivity of small transverse perturbations.
pub fn bi_cfl_bound(b: &VecField3, theta: VectorEntropy) -> f64 {
    let h = b.grid().h_min();
    let kappa = (0..b.grid().len())
        .map(|i| {
            let m = dot(b.at(i), b.at(i)).sqrt();
            match theta {
                VectorEntropy::Quadratic => m,
                VectorEntropy::Abs { delta } => m / (delta * delta + m * m).sqrt(),
            }
        })
        .fold(0.0, f64::max);
    let diffusive = if kappa > 0.0 { h * h / (8.0 * kappa) } else { f64::INFINITY };
    (0.5 * h).min(diffusive)
}

fn rhs(b: &VecField3, theta: VectorEntropy) -> Result<(VecField3, Derived)> {
    let der = derive(b, theta)?;
    let mut r = curl3_dealiased(&der.e)?;
    r = scaled3(&r, -1.0);
    Ok((r, der))
}

fn scaled3(v: &VecField3, c: f64) -> VecField3 {
    VecField3::from_nodes(v.grid(), |i| {
        let x = v.at(i);
        [c * x[0], c * x[1], c * x[2]]
    })
}

/// Diagnostics of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub max_v: f64,
    pub max_e_dot_b: f64,
}

/// One Heun step of `∂tB = −∇×E`, `E = B×v`.
pub fn bi_step(s: &BiState, p: &BiParams) -> Result<(BiState, StepReport)> {
    p.validate()?;
    let bound = bi_cfl_bound(&s.b, p.theta);
    if p.dt > bound {
        return Err(RelaxError::CflViolation { dt: p.dt, bound });
    }
    let (k1, d1) = rhs(&s.b, p.theta)?;
    let mut mid = s.b.clone();
    mid.axpy(p.dt, &k1);
    let (k2, d2) = rhs(&mid, p.theta)?;
    let mut b = s.b.clone();
    b.axpy(0.5 * p.dt, &k1);
    b.axpy(0.5 * p.dt, &k2);
    b.check_finite()?;
    let mut rep = StepReport { max_v: 0.0, max_e_dot_b: 0.0 };
    for (der, field) in [(&d1, &s.b), (&d2, &mid)] {
        let scale = field.max_magnitude().max(f64::MIN_POSITIVE);
        for i in 0..field.grid().len() {
            let v = der.v.at(i);
            rep.max_v = rep.max_v.max(dot(v, v).sqrt());
            rep.max_e_dot_b = rep.max_e_dot_b.max(dot(der.e.at(i), field.at(i)).abs() / (scale * scale));
        }
    }
    if !(rep.max_v < 1.0) {
        return Err(RelaxError::NumericFailure(format!("transport speed reached {}", rep.max_v)));
    }
    Ok((BiState { time: s.time + p.dt, b }, rep))
}

pub const BI_LEDGER_HEADER: [&str; 5] = ["time", "thetaB", "maxv", "divB_max", "EdotB_max"];

/// `EdotB_max` is relative to `max|B|²`; `maxv` and `EdotB_max` cover the
/// stages of the step ending at `time` (zero on the first row).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BiRow {
    pub time: f64,
    pub theta_b: f64,
    pub max_v: f64,
    pub div_b_max: f64,
    pub e_dot_b_max: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BiLedger {
    pub rows: Vec<BiRow>,
}

impl BiLedger {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| RelaxError::Format(e.to_string());
        wr.write_record(BI_LEDGER_HEADER).map_err(err)?;
        for r in &self.rows {
            let vals = [r.time, r.theta_b, r.max_v, r.div_b_max, r.e_dot_b_max];
            wr.write_record(vals.iter().map(|v| format!("{v:e}"))).map_err(err)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Largest single-step rise of `∫θ(B)`, relative to its initial value.
    pub fn max_theta_rise(&self) -> f64 {
        let t0 = self.rows.first().map_or(1.0, |r| r.theta_b.abs().max(f64::MIN_POSITIVE));
        self.rows
            .windows(2)
            .map(|w| (w[1].theta_b - w[0].theta_b) / t0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct BiRun {
    pub ledger: BiLedger,
    pub snapshots: Vec<BiState>,
}

fn div_max(b: &VecField3) -> Result<f64> {
    Ok(divergence3(b)?.max_abs())
}

pub fn run_bi(p: &BiParams) -> Result<BiRun> {
    let grid = p.validate()?;
    let mut s = BiState {
        time: 0.0,
        b: p.initial.field(grid),
    };
    let steps = (p.t_final / p.dt).round().max(1.0) as usize;
    let mut run = BiRun {
        ledger: BiLedger {
            rows: vec![BiRow {
                time: 0.0,
                theta_b: p.theta.integral(&s.b),
                div_b_max: div_max(&s.b)?,
                ..Default::default()
            }],
        },
        snapshots: vec![s.clone()],
    };
    for n in 1..=steps {
        let (next, rep) = bi_step(&s, p)?;
        s = BiState { time: n as f64 * p.dt, b: next.b };
        run.ledger.rows.push(BiRow {
            time: s.time,
            theta_b: p.theta.integral(&s.b),
            max_v: rep.max_v,
            div_b_max: div_max(&s.b)?,
            e_dot_b_max: rep.max_e_dot_b,
        });
        if n % p.snap_every == 0 || n == steps {
            run.snapshots.push(s.clone());
        }
    }
    Ok(run)
}
