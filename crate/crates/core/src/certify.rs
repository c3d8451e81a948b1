//! Checks of computed trajectories against the dissipative-solution
//! conditions: the exponentially weighted energy inequality with `K_r`
//! replaced by certified lower bounds, the weak form of the transport
//! equation, and the weak-strong stability inequality against a smooth pair.
//!
//! `K_r` values enter through witnesses, so a failed entropy certificate is a
//! genuine violation while a passed one is only a necessary condition.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{RelaxError, Result};
use crate::fields::{Grid2, ScalarField, VecField};
use crate::functionals::{kr_maximize, kr_value_for_witness, DualWitness};
use crate::mhd::Trajectory;
use crate::numerics::{exp_weighted_trapezoid, pairwise_sum_by};

const TIME_MATCH: f64 = 1e-9;

/// Piecewise-constant `r(t) ≥ 0`: `values[i]` on `[breakpoints[i], breakpoints[i+1])`,
/// the last value extending to infinity. `breakpoints[0]` is the origin of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RSchedule {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl RSchedule {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(RelaxError::InvalidArgument(
                "schedule needs one value per breakpoint and at least one piece".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) || breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(RelaxError::InvalidArgument("breakpoints must be finite and increasing".into()));
        }
        if values.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(RelaxError::InvalidArgument("r values must be finite and nonnegative".into()));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn constant(r: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![r])
    }

    pub fn constant_from(t0: f64, r: f64) -> Result<Self> {
        Self::new(vec![t0], vec![r])
    }

    pub fn origin(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn piece(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= t).saturating_sub(1)
    }

    /// Right-continuous value `r(t)`.
    pub fn value_at(&self, t: f64) -> f64 {
        self.values[self.piece(t)]
    }

    /// `R(t) = ∫_{t0}^t r`, exact.
    pub fn integral(&self, t: f64) -> f64 {
        let t0 = self.origin();
        if t <= t0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (i, &r) in self.values.iter().enumerate() {
            let a = self.breakpoints[i];
            let b = self.breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY);
            if t <= a {
                break;
            }
            acc += r * (t.min(b) - a);
        }
        acc
    }

    /// Splits `[a, b]` at breakpoints: `(start, end, rate)` pieces.
    fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        let mut s = a;
        while s < b {
            let i = self.piece(s);
            let end = self.breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY).min(b);
            out.push((s, end, self.values[i]));
            s = end;
        }
        out
    }

    /// `∫_a^b f(s) e^{R(t) − R(s)} ds` with `f` linear from `fa` to `fb`.
    fn weighted(&self, fa: f64, fb: f64, a: f64, b: f64, t: f64) -> f64 {
        self.weighted_by_rate(a, b, t, |_| Ok((fa, fb))).expect("infallible")
    }

    /// As [`Self::weighted`], with the endpoint values depending on the rate
    /// of each piece.
    fn weighted_by_rate(&self, a: f64, b: f64, t: f64, ends: impl Fn(f64) -> Result<(f64, f64)>) -> Result<f64> {
        let len = b - a;
        if len <= 0.0 {
            return Ok(0.0);
        }
        let rt = self.integral(t);
        let mut acc = 0.0;
        for (s0, s1, rate) in self.pieces(a, b) {
            let (fa, fb) = ends(rate)?;
            let f0 = fa + (fb - fa) * (s0 - a) / len;
            let f1 = fa + (fb - fa) * (s1 - a) / len;
            acc += exp_weighted_trapezoid(f0, f1, s1 - s0, rate) * (rt - self.integral(s1)).exp();
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointResidual {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of [`entropy_residual`]. `witness_r` and `witness_margin` describe
/// the witness used at each checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schedule: RSchedule,
    pub tolerance: f64,
    pub worst_residual: f64,
    pub verdict: Verdict,
    pub per_time: Vec<CheckpointResidual>,
    pub witness_r: Vec<f64>,
    pub witness_margin: Vec<f64>,
    pub k_lower_bounds: Vec<f64>,
}

impl Certificate {
    pub fn passes(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Verdict at another tolerance.
    pub fn passes_at(&self, tolerance: f64) -> bool {
        self.worst_residual >= -tolerance
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serialises")
    }
}

fn check_trajectory(traj: &Trajectory) -> Result<()> {
    if traj.snapshots.is_empty() || traj.ledger.rows.is_empty() {
        return Err(RelaxError::IncompleteTrajectory("no snapshots or ledger rows".into()));
    }
    traj.ledger.validate()?;
    let rows = &traj.ledger.rows;
    let last = rows[rows.len() - 1].time;
    for s in &traj.snapshots {
        if s.time > last + TIME_MATCH {
            return Err(RelaxError::IncompleteTrajectory(format!(
                "snapshot at t = {} lies beyond the ledger (last row t = {last})",
                s.time
            )));
        }
    }
    if (traj.snapshots[0].time - rows[0].time).abs() > TIME_MATCH {
        return Err(RelaxError::IncompleteTrajectory("first snapshot is not the initial state".into()));
    }
    Ok(())
}

/// One witness per snapshot, each maximised at the scheduled `r`.
pub fn witnesses_for(traj: &Trajectory, sched: &RSchedule, budget: usize) -> Result<Vec<DualWitness>> {
    traj.snapshots
        .iter()
        .map(|s| Ok(kr_maximize(&s.b, sched.value_at(s.time), budget)?.witness))
        .collect()
}

/// Signed slack `RHS − LHS` of
///
/// ```text
/// ||B(t)||² + ∫_0^t [||v||² + K_{r(s)}(B)] e^{R(t)−R(s)} ds ≤ ||B(0)||² e^{R(t)}
/// ```
///
/// at every snapshot time. `||v||²` comes from the ledger (midpoint values,
/// exact exponential weights per step); `K` is the witness value at the
/// snapshots, trapezoidal in `s` with exact weights. On each piece of
/// constant rate `ρ` the endpoint witnesses are re-targeted to `ρ`.
pub fn entropy_residual(
    traj: &Trajectory,
    sched: &RSchedule,
    witnesses: &[DualWitness],
    tolerance: f64,
) -> Result<Certificate> {
    check_trajectory(traj)?;
    let snaps = &traj.snapshots;
    if witnesses.len() != snaps.len() {
        return Err(RelaxError::InvalidArgument(format!(
            "{} witnesses for {} snapshots",
            witnesses.len(),
            snaps.len()
        )));
    }
    if let Some(w) = witnesses.iter().find(|w| !w.is_feasible()) {
        return Err(RelaxError::InfeasibleWitness { margin: w.margin() });
    }
    let t0 = snaps[0].time;
    if (sched.origin() - t0).abs() > TIME_MATCH {
        return Err(RelaxError::InvalidArgument(format!(
            "schedule starts at {} but the trajectory at {t0}",
            sched.origin()
        )));
    }
    let k_at = |i: usize, r: f64| -> Result<f64> {
        kr_value_for_witness(&snaps[i].b, &witnesses[i].retarget(r)?)
    };

    // endpoint K values for every (interval, rate) pair that occurs
    let mut k_ends: Vec<Vec<(f64, (f64, f64))>> = Vec::with_capacity(snaps.len());
    for j in 0..snaps.len().saturating_sub(1) {
        let mut per_rate = Vec::new();
        for (_, _, r) in sched.pieces(snaps[j].time, snaps[j + 1].time) {
            if !per_rate.iter().any(|&(q, _)| q == r) {
                per_rate.push((r, (k_at(j, r)?, k_at(j + 1, r)?)));
            }
        }
        k_ends.push(per_rate);
    }
    let k_lower: Vec<f64> = (0..snaps.len())
        .map(|i| k_at(i, sched.value_at(snaps[i].time)))
        .collect::<Result<_>>()?;

    let b0 = snaps[0].b.norm_sq();
    let rows = &traj.ledger.rows;
    let mut per_time = Vec::with_capacity(snaps.len());
    for (i, s) in snaps.iter().enumerate() {
        let t = s.time;
        let mut lhs = s.b.norm_sq();
        for w in rows.windows(2) {
            if w[1].time > t + TIME_MATCH {
                break;
            }
            lhs += sched.weighted(w[1].v2, w[1].v2, w[0].time, w[1].time, t);
        }
        for j in 0..i {
            lhs += sched.weighted_by_rate(snaps[j].time, snaps[j + 1].time, t, |r| {
                Ok(k_ends[j].iter().find(|&&(q, _)| q == r).expect("rate was tabulated").1)
            })?;
        }
        let rhs = b0 * sched.integral(t).exp();
        per_time.push(CheckpointResidual {
            t,
            lhs,
            rhs,
            residual: rhs - lhs,
        });
    }
    let worst = per_time.iter().map(|c| c.residual).fold(f64::INFINITY, f64::min);
    crate::error::ensure_finite(&[worst], "entropy residual")?;
    Ok(Certificate {
        schedule: sched.clone(),
        tolerance,
        worst_residual: worst,
        verdict: if worst >= -tolerance { Verdict::Pass } else { Verdict::Fail },
        per_time,
        witness_r: witnesses.iter().map(|w| w.r()).collect(),
        witness_margin: witnesses.iter().map(|w| w.margin()).collect(),
        k_lower_bounds: k_lower,
    })
}

/// Space-time test field `φ(t, x) = cos(2π f t) ∇⊥ψ(x)` with
/// `ψ = cos(2π k·x + phase) / (2π|k|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestField {
    pub k: (i64, i64),
    pub phase: f64,
    pub freq: f64,
}

impl TestField {
    fn time_factor(&self, t: f64) -> (f64, f64) {
        let w = 2.0 * PI * self.freq;
        ((w * t).cos(), -w * (w * t).sin())
    }

    /// Spatial profile and its gradient `∂_j φ_i` at a point.
    pub fn profile(&self, x1: f64, x2: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let (k1, k2) = (self.k.0 as f64, self.k.1 as f64);
        let kn = (k1 * k1 + k2 * k2).sqrt();
        let th = 2.0 * PI * (k1 * x1 + k2 * x2) + self.phase;
        let (s, c) = th.sin_cos();
        let dir = [k2, -k1];
        let kk = [k1, k2];
        let mut grad = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                grad[i][j] = -c * 2.0 * PI * kk[j] * dir[i] / kn;
            }
        }
        ([-s * dir[0] / kn, -s * dir[1] / kn], grad)
    }
}

/// Eight divergence-free space-time test fields.
pub fn transport_dictionary() -> Vec<TestField> {
    let ks = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, 0), (0, 2)];
    ks.iter()
        .enumerate()
        .map(|(m, &k)| TestField {
            k,
            phase: if m % 2 == 0 { 0.0 } else { 0.5 * PI },
            freq: 0.5 * (m % 3) as f64,
        })
        .collect()
}

struct Sampled {
    phi: [Vec<f64>; 2],
    grad: [[Vec<f64>; 2]; 2],
}

fn sample(grid: Grid2, f: &TestField) -> Sampled {
    let n = grid.len();
    let mut phi = [vec![0.0; n], vec![0.0; n]];
    let mut grad = [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]];
    for idx in 0..n {
        let (x1, x2) = grid.coords(idx);
        let (p, g) = f.profile(x1, x2);
        for i in 0..2 {
            phi[i][idx] = p[i];
            for j in 0..2 {
                grad[i][j][idx] = g[i][j];
            }
        }
    }
    Sampled { phi, grad }
}

/// `|∫φ(T)·B(T) − ∫φ(0)·B(0) − ∫∫ B·∂tφ + (B⊗v − v⊗B):∇φ|` for each test
/// field, with node quadrature in space and trapezoid over snapshots in time.
pub fn transport_residual(traj: &Trajectory, fields: &[TestField]) -> Result<Vec<f64>> {
    let snaps = &traj.snapshots;
    if snaps.len() < 2 {
        return Err(RelaxError::IncompleteTrajectory("need at least two snapshots".into()));
    }
    let grid = snaps[0].b.grid();
    let area = grid.cell_area();
    let mut out = Vec::with_capacity(fields.len());
    for f in fields {
        let sp = sample(grid, f);
        // time-independent spatial pairings per snapshot
        let pair: Vec<(f64, f64)> = snaps
            .iter()
            .map(|s| {
                let (b1, b2) = (s.b.comp(0).values(), s.b.comp(1).values());
                let (v1, v2) = (s.v.comp(0).values(), s.v.comp(1).values());
                let bphi = pairwise_sum_by(grid.len(), |i| b1[i] * sp.phi[0][i] + b2[i] * sp.phi[1][i]) * area;
                // M_ij = B_i v_j − v_i B_j; only the off-diagonal survives
                let flux = pairwise_sum_by(grid.len(), |i| {
                    let m12 = b1[i] * v2[i] - v1[i] * b2[i];
                    m12 * (sp.grad[0][1][i] - sp.grad[1][0][i])
                }) * area;
                (bphi, flux)
            })
            .collect();
        let integrand = |k: usize| {
            let (g, dg) = f.time_factor(snaps[k].time);
            pair[k].0 * dg + pair[k].1 * g
        };
        let mut bulk = 0.0;
        for k in 0..snaps.len() - 1 {
            bulk += 0.5 * (snaps[k + 1].time - snaps[k].time) * (integrand(k) + integrand(k + 1));
        }
        let last = snaps.len() - 1;
        let boundary = f.time_factor(snaps[last].time).0 * pair[last].0 - f.time_factor(snaps[0].time).0 * pair[0].0;
        out.push((boundary - bulk).abs());
    }
    Ok(out)
}

type Tensor2 = [[ScalarField; 2]; 2];

/// One time sample of a smooth comparison pair `(β, ω)`. Derivatives are
/// optional so that sampled data can be represented; the gap needs them.
#[derive(Clone, Debug)]
pub struct PairSample {
    pub time: f64,
    pub beta: VecField,
    pub omega: VecField,
    pub beta_t: Option<VecField>,
    /// `grad_beta[i][j] = ∂_j β_i`.
    pub grad_beta: Option<Tensor2>,
    pub grad_omega: Option<Tensor2>,
}

/// A smooth pair with bounds on the Lipschitz constants of `∇β` and `∇ω`.
#[derive(Clone, Debug)]
pub struct SmoothPair {
    pub samples: Vec<PairSample>,
    pub lip_grad_beta: f64,
    pub lip_grad_omega: f64,
}

/// Analytic description of a smooth pair.
pub trait AnalyticPair {
    fn beta(&self, t: f64, x: [f64; 2]) -> [f64; 2];
    fn beta_t(&self, t: f64, x: [f64; 2]) -> [f64; 2];
    fn grad_beta(&self, t: f64, x: [f64; 2]) -> [[f64; 2]; 2];
    fn omega(&self, t: f64, x: [f64; 2]) -> [f64; 2];
    fn grad_omega(&self, t: f64, x: [f64; 2]) -> [[f64; 2]; 2];
    fn lip_grad_beta(&self) -> f64;
    fn lip_grad_omega(&self) -> f64;
}

fn tensor_from_fn(grid: Grid2, f: impl Fn(f64, f64) -> [[f64; 2]; 2]) -> Tensor2 {
    let vals: Vec<[[f64; 2]; 2]> = (0..grid.len())
        .map(|i| {
            let (x1, x2) = grid.coords(i);
            f(x1, x2)
        })
        .collect();
    let comp = |i: usize, j: usize| {
        ScalarField::from_values(grid, vals.iter().map(|m| m[i][j]).collect()).expect("grid-sized")
    };
    [[comp(0, 0), comp(0, 1)], [comp(1, 0), comp(1, 1)]]
}

impl SmoothPair {
    pub fn sample(pair: &impl AnalyticPair, grid: Grid2, times: &[f64]) -> Self {
        let samples = times
            .iter()
            .map(|&t| PairSample {
                time: t,
                beta: VecField::from_fn(grid, |a, b| pair.beta(t, [a, b])),
                omega: VecField::from_fn(grid, |a, b| pair.omega(t, [a, b])),
                beta_t: Some(VecField::from_fn(grid, |a, b| pair.beta_t(t, [a, b]))),
                grad_beta: Some(tensor_from_fn(grid, |a, b| pair.grad_beta(t, [a, b]))),
                grad_omega: Some(tensor_from_fn(grid, |a, b| pair.grad_omega(t, [a, b]))),
            })
            .collect();
        Self {
            samples,
            lip_grad_beta: pair.lip_grad_beta(),
            lip_grad_omega: pair.lip_grad_omega(),
        }
    }

    /// Sampled at the snapshot times of a trajectory.
    pub fn sample_on(pair: &impl AnalyticPair, traj: &Trajectory) -> Result<Self> {
        let grid = traj
            .snapshots
            .first()
            .ok_or_else(|| RelaxError::IncompleteTrajectory("no snapshots".into()))?
            .b
            .grid();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.time).collect();
        Ok(Self::sample(pair, grid, &times))
    }

    /// Surrogate Gronwall rate `C = 2 Lip(∇ω) + 2 Lip(∇β) + 1`.
    pub fn gronwall_rate(&self) -> f64 {
        2.0 * self.lip_grad_omega + 2.0 * self.lip_grad_beta + 1.0
    }

    /// Relabels every sample time by `+ shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.time += shift;
        }
        out
    }
}

/// `β = (c sin 2πx2, 0)`, `ω = 0`: a stationary solution.
#[derive(Clone, Copy, Debug)]
pub struct ShearPair {
    pub amplitude: f64,
}

impl AnalyticPair for ShearPair {
    fn beta(&self, _t: f64, x: [f64; 2]) -> [f64; 2] {
        [self.amplitude * (2.0 * PI * x[1]).sin(), 0.0]
    }
    fn beta_t(&self, _t: f64, _x: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn grad_beta(&self, _t: f64, x: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0, 2.0 * PI * self.amplitude * (2.0 * PI * x[1]).cos()], [0.0, 0.0]]
    }
    fn omega(&self, _t: f64, _x: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn grad_omega(&self, _t: f64, _x: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
    fn lip_grad_beta(&self) -> f64 {
        4.0 * PI * PI * self.amplitude.abs()
    }
    fn lip_grad_omega(&self) -> f64 {
        0.0
    }
}

/// `β = c(1 + ½ sin 2πft) ∇⊥(cos 2πx1 cos 2πx2)/(2π)`, `ω = 0`. Not a
/// solution unless `f = 0`.
#[derive(Clone, Copy, Debug)]
pub struct ModulatedCellPair {
    pub amplitude: f64,
    pub freq: f64,
}

impl ModulatedCellPair {
    fn g(&self, t: f64) -> (f64, f64) {
        let w = 2.0 * PI * self.freq;
        (self.amplitude * (1.0 + 0.5 * (w * t).sin()), self.amplitude * 0.5 * w * (w * t).cos())
    }

    fn shape(x: [f64; 2]) -> [f64; 2] {
        let (s1, c1) = (2.0 * PI * x[0]).sin_cos();
        let (s2, c2) = (2.0 * PI * x[1]).sin_cos();
        [-c1 * s2, s1 * c2]
    }
}

impl AnalyticPair for ModulatedCellPair {
    fn beta(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let g = self.g(t).0;
        Self::shape(x).map(|c| g * c)
    }
    fn beta_t(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let dg = self.g(t).1;
        Self::shape(x).map(|c| dg * c)
    }
    fn grad_beta(&self, t: f64, x: [f64; 2]) -> [[f64; 2]; 2] {
        let g = 2.0 * PI * self.g(t).0;
        let (s1, c1) = (2.0 * PI * x[0]).sin_cos();
        let (s2, c2) = (2.0 * PI * x[1]).sin_cos();
        [[g * s1 * s2, -g * c1 * c2], [g * c1 * c2, -g * s1 * s2]]
    }
    fn omega(&self, _t: f64, _x: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn grad_omega(&self, _t: f64, _x: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
    fn lip_grad_beta(&self) -> f64 {
        // second derivatives are bounded by 4π² max|g| per entry
        8.0 * PI * PI * 1.5 * self.amplitude.abs()
    }
    fn lip_grad_omega(&self) -> f64 {
        0.0
    }
}

/// Both sides of the weak-strong inequality at each snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Gronwall rate used (`2 Lip(∇ω) + 2 Lip(∇β) + 1`).
    pub c: f64,
    pub per_time: Vec<CheckpointResidual>,
    /// `J^L` at each snapshot.
    pub j_l: Vec<f64>,
}

impl GapReport {
    pub fn gaps(&self) -> Vec<f64> {
        self.per_time.iter().map(|c| c.residual).collect()
    }

    pub fn worst(&self) -> f64 {
        self.per_time.iter().map(|c| c.residual).fold(f64::INFINITY, f64::min)
    }
}

fn l2(a: &[f64], b: &[f64], area: f64) -> f64 {
    pairwise_sum_by(a.len(), |i| a[i] * b[i]) * area
}

/// `RHS − LHS` of
///
/// ```text
/// ||B_t − β_t||² + ∫_0^t e^{(t−s)C} ½||v_s − ω_s||² ds ≤ ||B_0 − β_0||² e^{tC} + ∫_0^t e^{(t−s)C} J_s ds
/// J = −2((B − β, ∂tβ + (ω·∇)β − (β·∇)ω)) + 2((v − ω, (β·∇)β − ω))
/// ```
///
/// at each snapshot; the pair must be sampled at the snapshot times.
pub fn weak_strong_gap(traj: &Trajectory, pair: &SmoothPair) -> Result<GapReport> {
    let snaps = &traj.snapshots;
    if snaps.is_empty() {
        return Err(RelaxError::IncompleteTrajectory("no snapshots".into()));
    }
    if pair.samples.len() != snaps.len() {
        return Err(RelaxError::InvalidArgument(format!(
            "pair has {} samples for {} snapshots",
            pair.samples.len(),
            snaps.len()
        )));
    }
    let grid = snaps[0].b.grid();
    let area = grid.cell_area();
    let n = grid.len();
    let mut d2 = Vec::with_capacity(n);
    let mut dv = Vec::with_capacity(n);
    let mut jl = Vec::with_capacity(n);
    for (s, p) in snaps.iter().zip(&pair.samples) {
        if (s.time - p.time).abs() > TIME_MATCH {
            return Err(RelaxError::InvalidArgument(format!(
                "pair sample at t = {} does not match snapshot t = {}",
                p.time, s.time
            )));
        }
        if p.beta.grid() != grid || p.omega.grid() != grid {
            return Err(RelaxError::InvalidArgument("pair lives on a different grid".into()));
        }
        let (Some(bt), Some(gb), Some(go)) = (&p.beta_t, &p.grad_beta, &p.grad_omega) else {
            return Err(RelaxError::MissingDerivatives(format!("pair sample at t = {}", p.time)));
        };
        let db = s.b.sub(&p.beta);
        let dvel = s.v.sub(&p.omega);
        d2.push(db.norm_sq());
        dv.push(0.5 * dvel.norm_sq());

        let beta = [p.beta.comp(0).values(), p.beta.comp(1).values()];
        let omega = [p.omega.comp(0).values(), p.omega.comp(1).values()];
        let g = |t: &Tensor2, i: usize, j: usize, k: usize| t[i][j].values()[k];
        let mut transport = [vec![0.0; n], vec![0.0; n]];
        let mut force = [vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            for i in 0..2 {
                let mut tr = bt.comp(i).values()[k];
                let mut fo = -omega[i][k];
                for j in 0..2 {
                    tr += omega[j][k] * g(gb, i, j, k) - beta[j][k] * g(go, i, j, k);
                    fo += beta[j][k] * g(gb, i, j, k);
                }
                transport[i][k] = tr;
                force[i][k] = fo;
            }
        }
        let j = -2.0 * (l2(db.comp(0).values(), &transport[0], area) + l2(db.comp(1).values(), &transport[1], area))
            + 2.0 * (l2(dvel.comp(0).values(), &force[0], area) + l2(dvel.comp(1).values(), &force[1], area));
        jl.push(j);
    }

    let c = pair.gronwall_rate();
    let mut per_time = Vec::with_capacity(snaps.len());
    // running integrals ∫_0^{t_i} e^{(t_i − s)C} f ds
    let (mut iv, mut ij) = (0.0, 0.0);
    for i in 0..snaps.len() {
        if i > 0 {
            let h = snaps[i].time - snaps[i - 1].time;
            let decay = (c * h).exp();
            iv = iv * decay + exp_weighted_trapezoid(dv[i - 1], dv[i], h, c);
            ij = ij * decay + exp_weighted_trapezoid(jl[i - 1], jl[i], h, c);
        }
        let t = snaps[i].time - snaps[0].time;
        let lhs = d2[i] + iv;
        let rhs = d2[0] * (c * t).exp() + ij;
        per_time.push(CheckpointResidual {
            t: snaps[i].time,
            lhs,
            rhs,
            residual: rhs - lhs,
        });
    }
    Ok(GapReport { c, per_time, j_l: jl })
}

/// `e0 e^{Ct}`, the admissible envelope of `||B − β||²(t)`.
pub fn gronwall_envelope(e0: f64, c: f64, t: f64) -> Result<f64> {
    for (name, v) in [("e0", e0), ("C", c), ("t", t)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(RelaxError::InvalidArgument(format!("{name} = {v} must be finite and nonnegative")));
        }
    }
    if e0 == 0.0 {
        return Ok(0.0);
    }
    Ok(e0 * (c * t).exp())
}
