//! Conservative finite-volume steps for `∂tρ = ∇·(ρ ∇c*(∇θ'(ρ)))` on a
//! periodic 2D grid.
//!
//! Cell `(i, j)` sits at the grid node. The flux `q = −ρ ∇c*(∇θ'(ρ))` lives on
//! faces: `q1[i, j]` on the face between cells `(i, j)` and `(i + 1, j)`,
//! `q2[i, j]` between `(i, j)` and `(i, j + 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, RelaxError, Result};
use crate::fields::{Grid2, ScalarField};
use crate::numerics::pairwise_sum;

/// Densities below this are treated as a loss of positivity.
pub const RHO_MIN: f64 = 1e-12;
/// For costs with a speed limit, the face density is taken upwind once
/// `|∇c*|` exceeds this fraction of the limit.
pub const UPWIND_SPEED: f64 = 0.9;
pub const MAX_REJECTIONS: usize = 20;

/// Convex mobility cost `c` with its conjugate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cost {
    /// `c(w) = |w|²/2`.
    Quadratic,
    /// `c(w) = −√(1 − |w|²)`, `c*(v) = √(1 + |v|²)`.
    Relativistic,
}

impl Cost {
    pub fn c(&self, w: &[f64]) -> f64 {
        let w2: f64 = w.iter().map(|x| x * x).sum();
        match self {
            Cost::Quadratic => 0.5 * w2,
            Cost::Relativistic if w2 > 1.0 => f64::INFINITY,
            Cost::Relativistic => -(1.0 - w2).sqrt(),
        }
    }

    pub fn c_star(&self, v: &[f64]) -> f64 {
        let v2: f64 = v.iter().map(|x| x * x).sum();
        match self {
            Cost::Quadratic => 0.5 * v2,
            Cost::Relativistic => (1.0 + v2).sqrt(),
        }
    }

    pub fn grad_c_star(&self, v: [f64; 2]) -> [f64; 2] {
        match self {
            Cost::Quadratic => v,
            Cost::Relativistic => {
                let s = (1.0 + v[0] * v[0] + v[1] * v[1]).sqrt();
                [v[0] / s, v[1] / s]
            }
        }
    }

    /// Supremum of `|∇c*|`, if finite.
    pub fn speed_limit(&self) -> Option<f64> {
        match self {
            Cost::Quadratic => None,
            Cost::Relativistic => Some(1.0),
        }
    }

    /// Bound on the eigenvalues of `∇²c*`.
    pub fn curvature_bound(&self) -> f64 {
        1.0
    }
}

/// Scalar entropy `θ(ρ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarEntropy {
    /// `ρ log ρ`.
    RhoLogRho,
    /// `ρ²/2`.
    Quadratic,
}

impl ScalarEntropy {
    pub fn theta(&self, rho: f64) -> f64 {
        match self {
            ScalarEntropy::RhoLogRho => rho * rho.ln(),
            ScalarEntropy::Quadratic => 0.5 * rho * rho,
        }
    }

    pub fn theta_prime(&self, rho: f64) -> f64 {
        match self {
            ScalarEntropy::RhoLogRho => rho.ln() + 1.0,
            ScalarEntropy::Quadratic => rho,
        }
    }

    /// `sup ρθ''(ρ)` over densities up to `rho_max`: the largest effective
    /// diffusivity for a unit-curvature cost.
    pub fn mobility_bound(&self, rho_max: f64) -> f64 {
        match self {
            ScalarEntropy::RhoLogRho => 1.0,
            ScalarEntropy::Quadratic => rho_max,
        }
    }
}

/// Face fluxes on the staggered grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceFlux {
    pub q1: ScalarField,
    pub q2: ScalarField,
}

impl FaceFlux {
    pub fn zeros(grid: Grid2) -> Self {
        Self {
            q1: ScalarField::zeros(grid),
            q2: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> Grid2 {
        self.q1.grid()
    }

    /// Finite-volume divergence at the cells.
    pub fn divergence(&self) -> ScalarField {
        let g = self.grid();
        let (n1, n2) = (g.n1(), g.n2());
        let (q1, q2) = (self.q1.values(), self.q2.values());
        let vals = (0..g.len())
            .map(|idx| {
                let (i, j) = (idx / n2, idx % n2);
                let im = g.index((i + n1 - 1) % n1, j);
                let jm = g.index(i, (j + n2 - 1) % n2);
                (q1[idx] - q1[im]) / g.h1() + (q2[idx] - q2[jm]) / g.h2()
            })
            .collect();
        ScalarField::from_values(g, vals).expect("grid length")
    }

    fn axpy(&mut self, c: f64, other: &Self) {
        self.q1.axpy(c, &other.q1);
        self.q2.axpy(c, &other.q2);
    }

    pub fn max_abs(&self) -> f64 {
        self.q1.max_abs().max(self.q2.max_abs())
    }
}

/// Arithmetic mean of `rho` on the faces of both families.
pub fn face_means(rho: &ScalarField) -> (ScalarField, ScalarField) {
    let g = rho.grid();
    let (n1, n2) = (g.n1(), g.n2());
    let r = rho.values();
    let f1 = ScalarField::from_fn_index(g, |i, j| 0.5 * (r[g.index(i, j)] + r[g.index((i + 1) % n1, j)]));
    let f2 = ScalarField::from_fn_index(g, |i, j| 0.5 * (r[g.index(i, j)] + r[g.index(i, (j + 1) % n2)]));
    (f1, f2)
}

/// Differences of `f` across the faces of both families, divided by the
/// spacing.
pub fn face_gradients(f: &ScalarField) -> (ScalarField, ScalarField) {
    let g = f.grid();
    let (n1, n2) = (g.n1(), g.n2());
    let v = f.values();
    let d1 = ScalarField::from_fn_index(g, |i, j| (v[g.index((i + 1) % n1, j)] - v[g.index(i, j)]) / g.h1());
    let d2 = ScalarField::from_fn_index(g, |i, j| (v[g.index(i, (j + 1) % n2)] - v[g.index(i, j)]) / g.h2());
    (d1, d2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarDiffusionProblem {
    pub entropy: ScalarEntropy,
    pub cost: Cost,
    pub rho: ScalarField,
}

impl ScalarDiffusionProblem {
    pub fn new(entropy: ScalarEntropy, cost: Cost, rho: ScalarField) -> Result<Self> {
        ensure_finite(rho.values(), "density")?;
        let min = rho.min();
        if min <= RHO_MIN {
            return Err(RelaxError::DomainViolation(format!("density must exceed {RHO_MIN:e}, min is {min:e}")));
        }
        Ok(Self { entropy, cost, rho })
    }

    /// The heat equation: `θ = ρ log ρ`, `c = |w|²/2`.
    pub fn heat(rho: ScalarField) -> Result<Self> {
        Self::new(ScalarEntropy::RhoLogRho, Cost::Quadratic, rho)
    }

    /// The relativistic heat equation: `θ = ρ log ρ`, `c = −√(1 − |w|²)`.
    pub fn relativistic(rho: ScalarField) -> Result<Self> {
        Self::new(ScalarEntropy::RhoLogRho, Cost::Relativistic, rho)
    }

    pub fn grid(&self) -> Grid2 {
        self.rho.grid()
    }

    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }

    /// `∫θ(ρ)`.
    pub fn entropy_integral(&self) -> f64 {
        entropy_integral(self.entropy, &self.rho)
    }

    /// Explicit stability bound `h²/(2·2·κ)` with `κ` the largest effective
    /// diffusivity.
    pub fn cfl_bound(&self) -> f64 {
        let g = self.grid();
        let kappa = self.entropy.mobility_bound(self.rho.max()) * self.cost.curvature_bound();
        g.h_min() * g.h_min() / (4.0 * kappa)
    }

    /// Face fluxes of the current density, and the largest `|∇c*|` and
    /// `|q|/ρ_face` met.
    pub fn flux(&self, rho: &ScalarField) -> (FaceFlux, f64, f64) {
        let g = rho.grid();
        let (n1, n2) = (g.n1(), g.n2());
        let r = rho.values();
        let tp: Vec<f64> = r.iter().map(|&x| self.entropy.theta_prime(x)).collect();
        let at = |i: usize, j: usize| tp[g.index(i % n1, j % n2)];
        let mut q1 = vec![0.0; g.len()];
        let mut q2 = vec![0.0; g.len()];
        let (mut max_speed, mut max_ratio) = (0.0f64, 0.0f64);
        let upwind = self.cost.speed_limit().map_or(f64::INFINITY, |s| UPWIND_SPEED * s);
        for i in 0..n1 {
            for j in 0..n2 {
                let idx = g.index(i, j);
                let (ip, jp) = (i + 1, j + 1);
                let (im, jm) = (i + n1 - 1, j + n2 - 1);
                // x1 face: normal difference, transverse centred average
                let gn = (at(ip, j) - at(i, j)) / g.h1();
                let gt = (at(i, jp) - at(i, jm) + at(ip, jp) - at(ip, jm)) / (4.0 * g.h2());
                let u = self.cost.grad_c_star([gn, gt]);
                let (q, s) = face_flux(u[0], u, upwind, r[idx], r[g.index(ip % n1, j)]);
                q1[idx] = q;
                max_speed = max_speed.max(s.0);
                max_ratio = max_ratio.max(s.1);
                // x2 face
                let gn = (at(i, jp) - at(i, j)) / g.h2();
                let gt = (at(ip, j) - at(im, j) + at(ip, jp) - at(im, jp)) / (4.0 * g.h1());
                let u = self.cost.grad_c_star([gt, gn]);
                let (q, s) = face_flux(u[1], u, upwind, r[idx], r[g.index(i, jp % n2)]);
                q2[idx] = q;
                max_speed = max_speed.max(s.0);
                max_ratio = max_ratio.max(s.1);
            }
        }
        let flux = FaceFlux {
            q1: ScalarField::from_values(g, q1).expect("grid length"),
            q2: ScalarField::from_values(g, q2).expect("grid length"),
        };
        (flux, max_speed, max_ratio)
    }
}

/// Flux through one face given the normal component `un` of `∇c*` and the
/// densities on the low and high side; above the `upwind` speed the
/// density is taken from the upstream cell. Returns the flux and
/// `(|∇c*|, |q|/ρ_face)`.
fn face_flux(un: f64, u: [f64; 2], upwind: f64, lo: f64, hi: f64) -> (f64, (f64, f64)) {
    let speed = (u[0] * u[0] + u[1] * u[1]).sqrt();
    // the transported velocity is −∇c*, so mass moves from high θ' to low
    let rho_f = if speed > upwind {
        if un > 0.0 {
            hi
        } else {
            lo
        }
    } else {
        0.5 * (lo + hi)
    };
    let q = -rho_f * un;
    (q, (speed, q.abs() / rho_f))
}

pub fn entropy_integral(entropy: ScalarEntropy, rho: &ScalarField) -> f64 {
    let vals: Vec<f64> = rho.values().iter().map(|&x| entropy.theta(x)).collect();
    pairwise_sum(&vals) * rho.grid().cell_area()
}

/// Result of [`scalar_diffusion_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionStep {
    pub rho: ScalarField,
    /// Time-averaged face flux: `(ρ_new − ρ)/dt + div q = 0` holds exactly
    /// up to rounding.
    pub flux: FaceFlux,
    pub substeps: usize,
    pub rejections: usize,
    /// Largest `|∇c*(∇θ')|` met, the transport speed.
    pub max_speed: f64,
    /// Largest `|q|/ρ_face` met.
    pub max_flux_ratio: f64,
}

/// One forward Euler step of size `dt`. A step that would push the density
/// below [`RHO_MIN`] is redone with twice as many substeps, at most
/// [`MAX_REJECTIONS`] times.
pub fn scalar_diffusion_step(prob: &ScalarDiffusionProblem, dt: f64) -> Result<DiffusionStep> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(RelaxError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let bound = prob.cfl_bound();
    if dt > bound {
        return Err(RelaxError::CflViolation { dt, bound });
    }
    let g = prob.grid();
    let mut rejections = 0;
    let mut min_value = f64::INFINITY;
    while rejections <= MAX_REJECTIONS {
        let substeps = 1usize << rejections;
        let h = dt / substeps as f64;
        let mut rho = prob.rho.clone();
        let mut avg = FaceFlux::zeros(g);
        let (mut max_speed, mut max_ratio) = (0.0f64, 0.0f64);
        let mut ok = true;
        for _ in 0..substeps {
            let (q, speed, ratio) = prob.flux(&rho);
            max_speed = max_speed.max(speed);
            max_ratio = max_ratio.max(ratio);
            rho.axpy(-h, &q.divergence());
            avg.axpy(1.0 / substeps as f64, &q);
            let m = rho.min();
            if !m.is_finite() {
                return Err(RelaxError::NumericFailure("non-finite density".into()));
            }
            if m < RHO_MIN {
                min_value = m;
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(DiffusionStep {
                rho,
                flux: avg,
                substeps,
                rejections,
                max_speed,
                max_flux_ratio: max_ratio,
            });
        }
        rejections += 1;
    }
    Err(RelaxError::PositivityLoss {
        rejections: MAX_REJECTIONS,
        min_value,
    })
}
