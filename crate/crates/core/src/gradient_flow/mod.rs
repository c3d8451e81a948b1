//! Gradient flows in dissipative form: convex conjugates, the Fenchel–Young
//! defect, conservative scalar diffusion (heat and relativistic heat) and the
//! dissipation inequalities their trajectories should satisfy.

pub mod diffusion;
pub mod dissipation;
pub mod legendre;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{RelaxError, Result};
use crate::fields::ScalarField;

pub use diffusion::{scalar_diffusion_step, Cost, DiffusionStep, FaceFlux, ScalarDiffusionProblem, ScalarEntropy};
pub use dissipation::{
    general_dissipation_residual, hv_residual, DissipationReport, Flux, FormTrajectory, HvReport,
    ScalarCostLagrangian, Theta, VectorEntropy,
};
pub use legendre::{
    conjugate, defect, defect_numeric, legendre_transform, Lagrangian, Quadratic, RelativisticCost, SearchGrid,
};

pub const DIFFUSION_LEDGER_HEADER: [&str; 5] = ["time", "mass", "entropy", "hv_lhs", "max_speed"];

/// One row of a diffusion run. `hv_lhs` and `max_speed` describe the step
/// ending at `time` and are zero on the first row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffusionRow {
    pub time: f64,
    pub mass: f64,
    pub entropy: f64,
    pub hv_lhs: f64,
    pub max_speed: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiffusionLedger {
    pub rows: Vec<DiffusionRow>,
}

impl DiffusionLedger {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| RelaxError::Format(e.to_string());
        wr.write_record(DIFFUSION_LEDGER_HEADER).map_err(err)?;
        for r in &self.rows {
            let vals = [r.time, r.mass, r.entropy, r.hv_lhs, r.max_speed];
            wr.write_record(vals.iter().map(|v| format!("{v:e}"))).map_err(err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Output of [`run_diffusion`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionRun {
    pub ledger: DiffusionLedger,
    /// `(time, ρ)` every `snap_every` steps, first and last included.
    pub snapshots: Vec<(f64, ScalarField)>,
    /// Largest `|q|/ρ_face` over all steps.
    pub max_flux_ratio: f64,
    /// Largest single-step change of `∫θ(ρ)` (positive means it rose).
    pub max_entropy_increase: f64,
    /// Total step rejections for positivity.
    pub rejections: usize,
}

/// Steps `prob` to `t_final`, recording the ledger and snapshots.
pub fn run_diffusion(prob: &ScalarDiffusionProblem, dt: f64, t_final: f64, snap_every: usize) -> Result<DiffusionRun> {
    if !(t_final > 0.0) || snap_every == 0 {
        return Err(RelaxError::InvalidArgument("need t_final > 0 and snap_every >= 1".into()));
    }
    let steps = (t_final / dt).round().max(1.0) as usize;
    let mut p = prob.clone();
    let mut row = DiffusionRow {
        time: 0.0,
        mass: p.mass(),
        entropy: p.entropy_integral(),
        ..Default::default()
    };
    let mut run = DiffusionRun {
        ledger: DiffusionLedger { rows: vec![row] },
        snapshots: vec![(0.0, p.rho.clone())],
        max_flux_ratio: 0.0,
        max_entropy_increase: f64::NEG_INFINITY,
        rejections: 0,
    };
    for n in 1..=steps {
        let s = scalar_diffusion_step(&p, dt)?;
        let time = n as f64 * dt;
        let hv = hv_residual(&[row.time, time], &[p.rho.clone(), s.rho.clone()], &[Flux::Faces(s.flux)])?;
        p.rho = s.rho;
        let next = DiffusionRow {
            time,
            mass: p.mass(),
            entropy: p.entropy_integral(),
            hv_lhs: hv.lhs[0],
            max_speed: s.max_speed,
        };
        run.max_entropy_increase = run.max_entropy_increase.max(next.entropy - row.entropy);
        run.max_flux_ratio = run.max_flux_ratio.max(s.max_flux_ratio);
        run.rejections += s.rejections;
        row = next;
        run.ledger.rows.push(row);
        if n % snap_every == 0 || n == steps {
            run.snapshots.push((time, p.rho.clone()));
        }
    }
    Ok(run)
}
