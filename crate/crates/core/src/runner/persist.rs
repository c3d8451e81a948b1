//! On-disk layout of an MHD trajectory:
//!
//! ```text
//! <dir>/params.json
//! <dir>/ledger.csv
//! <dir>/snapshots/B_00000.{bin,json}   (and v_, A_ with the same index)
//! ```

use std::fs;
use std::path::Path;

use crate::error::{RelaxError, Result};
use crate::fields::snapshot::{read_snapshot, save_scalar, save_vec};
use crate::mhd::{Ledger, MhdState, MreParams, Trajectory};

fn fmt_err(path: &Path, e: impl std::fmt::Display) -> RelaxError {
    RelaxError::Format(format!("{}: {e}", path.display()))
}

pub fn save_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps)?;
    let params = serde_json::to_string_pretty(&traj.params).map_err(|e| fmt_err(dir, e))?;
    fs::write(dir.join("params.json"), params)?;
    traj.ledger.write_csv(fs::File::create(dir.join("ledger.csv"))?)?;
    for (k, s) in traj.snapshots.iter().enumerate() {
        save_vec(&snaps.join(format!("B_{k:05}")), "B", s.time, &s.b)?;
        save_vec(&snaps.join(format!("v_{k:05}")), "v", s.time, &s.v)?;
        if let Some(a) = &s.a {
            save_scalar(&snaps.join(format!("A_{k:05}")), "A", s.time, a)?;
        }
    }
    Ok(())
}

pub fn load_trajectory(dir: &Path) -> Result<Trajectory> {
    let pfile = dir.join("params.json");
    let params: MreParams =
        serde_json::from_str(&fs::read_to_string(&pfile)?).map_err(|e| fmt_err(&pfile, e))?;
    let ledger = Ledger::read_csv(fs::File::open(dir.join("ledger.csv"))?)?;
    let snaps = dir.join("snapshots");
    let mut snapshots = Vec::new();
    for k in 0.. {
        let base = snaps.join(format!("B_{k:05}"));
        if !base.with_extension("json").exists() {
            break;
        }
        let b = read_snapshot(&base)?;
        let v = read_snapshot(&snaps.join(format!("v_{k:05}")))?;
        let a_base = snaps.join(format!("A_{k:05}"));
        let a = if a_base.with_extension("json").exists() {
            Some(read_snapshot(&a_base)?.to_scalar()?)
        } else {
            None
        };
        snapshots.push(MhdState {
            time: b.meta.time,
            b: b.to_vec()?,
            v: v.to_vec()?,
            a,
        });
    }
    if snapshots.is_empty() {
        return Err(RelaxError::IncompleteTrajectory(format!("no snapshots under {}", snaps.display())));
    }
    Ok(Trajectory { params, ledger, snapshots })
}
