//! Field snapshots: raw little-endian `f64` samples (row-major, components
//! concatenated) plus a JSON sidecar describing the layout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grid3::{Grid3, ScalarField3, VecField3};
use super::{Grid2, ScalarField, VecField};
use crate::error::{RelaxError, Result};

pub const SCHEMA: &str = "relaxlab-field-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub schema: String,
    pub n: Vec<usize>,
    pub components: usize,
    pub time: f64,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub meta: SnapshotMeta,
    pub components: Vec<Vec<f64>>,
}

fn paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("bin"), base.with_extension("json"))
}

/// Writes `<base>.bin` and `<base>.json`.
pub fn write_snapshot(base: &Path, name: &str, time: f64, n: &[usize], comps: &[&[f64]]) -> Result<()> {
    let len: usize = n.iter().product();
    if comps.iter().any(|c| c.len() != len) {
        return Err(RelaxError::InvalidArgument(format!(
            "snapshot components must have {len} samples"
        )));
    }
    let (bin, json) = paths(base);
    if let Some(dir) = base.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut bytes = Vec::with_capacity(8 * len * comps.len());
    for c in comps {
        for v in c.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(bin, bytes)?;
    let meta = SnapshotMeta {
        schema: SCHEMA.into(),
        n: n.to_vec(),
        components: comps.len(),
        time,
        name: name.into(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| RelaxError::Format(e.to_string()))?;
    fs::write(json, text)?;
    Ok(())
}

pub fn read_snapshot(base: &Path) -> Result<Snapshot> {
    let (bin, json) = paths(base);
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(&json)?)
        .map_err(|e| RelaxError::Format(format!("{}: {e}", json.display())))?;
    if meta.schema != SCHEMA {
        return Err(RelaxError::Format(format!("unknown snapshot schema {:?}", meta.schema)));
    }
    let bytes = fs::read(&bin)?;
    let len: usize = meta.n.iter().product();
    if bytes.len() != 8 * len * meta.components {
        return Err(RelaxError::Format(format!(
            "{} holds {} bytes, expected {}",
            bin.display(),
            bytes.len(),
            8 * len * meta.components
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let components = values.chunks(len.max(1)).map(|c| c.to_vec()).collect();
    Ok(Snapshot { meta, components })
}

pub fn save_scalar(base: &Path, name: &str, time: f64, f: &ScalarField) -> Result<()> {
    let g = f.grid();
    write_snapshot(base, name, time, &[g.n1(), g.n2()], &[f.values()])
}

pub fn save_vec(base: &Path, name: &str, time: f64, v: &VecField) -> Result<()> {
    let g = v.grid();
    write_snapshot(base, name, time, &[g.n1(), g.n2()], &[v.comp(0).values(), v.comp(1).values()])
}

pub fn save_vec3(base: &Path, name: &str, time: f64, v: &VecField3) -> Result<()> {
    let g = v.grid();
    let c = v.comps();
    write_snapshot(base, name, time, &g.dims(), &[c[0].values(), c[1].values(), c[2].values()])
}

impl Snapshot {
    fn grid2(&self) -> Result<Grid2> {
        match self.meta.n.as_slice() {
            [n1, n2] => Grid2::new(*n1, *n2),
            other => Err(RelaxError::Format(format!("expected a 2D snapshot, got dims {other:?}"))),
        }
    }

    pub fn to_scalar(&self) -> Result<ScalarField> {
        if self.meta.components != 1 {
            return Err(RelaxError::Format("expected one component".into()));
        }
        ScalarField::from_values(self.grid2()?, self.components[0].clone())
    }

    pub fn to_vec(&self) -> Result<VecField> {
        let g = self.grid2()?;
        if self.meta.components != 2 {
            return Err(RelaxError::Format("expected two components".into()));
        }
        VecField::new(
            ScalarField::from_values(g, self.components[0].clone())?,
            ScalarField::from_values(g, self.components[1].clone())?,
        )
    }

    pub fn to_vec3(&self) -> Result<VecField3> {
        let g = match self.meta.n.as_slice() {
            [a, b, c] => Grid3::new(*a, *b, *c)?,
            other => return Err(RelaxError::Format(format!("expected a 3D snapshot, got dims {other:?}"))),
        };
        if self.meta.components != 3 {
            return Err(RelaxError::Format("expected three components".into()));
        }
        let comps = [0, 1, 2].map(|i| ScalarField3::from_values(g, self.components[i].clone()));
        let [a, b, c] = comps;
        VecField3::new([a?, b?, c?])
    }
}
