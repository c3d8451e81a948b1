//! Vanishing-regularisation sweep: runs along a sequence of `(ε, μ, ν)` and
//! compares the magnetic fields in a weak metric.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{mhd_step, MhdState, MreParams};
use crate::error::Result;
use crate::fields::{Grid2, VecField};

pub const DICTIONARY_SIZE: usize = 16;
pub const SAMPLE_TIMES: usize = 32;

/// `(ε, μ, ν) = 0.1·4^{−j}` for `j = 0..levels`.
pub fn default_levels(levels: usize) -> Vec<(f64, f64, f64)> {
    (0..levels)
        .map(|j| {
            let s = 0.1 * 4f64.powi(-(j as i32));
            (s, s, s)
        })
        .collect()
}

/// Sixteen divergence-free trigonometric test fields
/// `grad_perp(cos or sin(2πk·x)) / |2πk|`.
pub fn weak_dictionary(grid: Grid2) -> Vec<VecField> {
    let ks = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 0), (0, 2), (2, 1), (1, 2)];
    let mut out = Vec::with_capacity(DICTIONARY_SIZE);
    for (k1, k2) in ks {
        let (q1, q2) = (2.0 * PI * k1 as f64, 2.0 * PI * k2 as f64);
        let norm = (q1 * q1 + q2 * q2).sqrt();
        for phase in [0.0, 0.5 * PI] {
            // ψ = cos(θ + phase), grad_perp ψ = (−q2 sin, q1 sin)
            out.push(VecField::from_fn(grid, |x1, x2| {
                let s = (q1 * x1 + q2 * x2 + phase).sin();
                [-q2 * s / norm, q1 * s / norm]
            }));
        }
    }
    out
}

fn coordinates(b: &VecField, dict: &[VecField]) -> Vec<f64> {
    dict.iter().map(|phi| b.dot(phi)).collect()
}

#[derive(Clone, Debug)]
pub struct SweepRun {
    pub epsilon: f64,
    pub mu: f64,
    pub nu: f64,
    /// Dictionary coordinates of `B` at each sample time.
    pub coords: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub times: Vec<f64>,
    pub runs: Vec<SweepRun>,
    /// Weak distance between consecutive runs: max over sample times of the
    /// Euclidean distance of their dictionary coordinates.
    pub distances: Vec<f64>,
}

impl SweepReport {
    pub fn cauchy_decreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }
}

fn sample_steps(steps: usize) -> Vec<usize> {
    (0..SAMPLE_TIMES)
        .map(|i| ((i * steps) as f64 / (SAMPLE_TIMES - 1) as f64).round() as usize)
        .collect()
}

fn run_level(base: &MreParams, level: (f64, f64, f64), dict: &[VecField]) -> Result<SweepRun> {
    let p = MreParams {
        epsilon: level.0,
        mu: level.1,
        nu: level.2,
        ..base.clone()
    };
    let steps = p.steps();
    let samples = sample_steps(steps);
    let mut s = MhdState::initial(&p)?;
    let mut coords = Vec::with_capacity(SAMPLE_TIMES);
    let mut next = 0;
    for k in 0..=steps {
        while next < samples.len() && samples[next] == k {
            coords.push(coordinates(&s.b, dict));
            next += 1;
        }
        if k < steps {
            s = mhd_step(&s, &p)?;
        }
    }
    Ok(SweepRun {
        epsilon: p.epsilon,
        mu: p.mu,
        nu: p.nu,
        coords,
    })
}

/// Runs every level (concurrently) from the initial data of `base`.
pub fn run_sweep(base: &MreParams, levels: &[(f64, f64, f64)]) -> Result<SweepReport> {
    base.validate()?;
    let grid = base.grid()?;
    let dict = weak_dictionary(grid);
    let runs: Vec<SweepRun> = levels
        .par_iter()
        .map(|&l| run_level(base, l, &dict))
        .collect::<Result<_>>()?;
    let distances = runs
        .windows(2)
        .map(|w| {
            w[0].coords
                .iter()
                .zip(&w[1].coords)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
                .fold(0.0, f64::max)
        })
        .collect();
    let steps = base.steps();
    let times = sample_steps(steps).iter().map(|&k| k as f64 * base.dt).collect();
    Ok(SweepReport { times, runs, distances })
}
