//! Brute-force Legendre–Fenchel transforms in the first argument and the
//! Fenchel–Young defect.
//!
//! The conjugate `H(D, B) = sup_E E·D − L(E, B)` is found by scanning a
//! tensor grid around the origin, widening the box while the best point sits
//! on its boundary, then zooming in around the best point. It is slow but
//! makes no assumption beyond convexity, which is why the closed-form
//! Hamiltonians elsewhere are tested against it.

use rayon::prelude::*;

use crate::error::{RelaxError, Result};

/// A Lagrangian `L(E, B)`, convex in `E`. Values outside the domain are
/// `f64::INFINITY`.
pub trait Lagrangian: Sync {
    /// Number of components of `E` (and `D`).
    fn dim(&self) -> usize;

    fn value(&self, e: &[f64], b: &[f64]) -> f64;

    fn in_domain(&self, e: &[f64], b: &[f64]) -> bool {
        self.value(e, b).is_finite()
    }

    /// Closed-form conjugate, when one is known.
    fn hamiltonian(&self, _d: &[f64], _b: &[f64]) -> Option<f64> {
        None
    }

    /// Closed-form `∂₁H(D, B)`, when one is known.
    fn hamiltonian_grad(&self, _d: &[f64], _b: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Half-width of the first search box for the conjugate at `(d, b)`.
    fn search_radius(&self, d: &[f64], _b: &[f64]) -> f64 {
        1.0 + 2.0 * norm(d)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `|E|²/2`, independent of `B`; self-conjugate.
#[derive(Clone, Copy, Debug)]
pub struct Quadratic {
    pub dim: usize,
}

impl Lagrangian for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, e: &[f64], _b: &[f64]) -> f64 {
        0.5 * dot(e, e)
    }

    fn hamiltonian(&self, d: &[f64], _b: &[f64]) -> Option<f64> {
        Some(0.5 * dot(d, d))
    }

    fn hamiltonian_grad(&self, d: &[f64], _b: &[f64]) -> Option<Vec<f64>> {
        Some(d.to_vec())
    }
}

/// The relativistic cost `c(w) = −√(1 − |w|²)` on the closed unit ball,
/// independent of `B`. Its conjugate is `√(1 + |v|²)`.
#[derive(Clone, Copy, Debug)]
pub struct RelativisticCost {
    pub dim: usize,
}

impl Lagrangian for RelativisticCost {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, e: &[f64], _b: &[f64]) -> f64 {
        let s = 1.0 - dot(e, e);
        if s < 0.0 {
            f64::INFINITY
        } else {
            -s.sqrt()
        }
    }

    fn hamiltonian(&self, d: &[f64], _b: &[f64]) -> Option<f64> {
        Some((1.0 + dot(d, d)).sqrt())
    }

    fn hamiltonian_grad(&self, d: &[f64], _b: &[f64]) -> Option<Vec<f64>> {
        let s = (1.0 + dot(d, d)).sqrt();
        Some(d.iter().map(|x| x / s).collect())
    }

    fn search_radius(&self, _d: &[f64], _b: &[f64]) -> f64 {
        1.0
    }
}

/// A Lagrangian given by a closure, with no closed-form conjugate.
pub struct FnLagrangian<F> {
    pub dim: usize,
    pub radius: f64,
    pub f: F,
}

impl<F: Fn(&[f64], &[f64]) -> f64 + Sync> Lagrangian for FnLagrangian<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, e: &[f64], b: &[f64]) -> f64 {
        (self.f)(e, b)
    }

    fn search_radius(&self, d: &[f64], _b: &[f64]) -> f64 {
        self.radius.max(1.0 + 2.0 * norm(d))
    }
}

/// Brute-force search settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchGrid {
    /// Points per axis in every scan.
    pub points: usize,
    /// First half-width; `None` asks the Lagrangian.
    pub radius: Option<f64>,
    /// Doublings of the box allowed while the maximiser is on its boundary.
    pub max_expansions: usize,
    /// Zoom passes after the first scan, each shrinking the spacing 10×.
    pub refinements: usize,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            points: 101,
            radius: None,
            max_expansions: 3,
            refinements: 2,
        }
    }
}

/// Supremum found by [`conjugate`] and where it was attained.
#[derive(Clone, Debug, PartialEq)]
pub struct Conjugate {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Half-width of the coarse box that contained the maximiser.
    pub radius: f64,
}

struct Scan {
    value: f64,
    index: Vec<usize>,
    point: Vec<f64>,
}

/// Maximises `E·D − L(E, B)` over the tensor grid `center ± half` with
/// `points` nodes per axis.
fn scan(l: &dyn Lagrangian, d: &[f64], b: &[f64], center: &[f64], half: f64, points: usize) -> Option<Scan> {
    let dim = center.len();
    let h = 2.0 * half / (points - 1) as f64;
    let total = points.pow(dim as u32);
    let best = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut e = [0.0; 8];
            let mut rest = flat;
            for a in (0..dim).rev() {
                e[a] = center[a] - half + h * (rest % points) as f64;
                rest /= points;
            }
            let lv = l.value(&e[..dim], b);
            let v = if lv.is_finite() { dot(&e[..dim], d) - lv } else { f64::NEG_INFINITY };
            (v, flat)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x },
        );
    if !best.0.is_finite() {
        return None;
    }
    let mut index = vec![0; dim];
    let mut rest = best.1;
    for a in (0..dim).rev() {
        index[a] = rest % points;
        rest /= points;
    }
    let point = (0..dim).map(|a| center[a] - half + h * index[a] as f64).collect();
    Some(Scan { value: best.0, index, point })
}

fn on_boundary(s: &Scan, points: usize) -> bool {
    s.index.iter().any(|&i| i == 0 || i == points - 1)
}

/// `sup_E E·D − L(E, B)` by grid search, with its maximiser.
pub fn conjugate(l: &dyn Lagrangian, d: &[f64], b: &[f64], grid: &SearchGrid) -> Result<Conjugate> {
    let dim = l.dim();
    if d.len() != dim || dim == 0 || dim > 8 {
        return Err(RelaxError::InvalidArgument(format!(
            "D has {} components, the Lagrangian expects {dim}",
            d.len()
        )));
    }
    if grid.points < 5 {
        return Err(RelaxError::InvalidArgument("search grid needs at least 5 points per axis".into()));
    }
    crate::error::ensure_finite(d, "legendre transform D")?;
    crate::error::ensure_finite(b, "legendre transform B")?;
    let origin = vec![0.0; dim];
    let mut half = grid.radius.unwrap_or_else(|| l.search_radius(d, b));
    let mut expansions = 0;
    let mut best = loop {
        let s = scan(l, d, b, &origin, half, grid.points).ok_or_else(|| {
            RelaxError::DomainViolation(format!("no point of the search box (half-width {half}) lies in the domain"))
        })?;
        if !on_boundary(&s, grid.points) {
            break s;
        }
        if expansions == grid.max_expansions {
            return Err(RelaxError::UnboundedTransform { expansions });
        }
        expansions += 1;
        half *= 2.0;
    };
    let radius = half;
    let mut h = 2.0 * half / (grid.points - 1) as f64;
    for _ in 0..grid.refinements {
        let zoom = 0.05 * (grid.points - 1) as f64 * h;
        let mut center = best.point.clone();
        // the maximiser of a concave function can sit just outside the
        // zoom box when the level sets are elongated; follow it
        for _ in 0..8 {
            let Some(s) = scan(l, d, b, &center, zoom, grid.points) else { break };
            let moved = on_boundary(&s, grid.points) && s.value > best.value;
            if s.value >= best.value {
                best = s;
            }
            if !moved {
                break;
            }
            center = best.point.clone();
        }
        h = 2.0 * zoom / (grid.points - 1) as f64;
    }
    Ok(Conjugate {
        value: best.value,
        argmax: best.point,
        radius,
    })
}

/// `H(D, B) = sup_E E·D − L(E, B)` by grid search.
pub fn legendre_transform(l: &dyn Lagrangian, d: &[f64], b: &[f64], grid: &SearchGrid) -> Result<f64> {
    conjugate(l, d, b, grid).map(|c| c.value)
}

/// The brute-force conjugate of a Lagrangian, itself usable as a
/// Lagrangian (for biconjugation).
pub struct NumericConjugate<'a> {
    pub inner: &'a dyn Lagrangian,
    pub grid: SearchGrid,
    pub radius: f64,
}

impl Lagrangian for NumericConjugate<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, d: &[f64], b: &[f64]) -> f64 {
        legendre_transform(self.inner, d, b, &self.grid).unwrap_or(f64::INFINITY)
    }

    fn search_radius(&self, _d: &[f64], _b: &[f64]) -> f64 {
        self.radius
    }
}

fn defect_parts(l: &dyn Lagrangian, b: &[f64], e: &[f64], d: &[f64], h: f64) -> Result<f64> {
    if e.len() != l.dim() || d.len() != l.dim() {
        return Err(RelaxError::InvalidArgument("E and D must match the Lagrangian dimension".into()));
    }
    let lv = l.value(e, b);
    if !lv.is_finite() {
        return Err(RelaxError::DomainViolation(format!("E = {e:?} lies outside the domain of L(·, B)")));
    }
    Ok(lv + h - dot(e, d))
}

/// `L(E, B) + H(D, B) − E·D`, using the closed-form `H` when available.
pub fn defect(l: &dyn Lagrangian, b: &[f64], e: &[f64], d: &[f64]) -> Result<f64> {
    let h = match l.hamiltonian(d, b) {
        Some(h) => h,
        None => legendre_transform(l, d, b, &SearchGrid::default())?,
    };
    defect_parts(l, b, e, d, h)
}

/// [`defect`] with `H` always computed by grid search.
pub fn defect_numeric(l: &dyn Lagrangian, b: &[f64], e: &[f64], d: &[f64], grid: &SearchGrid) -> Result<f64> {
    let h = legendre_transform(l, d, b, grid)?;
    defect_parts(l, b, e, d, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_self_conjugate() {
        let l = Quadratic { dim: 2 };
        for d in [[0.0, 0.0], [0.3, -1.2], [2.5, 0.7]] {
            let h = legendre_transform(&l, &d, &[], &SearchGrid::default()).unwrap();
            assert!((h - 0.5 * dot(&d, &d)).abs() < 1e-6, "{d:?}: {h}");
        }
    }

    #[test]
    fn boundary_maximiser_triggers_expansion() {
        let l = Quadratic { dim: 1 };
        let grid = SearchGrid { radius: Some(0.5), ..SearchGrid::default() };
        let c = conjugate(&l, &[3.0], &[], &grid).unwrap();
        assert_eq!(c.radius, 4.0);
        assert!((c.value - 4.5).abs() < 1e-6);
    }

    #[test]
    fn linear_lagrangian_is_unbounded() {
        let l = FnLagrangian { dim: 1, radius: 1.0, f: |e: &[f64], _: &[f64]| -e[0] };
        assert!(matches!(
            legendre_transform(&l, &[1.0], &[], &SearchGrid::default()),
            Err(RelaxError::UnboundedTransform { expansions: 3 })
        ));
    }

    #[test]
    fn relativistic_conjugate() {
        let l = RelativisticCost { dim: 2 };
        for v in [[0.0, 0.0], [1.0, -2.0], [3.0, 0.0], [-2.1, 2.1]] {
            let h = legendre_transform(&l, &v, &[], &SearchGrid::default()).unwrap();
            let exact = (1.0 + dot(&v, &v)).sqrt();
            assert!((h - exact).abs() <= 1e-3 * exact);
        }
    }

    #[test]
    fn defect_vanishes_on_the_dual_pairing() {
        let l = Quadratic { dim: 3 };
        let d = [0.2, -0.4, 1.0];
        assert!(defect(&l, &[], &d, &d).unwrap().abs() < 1e-15);
        assert!(defect(&l, &[], &[0.0, 0.0, 0.0], &d).unwrap() > 0.5);
        let r = RelativisticCost { dim: 1 };
        assert!(matches!(defect(&r, &[], &[1.5], &[0.0]), Err(RelaxError::DomainViolation(_))));
    }
}
