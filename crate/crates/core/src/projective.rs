//! Real projective space `P^{d-1}`: points, the chordal metric, the
//! projectivised cocycle action, and set distances used by attraction tests.

use nalgebra::DVector;

use crate::base::OmegaPoint;
use crate::cocycle::{evolve_vector_log, CocycleSystem};
use crate::error::{Result, SpectraError};

pub const ZERO_VECTOR_TOL: f64 = 1e-12;

/// A point of `P^{d-1}`: a unit vector whose first coordinate above the
/// zero tolerance is positive, so equal classes have equal representatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjPoint {
    rep: DVector<f64>,
}

impl ProjPoint {
    pub fn rep(&self) -> &DVector<f64> {
        &self.rep
    }

    pub fn dim(&self) -> usize {
        self.rep.len()
    }
}

/// Class of a nonzero vector.
pub fn proj_point(x: &DVector<f64>) -> Result<ProjPoint> {
    let n = x.norm();
    if !(n > ZERO_VECTOR_TOL) {
        return Err(SpectraError::ZeroVector { norm: n });
    }
    let mut rep = x / n;
    if let Some(i) = rep.iter().position(|&c| c.abs() > ZERO_VECTOR_TOL) {
        if rep[i] < 0.0 {
            rep = -rep;
        }
    }
    Ok(ProjPoint { rep })
}

/// Chordal metric `min(|u - v|, |u + v|)`; takes values in `[0, sqrt(2)]`.
pub fn proj_metric(p: &ProjPoint, q: &ProjPoint) -> f64 {
    let diff = (&p.rep - &q.rep).norm();
    let sum = (&p.rep + &q.rep).norm();
    diff.min(sum)
}

/// Image of a projective point under the cocycle at time `t`.
pub fn proj_apply(
    system: &CocycleSystem,
    omega: &OmegaPoint,
    t: i64,
    p: &ProjPoint,
) -> Result<ProjPoint> {
    let (dir, _log_norm) = evolve_vector_log(system, omega, t, &p.rep)?;
    proj_point(&dir)
}

/// Finite point cloud standing in for a compact subset of `P^{d-1}`.
#[derive(Debug, Clone, Default)]
pub struct ProjPointSet {
    pub points: Vec<ProjPoint>,
}

impl ProjPointSet {
    pub fn new(points: Vec<ProjPoint>) -> Self {
        ProjPointSet { points }
    }

    pub fn empty() -> Self {
        ProjPointSet { points: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Hausdorff semi-distance `sup_{a in A} min_{b in B} d(a, b)`, with the
/// conventions `dist(empty, B) = 0` and `dist(A, empty) = +inf` for A
/// nonempty.
pub fn hausdorff_semidist(a: &ProjPointSet, b: &ProjPointSet) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if b.is_empty() {
        return f64::INFINITY;
    }
    a.points
        .iter()
        .map(|pa| {
            b.points
                .iter()
                .map(|pb| proj_metric(pa, pb))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Minimal pairwise distance; 0 when either set is empty.
pub fn set_min_dist(a: &ProjPointSet, b: &ProjPointSet) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for pa in &a.points {
        for pb in &b.points {
            best = best.min(proj_metric(pa, pb));
        }
    }
    best
}
