//! Random subspace families, oblique invariant projectors, and the angle
//! diagnostics used by separation and dichotomy tests.
//!
//! Families are realized along a single driver orbit. Fibers that are
//! stable under forward push (fast flags) are swept forward; fibers that
//! are only stable under backward push (slow flags) are swept in reverse,
//! seeded a warmup stretch outside the needed range so the sweep has
//! converged before the first fiber is read. Either way consecutive
//! fibers are exact push-forwards of one another, which is the invariance
//! every downstream estimate relies on.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::base::{circle_position, theta_step, OmegaPoint};
use crate::cocycle::{operator_norm, temperedness_slope, CocycleSystem, OrbitWalker};
use crate::error::{Result, SpectraError};
use crate::projective::{proj_point, ProjPointSet};

pub const PINV_CUTOFF_REL: f64 = 1e-10;
pub const SPAN_TOL: f64 = 1e-10;

/// Moore-Penrose pseudoinverse via SVD with a relative cutoff.
pub fn moore_penrose(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.max();
    let cutoff = PINV_CUTOFF_REL * smax;
    let k = svd.singular_values.len();
    let mut sinv = DMatrix::zeros(k, k);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cutoff {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    vt.transpose() * sinv * u.transpose()
}

/// Ridge-regularized route to the pseudoinverse,
/// `(A A^T + (1/n) I)^{-1} A^T`; converges to `moore_penrose` as `n`
/// grows and is kept as an independent cross-check.
pub fn pseudoinverse_ridge(a: &DMatrix<f64>, n: f64) -> DMatrix<f64> {
    let d = a.nrows();
    let gram = a * a.transpose() + DMatrix::<f64>::identity(d, d) / n;
    gram.try_inverse().expect("ridge gram is positive definite") * a.transpose()
}

/// Thin orthonormal basis of the column span (columns assumed independent).
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = m.ncols();
    if k == 0 {
        return Ok(m.clone());
    }
    let qr = m.clone().qr();
    let q = qr.q();
    let r = qr.r();
    for i in 0..k {
        if r[(i, i)].abs() < SPAN_TOL {
            return Err(SpectraError::degenerate(format!(
                "basis column {i} collapsed during orthonormalization"
            )));
        }
    }
    Ok(q.columns(0, k).into_owned())
}

fn complementarity_check(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<()> {
    let d = u.nrows().max(v.nrows());
    let (ku, kv) = (u.ncols(), v.ncols());
    if ku + kv != d {
        return Err(SpectraError::degenerate(format!(
            "subspace dimensions {ku}+{kv} do not sum to the ambient dimension {d}"
        )));
    }
    if ku == 0 || kv == 0 {
        return Ok(());
    }
    let mut stacked = DMatrix::zeros(d, d);
    stacked.columns_mut(0, ku).copy_from(u);
    stacked.columns_mut(ku, kv).copy_from(v);
    let sv = stacked.svd(false, false).singular_values;
    if sv.min() <= SPAN_TOL {
        return Err(SpectraError::degenerate(format!(
            "stacked basis has smallest singular value {:e}",
            sv.min()
        )));
    }
    Ok(())
}

/// Projector with range `col(U)` and kernel `col(V)`, built as the
/// pseudoinverse of the composed orthogonal projections
/// `(P_{V^perp} P_U)^+`.
pub fn oblique_projector(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    complementarity_check(u, v)?;
    let d = u.nrows().max(v.nrows());
    if u.ncols() == 0 {
        return Ok(DMatrix::zeros(d, d));
    }
    if v.ncols() == 0 {
        return Ok(DMatrix::identity(d, d));
    }
    let uo = orthonormalize(u)?;
    let vo = orthonormalize(v)?;
    let p_u = &uo * uo.transpose();
    let p_vperp = DMatrix::identity(d, d) - &vo * vo.transpose();
    Ok(moore_penrose(&(p_vperp * p_u)))
}

/// Largest cosine between unit vectors of the two spans, and the norm
/// `1/sqrt(1 - a^2)` of the oblique projector onto the first along the
/// second. Orthogonal spans give `(0, 1)`; trivial spans likewise.
pub fn projector_norm_angle(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<(f64, f64)> {
    complementarity_check(u, v)?;
    if u.ncols() == 0 || v.ncols() == 0 {
        return Ok((0.0, 1.0));
    }
    let uo = orthonormalize(u)?;
    let vo = orthonormalize(v)?;
    let overlap = uo.transpose() * vo;
    let a = if overlap.nrows() == 1 && overlap.ncols() == 1 {
        overlap[(0, 0)].abs()
    } else {
        overlap.svd(false, false).singular_values.max()
    };
    let a = a.clamp(0.0, 1.0);
    if a >= 1.0 - 1e-14 {
        return Err(SpectraError::degenerate("principal angle collapsed to zero"));
    }
    Ok((a, 1.0 / (1.0 - a * a).sqrt()))
}

/// Largest principal angle between two equal-dimension spans (radians).
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(SpectraError::DimensionMismatch { expected: a.ncols(), got: b.ncols() });
    }
    if a.ncols() == 0 {
        return Ok(0.0);
    }
    let ao = orthonormalize(a)?;
    let bo = orthonormalize(b)?;
    let overlap = ao.transpose() * bo;
    let smin = if overlap.nrows() == 1 {
        overlap[(0, 0)].abs()
    } else {
        overlap.svd(false, false).singular_values.min()
    };
    Ok(smin.clamp(-1.0, 1.0).acos())
}

/// Intersection of two spans, expecting the given dimension.
pub fn subspace_intersection(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    expected_dim: usize,
) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    let (ka, kb) = (a.ncols(), b.ncols());
    let mut stacked = DMatrix::zeros(d, ka + kb);
    stacked.columns_mut(0, ka).copy_from(a);
    stacked.columns_mut(ka, kb).copy_from(&(-b));
    let svd = stacked.svd(false, true);
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.max().max(1.0);
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] < 1e-8 * smax {
            let coeff = vt.row(i).transpose();
            let xa = coeff.rows(0, ka).into_owned();
            dirs.push(a * xa);
        }
    }
    if dirs.len() != expected_dim {
        return Err(SpectraError::degenerate(format!(
            "intersection dimension {} does not match expected {}",
            dirs.len(),
            expected_dim
        )));
    }
    if expected_dim == 0 {
        return Ok(DMatrix::zeros(d, 0));
    }
    let mut m = DMatrix::zeros(d, dirs.len());
    for (i, dir) in dirs.iter().enumerate() {
        m.set_column(i, dir);
    }
    orthonormalize(&m)
}

/// Seeded sample of projective points on the unit sphere of a span.
pub fn sample_projective_sphere<R: Rng + ?Sized>(
    basis: &DMatrix<f64>,
    count: usize,
    rng: &mut R,
) -> Result<ProjPointSet> {
    let k = basis.ncols();
    if k == 0 {
        return Ok(ProjPointSet::empty());
    }
    if k == 1 {
        return Ok(ProjPointSet::new(vec![proj_point(&basis.column(0).into_owned())?]));
    }
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let c = crate::rng::unit_sphere_vector(rng, k);
        points.push(proj_point(&(basis * c))?);
    }
    Ok(ProjPointSet::new(points))
}

/// Analytic fiber formulas for the conjugated block system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyFormula {
    /// Image of the expanding axis: span(1, 1), constant over the base.
    CoordChangeFast,
    /// Image of the neutral axis: span(e^w, e^{1-w}) at circle position w.
    CoordChangeSlow,
}

impl FamilyFormula {
    fn basis(&self, omega: &OmegaPoint) -> DMatrix<f64> {
        match self {
            FamilyFormula::CoordChangeFast => {
                let h = 1.0 / 2f64.sqrt();
                DMatrix::from_column_slice(2, 1, &[h, h])
            }
            FamilyFormula::CoordChangeSlow => {
                let w = circle_position(omega);
                let v = DVector::from_column_slice(&[w.exp(), (1.0 - w).exp()]);
                let v = &v / v.norm();
                DMatrix::from_column_slice(2, 1, v.as_slice())
            }
        }
    }
}

#[derive(Debug)]
struct SweptData {
    lo: i64,
    bases: Vec<DMatrix<f64>>,
}

enum FamilyRep {
    Constant(DMatrix<f64>),
    Formula(FamilyFormula),
    Swept(SweptData),
    Intersect(Box<SubspaceFamily>, Box<SubspaceFamily>),
    Custom(Arc<dyn Fn(&CocycleSystem, i64, &OmegaPoint) -> DMatrix<f64> + Send + Sync>),
}

impl std::fmt::Debug for FamilyRep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FamilyRep::Constant(_) => write!(f, "Constant"),
            FamilyRep::Formula(k) => write!(f, "Formula({k:?})"),
            FamilyRep::Swept(d) => write!(f, "Swept[{}..{}]", d.lo, d.lo + d.bases.len() as i64 - 1),
            FamilyRep::Intersect(a, b) => write!(f, "Intersect({:?}, {:?})", a.label, b.label),
            FamilyRep::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A measurable assignment `omega -> subspace`, realized along the orbit of
/// an anchor point; fibers are orthonormal `d x k` bases.
#[derive(Debug, Clone)]
pub struct SubspaceFamily {
    pub label: String,
    pub dim_sub: usize,
    rep: Arc<FamilyRep>,
}

impl SubspaceFamily {
    pub fn constant(label: &str, basis: DMatrix<f64>) -> Result<SubspaceFamily> {
        let dim_sub = basis.ncols();
        let basis = if dim_sub > 0 { orthonormalize(&basis)? } else { basis };
        Ok(SubspaceFamily { label: label.to_string(), dim_sub, rep: Arc::new(FamilyRep::Constant(basis)) })
    }

    pub fn full(d: usize) -> SubspaceFamily {
        SubspaceFamily {
            label: "full-space".to_string(),
            dim_sub: d,
            rep: Arc::new(FamilyRep::Constant(DMatrix::identity(d, d))),
        }
    }

    pub fn trivial(d: usize) -> SubspaceFamily {
        SubspaceFamily {
            label: "zero".to_string(),
            dim_sub: 0,
            rep: Arc::new(FamilyRep::Constant(DMatrix::zeros(d, 0))),
        }
    }

    pub fn formula(label: &str, kind: FamilyFormula) -> SubspaceFamily {
        SubspaceFamily { label: label.to_string(), dim_sub: 1, rep: Arc::new(FamilyRep::Formula(kind)) }
    }

    pub fn custom(
        label: &str,
        dim_sub: usize,
        f: Arc<dyn Fn(&CocycleSystem, i64, &OmegaPoint) -> DMatrix<f64> + Send + Sync>,
    ) -> SubspaceFamily {
        SubspaceFamily { label: label.to_string(), dim_sub, rep: Arc::new(FamilyRep::Custom(f)) }
    }

    /// Forward sweep: fibers for offsets in `range`, seeded `warmup` steps
    /// before the left edge so the push has settled onto the invariant
    /// family by the time fibers are exposed.
    pub fn swept_forward(
        label: &str,
        system: &CocycleSystem,
        anchor: &OmegaPoint,
        seed_basis: &DMatrix<f64>,
        range: (i64, i64),
        warmup: i64,
    ) -> Result<SubspaceFamily> {
        let (lo, hi) = range;
        assert!(lo <= hi && warmup >= 0);
        let k = seed_basis.ncols();
        let mut bases = Vec::with_capacity((hi - lo + 1) as usize);
        let start = lo - warmup;
        let start_point = theta_step(&system.driver, anchor, start);
        let mut walker = OrbitWalker::new(system, &start_point);
        let mut b = orthonormalize(seed_basis)?;
        for pos in start..=hi {
            if pos >= lo {
                bases.push(b.clone());
            }
            if pos < hi {
                let (g, _) = walker.step_forward()?;
                b = orthonormalize(&(&g * &b))?;
            }
        }
        Ok(SubspaceFamily {
            label: label.to_string(),
            dim_sub: k,
            rep: Arc::new(FamilyRep::Swept(SweptData { lo, bases })),
        })
    }

    /// Backward sweep: seeded `warmup` steps past the right edge and pushed
    /// through one-step inverses down to the left edge.
    pub fn swept_backward(
        label: &str,
        system: &CocycleSystem,
        anchor: &OmegaPoint,
        seed_basis: &DMatrix<f64>,
        range: (i64, i64),
        warmup: i64,
    ) -> Result<SubspaceFamily> {
        let (lo, hi) = range;
        assert!(lo <= hi && warmup >= 0);
        let k = seed_basis.ncols();
        let len = (hi - lo + 1) as usize;
        let mut bases = vec![DMatrix::zeros(seed_basis.nrows(), k); len];
        let start = hi + warmup;
        let start_point = theta_step(&system.driver, anchor, start);
        let mut walker = OrbitWalker::new(system, &start_point);
        let mut b = orthonormalize(seed_basis)?;
        for pos in (lo..=start).rev() {
            if pos <= hi {
                bases[(pos - lo) as usize] = b.clone();
            }
            if pos > lo {
                let (ginv, _) = walker.step_backward()?;
                b = orthonormalize(&(&ginv * &b))?;
            }
        }
        Ok(SubspaceFamily {
            label: label.to_string(),
            dim_sub: k,
            rep: Arc::new(FamilyRep::Swept(SweptData { lo, bases })),
        })
    }

    pub fn intersect(label: &str, a: SubspaceFamily, b: SubspaceFamily, dim_sub: usize) -> SubspaceFamily {
        SubspaceFamily {
            label: label.to_string(),
            dim_sub,
            rep: Arc::new(FamilyRep::Intersect(Box::new(a), Box::new(b))),
        }
    }

    /// Fiber at `theta_offset(base)`.
    pub fn basis_at(
        &self,
        system: &CocycleSystem,
        base: &OmegaPoint,
        offset: i64,
    ) -> Result<DMatrix<f64>> {
        match self.rep.as_ref() {
            FamilyRep::Constant(b) => Ok(b.clone()),
            FamilyRep::Formula(kind) => {
                Ok(kind.basis(&theta_step(&system.driver, base, offset)))
            }
            FamilyRep::Swept(data) => {
                let idx = offset - data.lo;
                if idx < 0 || idx as usize >= data.bases.len() {
                    return Err(SpectraError::invalid(format!(
                        "family `{}` has no fiber at offset {offset} (range {}..{})",
                        self.label,
                        data.lo,
                        data.lo + data.bases.len() as i64 - 1
                    )));
                }
                Ok(data.bases[idx as usize].clone())
            }
            FamilyRep::Intersect(a, b) => {
                let ba = a.basis_at(system, base, offset)?;
                let bb = b.basis_at(system, base, offset)?;
                subspace_intersection(&ba, &bb, self.dim_sub)
            }
            FamilyRep::Custom(f) => {
                Ok(f(system, offset, &theta_step(&system.driver, base, offset)))
            }
        }
    }

    /// Restricted one-step factor `(B_{t+1}^T G(theta_t base) B_t, log)`.
    /// For an invariant family this is the cocycle expressed in fiber
    /// coordinates.
    pub fn transfer_scaled(
        &self,
        system: &CocycleSystem,
        base: &OmegaPoint,
        offset: i64,
    ) -> Result<(DMatrix<f64>, f64)> {
        let b0 = self.basis_at(system, base, offset)?;
        let b1 = self.basis_at(system, base, offset + 1)?;
        let point = theta_step(&system.driver, base, offset);
        let (g, s) = system.generator_scaled(&point)?;
        Ok((b1.transpose() * g * b0, s))
    }
}

/// Invariant projector family determined by complementary range and
/// null-space families.
#[derive(Debug, Clone)]
pub struct ProjectorFamily {
    pub range_family: SubspaceFamily,
    pub null_family: SubspaceFamily,
}

impl ProjectorFamily {
    pub fn new(range_family: SubspaceFamily, null_family: SubspaceFamily) -> ProjectorFamily {
        ProjectorFamily { range_family, null_family }
    }

    pub fn matrix_at(
        &self,
        system: &CocycleSystem,
        base: &OmegaPoint,
        offset: i64,
    ) -> Result<DMatrix<f64>> {
        let u = self.range_family.basis_at(system, base, offset)?;
        let v = self.null_family.basis_at(system, base, offset)?;
        oblique_projector(&u, &v)
    }
}

/// Largest relative commutation residual
/// `|P(theta_t) Phi(t) - Phi(t) P| / |Phi(t)|` over `|t| <= horizon`.
pub fn check_invariant_projector(
    system: &CocycleSystem,
    projector: &ProjectorFamily,
    omega: &OmegaPoint,
    horizon: i64,
) -> Result<f64> {
    assert!(horizon >= 1);
    let p0 = projector.matrix_at(system, omega, 0)?;
    let mut worst = 0.0f64;
    for dir in [1i64, -1] {
        let mut walker = OrbitWalker::new(system, omega);
        let mut m = DMatrix::<f64>::identity(system.dim, system.dim);
        for step in 1..=horizon {
            let (g, _) = if dir > 0 { walker.step_forward()? } else { walker.step_backward()? };
            m = &g * &m;
            let f = m.norm();
            if !(f > 0.0) {
                return Err(SpectraError::SingularGenerator {
                    step: dir * step,
                    log_det: f64::NEG_INFINITY,
                });
            }
            m /= f; // scale cancels in the relative residual
            let pt = projector.matrix_at(system, omega, dir * step)?;
            let resid = operator_norm(&(&pt * &m - &m * &p0)) / operator_norm(&m);
            worst = worst.max(resid);
        }
    }
    Ok(worst)
}

/// Temperedness slope of `t -> |P(theta_t omega)|` for the oblique
/// projector determined by the two families.
pub fn gap_temperedness(
    system: &CocycleSystem,
    range_family: &SubspaceFamily,
    null_family: &SubspaceFamily,
    omega: &OmegaPoint,
    horizon: i64,
) -> Result<f64> {
    let series = projector_norm_series(system, range_family, null_family, omega, horizon)?;
    temperedness_slope(&series)
}

/// `(t, |P(theta_t omega)|)` over `|t| <= horizon`.
pub fn projector_norm_series(
    system: &CocycleSystem,
    range_family: &SubspaceFamily,
    null_family: &SubspaceFamily,
    omega: &OmegaPoint,
    horizon: i64,
) -> Result<Vec<(f64, f64)>> {
    let mut series = Vec::with_capacity((2 * horizon + 1) as usize);
    for t in -horizon..=horizon {
        let u = range_family.basis_at(system, omega, t)?;
        let v = null_family.basis_at(system, omega, t)?;
        let (_, norm) = projector_norm_angle(&u, &v)?;
        series.push((t as f64, norm));
    }
    Ok(series)
}

/// Smallest principal angle (radians) between the two families along the
/// orbit window.
pub fn min_separation_angle(
    system: &CocycleSystem,
    a: &SubspaceFamily,
    b: &SubspaceFamily,
    omega: &OmegaPoint,
    horizon: i64,
) -> Result<f64> {
    let mut min_angle = f64::INFINITY;
    for t in -horizon..=horizon {
        let ba = a.basis_at(system, omega, t)?;
        let bb = b.basis_at(system, omega, t)?;
        let (cosang, _) = projector_norm_angle(&ba, &bb)?;
        min_angle = min_angle.min(cosang.clamp(0.0, 1.0).acos());
    }
    Ok(min_angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{sample_omega, Driver};
    use crate::cocycle::Generator;
    use crate::rng::stream_rng;
    use nalgebra::dmatrix;

    fn penrose_ok(a: &DMatrix<f64>, p: &DMatrix<f64>, tol: f64) -> bool {
        let apa = a * p * a;
        let pap = p * a * p;
        let ap = a * p;
        let pa = p * a;
        (apa - a).norm() <= tol * (1.0 + a.norm())
            && (pap - p).norm() <= tol * (1.0 + p.norm())
            && (ap.transpose() - &ap).norm() <= tol
            && (pa.transpose() - &pa).norm() <= tol
    }

    #[test]
    fn moore_penrose_known_values() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((moore_penrose(&id) - id).norm() < 1e-12);
        let d = dmatrix![2.0, 0.0; 0.0, 0.0];
        assert!((moore_penrose(&d) - dmatrix![0.5, 0.0; 0.0, 0.0]).norm() < 1e-12);
        let ones = dmatrix![1.0, 1.0; 1.0, 1.0];
        let p = moore_penrose(&ones);
        assert!((&p - DMatrix::from_element(2, 2, 0.25)).norm() < 1e-12);
        assert!(penrose_ok(&ones, &p, 1e-10));
    }

    #[test]
    fn moore_penrose_satisfies_penrose_identities_randomly() {
        let mut rng = stream_rng(41, &[0]);
        for case in 0..1000 {
            let (r, c) = (2 + case % 3, 2 + (case / 3) % 3);
            let mut a = DMatrix::from_fn(r, c, |_, _| rng.gen_range(-2.0..2.0f64));
            if case % 4 == 0 && c >= 2 {
                // force rank deficiency
                let col = a.column(0).into_owned();
                a.set_column(c - 1, &(col * 0.5));
            }
            let p = moore_penrose(&a);
            assert!(penrose_ok(&a, &p, 1e-8), "case {case}");
        }
    }

    #[test]
    fn ridge_route_agrees_with_svd_route() {
        let mut rng = stream_rng(43, &[1]);
        for _ in 0..50 {
            let a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0f64));
            let svd_route = moore_penrose(&a);
            let ridge_route = pseudoinverse_ridge(&a, 1e12);
            // agreement where a is comfortably nonsingular
            if a.determinant().abs() > 0.05 {
                assert!((svd_route - ridge_route).norm() < 1e-6);
            }
        }
    }

    fn span(cols: &[&[f64]]) -> DMatrix<f64> {
        let d = cols[0].len();
        let mut m = DMatrix::zeros(d, cols.len());
        for (i, c) in cols.iter().enumerate() {
            m.set_column(i, &DVector::from_row_slice(c));
        }
        m
    }

    #[test]
    fn oblique_projector_axes() {
        let p = oblique_projector(&span(&[&[1.0, 0.0]]), &span(&[&[0.0, 1.0]])).unwrap();
        assert!((p - dmatrix![1.0, 0.0; 0.0, 0.0]).norm() < 1e-12);
    }

    #[test]
    fn oblique_projector_slanted_pair() {
        let e = std::f64::consts::E;
        let p = oblique_projector(&span(&[&[1.0, 1.0]]), &span(&[&[1.0, e]])).unwrap();
        let expect = dmatrix![
            e / (e - 1.0), 1.0 / (1.0 - e);
            e / (e - 1.0), 1.0 / (1.0 - e)
        ];
        assert!((&p - &expect).norm() < 1e-10, "{p}");
        // acts correctly on both defining directions
        let u = DVector::from_row_slice(&[1.0, 1.0]);
        let v = DVector::from_row_slice(&[1.0, e]);
        assert!((&p * &u - u).norm() < 1e-10);
        assert!((&p * &v).norm() < 1e-10);
    }

    #[test]
    fn complementary_projectors_sum_to_identity() {
        let mut rng = stream_rng(5, &[2]);
        for case in 0..1000 {
            let d = 2 + case % 2;
            let (u, v) = loop {
                let u = DMatrix::from_fn(d, 1, |_, _| rng.gen_range(-1.0..1.0f64));
                let v = DMatrix::from_fn(d, d - 1, |_, _| rng.gen_range(-1.0..1.0f64));
                if complementarity_check(&orthonormalize(&u).unwrap(), &orthonormalize(&v).unwrap())
                    .is_ok()
                {
                    break (u, v);
                }
            };
            let p = oblique_projector(&u, &v).unwrap();
            let q = oblique_projector(&v, &u).unwrap();
            assert!((&p + &q - DMatrix::<f64>::identity(d, d)).norm() <= 1e-8, "case {case}");
            assert!((&p * &p - &p).norm() <= 1e-8);
            // range and kernel action
            for i in 0..u.ncols() {
                let col = u.column(i).into_owned();
                assert!((&p * &col - &col).norm() <= 1e-8 * (1.0 + col.norm()));
            }
            for i in 0..v.ncols() {
                let col = v.column(i).into_owned();
                assert!((&p * &col).norm() <= 1e-8 * (1.0 + col.norm()));
            }
        }
    }

    #[test]
    fn degenerate_splitting_is_rejected() {
        let u = span(&[&[1.0, 0.0]]);
        let v = span(&[&[1.0, 1e-11]]);
        assert!(matches!(
            oblique_projector(&u, &v),
            Err(SpectraError::DegenerateSplitting { .. })
        ));
        // wrong dimension count
        let w = span(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(oblique_projector(&w, &w).is_err());
    }

    #[test]
    fn norm_angle_known_values() {
        let (a, n) = projector_norm_angle(&span(&[&[1.0, 0.0]]), &span(&[&[0.0, 1.0]])).unwrap();
        assert_eq!((a, n), (0.0, 1.0));

        let e = std::f64::consts::E;
        let (a, n) = projector_norm_angle(&span(&[&[1.0, 1.0]]), &span(&[&[1.0, e]])).unwrap();
        let expect_a = (1.0 + e) / (2f64.sqrt() * (1.0 + e * e).sqrt());
        assert!((a - expect_a).abs() < 1e-12);
        assert!((a - 0.9078).abs() < 1e-4);
        assert!((n - 2.384).abs() < 1e-3);

        // nearly parallel lines: norm is the reciprocal angle to first order
        let eps = 1e-3f64;
        let (_, n) = projector_norm_angle(
            &span(&[&[1.0, 0.0]]),
            &span(&[&[eps.cos(), eps.sin()]]),
        )
        .unwrap();
        assert!((n - 1000.0).abs() / 1000.0 < 0.01, "norm {n}");
    }

    #[test]
    fn norm_angle_matches_projector_spectral_norm() {
        let mut rng = stream_rng(6, &[3]);
        let mut checked = 0;
        while checked < 1000 {
            let d = 2 + checked % 3;
            let ku = 1 + checked % (d - 1).max(1);
            let u = DMatrix::from_fn(d, ku, |_, _| rng.gen_range(-1.0..1.0f64));
            let v = DMatrix::from_fn(d, d - ku, |_, _| rng.gen_range(-1.0..1.0f64));
            let Ok(p) = oblique_projector(&u, &v) else { continue };
            let Ok((_, n)) = projector_norm_angle(&u, &v) else { continue };
            let direct = operator_norm(&p);
            assert!(
                (n - direct).abs() <= 1e-6 * direct.max(1.0),
                "norm-angle {n} vs spectral {direct}"
            );
            checked += 1;
        }
    }

    #[test]
    fn intersection_of_planes_in_3d() {
        let a = span(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let b = span(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let i = subspace_intersection(&a, &b, 1).unwrap();
        let e2 = DVector::from_row_slice(&[0.0, 1.0, 0.0]);
        assert!((i.column(0).dot(&e2)).abs() > 1.0 - 1e-10);
        assert!(subspace_intersection(&a, &b, 2).is_err());
    }

    fn diag_system(a: f64, b: f64) -> CocycleSystem {
        CocycleSystem::new(
            "diag",
            Driver::golden_circle(),
            Generator::Constant(dmatrix![a, 0.0; 0.0, b]),
        )
        .unwrap()
    }

    #[test]
    fn invariant_projector_residuals() {
        let sys = diag_system(2.0, 0.5);
        let w = sample_omega(&sys.driver, 1);
        let axis = ProjectorFamily::new(
            SubspaceFamily::constant("e1", span(&[&[1.0, 0.0]])).unwrap(),
            SubspaceFamily::constant("e2", span(&[&[0.0, 1.0]])).unwrap(),
        );
        assert!(check_invariant_projector(&sys, &axis, &w, 40).unwrap() < 1e-12);

        let tilted = ProjectorFamily::new(
            SubspaceFamily::constant("diag", span(&[&[1.0, 1.0]])).unwrap(),
            SubspaceFamily::constant("anti", span(&[&[-1.0, 1.0]])).unwrap(),
        );
        assert!(check_invariant_projector(&sys, &tilted, &w, 40).unwrap() > 0.1);
    }

    #[test]
    fn conjugated_projector_is_invariant() {
        let sys = CocycleSystem::new(
            "psi",
            Driver::golden_circle(),
            Generator::CoordChangeBlock { beta: 2.0 },
        )
        .unwrap();
        let w = sample_omega(&sys.driver, 3);
        let pf = ProjectorFamily::new(
            SubspaceFamily::formula("fast", FamilyFormula::CoordChangeFast),
            SubspaceFamily::formula("slow", FamilyFormula::CoordChangeSlow),
        );
        let resid = check_invariant_projector(&sys, &pf, &w, 60).unwrap();
        assert!(resid < 1e-8, "residual {resid}");
    }

    #[test]
    fn gap_temperedness_orthogonal_and_synthetic() {
        let sys = diag_system(2.0, 0.5);
        let w = sample_omega(&sys.driver, 2);
        let r = SubspaceFamily::constant("e1", span(&[&[1.0, 0.0]])).unwrap();
        let n = SubspaceFamily::constant("e2", span(&[&[0.0, 1.0]])).unwrap();
        let slope = gap_temperedness(&sys, &r, &n, &w, 100).unwrap();
        assert!(slope.abs() < 1e-12);

        // injected exponential angle collapse at rate 0.2
        let collapsing = SubspaceFamily::custom(
            "collapse",
            1,
            Arc::new(|_sys, t, _w| {
                let ang = (-0.2 * t.abs() as f64).exp();
                DMatrix::from_column_slice(2, 1, &[ang.cos(), ang.sin()])
            }),
        );
        let axis = SubspaceFamily::constant("e1", span(&[&[1.0, 0.0]])).unwrap();
        let slope = gap_temperedness(&sys, &collapsing, &axis, &w, 100).unwrap();
        assert!((slope - 0.2).abs() < 0.02, "slope {slope}");
    }

    #[test]
    fn swept_families_are_invariant_by_construction() {
        let sys = CocycleSystem::new(
            "psi",
            Driver::golden_circle(),
            Generator::CoordChangeBlock { beta: 2.0 },
        )
        .unwrap();
        let w = sample_omega(&sys.driver, 5);
        let h = 1.0 / 2f64.sqrt();
        let fast_seed = DMatrix::from_column_slice(2, 1, &[h, h]);
        let fast =
            SubspaceFamily::swept_forward("fast", &sys, &w, &fast_seed, (-30, 60), 80).unwrap();
        // a backward sweep seeded with a generic line converges to the slow family
        let generic = DMatrix::from_column_slice(2, 1, &[0.6, -0.8]);
        let slow =
            SubspaceFamily::swept_backward("slow", &sys, &w, &generic, (-30, 60), 80).unwrap();
        for t in [-30i64, -5, 0, 17, 59] {
            let (g, _) = sys
                .generator_scaled(&crate::base::theta_step(&sys.driver, &w, t))
                .unwrap();
            for fam in [&fast, &slow] {
                let b0 = fam.basis_at(&sys, &w, t).unwrap();
                let b1 = fam.basis_at(&sys, &w, t + 1).unwrap();
                let pushed = orthonormalize(&(&g * &b0)).unwrap();
                assert!(max_principal_angle(&pushed, &b1).unwrap() < 1e-6);
            }
            // and the backward sweep tracks the analytic slow fiber
            let analytic = FamilyFormula::CoordChangeSlow
                .basis(&crate::base::theta_step(&sys.driver, &w, t));
            let got = slow.basis_at(&sys, &w, t).unwrap();
            assert!(max_principal_angle(&analytic, &got).unwrap() < 1e-3);
        }
    }
}
