//! Estimation of the finest weak Morse decomposition of the projectivised
//! system, and the weak-attraction probability tests that certify the
//! nested attractor candidates.
//!
//! The decomposition is estimated from forward and backward singular-vector
//! filtrations at the anchor point, clustered by exponent, and realized as
//! orbit families through stable sweeps (fast flags forward, slow flags
//! backward, middle sets as per-offset intersections of the two).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{sample_omega, theta_step, OmegaPoint};
use crate::cocycle::{CocycleSystem, OrbitWalker, ScaledMatrix};
use crate::error::{Result, SpectraError};
use crate::projective::{hausdorff_semidist, proj_point, ProjPoint, ProjPointSet};
use crate::rng::{stream_rng, unit_sphere_vector};
use crate::spectra::{morse_spectrum_interval, SamplingPlan, SpectrumInterval};
use crate::subspaces::{
    orthonormalize, sample_projective_sphere, subspace_intersection, SubspaceFamily,
};

/// Log-spread cap for the filtration products; past this the smallest
/// singular directions are below double-precision resolution.
const FILTRATION_SPREAD_CAP: f64 = 30.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterExponents {
    pub mean: f64,
    pub members: Vec<f64>,
}

/// Estimated finest weak Morse decomposition, ordered by exponent
/// (fastest first, so the leading prefix sums are the nested attractors).
#[derive(Debug, Clone)]
pub struct MorseDecomposition {
    pub sets: Vec<SubspaceFamily>,
    pub exponent_clusters: Vec<ClusterExponents>,
    pub n: usize,
    pub anchor: OmegaPoint,
    pub anchor_bases: Vec<DMatrix<f64>>,
    pub sweep_warmup: i64,
    /// Condition number of the stacked anchor bases.
    pub condition: f64,
}

/// Direct-sum check on stacked bases: `ok` iff the smallest singular value
/// of the `d x d` stack clears the tolerance.
pub fn whitney_sum_check_bases(dim: usize, bases: &[DMatrix<f64>]) -> Result<(bool, f64)> {
    let total: usize = bases.iter().map(|b| b.ncols()).sum();
    if total != dim {
        return Err(SpectraError::DimensionMismatch { expected: dim, got: total });
    }
    let mut stacked = DMatrix::zeros(dim, dim);
    let mut col = 0;
    for b in bases {
        stacked.columns_mut(col, b.ncols()).copy_from(b);
        col += b.ncols();
    }
    let sv = stacked.svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    Ok((smin > 1e-8, if smin > 0.0 { smax / smin } else { f64::INFINITY }))
}

/// Direct-sum check of family fibers at an orbit offset.
pub fn whitney_sum_check(
    system: &CocycleSystem,
    sets: &[SubspaceFamily],
    base: &OmegaPoint,
    offset: i64,
) -> Result<(bool, f64)> {
    let bases: Vec<DMatrix<f64>> = sets
        .iter()
        .map(|s| s.basis_at(system, base, offset))
        .collect::<Result<_>>()?;
    whitney_sum_check_bases(system.dim, &bases)
}

struct Filtration {
    exponents: Vec<f64>,         // descending
    right_vectors: DMatrix<f64>, // columns ordered with the exponents
}

/// Singular-value filtration of `Phi(±T, omega)`, stopping early when the
/// spread of the product exhausts double precision.
fn filtration(system: &CocycleSystem, omega: &OmegaPoint, t_max: i64, forward: bool) -> Result<Filtration> {
    let d = system.dim;
    let mut walker = OrbitWalker::new(system, omega);
    let mut acc = ScaledMatrix::identity(d);
    let mut kept = acc.clone();
    let mut kept_t = 0i64;
    for t in 1..=t_max {
        let (g, s) = if forward { walker.step_forward()? } else { walker.step_backward()? };
        acc.m = &g * &acc.m;
        acc.log_scale += s;
        let f = acc.m.norm();
        if !(f > 0.0) || !f.is_finite() {
            return Err(SpectraError::SingularGenerator {
                step: if forward { t } else { -t },
                log_det: f64::NEG_INFINITY,
            });
        }
        acc.m /= f;
        acc.log_scale += f.ln();
        let sv = acc.m.clone().svd(false, false).singular_values;
        let spread = (sv.max() / sv.min().max(f64::MIN_POSITIVE)).ln();
        if spread > FILTRATION_SPREAD_CAP && t > 4 {
            break;
        }
        kept = acc.clone();
        kept_t = t;
    }
    if kept_t == 0 {
        return Err(SpectraError::invalid("filtration horizon collapsed to zero"));
    }
    let svd = kept.m.clone().svd(false, true);
    let vt = svd.v_t.expect("svd with v_t");
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap()
    });
    let mut right = DMatrix::zeros(d, d);
    let mut exps = Vec::with_capacity(d);
    for (col, &i) in order.iter().enumerate() {
        right.set_column(col, &vt.row(i).transpose());
        exps.push((kept.log_scale + svd.singular_values[i].ln()) / kept_t as f64);
    }
    Ok(Filtration { exponents: exps, right_vectors: right })
}

fn cluster_ranges(exps: &[f64], gap: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..exps.len() {
        if exps[i - 1] - exps[i] >= gap {
            out.push((start, i - 1));
            start = i;
        }
    }
    out.push((start, exps.len() - 1));
    out
}

/// Estimate the clustered backward/forward-filtration splitting at the
/// anchor and realize each set as an invariant orbit family covering
/// `[-(2T+64), 2T+64]`.
pub fn oseledets_splitting(
    system: &CocycleSystem,
    omega: &OmegaPoint,
    t_filtration: i64,
    cluster_gap: f64,
) -> Result<MorseDecomposition> {
    let r = 2 * t_filtration + 64;
    oseledets_splitting_with_range(system, omega, t_filtration, cluster_gap, (-r, r))
}

pub fn oseledets_splitting_with_range(
    system: &CocycleSystem,
    omega: &OmegaPoint,
    t_filtration: i64,
    cluster_gap: f64,
    range: (i64, i64),
) -> Result<MorseDecomposition> {
    if t_filtration < 2 {
        return Err(SpectraError::invalid("filtration horizon must be at least 2"));
    }
    if !(cluster_gap > 0.0) {
        return Err(SpectraError::invalid("cluster gap must be positive"));
    }
    let d = system.dim;
    let fwd = filtration(system, omega, t_filtration, true)?;
    let bwd = filtration(system, omega, t_filtration, false)?;

    let ranges = cluster_ranges(&fwd.exponents, cluster_gap);
    let n = ranges.len();
    let clusters: Vec<ClusterExponents> = ranges
        .iter()
        .map(|&(i, j)| {
            let members = fwd.exponents[i..=j].to_vec();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            ClusterExponents { mean, members }
        })
        .collect();

    let mut gap_min = f64::INFINITY;
    for w in clusters.windows(2) {
        gap_min = gap_min.min(w[0].mean - w[1].mean);
    }
    let warmup = if n <= 1 {
        0
    } else {
        ((40.0 / gap_min.max(1e-3)).ceil() as i64).clamp(16, 800)
    };

    // anchor fibers: first cluster from the backward filtration, last from
    // the forward one, middle clusters as leg intersections
    let v_leg = |i: usize| fwd.right_vectors.columns(i, d - i).into_owned();
    let w_leg = |j: usize| bwd.right_vectors.columns(d - (j + 1), j + 1).into_owned();
    let mut anchor_bases = Vec::with_capacity(n);
    for &(i, j) in &ranges {
        let basis = if n == 1 {
            DMatrix::identity(d, d)
        } else if i == 0 {
            orthonormalize(&w_leg(j))?
        } else if j == d - 1 {
            orthonormalize(&v_leg(i))?
        } else {
            subspace_intersection(&v_leg(i), &w_leg(j), j - i + 1)?
        };
        anchor_bases.push(basis);
    }

    let (ok, condition) = whitney_sum_check_bases(d, &anchor_bases)?;
    if !ok {
        return Err(SpectraError::degenerate(format!(
            "estimated fibers fail the direct-sum check (condition {condition:.3e})"
        )));
    }

    let mut sets = Vec::with_capacity(n);
    for (r, &(i, j)) in ranges.iter().enumerate() {
        let label = format!("M{}", r + 1);
        let fam = if n == 1 {
            SubspaceFamily::full(d)
        } else if r == 0 {
            SubspaceFamily::swept_forward(&label, system, omega, &anchor_bases[0], range, warmup)?
        } else if r == n - 1 {
            SubspaceFamily::swept_backward(&label, system, omega, &anchor_bases[n - 1], range, warmup)?
        } else {
            let fast = SubspaceFamily::swept_forward(
                &format!("{label}-fast-flag"),
                system,
                omega,
                &orthonormalize(&w_leg(j))?,
                range,
                warmup,
            )?;
            let slow = SubspaceFamily::swept_backward(
                &format!("{label}-slow-flag"),
                system,
                omega,
                &orthonormalize(&v_leg(i))?,
                range,
                warmup,
            )?;
            SubspaceFamily::intersect(&label, fast, slow, j - i + 1)
        };
        sets.push(fam);
    }

    Ok(MorseDecomposition {
        sets,
        exponent_clusters: clusters,
        n,
        anchor: omega.clone(),
        anchor_bases,
        sweep_warmup: warmup,
        condition,
    })
}

/// Forward-swept flag spanning the fastest `1..=i` clusters (a nested
/// attractor candidate).
pub fn nested_attractor_flag(
    system: &CocycleSystem,
    decomposition: &MorseDecomposition,
    i: usize,
    range: (i64, i64),
) -> Result<SubspaceFamily> {
    let seed = stack_bases(system.dim, &decomposition.anchor_bases[..i]);
    SubspaceFamily::swept_forward(
        &format!("A{i}"),
        system,
        &decomposition.anchor,
        &seed,
        range,
        decomposition.sweep_warmup,
    )
}

/// Backward-swept flag spanning the slowest clusters `i+1..=n` (the
/// repeller complementary to the nested attractor).
pub fn nested_repeller_flag(
    system: &CocycleSystem,
    decomposition: &MorseDecomposition,
    i: usize,
    range: (i64, i64),
) -> Result<SubspaceFamily> {
    let seed = stack_bases(system.dim, &decomposition.anchor_bases[i..]);
    SubspaceFamily::swept_backward(
        &format!("R{i}"),
        system,
        &decomposition.anchor,
        &seed,
        range,
        decomposition.sweep_warmup,
    )
}

fn stack_bases(dim: usize, bases: &[DMatrix<f64>]) -> DMatrix<f64> {
    let total: usize = bases.iter().map(|b| b.ncols()).sum();
    let mut m = DMatrix::zeros(dim, total);
    let mut col = 0;
    for b in bases {
        m.columns_mut(col, b.ncols()).copy_from(b);
        col += b.ncols();
    }
    m
}

/// Test cloud with a per-fiber exclusion margin around a family; stands in
/// for a closed random set inside the attractor's basin.
#[derive(Debug, Clone)]
pub struct CloudFamily {
    pub points: ProjPointSet,
    pub avoid: Option<(SubspaceFamily, f64)>,
}

impl CloudFamily {
    pub fn plain(points: ProjPointSet) -> CloudFamily {
        CloudFamily { points, avoid: None }
    }

    pub fn seeded(
        dim: usize,
        count: usize,
        avoid: Option<(SubspaceFamily, f64)>,
        seed: u64,
    ) -> Result<CloudFamily> {
        let mut rng = stream_rng(seed, &[0xc10_0d]);
        let mut points = Vec::with_capacity(count);
        while points.len() < count {
            let p = proj_point(&unit_sphere_vector(&mut rng, dim))?;
            points.push(p);
        }
        Ok(CloudFamily { points: ProjPointSet::new(points), avoid })
    }

    pub fn fiber(
        &self,
        system: &CocycleSystem,
        base: &OmegaPoint,
        offset: i64,
    ) -> Result<ProjPointSet> {
        match &self.avoid {
            None => Ok(self.points.clone()),
            Some((family, margin)) => {
                let basis = family.basis_at(system, base, offset)?;
                let kept: Vec<ProjPoint> = self
                    .points
                    .points
                    .iter()
                    .filter(|p| dist_point_to_span(p, &basis) > *margin)
                    .cloned()
                    .collect();
                if kept.is_empty() {
                    return Err(SpectraError::invalid(
                        "cloud fiber empty after exclusion margin",
                    ));
                }
                Ok(ProjPointSet::new(kept))
            }
        }
    }
}

/// Chordal distance from a projective point to the projective image of a
/// span.
pub fn dist_point_to_span(p: &ProjPoint, basis: &DMatrix<f64>) -> f64 {
    if basis.ncols() == 0 {
        return f64::INFINITY;
    }
    let coords = basis.transpose() * p.rep();
    let cosang = coords.norm().clamp(0.0, 1.0);
    let angle = cosang.acos();
    2.0 * (angle / 2.0).sin()
}

/// Empirical weak-attraction exceedance per time value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttractionReport {
    pub t_values: Vec<i64>,
    pub exceedance_probabilities: Vec<f64>,
    pub epsilon: f64,
    pub n_omega: usize,
}

/// Frequency, over the sampled base points, of
/// `dist(Phi(t) C, A(theta_t .)) > epsilon` for each `t`.
pub fn weak_attraction_probability(
    system: &CocycleSystem,
    attractor: &SubspaceFamily,
    cloud: &CloudFamily,
    epsilon: f64,
    t_values: &[i64],
    sample_offsets: &[i64],
    base: &OmegaPoint,
    seed: u64,
) -> Result<AttractionReport> {
    if !(epsilon > 0.0) {
        return Err(SpectraError::invalid("attraction test needs epsilon > 0"));
    }
    let sphere_points = 64;
    let counts: Vec<Result<Vec<bool>>> = sample_offsets
        .par_iter()
        .enumerate()
        .map(|(si, &s)| {
            let fiber = cloud.fiber(system, base, s)?;
            let start = theta_step(&system.driver, base, s);
            let mut flags = Vec::with_capacity(t_values.len());
            for (ti, &t) in t_values.iter().enumerate() {
                let moved: Vec<ProjPoint> = fiber
                    .points
                    .iter()
                    .map(|p| crate::projective::proj_apply(system, &start, t, p))
                    .collect::<Result<_>>()?;
                let target_basis = attractor.basis_at(system, base, s + t)?;
                let mut rng = stream_rng(seed, &[si as u64, ti as u64]);
                let target = sample_projective_sphere(&target_basis, sphere_points, &mut rng)?;
                let dist = hausdorff_semidist(&ProjPointSet::new(moved), &target);
                flags.push(dist > epsilon);
            }
            Ok(flags)
        })
        .collect();

    let mut exceed = vec![0usize; t_values.len()];
    let mut n = 0usize;
    for flags in counts {
        let flags = flags?;
        n += 1;
        for (i, f) in flags.into_iter().enumerate() {
            if f {
                exceed[i] += 1;
            }
        }
    }
    Ok(AttractionReport {
        t_values: t_values.to_vec(),
        exceedance_probabilities: exceed.iter().map(|&c| c as f64 / n as f64).collect(),
        epsilon,
        n_omega: n,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttractionValidation {
    pub attractor_index: usize,
    pub epsilon: f64,
    pub report: AttractionReport,
    pub monotone_ok: bool,
}

#[derive(Debug, Clone)]
pub struct FinestMorseResult {
    pub decomposition: MorseDecomposition,
    pub intervals: Vec<SpectrumInterval>,
    pub attraction: Vec<AttractionValidation>,
    pub validation_failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MorseParams {
    pub t_filtration: i64,
    pub cluster_gap: f64,
    pub epsilon: f64,
    pub n_omega: usize,
    pub plan: SamplingPlan,
    pub seed: u64,
    pub attraction_t: Vec<i64>,
    pub cloud_size: usize,
    pub cloud_margin: f64,
}

impl MorseParams {
    pub fn new(t_filtration: i64, n_omega: usize, plan: SamplingPlan, seed: u64) -> MorseParams {
        MorseParams {
            t_filtration,
            cluster_gap: 0.1,
            epsilon: 0.05,
            n_omega,
            plan,
            seed,
            attraction_t: vec![0, 2, 5, 10, 20, 30],
            cloud_size: 32,
            cloud_margin: 0.1,
        }
    }
}

/// Spread base-point sample as orbit offsets of the anchor.
pub fn spread_offsets(n: usize) -> Vec<i64> {
    let stride = 7i64;
    (0..n as i64).map(|j| stride * (j - n as i64 / 2)).collect()
}

fn monotone_after_burn_in(report: &AttractionReport, burn_in: i64) -> bool {
    let mut prev: Option<f64> = None;
    for (&t, &p) in report.t_values.iter().zip(&report.exceedance_probabilities) {
        if t < burn_in {
            continue;
        }
        if let Some(q) = prev {
            if p > q + 1e-9 {
                return false;
            }
        }
        prev = Some(p);
    }
    true
}

/// Estimate the finest decomposition, validate the nested attractors by
/// weak-attraction probabilities, and attach per-set spectral intervals.
/// A failed validation is reported on the result, not as an error; the
/// decomposition is still returned.
pub fn finest_morse_estimate(
    system: &CocycleSystem,
    params: &MorseParams,
) -> Result<FinestMorseResult> {
    params.plan.validate()?;
    let anchor = sample_omega(&system.driver, params.seed);
    let offsets = spread_offsets(params.n_omega);
    let t_plan_max = *params.plan.t_grid.last().unwrap();
    let t_attr_max = params.attraction_t.iter().map(|t| t.abs()).max().unwrap_or(0);
    let off_max = offsets.iter().map(|s| s.abs()).max().unwrap_or(0);
    let reach = (2 * t_plan_max).max(off_max + t_attr_max) + 8;
    let range = (-reach, reach);

    let decomposition = oseledets_splitting_with_range(
        system,
        &anchor,
        params.t_filtration,
        params.cluster_gap,
        range,
    )?;

    let mut attraction = Vec::new();
    let mut validation_failure = None;
    let epsilons = {
        let mut v = vec![params.epsilon, 0.01];
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        v
    };
    for i in 1..decomposition.n {
        let a_flag = nested_attractor_flag(system, &decomposition, i, range)?;
        let r_flag = nested_repeller_flag(system, &decomposition, i, range)?;
        let cloud = CloudFamily::seeded(
            system.dim,
            params.cloud_size,
            Some((r_flag, params.cloud_margin)),
            params.seed ^ (i as u64),
        )?;
        for &eps in &epsilons {
            let report = weak_attraction_probability(
                system,
                &a_flag,
                &cloud,
                eps,
                &params.attraction_t,
                &offsets,
                &anchor,
                params.seed,
            )?;
            let monotone_ok = monotone_after_burn_in(&report, 5);
            if !monotone_ok && validation_failure.is_none() {
                validation_failure = Some(format!(
                    "attractor A{i} exceedance not non-increasing after burn-in at eps {eps}"
                ));
            }
            attraction.push(AttractionValidation {
                attractor_index: i,
                epsilon: eps,
                report,
                monotone_ok,
            });
        }
    }

    let mut intervals = Vec::with_capacity(decomposition.n);
    for set in &decomposition.sets {
        intervals.push(morse_spectrum_interval(
            system,
            set,
            &anchor,
            &params.plan,
            params.seed,
        )?);
    }

    Ok(FinestMorseResult { decomposition, intervals, attraction, validation_failure })
}
