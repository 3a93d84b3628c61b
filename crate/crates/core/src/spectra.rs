//! Finite-time Lyapunov exponents, per-Morse-set spectral intervals under
//! the `|T| >= |t|` sampling discipline, a QR Lyapunov oracle, and the
//! growth-rate scan that estimates the non-uniform dichotomy spectrum.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::OmegaPoint;
use crate::cocycle::{
    evolve_vector_log, log_vector_norms, operator_norm, CocycleSystem, OrbitWalker,
};
use crate::error::{Result, SpectraError};
use crate::extreal::ExtReal;
use crate::morse::MorseDecomposition;
use crate::rng::{stream_rng, unit_sphere_vector};
use crate::subspaces::{oblique_projector, orthonormalize, SubspaceFamily};

const X_SALT: u64 = 0x5ac3_17;
const T_SALT: u64 = 0x0ff5_e7;

/// Where finite-time exponents are sampled: horizons `T` from `t_grid`,
/// offsets `t` per horizon from the rule. Unless `allow_unrestricted` is
/// set, every emitted pair satisfies `|T| >= |t|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub t_grid: Vec<i64>,
    pub t_rule: TRule,
    pub x_per_fiber: usize,
    pub allow_unrestricted: bool,
    /// Divergence is declared when an extreme sample exceeds `c * sqrt(T)`.
    pub divergence_coeff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TRule {
    /// `t in {-T, -T/2, 0, T/2, T}`.
    SymmetricFractions,
    /// Explicit offset lists aligned with `t_grid`.
    Explicit(Vec<Vec<i64>>),
    /// Seeded uniform draws of `t` from `[-t_abs_max, t_abs_max]`,
    /// regardless of `T`; requires `allow_unrestricted`.
    UniformUnrestricted { t_abs_max: i64, count: usize },
}

impl SamplingPlan {
    pub fn symmetric(t_grid: Vec<i64>, x_per_fiber: usize) -> SamplingPlan {
        SamplingPlan {
            t_grid,
            t_rule: TRule::SymmetricFractions,
            x_per_fiber,
            allow_unrestricted: false,
            divergence_coeff: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(SpectraError::invalid("sampling plan needs a nonempty horizon grid"));
        }
        if self.t_grid[0] < 1 || self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SpectraError::invalid("horizon grid must be increasing and positive"));
        }
        if self.x_per_fiber == 0 {
            return Err(SpectraError::invalid("x_per_fiber must be at least 1"));
        }
        if !(self.divergence_coeff > 0.0) {
            return Err(SpectraError::invalid("divergence coefficient must be positive"));
        }
        match &self.t_rule {
            TRule::SymmetricFractions => {}
            TRule::Explicit(lists) => {
                if lists.len() != self.t_grid.len() {
                    return Err(SpectraError::invalid(
                        "explicit offset lists must align with the horizon grid",
                    ));
                }
                if !self.allow_unrestricted {
                    for (ti, list) in lists.iter().enumerate() {
                        let cap = self.t_grid[ti];
                        if list.iter().any(|t| t.abs() > cap) {
                            return Err(SpectraError::invalid(format!(
                                "offset beyond |T| at horizon {cap} in a restricted plan"
                            )));
                        }
                    }
                }
            }
            TRule::UniformUnrestricted { .. } => {
                if !self.allow_unrestricted {
                    return Err(SpectraError::invalid(
                        "uniform offset rule requires allow_unrestricted",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Offsets for the `ti`-th horizon.
    pub fn offsets_for(&self, ti: usize, seed: u64) -> Vec<i64> {
        let t = self.t_grid[ti];
        match &self.t_rule {
            TRule::SymmetricFractions => {
                let mut v = vec![-t, -t / 2, 0, t / 2, t];
                v.sort_unstable();
                v.dedup();
                v
            }
            TRule::Explicit(lists) => lists[ti].clone(),
            TRule::UniformUnrestricted { t_abs_max, count } => {
                let mut rng = stream_rng(seed, &[T_SALT, ti as u64]);
                (0..*count).map(|_| rng.gen_range(-t_abs_max..=*t_abs_max)).collect()
            }
        }
    }
}

/// One sampled relative exponent.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub t_horizon: i64,
    pub t_offset: i64,
    pub value: f64,
}

/// Estimated spectral interval of one Morse set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumInterval {
    pub morse_label: String,
    pub lo: ExtReal,
    pub hi: ExtReal,
    pub samples: Vec<SpectrumSample>,
}

impl SpectrumInterval {
    pub fn midpoint(&self) -> f64 {
        if self.lo.is_finite() && self.hi.is_finite() {
            0.5 * (self.lo.0 + self.hi.0)
        } else if self.lo.is_finite() {
            f64::INFINITY
        } else if self.hi.is_finite() {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        self.lo.0 - slack <= x && x <= self.hi.0 + slack
    }
}

/// Finite-time Lyapunov exponent `ln(|Phi(T) x| / |x|) / T`.
pub fn ftle(system: &CocycleSystem, omega: &OmegaPoint, x: &DVector<f64>, t_horizon: i64) -> Result<f64> {
    if t_horizon == 0 {
        return Err(SpectraError::invalid("finite-time exponent needs T != 0"));
    }
    let (_, log) = evolve_vector_log(system, omega, t_horizon, x)?;
    Ok(log / t_horizon as f64)
}

/// Relative exponent `ln(|Phi(T+t) x| / |Phi(t) x|) / T`.
pub fn ftle_relative(
    system: &CocycleSystem,
    omega: &OmegaPoint,
    x: &DVector<f64>,
    t_horizon: i64,
    t_offset: i64,
) -> Result<f64> {
    if t_horizon == 0 {
        return Err(SpectraError::invalid("relative exponent needs T != 0"));
    }
    let s_lo = 0.min(t_offset).min(t_horizon + t_offset);
    let s_hi = 0.max(t_offset).max(t_horizon + t_offset);
    let norms = log_vector_norms(system, omega, x, s_lo, s_hi)?;
    let at = |s: i64| norms[(s - s_lo) as usize];
    Ok((at(t_horizon + t_offset) - at(t_offset)) / t_horizon as f64)
}

/// `ln |Phi(s) x|` for `s in [s_lo, s_hi]` and `x = B(0) c`, computed in
/// fiber coordinates via the family's restricted one-step factors. For an
/// invariant family this stays on the fiber regardless of how strongly the
/// ambient dynamics would steer a raw vector off it.
fn fiber_log_norms(
    system: &CocycleSystem,
    family: &SubspaceFamily,
    base: &OmegaPoint,
    coords: &DVector<f64>,
    s_lo: i64,
    s_hi: i64,
) -> Result<Vec<f64>> {
    assert!(s_lo <= 0 && s_hi >= 0);
    let len = (s_hi - s_lo + 1) as usize;
    let mut out = vec![0.0; len];
    let idx = |s: i64| (s - s_lo) as usize;

    let mut v = coords / coords.norm();
    let mut log = 0.0;
    for s in 0..s_hi {
        let (tr, gs) = family.transfer_scaled(system, base, s)?;
        v = tr * v;
        let f = v.norm();
        if !(f > 0.0) || !f.is_finite() {
            return Err(SpectraError::degenerate(format!(
                "restricted transfer collapsed at offset {s} for family `{}`",
                family.label
            )));
        }
        v /= f;
        log += f.ln() + gs;
        out[idx(s + 1)] = log;
    }

    let mut v = coords / coords.norm();
    let mut log = 0.0;
    for s in (s_lo..0).rev() {
        let (tr, gs) = family.transfer_scaled(system, base, s)?;
        let inv = tr.try_inverse().ok_or_else(|| {
            SpectraError::degenerate(format!(
                "restricted transfer not invertible at offset {s} for family `{}`",
                family.label
            ))
        })?;
        v = inv * v;
        let f = v.norm();
        if !(f > 0.0) || !f.is_finite() {
            return Err(SpectraError::degenerate(format!(
                "restricted transfer collapsed at offset {s} for family `{}`",
                family.label
            )));
        }
        v /= f;
        log += f.ln() - gs;
        out[idx(s)] = log;
    }
    Ok(out)
}

/// Sample the relative exponents of trajectories started in the fibers of
/// `family` and report `[min, max]` at the largest horizon, with the
/// divergence detector mapping runaway extremes to the infinities.
pub fn morse_spectrum_interval(
    system: &CocycleSystem,
    family: &SubspaceFamily,
    omega: &OmegaPoint,
    plan: &SamplingPlan,
    seed: u64,
) -> Result<SpectrumInterval> {
    plan.validate()?;
    if family.dim_sub == 0 {
        return Err(SpectraError::EmptyFiber { label: family.label.clone() });
    }
    let offsets_per_t: Vec<Vec<i64>> =
        (0..plan.t_grid.len()).map(|ti| plan.offsets_for(ti, seed)).collect();
    let mut s_lo = 0i64;
    let mut s_hi = 0i64;
    for (ti, offsets) in offsets_per_t.iter().enumerate() {
        let t = plan.t_grid[ti];
        for &off in offsets {
            s_lo = s_lo.min(off).min(t + off);
            s_hi = s_hi.max(off).max(t + off);
        }
    }

    let per_x: Vec<Result<Vec<SpectrumSample>>> = (0..plan.x_per_fiber)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, &[X_SALT, j as u64]);
            let coords = unit_sphere_vector(&mut rng, family.dim_sub);
            let norms = fiber_log_norms(system, family, omega, &coords, s_lo, s_hi)?;
            let at = |s: i64| norms[(s - s_lo) as usize];
            let mut samples = Vec::new();
            for (ti, offsets) in offsets_per_t.iter().enumerate() {
                let t = plan.t_grid[ti];
                for &off in offsets {
                    samples.push(SpectrumSample {
                        t_horizon: t,
                        t_offset: off,
                        value: (at(t + off) - at(off)) / t as f64,
                    });
                }
            }
            Ok(samples)
        })
        .collect();

    let mut samples = Vec::new();
    for r in per_x {
        samples.extend(r?);
    }

    let t_max = *plan.t_grid.last().unwrap();
    let mut lo_val = f64::INFINITY;
    let mut hi_val = f64::NEG_INFINITY;
    for s in samples.iter().filter(|s| s.t_horizon == t_max) {
        lo_val = lo_val.min(s.value);
        hi_val = hi_val.max(s.value);
    }

    let mut hi = ExtReal(hi_val);
    let mut lo = ExtReal(lo_val);
    for &t in &plan.t_grid {
        let bound = plan.divergence_coeff * (t as f64).sqrt();
        let (mut t_min, mut t_max_v) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in samples.iter().filter(|s| s.t_horizon == t) {
            t_min = t_min.min(s.value);
            t_max_v = t_max_v.max(s.value);
        }
        if t_max_v > bound {
            hi = ExtReal::POS_INF;
        }
        if t_min < -bound {
            lo = ExtReal::NEG_INF;
        }
    }

    Ok(SpectrumInterval { morse_label: family.label.clone(), lo, hi, samples })
}

/// Spectral interval of the whole space: fibers are all of `R^d` and
/// starting directions are drawn uniformly on the sphere.
pub fn full_space_interval(
    system: &CocycleSystem,
    omega: &OmegaPoint,
    plan: &SamplingPlan,
    seed: u64,
) -> Result<SpectrumInterval> {
    let family = SubspaceFamily::full(system.dim);
    morse_spectrum_interval(system, &family, omega, plan, seed)
}

/// QR estimates of the d Lyapunov exponents at horizon `T`, descending.
pub fn lyapunov_spectrum_qr(
    system: &CocycleSystem,
    omega: &OmegaPoint,
    t_horizon: i64,
) -> Result<Vec<f64>> {
    if t_horizon < 1 {
        return Err(SpectraError::invalid("QR spectrum needs T >= 1"));
    }
    let d = system.dim;
    let mut q = DMatrix::<f64>::identity(d, d);
    let mut sums = vec![0.0f64; d];
    let mut walker = OrbitWalker::new(system, omega);
    for step in 0..t_horizon {
        let (g, gs) = walker.step_forward()?;
        let a = &g * &q;
        let qr = a.qr();
        q = qr.q();
        let r = qr.r();
        for i in 0..d {
            let rii = r[(i, i)];
            if rii == 0.0 || !rii.is_finite() {
                return Err(SpectraError::SingularGenerator {
                    step,
                    log_det: f64::NEG_INFINITY,
                });
            }
            if rii < 0.0 {
                let mut col = q.column_mut(i);
                col *= -1.0;
            }
            sums[i] += rii.abs().ln() + gs;
        }
    }
    let mut exps: Vec<f64> = sums.iter().map(|s| s / t_horizon as f64).collect();
    exps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(exps)
}

/// Thresholds for the finite-horizon dichotomy verdicts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyOptions {
    /// Smallest admissible spectral gap; a dichotomy is only certified when
    /// it holds with at least this `alpha`, which ties the verdict to the
    /// resolution of the scan grid.
    pub alpha_min: f64,
    /// Resolution of the search for the largest passing `alpha`.
    pub alpha_resolution: f64,
    /// Upper bound of the `alpha` search, added to `|gamma|`.
    pub alpha_cap: f64,
    /// Orbit-temperedness threshold for the fitted prefactor.
    pub tau_temper: f64,
    /// Largest allowed growth of the running envelope over the second half
    /// of the horizon; more marks the normalized supremum as divergent.
    pub rise_tol: f64,
}

impl Default for DichotomyOptions {
    fn default() -> Self {
        DichotomyOptions {
            alpha_min: 0.01,
            alpha_resolution: 1e-3,
            alpha_cap: 4.0,
            tau_temper: 0.02,
            rise_tol: 0.25,
        }
    }
}

/// Candidate invariant splitting: the projector has range `contracting`
/// (bounded forward at rate `gamma - alpha`) and kernel `expanding`
/// (bounded backward at rate `gamma + alpha`).
#[derive(Clone, Debug)]
pub struct SplittingCandidate {
    pub label: String,
    pub contracting: SubspaceFamily,
    pub expanding: SubspaceFamily,
}

/// Verdict of the dichotomy test at one growth rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyVerdict {
    pub gamma: f64,
    pub admits: bool,
    pub alpha_star: f64,
    pub projector_rank: usize,
    pub k_slope: f64,
    pub witnesses: DichotomyWitness,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyWitness {
    pub splitting: String,
    pub ln_k_max: f64,
    pub tail_rise: f64,
    pub horizon: i64,
    pub sample_offsets: Vec<i64>,
}

/// Normalized log-norm series of the two dichotomy branches, cached per
/// sample offset; they do not depend on `gamma` or `alpha`.
struct BranchSeries {
    offsets: Vec<i64>,
    /// per offset: `ln |Phi(t) P|` for `t = 0..=horizon` (None when rank 0)
    fwd: Vec<Option<Vec<f64>>>,
    /// per offset: `ln |Phi(-i) (1-P)|` for `i = 0..=horizon` (None when corank 0)
    bwd: Vec<Option<Vec<f64>>>,
    horizon: i64,
}

fn build_branch_series(
    system: &CocycleSystem,
    candidate: &SplittingCandidate,
    omega: &OmegaPoint,
    sample_offsets: &[i64],
    horizon: i64,
) -> Result<BranchSeries> {
    let d = system.dim;
    let mut fwd = Vec::with_capacity(sample_offsets.len());
    let mut bwd = Vec::with_capacity(sample_offsets.len());
    for &s in sample_offsets {
        let u = candidate.contracting.basis_at(system, omega, s)?;
        let v = candidate.expanding.basis_at(system, omega, s)?;
        let p = oblique_projector(&u, &v)?;

        if u.ncols() > 0 {
            let uo = orthonormalize(&u)?;
            let mut m = uo.transpose() * &p;
            let mut log = 0.0;
            let mut series = Vec::with_capacity(horizon as usize + 1);
            series.push(safe_log_norm(&m, log)?);
            for t in 0..horizon {
                let (tr, gs) = candidate.contracting.transfer_scaled(system, omega, s + t)?;
                m = tr * m;
                let f = m.norm();
                if !(f > 0.0) || !f.is_finite() {
                    return Err(SpectraError::degenerate("contracting branch collapsed"));
                }
                m /= f;
                log += f.ln() + gs;
                series.push(safe_log_norm(&m, log)?);
            }
            fwd.push(Some(series));
        } else {
            fwd.push(None);
        }

        if v.ncols() > 0 {
            let vo = orthonormalize(&v)?;
            let q = DMatrix::<f64>::identity(d, d) - &p;
            let mut m = vo.transpose() * q;
            let mut log = 0.0;
            let mut series = Vec::with_capacity(horizon as usize + 1);
            series.push(safe_log_norm(&m, log)?);
            for i in 0..horizon {
                let (tr, gs) = candidate.expanding.transfer_scaled(system, omega, s - i - 1)?;
                let inv = tr
                    .try_inverse()
                    .ok_or_else(|| SpectraError::degenerate("expanding transfer not invertible"))?;
                m = inv * m;
                let f = m.norm();
                if !(f > 0.0) || !f.is_finite() {
                    return Err(SpectraError::degenerate("expanding branch collapsed"));
                }
                m /= f;
                log += f.ln() - gs;
                series.push(safe_log_norm(&m, log)?);
            }
            bwd.push(Some(series));
        } else {
            bwd.push(None);
        }
    }
    Ok(BranchSeries { offsets: sample_offsets.to_vec(), fwd, bwd, horizon })
}

fn safe_log_norm(m: &DMatrix<f64>, log: f64) -> Result<f64> {
    let n = operator_norm(m);
    if !(n > 0.0) || !n.is_finite() {
        return Err(SpectraError::degenerate("branch norm vanished"));
    }
    Ok(log + n.ln())
}

struct BranchEval {
    bounded: bool,
    ln_k_max: f64,
    tail_rise: f64,
    k_slope: f64,
}

impl BranchSeries {
    /// Running-envelope evaluation at a candidate `(gamma, alpha)`.
    fn evaluate(&self, gamma: f64, alpha: f64, tau_temper: f64, rise_tol: f64) -> BranchEval {
        let h = self.horizon as usize;
        let half = h / 2;
        let mut ln_k_max = 0.0f64;
        let mut tail_rise = 0.0f64;
        let mut slope_pts: Vec<(f64, f64)> = Vec::with_capacity(self.offsets.len());
        for (i, &s) in self.offsets.iter().enumerate() {
            let mut ln_k = 0.0f64;
            let mut rise = 0.0f64;
            if let Some(series) = &self.fwd[i] {
                let mut run = f64::NEG_INFINITY;
                let mut at_half = 0.0;
                for (t, &v) in series.iter().enumerate() {
                    run = run.max(v - (gamma - alpha) * t as f64);
                    if t == half {
                        at_half = run.max(0.0);
                    }
                }
                let full = run.max(0.0);
                rise = rise.max(full - at_half);
                ln_k = ln_k.max(full);
            }
            if let Some(series) = &self.bwd[i] {
                let mut run = f64::NEG_INFINITY;
                let mut at_half = 0.0;
                for (t, &v) in series.iter().enumerate() {
                    run = run.max(v + (gamma + alpha) * t as f64);
                    if t == half {
                        at_half = run.max(0.0);
                    }
                }
                let full = run.max(0.0);
                rise = rise.max(full - at_half);
                ln_k = ln_k.max(full);
            }
            ln_k_max = ln_k_max.max(ln_k);
            tail_rise = tail_rise.max(rise);
            if s != 0 {
                slope_pts.push((s as f64, ln_k));
            }
        }
        // temperedness of the prefactor along the orbit, straight from logs
        let mut k_slope = 0.0f64;
        if !slope_pts.is_empty() {
            slope_pts.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap());
            let q = slope_pts.len().div_ceil(4).max(1);
            k_slope = slope_pts[slope_pts.len() - q..]
                .iter()
                .map(|(s, lnk)| (lnk / s).abs())
                .fold(0.0, f64::max);
        }
        BranchEval { bounded: tail_rise <= rise_tol && k_slope <= tau_temper, ln_k_max, tail_rise, k_slope }
    }

    /// Largest passing `alpha` on the resolution grid, or None.
    fn alpha_star(&self, gamma: f64, opts: &DichotomyOptions) -> Option<(f64, BranchEval)> {
        let pass = |alpha: f64| {
            let ev = self.evaluate(gamma, alpha, opts.tau_temper, opts.rise_tol);
            if ev.bounded {
                Some(ev)
            } else {
                None
            }
        };
        let first = pass(opts.alpha_min)?;
        let cap = opts.alpha_cap + gamma.abs();
        if let Some(ev) = pass(cap) {
            return Some((cap, ev));
        }
        let mut lo = opts.alpha_min;
        let mut lo_ev = first;
        let mut hi = cap;
        while hi - lo > opts.alpha_resolution {
            let mid = 0.5 * (lo + hi);
            match pass(mid) {
                Some(ev) => {
                    lo = mid;
                    lo_ev = ev;
                }
                None => hi = mid,
            }
        }
        Some((lo, lo_ev))
    }
}

/// Test one splitting for a non-uniform exponential dichotomy at rate
/// `gamma`, over the sampled orbit offsets of the anchor.
pub fn dichotomy_test(
    system: &CocycleSystem,
    gamma: f64,
    splitting: (&SubspaceFamily, &SubspaceFamily),
    omega: &OmegaPoint,
    sample_offsets: &[i64],
    horizon: i64,
    opts: &DichotomyOptions,
) -> Result<DichotomyVerdict> {
    if horizon < 4 {
        return Err(SpectraError::invalid("dichotomy test needs horizon >= 4"));
    }
    let candidate = SplittingCandidate {
        label: format!("{}|{}", splitting.0.label, splitting.1.label),
        contracting: splitting.0.clone(),
        expanding: splitting.1.clone(),
    };
    let series = build_branch_series(system, &candidate, omega, sample_offsets, horizon)?;
    Ok(verdict_for(&series, &candidate, gamma, sample_offsets, horizon, opts))
}

fn verdict_for(
    series: &BranchSeries,
    candidate: &SplittingCandidate,
    gamma: f64,
    sample_offsets: &[i64],
    horizon: i64,
    opts: &DichotomyOptions,
) -> DichotomyVerdict {
    match series.alpha_star(gamma, opts) {
        Some((alpha, ev)) => DichotomyVerdict {
            gamma,
            admits: true,
            alpha_star: alpha,
            projector_rank: candidate.contracting.dim_sub,
            k_slope: ev.k_slope,
            witnesses: DichotomyWitness {
                splitting: candidate.label.clone(),
                ln_k_max: ev.ln_k_max,
                tail_rise: ev.tail_rise,
                horizon,
                sample_offsets: sample_offsets.to_vec(),
            },
        },
        None => {
            let ev = series.evaluate(gamma, opts.alpha_min, opts.tau_temper, opts.rise_tol);
            DichotomyVerdict {
                gamma,
                admits: false,
                alpha_star: 0.0,
                projector_rank: candidate.contracting.dim_sub,
                k_slope: ev.k_slope,
                witnesses: DichotomyWitness {
                    splitting: candidate.label.clone(),
                    ln_k_max: ev.ln_k_max,
                    tail_rise: ev.tail_rise,
                    horizon,
                    sample_offsets: sample_offsets.to_vec(),
                },
            }
        }
    }
}

/// Scan result: per-rate verdicts plus the estimate of the dichotomy
/// spectrum as maximal closed intervals of failing rates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyScan {
    pub verdicts: Vec<DichotomyVerdict>,
    pub sigma_intervals: Vec<(f64, f64)>,
}

/// Scan the growth-rate grid: a rate admits a dichotomy when some
/// candidate splitting passes; the spectrum estimate is the closure of the
/// failing grid points merged into maximal intervals.
pub fn dichotomy_spectrum_scan(
    system: &CocycleSystem,
    gamma_grid: &[f64],
    candidates: &[SplittingCandidate],
    omega: &OmegaPoint,
    sample_offsets: &[i64],
    horizon: i64,
    opts: &DichotomyOptions,
) -> Result<DichotomyScan> {
    if gamma_grid.is_empty() {
        return Err(SpectraError::invalid("gamma grid must be nonempty"));
    }
    if candidates.is_empty() {
        return Err(SpectraError::invalid("dichotomy scan needs at least one candidate"));
    }
    let series: Vec<BranchSeries> = candidates
        .iter()
        .map(|c| build_branch_series(system, c, omega, sample_offsets, horizon))
        .collect::<Result<_>>()?;

    let verdicts: Vec<DichotomyVerdict> = gamma_grid
        .par_iter()
        .map(|&gamma| {
            let mut best: Option<DichotomyVerdict> = None;
            let mut closest: Option<DichotomyVerdict> = None;
            for (c, s) in candidates.iter().zip(series.iter()) {
                let v = verdict_for(s, c, gamma, sample_offsets, horizon, opts);
                if v.admits {
                    if best.as_ref().map(|b| v.alpha_star > b.alpha_star).unwrap_or(true) {
                        best = Some(v);
                    }
                } else if closest
                    .as_ref()
                    .map(|cst| v.witnesses.tail_rise < cst.witnesses.tail_rise)
                    .unwrap_or(true)
                {
                    closest = Some(v);
                }
            }
            best.or(closest).expect("at least one candidate evaluated")
        })
        .collect();

    let step = if gamma_grid.len() > 1 {
        gamma_grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    } else {
        1.0
    };
    let mut sigma_intervals: Vec<(f64, f64)> = Vec::new();
    for v in &verdicts {
        if v.admits {
            continue;
        }
        match sigma_intervals.last_mut() {
            Some((_, hi)) if v.gamma - *hi <= 1.5 * step => *hi = v.gamma,
            _ => sigma_intervals.push((v.gamma, v.gamma)),
        }
    }
    Ok(DichotomyScan { verdicts, sigma_intervals })
}

/// Candidate splittings induced by an estimated decomposition: one cut
/// between each pair of adjacent exponent clusters, plus the two trivial
/// splittings.
pub fn candidate_splittings(
    system: &CocycleSystem,
    decomposition: &MorseDecomposition,
    sample_offsets: &[i64],
    horizon: i64,
) -> Result<Vec<SplittingCandidate>> {
    let d = system.dim;
    let lo = sample_offsets.iter().copied().min().unwrap_or(0) - horizon;
    let hi = sample_offsets.iter().copied().max().unwrap_or(0) + horizon;
    let mut out = vec![
        SplittingCandidate {
            label: "full|zero".to_string(),
            contracting: SubspaceFamily::full(d),
            expanding: SubspaceFamily::trivial(d),
        },
        SplittingCandidate {
            label: "zero|full".to_string(),
            contracting: SubspaceFamily::trivial(d),
            expanding: SubspaceFamily::full(d),
        },
    ];
    let n = decomposition.n;
    for cut in 1..n {
        let fast_dim: usize = decomposition.anchor_bases[..cut].iter().map(|b| b.ncols()).sum();
        let slow_dim = d - fast_dim;
        let stack = |range: std::ops::Range<usize>| {
            let mut cols: Vec<DVector<f64>> = Vec::new();
            for b in &decomposition.anchor_bases[range] {
                for i in 0..b.ncols() {
                    cols.push(b.column(i).into_owned());
                }
            }
            let mut m = DMatrix::zeros(d, cols.len());
            for (i, c) in cols.iter().enumerate() {
                m.set_column(i, c);
            }
            m
        };
        let fast_seed = stack(0..cut);
        let slow_seed = stack(cut..n);
        let warmup = decomposition.sweep_warmup;
        let expanding = SubspaceFamily::swept_forward(
            &format!("fast-{cut}"),
            system,
            &decomposition.anchor,
            &fast_seed,
            (lo, hi),
            warmup,
        )?;
        let contracting = SubspaceFamily::swept_backward(
            &format!("slow-{cut}"),
            system,
            &decomposition.anchor,
            &slow_seed,
            (lo, hi),
            warmup,
        )?;
        out.push(SplittingCandidate {
            label: format!("cut-{cut} ({slow_dim}|{fast_dim})"),
            contracting,
            expanding,
        });
    }
    Ok(out)
}
