//! Linear cocycles over a driver: one-step generators, renormalized
//! long products, and growth/temperedness diagnostics.
//!
//! Long products are never held as raw matrices. Evolution tracks a
//! norm-one direction matrix together with an accumulated log-scale, so
//! horizons far beyond double-precision range stay representable; public
//! matrices are reconstituted only when the scale permits.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::base::{circle_position, theta_step, uniform_variate, Driver, OmegaPoint};
use crate::error::{Result, SpectraError};

/// `|det G|` below this (in absolute scale) is treated as singular.
pub const SINGULAR_DET_TOL: f64 = 1e-12;

const LOG_SINGULAR: f64 = -27.631021115928547; // ln(1e-12)

/// Partition-valued random variable used by the scalar ratio systems:
/// `ln beta` is constant on each cell of a partition of the base.
#[derive(Debug, Clone)]
pub enum BetaPartition {
    /// Cells `U_k` of mass `6/(pi^2 k^2)`, `k = 1..=k_max` (tail mass folded
    /// into the last cell), with `ln beta = k` on `U_k`. Heavy-tailed and
    /// non-integrable in the log; realized through the state's uniform
    /// variate and a precomputed cumulative table.
    InverseSquare { k_max: u32, cdf: Arc<Vec<f64>> },
    /// Dyadic cells `U_k = [1 - 2^{1-k}, 1 - 2^{-k})` on the circle with
    /// `ln beta = ln k`; integrable in the log.
    Dyadic,
}

impl BetaPartition {
    pub fn inverse_square(k_max: u32) -> BetaPartition {
        let mut cdf = Vec::with_capacity(k_max as usize);
        let c = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
        let mut acc = 0.0;
        for k in 1..=k_max {
            acc += c / (k as f64 * k as f64);
            cdf.push(acc);
        }
        BetaPartition::InverseSquare { k_max, cdf: Arc::new(cdf) }
    }

    /// `ln beta` at the given state.
    pub fn ln_beta(&self, driver: &Driver, omega: &OmegaPoint) -> f64 {
        match self {
            BetaPartition::InverseSquare { k_max, cdf } => {
                let u = uniform_variate(driver, omega);
                let k = match cdf.binary_search_by(|p| p.partial_cmp(&u).unwrap()) {
                    Ok(i) => i + 2, // u exactly on a boundary opens the next cell
                    Err(i) => i + 1,
                };
                (k.min(*k_max as usize)) as f64
            }
            BetaPartition::Dyadic => (dyadic_cell_index(omega) as f64).ln(),
        }
    }
}

/// Index k of the dyadic cell `[1 - 2^{1-k}, 1 - 2^{-k})` containing the
/// circle state; exact in fixed-point arithmetic.
pub fn dyadic_cell_index(omega: &OmegaPoint) -> u32 {
    let frac = match omega {
        OmegaPoint::Circle { frac } => *frac,
        _ => panic!("dyadic_cell_index on a non-circle state"),
    };
    let z: u128 = (1u128 << 64) - frac as u128; // 1 - omega, in units of 2^-64
    let m = 127 - z.leading_zeros(); // floor(log2 z)
    if z == 1u128 << m {
        65 - m
    } else {
        64 - m
    }
}

/// One-step generator map `omega -> G(omega)`.
#[derive(Clone)]
pub enum Generator {
    Constant(DMatrix<f64>),
    /// `H(theta_1 omega) diag(beta, 1) H(omega)^{-1}` with
    /// `H(w) = [[1, e^w], [1, e^{1-w}]]` on the circle.
    CoordChangeBlock { beta: f64 },
    /// Scalar system `G(omega) = beta(theta_1 omega) / beta(omega)`,
    /// evaluated in log scale so huge ratios stay finite.
    ScalarBetaRatio(BetaPartition),
    /// Piecewise-constant in the state's uniform variate: `bins` holds
    /// `(upper_bound, matrix)` with increasing bounds, last bound >= 1.
    Binned { bins: Vec<(f64, DMatrix<f64>)> },
    Custom(Arc<dyn Fn(&Driver, &OmegaPoint) -> DMatrix<f64> + Send + Sync>),
}

impl std::fmt::Debug for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Generator::Constant(m) => write!(f, "Constant({}x{})", m.nrows(), m.ncols()),
            Generator::CoordChangeBlock { beta } => write!(f, "CoordChangeBlock(beta={beta})"),
            Generator::ScalarBetaRatio(_) => write!(f, "ScalarBetaRatio"),
            Generator::Binned { bins } => write!(f, "Binned({} bins)", bins.len()),
            Generator::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// The coordinate change of the conjugated block system.
pub fn coord_change_matrix(w: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, w.exp(), 1.0, (1.0 - w).exp()])
}

/// A linear random dynamical system `Phi(t, omega)` generated by one-step
/// matrices over a driver.
#[derive(Debug, Clone)]
pub struct CocycleSystem {
    pub name: String,
    pub dim: usize,
    pub driver: Driver,
    generator: Generator,
}

impl CocycleSystem {
    pub fn new(name: &str, driver: Driver, generator: Generator) -> Result<CocycleSystem> {
        let dim = match &generator {
            Generator::Constant(m) => {
                if m.nrows() != m.ncols() {
                    return Err(SpectraError::invalid("generator matrix must be square"));
                }
                m.nrows()
            }
            Generator::CoordChangeBlock { beta } => {
                if !(*beta > 1.0) {
                    return Err(SpectraError::invalid("coord-change block needs beta > 1"));
                }
                2
            }
            Generator::ScalarBetaRatio(_) => 1,
            Generator::Binned { bins } => {
                let d = bins
                    .first()
                    .map(|(_, m)| m.nrows())
                    .ok_or_else(|| SpectraError::invalid("binned generator needs >= 1 bin"))?;
                if bins.iter().any(|(_, m)| m.nrows() != d || m.ncols() != d) {
                    return Err(SpectraError::invalid("binned matrices must share a square shape"));
                }
                if bins.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(SpectraError::invalid("bin bounds must be increasing"));
                }
                if bins.last().map(|(b, _)| *b < 1.0).unwrap_or(true) {
                    return Err(SpectraError::invalid("last bin bound must reach 1"));
                }
                d
            }
            Generator::Custom(_) => {
                return Err(SpectraError::invalid(
                    "custom generators must be built with new_custom (dimension unknown)",
                ));
            }
        };
        let sys = CocycleSystem { name: name.to_string(), dim, driver, generator };
        sys.spot_check_invertibility()?;
        Ok(sys)
    }

    pub fn new_custom(
        name: &str,
        driver: Driver,
        dim: usize,
        f: Arc<dyn Fn(&Driver, &OmegaPoint) -> DMatrix<f64> + Send + Sync>,
    ) -> Result<CocycleSystem> {
        let sys = CocycleSystem {
            name: name.to_string(),
            dim,
            driver,
            generator: Generator::Custom(f),
        };
        sys.spot_check_invertibility()?;
        Ok(sys)
    }

    fn spot_check_invertibility(&self) -> Result<()> {
        for seed in 0..8u64 {
            let w = crate::base::sample_omega(&self.driver, seed);
            let _ = self.generator_scaled(&w)?;
        }
        Ok(())
    }

    /// One-step matrix as `(direction, log_scale)`: `G = e^{log_scale} M`.
    pub fn generator_scaled(&self, omega: &OmegaPoint) -> Result<(DMatrix<f64>, f64)> {
        let (m, s) = match &self.generator {
            Generator::Constant(g) => (g.clone(), 0.0),
            Generator::CoordChangeBlock { beta } => {
                let w0 = circle_position(omega);
                let w1 = circle_position(&theta_step(&self.driver, omega, 1));
                assert!(
                    w0 != 0.5 && w1 != 0.5,
                    "orbit hit the measure-zero discontinuity of the coordinate change"
                );
                let h1 = coord_change_matrix(w1);
                let h0inv = coord_change_inverse(w0);
                let core = DMatrix::from_row_slice(2, 2, &[*beta, 0.0, 0.0, 1.0]);
                (h1 * core * h0inv, 0.0)
            }
            Generator::ScalarBetaRatio(partition) => {
                let next = theta_step(&self.driver, omega, 1);
                let delta = partition.ln_beta(&self.driver, &next)
                    - partition.ln_beta(&self.driver, omega);
                (DMatrix::from_element(1, 1, 1.0), delta)
            }
            Generator::Binned { bins } => {
                let u = uniform_variate(&self.driver, omega);
                let idx = bins
                    .iter()
                    .position(|(b, _)| u < *b)
                    .unwrap_or(bins.len() - 1);
                (bins[idx].1.clone(), 0.0)
            }
            Generator::Custom(f) => (f(&self.driver, omega), 0.0),
        };
        let log_det = m.determinant().abs().ln() + self.dim as f64 * s;
        if !log_det.is_finite() || log_det < LOG_SINGULAR {
            return Err(SpectraError::SingularGenerator { step: 0, log_det });
        }
        Ok((m, s))
    }
}

fn coord_change_inverse(w: f64) -> DMatrix<f64> {
    let (ew, e1w) = (w.exp(), (1.0 - w).exp());
    let det = e1w - ew;
    DMatrix::from_row_slice(2, 2, &[e1w / det, -ew / det, -1.0 / det, 1.0 / det])
}

/// A matrix held as `e^{log_scale} * m` with `|m|_F = 1` after renorm.
#[derive(Debug, Clone)]
pub struct ScaledMatrix {
    pub m: DMatrix<f64>,
    pub log_scale: f64,
}

impl ScaledMatrix {
    pub fn identity(d: usize) -> ScaledMatrix {
        ScaledMatrix { m: DMatrix::identity(d, d), log_scale: 0.0 }
    }

    fn renormalize(&mut self) -> Result<()> {
        let f = self.m.norm();
        if !(f > 0.0) || !f.is_finite() {
            return Err(SpectraError::SingularGenerator { step: 0, log_det: f64::NEG_INFINITY });
        }
        self.m /= f;
        self.log_scale += f.ln();
        Ok(())
    }

    /// log of the operator norm of the represented matrix.
    pub fn log_op_norm(&self) -> f64 {
        self.log_scale + operator_norm(&self.m).ln()
    }

    pub fn reconstitute(&self) -> Result<DMatrix<f64>> {
        if self.log_scale.abs() > 700.0 {
            return Err(SpectraError::NumericOverflow { log_scale: self.log_scale });
        }
        Ok(&self.m * self.log_scale.exp())
    }
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Walks an orbit applying one-step factors on either side of the anchor.
pub struct OrbitWalker<'a> {
    system: &'a CocycleSystem,
    anchor: OmegaPoint,
    fwd_pos: i64,
    fwd_point: OmegaPoint,
    bwd_pos: i64,
    bwd_point: OmegaPoint,
}

impl<'a> OrbitWalker<'a> {
    pub fn new(system: &'a CocycleSystem, anchor: &OmegaPoint) -> OrbitWalker<'a> {
        OrbitWalker {
            system,
            anchor: anchor.clone(),
            fwd_pos: 0,
            fwd_point: anchor.clone(),
            bwd_pos: 0,
            bwd_point: anchor.clone(),
        }
    }

    pub fn anchor(&self) -> &OmegaPoint {
        &self.anchor
    }

    /// Factor for the step `fwd_pos -> fwd_pos + 1`.
    pub fn step_forward(&mut self) -> Result<(DMatrix<f64>, f64)> {
        let g = self.system.generator_scaled(&self.fwd_point).map_err(|e| match e {
            SpectraError::SingularGenerator { log_det, .. } => {
                SpectraError::SingularGenerator { step: self.fwd_pos, log_det }
            }
            other => other,
        })?;
        self.fwd_point = theta_step(&self.system.driver, &self.fwd_point, 1);
        self.fwd_pos += 1;
        Ok(g)
    }

    /// Inverse factor for the step `bwd_pos -> bwd_pos - 1`.
    pub fn step_backward(&mut self) -> Result<(DMatrix<f64>, f64)> {
        self.bwd_point = theta_step(&self.system.driver, &self.bwd_point, -1);
        self.bwd_pos -= 1;
        let (g, s) = self.system.generator_scaled(&self.bwd_point).map_err(|e| match e {
            SpectraError::SingularGenerator { log_det, .. } => {
                SpectraError::SingularGenerator { step: self.bwd_pos, log_det }
            }
            other => other,
        })?;
        let inv = g.clone().try_inverse().ok_or(SpectraError::SingularGenerator {
            step: self.bwd_pos,
            log_det: f64::NEG_INFINITY,
        })?;
        Ok((inv, -s))
    }
}

/// `Phi(t, omega)` in scaled form.
pub fn cocycle_evolve_scaled(
    system: &CocycleSystem,
    omega: &OmegaPoint,
    t: i64,
) -> Result<ScaledMatrix> {
    let mut acc = ScaledMatrix::identity(system.dim);
    let mut walker = OrbitWalker::new(system, omega);
    for _ in 0..t.abs() {
        let (g, s) = if t >= 0 { walker.step_forward()? } else { walker.step_backward()? };
        acc.m = &g * &acc.m;
        acc.log_scale += s;
        acc.renormalize()?;
    }
    Ok(acc)
}

/// `Phi(t, omega)` as a plain matrix; errs when the scale cannot be held
/// in double precision.
pub fn cocycle_evolve(system: &CocycleSystem, omega: &OmegaPoint, t: i64) -> Result<DMatrix<f64>> {
    cocycle_evolve_scaled(system, omega, t)?.reconstitute()
}

/// Evolve a single vector: returns the unit direction of `Phi(t, omega) x`
/// and `ln |Phi(t, omega) x| - ln |x|`.
pub fn evolve_vector_log(
    system: &CocycleSystem,
    omega: &OmegaPoint,
    t: i64,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let n = x.norm();
    if !(n > crate::projective::ZERO_VECTOR_TOL) {
        return Err(SpectraError::ZeroVector { norm: n });
    }
    let mut dir = x / n;
    let mut log = 0.0;
    let mut walker = OrbitWalker::new(system, omega);
    for _ in 0..t.abs() {
        let (g, s) = if t >= 0 { walker.step_forward()? } else { walker.step_backward()? };
        dir = &g * &dir;
        let f = dir.norm();
        if !(f > 0.0) || !f.is_finite() {
            return Err(SpectraError::SingularGenerator { step: 0, log_det: f64::NEG_INFINITY });
        }
        dir /= f;
        log += f.ln() + s;
    }
    Ok((dir, log))
}

/// `ln |Phi(s, omega) x| - ln |x|` for every `s` in `[s_lo, s_hi]`,
/// computed in two renormalized sweeps. Index `i` holds `s = s_lo + i`.
pub fn log_vector_norms(
    system: &CocycleSystem,
    omega: &OmegaPoint,
    x: &DVector<f64>,
    s_lo: i64,
    s_hi: i64,
) -> Result<Vec<f64>> {
    assert!(s_lo <= 0 && s_hi >= 0 && s_lo <= s_hi);
    let n = x.norm();
    if !(n > crate::projective::ZERO_VECTOR_TOL) {
        return Err(SpectraError::ZeroVector { norm: n });
    }
    let x0 = x / n;
    let len = (s_hi - s_lo + 1) as usize;
    let mut out = vec![0.0; len];
    let idx = |s: i64| (s - s_lo) as usize;

    let mut walker = OrbitWalker::new(system, omega);
    let mut dir = x0.clone();
    let mut log = 0.0;
    for s in 1..=s_hi {
        let (g, gs) = walker.step_forward()?;
        dir = &g * &dir;
        let f = dir.norm();
        if !(f > 0.0) || !f.is_finite() {
            return Err(SpectraError::SingularGenerator { step: s, log_det: f64::NEG_INFINITY });
        }
        dir /= f;
        log += f.ln() + gs;
        out[idx(s)] = log;
    }

    let mut walker = OrbitWalker::new(system, omega);
    let mut dir = x0;
    let mut log = 0.0;
    for s in (s_lo..0).rev() {
        let (g, gs) = walker.step_backward()?;
        dir = &g * &dir;
        let f = dir.norm();
        if !(f > 0.0) || !f.is_finite() {
            return Err(SpectraError::SingularGenerator { step: s, log_det: f64::NEG_INFINITY });
        }
        dir /= f;
        log += f.ln() + gs;
        out[idx(s)] = log;
    }
    Ok(out)
}

/// `ln |Phi(t, omega)|` for all `t` in `[-horizon, horizon]`; index
/// `i` holds `t = i - horizon`.
pub fn log_operator_norms(
    system: &CocycleSystem,
    omega: &OmegaPoint,
    horizon: i64,
) -> Result<Vec<f64>> {
    assert!(horizon >= 0);
    let len = (2 * horizon + 1) as usize;
    let mut out = vec![0.0; len];
    let idx = |t: i64| (t + horizon) as usize;
    let mut walker = OrbitWalker::new(system, omega);
    let mut acc = ScaledMatrix::identity(system.dim);
    for t in 1..=horizon {
        let (g, s) = walker.step_forward()?;
        acc.m = &g * &acc.m;
        acc.log_scale += s;
        acc.renormalize()?;
        out[idx(t)] = acc.log_op_norm();
    }
    let mut walker = OrbitWalker::new(system, omega);
    let mut acc = ScaledMatrix::identity(system.dim);
    for t in (-horizon..0).rev() {
        let (g, s) = walker.step_backward()?;
        acc.m = &g * &acc.m;
        acc.log_scale += s;
        acc.renormalize()?;
        out[idx(t)] = acc.log_op_norm();
    }
    Ok(out)
}

/// Exponential growth diagnostics for a cocycle: the sampled bounded-growth
/// rate, per-sample log prefactors at a trial rate, and the temperedness
/// slope of the prefactor along orbits.
#[derive(Debug, Clone)]
pub struct GrowthFit {
    pub a_hat: f64,
    pub trial_rate: f64,
    pub log_k_samples: Vec<(usize, f64)>,
    pub tempered_slope: f64,
}

fn log_k_at(norms: &[f64], horizon: i64, rate: f64) -> f64 {
    let mut best = 0.0f64;
    for (i, &v) in norms.iter().enumerate() {
        let t = i as i64 - horizon;
        best = best.max(v - rate * t.abs() as f64);
    }
    best
}

/// Fit the bounded-growth envelope `|Phi(t, omega)| <= K(omega) e^{a|t|}`
/// over the sampled points and horizon.
pub fn bounded_growth_fit(
    system: &CocycleSystem,
    samples: &[OmegaPoint],
    horizon: i64,
    trial_rate: Option<f64>,
) -> Result<GrowthFit> {
    if horizon < 10 {
        return Err(SpectraError::invalid("growth fit needs horizon >= 10"));
    }
    if samples.is_empty() {
        return Err(SpectraError::invalid("growth fit needs at least one sample"));
    }
    let mut a_hat = 0.0f64;
    let mut all_norms = Vec::with_capacity(samples.len());
    for omega in samples {
        let norms = log_operator_norms(system, omega, horizon)?;
        for (i, &v) in norms.iter().enumerate() {
            let t = i as i64 - horizon;
            if t != 0 {
                a_hat = a_hat.max(v / t.abs() as f64);
            }
        }
        all_norms.push(norms);
    }
    let rate = trial_rate.unwrap_or(a_hat);
    let log_k_samples: Vec<(usize, f64)> = all_norms
        .iter()
        .enumerate()
        .map(|(i, norms)| (i, log_k_at(norms, horizon, rate)))
        .collect();
    let mut tempered_slope = 0.0f64;
    for omega in samples {
        for sign in [-1i64, 1] {
            let shifted = theta_step(&system.driver, omega, sign * horizon);
            let norms = log_operator_norms(system, &shifted, horizon)?;
            let lk = log_k_at(&norms, horizon, rate);
            tempered_slope = tempered_slope.max(lk / horizon as f64);
        }
    }
    Ok(GrowthFit { a_hat, trial_rate: rate, log_k_samples, tempered_slope })
}

/// Largest tail slope `|ln x_t / t|` over the last quartile of `|t|`; a
/// value at or below the temperedness threshold is read as "tempered at
/// this horizon".
pub fn temperedness_slope(series: &[(f64, f64)]) -> Result<f64> {
    if series.is_empty() {
        return Err(SpectraError::invalid("temperedness slope of an empty series"));
    }
    for (i, &(_, x)) in series.iter().enumerate() {
        if !(x > 0.0) {
            return Err(SpectraError::NonPositiveValue { index: i });
        }
    }
    let mut pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t != 0.0)
        .map(|&(t, x)| (t, x))
        .collect();
    if pts.is_empty() {
        return Ok(0.0);
    }
    pts.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap());
    let q = (pts.len().div_ceil(4)).max(1);
    Ok(pts[pts.len() - q..]
        .iter()
        .map(|(t, x)| (x.ln() / t).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::sample_omega;
    use crate::rng::{stream_rng, unit_sphere_vector};
    use nalgebra::dmatrix;
    use rand::Rng;

    pub(crate) fn constant_system(name: &str, m: DMatrix<f64>) -> CocycleSystem {
        CocycleSystem::new(name, Driver::golden_circle(), Generator::Constant(m)).unwrap()
    }

    #[test]
    fn constant_diagonal_powers() {
        let sys = constant_system("diag", dmatrix![2.0, 0.0; 0.0, 1.0]);
        let w = sample_omega(&sys.driver, 0);
        let m = cocycle_evolve(&sys, &w, 3).unwrap();
        assert!((m - dmatrix![8.0, 0.0; 0.0, 1.0]).norm() < 1e-12);
        let id = cocycle_evolve(&sys, &w, 0).unwrap();
        assert!((id - DMatrix::<f64>::identity(2, 2)).norm() == 0.0);
    }

    fn random_invertible_system(seed: u64) -> CocycleSystem {
        // piecewise-constant over 4 bins of the circle, each well-conditioned
        let mut rng = stream_rng(seed, &[77]);
        let mut bins = Vec::new();
        for i in 0..4 {
            loop {
                let m = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.5..1.5f64));
                if m.determinant().abs() > 0.2 {
                    bins.push(((i + 1) as f64 / 4.0, m));
                    break;
                }
            }
        }
        CocycleSystem::new("random-binned", Driver::golden_circle(), Generator::Binned { bins })
            .unwrap()
    }

    #[test]
    fn cocycle_law_on_random_family() {
        let sys = random_invertible_system(4);
        let w = sample_omega(&sys.driver, 9);
        // Phi(2, omega) against Phi(5, theta_{-3} omega) Phi(-3, omega)
        let lhs = cocycle_evolve(&sys, &w, 2).unwrap();
        let shifted = theta_step(&sys.driver, &w, -3);
        let rhs = cocycle_evolve(&sys, &shifted, 5).unwrap() * cocycle_evolve(&sys, &w, -3).unwrap();
        assert!((&lhs - &rhs).norm() / lhs.norm() <= 1e-8);
    }

    #[test]
    fn inverse_composition_is_identity() {
        for seed in 0..5 {
            let sys = random_invertible_system(seed);
            let w = sample_omega(&sys.driver, seed ^ 0xfeed);
            for t in [1i64, 7, 33, 100] {
                let fwd = cocycle_evolve_scaled(&sys, &w, t).unwrap();
                let shifted = theta_step(&sys.driver, &w, t);
                let bwd = cocycle_evolve_scaled(&sys, &shifted, -t).unwrap();
                let prod = &bwd.m * &fwd.m * (bwd.log_scale + fwd.log_scale).exp();
                assert!(
                    (prod - DMatrix::<f64>::identity(2, 2)).norm() <= 1e-8,
                    "seed {seed} t {t}"
                );
                // submultiplicativity of the norms around the identity
                assert!(fwd.log_op_norm() + bwd.log_op_norm() >= -1e-8);
            }
        }
    }

    #[test]
    fn operator_norm_known_values() {
        assert!((operator_norm(&DMatrix::identity(3, 3)) - 1.0).abs() < 1e-14);
        assert!((operator_norm(&dmatrix![2.0, 0.0; 0.0, 0.5]) - 2.0).abs() < 1e-14);
        assert!((operator_norm(&dmatrix![0.0, 1.0; 0.0, 0.0]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_generator_is_reported() {
        let res = CocycleSystem::new(
            "sing",
            Driver::golden_circle(),
            Generator::Constant(dmatrix![1.0, 0.0; 0.0, 0.0]),
        );
        assert!(matches!(res, Err(SpectraError::SingularGenerator { .. })));
    }

    #[test]
    fn long_products_do_not_overflow() {
        let sys = constant_system("big", dmatrix![2.0, 0.0; 0.0, 0.5]);
        let w = sample_omega(&sys.driver, 0);
        let sc = cocycle_evolve_scaled(&sys, &w, 5_000).unwrap();
        assert!((sc.log_op_norm() - 5_000.0 * 2f64.ln()).abs() < 1e-6);
        assert!(matches!(
            cocycle_evolve(&sys, &w, 5_000),
            Err(SpectraError::NumericOverflow { .. })
        ));
    }

    #[test]
    fn growth_fit_constant_diag() {
        let sys = constant_system("diag", dmatrix![2.0, 0.0; 0.0, 0.5]);
        let samples: Vec<_> = (0..4).map(|s| sample_omega(&sys.driver, s)).collect();
        let fit = bounded_growth_fit(&sys, &samples, 50, None).unwrap();
        assert!((fit.a_hat - 2f64.ln()).abs() <= 0.01, "a_hat {}", fit.a_hat);
        let fit200 = bounded_growth_fit(&sys, &samples, 200, None).unwrap();
        assert!((fit200.a_hat - 2f64.ln()).abs() <= 0.02);
    }

    #[test]
    fn growth_fit_identity() {
        let sys = constant_system("id", DMatrix::identity(2, 2));
        let samples: Vec<_> = (0..3).map(|s| sample_omega(&sys.driver, s)).collect();
        let fit = bounded_growth_fit(&sys, &samples, 50, None).unwrap();
        assert_eq!(fit.a_hat, 0.0);
        assert!(fit.log_k_samples.iter().all(|&(_, k)| k == 0.0));
        assert_eq!(fit.tempered_slope, 0.0);
    }

    #[test]
    fn temperedness_slope_examples() {
        // constant series: slope decays with the horizon
        let series: Vec<(f64, f64)> = (-100..=100).map(|t| (t as f64, 5.0)).collect();
        let s100 = temperedness_slope(&series).unwrap();
        let long: Vec<(f64, f64)> = (-1000..=1000).map(|t| (t as f64, 5.0)).collect();
        let s1000 = temperedness_slope(&long).unwrap();
        assert!(s100 < 0.03 && s1000 < s100);

        // exact exponential: slope equals the rate
        let exp_series: Vec<(f64, f64)> =
            (1..=200).map(|t| (t as f64, (0.1 * t as f64).exp())).collect();
        assert!((temperedness_slope(&exp_series).unwrap() - 0.1).abs() < 1e-12);

        // subexponential growth: slope like ln(T)/T
        let sub: Vec<(f64, f64)> = (-400i64..=400)
            .filter(|&t| t != 0)
            .map(|t| (t as f64, t.abs() as f64 + 1.0))
            .collect();
        let s = temperedness_slope(&sub).unwrap();
        assert!(s < 0.02 && s > 0.0, "slope {s}");

        let bad = vec![(1.0, 1.0), (2.0, 0.0)];
        assert!(matches!(
            temperedness_slope(&bad),
            Err(SpectraError::NonPositiveValue { index: 1 })
        ));
    }

    #[test]
    fn vector_norm_sweep_matches_single_evolutions() {
        let sys = random_invertible_system(11);
        let w = sample_omega(&sys.driver, 5);
        let mut rng = stream_rng(2, &[3]);
        let x = unit_sphere_vector(&mut rng, 2);
        let sweep = log_vector_norms(&sys, &w, &x, -20, 30).unwrap();
        for s in [-20i64, -7, 0, 13, 30] {
            let (_, log) = evolve_vector_log(&sys, &w, s, &x).unwrap();
            assert!((sweep[(s + 20) as usize] - log).abs() < 1e-9, "s={s}");
        }
    }
}
