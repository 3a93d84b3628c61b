//! Registry of worked example systems with their expected spectral
//! results, shared by the test suite and the CLI.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::base::Driver;
use crate::cocycle::{BetaPartition, CocycleSystem, Generator};
use crate::error::{Result, SpectraError};
use crate::extreal::ExtReal;
use crate::subspaces::{FamilyFormula, SubspaceFamily};

/// Expected results attached to a scenario; every entry carries a
/// provenance note in `provenance` for the serialized report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpectedResults {
    /// Points the per-Morse-set intervals must cover (one per set).
    pub xi_points: Vec<f64>,
    /// Points the dichotomy-spectrum estimate must cover.
    pub sigma_points: Vec<f64>,
    /// Endpoints of the full-space interval.
    pub full_interval: Option<(ExtReal, ExtReal)>,
    /// Full-space interval of the companion baseline system, if any.
    pub baseline_full_interval: Option<(ExtReal, ExtReal)>,
    pub lyapunov: Vec<f64>,
    pub angle_collapse: bool,
    pub divergent_hi: bool,
    /// Minimum excess of the unrestricted-plan maximum over the restricted
    /// one, when the scenario exercises unrestricted sampling.
    pub unrestricted_gap_min: Option<f64>,
    pub tolerance: f64,
    pub provenance: Vec<(String, String)>,
}

impl ExpectedResults {
    fn empty(tolerance: f64) -> ExpectedResults {
        ExpectedResults {
            xi_points: vec![],
            sigma_points: vec![],
            full_interval: None,
            baseline_full_interval: None,
            lyapunov: vec![],
            angle_collapse: false,
            divergent_hi: false,
            unrestricted_gap_min: None,
            tolerance,
            provenance: vec![],
        }
    }
}

/// Analytic attractor/repeller families, for scenarios where they are
/// known in closed form.
#[derive(Debug, Clone)]
pub struct AnalyticFamilies {
    pub attractor: SubspaceFamily,
    pub repeller: SubspaceFamily,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub system: CocycleSystem,
    /// Companion unperturbed system, for the scalar ratio examples.
    pub baseline_system: Option<CocycleSystem>,
    pub expected: Option<ExpectedResults>,
    pub analytic: Option<AnalyticFamilies>,
}

/// Parameters accepted by `build_scenario`; unused fields are ignored by
/// scenarios that do not need them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub beta: f64,
    pub diag_a: f64,
    pub diag_b: f64,
    pub dim: usize,
    pub k_max: u32,
    pub custom: Option<CustomSystemSpec>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            beta: 2.0,
            diag_a: 2.0,
            diag_b: 0.5,
            dim: 2,
            k_max: 1_000_000,
            custom: None,
        }
    }
}

/// Inline system description: a driver plus a matrix table keyed by bins
/// of the state's uniform variate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CustomSystemSpec {
    pub dim: usize,
    pub driver: Driver,
    /// `(upper_bound, row-major matrix)` with increasing bounds ending at 1.
    pub bins: Vec<(f64, Vec<f64>)>,
}

pub const SCENARIO_NAMES: [&str; 7] = [
    "block",
    "coord-change",
    "bernoulli-beta",
    "rotation-beta",
    "const-diag",
    "identity",
    "custom",
];

pub fn list_scenarios() -> Vec<(&'static str, &'static str)> {
    vec![
        ("block", "circle rotation driving diag(beta, 1); two point spectra {0, ln beta}"),
        (
            "coord-change",
            "the block system conjugated by a tempered coordinate change whose \
             attractor and repeller angles collapse along the orbit",
        ),
        (
            "bernoulli-beta",
            "scalar ratio system over the Bernoulli shift with non-integrable log factor; \
             spectrum diverges",
        ),
        (
            "rotation-beta",
            "scalar ratio system over the circle with integrable log factor; restricted \
             sampling stays near 0, unrestricted sampling does not",
        ),
        ("const-diag", "constant diag(a, b); point spectra at ln a and ln b"),
        ("identity", "identity cocycle in dimension d; everything is {0}"),
        ("custom", "inline binned generator table from the run config"),
    ]
}

pub fn build_scenario(name: &str, params: &ScenarioParams) -> Result<Scenario> {
    match name {
        "block" => build_block(params),
        "coord-change" => build_coord_change(params),
        "bernoulli-beta" => build_bernoulli_beta(params),
        "rotation-beta" => build_rotation_beta(params),
        "const-diag" => build_const_diag(params),
        "identity" => build_identity(params),
        "custom" => build_custom(params),
        other => Err(SpectraError::UnknownScenario { name: other.to_string() }),
    }
}

fn build_block(params: &ScenarioParams) -> Result<Scenario> {
    let beta = params.beta;
    if !(beta > 1.0) {
        return Err(SpectraError::invalid(format!("block scenario needs beta > 1, got {beta}")));
    }
    let system = CocycleSystem::new(
        "block",
        Driver::golden_circle(),
        Generator::Constant(DMatrix::from_row_slice(2, 2, &[beta, 0.0, 0.0, 1.0])),
    )?;
    let lb = beta.ln();
    let mut expected = ExpectedResults::empty(0.05);
    expected.xi_points = vec![lb, 0.0];
    expected.sigma_points = vec![0.0, lb];
    expected.full_interval = Some((ExtReal(0.0), ExtReal(lb)));
    expected.lyapunov = vec![lb, 0.0];
    expected.provenance = vec![
        ("xi_points".into(), "closed form for the constant block generator".into()),
        ("sigma_points".into(), "spectral points of the constant block generator".into()),
        ("full_interval".into(), "interval between the two exponents".into()),
    ];
    let analytic = AnalyticFamilies {
        attractor: SubspaceFamily::constant("e1", DMatrix::from_column_slice(2, 1, &[1.0, 0.0]))?,
        repeller: SubspaceFamily::constant("e2", DMatrix::from_column_slice(2, 1, &[0.0, 1.0]))?,
    };
    Ok(Scenario {
        name: "block".into(),
        system,
        baseline_system: None,
        expected: Some(expected),
        analytic: Some(analytic),
    })
}

fn build_coord_change(params: &ScenarioParams) -> Result<Scenario> {
    let beta = params.beta;
    if !(beta > 1.0) {
        return Err(SpectraError::invalid("coord-change scenario needs beta > 1"));
    }
    let system = CocycleSystem::new(
        "coord-change",
        Driver::golden_circle(),
        Generator::CoordChangeBlock { beta },
    )?;
    let lb = beta.ln();
    let mut expected = ExpectedResults::empty(0.05);
    expected.xi_points = vec![lb, 0.0];
    expected.sigma_points = vec![0.0, lb];
    expected.full_interval = Some((ExtReal(0.0), ExtReal(lb)));
    expected.lyapunov = vec![lb, 0.0];
    expected.angle_collapse = true;
    expected.provenance = vec![
        (
            "xi_points".into(),
            "invariance of the point spectra under the tempered conjugation".into(),
        ),
        ("angle_collapse".into(), "attractor and repeller meet along orbit visits".into()),
    ];
    let analytic = AnalyticFamilies {
        attractor: SubspaceFamily::formula("span(1,1)", FamilyFormula::CoordChangeFast),
        repeller: SubspaceFamily::formula("span(e^w,e^{1-w})", FamilyFormula::CoordChangeSlow),
    };
    Ok(Scenario {
        name: "coord-change".into(),
        system,
        baseline_system: None,
        expected: Some(expected),
        analytic: Some(analytic),
    })
}

fn build_bernoulli_beta(params: &ScenarioParams) -> Result<Scenario> {
    let driver = Driver::bernoulli(vec![0.5, 0.5], 8)?;
    let system = CocycleSystem::new(
        "bernoulli-beta",
        driver.clone(),
        Generator::ScalarBetaRatio(BetaPartition::inverse_square(params.k_max)),
    )?;
    let baseline = CocycleSystem::new(
        "bernoulli-identity",
        driver,
        Generator::Constant(DMatrix::from_element(1, 1, 1.0)),
    )?;
    let mut expected = ExpectedResults::empty(0.05);
    expected.divergent_hi = true;
    expected.baseline_full_interval = Some((ExtReal(0.0), ExtReal(0.0)));
    expected.provenance = vec![
        ("divergent_hi".into(), "non-integrable log factor escapes every envelope".into()),
        ("baseline_full_interval".into(), "identity cocycle has zero growth exactly".into()),
    ];
    Ok(Scenario {
        name: "bernoulli-beta".into(),
        system,
        baseline_system: Some(baseline),
        expected: Some(expected),
        analytic: None,
    })
}

fn build_rotation_beta(_params: &ScenarioParams) -> Result<Scenario> {
    let driver = Driver::golden_circle();
    let system = CocycleSystem::new(
        "rotation-beta",
        driver.clone(),
        Generator::ScalarBetaRatio(BetaPartition::Dyadic),
    )?;
    let baseline = CocycleSystem::new(
        "rotation-identity",
        driver,
        Generator::Constant(DMatrix::from_element(1, 1, 1.0)),
    )?;
    let mut expected = ExpectedResults::empty(0.02);
    expected.full_interval = Some((ExtReal(0.0), ExtReal(0.0)));
    expected.unrestricted_gap_min = Some(0.5);
    expected.provenance = vec![
        (
            "full_interval".into(),
            "tempered ratio factor cancels at matched horizons, restricted plan".into(),
        ),
        (
            "unrestricted_gap_min".into(),
            "offsets far beyond the horizon reach large factor values".into(),
        ),
    ];
    Ok(Scenario {
        name: "rotation-beta".into(),
        system,
        baseline_system: Some(baseline),
        expected: Some(expected),
        analytic: None,
    })
}

fn build_const_diag(params: &ScenarioParams) -> Result<Scenario> {
    let (a, b) = (params.diag_a, params.diag_b);
    if !(a > 0.0 && b > 0.0) {
        return Err(SpectraError::invalid("const-diag scenario needs positive entries"));
    }
    let system = CocycleSystem::new(
        "const-diag",
        Driver::golden_circle(),
        Generator::Constant(DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])),
    )?;
    let (hi, lo) = (a.ln().max(b.ln()), a.ln().min(b.ln()));
    let mut expected = ExpectedResults::empty(0.05);
    expected.xi_points = vec![hi, lo];
    expected.sigma_points = vec![lo, hi];
    expected.full_interval = Some((ExtReal(lo), ExtReal(hi)));
    expected.lyapunov = vec![hi, lo];
    expected.provenance =
        vec![("sigma_points".into(), "logs of the constant diagonal entries".into())];
    Ok(Scenario {
        name: "const-diag".into(),
        system,
        baseline_system: None,
        expected: Some(expected),
        analytic: None,
    })
}

fn build_identity(params: &ScenarioParams) -> Result<Scenario> {
    let d = params.dim.max(1);
    let system = CocycleSystem::new(
        "identity",
        Driver::golden_circle(),
        Generator::Constant(DMatrix::identity(d, d)),
    )?;
    let mut expected = ExpectedResults::empty(0.02);
    expected.xi_points = vec![0.0];
    expected.sigma_points = vec![0.0];
    expected.full_interval = Some((ExtReal(0.0), ExtReal(0.0)));
    expected.lyapunov = vec![0.0; d];
    expected.provenance = vec![("xi_points".into(), "identity map has no growth".into())];
    Ok(Scenario {
        name: "identity".into(),
        system,
        baseline_system: None,
        expected: Some(expected),
        analytic: None,
    })
}

fn build_custom(params: &ScenarioParams) -> Result<Scenario> {
    let spec = params
        .custom
        .as_ref()
        .ok_or_else(|| SpectraError::invalid("custom scenario needs a generator table"))?;
    let bins: Vec<(f64, DMatrix<f64>)> = spec
        .bins
        .iter()
        .map(|(b, flat)| {
            if flat.len() != spec.dim * spec.dim {
                return Err(SpectraError::DimensionMismatch {
                    expected: spec.dim * spec.dim,
                    got: flat.len(),
                });
            }
            Ok((*b, DMatrix::from_row_slice(spec.dim, spec.dim, flat)))
        })
        .collect::<Result<_>>()?;
    let system = CocycleSystem::new("custom", spec.driver.clone(), Generator::Binned { bins })?;
    Ok(Scenario { name: "custom".into(), system, baseline_system: None, expected: None, analytic: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{sample_omega, theta_step};
    use crate::cocycle::{cocycle_evolve_scaled, coord_change_matrix, temperedness_slope};

    #[test]
    fn expected_values_of_the_registry() {
        let p = ScenarioParams::default();
        let block = build_scenario("block", &p).unwrap();
        let exp = block.expected.unwrap();
        assert_eq!(exp.xi_points, vec![2f64.ln(), 0.0]);
        assert_eq!(exp.sigma_points, vec![0.0, 2f64.ln()]);

        let cc = build_scenario("coord-change", &p).unwrap();
        let exp = cc.expected.unwrap();
        assert_eq!(
            exp.full_interval,
            Some((ExtReal(0.0), ExtReal(2f64.ln())))
        );
        assert!(exp.angle_collapse);

        let bb = build_scenario("bernoulli-beta", &p).unwrap();
        assert!(bb.expected.as_ref().unwrap().divergent_hi);
        assert!(bb.baseline_system.is_some());

        assert!(matches!(
            build_scenario("no-such", &p),
            Err(SpectraError::UnknownScenario { .. })
        ));
        let bad = ScenarioParams { beta: 0.5, ..p };
        assert!(matches!(
            build_scenario("block", &bad),
            Err(SpectraError::InvalidParams { .. })
        ));
    }

    #[test]
    fn every_scenario_system_obeys_the_cocycle_law() {
        let p = ScenarioParams::default();
        for name in ["block", "coord-change", "bernoulli-beta", "rotation-beta", "const-diag", "identity"] {
            let sc = build_scenario(name, &p).unwrap();
            let sys = &sc.system;
            let w = sample_omega(&sys.driver, 13);
            for &(t, s) in &[(5i64, -3i64), (8, 4), (-6, -2), (12, -12)] {
                let lhs = cocycle_evolve_scaled(sys, &w, t + s).unwrap();
                let mid = theta_step(&sys.driver, &w, s);
                let a = cocycle_evolve_scaled(sys, &mid, t).unwrap();
                let b = cocycle_evolve_scaled(sys, &w, s).unwrap();
                let prod = &a.m * &b.m;
                let pn = prod.norm();
                // compare directions and log scales separately
                let dir_err = (&prod / pn - &lhs.m / lhs.m.norm()).norm();
                let log_err = ((a.log_scale + b.log_scale + pn.ln())
                    - (lhs.log_scale + lhs.m.norm().ln()))
                .abs();
                assert!(
                    dir_err < 1e-8 && log_err < 1e-8,
                    "{name}: t={t} s={s} dir {dir_err:.2e} log {log_err:.2e}"
                );
            }
        }
    }

    #[test]
    fn coordinate_change_is_tempered_at_long_horizon() {
        let sys = build_scenario("coord-change", &ScenarioParams::default()).unwrap().system;
        let w = sample_omega(&sys.driver, 21);
        let horizon = 10_000i64;
        let mut fwd_series = Vec::new();
        let mut inv_series = Vec::new();
        for t in -horizon..=horizon {
            let pos = crate::base::circle_position(&theta_step(&sys.driver, &w, t));
            let h = coord_change_matrix(pos);
            let hinv = h.clone().try_inverse().unwrap();
            fwd_series.push((t as f64, crate::cocycle::operator_norm(&h)));
            inv_series.push((t as f64, crate::cocycle::operator_norm(&hinv)));
        }
        assert!(temperedness_slope(&fwd_series).unwrap() <= 0.02);
        assert!(temperedness_slope(&inv_series).unwrap() <= 0.02);
    }

    #[test]
    fn bernoulli_beta_log_mean_diverges_with_truncation() {
        let driver = Driver::bernoulli(vec![0.5, 0.5], 8).unwrap();
        let mut prev = 0.0;
        for k_max in [100u32, 10_000, 1_000_000] {
            let part = BetaPartition::inverse_square(k_max);
            let w0 = sample_omega(&driver, 3);
            let n = 20_000i64;
            let mean = (0..n)
                .map(|t| part.ln_beta(&driver, &theta_step(&driver, &w0, t)))
                .sum::<f64>()
                / n as f64;
            assert!(mean > prev, "k_max {k_max}: mean {mean} <= {prev}");
            prev = mean;
        }
        // harmonic-like growth: the largest truncation should be well past 6
        assert!(prev > 6.0, "mean {prev}");
    }

    #[test]
    fn dyadic_cells_follow_the_fixed_point_state() {
        use crate::cocycle::dyadic_cell_index;
        let cases = [
            (0.0, 1u32),
            (0.25, 1),
            (0.5, 2),
            (0.6, 2),
            (0.75, 3),
            (0.9, 4),
            (0.99, 7),
        ];
        for (x, k) in cases {
            let w = crate::base::OmegaPoint::Circle { frac: (x * 2f64.powi(64)) as u64 };
            assert_eq!(dyadic_cell_index(&w), k, "x = {x}");
        }
    }

    #[test]
    fn custom_scenario_round_trip() {
        let spec = CustomSystemSpec {
            dim: 2,
            driver: Driver::golden_circle(),
            bins: vec![
                (0.5, vec![2.0, 0.0, 0.0, 1.0]),
                (1.0, vec![1.0, 0.0, 0.0, 2.0]),
            ],
        };
        let params = ScenarioParams { custom: Some(spec), ..Default::default() };
        let sc = build_scenario("custom", &params).unwrap();
        assert_eq!(sc.system.dim, 2);
        let w = sample_omega(&sc.system.driver, 0);
        assert!(cocycle_evolve_scaled(&sc.system, &w, 10).is_ok());
    }
}
