//! Batch orchestration: build the scenario, run the requested analyses in
//! a fixed order (growth, lyapunov, morse, dichotomy, attraction), compare
//! against the scenario's expected results, and emit the bundle.

use std::time::Instant;

use crate::base::sample_omega;
use crate::cocycle::{bounded_growth_fit, CocycleSystem};
use crate::config::{AnalysisKind, RunConfig};
use crate::error::Result;
use crate::extreal::ExtReal;
use crate::morse::{finest_morse_estimate, FinestMorseResult, MorseParams};
use crate::report::{
    interval_string, AngleReport, Comparison, DichotomyReport, GrowthReport, LyapunovReport,
    MorseReport, ResultBundle, RunMeta, UnrestrictedReport,
};
use crate::scenarios::{build_scenario, ExpectedResults};
use crate::spectra::{
    candidate_splittings, dichotomy_spectrum_scan, full_space_interval, lyapunov_spectrum_qr,
    DichotomyOptions, SamplingPlan, SpectrumInterval, TRule,
};
use crate::subspaces::{gap_temperedness, min_separation_angle};

/// Run the configured analyses on `workers` threads (`None` for the rayon
/// default). Results are independent of the worker count.
pub fn run(config: &RunConfig, workers: Option<usize>) -> Result<ResultBundle> {
    config.validate()?;
    match workers {
        None => run_inner(config),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| crate::error::SpectraError::config(format!("thread pool: {e}")))?;
            pool.install(|| run_inner(config))
        }
    }
}

fn run_inner(config: &RunConfig) -> Result<ResultBundle> {
    let started = Instant::now();
    let scenario = build_scenario(&config.scenario.name, &config.scenario.params)?;
    let system = &scenario.system;
    let anchor = sample_omega(&system.driver, config.seed);

    let plan = SamplingPlan {
        t_grid: config.effective_t_grid(),
        t_rule: TRule::SymmetricFractions,
        x_per_fiber: config.x_per_fiber,
        allow_unrestricted: false,
        divergence_coeff: config.divergence_coeff,
    };

    let wants = |k: AnalysisKind| config.outputs.contains(&k);
    let mut bundle = ResultBundle {
        meta: RunMeta {
            scenario: scenario.name.clone(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_ms: 0,
        },
        growth: None,
        lyapunov: None,
        morse: None,
        dichotomy: None,
        attraction: None,
        full_interval: None,
        baseline_full_interval: None,
        angle: None,
        unrestricted: None,
        comparisons: Vec::new(),
        overall_pass: true,
    };

    if wants(AnalysisKind::Growth) {
        let horizon = config.t_max.min(1000).max(10);
        let samples: Vec<_> = (0..config.n_omega.min(8) as u64)
            .map(|i| sample_omega(&system.driver, config.seed ^ (0x9e1 + i)))
            .collect();
        let fit = bounded_growth_fit(system, &samples, horizon, None)?;
        bundle.growth = Some(GrowthReport {
            horizon,
            a_hat: fit.a_hat,
            trial_rate: fit.trial_rate,
            tempered_slope: fit.tempered_slope,
            tempered_at_horizon: fit.tempered_slope <= config.tau_temper,
            log_k_samples: fit.log_k_samples,
        });
    }

    if wants(AnalysisKind::Lyapunov) {
        let horizon = config.t_max.max(100);
        let n = config.n_omega.min(8) as u64;
        let mut per_sample = Vec::new();
        for i in 0..n {
            let w = sample_omega(&system.driver, config.seed ^ (0x17a + i));
            per_sample.push(lyapunov_spectrum_qr(system, &w, horizon)?);
        }
        let d = system.dim;
        let mean: Vec<f64> = (0..d)
            .map(|j| per_sample.iter().map(|e| e[j]).sum::<f64>() / per_sample.len() as f64)
            .collect();
        bundle.lyapunov = Some(LyapunovReport { horizon, per_sample, mean });
    }

    let needs_morse =
        wants(AnalysisKind::Morse) || wants(AnalysisKind::Dichotomy) || wants(AnalysisKind::Attraction);
    let morse_result: Option<FinestMorseResult> = if needs_morse {
        let params = MorseParams {
            t_filtration: config.t_max.clamp(50, 400),
            cluster_gap: config.cluster_gap,
            epsilon: config.epsilon,
            n_omega: config.n_omega,
            plan: plan.clone(),
            seed: config.seed,
            attraction_t: vec![0, 2, 5, 10, 20, 30],
            cloud_size: 32,
            cloud_margin: 0.1,
        };
        Some(finest_morse_estimate(system, &params)?)
    } else {
        None
    };

    if let Some(result) = &morse_result {
        if wants(AnalysisKind::Morse) {
            bundle.morse = Some(MorseReport {
                n: result.decomposition.n,
                set_labels: result.decomposition.sets.iter().map(|s| s.label.clone()).collect(),
                set_dims: result.decomposition.sets.iter().map(|s| s.dim_sub).collect(),
                exponent_clusters: result.decomposition.exponent_clusters.clone(),
                condition: result.decomposition.condition,
                intervals: result.intervals.clone(),
                validation_failure: result.validation_failure.clone(),
            });
        }
        if wants(AnalysisKind::Attraction) {
            bundle.attraction = Some(result.attraction.clone());
        }
        if wants(AnalysisKind::Dichotomy) {
            let horizon = config.t_max.clamp(50, 400);
            let offsets = vec![-horizon, -horizon / 2, 0, horizon / 2, horizon];
            let candidates =
                candidate_splittings(system, &result.decomposition, &offsets, horizon)?;
            let opts = DichotomyOptions {
                alpha_min: config.alpha_min.max(config.gamma_grid.step),
                alpha_resolution: config.alpha_resolution,
                alpha_cap: 4.0,
                tau_temper: config.tau_temper,
                rise_tol: config.rise_tol,
            };
            let scan = dichotomy_spectrum_scan(
                system,
                &config.gamma_grid.points(),
                &candidates,
                &result.decomposition.anchor,
                &offsets,
                horizon,
                &opts,
            )?;
            bundle.dichotomy = Some(DichotomyReport {
                horizon,
                verdicts: scan.verdicts,
                sigma_intervals: scan.sigma_intervals,
            });
        }
    }

    bundle.full_interval = Some(full_space_interval(system, &anchor, &plan, config.seed)?);
    if let Some(baseline) = &scenario.baseline_system {
        let anchor_b = sample_omega(&baseline.driver, config.seed);
        bundle.baseline_full_interval =
            Some(full_space_interval(baseline, &anchor_b, &plan, config.seed)?);
    }

    if let Some(analytic) = &scenario.analytic {
        let horizon = 10_000i64;
        let gap_slope =
            gap_temperedness(system, &analytic.attractor, &analytic.repeller, &anchor, horizon)?;
        let min_angle =
            min_separation_angle(system, &analytic.attractor, &analytic.repeller, &anchor, horizon)?;
        bundle.angle = Some(AngleReport {
            horizon,
            gap_slope,
            min_angle,
            collapse_detected: min_angle <= 0.05 && gap_slope <= config.tau_temper,
        });
    }

    let unrestricted_expected = scenario
        .expected
        .as_ref()
        .map(|e| e.unrestricted_gap_min.is_some())
        .unwrap_or(false);
    if config.allow_unrestricted || unrestricted_expected {
        bundle.unrestricted = Some(unrestricted_comparison(system, config, &plan)?);
    }

    if let Some(expected) = &scenario.expected {
        build_comparisons(&mut bundle, expected, config);
    }
    bundle.overall_pass = bundle.comparisons.iter().all(|c| c.pass);
    bundle.meta.wall_ms = started.elapsed().as_millis() as u64;
    Ok(bundle)
}

/// Max sampled relative exponent of a restricted plan versus an
/// unrestricted one at the same sample budget.
fn unrestricted_comparison(
    system: &CocycleSystem,
    config: &RunConfig,
    restricted_plan: &SamplingPlan,
) -> Result<UnrestrictedReport> {
    let anchor = sample_omega(&system.driver, config.seed);
    let restricted = full_space_interval(system, &anchor, restricted_plan, config.seed)?;
    let restricted_max =
        restricted.samples.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);

    let budget: usize = (0..restricted_plan.t_grid.len())
        .map(|ti| restricted_plan.offsets_for(ti, config.seed).len())
        .sum::<usize>()
        * restricted_plan.x_per_fiber;
    let unrestricted_plan = SamplingPlan {
        t_grid: vec![2],
        t_rule: TRule::UniformUnrestricted { t_abs_max: 10_000, count: budget },
        x_per_fiber: 1,
        allow_unrestricted: true,
        divergence_coeff: config.divergence_coeff,
    };
    let unrestricted = full_space_interval(system, &anchor, &unrestricted_plan, config.seed)?;
    let unrestricted_max =
        unrestricted.samples.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(UnrestrictedReport {
        restricted_max,
        unrestricted_max,
        gap: unrestricted_max - restricted_max,
        budget,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn build_comparisons(bundle: &mut ResultBundle, expected: &ExpectedResults, config: &RunConfig) {
    let tol = expected.tolerance;
    let mut out = Vec::new();

    if let Some(m) = &bundle.morse {
        if !expected.xi_points.is_empty() {
            out.push(Comparison {
                name: "morse_set_count".into(),
                expected: expected.xi_points.len().to_string(),
                observed: m.n.to_string(),
                tolerance: 0.0,
                pass: m.n == expected.xi_points.len(),
            });
            for (i, &xi) in expected.xi_points.iter().enumerate() {
                let hit = m.intervals.iter().any(|iv| iv.contains(xi, tol));
                let closest = m
                    .intervals
                    .iter()
                    .min_by(|a, b| {
                        dist_to_interval(xi, a)
                            .partial_cmp(&dist_to_interval(xi, b))
                            .unwrap()
                    })
                    .map(interval_string)
                    .unwrap_or_else(|| "none".into());
                out.push(Comparison {
                    name: format!("xi_point_{i}"),
                    expected: fmt(xi),
                    observed: closest,
                    tolerance: tol,
                    pass: hit,
                });
            }
        }
    }

    if let Some(d) = &bundle.dichotomy {
        for (i, &g) in expected.sigma_points.iter().enumerate() {
            let hit = d
                .sigma_intervals
                .iter()
                .any(|&(lo, hi)| lo - tol <= g && g <= hi + tol);
            out.push(Comparison {
                name: format!("sigma_point_{i}"),
                expected: fmt(g),
                observed: format!("{:?}", d.sigma_intervals),
                tolerance: tol,
                pass: hit,
            });
        }
    }

    if let (Some(expect_iv), Some(got)) = (&expected.full_interval, &bundle.full_interval) {
        out.push(compare_interval("full_interval", expect_iv, got, tol));
    }
    if let (Some(expect_iv), Some(got)) =
        (&expected.baseline_full_interval, &bundle.baseline_full_interval)
    {
        // the identity baseline is exact; hold it to a tight tolerance
        out.push(compare_interval("baseline_full_interval", expect_iv, got, 1e-9));
    }

    if expected.divergent_hi {
        if let Some(got) = &bundle.full_interval {
            out.push(Comparison {
                name: "divergent_hi".into(),
                expected: "inf".into(),
                observed: got.hi.csv_field(),
                tolerance: 0.0,
                pass: got.hi == ExtReal::POS_INF,
            });
        }
    }

    if !expected.lyapunov.is_empty() {
        if let Some(l) = &bundle.lyapunov {
            for (i, (&want, got)) in expected.lyapunov.iter().zip(&l.mean).enumerate() {
                out.push(Comparison {
                    name: format!("lyapunov_{i}"),
                    expected: fmt(want),
                    observed: fmt(*got),
                    tolerance: tol,
                    pass: (want - got).abs() <= tol,
                });
            }
        }
    }

    if expected.angle_collapse {
        if let Some(a) = &bundle.angle {
            out.push(Comparison {
                name: "angle_collapse".into(),
                expected: format!("min angle <= 0.05 rad, gap slope <= {}", config.tau_temper),
                observed: format!("min angle {:.4}, slope {:.4}", a.min_angle, a.gap_slope),
                tolerance: 0.0,
                pass: a.collapse_detected,
            });
        }
    }

    if let Some(gap_min) = expected.unrestricted_gap_min {
        if let Some(u) = &bundle.unrestricted {
            out.push(Comparison {
                name: "unrestricted_gap".into(),
                expected: format!(">= {gap_min}"),
                observed: fmt(u.gap),
                tolerance: 0.0,
                pass: u.gap >= gap_min,
            });
        }
    }

    bundle.comparisons.extend(out);
}

fn dist_to_interval(x: f64, iv: &SpectrumInterval) -> f64 {
    if iv.contains(x, 0.0) {
        0.0
    } else {
        (x - iv.lo.0).abs().min((x - iv.hi.0).abs())
    }
}

fn compare_interval(
    name: &str,
    expect: &(ExtReal, ExtReal),
    got: &SpectrumInterval,
    tol: f64,
) -> Comparison {
    let end_ok = |want: ExtReal, have: ExtReal| {
        if want.is_finite() {
            have.is_finite() && (want.0 - have.0).abs() <= tol
        } else {
            want == have
        }
    };
    Comparison {
        name: name.into(),
        expected: format!("[{}, {}]", expect.0.csv_field(), expect.1.csv_field()),
        observed: interval_string(got),
        tolerance: tol,
        pass: end_ok(expect.0, got.lo) && end_ok(expect.1, got.hi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{GammaGrid, ScenarioChoice};
    use crate::scenarios::ScenarioParams;

    fn small_identity_config() -> RunConfig {
        RunConfig {
            scenario: ScenarioChoice {
                name: "identity".into(),
                params: ScenarioParams::default(),
            },
            seed: 5,
            t_max: 50,
            n_omega: 10,
            x_per_fiber: 4,
            gamma_grid: GammaGrid { lo: -0.2, hi: 0.2, step: 0.01 },
            ..Default::default()
        }
    }

    #[test]
    fn identity_run_passes_everything() {
        let bundle = run(&small_identity_config(), Some(2)).unwrap();
        assert!(bundle.overall_pass, "{:#?}", bundle.comparisons);
        let morse = bundle.morse.as_ref().unwrap();
        assert_eq!(morse.n, 1);
        let d = bundle.dichotomy.as_ref().unwrap();
        assert_eq!(d.sigma_intervals.len(), 1);
        let (lo, hi) = d.sigma_intervals[0];
        assert!(lo <= 0.0 && 0.0 <= hi && hi - lo <= 0.02);
    }

    #[test]
    fn runs_are_deterministic_across_worker_counts() {
        let cfg = small_identity_config();
        let one = run(&cfg, Some(1)).unwrap().to_json_without_wall_time().unwrap();
        let four = run(&cfg, Some(4)).unwrap().to_json_without_wall_time().unwrap();
        assert_eq!(one, four);
    }
}
