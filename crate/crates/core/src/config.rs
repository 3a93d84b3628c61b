//! Run configuration: JSON in, validated parameters out.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectraError};
use crate::scenarios::ScenarioParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scenario: ScenarioChoice,
    pub seed: u64,
    /// Largest sampling horizon.
    pub t_max: i64,
    /// Explicit horizon grid; empty means a geometric grid up to `t_max`.
    pub t_grid: Vec<i64>,
    pub n_omega: usize,
    pub x_per_fiber: usize,
    pub gamma_grid: GammaGrid,
    pub epsilon: f64,
    pub cluster_gap: f64,
    pub tau_temper: f64,
    pub alpha_min: f64,
    pub alpha_resolution: f64,
    pub rise_tol: f64,
    pub divergence_coeff: f64,
    pub allow_unrestricted: bool,
    pub outputs: Vec<AnalysisKind>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioChoice {
    pub name: String,
    pub params: ScenarioParams,
}

impl Default for ScenarioChoice {
    fn default() -> Self {
        ScenarioChoice { name: "block".to_string(), params: ScenarioParams::default() }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GammaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GammaGrid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step).round() as i64;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    Growth,
    Lyapunov,
    Morse,
    Dichotomy,
    Attraction,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioChoice::default(),
            seed: 42,
            t_max: 200,
            t_grid: Vec::new(),
            n_omega: 50,
            x_per_fiber: 8,
            gamma_grid: GammaGrid { lo: -1.0, hi: 1.2, step: 0.01 },
            epsilon: 0.05,
            cluster_gap: 0.1,
            tau_temper: 0.02,
            alpha_min: 0.01,
            alpha_resolution: 1e-3,
            rise_tol: 0.25,
            divergence_coeff: 1.0,
            allow_unrestricted: false,
            outputs: vec![
                AnalysisKind::Growth,
                AnalysisKind::Lyapunov,
                AnalysisKind::Morse,
                AnalysisKind::Dichotomy,
                AnalysisKind::Attraction,
            ],
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| SpectraError::config(format!("bad run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max < 10 {
            return Err(SpectraError::config("t_max must be at least 10"));
        }
        if !self.t_grid.is_empty() {
            if self.t_grid[0] < 1 || self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(SpectraError::config("t_grid must be increasing and positive"));
            }
        }
        if self.n_omega < 1 {
            return Err(SpectraError::config("n_omega must be at least 1"));
        }
        if self.x_per_fiber < 1 {
            return Err(SpectraError::config("x_per_fiber must be at least 1"));
        }
        if !(self.gamma_grid.step > 0.0) || self.gamma_grid.hi < self.gamma_grid.lo {
            return Err(SpectraError::config("gamma grid needs lo <= hi and step > 0"));
        }
        if !(self.epsilon > 0.0) {
            return Err(SpectraError::config("epsilon must be positive"));
        }
        if !(self.cluster_gap > 0.0) {
            return Err(SpectraError::config("cluster_gap must be positive"));
        }
        if !(self.tau_temper > 0.0) || !(self.alpha_min > 0.0) || !(self.alpha_resolution > 0.0) {
            return Err(SpectraError::config("thresholds must be positive"));
        }
        Ok(())
    }

    /// The horizon grid: the explicit one, or a geometric ladder from 10
    /// (or below, if `t_max` is smaller) up to `t_max`.
    pub fn effective_t_grid(&self) -> Vec<i64> {
        if !self.t_grid.is_empty() {
            return self.t_grid.clone();
        }
        let mut grid = Vec::new();
        let mut t = 10i64.min(self.t_max);
        while t < self.t_max {
            grid.push(t);
            let next = ((t as f64) * 10f64.sqrt()).round() as i64;
            t = next.max(t + 1);
        }
        grid.push(self.t_max);
        grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.outputs.len(), 5);
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg = RunConfig::from_json(
            r#"{"scenario": {"name": "const-diag"}, "seed": 7, "t_max": 100}"#,
        )
        .unwrap();
        assert_eq!(cfg.scenario.name, "const-diag");
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.n_omega, 50);
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(RunConfig::from_json(r#"{"t_grid": [50, 20]}"#).is_err());
        assert!(RunConfig::from_json(r#"{"gamma_grid": {"lo": 0, "hi": -1, "step": 0.1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"t_max": 2}"#).is_err());
    }

    #[test]
    fn geometric_grid_reaches_t_max() {
        let cfg = RunConfig { t_max: 10_000, ..Default::default() };
        let grid = cfg.effective_t_grid();
        assert_eq!(*grid.first().unwrap(), 10);
        assert_eq!(*grid.last().unwrap(), 10_000);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn gamma_points_cover_the_interval() {
        let g = GammaGrid { lo: -0.5, hi: 1.2, step: 0.01 };
        let pts = g.points();
        assert_eq!(pts.len(), 171);
        assert!((pts[0] + 0.5).abs() < 1e-12);
        assert!((pts.last().unwrap() - 1.2).abs() < 1e-9);
    }
}
