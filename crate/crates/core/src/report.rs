//! Result bundle assembled by a run, its JSON serialization, and the
//! plot-ready CSV tables.
//!
//! CSV headers are fixed; numeric fields carry 12 significant digits and
//! the infinities appear as `inf` / `-inf`, in JSON and CSV alike.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::extreal::format_sig12;
use crate::morse::{AttractionValidation, ClusterExponents};
use crate::spectra::{DichotomyVerdict, SpectrumInterval};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub scenario: String,
    pub seed: u64,
    pub version: String,
    /// Wall-clock duration; excluded from determinism comparisons.
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    pub horizon: i64,
    pub a_hat: f64,
    pub trial_rate: f64,
    pub tempered_slope: f64,
    pub tempered_at_horizon: bool,
    pub log_k_samples: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub horizon: i64,
    pub per_sample: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorseReport {
    pub n: usize,
    pub set_labels: Vec<String>,
    pub set_dims: Vec<usize>,
    pub exponent_clusters: Vec<ClusterExponents>,
    pub condition: f64,
    pub intervals: Vec<SpectrumInterval>,
    pub validation_failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub horizon: i64,
    pub verdicts: Vec<DichotomyVerdict>,
    pub sigma_intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleReport {
    pub horizon: i64,
    pub gap_slope: f64,
    pub min_angle: f64,
    pub collapse_detected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnrestrictedReport {
    pub restricted_max: f64,
    pub unrestricted_max: f64,
    pub gap: f64,
    pub budget: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultBundle {
    pub meta: RunMeta,
    pub growth: Option<GrowthReport>,
    pub lyapunov: Option<LyapunovReport>,
    pub morse: Option<MorseReport>,
    pub dichotomy: Option<DichotomyReport>,
    pub attraction: Option<Vec<AttractionValidation>>,
    pub full_interval: Option<SpectrumInterval>,
    pub baseline_full_interval: Option<SpectrumInterval>,
    pub angle: Option<AngleReport>,
    pub unrestricted: Option<UnrestrictedReport>,
    pub comparisons: Vec<Comparison>,
    pub overall_pass: bool,
}

impl ResultBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the wall-clock field zeroed, for byte-wise comparisons.
    pub fn to_json_without_wall_time(&self) -> Result<String> {
        let mut clone = self.clone();
        clone.meta.wall_ms = 0;
        clone.to_json()
    }

    /// Write `report.json` and the per-analysis CSV tables. Every table is
    /// created with its header even when the section did not run.
    pub fn emit(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir)?;
        fs::write(out_dir.join("report.json"), self.to_json()?)?;

        let mut intervals_csv = String::from("set_index,label,lo,hi,midpoint\n");
        let mut samples_csv = String::from("set_index,T,t,lambda_tilde\n");
        if let Some(m) = &self.morse {
            for (i, iv) in m.intervals.iter().enumerate() {
                intervals_csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    i,
                    iv.morse_label,
                    iv.lo.csv_field(),
                    iv.hi.csv_field(),
                    format_sig12(iv.midpoint())
                ));
                for s in &iv.samples {
                    samples_csv.push_str(&format!(
                        "{},{},{},{}\n",
                        i,
                        s.t_horizon,
                        s.t_offset,
                        format_sig12(s.value)
                    ));
                }
            }
        }
        fs::write(out_dir.join("morse_intervals.csv"), intervals_csv)?;
        fs::write(out_dir.join("morse_samples.csv"), samples_csv)?;

        let mut dich_csv = String::from("gamma,admits,alpha_star,projector_rank,k_slope\n");
        let mut sigma_csv = String::from("lo,hi\n");
        if let Some(d) = &self.dichotomy {
            for v in &d.verdicts {
                dich_csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    format_sig12(v.gamma),
                    v.admits,
                    format_sig12(v.alpha_star),
                    v.projector_rank,
                    format_sig12(v.k_slope)
                ));
            }
            for (lo, hi) in &d.sigma_intervals {
                sigma_csv.push_str(&format!("{},{}\n", format_sig12(*lo), format_sig12(*hi)));
            }
        }
        fs::write(out_dir.join("dichotomy.csv"), dich_csv)?;
        fs::write(out_dir.join("sigma_intervals.csv"), sigma_csv)?;

        let mut attr_csv = String::from("attractor_index,epsilon,t,exceedance\n");
        if let Some(rows) = &self.attraction {
            for val in rows {
                for (t, p) in val.report.t_values.iter().zip(&val.report.exceedance_probabilities)
                {
                    attr_csv.push_str(&format!(
                        "{},{},{},{}\n",
                        val.attractor_index,
                        format_sig12(val.epsilon),
                        t,
                        format_sig12(*p)
                    ));
                }
            }
        }
        fs::write(out_dir.join("attraction.csv"), attr_csv)?;

        let mut lyap_csv = String::from("sample_index,rank,exponent\n");
        if let Some(l) = &self.lyapunov {
            for (i, exps) in l.per_sample.iter().enumerate() {
                for (r, e) in exps.iter().enumerate() {
                    lyap_csv.push_str(&format!("{},{},{}\n", i, r, format_sig12(*e)));
                }
            }
        }
        fs::write(out_dir.join("lyapunov.csv"), lyap_csv)?;

        let mut growth_csv = String::from("sample_index,log_k\n");
        if let Some(g) = &self.growth {
            for (i, k) in &g.log_k_samples {
                growth_csv.push_str(&format!("{},{}\n", i, format_sig12(*k)));
            }
        }
        fs::write(out_dir.join("growth.csv"), growth_csv)?;

        let mut full_csv = String::from("which,label,lo,hi\n");
        for (which, iv) in [("system", &self.full_interval), ("baseline", &self.baseline_full_interval)]
        {
            if let Some(iv) = iv {
                full_csv.push_str(&format!(
                    "{},{},{},{}\n",
                    which,
                    iv.morse_label,
                    iv.lo.csv_field(),
                    iv.hi.csv_field()
                ));
            }
        }
        fs::write(out_dir.join("full_interval.csv"), full_csv)?;

        let mut comp_csv = String::from("name,expected,observed,tolerance,pass\n");
        for c in &self.comparisons {
            comp_csv.push_str(&format!(
                "{},{},{},{},{}\n",
                c.name,
                c.expected,
                c.observed,
                format_sig12(c.tolerance),
                c.pass
            ));
        }
        fs::write(out_dir.join("comparisons.csv"), comp_csv)?;
        Ok(())
    }
}

pub fn interval_string(iv: &SpectrumInterval) -> String {
    format!("[{}, {}]", iv.lo.csv_field(), iv.hi.csv_field())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extreal::ExtReal;

    fn empty_bundle() -> ResultBundle {
        ResultBundle {
            meta: RunMeta {
                scenario: "identity".into(),
                seed: 1,
                version: "0.0.0".into(),
                wall_ms: 5,
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
            comparisons: vec![],
            overall_pass: true,
        }
    }

    #[test]
    fn bundle_round_trips_and_drops_wall_time() {
        let b = empty_bundle();
        let json = b.to_json().unwrap();
        let back: ResultBundle = serde_json::from_str(&json).unwrap();
        assert_eq!(back.meta.seed, 1);
        let a = b.to_json_without_wall_time().unwrap();
        let mut c = empty_bundle();
        c.meta.wall_ms = 999;
        assert_eq!(a, c.to_json_without_wall_time().unwrap());
    }

    #[test]
    fn empty_bundle_emits_headers() {
        let dir = std::env::temp_dir().join(format!("rds-spectra-test-{}", std::process::id()));
        empty_bundle().emit(&dir).unwrap();
        let text = std::fs::read_to_string(dir.join("dichotomy.csv")).unwrap();
        assert_eq!(text, "gamma,admits,alpha_star,projector_rank,k_slope\n");
        let text = std::fs::read_to_string(dir.join("morse_samples.csv")).unwrap();
        assert_eq!(text, "set_index,T,t,lambda_tilde\n");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn infinities_serialize_as_strings() {
        let iv = SpectrumInterval {
            morse_label: "full-space".into(),
            lo: ExtReal::NEG_INF,
            hi: ExtReal::POS_INF,
            samples: vec![],
        };
        let json = serde_json::to_string(&iv).unwrap();
        assert!(json.contains("\"-inf\"") && json.contains("\"inf\""));
        assert_eq!(interval_string(&iv), "[-inf, inf]");
    }
}
