//! Scenario and dataset-design configuration files (TOML syntax).

use std::path::Path;

use serde::{Deserialize, Serialize};
use survquack_core::sim::{
    ArmLaw, Censoring, FactorSpec, MedianConstraint, Membership, ScenarioConfig, StratifiedDesign, SubgroupSpec,
};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub n_total: usize,
    #[serde(default = "half")]
    pub allocation: f64,
    #[serde(default = "five_percent")]
    pub alpha: f64,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub membership: Membership,
    #[serde(default)]
    pub censoring: Censoring,
}

fn half() -> f64 {
    0.5
}

fn five_percent() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverallMedian {
    pub time: f64,
    pub solve_for: String,
}

/// A subgroup; each arm is given by a median or a scale, or left open for
/// the overall-median solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgroupEntry {
    pub label: String,
    pub prevalence: f64,
    pub shape: f64,
    pub rx_median: Option<f64>,
    pub rx_scale: Option<f64>,
    pub c_median: Option<f64>,
    pub c_scale: Option<f64>,
}

/// Re-run the study with one subgroup's prevalence set to each listed value;
/// the other subgroups share the remainder in their original proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub subgroup: String,
    pub prevalences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub study: StudySection,
    pub overall_median: Option<OverallMedian>,
    #[serde(rename = "subgroup")]
    pub subgroups: Vec<SubgroupEntry>,
    pub sweep: Option<SweepSection>,
}

fn law(label: &str, arm: &str, median: Option<f64>, scale: Option<f64>, problems: &mut Vec<String>) -> Option<ArmLaw> {
    match (median, scale) {
        (Some(m), None) => Some(ArmLaw::Median(m)),
        (None, Some(s)) => Some(ArmLaw::Scale(s)),
        (None, None) => None,
        (Some(_), Some(_)) => {
            problems.push(format!("subgroup '{label}': give {arm}_median or {arm}_scale, not both"));
            None
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config { path: origin.into(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
        Self::parse(&text, path)
    }

    /// The base scenario; field-level problems are all reported together.
    pub fn scenario(&self) -> Result<ScenarioConfig, String> {
        let mut problems = Vec::new();
        let subgroups = self
            .subgroups
            .iter()
            .map(|g| SubgroupSpec {
                label: g.label.clone(),
                prevalence: g.prevalence,
                shape: g.shape,
                rx: law(&g.label, "rx", g.rx_median, g.rx_scale, &mut problems),
                c: law(&g.label, "c", g.c_median, g.c_scale, &mut problems),
            })
            .collect();
        let s = &self.study;
        let cfg = ScenarioConfig {
            subgroups,
            overall_median: self
                .overall_median
                .as_ref()
                .map(|m| MedianConstraint { time: m.time, solve_for: m.solve_for.clone() }),
            n_total: s.n_total,
            allocation: s.allocation,
            membership: s.membership,
            censoring: s.censoring,
            alpha: s.alpha,
            replications: s.replications,
            master_seed: s.master_seed,
        };
        if let Err(survquack_core::Error::InvalidConfig(msg)) = cfg.validate() {
            problems.push(msg);
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(problems.join("; "))
        }
    }

    /// One config per sweep point, in listed order.
    pub fn sweep_configs(&self, base: &ScenarioConfig) -> Result<Vec<(f64, ScenarioConfig)>, String> {
        let Some(sw) = &self.sweep else { return Ok(Vec::new()) };
        let target = base
            .subgroups
            .iter()
            .position(|g| g.label == sw.subgroup)
            .ok_or_else(|| format!("sweep.subgroup: no subgroup labelled '{}'", sw.subgroup))?;
        if sw.prevalences.is_empty() {
            return Err("sweep.prevalences: empty list".into());
        }
        let rest: f64 = base.subgroups.iter().enumerate().filter(|&(i, _)| i != target).map(|(_, g)| g.prevalence).sum();
        let mut out = Vec::with_capacity(sw.prevalences.len());
        for &p in &sw.prevalences {
            if !(p > 0.0 && p <= 1.0) {
                return Err(format!("sweep.prevalences: {p} is outside (0, 1]"));
            }
            if rest <= 0.0 && p < 1.0 {
                return Err("sweep: the other subgroups have zero prevalence to rescale".into());
            }
            let mut cfg = base.clone();
            for (i, g) in cfg.subgroups.iter_mut().enumerate() {
                g.prevalence = if i == target { p } else { g.prevalence * (1.0 - p) / rest };
            }
            out.push((p, cfg));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub n_per_arm: usize,
    pub shape: f64,
    pub baseline_control_median: f64,
    pub hr: f64,
    pub censor_after: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorEntry {
    pub name: String,
    pub levels: Vec<String>,
    pub prevalences: Vec<f64>,
    pub control_median_multipliers: Vec<f64>,
}

/// Synthetic stratified dataset description, consumed by `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub design: DesignSection,
    #[serde(rename = "factor", default)]
    pub factors: Vec<FactorEntry>,
}

impl DesignFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|e| CliError::Config { path: path.into(), message: e.to_string() })
    }

    pub fn design(&self) -> StratifiedDesign {
        let d = &self.design;
        StratifiedDesign {
            n_per_arm: d.n_per_arm,
            shape: d.shape,
            baseline_control_median: d.baseline_control_median,
            hr: d.hr,
            factors: self
                .factors
                .iter()
                .map(|f| FactorSpec {
                    name: f.name.clone(),
                    levels: f.levels.clone(),
                    prevalences: f.prevalences.clone(),
                    control_median_multipliers: f.control_median_multipliers.clone(),
                })
                .collect(),
            censor_after: d.censor_after,
            seed: d.seed,
        }
    }
}
