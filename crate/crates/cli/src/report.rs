//! The machine-readable report. Its JSON schema lives in
//! `docs/report.schema.json`; bump [`SCHEMA_VERSION`] when it changes.

use serde::{Deserialize, Serialize};
use survquack_core::estim::{EfficacySummary, Measure, WeibullFit};
use survquack_core::infer::{ConfidenceSet, Decision, LogRankResult, WaldResult};
use survquack_core::sim::{DirectionalErrorReport, ScenarioSubgroup};
use survquack_core::sme::StratifiedComparison;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool: ToolInfo,
    /// Seconds since the Unix epoch. Not covered by the determinism
    /// contract, and neither is `tool.version`.
    pub generated_at: u64,
    pub command: String,
    pub seed: Option<u64>,
    /// Echo of the command's inputs and effective options.
    pub inputs: serde_json::Value,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok { result: Body },
    Error { error: SectionError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionError {
    /// `input` or `numerical`, matching exit codes 2 and 3.
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Body {
    Counts(Counts),
    LogRank(LogRankResult),
    Decision(Decision),
    CoxWald(CoxWald),
    KmMedians(KmMedians),
    Efficacy(EfficacySummary),
    LivingLonger(LivingLonger),
    Weibull(WeibullComparison),
    StratifiedAudit(Vec<StratifiedComparison>),
    Scenario(ScenarioLaws),
    DirectionalError(Box<DirectionalErrorReport>),
    ConfidenceSet(ConfidenceSet),
    NaivePooling(NaivePooling),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    pub n_rx: usize,
    pub n_c: usize,
    pub events_rx: usize,
    pub events_c: usize,
    pub censored: usize,
    pub factors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoxWald {
    pub wald: WaldResult,
    pub hr: f64,
    pub level: f64,
    pub hr_lo: f64,
    pub hr_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KmMedians {
    /// `None` when the curve never falls to one half.
    pub median_rx: Option<f64>,
    pub median_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LivingLonger {
    /// `empirical` for uncensored data, `kaplan_meier` otherwise.
    pub method: String,
    pub llp: f64,
    pub hr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeibullComparison {
    pub rx: WeibullFit,
    pub c: WeibullFit,
    /// Wald test of equal scales, i.e. log time ratio zero.
    pub log_tr: WaldResult,
    pub tr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioLaws {
    pub subgroups: Vec<ScenarioSubgroup>,
    pub overall_median_rx: f64,
    pub overall_median_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumRatio {
    pub label: String,
    pub ratio: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaivePooling {
    pub measure: Measure,
    pub strata: Vec<StratumRatio>,
    pub naive_value: f64,
    /// `naive_value` to three decimals.
    pub display: String,
    pub explanation: String,
}

impl Section {
    pub fn ok(name: impl Into<String>, body: Body) -> Self {
        Self { name: name.into(), outcome: Outcome::Ok { result: body } }
    }

    pub fn from_result(name: impl Into<String>, r: survquack_core::Result<Body>) -> Self {
        match r {
            Ok(b) => Self::ok(name, b),
            Err(e) => Self::error(name, &e),
        }
    }

    pub fn error(name: impl Into<String>, e: &survquack_core::Error) -> Self {
        let kind = if e.is_numerical() { "numerical" } else { "input" };
        Self { name: name.into(), outcome: Outcome::Error { error: SectionError { kind: kind.into(), message: e.to_string() } } }
    }

    pub fn result(&self) -> Option<&Body> {
        match &self.outcome {
            Outcome::Ok { result } => Some(result),
            Outcome::Error { .. } => None,
        }
    }
}

impl ReportDocument {
    pub fn new(command: &str, seed: Option<u64>, inputs: serde_json::Value, sections: Vec<Section>) -> Self {
        let generated_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            schema_version: SCHEMA_VERSION,
            tool: ToolInfo { name: "survquack".into(), version: env!("CARGO_PKG_VERSION").into() },
            generated_at,
            command: command.into(),
            seed,
            inputs,
            sections,
        }
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report values are finite");
        s.push('\n');
        s
    }

    /// Flat CSV exports for the sections that are naturally tables, as
    /// `(file stem, contents)` pairs.
    pub fn tables(&self) -> Vec<(String, String)> {
        let mut audit = String::from("factor,measure,naive_value,sme_value,marginal_naive,marginal_value,level,prevalence,level_ratio\n");
        let mut sims = String::from(
            "section,replications,rejections,claims_rx_longer,claims_c_longer,ties,rejection_rate,rejection_ci_lo,rejection_ci_hi,max_directional_rate,cox_wald_rate\n",
        );
        let (mut have_audit, mut have_sims) = (false, false);
        let mut out = Vec::new();
        for s in &self.sections {
            match s.result() {
                Some(Body::StratifiedAudit(rows)) => {
                    have_audit = true;
                    for r in rows {
                        for l in &r.levels {
                            audit.push_str(&format!(
                                "{},{},{},{},{},{},{},{},{}\n",
                                csv_field(&r.factor),
                                r.measure,
                                r.naive_value,
                                r.sme_value,
                                r.marginal_naive,
                                r.marginal_value,
                                csv_field(&l.level),
                                l.prevalence,
                                l.ratio
                            ));
                        }
                    }
                }
                Some(Body::DirectionalError(d)) => {
                    have_sims = true;
                    sims.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{},{}\n",
                        csv_field(&s.name),
                        d.replications,
                        d.rejections,
                        d.claims_rx_longer,
                        d.claims_c_longer,
                        d.ties,
                        d.rejection_rate.rate,
                        d.rejection_rate.ci_lo,
                        d.rejection_rate.ci_hi,
                        d.max_directional_rate,
                        d.cox_wald_rate.rate
                    ));
                }
                Some(Body::ConfidenceSet(cs)) => {
                    let mut t = String::from("theta\n");
                    for a in &cs.accepted {
                        t.push_str(&format!("{a}\n"));
                    }
                    out.push((format!("{}_accepted", s.name), t));
                }
                _ => {}
            }
        }
        if have_audit {
            out.push(("stratified_audit".into(), audit));
        }
        if have_sims {
            out.push(("directional_error".into(), sims));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
