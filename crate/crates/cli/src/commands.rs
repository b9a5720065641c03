//! Subcommand implementations. Each returns a finished report; writing it
//! out is left to the caller.

use std::path::Path;

use serde_json::json;
use survquack_core::estim::{self, Arm, Measure, SurvivalSample};
use survquack_core::infer::{self, log_grid, PivotOptions};
use survquack_core::sim::{self, Scenario, ScenarioConfig};
use survquack_core::{sme, Error};

use crate::config::ScenarioFile;
use crate::dataset::read_dataset;
use crate::error::CliError;
use crate::report::{
    Body, CoxWald, Counts, KmMedians, LivingLonger, NaivePooling, ReportDocument, ScenarioLaws, Section,
    StratumRatio, WeibullComparison,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub alpha: f64,
    /// Confidence level of the Cox interval.
    pub level: f64,
    pub strata: Vec<String>,
    pub measures: Vec<Measure>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self { alpha: 0.05, level: 0.95, strata: Vec::new(), measures: vec![Measure::Hr, Measure::Tr] }
    }
}

fn check_probability(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("{name} must lie in (0, 1), got {v}")))
    }
}

pub fn analyze(path: &Path, opts: &AnalyzeOptions) -> Result<ReportDocument, CliError> {
    check_probability("alpha", opts.alpha)?;
    check_probability("level", opts.level)?;
    for m in &opts.measures {
        if !matches!(m, Measure::Hr | Measure::Tr) {
            return Err(CliError::Input(format!("measure {m} is not available for survival data (use HR or TR)")));
        }
    }
    let sample = read_dataset(path)?;
    for f in &opts.strata {
        sample.factor_index(f).map_err(|_| CliError::Input(format!("--strata: dataset has no column 's:{f}'")))?;
    }
    let inputs = json!({
        "dataset": path.display().to_string(),
        "alpha": opts.alpha,
        "level": opts.level,
        "strata": opts.strata,
        "measures": opts.measures,
    });
    let sections = analyze_sample(&sample, opts);
    Ok(ReportDocument::new("analyze", None, inputs, sections))
}

/// All analysis sections for an in-memory sample.
pub fn analyze_sample(sample: &SurvivalSample, opts: &AnalyzeOptions) -> Vec<Section> {
    let mut out = vec![Section::ok("counts", Body::Counts(counts(sample)))];
    out.push(Section::from_result("logrank", infer::logrank_test(sample).map(Body::LogRank)));
    out.push(Section::ok("decision", Body::Decision(infer::decision_procedure(sample, opts.alpha))));
    let wants = |m| opts.measures.contains(&m);
    if wants(Measure::Hr) {
        out.push(Section::from_result("cox_wald", cox_wald(sample, opts.level)));
        out.push(Section::from_result("living_longer", living_longer(sample)));
    }
    if wants(Measure::Tr) {
        out.push(Section::from_result("km_medians", km_medians(sample)));
        out.push(Section::from_result("km_time_ratio", km_time_ratio(sample)));
        out.push(Section::from_result("weibull", weibull(sample)));
    }
    if !opts.strata.is_empty() {
        for &m in &opts.measures {
            let name = format!("stratified_audit_{}", m.to_string().to_lowercase());
            out.push(Section::from_result(name, sme::stratified_audit(sample, &opts.strata, m).map(Body::StratifiedAudit)));
        }
    }
    out
}

fn counts(sample: &SurvivalSample) -> Counts {
    let events = |arm| sample.arm(arm).1.iter().filter(|&&e| e).count();
    Counts {
        n_rx: sample.count(Arm::Rx),
        n_c: sample.count(Arm::C),
        events_rx: events(Arm::Rx),
        events_c: events(Arm::C),
        censored: sample.censored(),
        factors: sample.factors().to_vec(),
    }
}

fn cox_wald(sample: &SurvivalSample, level: f64) -> survquack_core::Result<Body> {
    let wald = infer::wald_test_cox(sample)?;
    let (lo, hi) = wald.interval(level);
    Ok(Body::CoxWald(CoxWald { wald, hr: wald.estimate.exp(), level, hr_lo: lo.exp(), hr_hi: hi.exp() }))
}

fn living_longer(sample: &SurvivalSample) -> survquack_core::Result<Body> {
    let (method, llp) = if sample.censored() == 0 {
        ("empirical", estim::empirical_llp_sample(sample)?)
    } else {
        let curve = |arm| {
            let (t, e) = sample.arm(arm);
            estim::km_fit(&t, &e).map(|km| km.to_curve())
        };
        ("kaplan_meier", sme::living_longer_probability(&curve(Arm::Rx)?, &curve(Arm::C)?)?)
    };
    Ok(Body::LivingLonger(LivingLonger { method: method.into(), llp, hr: estim::hr_from_llp(llp)? }))
}

fn km_medians(sample: &SurvivalSample) -> survquack_core::Result<Body> {
    let median = |arm| {
        let (t, e) = sample.arm(arm);
        estim::km_fit(&t, &e).map(|km| km.median())
    };
    Ok(Body::KmMedians(KmMedians { median_rx: median(Arm::Rx)?, median_c: median(Arm::C)? }))
}

fn km_time_ratio(sample: &SurvivalSample) -> survquack_core::Result<Body> {
    let (rt, re) = sample.arm(Arm::Rx);
    let (ct, ce) = sample.arm(Arm::C);
    estim::sample_tr(&rt, &re, &ct, &ce).map(Body::Efficacy)
}

fn weibull(sample: &SurvivalSample) -> survquack_core::Result<Body> {
    let (rt, re) = sample.arm(Arm::Rx);
    let (ct, ce) = sample.arm(Arm::C);
    let rx = estim::weibull_mle(&rt, &re)?;
    let c = estim::weibull_mle(&ct, &ce)?;
    let log_tr = infer::wald_test_weibull(&rx, &c)?;
    Ok(Body::Weibull(WeibullComparison { rx, c, log_tr, tr: log_tr.estimate.exp() }))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulateOptions {
    /// Replaces the config's master seed.
    pub seed: Option<u64>,
    /// Replaces the config's replication count.
    pub replications: Option<usize>,
    pub workers: Option<usize>,
}

pub fn simulate(path: &Path, opts: &SimulateOptions) -> Result<ReportDocument, CliError> {
    let file = ScenarioFile::load(path)?;
    let invalid = |message: String| CliError::Config { path: path.into(), message };
    let mut base = file.scenario().map_err(invalid)?;
    if let Some(s) = opts.seed {
        base.master_seed = s;
    }
    if let Some(r) = opts.replications {
        base.replications = r;
    }
    if let Err(Error::InvalidConfig(m)) = base.validate() {
        return Err(invalid(m));
    }
    let points = file.sweep_configs(&base).map_err(invalid)?;
    let inputs = json!({
        "config": path.display().to_string(),
        "scenario": base,
        "sweep": file.sweep,
    });
    let mut sections = Vec::new();
    if points.is_empty() {
        let scenario = base.build()?;
        sections.push(Section::ok("scenario", Body::Scenario(laws(&scenario))));
        sections.push(Section::from_result(
            "directional_error",
            sim::run_study(&scenario, opts.workers).map(|r| Body::DirectionalError(Box::new(r))),
        ));
    } else {
        let configs: Vec<ScenarioConfig> = points.iter().map(|(_, c)| c.clone()).collect();
        let reports = sim::sweep(&configs, opts.workers);
        for (i, ((p, _), r)) in points.iter().zip(reports).enumerate() {
            let name = format!("sweep_{i}_prevalence_{p}");
            sections.push(Section::from_result(name, r.map(|r| Body::DirectionalError(Box::new(r)))));
        }
    }
    Ok(ReportDocument::new("simulate", Some(base.master_seed), inputs, sections))
}

fn laws(s: &Scenario) -> ScenarioLaws {
    ScenarioLaws { subgroups: s.subgroups.clone(), overall_median_rx: s.overall_median_rx, overall_median_c: s.overall_median_c }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PivotCliOptions {
    pub level: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for PivotCliOptions {
    fn default() -> Self {
        let d = PivotOptions::default();
        Self { level: d.level, grid_min: 1.0 / 50.0, grid_max: 50.0, grid_points: 200, reps: d.mc_reps, seed: d.seed }
    }
}

pub fn pivot_ci(path: &Path, opts: &PivotCliOptions) -> Result<ReportDocument, CliError> {
    if !(opts.grid_min > 0.0 && opts.grid_max > opts.grid_min && opts.grid_points >= 2) {
        return Err(CliError::Input(format!(
            "grid must satisfy 0 < grid-min < grid-max with at least 2 points, got [{}, {}] x {}",
            opts.grid_min, opts.grid_max, opts.grid_points
        )));
    }
    let popts = PivotOptions {
        level: opts.level,
        grid: log_grid(opts.grid_min, opts.grid_max, opts.grid_points),
        mc_reps: opts.reps,
        seed: opts.seed,
    };
    popts.validate()?;
    let sample = read_dataset(path)?;
    let set = infer::mw_pivot_ci_sample(&sample, &popts)?;
    let inputs = json!({
        "dataset": path.display().to_string(),
        "level": opts.level,
        "grid_min": opts.grid_min,
        "grid_max": opts.grid_max,
        "grid_points": opts.grid_points,
        "reps": opts.reps,
    });
    let sections = vec![Section::ok("counts", Body::Counts(counts(&sample))), Section::ok("hr_confidence_set", Body::ConfidenceSet(set))];
    Ok(ReportDocument::new("pivot-ci", Some(opts.seed), inputs, sections))
}

const EQ1_EXPLANATION: &str = "Stratified hazard ratios from standard software average the logarithms of the \
per-stratum hazard ratios. With Female HR 0.521 and Male HR 0.983 in a balanced population this gives \
exp(0.5 ln 0.521 + 0.5 ln 0.983) = 0.716. The average ignores the prognostic effect: control-arm survival \
differs between the strata, so the strata contribute differently to the overall comparison. Changing the \
stratification factor changes the answer even when the within-stratum effect is the same. Subgroup mixable \
estimation mixes each arm's survival curves by prevalence first and compares the mixtures, which gives a \
stable overall value.";

pub fn eq1_demo() -> Result<ReportDocument, CliError> {
    let strata = vec![
        StratumRatio { label: "Female".into(), ratio: 0.521, weight: 0.5 },
        StratumRatio { label: "Male".into(), ratio: 0.983, weight: 0.5 },
    ];
    let pairs: Vec<(f64, f64)> = strata.iter().map(|s| (s.ratio, s.weight)).collect();
    let naive_value = sme::naive_stratified_ratio(&pairs)?;
    let body = NaivePooling {
        measure: Measure::Hr,
        strata,
        naive_value,
        display: format!("{naive_value:.3}"),
        explanation: EQ1_EXPLANATION.into(),
    };
    Ok(ReportDocument::new("eq1-demo", None, json!({}), vec![Section::ok("naive_pooling", Body::NaivePooling(body))]))
}
