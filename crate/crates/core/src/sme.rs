//! Subgroup-to-overall efficacy aggregation.
//!
//! Subgroup Mixable Estimation (SME) mixes the per-arm ingredients (response
//! probabilities or survival curves) over subgroup prevalences first and only
//! then forms the efficacy ratio. The contrasting "naive" estimator averages
//! the logarithms of the per-stratum ratios, which ignores the prognostic
//! effect of the subgroups on the control arm.
//!
//! The overall hazard ratio is defined through the living-longer probability
//! of the two mixtures, `HR = (1 − LLP) / LLP`, which is the Lehmann-family
//! identity extended to arbitrary curves.

use serde::{Deserialize, Serialize};

use crate::dist::{Curve, MixtureCurve};
use crate::error::{Error, Result};
use crate::estim::{self, km_fit, Arm, EfficacySummary, Measure, SurvivalSample};
use crate::quad::adaptive_simpson;

const PREVALENCE_TOL: f64 = 1e-12;

/// Weighted geometric mean `exp(Σ w_g ln r_g)`: the log-averaging pooling of
/// stratum ratios.
pub fn naive_stratified_ratio(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("stratum ratios"));
    }
    let mut total_w = 0.0;
    let mut acc = 0.0;
    for &(ratio, w) in pairs {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::domain(format!("stratum ratio must be positive, got {ratio}")));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::domain(format!("weight must lie in [0, 1], got {w}")));
        }
        total_w += w;
        acc += w * ratio.ln();
    }
    if (total_w - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("weights sum to {total_w}, expected 1")));
    }
    Ok(acc.exp())
}

/// One subgroup: label, prevalence, and the per-arm ingredient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRow<I> {
    pub label: String,
    pub prevalence: f64,
    pub ingredient: I,
}

/// Response probabilities of a subgroup under Rx and C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePair {
    pub p_rx: f64,
    pub p_c: f64,
}

impl ResponsePair {
    pub fn rr(&self) -> Option<f64> {
        (self.p_c > 0.0).then(|| self.p_rx / self.p_c)
    }
}

/// Survival curves of a subgroup under Rx and C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePair {
    pub rx: Curve,
    pub c: Curve,
}

impl CurvePair {
    pub fn tr(&self) -> Result<f64> {
        Ok(self.rx.median()? / self.c.median()?)
    }

    pub fn hr(&self) -> Result<f64> {
        estim::hr_from_llp(living_longer_probability(&self.rx, &self.c)?)
    }
}

/// Subgroup table whose prevalences sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupEfficacyTable<I> {
    rows: Vec<SubgroupRow<I>>,
}

impl<I> SubgroupEfficacyTable<I> {
    pub fn new(rows: Vec<SubgroupRow<I>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("subgroup table"));
        }
        let mut total = 0.0;
        for r in &rows {
            if !(0.0..=1.0).contains(&r.prevalence) {
                return Err(Error::domain(format!("prevalence of '{}' must lie in [0, 1]", r.label)));
            }
            total += r.prevalence;
        }
        if (total - 1.0).abs() > PREVALENCE_TOL {
            return Err(Error::domain(format!("prevalences sum to {total}, expected 1")));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[SubgroupRow<I>] {
        &self.rows
    }
}

/// Overall relative response by mixing responses within each arm, then dividing.
pub fn sme_overall_rr(table: &SubgroupEfficacyTable<ResponsePair>) -> Result<EfficacySummary> {
    let (mut rx, mut c) = (0.0, 0.0);
    for r in table.rows() {
        let ResponsePair { p_rx, p_c } = r.ingredient;
        if !((0.0..=1.0).contains(&p_rx) && (0.0..=1.0).contains(&p_c)) {
            return Err(Error::domain(format!("response probabilities of '{}' outside [0, 1]", r.label)));
        }
        rx += r.prevalence * p_rx;
        c += r.prevalence * p_c;
    }
    if c <= 0.0 {
        return Err(Error::domain("overall control response is zero"));
    }
    EfficacySummary::new(Measure::Rr, rx / c, None)
}

fn arm_mixtures(table: &SubgroupEfficacyTable<CurvePair>) -> Result<(Curve, Curve)> {
    let live: Vec<&SubgroupRow<CurvePair>> = table.rows().iter().filter(|r| r.prevalence > 0.0).collect();
    let total: f64 = live.iter().map(|r| r.prevalence).sum();
    let build = |pick: fn(&CurvePair) -> &Curve| -> Result<Curve> {
        if live.len() == 1 {
            return Ok(pick(&live[0].ingredient).clone());
        }
        let comps = live.iter().map(|r| (r.prevalence / total, pick(&r.ingredient).clone())).collect();
        Ok(MixtureCurve::new(comps)?.into())
    };
    Ok((build(|p| &p.rx)?, build(|p| &p.c)?))
}

/// Overall time ratio: ratio of the medians of the per-arm mixtures.
pub fn sme_overall_tr(table: &SubgroupEfficacyTable<CurvePair>) -> Result<EfficacySummary> {
    let (rx, c) = arm_mixtures(table)?;
    let m_rx = rx.median().map_err(|_| Error::MedianNotReached { arm: Arm::Rx })?;
    let m_c = c.median().map_err(|_| Error::MedianNotReached { arm: Arm::C })?;
    EfficacySummary::new(Measure::Tr, m_rx / m_c, None)
}

/// Overall living-longer probability of the per-arm mixtures.
pub fn sme_overall_llp(table: &SubgroupEfficacyTable<CurvePair>) -> Result<EfficacySummary> {
    let (rx, c) = arm_mixtures(table)?;
    EfficacySummary::new(Measure::Llp, living_longer_probability(&rx, &c)?, None)
}

/// Overall hazard ratio `(1 − LLP)/LLP` of the per-arm mixtures.
pub fn sme_overall_hr(table: &SubgroupEfficacyTable<CurvePair>) -> Result<EfficacySummary> {
    let llp = sme_overall_llp(table)?.value;
    EfficacySummary::new(Measure::Hr, estim::hr_from_llp(llp)?, None)
}

/// Tail cutoff and absolute tolerance of the LLP quadrature.
pub const LLP_TAIL: f64 = 1e-8;
pub const LLP_TOL: f64 = 1e-8;

/// `P(T_Rx > T_C) + ½ P(T_Rx = T_C)` for independent survival times.
///
/// When the control curve has a density the integral `∫ S_Rx dF_C` is taken
/// by adaptive Simpson in log time up to the horizon where both curves fall
/// below [`LLP_TAIL`]. When both curves are discrete the Stieltjes sum is
/// exact, with mass remaining after the last jump placed at infinity.
pub fn living_longer_probability(rx: &Curve, c: &Curve) -> Result<f64> {
    if c.is_continuous() {
        return llp_quadrature(rx, c);
    }
    let Some(c_jumps) = c.jumps() else {
        return Err(Error::domain("control curve mixes continuous and discrete parts"));
    };
    let rx_jumps = if rx.is_continuous() { None } else { Some(rx.jumps().ok_or_else(|| Error::domain("Rx curve mixes continuous and discrete parts"))?) };
    let mut total = 0.0;
    for &(t, mass) in &c_jumps {
        let tie = match &rx_jumps {
            Some(j) => j
                .binary_search_by(|p| p.0.total_cmp(&t))
                .map(|i| j[i].1)
                .unwrap_or(0.0),
            None => 0.0,
        };
        total += mass * (rx.value(t) + 0.5 * tie);
    }
    // Mass at infinity: ties between the two censored tails.
    total += 0.5 * rx.terminal_survival() * c.terminal_survival();
    Ok(total)
}

fn llp_quadrature(rx: &Curve, c: &Curve) -> Result<f64> {
    let hint = rx.scale_hint().max(c.scale_hint());
    let mut upper = hint;
    let mut guard = 0;
    while rx.value(upper) >= LLP_TAIL || c.value(upper) >= LLP_TAIL {
        upper *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::numerical("living_longer_probability", "survival tail never falls below cutoff"));
        }
    }
    let mut lower = c.scale_hint();
    guard = 0;
    while 1.0 - c.value(lower) > 1e-14 {
        lower *= 0.5;
        guard += 1;
        if guard > 400 {
            return Err(Error::numerical("living_longer_probability", "control curve has mass at zero"));
        }
    }
    let integrand = |s: f64| {
        let t = s.exp();
        let f = c.density(t).unwrap_or(f64::NAN);
        rx.value(t) * f * t
    };
    let body = adaptive_simpson(integrand, lower.ln(), upper.ln(), LLP_TOL)?;
    let head = (1.0 - c.value(lower)) * 0.5 * (1.0 + rx.value(lower));
    let tail = 0.5 * c.value(upper) * rx.value(upper);
    Ok(body + head + tail)
}

/// One row of a stratified audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedComparison {
    pub factor: String,
    pub measure: Measure,
    /// Log-averaged per-level ratios weighted by pooled level prevalence.
    pub naive_value: f64,
    /// Per-level curves mixed by prevalence, then summarized.
    pub sme_value: f64,
    /// SME value of the unstratified data.
    pub marginal_value: f64,
    /// Naive value of the unstratified data (Cox HR, or KM median ratio for TR).
    pub marginal_naive: f64,
    pub levels: Vec<LevelSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: String,
    pub prevalence: f64,
    pub ratio: f64,
}

struct LevelFit {
    label: String,
    count: usize,
    ratio: f64,
    curves: CurvePair,
}

fn km_curve(sample: &SurvivalSample, arm: Arm) -> Result<Curve> {
    let (t, e) = sample.arm(arm);
    Ok(km_fit(&t, &e)?.to_curve())
}

fn unstratified_ratio(sample: &SurvivalSample, measure: Measure) -> Result<f64> {
    match measure {
        Measure::Hr => Ok(estim::cox_fit_two_arm(sample, None)?.hr()),
        Measure::Tr => {
            let (rt, re) = sample.arm(Arm::Rx);
            let (ct, ce) = sample.arm(Arm::C);
            Ok(estim::sample_tr(&rt, &re, &ct, &ce)?.value)
        }
        other => Err(Error::domain(format!("stratified audit does not support {other}"))),
    }
}

fn summarize(table: &SubgroupEfficacyTable<CurvePair>, measure: Measure) -> Result<f64> {
    match measure {
        Measure::Hr => Ok(sme_overall_hr(table)?.value),
        Measure::Tr => Ok(sme_overall_tr(table)?.value),
        other => Err(Error::domain(format!("stratified audit does not support {other}"))),
    }
}

/// Naive versus SME overall efficacy for each stratification factor.
///
/// Levels with no events in one arm, or whose per-level estimate fails, are
/// dropped with a warning and the remaining prevalences renormalized.
/// Prevalences are pooled (both-arm) level frequencies.
pub fn stratified_audit(sample: &SurvivalSample, factors: &[String], measure: Measure) -> Result<Vec<StratifiedComparison>> {
    if !matches!(measure, Measure::Hr | Measure::Tr) {
        return Err(Error::domain(format!("stratified audit does not support {measure}")));
    }
    let marginal_naive = unstratified_ratio(sample, measure)?;
    let marginal_pair = CurvePair { rx: km_curve(sample, Arm::Rx)?, c: km_curve(sample, Arm::C)? };
    let marginal_table = SubgroupEfficacyTable::new(vec![SubgroupRow { label: "all".into(), prevalence: 1.0, ingredient: marginal_pair }])?;
    let marginal_value = summarize(&marginal_table, measure)?;

    factors
        .iter()
        .map(|factor| {
            let f = sample.factor_index(factor)?;
            let mut warnings = Vec::new();
            let mut fits = Vec::new();
            for level in sample.levels(f) {
                let sub = sample.subset(f, &level);
                let events = |arm| sub.records().iter().filter(|r| r.arm == arm && r.event).count();
                if events(Arm::Rx) == 0 || events(Arm::C) == 0 {
                    warnings.push(format!("level '{level}' dropped: no events in one arm"));
                    continue;
                }
                let fit = unstratified_ratio(&sub, measure)
                    .and_then(|ratio| Ok((ratio, CurvePair { rx: km_curve(&sub, Arm::Rx)?, c: km_curve(&sub, Arm::C)? })));
                match fit {
                    Ok((ratio, curves)) => fits.push(LevelFit { label: level, count: sub.len(), ratio, curves }),
                    Err(e) => warnings.push(format!("level '{level}' dropped: {e}")),
                }
            }
            if fits.is_empty() {
                return Err(Error::Degenerate(format!("factor '{factor}' has no usable levels")));
            }
            let kept: usize = fits.iter().map(|l| l.count).sum();
            let weights: Vec<f64> = fits.iter().map(|l| l.count as f64 / kept as f64).collect();
            let naive_value = naive_stratified_ratio(
                &fits.iter().zip(&weights).map(|(l, &w)| (l.ratio, w)).collect::<Vec<_>>(),
            )?;
            let levels = fits
                .iter()
                .zip(&weights)
                .map(|(l, &w)| LevelSummary { level: l.label.clone(), prevalence: w, ratio: l.ratio })
                .collect();
            let rows = fits
                .into_iter()
                .zip(&weights)
                .map(|(l, &w)| SubgroupRow { label: l.label, prevalence: w, ingredient: l.curves })
                .collect::<Vec<_>>();
            let table = renormalized(rows)?;
            let sme_value = summarize(&table, measure)?;
            Ok(StratifiedComparison {
                factor: factor.clone(),
                measure,
                naive_value,
                sme_value,
                marginal_value,
                marginal_naive,
                levels,
                warnings,
            })
        })
        .collect()
}

fn renormalized<I>(mut rows: Vec<SubgroupRow<I>>) -> Result<SubgroupEfficacyTable<I>> {
    let total: f64 = rows.iter().map(|r| r.prevalence).sum();
    for r in &mut rows {
        r.prevalence /= total;
    }
    // Push the rounding residue into the largest row.
    let residue = 1.0 - rows.iter().map(|r| r.prevalence).sum::<f64>();
    if let Some(big) = rows.iter_mut().max_by(|a, b| a.prevalence.total_cmp(&b.prevalence)) {
        big.prevalence += residue;
    }
    SubgroupEfficacyTable::new(rows)
}
