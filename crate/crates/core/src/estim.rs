//! Estimation from patient-level data: Kaplan-Meier, Weibull maximum
//! likelihood, the two-arm Cox partial likelihood, empirical living-longer
//! probability and the HR/LLP and TR/HR conversions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dist::{Curve, StepCurve, WeibullDist};
use crate::error::{Error, Result};

/// Treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Rx,
    C,
}

impl Arm {
    pub fn other(self) -> Arm {
        match self {
            Arm::Rx => Arm::C,
            Arm::C => Arm::Rx,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Rx => "Rx",
            Arm::C => "C",
        })
    }
}

/// One patient: follow-up time, death indicator, arm and stratum levels
/// (aligned with [`SurvivalSample::factors`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub time: f64,
    pub event: bool,
    pub arm: Arm,
    pub strata: Vec<String>,
}

/// Patient-level survival data with a shared set of stratification factors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurvivalSample {
    factors: Vec<String>,
    records: Vec<Record>,
}

impl SurvivalSample {
    pub fn new(factors: Vec<String>, records: Vec<Record>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !(r.time.is_finite() && r.time > 0.0) {
                return Err(Error::domain(format!("record {i}: time must be positive, got {}", r.time)));
            }
            if r.strata.len() != factors.len() {
                return Err(Error::domain(format!(
                    "record {i}: {} stratum labels for {} factors",
                    r.strata.len(),
                    factors.len()
                )));
            }
        }
        Ok(Self { factors, records })
    }

    /// Unstratified sample from per-arm `(time, event)` lists.
    pub fn from_arms(rx: &[(f64, bool)], c: &[(f64, bool)]) -> Result<Self> {
        let records = rx
            .iter()
            .map(|&(t, e)| (t, e, Arm::Rx))
            .chain(c.iter().map(|&(t, e)| (t, e, Arm::C)))
            .map(|(time, event, arm)| Record { time, event, arm, strata: Vec::new() })
            .collect();
        Self::new(Vec::new(), records)
    }

    /// Unstratified, uncensored sample.
    pub fn from_uncensored(rx: &[f64], c: &[f64]) -> Result<Self> {
        let rx: Vec<_> = rx.iter().map(|&t| (t, true)).collect();
        let c: Vec<_> = c.iter().map(|&t| (t, true)).collect();
        Self::from_arms(&rx, &c)
    }

    pub fn factors(&self) -> &[String] {
        &self.factors
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn factor_index(&self, name: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::domain(format!("unknown stratification factor '{name}'")))
    }

    /// `(times, events)` of one arm, in record order.
    pub fn arm(&self, arm: Arm) -> (Vec<f64>, Vec<bool>) {
        self.records.iter().filter(|r| r.arm == arm).map(|r| (r.time, r.event)).unzip()
    }

    pub fn count(&self, arm: Arm) -> usize {
        self.records.iter().filter(|r| r.arm == arm).count()
    }

    pub fn censored(&self) -> usize {
        self.records.iter().filter(|r| !r.event).count()
    }

    /// Same patients with Rx and C swapped.
    pub fn swap_arms(&self) -> Self {
        let records = self
            .records
            .iter()
            .map(|r| Record { arm: r.arm.other(), ..r.clone() })
            .collect();
        Self { factors: self.factors.clone(), records }
    }

    /// Distinct levels of a factor, in order of first appearance.
    pub fn levels(&self, factor: usize) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.strata[factor]) {
                out.push(r.strata[factor].clone());
            }
        }
        out
    }

    /// Records whose factor equals `level`.
    pub fn subset(&self, factor: usize, level: &str) -> Self {
        let records = self.records.iter().filter(|r| r.strata[factor] == level).cloned().collect();
        Self { factors: self.factors.clone(), records }
    }
}

/// Efficacy measure kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Measure {
    /// Relative response.
    Rr,
    /// Time ratio (median Rx / median C).
    Tr,
    /// Hazard ratio.
    Hr,
    /// Living-longer probability.
    Llp,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Rr => "RR",
            Measure::Tr => "TR",
            Measure::Hr => "HR",
            Measure::Llp => "LLP",
        })
    }
}

/// A point value of an efficacy measure, optionally with the standard error
/// of its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficacySummary {
    pub measure: Measure,
    pub value: f64,
    pub log_se: Option<f64>,
}

impl EfficacySummary {
    pub fn new(measure: Measure, value: f64, log_se: Option<f64>) -> Result<Self> {
        let ok = match measure {
            Measure::Llp => value > 0.0 && value < 1.0,
            _ => value.is_finite() && value > 0.0,
        };
        if !ok {
            return Err(Error::domain(format!("{measure} value {value} out of range")));
        }
        if let Some(se) = log_se {
            if !(se >= 0.0) {
                return Err(Error::domain(format!("standard error must be nonnegative, got {se}")));
            }
        }
        Ok(Self { measure, value, log_se })
    }
}

/// One distinct event time of a Kaplan-Meier fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmStep {
    pub time: f64,
    pub at_risk: usize,
    pub events: usize,
    /// Estimate just after `time`.
    pub survival: f64,
}

/// Product-limit estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub steps: Vec<KmStep>,
    pub n: usize,
}

impl KmCurve {
    pub fn survival(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|s| s.time <= t);
        if idx == 0 {
            1.0
        } else {
            self.steps[idx - 1].survival
        }
    }

    pub fn to_curve(&self) -> Curve {
        let steps = self.steps.iter().map(|s| (s.time, s.survival)).collect();
        // Times strictly increase and survival is nonincreasing by construction.
        Curve::Step(StepCurve::new(steps).expect("valid Kaplan-Meier steps"))
    }

    /// Smallest event time with estimate at or below one half.
    pub fn median(&self) -> Option<f64> {
        km_median(self)
    }
}

fn sorted_pairs(times: &[f64], events: &[bool]) -> Result<Vec<(f64, bool)>> {
    if times.len() != events.len() {
        return Err(Error::domain("times and events differ in length"));
    }
    if times.is_empty() {
        return Err(Error::EmptyInput("survival times"));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::domain(format!("times must be positive, got {t}")));
    }
    let mut pairs: Vec<(f64, bool)> = times.iter().copied().zip(events.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}

/// Kaplan-Meier product-limit estimate `S(t) = prod_{t_j <= t} (1 - d_j/n_j)`.
///
/// Between censorings the product telescopes to a ratio of risk-set sizes,
/// and it is evaluated that way: on uncensored data every step is exactly
/// the empirical fraction `#(T > t) / n`.
pub fn km_fit(times: &[f64], events: &[bool]) -> Result<KmCurve> {
    let pairs = sorted_pairs(times, events)?;
    let n = pairs.len();
    let mut steps = Vec::new();
    let mut surv = 1.0;
    // Estimate at the start of the current censoring-free run, its risk set,
    // and the risk set left after the previous event time.
    let (mut base, mut anchor, mut left) = (1.0, n, n);
    let mut i = 0;
    while i < n {
        let t = pairs[i].0;
        let at_risk = n - i;
        let mut d = 0;
        while i < n && pairs[i].0 == t {
            d += usize::from(pairs[i].1);
            i += 1;
        }
        if d > 0 {
            if at_risk != left {
                base = surv;
                anchor = at_risk;
            }
            left = at_risk - d;
            surv = base * (left as f64 / anchor as f64);
            steps.push(KmStep { time: t, at_risk, events: d, survival: surv });
        }
    }
    Ok(KmCurve { steps, n })
}

/// Smallest event time with `S(t) <= 0.5`; `None` when not reached.
pub fn km_median(curve: &KmCurve) -> Option<f64> {
    curve.steps.iter().find(|s| s.survival <= 0.5).map(|s| s.time)
}

/// Weibull maximum-likelihood fit in `(log shape, log scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullFit {
    pub dist: WeibullDist,
    /// Covariance of `(log shape, log scale)` from the observed information.
    pub covariance: [[f64; 2]; 2],
    pub log_likelihood: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl WeibullFit {
    pub fn log_scale_se(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }
}

/// Censored Weibull log-likelihood at `(log shape, log scale)`.
///
/// With `z_i = k (ln t_i - ln λ)` the log-likelihood is
/// `Σ δ_i (ln k - ln t_i + z_i) - e^{z_i}`.
pub fn weibull_log_likelihood(params: [f64; 2], times: &[f64], events: &[bool]) -> f64 {
    let k = params[0].exp();
    times
        .iter()
        .zip(events)
        .map(|(&t, &d)| {
            let y = t.ln();
            let z = k * (y - params[1]);
            let ev = if d { params[0] - y + z } else { 0.0 };
            ev - z.exp()
        })
        .sum()
}

/// Analytic gradient and Hessian of [`weibull_log_likelihood`].
pub fn weibull_derivatives(params: [f64; 2], times: &[f64], events: &[bool]) -> ([f64; 2], [[f64; 2]; 2]) {
    let k = params[0].exp();
    let (mut ga, mut gb) = (0.0, 0.0);
    let (mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0);
    for (&t, &d) in times.iter().zip(events) {
        let z = k * (t.ln() - params[1]);
        let ez = z.exp();
        let delta = if d { 1.0 } else { 0.0 };
        ga += delta * (1.0 + z) - ez * z;
        gb += k * (ez - delta);
        haa += delta * z - ez * z * (z + 1.0);
        hab += -k * delta + k * ez * (z + 1.0);
        hbb += -k * k * ez;
    }
    ([ga, gb], [[haa, hab], [hab, hbb]])
}

fn weibull_start(times: &[f64], events: &[bool]) -> Result<[f64; 2]> {
    let km = km_fit(times, events)?;
    let pts: Vec<(f64, f64)> = km
        .steps
        .iter()
        .filter(|s| s.survival > 0.0 && s.survival < 1.0)
        .map(|s| (s.time.ln(), (-s.survival.ln()).ln()))
        .collect();
    let mean_log_t = times.iter().map(|t| t.ln()).sum::<f64>() / times.len() as f64;
    if pts.len() < 2 {
        return Ok([0.0, mean_log_t]);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if !(slope.is_finite() && slope > 0.0) {
        return Ok([0.0, mean_log_t]);
    }
    // ln(-ln S) = k ln t - k ln λ
    let log_scale = mx - my / slope;
    Ok([slope.ln(), log_scale])
}

const WEIBULL_MAX_ITER: usize = 100;
const WEIBULL_GRAD_TOL: f64 = 1e-8;

/// Weibull MLE for right-censored data by damped Newton iterations on
/// `(log shape, log scale)`, started from a least-squares fit of
/// `ln(-ln S_KM)` on `ln t`.
pub fn weibull_mle(times: &[f64], events: &[bool]) -> Result<WeibullFit> {
    let pairs = sorted_pairs(times, events)?;
    let n_events = events.iter().filter(|&&e| e).count();
    if n_events < 2 {
        return Err(Error::Degenerate(format!("Weibull fit needs at least 2 events, got {n_events}")));
    }
    let first_event = pairs.iter().find(|p| p.1).map(|p| p.0);
    if pairs.iter().all(|p| Some(p.0) == first_event) {
        return Err(Error::Degenerate("all observed times are identical".into()));
    }

    let mut x = weibull_start(times, events)?;
    let mut ll = weibull_log_likelihood(x, times, events);
    for iter in 0..=WEIBULL_MAX_ITER {
        let (g, h) = weibull_derivatives(x, times, events);
        let gnorm = g[0].hypot(g[1]);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if gnorm <= WEIBULL_GRAD_TOL && det > 0.0 && h[0][0] < 0.0 {
            let info_det = det;
            let covariance = [
                [-h[1][1] / info_det, h[0][1] / info_det],
                [h[1][0] / info_det, -h[0][0] / info_det],
            ];
            return Ok(WeibullFit {
                dist: WeibullDist::new(x[0].exp(), x[1].exp())?,
                covariance,
                log_likelihood: ll,
                iterations: iter,
                gradient_norm: gnorm,
            });
        }
        if iter == WEIBULL_MAX_ITER {
            break;
        }
        // Newton direction when the Hessian is negative definite, gradient
        // ascent otherwise.
        let mut dir = if det > 0.0 && h[0][0] < 0.0 {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ]
        } else {
            let scale = 1.0 / (1.0 + gnorm);
            [g[0] * scale, g[1] * scale]
        };
        let mut step = 1.0;
        loop {
            let cand = [x[0] + step * dir[0], x[1] + step * dir[1]];
            let cand_ll = weibull_log_likelihood(cand, times, events);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                x = cand;
                ll = cand_ll;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                // No ascent possible along this direction; nudge with the gradient.
                dir = [g[0] * 1e-6, g[1] * 1e-6];
                x = [x[0] + dir[0], x[1] + dir[1]];
                ll = weibull_log_likelihood(x, times, events);
                break;
            }
        }
        if !(x[0].is_finite() && x[1].is_finite()) || x[0].abs() > 20.0 {
            return Err(Error::numerical(
                "weibull_mle",
                format!("iterates diverged at log shape {:.3}, log scale {:.3}", x[0], x[1]),
            ));
        }
    }
    let (g, _) = weibull_derivatives(x, times, events);
    Err(Error::numerical(
        "weibull_mle",
        format!(
            "no convergence after {WEIBULL_MAX_ITER} iterations: log shape {:.6}, log scale {:.6}, |grad| {:.3e}",
            x[0],
            x[1],
            g[0].hypot(g[1])
        ),
    ))
}

/// Closed-form scale MLE with the shape held fixed:
/// `λ = (Σ t_i^k / Σ δ_i)^(1/k)`. With `shape = 1` and no censoring this is
/// the sample mean.
pub fn weibull_mle_fixed_shape(times: &[f64], events: &[bool], shape: f64) -> Result<WeibullDist> {
    sorted_pairs(times, events)?;
    let d = events.iter().filter(|&&e| e).count();
    if d == 0 {
        return Err(Error::Degenerate("no events".into()));
    }
    let total: f64 = times.iter().map(|t| t.powf(shape)).sum();
    WeibullDist::new(shape, (total / d as f64).powf(1.0 / shape))
}

/// Mann-Whitney living-longer probability of Rx over C with half weight on
/// ties: `(#{t_Rx > t_C} + ½ #{t_Rx = t_C}) / (n m)`.
pub fn empirical_llp(rx_times: &[f64], c_times: &[f64]) -> Result<f64> {
    if rx_times.is_empty() || c_times.is_empty() {
        return Err(Error::EmptyInput("living-longer probability needs both arms"));
    }
    let twice = mann_whitney_twice(rx_times, c_times);
    Ok(twice as f64 / (2.0 * rx_times.len() as f64 * c_times.len() as f64))
}

/// Empirical LLP of a sample, rejecting censored records.
pub fn empirical_llp_sample(sample: &SurvivalSample) -> Result<f64> {
    let censored = sample.censored();
    if censored > 0 {
        return Err(Error::UnsupportedCensoring { censored });
    }
    let (rx, _) = sample.arm(Arm::Rx);
    let (c, _) = sample.arm(Arm::C);
    empirical_llp(&rx, &c)
}

/// Twice the Mann-Whitney count of Rx values above C values (ties count 1).
pub fn mann_whitney_twice(rx: &[f64], c: &[f64]) -> u64 {
    let mut c_sorted = c.to_vec();
    c_sorted.sort_by(f64::total_cmp);
    rx.iter()
        .map(|&x| {
            let below = c_sorted.partition_point(|&y| y < x);
            let not_above = c_sorted.partition_point(|&y| y <= x);
            (2 * below + (not_above - below)) as u64
        })
        .sum()
}

/// `HR = (1 - LLP) / LLP`.
pub fn hr_from_llp(llp: f64) -> Result<f64> {
    if !(llp > 0.0 && llp < 1.0) {
        return Err(Error::domain(format!("LLP must lie in (0, 1), got {llp}")));
    }
    Ok((1.0 - llp) / llp)
}

/// `LLP = 1 / (1 + HR)`.
pub fn llp_from_hr(hr: f64) -> Result<f64> {
    if !(hr.is_finite() && hr > 0.0) {
        return Err(Error::domain(format!("HR must be positive, got {hr}")));
    }
    Ok(1.0 / (1.0 + hr))
}

/// Hazard ratio implied by a time ratio for Weibull arms with a common shape:
/// `HR = TR^(-shape)`.
pub fn tr_to_hr(tr: f64, shape: f64) -> Result<f64> {
    check_positive(tr, "time ratio")?;
    check_positive(shape, "shape")?;
    Ok(tr.powf(-shape))
}

/// Inverse of [`tr_to_hr`]: `TR = HR^(-1/shape)`.
pub fn hr_to_tr(hr: f64, shape: f64) -> Result<f64> {
    check_positive(hr, "hazard ratio")?;
    check_positive(shape, "shape")?;
    Ok(hr.powf(-1.0 / shape))
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be positive, got {x}")))
    }
}

/// Two-arm Cox fit: coefficient of the Rx indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub log_hr: f64,
    pub se: f64,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl CoxFit {
    pub fn hr(&self) -> f64 {
        self.log_hr.exp()
    }
}

/// Risk-set summary at one distinct event time: at-risk and event counts per arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RiskRow {
    pub n_rx: f64,
    pub n_c: f64,
    pub d_rx: f64,
    pub d_c: f64,
}

fn risk_rows(rx_ev: &[(f64, bool)], c_ev: &[(f64, bool)]) -> Vec<RiskRow> {
    let mut all: Vec<(f64, bool, Arm)> = rx_ev
        .iter()
        .map(|&(t, e)| (t, e, Arm::Rx))
        .chain(c_ev.iter().map(|&(t, e)| (t, e, Arm::C)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut n_rx, mut n_c) = (rx_ev.len() as f64, c_ev.len() as f64);
    let mut rows = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        let (mut d_rx, mut d_c, mut l_rx, mut l_c) = (0.0, 0.0, 0.0, 0.0);
        while i < all.len() && all[i].0 == t {
            match (all[i].2, all[i].1) {
                (Arm::Rx, true) => d_rx += 1.0,
                (Arm::C, true) => d_c += 1.0,
                _ => {}
            }
            match all[i].2 {
                Arm::Rx => l_rx += 1.0,
                Arm::C => l_c += 1.0,
            }
            i += 1;
        }
        if d_rx + d_c > 0.0 {
            rows.push(RiskRow { n_rx, n_c, d_rx, d_c });
        }
        n_rx -= l_rx;
        n_c -= l_c;
    }
    rows
}

/// Per-distinct-event-time risk sets of a two-arm sample (unstratified).
pub(crate) fn risk_table(sample: &SurvivalSample) -> Vec<RiskRow> {
    let (rt, re) = sample.arm(Arm::Rx);
    let (ct, ce) = sample.arm(Arm::C);
    let rx: Vec<_> = rt.into_iter().zip(re).collect();
    let c: Vec<_> = ct.into_iter().zip(ce).collect();
    risk_rows(&rx, &c)
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Breslow score, information and partial log-likelihood at `beta`.
///
/// With `p = σ(β + ln n_Rx − ln n_C)` (the Rx share of the risk set weight) and
/// `q = σ(−(β + ln n_Rx − ln n_C))`, each time contributes
/// `U += d_Rx q − d_C p`, `I += d p q`. Writing the terms this way makes the
/// fit exactly antisymmetric under relabeling of the arms.
fn breslow(beta: f64, strata: &[Vec<RiskRow>]) -> (f64, f64, f64) {
    let (mut u, mut info, mut ll) = (0.0, 0.0, 0.0);
    for rows in strata {
        for r in rows {
            let d = r.d_rx + r.d_c;
            if r.n_rx == 0.0 || r.n_c == 0.0 {
                // One arm at risk: no information about beta.
                ll -= d * (r.n_rx + r.n_c).ln();
                continue;
            }
            let z = beta + (r.n_rx.ln() - r.n_c.ln());
            let p = logistic(z);
            let q = logistic(-z);
            u += r.d_rx * q - r.d_c * p;
            info += d * (p * q);
            ll += r.d_rx * (p.ln() - r.n_rx.ln()) + r.d_c * (q.ln() - r.n_c.ln());
        }
    }
    (u, info, ll)
}

/// Score limits as `beta -> -inf` and `+inf`.
fn score_limits(strata: &[Vec<RiskRow>]) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0, 0.0);
    for r in strata.iter().flatten() {
        if r.n_rx == 0.0 || r.n_c == 0.0 {
            continue;
        }
        lo += r.d_rx;
        hi -= r.d_c;
    }
    (lo, hi)
}

const COX_SCORE_TOL: f64 = 1e-10;
const COX_MAX_ITER: usize = 200;

/// Two-arm Cox proportional hazards fit with Breslow ties, optionally
/// stratified by one factor. Newton iterations are safeguarded by a bracket on
/// the (monotone) score.
pub fn cox_fit_two_arm(sample: &SurvivalSample, strata_factor: Option<&str>) -> Result<CoxFit> {
    if sample.count(Arm::Rx) == 0 || sample.count(Arm::C) == 0 {
        return Err(Error::Degenerate("Cox fit needs both arms".into()));
    }
    let groups: Vec<SurvivalSample> = match strata_factor {
        None => vec![sample.clone()],
        Some(name) => {
            let f = sample.factor_index(name)?;
            sample.levels(f).iter().map(|l| sample.subset(f, l)).collect()
        }
    };
    let strata: Vec<Vec<RiskRow>> = groups.iter().map(risk_table).collect();
    if strata.iter().all(|s| s.is_empty()) {
        return Err(Error::Degenerate("no events".into()));
    }
    let (u_lo, u_hi) = score_limits(&strata);
    if !(u_lo > 0.0 && u_hi < 0.0) {
        return Err(Error::numerical(
            "cox_fit_two_arm",
            format!("monotone likelihood: score limits ({u_lo}, {u_hi}); the estimate is infinite"),
        ));
    }

    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut beta = 0.0;
    for iter in 0..COX_MAX_ITER {
        let (u, info, ll) = breslow(beta, &strata);
        if u.abs() <= COX_SCORE_TOL {
            if !(info > 0.0) {
                return Err(Error::numerical("cox_fit_two_arm", "zero information at optimum"));
            }
            return Ok(CoxFit { log_hr: beta, se: info.sqrt().recip(), iterations: iter, log_likelihood: ll });
        }
        if u > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let mut next = beta + u / info;
        if !(next.is_finite()) || next <= lo || next >= hi {
            next = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + 1.0,
                (false, true) => hi - 1.0,
                (false, false) => unreachable!("bracket updated above"),
            };
        }
        if next == beta {
            // Bracket collapsed to adjacent floats; score cannot get smaller.
            let (_, info, ll) = breslow(beta, &strata);
            return Ok(CoxFit { log_hr: beta, se: info.sqrt().recip(), iterations: iter, log_likelihood: ll });
        }
        beta = next;
    }
    Err(Error::numerical("cox_fit_two_arm", format!("no convergence after {COX_MAX_ITER} iterations, beta {beta}")))
}

/// Time ratio of KM medians, `median_Rx / median_C`.
pub fn sample_tr(rx_times: &[f64], rx_events: &[bool], c_times: &[f64], c_events: &[bool]) -> Result<EfficacySummary> {
    let m_rx = km_fit(rx_times, rx_events)?.median().ok_or(Error::MedianNotReached { arm: Arm::Rx })?;
    let m_c = km_fit(c_times, c_events)?.median().ok_or(Error::MedianNotReached { arm: Arm::C })?;
    EfficacySummary::new(Measure::Tr, m_rx / m_c, None)
}
