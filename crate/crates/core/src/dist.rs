//! Parametric survival laws, Lehmann-family transforms and prevalence-weighted
//! mixtures, plus the quantile and scale solvers used to construct scenarios.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute time tolerance of the bisection quantile solver.
pub const QUANTILE_TOL: f64 = 1e-10;

const PREVALENCE_TOL: f64 = 1e-12;
const MAX_BRACKET_DOUBLINGS: usize = 200;

/// Weibull survival law `S(t) = exp(-(t/scale)^shape)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullDist {
    shape: f64,
    scale: f64,
}

impl WeibullDist {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::domain(format!("Weibull shape must be positive, got {shape}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::domain(format!("Weibull scale must be positive, got {scale}")));
        }
        Ok(Self { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (-(t / self.scale).powf(self.shape)).exp()
    }

    pub fn density(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return if self.shape == 1.0 { 1.0 / self.scale } else if self.shape < 1.0 { f64::INFINITY } else { 0.0 };
        }
        self.hazard(t) * self.survival(t)
    }

    /// `h(t) = (k/λ)(t/λ)^(k-1)`.
    pub fn hazard(&self, t: f64) -> f64 {
        (self.shape / self.scale) * (t / self.scale).powf(self.shape - 1.0)
    }

    pub fn median(&self) -> f64 {
        self.scale * std::f64::consts::LN_2.powf(1.0 / self.shape)
    }

    /// Time at which the survival function equals `s` (closed-form inverse).
    pub fn time_at_survival(&self, s: f64) -> f64 {
        self.scale * (-s.ln()).powf(1.0 / self.shape)
    }

    /// One inverse-CDF draw from a uniform on (0, 1).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.time_at_survival(u)
    }
}

/// Weibull law with the given shape whose median is `median`:
/// `scale = median / (ln 2)^(1/shape)`.
pub fn weibull_from_median(shape: f64, median: f64) -> Result<WeibullDist> {
    if !(median.is_finite() && median > 0.0) {
        return Err(Error::domain(format!("median must be positive, got {median}")));
    }
    if !(shape.is_finite() && shape > 0.0) {
        return Err(Error::domain(format!("shape must be positive, got {shape}")));
    }
    WeibullDist::new(shape, median / std::f64::consts::LN_2.powf(1.0 / shape))
}

/// Right-continuous step survival function, e.g. a Kaplan-Meier estimate.
///
/// `steps` holds `(time, survival just after time)` with strictly increasing
/// times. The curve may end above zero (censored tail).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCurve {
    steps: Vec<(f64, f64)>,
}

impl StepCurve {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        let mut prev_t = 0.0;
        let mut prev_s = 1.0;
        for &(t, s) in &steps {
            if !(t > prev_t) || !t.is_finite() {
                return Err(Error::domain("step times must be positive and strictly increasing"));
            }
            if !(0.0..=prev_s).contains(&s) {
                return Err(Error::domain("step survival values must be nonincreasing in [0, 1]"));
            }
            prev_t = t;
            prev_s = s;
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn survival(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|&(st, _)| st <= t);
        if idx == 0 {
            1.0
        } else {
            self.steps[idx - 1].1
        }
    }

    /// Survival value after the last step; positive for a censored tail.
    pub fn terminal_survival(&self) -> f64 {
        self.steps.last().map_or(1.0, |s| s.1)
    }

    /// True when the curve stops above zero.
    pub fn is_truncated(&self) -> bool {
        self.terminal_survival() > 0.0
    }
}

/// Prevalence-weighted mixture of survival curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureCurve {
    components: Vec<(f64, Curve)>,
}

impl MixtureCurve {
    pub fn new(components: Vec<(f64, Curve)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyInput("mixture components"));
        }
        let mut total = 0.0;
        for (p, _) in &components {
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(Error::domain(format!("prevalence must lie in (0, 1], got {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > PREVALENCE_TOL {
            return Err(Error::domain(format!("prevalences sum to {total}, expected 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, Curve)] {
        &self.components
    }

    pub fn survival(&self, t: f64) -> f64 {
        self.components.iter().map(|(p, c)| p * c.value(t)).sum()
    }
}

/// Treated curve of a Lehmann pair: the reference raised pointwise to `hr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LehmannPair {
    reference: Curve,
    hr: f64,
}

impl LehmannPair {
    pub fn new(reference: Curve, hr: f64) -> Result<Self> {
        if !(hr.is_finite() && hr > 0.0) {
            return Err(Error::domain(format!("hazard ratio must be positive, got {hr}")));
        }
        Ok(Self { reference, hr })
    }

    pub fn reference(&self) -> &Curve {
        &self.reference
    }

    pub fn hr(&self) -> f64 {
        self.hr
    }

    pub fn treated(&self) -> Curve {
        Curve::Lehmann(Box::new(self.clone()))
    }
}

/// An evaluable survival function `t >= 0 -> [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curve {
    Weibull(WeibullDist),
    Step(StepCurve),
    Mixture(MixtureCurve),
    Lehmann(Box<LehmannPair>),
}

impl From<WeibullDist> for Curve {
    fn from(d: WeibullDist) -> Self {
        Curve::Weibull(d)
    }
}

impl From<StepCurve> for Curve {
    fn from(s: StepCurve) -> Self {
        Curve::Step(s)
    }
}

impl From<MixtureCurve> for Curve {
    fn from(m: MixtureCurve) -> Self {
        Curve::Mixture(m)
    }
}

impl Curve {
    /// Survival probability at `t`; negative or NaN `t` is a domain error.
    pub fn survival_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("time must be nonnegative, got {t}")));
        }
        Ok(self.value(t))
    }

    /// Unchecked evaluation; `t <= 0` yields 1.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Curve::Weibull(w) => w.survival(t),
            Curve::Step(s) => s.survival(t),
            Curve::Mixture(m) => m.survival(t),
            Curve::Lehmann(l) => l.reference.value(t).powf(l.hr),
        }
    }

    /// Density `-dS/dt`, when the curve is absolutely continuous.
    pub fn density(&self, t: f64) -> Option<f64> {
        match self {
            Curve::Weibull(w) => Some(w.density(t)),
            Curve::Step(_) => None,
            Curve::Mixture(m) => m
                .components
                .iter()
                .map(|(p, c)| c.density(t).map(|f| p * f))
                .sum(),
            Curve::Lehmann(l) => {
                let f = l.reference.density(t)?;
                let s = l.reference.value(t);
                if l.hr == 1.0 {
                    Some(f)
                } else if s <= 0.0 {
                    Some(0.0)
                } else {
                    Some(l.hr * s.powf(l.hr - 1.0) * f)
                }
            }
        }
    }

    /// True when the curve has a density everywhere on (0, inf).
    pub fn is_continuous(&self) -> bool {
        match self {
            Curve::Weibull(_) => true,
            Curve::Step(_) => false,
            Curve::Mixture(m) => m.components.iter().all(|(_, c)| c.is_continuous()),
            Curve::Lehmann(l) => l.reference.is_continuous(),
        }
    }

    /// Point masses `(time, mass)` of a purely discrete curve, sorted by time.
    /// Returns `None` when any part of the curve is continuous.
    pub fn jumps(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Curve::Weibull(_) => None,
            Curve::Step(s) => {
                let mut prev = 1.0;
                Some(
                    s.steps
                        .iter()
                        .map(|&(t, v)| {
                            let mass = prev - v;
                            prev = v;
                            (t, mass)
                        })
                        .collect(),
                )
            }
            Curve::Mixture(m) => {
                let mut times: Vec<f64> = Vec::new();
                for (_, c) in &m.components {
                    times.extend(c.jumps()?.into_iter().map(|(t, _)| t));
                }
                times.sort_by(f64::total_cmp);
                times.dedup();
                Some(self.masses_at(&times))
            }
            Curve::Lehmann(l) => {
                let times: Vec<f64> = l.reference.jumps()?.into_iter().map(|(t, _)| t).collect();
                Some(self.masses_at(&times))
            }
        }
    }

    fn masses_at(&self, times: &[f64]) -> Vec<(f64, f64)> {
        let mut prev = 1.0;
        times
            .iter()
            .map(|&t| {
                let v = self.value(t);
                let mass = prev - v;
                prev = v;
                (t, mass)
            })
            .collect()
    }

    /// Survival remaining after the last jump of a discrete curve (0 for
    /// parametric curves).
    pub fn terminal_survival(&self) -> f64 {
        match self {
            Curve::Weibull(_) => 0.0,
            Curve::Step(s) => s.terminal_survival(),
            Curve::Mixture(m) => m.components.iter().map(|(p, c)| p * c.terminal_survival()).sum(),
            Curve::Lehmann(l) => l.reference.terminal_survival().powf(l.hr),
        }
    }

    /// A time of the order of the curve's bulk, used to seed brackets.
    pub fn scale_hint(&self) -> f64 {
        match self {
            Curve::Weibull(w) => w.scale(),
            Curve::Step(s) => s.steps.last().map_or(1.0, |x| x.0),
            Curve::Mixture(m) => m
                .components
                .iter()
                .map(|(_, c)| c.scale_hint())
                .fold(f64::MIN_POSITIVE, f64::max),
            Curve::Lehmann(l) => l.reference.scale_hint(),
        }
    }

    /// Time `t` with `S(t) = p`.
    ///
    /// Continuous curves are solved by geometric bracket expansion from
    /// `[0, scale_hint]` followed by bisection to [`QUANTILE_TOL`]. Discrete
    /// curves return the smallest jump time with `S(t) <= p`, or
    /// [`Error::NotReached`] if the curve stays above `p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {p}")));
        }
        if let Some(jumps) = self.jumps() {
            return jumps
                .iter()
                .find(|&&(t, _)| self.value(t) <= p)
                .map(|&(t, _)| t)
                .ok_or(Error::NotReached { level: p });
        }
        let mut lo = 0.0;
        let mut hi = self.scale_hint().max(f64::MIN_POSITIVE);
        let mut doublings = 0;
        while self.value(hi) > p {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > MAX_BRACKET_DOUBLINGS || !hi.is_finite() {
                return Err(Error::NotReached { level: p });
            }
        }
        while hi - lo > QUANTILE_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(mid) > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn median(&self) -> Result<f64> {
        self.quantile(0.5)
    }
}

/// Curve whose value is `reference(t)^hr` at every `t`.
pub fn lehmann_transform(reference: Curve, hr: f64) -> Result<Curve> {
    Ok(LehmannPair::new(reference, hr)?.treated())
}

/// Scale of the complement subgroup's Weibull law so that the two-part mixture
/// `prevalence_plus * plus + (1 - prevalence_plus) * minus` has survival
/// exactly one half at `overall_median`.
pub fn solve_complement_scale(
    shape_minus: f64,
    overall_median: f64,
    prevalence_plus: f64,
    plus_curve: &Curve,
) -> Result<f64> {
    if !(shape_minus.is_finite() && shape_minus > 0.0) {
        return Err(Error::domain(format!("shape must be positive, got {shape_minus}")));
    }
    if !(overall_median.is_finite() && overall_median > 0.0) {
        return Err(Error::domain(format!("median must be positive, got {overall_median}")));
    }
    if !(prevalence_plus > 0.0 && prevalence_plus < 1.0) {
        return Err(Error::domain(format!(
            "prevalence must lie in (0, 1), got {prevalence_plus}"
        )));
    }
    let s_plus = plus_curve.survival_at(overall_median)?;
    let target = (0.5 - prevalence_plus * s_plus) / (1.0 - prevalence_plus);
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InfeasibleScenario(format!(
            "complement subgroup would need survival {target:.6} at t = {overall_median}"
        )));
    }
    Ok(overall_median / (-target.ln()).powf(1.0 / shape_minus))
}

/// `n` i.i.d. inverse-CDF draws, one uniform per subject in order.
pub fn sample_times<R: Rng + ?Sized>(dist: &WeibullDist, rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| dist.draw(rng)).collect()
}
