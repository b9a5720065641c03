//! Hypothesis tests and confidence constructions: the log-rank score test,
//! Wald tests for Cox and Weibull fits, the "reject then compare medians"
//! decision procedure, and the Neyman confidence set for the hazard ratio
//! obtained by inverting the Mann-Whitney test under the Lehmann family.

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::estim::{self, km_fit, risk_table, Arm, SurvivalSample, WeibullFit};
use crate::rng;

/// Two-sided normal p-value `2 (1 - Φ(|z|))`.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Log-rank statistic with the Rx arm as the reference for observed minus
/// expected deaths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRankResult {
    pub observed_minus_expected: f64,
    pub variance: f64,
    pub z: f64,
    pub p_two_sided: f64,
    /// Set when the hypergeometric variance is zero; `z = 0`, `p = 1` then.
    pub zero_variance: bool,
}

/// Log-rank (score) test of equal survival functions.
///
/// Over distinct event times with totals `(n, d)` and Rx counts `(n1, d1)`:
/// `O − E = Σ (d1 − d n1/n)` and
/// `V = Σ d (n1/n)(1 − n1/n)(n − d)/(n − 1)`, with `n = 1` terms contributing 0.
pub fn logrank_test(sample: &SurvivalSample) -> Result<LogRankResult> {
    if sample.count(Arm::Rx) == 0 || sample.count(Arm::C) == 0 {
        return Err(Error::Degenerate("log-rank test needs both arms".into()));
    }
    let rows = risk_table(sample);
    if rows.is_empty() {
        return Err(Error::Degenerate("log-rank test needs at least one event".into()));
    }
    let (mut o_minus_e, mut var) = (0.0, 0.0);
    for r in &rows {
        let n = r.n_rx + r.n_c;
        let d = r.d_rx + r.d_c;
        // d1 - d n1/n written symmetrically in the two arms.
        o_minus_e += (r.d_rx * r.n_c - r.d_c * r.n_rx) / n;
        if n > 1.0 {
            var += d * (r.n_rx * r.n_c) * (n - d) / (n * n * (n - 1.0));
        }
    }
    if var > 0.0 {
        let z = o_minus_e / var.sqrt();
        Ok(LogRankResult { observed_minus_expected: o_minus_e, variance: var, z, p_two_sided: two_sided_p(z), zero_variance: false })
    } else {
        Ok(LogRankResult { observed_minus_expected: o_minus_e, variance: 0.0, z: 0.0, p_two_sided: 1.0, zero_variance: true })
    }
}

/// Wald statistic for a log-scale estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_two_sided: f64,
}

impl WaldResult {
    fn new(estimate: f64, se: f64) -> Result<Self> {
        if !(se.is_finite() && se > 0.0) {
            return Err(Error::numerical("wald", format!("standard error {se} is not positive")));
        }
        let z = estimate / se;
        Ok(Self { estimate, se, z, p_two_sided: two_sided_p(z) })
    }

    /// Equal-tailed confidence interval for the estimate on its own scale.
    pub fn interval(&self, level: f64) -> (f64, f64) {
        use statrs::distribution::{ContinuousCDF, Normal};
        let q = Normal::standard().inverse_cdf(0.5 + level / 2.0);
        (self.estimate - q * self.se, self.estimate + q * self.se)
    }
}

/// Wald test of `log HR = 0` from the two-arm Cox fit.
pub fn wald_test_cox(sample: &SurvivalSample) -> Result<WaldResult> {
    let fit = estim::cox_fit_two_arm(sample, None)?;
    WaldResult::new(fit.log_hr, fit.se)
}

/// Wald test of `log TR = log λ_Rx − log λ_C = 0` from independent per-arm
/// Weibull fits.
pub fn wald_test_weibull(rx: &WeibullFit, c: &WeibullFit) -> Result<WaldResult> {
    let est = rx.dist.scale().ln() - c.dist.scale().ln();
    let se = (rx.covariance[1][1] + c.covariance[1][1]).sqrt();
    WaldResult::new(est, se)
}

/// Outcome of the decision procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    NoClaim,
    RxLongerMedian,
    CLongerMedian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub claim: Claim,
    pub p_value: f64,
    pub rejected: bool,
    pub median_rx: Option<f64>,
    pub median_c: Option<f64>,
    /// The test rejected but the medians were equal or not reached.
    pub tie: bool,
    /// The sample was degenerate (e.g. no events); counted as no claim.
    pub degenerate: bool,
}

/// Reject with the level-`alpha` log-rank test, then claim whichever arm has
/// the longer Kaplan-Meier median.
pub fn decision_procedure(sample: &SurvivalSample, alpha: f64) -> Decision {
    let lr = match logrank_test(sample) {
        Ok(lr) => lr,
        Err(_) => {
            return Decision {
                claim: Claim::NoClaim,
                p_value: 1.0,
                rejected: false,
                median_rx: None,
                median_c: None,
                tie: false,
                degenerate: true,
            }
        }
    };
    decide(sample, &lr, alpha)
}

pub(crate) fn decide(sample: &SurvivalSample, lr: &LogRankResult, alpha: f64) -> Decision {
    let median = |arm| {
        let (t, e) = sample.arm(arm);
        km_fit(&t, &e).ok().and_then(|km| km.median())
    };
    let (median_rx, median_c) = (median(Arm::Rx), median(Arm::C));
    let rejected = lr.p_two_sided < alpha;
    let (claim, tie) = if !rejected {
        (Claim::NoClaim, false)
    } else {
        match (median_rx, median_c) {
            (Some(a), Some(b)) if a > b => (Claim::RxLongerMedian, false),
            (Some(a), Some(b)) if a < b => (Claim::CLongerMedian, false),
            _ => (Claim::NoClaim, true),
        }
    };
    Decision { claim, p_value: lr.p_two_sided, rejected, median_rx, median_c, tie, degenerate: false }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Options for [`mw_pivot_ci`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotOptions {
    pub level: f64,
    pub grid: Vec<f64>,
    pub mc_reps: usize,
    pub seed: u64,
}

impl Default for PivotOptions {
    fn default() -> Self {
        Self { level: 0.95, grid: log_grid(1.0 / 50.0, 50.0, 200), mc_reps: 2000, seed: 0 }
    }
}

impl PivotOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.mc_reps < 2000 {
            return Err(Error::InvalidConfig(format!("mc_reps must be at least 2000, got {}", self.mc_reps)));
        }
        if self.grid.is_empty() || self.grid.iter().any(|&g| !(g.is_finite() && g > 0.0)) {
            return Err(Error::InvalidConfig("grid must be a nonempty list of positive values".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Neyman confidence set for the hazard ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub level: f64,
    /// Grid points whose acceptance region contains the observed statistic.
    pub accepted: Vec<f64>,
    /// Convex hull of `accepted`.
    pub lo: f64,
    pub hi: f64,
    /// Accepted points do not form a contiguous run of the grid.
    pub non_convex: bool,
    pub observed_llp: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    pub mc_reps: usize,
    pub seed: u64,
}

impl ConfidenceSet {
    pub fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }
}

/// Monte Carlo null distributions of the Mann-Whitney count under the Lehmann
/// family, one per grid value of the hazard ratio.
///
/// Under `S_Rx = S_C^θ` the survival-probability transforms are
/// `a_j = S_C(T_C) ~ U(0,1)` for controls and `b_i = S_C(T_Rx) = w_i^{1/θ}`
/// with `w_i ~ U(0,1)` for treated subjects; smaller values mean longer
/// lives, so Rx outlives C exactly when `b_i < a_j`. The comparison runs on
/// the log scale (`ln w_i / θ < ln a_j`) to avoid a `powf` per draw. The same `(a, w)` draws
/// are reused at every grid value, which makes each simulated count
/// nonincreasing in θ. Draws for replicate `r` come from the stream
/// `(seed, r, "mw-pivot")`.
#[derive(Debug, Clone)]
pub struct LehmannNullTable {
    n_rx: usize,
    n_c: usize,
    grid: Vec<f64>,
    /// Sorted doubled counts, one vector per grid value.
    counts: Vec<Vec<u64>>,
    mc_reps: usize,
    seed: u64,
}

impl LehmannNullTable {
    pub fn build(n_rx: usize, n_c: usize, grid: &[f64], mc_reps: usize, seed: u64) -> Result<Self> {
        if n_rx == 0 || n_c == 0 {
            return Err(Error::EmptyInput("pivot construction needs both arms"));
        }
        let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..mc_reps)
            .into_par_iter()
            .map(|r| {
                let mut g = rng::stream(seed, r as u64, rng::TAG_PIVOT);
                // Work on the log scale: b < a  <=>  ln(w)/θ < ln(a).
                let mut a: Vec<f64> = (0..n_c).map(|_| g.sample::<f64, _>(Open01).ln()).collect();
                let mut w: Vec<f64> = (0..n_rx).map(|_| g.sample::<f64, _>(Open01).ln()).collect();
                a.sort_by(f64::total_cmp);
                w.sort_by(f64::total_cmp);
                (a, w)
            })
            .collect();
        let counts = grid
            .par_iter()
            .map(|&theta| {
                let inv = 1.0 / theta;
                let mut b = Vec::with_capacity(n_rx);
                let mut out: Vec<u64> = draws
                    .iter()
                    .map(|(a, w)| {
                        b.clear();
                        b.extend(w.iter().map(|&x| x * inv));
                        twice_count_below(&b, a)
                    })
                    .collect();
                out.sort_unstable();
                out
            })
            .collect();
        Ok(Self { n_rx, n_c, grid: grid.to_vec(), counts, mc_reps, seed })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Equal-tailed acceptance test at grid index `i`: accept unless one of the
    /// tail frequencies `P(U <= u)` or `P(U >= u)` (boundary counts included)
    /// is at most `(1 - level)/2`.
    pub fn accepts(&self, i: usize, twice_u: u64, level: f64) -> bool {
        let sims = &self.counts[i];
        let r = sims.len() as f64;
        let at_most = sims.partition_point(|&x| x <= twice_u) as f64;
        let at_least = (sims.len() - sims.partition_point(|&x| x < twice_u)) as f64;
        let half_alpha = (1.0 - level) / 2.0;
        at_most / r > half_alpha && at_least / r > half_alpha
    }

    /// Accepted interval of doubled counts at grid index `i`.
    pub fn acceptance_region(&self, i: usize, level: f64) -> Option<(u64, u64)> {
        let max = 2 * (self.n_rx * self.n_c) as u64;
        let accepted: Vec<u64> = (0..=max).filter(|&u| self.accepts(i, u, level)).collect();
        Some((*accepted.first()?, *accepted.last()?))
    }

    /// Confidence set for an observed doubled count.
    pub fn confidence_set(&self, twice_u: u64, level: f64) -> Result<ConfidenceSet> {
        let flags: Vec<bool> = (0..self.grid.len()).map(|i| self.accepts(i, twice_u, level)).collect();
        let idx: Vec<usize> = flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect();
        let observed_llp = twice_u as f64 / (2.0 * (self.n_rx * self.n_c) as f64);
        let (grid_lo, grid_hi) = (self.grid[0], *self.grid.last().expect("nonempty grid"));
        let (Some(&first), Some(&last)) = (idx.first(), idx.last()) else {
            return Err(Error::EmptyAcceptance { observed_llp, grid_lo, grid_hi });
        };
        Ok(ConfidenceSet {
            level,
            accepted: idx.iter().map(|&i| self.grid[i]).collect(),
            lo: self.grid[first],
            hi: self.grid[last],
            non_convex: last - first + 1 != idx.len(),
            observed_llp,
            grid_lo,
            grid_hi,
            grid_points: self.grid.len(),
            mc_reps: self.mc_reps,
            seed: self.seed,
        })
    }
}

/// Twice the number of pairs with `b_i < a_j` plus ties; both slices sorted.
fn twice_count_below(b: &[f64], a: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut j = 0;
    let mut k = 0;
    for &x in b {
        while j < a.len() && a[j] <= x {
            j += 1;
        }
        while k < a.len() && a[k] < x {
            k += 1;
        }
        // a[j..] > x strictly, a[k..j] == x
        total += 2 * (a.len() - j) as u64 + (j - k) as u64;
    }
    total
}

/// Confidence set for the hazard ratio from uncensored two-arm data by
/// inverting the Mann-Whitney test over a grid of Lehmann alternatives.
pub fn mw_pivot_ci(rx_times: &[f64], c_times: &[f64], opts: &PivotOptions) -> Result<ConfidenceSet> {
    opts.validate()?;
    if rx_times.is_empty() || c_times.is_empty() {
        return Err(Error::EmptyInput("pivot construction needs both arms"));
    }
    let table = LehmannNullTable::build(rx_times.len(), c_times.len(), &opts.grid, opts.mc_reps, opts.seed)?;
    table.confidence_set(estim::mann_whitney_twice(rx_times, c_times), opts.level)
}

/// [`mw_pivot_ci`] on a sample, rejecting censored records.
pub fn mw_pivot_ci_sample(sample: &SurvivalSample, opts: &PivotOptions) -> Result<ConfidenceSet> {
    let censored = sample.censored();
    if censored > 0 {
        return Err(Error::UnsupportedCensoring { censored });
    }
    let (rx, _) = sample.arm(Arm::Rx);
    let (c, _) = sample.arm(Arm::C);
    mw_pivot_ci(&rx, &c, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{sample_times, WeibullDist};

    #[test]
    fn logrank_identical_arms() {
        let t = [1.0, 2.0, 3.5, 4.0];
        let s = SurvivalSample::from_uncensored(&t, &t).unwrap();
        let lr = logrank_test(&s).unwrap();
        assert_eq!(lr.observed_minus_expected, 0.0);
        assert_eq!(lr.p_two_sided, 1.0);
    }

    #[test]
    fn logrank_four_event_hand_table() {
        // Rx {1,3}, C {2,4}
        // t=1: n=4, n1=2, d=1, d1=1: O-E 1/2, V 1·(1/2)(1/2)(3/3) = 1/4
        // t=2: n=3, n1=1, d=1, d1=0: O-E -1/3, V (1/3)(2/3) = 2/9
        // t=3: n=2, n1=1, d=1, d1=1: O-E 1/2, V 1/4
        // t=4: n=1: O-E 0, V 0
        let s = SurvivalSample::from_uncensored(&[1.0, 3.0], &[2.0, 4.0]).unwrap();
        let lr = logrank_test(&s).unwrap();
        assert!((lr.observed_minus_expected - (0.5 - 1.0 / 3.0 + 0.5)).abs() < 1e-15);
        assert!((lr.variance - (0.25 + 2.0 / 9.0 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn logrank_zero_variance_flag() {
        let s = SurvivalSample::from_arms(&[(1.0, true)], &[(2.0, false)]).unwrap();
        // One event with 2 at risk: V = 1·½·½·1/1 > 0. Make the only event
        // occur with a single subject at risk instead.
        assert!(!logrank_test(&s).unwrap().zero_variance);
        let s = SurvivalSample::from_arms(&[(1.0, false)], &[(2.0, true)]).unwrap();
        let lr = logrank_test(&s).unwrap();
        assert!(lr.zero_variance);
        assert_eq!(lr.p_two_sided, 1.0);
    }

    #[test]
    fn logrank_antisymmetric() {
        let w = WeibullDist::new(1.3, 5.0).unwrap();
        let a = sample_times(&w, &mut rng::stream(1, 0, "lr"), 40);
        let b = sample_times(&w, &mut rng::stream(1, 1, "lr"), 55);
        let s = SurvivalSample::from_uncensored(&a, &b).unwrap();
        let x = logrank_test(&s).unwrap();
        let y = logrank_test(&s.swap_arms()).unwrap();
        assert_eq!(x.z, -y.z);
        assert_eq!(x.variance, y.variance);
    }

    #[test]
    fn wald_weibull_swap_negates() {
        let w = WeibullDist::new(1.1, 5.0).unwrap();
        let a = sample_times(&w, &mut rng::stream(2, 0, "w"), 200);
        let b = sample_times(&WeibullDist::new(1.1, 7.0).unwrap(), &mut rng::stream(2, 1, "w"), 200);
        let ev = vec![true; 200];
        let fa = estim::weibull_mle(&a, &ev).unwrap();
        let fb = estim::weibull_mle(&b, &ev).unwrap();
        let x = wald_test_weibull(&fa, &fb).unwrap();
        let y = wald_test_weibull(&fb, &fa).unwrap();
        assert_eq!(x.z, -y.z);
        assert!(x.z < 0.0);
    }

    #[test]
    fn wald_cox_swap_and_power() {
        let c = WeibullDist::new(1.0, 10.0).unwrap();
        let rx = WeibullDist::new(1.0, 20.0).unwrap(); // θ = 0.5
        let a = sample_times(&rx, &mut rng::stream(3, 0, "w"), 2000);
        let b = sample_times(&c, &mut rng::stream(3, 1, "w"), 2000);
        let s = SurvivalSample::from_uncensored(&a, &b).unwrap();
        let x = wald_test_cox(&s).unwrap();
        let y = wald_test_cox(&s.swap_arms()).unwrap();
        assert_eq!(x.z, -y.z);
        assert!(x.p_two_sided < 1e-10);
        let (lo, hi) = x.interval(0.95);
        assert!(lo < 0.5f64.ln() && 0.5f64.ln() < hi);
    }

    #[test]
    fn decision_identical_and_separated() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        let s = SurvivalSample::from_uncensored(&t, &t).unwrap();
        assert_eq!(decision_procedure(&s, 0.05).claim, Claim::NoClaim);

        let rx = crate::dist::weibull_from_median(1.2, 12.0).unwrap();
        let c = crate::dist::weibull_from_median(1.2, 6.0).unwrap();
        let a = sample_times(&rx, &mut rng::stream(4, 0, "d"), 500);
        let b = sample_times(&c, &mut rng::stream(4, 1, "d"), 500);
        let s = SurvivalSample::from_uncensored(&a, &b).unwrap();
        let d = decision_procedure(&s, 0.05);
        assert_eq!(d.claim, Claim::RxLongerMedian);
        assert!(d.rejected);
    }

    #[test]
    fn count_below_matches_brute_force() {
        let a = [0.1, 0.3, 0.3, 0.9];
        let b = [0.05, 0.3, 0.95];
        let brute: u64 = b
            .iter()
            .flat_map(|x| a.iter().map(move |y| if x < y { 2 } else if x == y { 1 } else { 0 }))
            .sum();
        assert_eq!(twice_count_below(&b, &a), brute);
    }

    #[test]
    fn pivot_identical_contains_one() {
        let t: Vec<f64> = (1..=20).map(f64::from).collect();
        let cs = mw_pivot_ci(&t, &t, &PivotOptions::default()).unwrap();
        assert!(cs.contains(1.0));
        assert!(!cs.non_convex);
        assert!((cs.observed_llp - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pivot_sign_convention() {
        // Rx lives much longer: LLP > 1/2 and every accepted HR < 1.
        let rx: Vec<f64> = (1..=30).map(|i| 10.0 + i as f64).collect();
        let c: Vec<f64> = (1..=30).map(|i| i as f64 * 0.9).collect();
        assert!(estim::empirical_llp(&rx, &c).unwrap() > 0.5);
        let cs = mw_pivot_ci(&rx, &c, &PivotOptions::default()).unwrap();
        assert!(cs.hi < 1.0, "{cs:?}");
    }

    #[test]
    fn pivot_validation() {
        let t = [1.0, 2.0];
        let bad = PivotOptions { level: 1.0, ..PivotOptions::default() };
        assert!(matches!(mw_pivot_ci(&t, &t, &bad), Err(Error::InvalidConfig(_))));
        let bad = PivotOptions { mc_reps: 10, ..PivotOptions::default() };
        assert!(mw_pivot_ci(&t, &t, &bad).is_err());
        let s = SurvivalSample::from_arms(&[(1.0, false)], &[(1.0, true)]).unwrap();
        assert_eq!(
            mw_pivot_ci_sample(&s, &PivotOptions::default()).unwrap_err(),
            Error::UnsupportedCensoring { censored: 1 }
        );
    }

    #[test]
    fn pivot_empty_acceptance_on_narrow_grid() {
        let rx: Vec<f64> = (1..=30).map(|i| 100.0 + i as f64).collect();
        let c: Vec<f64> = (1..=30).map(f64::from).collect();
        let opts = PivotOptions { grid: log_grid(2.0, 50.0, 20), ..PivotOptions::default() };
        assert!(matches!(mw_pivot_ci(&rx, &c, &opts), Err(Error::EmptyAcceptance { .. })));
    }

    #[test]
    fn pivot_deterministic() {
        let rx = [1.0, 4.0, 2.5, 7.0, 3.0];
        let c = [2.0, 1.5, 0.5, 3.3];
        let a = mw_pivot_ci(&rx, &c, &PivotOptions { seed: 5, ..PivotOptions::default() }).unwrap();
        let b = mw_pivot_ci(&rx, &c, &PivotOptions { seed: 5, ..PivotOptions::default() }).unwrap();
        assert_eq!(a, b);
    }
}
