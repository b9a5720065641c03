//! Independent reference computations used as test oracles. Nothing here
//! calls into the library's numerical code.
#![allow(dead_code)]

/// Root of a monotone function on `[lo, hi]` by plain bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "root not bracketed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn weibull_survival(t: f64, shape: f64, scale: f64) -> f64 {
    (-(t / scale).powf(shape)).exp()
}

/// Exact distribution of twice the Mann-Whitney count (pairs where the Rx
/// subject outlives the C subject) under `S_Rx = S_C^theta`, by enumerating
/// every arrangement of arm labels in time order.
///
/// Transforming time so that C is unit exponential makes Rx exponential
/// with rate `theta`. Competing exponentials then give each label sequence
/// the probability `prod_k rate(next) * remaining(next) / total_rate_k`.
pub fn exact_twice_u_distribution(n_rx: usize, n_c: usize, theta: f64) -> Vec<f64> {
    let mut dist = vec![0.0; 2 * n_rx * n_c + 1];
    fn walk(rx_left: usize, c_left: usize, theta: f64, prob: f64, u: usize, dist: &mut [f64]) {
        if rx_left == 0 && c_left == 0 {
            dist[2 * u] += prob;
            return;
        }
        let total = theta * rx_left as f64 + c_left as f64;
        if rx_left > 0 {
            walk(rx_left - 1, c_left, theta, prob * theta * rx_left as f64 / total, u, dist);
        }
        if c_left > 0 {
            // This C subject dies first among the remaining, so every Rx
            // subject still alive outlives it.
            walk(rx_left, c_left - 1, theta, prob * c_left as f64 / total, u + rx_left, dist);
        }
    }
    walk(n_rx, n_c, theta, 1.0, 0, &mut dist);
    dist
}

/// `(P(U <= u), P(U >= u))` from a distribution over doubled counts.
pub fn tails(dist: &[f64], u: usize) -> (f64, f64) {
    let le: f64 = dist[..=u.min(dist.len() - 1)].iter().sum();
    let ge: f64 = if u < dist.len() { dist[u..].iter().sum() } else { 0.0 };
    (le, ge)
}

/// Equal-tailed acceptance with boundary counts included.
pub fn exact_accepts(dist: &[f64], u: usize, level: f64) -> bool {
    let (le, ge) = tails(dist, u);
    let half = (1.0 - level) / 2.0;
    le > half && ge > half
}

/// Exact rational, enough for small log-rank sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    pub num: i128,
    pub den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Frac {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0);
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Self { num: s * num / g, den: s * den / g }
    }

    pub fn int(v: i128) -> Self {
        Self::new(v, 1)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn sub(self, o: Self) -> Self {
        self.add(Self::new(-o.num, o.den))
    }

    pub fn mul(self, o: Self) -> Self {
        Self::new(self.num * o.num, self.den * o.den)
    }

    pub fn div(self, o: Self) -> Self {
        Self::new(self.num * o.den, self.den * o.num)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Hand log-rank: at each distinct event time count the risk sets directly
/// from the raw records and accumulate `O - E` and the hypergeometric
/// variance in exact arithmetic. Records are `(time, event, is_rx)`.
pub fn hand_logrank(records: &[(u32, bool, bool)]) -> (Frac, Frac) {
    let mut times: Vec<u32> = records.iter().filter(|r| r.1).map(|r| r.0).collect();
    times.sort_unstable();
    times.dedup();
    let (mut oe, mut var) = (Frac::int(0), Frac::int(0));
    for t in times {
        let at_risk = |rx: bool| records.iter().filter(|r| r.0 >= t && r.2 == rx).count() as i128;
        let deaths = |rx: bool| records.iter().filter(|r| r.0 == t && r.1 && r.2 == rx).count() as i128;
        let (n1, n0) = (at_risk(true), at_risk(false));
        let (d1, d0) = (deaths(true), deaths(false));
        let (n, d) = (n1 + n0, d1 + d0);
        oe = oe.add(Frac::int(d1).sub(Frac::new(d * n1, n)));
        if n > 1 {
            let v = Frac::new(d * n1 * n0 * (n - d), n * n * (n - 1));
            var = var.add(v);
        }
    }
    (oe, var)
}

/// Every multiset of `size` items drawn from `0..kinds`, as nondecreasing
/// index vectors.
pub fn multisets(kinds: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(start: usize, kinds: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for k in start..kinds {
            cur.push(k);
            rec(k, kinds, size, cur, out);
            cur.pop();
        }
    }
    rec(0, kinds, size, &mut cur, &mut out);
    out
}
