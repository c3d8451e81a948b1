//! Small numerical helpers shared across modules.

/// Sum with a fixed pairwise reduction tree, so results do not depend on how
/// callers chunk their loops.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n`.
pub fn pairwise_sum_by(n: usize, f: impl Fn(usize) -> f64 + Copy) -> f64 {
    fn go(lo: usize, hi: usize, f: impl Fn(usize) -> f64 + Copy) -> f64 {
        if hi - lo <= 64 {
            return (lo..hi).map(f).sum();
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, f)
}

/// Ordinary least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `∫_a^b (f_a + (f_b - f_a)(s - a)/(b - a)) · exp(rate·(b - s)) ds` for a
/// linear interpolant `f`, evaluated in closed form. The exponential weight
/// is measured from the right end of the interval.
pub fn exp_weighted_trapezoid(fa: f64, fb: f64, len: f64, rate: f64) -> f64 {
    if len == 0.0 {
        return 0.0;
    }
    let x = rate * len;
    if x.abs() < 1e-4 {
        // series of the weights below; avoids cancellation for tiny rate·len
        let wa = 0.5 + x / 3.0 + x * x / 8.0 + x * x * x / 30.0;
        let wb = 0.5 + x / 6.0 + x * x / 24.0 + x * x * x / 120.0;
        return len * (wa * fa + wb * fb);
    }
    let e = x.exp();
    // ∫_0^1 (1-u) e^{x(1-u)} du and ∫_0^1 u e^{x(1-u)} du
    let wa = (e * (x - 1.0) + 1.0) / (x * x);
    let wb = (e - 1.0 - x) / (x * x);
    len * (wa * fa + wb * fb)
}
