//! Chi-squared and F reference distributions.
//!
//! Survival functions go through the regularized incomplete gamma and beta
//! functions (power series where it converges fast, modified Lentz
//! continued fractions elsewhere). Quantiles invert the survival function
//! by bracketing bisection.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("argument {0} outside the support")]
    DomainError(f64),
    #[error("degrees of freedom must be at least 1")]
    InvalidDf,
    #[error("probability {0} must lie strictly between 0 and 1")]
    InvalidProbability(f64),
    #[error("numerical routine failed to converge")]
    NoConvergence,
}

/// Reference law of a test statistic under the null.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefDist {
    ChiSquared { df: usize },
    F { df1: usize, df2: usize },
}

impl RefDist {
    pub fn chi2(df: usize) -> Result<Self, DistError> {
        if df == 0 {
            return Err(DistError::InvalidDf);
        }
        Ok(RefDist::ChiSquared { df })
    }

    pub fn f(df1: usize, df2: usize) -> Result<Self, DistError> {
        if df1 == 0 || df2 == 0 {
            return Err(DistError::InvalidDf);
        }
        Ok(RefDist::F { df1, df2 })
    }

    pub fn sf(&self, x: f64) -> Result<f64, DistError> {
        match *self {
            RefDist::ChiSquared { df } => chi2_sf(x, df),
            RefDist::F { df1, df2 } => f_sf(x, df1, df2),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        quantile(self, p)
    }

    /// Degrees of freedom as a list: `[df]` or `[df1, df2]`.
    pub fn dfs(&self) -> Vec<usize> {
        match *self {
            RefDist::ChiSquared { df } => vec![df],
            RefDist::F { df1, df2 } => vec![df1, df2],
        }
    }
}

impl fmt::Display for RefDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefDist::ChiSquared { df } => write!(f, "chi2({df})"),
            RefDist::F { df1, df2 } => write!(f, "F({df1}, {df2})"),
        }
    }
}

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAX_ITER: usize = 100_000;

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn gamma_series(a: f64, x: f64) -> Result<f64, DistError> {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            return Ok(sum * (-x + a * x.ln() - ln_gamma(a)).exp());
        }
    }
    Err(DistError::NoConvergence)
}

fn gamma_continued_fraction(a: f64, x: f64) -> Result<f64, DistError> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok((-x + a * x.ln() - ln_gamma(a)).exp() * h);
        }
    }
    Err(DistError::NoConvergence)
}

/// Upper regularized incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> Result<f64, DistError> {
    if x < 0.0 || a <= 0.0 {
        return Err(DistError::DomainError(x));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok((1.0 - gamma_series(a, x)?).clamp(0.0, 1.0))
    } else {
        Ok(gamma_continued_fraction(a, x)?.clamp(0.0, 1.0))
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> Result<f64, DistError> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(DistError::NoConvergence)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> Result<f64, DistError> {
    if !(0.0..=1.0).contains(&x) || a <= 0.0 || b <= 0.0 {
        return Err(DistError::DomainError(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_bt = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let bt = ln_bt.exp();
    let v = if x < (a + 1.0) / (a + b + 2.0) {
        bt * beta_continued_fraction(a, b, x)? / a
    } else {
        1.0 - bt * beta_continued_fraction(b, a, 1.0 - x)? / b
    };
    Ok(v.clamp(0.0, 1.0))
}

/// `P(χ²_df > x)`.
pub fn chi2_sf(x: f64, df: usize) -> Result<f64, DistError> {
    if df == 0 {
        return Err(DistError::InvalidDf);
    }
    if !(x >= 0.0) {
        return Err(DistError::DomainError(x));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    gamma_q(df as f64 / 2.0, x / 2.0)
}

/// `P(F(d1, d2) > x)`.
pub fn f_sf(x: f64, d1: usize, d2: usize) -> Result<f64, DistError> {
    if d1 == 0 || d2 == 0 {
        return Err(DistError::InvalidDf);
    }
    if !(x >= 0.0) {
        return Err(DistError::DomainError(x));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let (d1, d2) = (d1 as f64, d2 as f64);
    beta_inc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))
}

/// The `p`-quantile: the `x` with `sf(x) = 1 − p`.
pub fn quantile(dist: &RefDist, p: f64) -> Result<f64, DistError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(DistError::InvalidProbability(p));
    }
    let target = 1.0 - p;
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while dist.sf(hi)? > target {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 1100 {
            return Err(DistError::NoConvergence);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dist.sf(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    if (dist.sf(x)? - target).abs() > 1e-9 {
        return Err(DistError::NoConvergence);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sf_at_zero_is_one() {
        for df in 1..10 {
            assert_eq!(chi2_sf(0.0, df).unwrap(), 1.0);
            assert_eq!(f_sf(0.0, df, 3 * df).unwrap(), 1.0);
        }
    }

    #[test]
    fn chi2_two_df_is_exponential() {
        assert!((chi2_sf(2.0 * 2f64.ln(), 2).unwrap() - 0.5).abs() < 1e-12);
        for x in [0.01, 0.5, 1.0, 3.0, 10.0, 40.0, 100.0] {
            assert!((chi2_sf(x, 2).unwrap() - (-x / 2.0).exp()).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn f_two_two_closed_form() {
        assert!((f_sf(1.0, 2, 2).unwrap() - 0.5).abs() < 1e-12);
        for x in [0.01, 0.3, 1.0, 2.5, 17.0, 300.0] {
            let cdf = x / (1.0 + x);
            assert!((f_sf(x, 2, 2).unwrap() - (1.0 - cdf)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn chi2_one_df_matches_erfc_values() {
        // P(|Z| > 1.96) and P(|Z| > 1)
        assert!((chi2_sf(1.96f64.powi(2), 1).unwrap() - 0.049_995_790_296_440_5).abs() < 1e-12);
        assert!((chi2_sf(1.0, 1).unwrap() - 0.317_310_507_862_914_1).abs() < 1e-12);
    }

    #[test]
    fn table_quantiles() {
        let q = quantile(&RefDist::chi2(1).unwrap(), 0.95).unwrap();
        assert_relative_eq!(q, 3.841459, epsilon = 1e-6);
        let q = quantile(&RefDist::chi2(6).unwrap(), 0.95).unwrap();
        assert_relative_eq!(q, 12.5916, epsilon = 1e-4);
        let q = quantile(&RefDist::chi2(25).unwrap(), 0.95).unwrap();
        assert_relative_eq!(q, 37.6525, epsilon = 1e-4);
        let q = quantile(&RefDist::f(6, 191).unwrap(), 0.95).unwrap();
        assert!((q - 2.146).abs() < 0.002, "F(6,191) 0.95 quantile = {q}");
    }

    #[test]
    fn quantile_inverts_sf() {
        for df in 1..=30 {
            for p in [0.9, 0.95, 0.99] {
                let d = RefDist::chi2(df).unwrap();
                let q = d.quantile(p).unwrap();
                assert!((d.sf(q).unwrap() - (1.0 - p)).abs() < 1e-8);
                let d = RefDist::f(df, 2 * df + 7).unwrap();
                let q = d.quantile(p).unwrap();
                assert!((d.sf(q).unwrap() - (1.0 - p)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn quantiles_are_monotone_in_p() {
        for d in [RefDist::chi2(4).unwrap(), RefDist::f(3, 50).unwrap()] {
            assert!(d.quantile(0.99).unwrap() > d.quantile(0.95).unwrap());
        }
    }

    #[test]
    fn sf_nonincreasing() {
        let mut prev = 1.0;
        for i in 0..400 {
            let x = i as f64 * 0.1;
            let v = f_sf(x, 6, 40).unwrap();
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn f_approaches_chi2_for_large_denominator_df() {
        for d1 in [1, 6, 25] {
            let chi = RefDist::chi2(d1).unwrap().quantile(0.95).unwrap();
            let f = RefDist::f(d1, 1_000_000).unwrap().quantile(0.95).unwrap();
            assert!(((d1 as f64 * f) - chi).abs() / chi < 0.01);
        }
    }

    #[test]
    fn domain_errors() {
        assert_eq!(chi2_sf(-1.0, 2), Err(DistError::DomainError(-1.0)));
        assert_eq!(f_sf(-0.5, 2, 2), Err(DistError::DomainError(-0.5)));
        assert_eq!(RefDist::chi2(0), Err(DistError::InvalidDf));
        assert!(quantile(&RefDist::chi2(2).unwrap(), 1.0).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }
}
