//! Log-gamma, regularized incomplete beta and gamma functions, and the
//! F and chi-square quantiles built on them.

use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

// Stirling-series coefficients B_{2k} / (2k (2k-1)).
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Natural logarithm of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    // Shift into the range where the asymptotic series is accurate to full precision.
    let mut z = x;
    let mut prod = 1.0;
    while z < 15.0 {
        prod *= z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in STIRLING {
        series += c * pow;
        pow *= inv2;
    }
    let stirling = (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series;
    stirling - prod.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b)
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "incomplete beta requires a, b > 0, got a={a}, b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "incomplete beta requires 0 <= x <= 1, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    // The continued fraction converges fast for x below the mean; use symmetry above it.
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_front.exp() * beta_cf(a, b, x)? / a)
    } else {
        Ok(1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x)? / b)
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::Numeric(format!(
        "incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})"
    )))
}

/// Regularized lower incomplete gamma function `P(s, x)`.
pub fn regularized_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!(
            "incomplete gamma requires s > 0, got {s}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "incomplete gamma requires x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let ln_front = s * x.ln() - x - ln_gamma_unchecked(s);
    if x < s + 1.0 {
        // Power series.
        let mut ap = s;
        let mut del = 1.0 / s;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                return Ok((sum.ln() + ln_front).exp().min(1.0));
            }
        }
        Err(Error::Numeric(format!(
            "incomplete gamma series did not converge (s={s}, x={x})"
        )))
    } else {
        // Continued fraction for the upper tail Q(s, x).
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                return Ok((1.0 - (ln_front.exp() * h)).max(0.0));
            }
        }
        Err(Error::Numeric(format!(
            "incomplete gamma continued fraction did not converge (s={s}, x={x})"
        )))
    }
}

fn check_df(df: f64, what: &str) -> Result<()> {
    if df > 0.0 && df.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} must be positive and finite, got {df}"
        )))
    }
}

/// CDF of the F distribution with `(df1, df2)` degrees of freedom.
pub fn f_cdf(x: f64, df1: f64, df2: f64) -> Result<f64> {
    check_df(df1, "df1")?;
    check_df(df2, "df2")?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let y = df1 * x / (df1 * x + df2);
    regularized_incomplete_beta(df1 / 2.0, df2 / 2.0, y)
}

/// CDF of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_cdf(x: f64, df: f64) -> Result<f64> {
    check_df(df, "df")?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    regularized_incomplete_gamma(df / 2.0, x / 2.0)
}

/// Inverts a continuous CDF supported on `[0, inf)` by doubling an upper
/// bracket and bisecting to adjacent floating-point values.
fn invert_cdf<F>(p: f64, cdf: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "quantile requires 0 <= p < 1, got {p}"
        )));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while cdf(hi)? < p {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 {
            return Err(Error::Numeric(format!(
                "could not bracket quantile for p={p}"
            )));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if cdf(mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numeric(format!(
        "quantile bisection did not converge for p={p}"
    )))
}

/// Quantile of the F distribution: `x` with `F-CDF(x; df1, df2) = p`.
///
/// `p = 0` maps to the lower support point 0.
pub fn f_quantile(p: f64, df1: f64, df2: f64) -> Result<f64> {
    check_df(df1, "df1")?;
    check_df(df2, "df2")?;
    invert_cdf(p, |x| f_cdf(x, df1, df2))
}

/// Quantile of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_quantile(p: f64, df: f64) -> Result<f64> {
    check_df(df, "df")?;
    invert_cdf(p, |x| chi2_cdf(x, df))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0).unwrap(), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(2.0).unwrap(), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(
            ln_gamma(0.5).unwrap(),
            0.5 * std::f64::consts::PI.ln(),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(ln_gamma(10.0).unwrap(), 362_880f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            ln_gamma(10.0).unwrap(),
            12.801_827_480_081_469,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ln_gamma_recurrence() {
        // ln Gamma(x + 1) = ln Gamma(x) + ln x across the shift boundary.
        for &x in &[0.5, 0.7, 3.3, 14.2, 14.9, 15.0, 27.5, 1e3, 1e6] {
            let lhs = ln_gamma(x + 1.0).unwrap();
            let rhs = ln_gamma(x).unwrap() + f64::ln(x);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
                "x={x}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn ln_gamma_domain() {
        assert!(matches!(ln_gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(ln_gamma(-1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn incomplete_beta_values() {
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 0.0).unwrap(), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            regularized_incomplete_beta(1.0, 1.0, 0.3).unwrap(),
            0.3,
            epsilon = 1e-14
        );
        // Beta(2,3) CDF: 6x^2 - 8x^3 + 3x^4.
        let x: f64 = 0.4;
        let closed = 6.0 * x.powi(2) - 8.0 * x.powi(3) + 3.0 * x.powi(4);
        assert_abs_diff_eq!(closed, 0.5248, epsilon = 1e-12);
        assert_abs_diff_eq!(
            regularized_incomplete_beta(2.0, 3.0, x).unwrap(),
            closed,
            epsilon = 1e-12
        );
        // Upper branch of the symmetry switch.
        let x: f64 = 0.9;
        let closed = 6.0 * x.powi(2) - 8.0 * x.powi(3) + 3.0 * x.powi(4);
        assert_abs_diff_eq!(
            regularized_incomplete_beta(2.0, 3.0, x).unwrap(),
            closed,
            epsilon = 1e-12
        );
    }

    #[test]
    fn incomplete_beta_domain() {
        assert!(regularized_incomplete_beta(0.0, 1.0, 0.5).is_err());
        assert!(regularized_incomplete_beta(1.0, 1.0, 1.5).is_err());
        assert!(regularized_incomplete_beta(1.0, 1.0, -0.1).is_err());
    }

    fn gamma_series_oracle(s: f64, x: f64) -> f64 {
        // P(s,x) = x^s e^-x / Gamma(s+1) * sum_k x^k / ((s+1)...(s+k)), summed naively.
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..400 {
            term *= x / (s + k as f64);
            sum += term;
        }
        (s * x.ln() - x - ln_gamma_unchecked(s + 1.0)).exp() * sum
    }

    #[test]
    fn incomplete_gamma_values() {
        assert_eq!(regularized_incomplete_gamma(2.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            regularized_incomplete_gamma(1.0, 1.0).unwrap(),
            1.0 - (-1.0f64).exp(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            regularized_incomplete_gamma(2.5, 3.1).unwrap(),
            gamma_series_oracle(2.5, 3.1),
            epsilon = 1e-10
        );
        // Continued-fraction branch against the series oracle.
        for &(s, x) in &[(1.5, 4.0), (3.0, 10.0), (0.5, 2.0), (10.0, 15.0)] {
            assert_abs_diff_eq!(
                regularized_incomplete_gamma(s, x).unwrap(),
                gamma_series_oracle(s, x),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn incomplete_gamma_domain() {
        assert!(regularized_incomplete_gamma(0.0, 1.0).is_err());
        assert!(regularized_incomplete_gamma(1.0, -1.0).is_err());
    }

    #[test]
    fn f_quantile_values() {
        assert_abs_diff_eq!(f_quantile(0.95, 1.0, 10.0).unwrap(), 4.9646, epsilon = 1e-4);
        assert_abs_diff_eq!(f_quantile(0.95, 2.0, 20.0).unwrap(), 3.4928, epsilon = 1e-4);
        for d in [1.0, 3.0, 7.5, 40.0] {
            assert_abs_diff_eq!(f_quantile(0.5, d, d).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn chi2_quantile_values() {
        assert_abs_diff_eq!(chi2_quantile(0.95, 1.0).unwrap(), 3.8415, epsilon = 1e-4);
        assert_abs_diff_eq!(
            chi2_quantile(0.95, 2.0).unwrap(),
            -2.0 * 0.05f64.ln(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(chi2_quantile(0.95, 3.0).unwrap(), 7.8147, epsilon = 1e-4);
    }

    #[test]
    fn quantile_round_trip_and_monotone() {
        for &(d1, d2) in &[(1.0, 2.0), (1.0, 8.0), (2.0, 20.0), (3.0, 25.0), (5.5, 3.5)] {
            let mut prev = 0.0;
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let q = f_quantile(p, d1, d2).unwrap();
                assert!((f_cdf(q, d1, d2).unwrap() - p).abs() < 1e-8);
                assert!(q > prev);
                prev = q;
            }
        }
        for &df in &[1.0, 2.0, 3.0, 7.0, 30.0] {
            let mut prev = 0.0;
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let q = chi2_quantile(p, df).unwrap();
                assert!((chi2_cdf(q, df).unwrap() - p).abs() < 1e-8);
                assert!(q > prev);
                prev = q;
            }
        }
    }

    #[test]
    fn quantile_rejects_bad_probability() {
        assert!(f_quantile(1.0, 1.0, 1.0).is_err());
        assert!(chi2_quantile(-0.1, 1.0).is_err());
        assert!(chi2_quantile(0.5, 0.0).is_err());
        assert_eq!(chi2_quantile(0.0, 2.0).unwrap(), 0.0);
    }
}
