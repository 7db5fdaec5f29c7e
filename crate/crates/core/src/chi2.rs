//! Chi-square distribution utilities.
//!
//! The CDF is the regularized lower incomplete gamma function `P(k/2, x/2)`,
//! evaluated by its power series below `a + 1` and by a Lentz continued
//! fraction above. Quantiles are found by bisection and polished by Newton.

use crate::error::{argument, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
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

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
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
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

pub fn chi2_cdf(x: f64, dof: f64) -> f64 {
    regularized_gamma_p(0.5 * dof, 0.5 * x)
}

pub fn chi2_pdf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = 0.5 * dof;
    ((k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Inverse CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_quantile(prob: f64, dof: usize) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(argument(format!("probability {prob} outside (0, 1)")));
    }
    if dof == 0 {
        return Err(argument("chi-square dof must be at least 1"));
    }
    let k = dof as f64;
    // Work on whichever tail is smaller so the target stays representable.
    let upper = prob > 0.5;
    let target = if upper { 1.0 - prob } else { prob };
    let tail = |x: f64| {
        if upper {
            regularized_gamma_q(0.5 * k, 0.5 * x)
        } else {
            regularized_gamma_p(0.5 * k, 0.5 * x)
        }
    };
    // residual is increasing in x in both cases
    let residual = |x: f64| if upper { target - tail(x) } else { tail(x) - target };

    let mut lo = 0.0_f64;
    let mut hi = k.max(1.0);
    while residual(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-6 * hi {
            break;
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..50 {
        let r = residual(x);
        let pdf = chi2_pdf(x, k);
        if pdf <= 0.0 || !pdf.is_finite() {
            break;
        }
        let mut next = x - r / pdf;
        if next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if r < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 1e-15 * x.max(1e-300) {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0_f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n={n}");
            fact *= n as f64;
        }
        let half = ln_gamma(0.5);
        assert!((half - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn two_dof_is_exponential() {
        let x = chi2_quantile(0.5, 2).unwrap();
        assert!((x - 2.0 * std::f64::consts::LN_2).abs() < 1e-10);
        for &x in &[0.1, 1.0, 3.7, 20.0] {
            assert!((chi2_cdf(x, 2.0) - (1.0 - (-x / 2.0).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(chi2_quantile(0.0, 3).is_err());
        assert!(chi2_quantile(1.0, 3).is_err());
        assert!(chi2_quantile(-0.2, 3).is_err());
        assert!(chi2_quantile(0.3, 0).is_err());
    }

    #[test]
    fn quantile_is_monotone() {
        let probs = [0.0005, 0.01, 0.2, 0.5, 0.8, 0.99, 0.9995];
        for dof in [1, 2, 7, 40, 300] {
            let xs: Vec<f64> = probs.iter().map(|&p| chi2_quantile(p, dof).unwrap()).collect();
            assert!(xs.windows(2).all(|w| w[0] < w[1]), "dof={dof}: {xs:?}");
        }
        for &p in &probs {
            let xs: Vec<f64> = (1..60).map(|d| chi2_quantile(p, d).unwrap()).collect();
            assert!(xs.windows(2).all(|w| w[0] < w[1]), "p={p}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for dof in [1, 3, 10, 100, 750] {
            for &p in &[0.0005, 0.3, 0.9995] {
                let x = chi2_quantile(p, dof).unwrap();
                assert!((chi2_cdf(x, dof as f64) - p).abs() < 1e-12, "dof={dof} p={p}");
            }
        }
    }
}
