//! Regularized upper incomplete gamma in log space.
//!
//! Chi-square tails for large Q fall below the smallest positive `f64`, so
//! everything here returns `ln Q(a, x)` and callers exponentiate last.

use statrs::function::gamma::ln_gamma;

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

/// `ln P(a, x)` prefactor: `a ln x - x - ln Γ(a)`.
fn ln_prefactor(a: f64, x: f64) -> f64 {
    a * x.ln() - x - ln_gamma(a)
}

/// Series for `P(a, x)`, valid for `x < a + 1`.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    (ln_prefactor(a, x) + sum.ln()).exp()
}

/// Modified Lentz continued fraction for `ln Q(a, x)`, valid for `x >= a + 1`.
fn ln_upper_cf(a: f64, x: f64) -> f64 {
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
    ln_prefactor(a, x) + h.ln()
}

/// `ln Q(a, x)` for `a > 0`, `x >= 0`.
pub fn ln_gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        0.0
    } else if x < a + 1.0 {
        (-lower_series(a, x)).ln_1p()
    } else {
        ln_upper_cf(a, x)
    }
}

/// `ln P(X >= x)` for `X ~ χ²(df)`.
pub fn chi2_ln_sf(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    ln_gamma_q(f64::from(df) / 2.0, x / 2.0)
}

pub fn chi2_sf(x: f64, df: u32) -> f64 {
    chi2_ln_sf(x, df).exp()
}
