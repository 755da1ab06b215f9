//! Reference distributions used for p-values.
//!
//! Everything here is evaluated in `f64`: tail probabilities around 1e-22
//! must stay representable regardless of the caller's scalar type.

use statrs::function::{beta, erf, gamma};

/// Smallest p-value reported; anything below clamps here with a flag.
pub const P_FLOOR: f64 = 1e-300;

/// Upper tail of the chi-square distribution, `P(X > x)`.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x.is_nan() || df <= 0.0 {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma::gamma_ur(df / 2.0, x / 2.0)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_sf(z: f64) -> f64 {
    0.5 * erf::erfc(z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// Two-sided Student-t p-value `P(|T| > |t|)`; `df` may be fractional.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() || df <= 0.0 {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta::beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

/// Upper tail of Student-t, `P(T > t)`.
pub fn t_sf(t: f64, df: f64) -> f64 {
    let two = t_two_sided(t, df);
    if t >= 0.0 {
        0.5 * two
    } else {
        1.0 - 0.5 * two
    }
}

/// Upper tail of the F distribution.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() || d1 <= 0.0 || d2 <= 0.0 {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta::beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Clamps a p-value into `[P_FLOOR, 1]`; returns whether it was floored.
pub fn clamp_p(p: f64) -> (f64, bool) {
    if p.is_nan() {
        return (p, false);
    }
    if p < P_FLOOR {
        (P_FLOOR, true)
    } else {
        (p.min(1.0), false)
    }
}
