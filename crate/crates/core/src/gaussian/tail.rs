//! Standard normal tail `Ψ(x) = 1 − Φ(x)` and its logarithm, plus log-space
//! reductions used by the mixture weights.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `ln √(2π)`
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_78;

/// Above this point the continued fraction for the Mills ratio is used.
const CF_SWITCH: f64 = 5.0;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `Ψ(x) = P(Z > x)` for a standard normal `Z`.
pub fn normal_tail(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > CF_SWITCH {
        return log_normal_tail(x).exp();
    }
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `Φ(x) = 1 − Ψ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    normal_tail(-x)
}

/// `ln Ψ(x)`, finite for every finite `x`.
pub fn log_normal_tail(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > CF_SWITCH {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio_cf(x).ln()
    } else if x < -1.0 {
        // Ψ(x) = 1 − Ψ(−x), keep the small complement exact.
        (-0.5 * libm::erfc(-x * FRAC_1_SQRT_2)).ln_1p()
    } else {
        (0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln()
    }
}

/// Mills ratio `Ψ(x)/φ(x)` by the Laplace continued fraction
/// `1/(x + 1/(x + 2/(x + 3/(x + …))))`, evaluated with the modified Lentz
/// method. Converges quickly for `x ≥ 5`.
fn mills_ratio_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `ln Σ exp(v_i)`, returning `-∞` for an empty or all `-∞` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}
