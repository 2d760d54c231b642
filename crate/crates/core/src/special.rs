//! Special functions backing the built-in noise families.

use std::f64::consts::PI;

pub(crate) const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal lower tail Φ(x).
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail 1 − Φ(x), accurate far into the right tail.
pub(crate) fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub(crate) fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal quantile.
///
/// Acklam's rational approximation (relative error ~1.2e-9) followed by
/// Halley refinement against the erfc-based cdf.
pub(crate) fn norm_quantile(q: f64) -> f64 {
    if q > 0.5 {
        // 1 − q is exact here
        return -norm_quantile(1.0 - q);
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if q < P_LOW {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else {
        let r = q - 0.5;
        let r2 = r * r;
        (((((A[0] * r2 + A[1]) * r2 + A[2]) * r2 + A[3]) * r2 + A[4]) * r2 + A[5]) * r
            / (((((B[0] * r2 + B[1]) * r2 + B[2]) * r2 + B[3]) * r2 + B[4]) * r2 + 1.0)
    };
    for _ in 0..2 {
        let err = norm_cdf(x) - q;
        let u = err / norm_pdf(x);
        if !u.is_finite() {
            break;
        }
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Regularized incomplete beta I_x(a, b), taking both `x` and `1 − x` so
/// callers can supply the complement without cancellation.
pub(crate) fn beta_reg(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if one_minus_x <= 0.0 {
        return 1.0;
    }
    let ln_front =
        libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * x.ln() + b * one_minus_x.ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, one_minus_x) / b
    }
}

/// Continued fraction for the incomplete beta, modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
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
    for m in 1..=500 {
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
            break;
        }
    }
    h
}

/// Lower tail of Student's t with `nu` degrees of freedom at `t <= 0`.
pub(crate) fn student_lower(nu: f64, t: f64) -> f64 {
    debug_assert!(t <= 0.0);
    if nu == 1.0 {
        if t == 0.0 {
            return 0.5;
        }
        return (-1.0 / t).atan() / PI;
    }
    if nu == 2.0 {
        let r = (2.0 + t * t).sqrt();
        return 1.0 / (r * (r - t));
    }
    let t2 = t * t;
    let denom = nu + t2;
    0.5 * beta_reg(0.5 * nu, 0.5, nu / denom, t2 / denom)
}

pub(crate) fn student_pdf(nu: f64, t: f64) -> f64 {
    if nu == 1.0 {
        return 1.0 / (PI * (1.0 + t * t));
    }
    let ln_norm = libm::lgamma(0.5 * (nu + 1.0)) - libm::lgamma(0.5 * nu) - 0.5 * (nu * PI).ln();
    (ln_norm - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()).exp()
}

/// Student's t quantile for `q <= 0.5`.
pub(crate) fn student_lower_quantile(nu: f64, q: f64, tol: f64) -> f64 {
    debug_assert!(q > 0.0 && q <= 0.5);
    if q == 0.5 {
        return 0.0;
    }
    if nu == 1.0 {
        return -1.0 / (PI * q).tan();
    }
    if nu == 2.0 {
        return (2.0 * q - 1.0) / (2.0 * q * (1.0 - q)).sqrt();
    }
    // bracket [lo, hi] with lower(lo) <= q < lower(hi)
    let mut hi = 0.0_f64;
    let mut lo = -1.0_f64;
    while student_lower(nu, lo) > q {
        hi = lo;
        lo *= 2.0;
        if !lo.is_finite() {
            return f64::NEG_INFINITY;
        }
    }
    // start from the normal approximation when it lands in the bracket
    let guess = norm_quantile(q);
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..400 {
        let fx = student_lower(nu, x.min(0.0)) - q;
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / student_pdf(nu, x);
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= tol * (1.0 + x.abs()) || (hi - lo) <= tol * (1.0 + x.abs()) * 1e-3 {
            break;
        }
    }
    // one more Newton step: the stopping test bounds the previous step, not
    // the current error
    let polished = x - (student_lower(nu, x.min(0.0)) - q) / student_pdf(nu, x);
    if polished.is_finite() && polished >= lo && polished <= hi {
        x = polished;
    }
    x.min(0.0)
}
