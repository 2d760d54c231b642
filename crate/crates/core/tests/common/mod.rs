//! Reference implementations used only by the tests. They share no code
//! with the library: the normal cdf comes from its power series and the
//! Laplace continued fraction, the Student-t cdfs for one and three degrees
//! of freedom from their closed forms, and every inverse from bisection.

#![allow(dead_code)]

use std::f64::consts::PI;

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Upper tail `Q(x)` for `x >= 3` by the Laplace continued fraction,
/// evaluated backward from a fixed depth.
fn upper_tail_cf(x: f64) -> f64 {
    let mut t = 0.0;
    for n in (1..=300).rev() {
        t = n as f64 / (x + t);
    }
    phi(x) / (x + t)
}

/// `Φ(x)`: series `1/2 + φ(x) Σ x^{2n+1} / (2n+1)!!` on `|x| < 3`,
/// continued fraction beyond.
pub fn norm_cdf(x: f64) -> f64 {
    if x <= -3.0 {
        return upper_tail_cf(-x);
    }
    if x >= 3.0 {
        return 1.0 - upper_tail_cf(x);
    }
    let mut term = x;
    let mut sum = x;
    let mut n = 0;
    while term.abs() > 1e-18 * sum.abs().max(1e-300) {
        n += 1;
        term *= x * x / (2 * n + 1) as f64;
        sum += term;
    }
    0.5 + phi(x) * sum
}

pub fn norm_sf(x: f64) -> f64 {
    norm_cdf(-x)
}

pub fn cauchy_cdf(x: f64) -> f64 {
    0.5 + x.atan() / PI
}

/// Student-t with three degrees of freedom.
pub fn t3_cdf(x: f64) -> f64 {
    let r = 3f64.sqrt();
    let u = x / r;
    0.5 + (u / (1.0 + u * u) + u.atan()) / PI
}

pub fn t3_pdf(x: f64) -> f64 {
    6.0 * 3f64.sqrt() / (PI * (3.0 + x * x).powi(2))
}

pub fn logistic_cdf(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Solves `f(x) = target` for increasing `f` by bisection on `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `F^{-1}(q)` for a continuous increasing cdf.
pub fn quantile(cdf: impl Fn(f64) -> f64, q: f64) -> f64 {
    bisect(cdf, q, -1e8, 1e8)
}

/// The cutoff `s` with `Σ m_i (1 - F(s - loc_i)) = k`.
pub fn cutoff(sf: impl Fn(f64) -> f64, atoms: &[(f64, f64)], k: f64) -> f64 {
    let residual = |s: f64| -atoms.iter().map(|(loc, m)| m * sf(s - loc)).sum::<f64>();
    let lo = atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min) - 1e3;
    let hi = atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max) + 1e3;
    bisect(residual, -k, lo, hi)
}
