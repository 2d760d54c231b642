//! Random performance functions: performance families `{F_e}`, the
//! market-clearing cutoff `s(p)` and the success function
//! `W(e, p) = 1 - F_e(s(p))`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::NoiseDistribution;
use crate::error::{Error, Result};
use crate::measures::EffortMeasure;

/// Bracket doublings allowed before the cutoff search gives up.
const MAX_DOUBLINGS: usize = 200;
/// Target bracket width of the cutoff bisection, relative to `max(1, |s|)`.
const BISECTION_WIDTH: f64 = 1e-12;

/// Map from effort to the location of the performance distribution.
#[derive(Clone)]
pub enum EffortWarp {
    /// `g(e) = ln e`.
    Log,
    /// `g(e) = e^exponent`, `exponent > 0`.
    Power { exponent: f64 },
    /// `g(e) = scale * e + offset`, `scale > 0`.
    Affine { scale: f64, offset: f64 },
    /// Caller-supplied continuous, strictly increasing, unbounded map.
    Custom {
        name: String,
        g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl EffortWarp {
    pub fn custom(name: impl Into<String>, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        EffortWarp::Custom {
            name: name.into(),
            g: Arc::new(g),
        }
    }

    pub fn apply(&self, e: f64) -> f64 {
        match self {
            EffortWarp::Log => e.ln(),
            EffortWarp::Power { exponent } => e.powf(*exponent),
            EffortWarp::Affine { scale, offset } => scale * e + offset,
            EffortWarp::Custom { g, .. } => g(e),
        }
    }

    /// Inverse of `apply`, by closed form where available.
    fn invert(&self, y: f64) -> Option<f64> {
        match self {
            EffortWarp::Log => Some(y.exp()),
            EffortWarp::Power { exponent } if y > 0.0 => Some(y.powf(1.0 / exponent)),
            EffortWarp::Affine { scale, offset } => Some((y - offset) / scale),
            _ => None,
        }
    }
}

impl fmt::Debug for EffortWarp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffortWarp::Log => write!(f, "Log"),
            EffortWarp::Power { exponent } => write!(f, "Power({exponent})"),
            EffortWarp::Affine { scale, offset } => write!(f, "Affine({scale}, {offset})"),
            EffortWarp::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum WarpRepr {
    Log,
    Power {
        exponent: f64,
    },
    Affine {
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
}

#[derive(Serialize, Deserialize)]
struct FamilyRepr {
    noise: NoiseDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warp: Option<WarpRepr>,
}

/// JSON form `{"noise": {...}, "warp": {"kind": "log"}}`; without `warp` the
/// family is additive. Custom warps cannot be serialized.
impl Serialize for PerformanceFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let warp = match &self.kind {
            FamilyKind::Additive(_) => None,
            FamilyKind::Warped { warp, .. } => Some(match warp {
                EffortWarp::Log => WarpRepr::Log,
                EffortWarp::Power { exponent } => WarpRepr::Power {
                    exponent: *exponent,
                },
                EffortWarp::Affine { scale, offset } => WarpRepr::Affine {
                    scale: *scale,
                    offset: *offset,
                },
                EffortWarp::Custom { .. } => {
                    return Err(serde::ser::Error::custom(
                        "custom warps cannot be serialized",
                    ))
                }
            }),
        };
        FamilyRepr {
            noise: self.noise().clone(),
            warp,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PerformanceFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = FamilyRepr::deserialize(d)?;
        let warp = match r.warp {
            None => return Ok(PerformanceFamily::additive(r.noise)),
            Some(WarpRepr::Log) => EffortWarp::Log,
            Some(WarpRepr::Power { exponent }) => EffortWarp::Power { exponent },
            Some(WarpRepr::Affine { scale, offset }) => EffortWarp::Affine { scale, offset },
        };
        PerformanceFamily::warped(r.noise, warp).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone)]
enum FamilyKind {
    /// `F_e(x) = F(x - e)`.
    Additive(NoiseDistribution),
    /// `F_e(x) = F(x - g(e))`.
    Warped {
        noise: NoiseDistribution,
        warp: EffortWarp,
    },
}

/// A collection of performance cdfs `{F_e}` indexed by effort.
#[derive(Debug, Clone)]
pub struct PerformanceFamily {
    kind: FamilyKind,
    description: String,
}

impl PerformanceFamily {
    pub fn additive(noise: NoiseDistribution) -> Self {
        let description = format!("additive {}", noise.label());
        PerformanceFamily {
            kind: FamilyKind::Additive(noise),
            description,
        }
    }

    /// Warped family `F_e(x) = F(x - g(e))`.
    ///
    /// `g` is sampled on a log grid: a non-increasing step is an error, while
    /// a failure to look unbounded only logs a warning since unboundedness
    /// cannot be decided from samples.
    pub fn warped(noise: NoiseDistribution, warp: EffortWarp) -> Result<Self> {
        match warp {
            EffortWarp::Power { exponent } if !(exponent > 0.0 && exponent.is_finite()) => {
                return Err(Error::domain("power warp needs a positive exponent"));
            }
            EffortWarp::Affine { scale, offset } if !(scale > 0.0 && offset.is_finite()) => {
                return Err(Error::domain("affine warp needs a positive scale"));
            }
            _ => {}
        }
        let grid: Vec<f64> = (-24..=24).map(|i| 10f64.powf(i as f64 / 4.0)).collect();
        let vals: Vec<f64> = grid.iter().map(|e| warp.apply(*e)).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "warp {warp:?} is not finite on (1e-6, 1e6)"
            )));
        }
        if let Some(w) = vals.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::domain(format!(
                "warp {warp:?} is not strictly increasing between e = {} and e = {}",
                grid[w],
                grid[w + 1]
            )));
        }
        let n = vals.len();
        let late = vals[n - 1] - vals[n - 5];
        if late < 1e-3 * (vals[n - 1] - vals[0]).abs().max(1.0) {
            log::warn!(
                "warp {warp:?} looks bounded above on the sampled range; W(e, p) -> 1 may fail"
            );
        }
        let description = format!("warped {} with g = {warp:?}", noise.label());
        Ok(PerformanceFamily {
            kind: FamilyKind::Warped { noise, warp },
            description,
        })
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn noise(&self) -> &NoiseDistribution {
        match &self.kind {
            FamilyKind::Additive(n) => n,
            FamilyKind::Warped { noise, .. } => noise,
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self.kind, FamilyKind::Additive(_))
    }

    /// Location `g(e)` of the performance distribution for effort `e`.
    pub fn location(&self, e: f64) -> f64 {
        match &self.kind {
            FamilyKind::Additive(_) => e,
            FamilyKind::Warped { warp, .. } => warp.apply(e),
        }
    }

    /// Effort whose location equals `y`, when a closed-form inverse exists.
    pub fn effort_at_location(&self, y: f64) -> Option<f64> {
        match &self.kind {
            FamilyKind::Additive(_) => Some(y),
            FamilyKind::Warped { warp, .. } => warp.invert(y),
        }
    }

    /// `F_e(x)`.
    pub fn cdf(&self, e: f64, x: f64) -> f64 {
        self.noise().cdf(x - self.location(e))
    }

    /// `1 - F_e(s)`, the probability that effort `e` performs above `s`.
    pub fn exceed(&self, e: f64, s: f64) -> f64 {
        self.noise().sf(s - self.location(e))
    }

    /// Inverse-transform draw of a performance for effort `e`.
    pub fn sample_performance<R: rand::RngCore + ?Sized>(&self, e: f64, rng: &mut R) -> f64 {
        self.location(e) + self.noise().sample(rng)
    }
}

/// The market-clearing cutoff `s(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffResult {
    pub s: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn check_budget(k: f64) -> Result<()> {
    if k > 0.0 && k < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "budget fraction k must lie in (0, 1), got {k}"
        )))
    }
}

fn binding_mass(p: &EffortMeasure, k: f64) -> Result<f64> {
    check_budget(k)?;
    let mass = p.total_mass();
    if mass <= k {
        return Err(Error::BudgetNotBinding { mass, k });
    }
    Ok(mass)
}

fn residual_unchecked(fam: &PerformanceFamily, p: &EffortMeasure, s: f64, k: f64) -> f64 {
    p.integrate(|e| fam.exceed(e, s)) - k
}

/// `∫ [1 - F_e(s)] dp(e) - k`, strictly decreasing in `s`.
pub fn clearing_residual(
    fam: &PerformanceFamily,
    p: &EffortMeasure,
    s: f64,
    k: f64,
) -> Result<f64> {
    binding_mass(p, k)?;
    Ok(residual_unchecked(fam, p, s, k))
}

/// Solves `∫ [1 - F_e(s)] dp(e) = k` for the cutoff `s`.
///
/// Exponential bracket expansion from `g(mean effort)`, bisection to a
/// relative width of 1e-12, then one secant step on the final bracket.
pub fn solve_cutoff(fam: &PerformanceFamily, p: &EffortMeasure, k: f64) -> Result<CutoffResult> {
    binding_mass(p, k)?;
    let r = |s: f64| residual_unchecked(fam, p, s, k);
    let s0 = fam.location(p.mean());
    let r0 = r(s0);
    if r0 == 0.0 {
        return Ok(CutoffResult {
            s: s0,
            residual: 0.0,
            iterations: 0,
        });
    }
    let dir = if r0 > 0.0 { 1.0 } else { -1.0 };
    let (mut near, mut near_r) = (s0, r0);
    let mut step = 1.0;
    let mut iterations = 0;
    let (far, far_r) = loop {
        let s = s0 + dir * step;
        let rs = r(s);
        iterations += 1;
        if rs == 0.0 {
            return Ok(CutoffResult {
                s,
                residual: 0.0,
                iterations,
            });
        }
        if (rs > 0.0) != (r0 > 0.0) {
            break (s, rs);
        }
        if iterations >= MAX_DOUBLINGS || !s.is_finite() {
            return Err(Error::Numeric(format!(
                "cutoff bracket not found after {iterations} doublings from s0 = {s0}"
            )));
        }
        near = s;
        near_r = rs;
        step *= 2.0;
    };
    // lo has positive residual, hi negative
    let (mut lo, mut r_lo, mut hi, mut r_hi) = if dir > 0.0 {
        (near, near_r, far, far_r)
    } else {
        (far, far_r, near, near_r)
    };
    while hi - lo > BISECTION_WIDTH * lo.abs().max(hi.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let rm = r(mid);
        iterations += 1;
        if rm == 0.0 {
            return Ok(CutoffResult {
                s: mid,
                residual: 0.0,
                iterations,
            });
        }
        if rm > 0.0 {
            lo = mid;
            r_lo = rm;
        } else {
            hi = mid;
            r_hi = rm;
        }
    }
    let (mut best, mut best_r) = if r_lo.abs() < r_hi.abs() {
        (lo, r_lo)
    } else {
        (hi, r_hi)
    };
    let secant = lo - r_lo * (hi - lo) / (r_hi - r_lo);
    if secant.is_finite() && secant >= lo && secant <= hi {
        let rs = r(secant);
        iterations += 1;
        if rs.abs() < best_r.abs() {
            best = secant;
            best_r = rs;
        }
    }
    Ok(CutoffResult {
        s: best,
        residual: best_r,
        iterations,
    })
}

/// `W(e, p)` for a fixed competition `p`: the solved cutoff (or the
/// non-binding case) paired with its family.
#[derive(Debug, Clone)]
pub struct CsfProfile<'a> {
    fam: &'a PerformanceFamily,
    cutoff: Option<CutoffResult>,
}

impl<'a> CsfProfile<'a> {
    pub fn new(fam: &'a PerformanceFamily, p: &EffortMeasure, k: f64) -> Result<Self> {
        let cutoff = match solve_cutoff(fam, p, k) {
            Ok(c) => Some(c),
            Err(Error::BudgetNotBinding { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(CsfProfile { fam, cutoff })
    }

    /// `None` when the budget is not binding.
    pub fn cutoff(&self) -> Option<&CutoffResult> {
        self.cutoff.as_ref()
    }

    /// Winning probability for effort `e > 0`; exactly 1 when `p(E) <= k`.
    pub fn win_probability(&self, e: f64) -> Result<f64> {
        if !(e > 0.0) {
            return Err(Error::domain(format!(
                "effort must lie in (0, inf), got {e}"
            )));
        }
        Ok(match &self.cutoff {
            Some(c) => self.fam.exceed(e, c.s),
            None => 1.0,
        })
    }
}

/// `W(e, p) = 1 - F_e(s(p))`, or 1 when `p(E) <= k`.
pub fn csf_eval(fam: &PerformanceFamily, p: &EffortMeasure, k: f64, e: f64) -> Result<f64> {
    check_budget(k)?;
    CsfProfile::new(fam, p, k)?.win_probability(e)
}

/// Translation `t` with `F2(x) = F1(x + t)` when both cdfs represent the
/// same additive success function: `t = F1⁻¹(1 - k) - F2⁻¹(1 - k)`.
///
/// The value alone does not establish that the two representations agree;
/// callers must compare the success functions themselves.
pub fn recover_translation(f1: &NoiseDistribution, f2: &NoiseDistribution, k: f64) -> Result<f64> {
    check_budget(k)?;
    Ok(f1.quantile(1.0 - k)? - f2.quantile(1.0 - k)?)
}
