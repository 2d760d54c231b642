//! Symmetric equilibrium of the contest game under additive random
//! performance: agents pick effort `e` to maximize `W(e, p) u(V) - c(e)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::NoiseDistribution;
use crate::engine::{CsfProfile, PerformanceFamily};
use crate::error::{Error, Result};
use crate::measures::EffortMeasure;

/// Efforts below this are treated as staying out of the contest.
pub const MIN_EFFORT: f64 = 1e-12;

/// Coarse grid size for the global best-response search.
pub const BEST_RESPONSE_GRID: usize = 1000;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Effort cost `c(e)` with its first two derivatives.
#[derive(Clone)]
pub enum CostFunction {
    /// `c(e) = A e^β`.
    Power { a: f64, beta: f64 },
    Custom {
        name: String,
        c: Scalar,
        dc: Scalar,
        d2c: Scalar,
    },
}

impl CostFunction {
    pub fn power(a: f64, beta: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::domain(format!(
                "power cost needs A > 0 and beta > 1, got A={a}, beta={beta}"
            )));
        }
        Ok(CostFunction::Power { a, beta })
    }

    pub fn quadratic(a: f64) -> Result<Self> {
        Self::power(a, 2.0)
    }

    /// A cost from closures, accepted after sampled checks of `c(0+) = c'(0+) = 0`,
    /// `c' > 0` and `c'' > 0`.
    pub fn custom(
        name: impl Into<String>,
        c: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dc: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2c: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let cost = CostFunction::Custom {
            name: name.into(),
            c: Arc::new(c),
            dc: Arc::new(dc),
            d2c: Arc::new(d2c),
        };
        cost.validate()?;
        Ok(cost)
    }

    fn validate(&self) -> Result<()> {
        if self.c(MIN_EFFORT).abs() > 1e-6 || self.dc(MIN_EFFORT).abs() > 1e-6 {
            return Err(Error::domain(
                "cost and marginal cost must vanish as effort tends to 0",
            ));
        }
        for i in 0..=120 {
            let e = 10f64.powf(-9.0 + 0.1 * i as f64);
            if !(self.dc(e) > 0.0 && self.d2c(e) > 0.0) {
                return Err(Error::domain(format!(
                    "cost must be strictly increasing and convex; fails at e={e}"
                )));
            }
        }
        Ok(())
    }

    pub fn c(&self, e: f64) -> f64 {
        match self {
            CostFunction::Power { a, beta } => a * e.powf(*beta),
            CostFunction::Custom { c, .. } => c(e),
        }
    }

    pub fn dc(&self, e: f64) -> f64 {
        match self {
            CostFunction::Power { a, beta } => a * beta * e.powf(beta - 1.0),
            CostFunction::Custom { dc, .. } => dc(e),
        }
    }

    pub fn d2c(&self, e: f64) -> f64 {
        match self {
            CostFunction::Power { a, beta } => a * beta * (beta - 1.0) * e.powf(beta - 2.0),
            CostFunction::Custom { d2c, .. } => d2c(e),
        }
    }

    /// Effort at which marginal cost equals `target > 0`, by bisection on a
    /// doubling bracket.
    pub fn invert_marginal(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::domain(format!(
                "marginal cost target must be positive, got {target}"
            )));
        }
        let mut hi = 1.0;
        let mut n = 0;
        while self.dc(hi) < target {
            hi *= 2.0;
            n += 1;
            if n > 2000 {
                return Err(Error::Numeric(
                    "marginal cost never reaches the target".into(),
                ));
            }
        }
        let mut lo = 0.0;
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.dc(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (rl, rh) = ((self.dc(lo) - target).abs(), (self.dc(hi) - target).abs());
        Ok(if lo > 0.0 && rl < rh { lo } else { hi })
    }
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostFunction::Power { a, beta } => write!(f, "Power {{ a: {a}, beta: {beta} }}"),
            CostFunction::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CostRepr {
    Power {
        #[serde(rename = "A")]
        a: f64,
        #[serde(default = "two")]
        beta: f64,
    },
}

fn two() -> f64 {
    2.0
}

impl Serialize for CostFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CostFunction::Power { a, beta } => CostRepr::Power { a: *a, beta: *beta }.serialize(s),
            CostFunction::Custom { .. } => Err(serde::ser::Error::custom(
                "custom costs cannot be serialized",
            )),
        }
    }
}

impl<'de> Deserialize<'de> for CostFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let CostRepr::Power { a, beta } = CostRepr::deserialize(d)?;
        CostFunction::power(a, beta).map_err(serde::de::Error::custom)
    }
}

/// Utility of the prize.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Utility {
    #[default]
    Linear,
    /// `u(V) = V^ρ`, `ρ ∈ (0, 1]`.
    Power { rho: f64 },
}

impl Utility {
    pub fn power(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::domain(format!(
                "utility exponent must lie in (0, 1], got {rho}"
            )));
        }
        Ok(Utility::Power { rho })
    }

    pub fn u(&self, v: f64) -> f64 {
        match self {
            Utility::Linear => v,
            Utility::Power { rho } => v.powf(*rho),
        }
    }
}

/// A contest with budget fraction `k`, prize `V`, cost, utility and additive noise.
#[derive(Debug, Clone)]
pub struct ContestSpec {
    pub k: f64,
    pub v: f64,
    pub cost: CostFunction,
    pub utility: Utility,
    pub noise: NoiseDistribution,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    k: f64,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    v: Option<f64>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    cost: CostFunction,
    #[serde(default)]
    utility: Utility,
    noise: NoiseDistribution,
}

impl Serialize for ContestSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecRepr {
            k: self.k,
            v: Some(self.v),
            b: None,
            cost: self.cost.clone(),
            utility: self.utility,
            noise: self.noise.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ContestSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = SpecRepr::deserialize(d)?;
        let v = match (r.v, r.b) {
            (Some(v), None) => v,
            (None, Some(b)) => b / r.k,
            _ => return Err(D::Error::custom("exactly one of `V` and `B` must be given")),
        };
        ContestSpec::new(r.k, v, r.cost, r.utility, r.noise).map_err(D::Error::custom)
    }
}

impl ContestSpec {
    pub fn new(
        k: f64,
        v: f64,
        cost: CostFunction,
        utility: Utility,
        noise: NoiseDistribution,
    ) -> Result<Self> {
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::domain(format!(
                "budget fraction k must lie in (0, 1), got {k}"
            )));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("prize V must be positive, got {v}")));
        }
        if let Utility::Power { rho } = utility {
            Utility::power(rho)?;
        }
        Ok(ContestSpec {
            k,
            v,
            cost,
            utility,
            noise,
        })
    }

    /// The prize from a purse `B` split among a fraction `k`: `V = B / k`.
    pub fn from_purse(
        k: f64,
        b: f64,
        cost: CostFunction,
        utility: Utility,
        noise: NoiseDistribution,
    ) -> Result<Self> {
        Self::new(k, b / k, cost, utility, noise)
    }

    pub fn family(&self) -> PerformanceFamily {
        PerformanceFamily::additive(self.noise.clone())
    }

    pub fn prize_utility(&self) -> f64 {
        self.utility.u(self.v)
    }

    /// Smallest power of two at which cost exceeds the prize utility; no
    /// effort beyond it can pay.
    fn effort_ceiling(&self) -> f64 {
        let u = self.prize_utility();
        let mut e: f64 = 1.0;
        while self.cost.c(e) <= u && e < 1e300 {
            e *= 2.0;
        }
        while e > 1e-300 && self.cost.c(0.5 * e) > u {
            e *= 0.5;
        }
        e
    }
}

/// `U(e, p) = W(e, p) u(V) - c(e)`.
pub fn payoff(spec: &ContestSpec, e: f64, p: &EffortMeasure) -> Result<f64> {
    let fam = spec.family();
    let profile = CsfProfile::new(&fam, p, spec.k)?;
    Ok(profile.win_probability(e)? * spec.prize_utility() - spec.cost.c(e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocSolution {
    pub e_star: f64,
    /// `f(F^{-1}(1-k)) u(V)`.
    pub marginal_benefit: f64,
    /// `|c'(e*) - f(F^{-1}(1-k)) u(V)|`.
    pub foc_residual: f64,
}

/// Solves `c'(e*) = f(F^{-1}(1-k)) u(V)`.
pub fn foc_equilibrium(spec: &ContestSpec) -> Result<FocSolution> {
    let s = spec.noise.quantile(1.0 - spec.k)?;
    let rhs = spec.noise.pdf(s)? * spec.prize_utility();
    let e_star = spec.cost.invert_marginal(rhs)?;
    Ok(FocSolution {
        e_star,
        marginal_benefit: rhs,
        foc_residual: (spec.cost.dc(e_star) - rhs).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SocReport {
    pub pass: bool,
    /// Smallest `c''(e) + f'(s) u(V)` over the sampled grids.
    pub margin: f64,
    pub at_e: f64,
    pub at_s: f64,
}

/// Samples `c''(e) > -f'(s) u(V)` on log-spaced efforts in `e_range` and
/// evenly spaced performance levels in `s_range`.
pub fn soc_check(
    spec: &ContestSpec,
    e_range: (f64, f64),
    s_range: (f64, f64),
    points: usize,
) -> Result<SocReport> {
    let (elo, ehi) = e_range;
    if !(elo > 0.0 && ehi > elo) || !(s_range.1 > s_range.0) || points < 2 {
        return Err(Error::domain(
            "soc_check needs non-empty ranges with positive efforts",
        ));
    }
    let u = spec.prize_utility();
    let mut min_c2 = (f64::INFINITY, elo);
    for i in 0..points {
        let e = (elo.ln() + (ehi / elo).ln() * i as f64 / (points - 1) as f64).exp();
        let c2 = spec.cost.d2c(e);
        if c2 < min_c2.0 {
            min_c2 = (c2, e);
        }
    }
    let mut min_f1 = (f64::INFINITY, s_range.0);
    for i in 0..points {
        let s = s_range.0 + (s_range.1 - s_range.0) * i as f64 / (points - 1) as f64;
        let d = spec.noise.pdf_derivative(s)?;
        if d < min_f1.0 {
            min_f1 = (d, s);
        }
    }
    let margin = min_c2.0 + min_f1.0 * u;
    Ok(SocReport {
        pass: margin > 0.0,
        margin,
        at_e: min_c2.1,
        at_s: min_f1.1,
    })
}

/// [`soc_check`] over efforts up to where cost exceeds the prize utility and
/// the bulk of the noise distribution, 1024 points each.
pub fn soc_check_default(spec: &ContestSpec) -> Result<SocReport> {
    let hi = spec.effort_ceiling();
    soc_check(spec, (hi * 1e-9, hi), spec.noise.bulk_range(), 1024)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestResponse {
    pub effort: f64,
    pub payoff: f64,
    /// The maximizer sits at the lower end of the search (effort tending to 0)
    /// or the competition leaves every participant a winner.
    pub boundary: bool,
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if b - a <= 1e-13 * b.abs().max(1e-300) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Global maximizer of `U(·, p)`: a log grid up to the effort where cost
/// exceeds the prize utility, then golden-section refinement around the best
/// grid point.
pub fn best_response(spec: &ContestSpec, p: &EffortMeasure) -> Result<BestResponse> {
    let fam = spec.family();
    let profile = CsfProfile::new(&fam, p, spec.k)?;
    let u = spec.prize_utility();
    if profile.cutoff().is_none() {
        return Ok(BestResponse {
            effort: MIN_EFFORT,
            payoff: u - spec.cost.c(MIN_EFFORT),
            boundary: true,
        });
    }
    let pay = |e: f64| {
        profile
            .win_probability(e)
            .map(|w| w * u - spec.cost.c(e))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let hi = spec.effort_ceiling();
    let lo = (hi * 1e-9).max(MIN_EFFORT);
    let n = BEST_RESPONSE_GRID;
    let grid: Vec<f64> = (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect();
    let vals: Vec<f64> = grid.iter().map(|e| pay(*e)).collect();
    let best = (0..n).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
    if best == 0 {
        return Ok(BestResponse {
            effort: grid[0],
            payoff: vals[0],
            boundary: true,
        });
    }
    let a = grid[best - 1];
    let b = grid[(best + 1).min(n - 1)];
    let (e, v) = golden_max(pay, a, b);
    let (effort, payoff) = if v >= vals[best] {
        (e, v)
    } else {
        (grid[best], vals[best])
    };
    Ok(BestResponse {
        effort,
        payoff,
        boundary: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verification {
    pub verified: bool,
    pub best_response: BestResponse,
    pub payoff_at_candidate: f64,
}

/// Tolerance on `|BR(δ_{e*}) - e*|`.
pub const VERIFY_TOL: f64 = 1e-4;

/// `e*` is an equilibrium when it is a best response to everyone playing it
/// and participation pays.
pub fn verify_equilibrium(spec: &ContestSpec, e_star: f64) -> Result<Verification> {
    if !(e_star > 0.0) {
        return Err(Error::domain(format!(
            "candidate effort must be positive, got {e_star}"
        )));
    }
    let p = EffortMeasure::dirac(e_star)?;
    let br = best_response(spec, &p)?;
    let own = payoff(spec, e_star, &p)?;
    Ok(Verification {
        verified: (br.effort - e_star).abs() <= VERIFY_TOL && own >= 0.0,
        best_response: br,
        payoff_at_candidate: own,
    })
}

/// Everything reported for one contest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub e_star: f64,
    pub foc_residual: f64,
    pub soc_margin: f64,
    pub soc_pass: bool,
    pub verified: bool,
    /// Grid best response to `δ_{e*}`; differs from `e_star` when the
    /// first-order point is not an equilibrium.
    pub best_response: f64,
    pub payoff: f64,
}

pub fn solve(spec: &ContestSpec) -> Result<EquilibriumReport> {
    let foc = foc_equilibrium(spec)?;
    let soc = soc_check_default(spec)?;
    let ver = verify_equilibrium(spec, foc.e_star)?;
    Ok(EquilibriumReport {
        e_star: foc.e_star,
        foc_residual: foc.foc_residual,
        soc_margin: soc.margin,
        soc_pass: soc.pass,
        verified: ver.verified,
        best_response: ver.best_response.effort,
        payoff: ver.payoff_at_candidate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_normal(k: f64, v: f64, a: f64) -> ContestSpec {
        ContestSpec::new(
            k,
            v,
            CostFunction::quadratic(a).unwrap(),
            Utility::Linear,
            NoiseDistribution::normal(),
        )
        .unwrap()
    }

    #[test]
    fn payoff_examples() {
        let spec = quad_normal(0.3, 1.0, 1.0);
        let d = EffortMeasure::dirac(0.7).unwrap();
        assert!((payoff(&spec, 0.7, &d).unwrap() - (0.3 - 0.49)).abs() < 1e-10);
        let d1 = EffortMeasure::dirac(1.0).unwrap();
        // 1 - Φ(Φ^{-1}(0.7) - 0.2) - 1.44
        assert!((payoff(&spec, 1.2, &d1).unwrap() - (0.3728174158145734 - 1.44)).abs() < 1e-10);
        assert!(payoff(&spec, 1e-12, &d1).unwrap() >= 0.0);
    }

    #[test]
    fn foc_closed_forms() {
        let half = foc_equilibrium(&quad_normal(0.5, 1.0, 1.0)).unwrap();
        assert!((half.e_star - 0.19947114020071634).abs() < 1e-12);
        assert!(half.foc_residual <= 1e-10);
        let quarter = foc_equilibrium(&quad_normal(0.25, 1.0, 1.0)).unwrap();
        assert!((quarter.e_star - 0.15888828634205347).abs() < 1e-12);
        let tiny = foc_equilibrium(&quad_normal(0.5, 1e-9, 1.0)).unwrap();
        assert!(tiny.e_star < 1e-9);
    }

    #[test]
    fn foc_power_cost_matches_inverse() {
        let cost = CostFunction::power(0.7, 1.5).unwrap();
        let spec = ContestSpec::new(
            0.4,
            2.0,
            cost,
            Utility::power(0.5).unwrap(),
            NoiseDistribution::normal(),
        )
        .unwrap();
        let foc = foc_equilibrium(&spec).unwrap();
        let expect = (foc.marginal_benefit / (0.7 * 1.5)).powf(2.0);
        assert!((foc.e_star - expect).abs() < 1e-12 * expect.max(1.0));
    }

    #[test]
    fn soc_examples() {
        assert!(soc_check_default(&quad_normal(0.3, 1.0, 1.0)).unwrap().pass);
        let bad = soc_check_default(&quad_normal(0.3, 100.0, 0.01)).unwrap();
        assert!(!bad.pass);
        // worst slope of the normal density sits at s = 1
        assert!((bad.at_s - 1.0).abs() < 0.02, "{bad:?}");
        let lq = CostFunction::custom(
            "linear+quadratic",
            |e| e + e * e,
            |e| 1.0 + 2.0 * e,
            |_| 2.0,
        );
        assert!(lq.is_err(), "marginal cost does not vanish at 0");
        let cubic = CostFunction::custom(
            "e^2+e^3",
            |e| e * e + e.powi(3),
            |e| 2.0 * e + 3.0 * e * e,
            |e| 2.0 + 6.0 * e,
        )
        .unwrap();
        let spec = ContestSpec::new(
            0.3,
            1.0,
            cubic.clone(),
            Utility::Linear,
            NoiseDistribution::normal(),
        )
        .unwrap();
        assert!(soc_check_default(&spec).unwrap().pass);
        let spec = ContestSpec::new(
            0.3,
            20.0,
            cubic,
            Utility::Linear,
            NoiseDistribution::normal(),
        )
        .unwrap();
        assert!(!soc_check_default(&spec).unwrap().pass);
    }

    #[test]
    fn best_response_against_dirac() {
        let spec = quad_normal(0.25, 1.0, 1.0);
        let br = best_response(&spec, &EffortMeasure::dirac(0.1).unwrap()).unwrap();
        assert!((br.effort - 0.165732836878759).abs() < 1e-6, "{br:?}");
        assert!((br.payoff - 0.2438754151579006).abs() < 1e-10);
        assert!(!br.boundary);
    }

    #[test]
    fn equilibrium_verifies_and_perturbation_does_not() {
        let spec = quad_normal(0.5, 1.0, 1.0);
        let e = foc_equilibrium(&spec).unwrap().e_star;
        assert!(verify_equilibrium(&spec, e).unwrap().verified);
        assert!(!verify_equilibrium(&spec, e + 0.05).unwrap().verified);
        let r = solve(&spec).unwrap();
        assert!(r.verified && r.soc_pass);
    }

    #[test]
    fn vanishing_prize_hits_the_boundary() {
        let spec = quad_normal(0.5, 1e-14, 1.0);
        let br = best_response(&spec, &EffortMeasure::dirac(1.0).unwrap()).unwrap();
        assert!(br.effort < 1e-12 || br.boundary, "{br:?}");
        let slack = EffortMeasure::from_atoms([(1.0, 0.4)]).unwrap();
        let br = best_response(&spec, &slack).unwrap();
        assert!(br.boundary && br.effort == MIN_EFFORT);
    }

    #[test]
    fn spec_json_accepts_purse() {
        let js = r#"{"k": 0.25, "B": 1.0, "cost": {"kind": "power", "A": 1.0, "beta": 2.0},
                     "utility": {"kind": "linear"}, "noise": {"kind": "normal"}}"#;
        let spec: ContestSpec = serde_json::from_str(js).unwrap();
        assert_eq!(spec.v, 4.0);
        let back: ContestSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back.v, 4.0);
        let both = r#"{"k": 0.25, "B": 1.0, "V": 4.0, "cost": {"kind": "power", "A": 1.0}, "noise": {"kind": "normal"}}"#;
        assert!(serde_json::from_str::<ContestSpec>(both).is_err());
        let bad = r#"{"k": 0.25, "V": 1.0, "cost": {"kind": "power", "A": -1.0}, "noise": {"kind": "normal"}}"#;
        assert!(serde_json::from_str::<ContestSpec>(bad).is_err());
    }
}
