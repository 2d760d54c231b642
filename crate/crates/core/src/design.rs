//! Prize-structure design: how equilibrium effort depends on the fraction
//! of winners when a fixed purse is split equally among them, and how much
//! of the prize money is dissipated in effort.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::NoiseDistribution;
use crate::equilibrium::{foc_equilibrium, ContestSpec, CostFunction, Utility};
use crate::error::{Error, Result};

/// Default grid of budget fractions: 512 log-spaced points on [0.005, 0.995].
pub fn default_k_grid() -> Vec<f64> {
    log_grid(0.005, 0.995, 512)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let mut g: Vec<f64> = (0..n)
                .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
                .collect();
            g[0] = lo;
            g[n - 1] = hi;
            g
        }
    }
}

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("k grid is empty"));
    }
    if grid.iter().any(|k| !(*k > 0.0 && *k < 1.0)) {
        return Err(Error::domain("k grid must lie strictly inside (0, 1)"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("k grid must be strictly increasing"));
    }
    Ok(())
}

/// A purse `B` split equally among a fraction `k` of winners (`V = B / k`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignSpec {
    #[serde(rename = "B")]
    pub b: f64,
    pub noise: NoiseDistribution,
    #[serde(default)]
    pub utility: Utility,
    #[serde(default = "quadratic")]
    pub cost: CostFunction,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<f64>,
}

fn quadratic() -> CostFunction {
    CostFunction::Power { a: 1.0, beta: 2.0 }
}

impl DesignSpec {
    /// Risk-neutral agents with cost `e^2`, on the default grid.
    pub fn new(b: f64, noise: NoiseDistribution) -> Result<Self> {
        let spec = DesignSpec {
            b,
            noise,
            utility: Utility::Linear,
            cost: quadratic(),
            k_grid: default_k_grid(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_grid(mut self, k_grid: Vec<f64>) -> Result<Self> {
        self.k_grid = k_grid;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::domain(format!(
                "purse B must be positive, got {}",
                self.b
            )));
        }
        check_grid(&self.k_grid)
    }

    pub fn contest(&self, k: f64) -> Result<ContestSpec> {
        ContestSpec::from_purse(
            k,
            self.b,
            self.cost.clone(),
            self.utility,
            self.noise.clone(),
        )
    }

    /// `e*(k)` solving the first-order condition with `V = B / k`.
    pub fn effort_at(&self, k: f64) -> Result<f64> {
        Ok(foc_equilibrium(&self.contest(k)?)?.e_star)
    }
}

/// `(k, e*(k))` over the spec's grid.
pub fn effort_curve(spec: &DesignSpec) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    spec.k_grid
        .par_iter()
        .map(|k| Ok((*k, spec.effort_at(*k)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalK {
    pub k_star: f64,
    pub e_star: f64,
    /// The grid maximum is at an endpoint; `k_star` is that endpoint, not an
    /// interior optimum.
    pub boundary: bool,
}

/// Maximizer of a sampled curve, refined by golden section on the bracket
/// around the best grid point. Endpoint maxima are flagged, not refined.
pub fn refine_argmax<F: Fn(f64) -> Result<f64>>(curve: &[(f64, f64)], f: F) -> Result<OptimalK> {
    if curve.is_empty() {
        return Err(Error::domain("empty curve"));
    }
    let best = (0..curve.len()).fold(0, |b, i| if curve[i].1 > curve[b].1 { i } else { b });
    if best == 0 || best == curve.len() - 1 {
        return Ok(OptimalK {
            k_star: curve[best].0,
            e_star: curve[best].1,
            boundary: true,
        });
    }
    let (mut a, mut b) = (curve[best - 1].0, curve[best + 1].0);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > 1e-12 * b {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        }
    }
    let (k, v) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok(if v >= curve[best].1 {
        OptimalK {
            k_star: k,
            e_star: v,
            boundary: false,
        }
    } else {
        OptimalK {
            k_star: curve[best].0,
            e_star: curve[best].1,
            boundary: false,
        }
    })
}

/// The budget fraction maximizing equilibrium effort.
pub fn optimal_k(spec: &DesignSpec) -> Result<OptimalK> {
    let curve = effort_curve(spec)?;
    refine_argmax(&curve, |k| spec.effort_at(k))
}

/// `f(s) / (1 - F(s))`.
pub fn hazard_ratio(noise: &NoiseDistribution, s: f64) -> Result<f64> {
    Ok(noise.pdf(s)? / noise.sf(s))
}

/// `(1/k) f(F^{-1}(1-k))`, the hazard ratio at the cutoff of a unit-mass
/// Dirac competition.
pub fn figure1_value(noise: &NoiseDistribution, k: f64) -> Result<f64> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::domain(format!("k must lie in (0, 1), got {k}")));
    }
    Ok(noise.pdf(noise.quantile(1.0 - k)?)? / k)
}

pub fn figure1_curve(noise: &NoiseDistribution, k_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_grid(k_grid)?;
    k_grid
        .par_iter()
        .map(|k| Ok((*k, figure1_value(noise, *k)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneVerdict {
    Pass,
    Fail,
    /// The noise is asymmetric or its density is not single-peaked at its
    /// center, so the monotonicity result does not apply.
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneEffortReport {
    pub verdict: MonotoneVerdict,
    /// Largest increase `e*(k_{i+1}) - e*(k_i)` along the grid.
    pub worst_increase: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Violations of `s f'(s) <= 0` larger than this make the check inapplicable.
pub const SLOPE_SIGN_TOL: f64 = 1e-9;

/// For symmetric noise with `s f'(s) <= 0`, `e*(k)` must be non-increasing
/// on `[0.5, 1)`. Checks the hypothesis on 2001 points across the bulk of
/// the noise, then the conclusion along `spec.k_grid`.
pub fn proposition5_check(spec: &DesignSpec) -> Result<MonotoneEffortReport> {
    spec.validate()?;
    if spec.k_grid.iter().any(|k| *k < 0.5) {
        return Err(Error::domain("grid must lie in [0.5, 1)"));
    }
    let inapplicable = |reason: String| MonotoneEffortReport {
        verdict: MonotoneVerdict::Inapplicable,
        worst_increase: 0.0,
        at_k: None,
        reason: Some(reason),
    };
    let noise = &spec.noise;
    if !noise.is_symmetric() || !noise.has_density() {
        return Ok(inapplicable(format!(
            "{} is not a symmetric distribution with a density",
            noise.label()
        )));
    }
    let (lo, hi) = noise.bulk_range();
    for s in linear_grid(lo, hi, 2001) {
        let v = s * noise.pdf_derivative(s)?;
        if v > SLOPE_SIGN_TOL {
            return Ok(inapplicable(format!("s f'(s) = {v:e} > 0 at s = {s}")));
        }
    }
    let curve = effort_curve(spec)?;
    let (mut worst, mut at) = (f64::NEG_INFINITY, None);
    for w in curve.windows(2) {
        let inc = w[1].1 - w[0].1;
        if inc > worst {
            worst = inc;
            at = Some(w[1].0);
        }
    }
    let verdict = if worst > 0.0 {
        MonotoneVerdict::Fail
    } else {
        MonotoneVerdict::Pass
    };
    Ok(MonotoneEffortReport {
        verdict,
        worst_increase: worst.max(f64::MIN),
        at_k: if worst > 0.0 { at } else { None },
        reason: None,
    })
}

/// Total effort cost over total rents, `V f(F^{-1}(1-k))^2 / (4 A k)`, for
/// risk-neutral agents with cost `A e^2`.
pub fn rent_dissipation_ratio(v: f64, a: f64, k: f64, noise: &NoiseDistribution) -> Result<f64> {
    check_dissipation_args(v, a, k)?;
    let f = noise.pdf(noise.quantile(1.0 - k)?)?;
    Ok(v * f * f / (4.0 * a * k))
}

/// The prize at which costs equal rents, `4 A k / f(F^{-1}(1-k))^2`.
pub fn dissipation_threshold(a: f64, k: f64, noise: &NoiseDistribution) -> Result<f64> {
    check_dissipation_args(1.0, a, k)?;
    let f = noise.pdf(noise.quantile(1.0 - k)?)?;
    Ok(4.0 * a * k / (f * f))
}

/// `c(e*) / (k V)` with `e*` from the first-order condition.
pub fn dissipation_from_equilibrium(
    v: f64,
    a: f64,
    k: f64,
    noise: &NoiseDistribution,
) -> Result<f64> {
    check_dissipation_args(v, a, k)?;
    let spec = ContestSpec::new(
        k,
        v,
        CostFunction::quadratic(a)?,
        Utility::Linear,
        noise.clone(),
    )?;
    let e = foc_equilibrium(&spec)?.e_star;
    Ok(spec.cost.c(e) / (k * v))
}

fn check_dissipation_args(v: f64, a: f64, k: f64) -> Result<()> {
    if !(v > 0.0 && a > 0.0 && k > 0.0 && k < 1.0) {
        return Err(Error::domain(format!(
            "need V > 0, A > 0, k in (0, 1); got V={v}, A={a}, k={k}"
        )));
    }
    Ok(())
}

/// Writes `k,<value_name>` rows.
pub fn write_curve_csv<W: Write>(out: W, value_name: &str, curve: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", value_name])?;
    for (k, v) in curve {
        w.write_record([format!("{k:.14e}"), format!("{v:.14e}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn t(nu: f64) -> NoiseDistribution {
        NoiseDistribution::student_t(nu).unwrap()
    }

    #[test]
    fn hazard_closed_forms() {
        let n = NoiseDistribution::normal();
        assert!((hazard_ratio(&n, 0.0).unwrap() - 2.0 / (2.0 * PI).sqrt()).abs() < 1e-14);
        assert!((hazard_ratio(&t(1.0), 0.0).unwrap() - 2.0 / PI).abs() < 1e-14);
        assert!((figure1_value(&t(1.0), 0.25).unwrap() - 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn figure1_matches_hazard_at_cutoff() {
        for noise in [
            NoiseDistribution::normal(),
            t(3.0),
            t(1.0),
            NoiseDistribution::logistic(1.0).unwrap(),
        ] {
            for (k, v) in figure1_curve(&noise, &log_grid(0.01, 0.99, 57)).unwrap() {
                let h = hazard_ratio(&noise, noise.quantile(1.0 - k).unwrap()).unwrap();
                assert!(
                    (v - h).abs() <= 1e-12 * v.max(1.0),
                    "{} {k} {v} {h}",
                    noise.label()
                );
            }
        }
    }

    #[test]
    fn cauchy_effort_anchor() {
        let spec = DesignSpec::new(1.0, t(1.0)).unwrap();
        assert!((spec.effort_at(0.25).unwrap() - 1.0 / PI).abs() < 1e-10);
    }

    #[test]
    fn effort_curve_quadratic_formula() {
        let spec = DesignSpec::new(1.0, NoiseDistribution::normal())
            .unwrap()
            .with_grid(log_grid(0.05, 0.95, 19))
            .unwrap();
        for (k, e) in effort_curve(&spec).unwrap() {
            let f = figure1_value(&spec.noise, k).unwrap();
            assert!((e - f / 2.0).abs() < 1e-10, "{k}");
        }
    }

    #[test]
    fn optimal_k_shapes() {
        let normal =
            optimal_k(&DesignSpec::new(1.0, NoiseDistribution::normal()).unwrap()).unwrap();
        assert!(normal.boundary && normal.k_star == 0.005);
        let k3 = optimal_k(&DesignSpec::new(1.0, t(3.0)).unwrap()).unwrap();
        let k1 = optimal_k(&DesignSpec::new(1.0, t(1.0)).unwrap()).unwrap();
        assert!(!k3.boundary && !k1.boundary);
        assert!(k1.k_star > k3.k_star, "{k1:?} {k3:?}");
        assert!(k1.k_star <= 0.5 && k3.k_star <= 0.5);
    }

    #[test]
    fn monotone_effort_verdicts() {
        let grid = linear_grid(0.5, 0.99, 64);
        for noise in [
            NoiseDistribution::normal(),
            NoiseDistribution::logistic(2.0).unwrap(),
            t(1.0),
        ] {
            let spec = DesignSpec::new(1.0, noise)
                .unwrap()
                .with_grid(grid.clone())
                .unwrap();
            assert_eq!(
                proposition5_check(&spec).unwrap().verdict,
                MonotoneVerdict::Pass
            );
        }
        let shifted = DesignSpec::new(1.0, NoiseDistribution::normal().shift(1.0))
            .unwrap()
            .with_grid(grid)
            .unwrap();
        assert_eq!(
            proposition5_check(&shifted).unwrap().verdict,
            MonotoneVerdict::Inapplicable
        );
    }

    #[test]
    fn dissipation_paths_agree() {
        let n = NoiseDistribution::normal();
        assert!(
            (rent_dissipation_ratio(1.0, 1.0, 0.5, &n).unwrap() - 0.07957747154594767).abs()
                < 1e-15
        );
        let vstar = dissipation_threshold(1.0, 0.5, &n).unwrap();
        assert!((vstar - 4.0 * PI).abs() < 1e-12);
        assert!((rent_dissipation_ratio(vstar, 1.0, 0.5, &n).unwrap() - 1.0).abs() < 1e-12);
        for (v, a, k) in [(1.0, 1.0, 0.5), (3.0, 0.5, 0.2), (20.0, 2.0, 0.9)] {
            let x = rent_dissipation_ratio(v, a, k, &n).unwrap();
            let y = dissipation_from_equilibrium(v, a, k, &n).unwrap();
            assert!((x - y).abs() < 1e-10);
            assert!((rent_dissipation_ratio(2.0 * v, a, k, &n).unwrap() - 2.0 * x).abs() < 1e-14);
        }
    }

    #[test]
    fn curve_csv_has_header() {
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, "value", &[(0.5, 1.0)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("k,value\n5.00000000000000e-1,"));
    }
}
