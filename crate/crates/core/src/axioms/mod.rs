//! Sampling-based certification and falsification of contest success
//! functions.
//!
//! A [`BlackBoxCsf`] is probed against the market-clearing identity, the
//! five properties that characterize random performance functions
//! (e-continuity, p-continuity, monotonicity, competitiveness,
//! co-monotonicity) and the two shift invariances that characterize the
//! additive case. A pass means "no violation found at this sample size and
//! resolution"; a fail always carries a witness that re-evaluates to a
//! violation.

mod checks;
pub mod fixtures;
mod tabulated;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{CsfProfile, PerformanceFamily};
use crate::error::{Error, Result};
use crate::measures::{Atom, EffortMeasure};

pub use checks::{bracket_modulus, ModulusTrace};
pub use tabulated::TabulatedCsf;

/// A success function `W(e, p)` known only through evaluation.
pub trait BlackBoxCsf: Sync {
    /// The budget fraction `k` the function claims to clear.
    fn budget(&self) -> f64;

    /// `W(e, p)`, or `None` where the function is not available (for
    /// example tabulated data that does not cover `(e, p)`).
    fn eval(&self, e: f64, p: &EffortMeasure) -> Option<f64>;

    /// Evaluates several efforts against the same competition.
    fn eval_many(&self, efforts: &[f64], p: &EffortMeasure) -> Vec<Option<f64>> {
        efforts.iter().map(|e| self.eval(*e, p)).collect()
    }
}

/// Success function generated by a performance family and a market-clearing
/// cutoff.
#[derive(Debug, Clone)]
pub struct RpfCsf {
    family: PerformanceFamily,
    k: f64,
}

impl RpfCsf {
    pub fn new(family: PerformanceFamily, k: f64) -> Result<Self> {
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::domain(format!(
                "budget fraction k must lie in (0, 1), got {k}"
            )));
        }
        Ok(RpfCsf { family, k })
    }

    pub fn family(&self) -> &PerformanceFamily {
        &self.family
    }
}

impl BlackBoxCsf for RpfCsf {
    fn budget(&self) -> f64 {
        self.k
    }

    fn eval(&self, e: f64, p: &EffortMeasure) -> Option<f64> {
        self.eval_many(&[e], p).pop().flatten()
    }

    fn eval_many(&self, efforts: &[f64], p: &EffortMeasure) -> Vec<Option<f64>> {
        match CsfProfile::new(&self.family, p, self.k) {
            Ok(profile) => efforts
                .iter()
                .map(|e| profile.win_probability(*e).ok())
                .collect(),
            Err(_) => vec![None; efforts.len()],
        }
    }
}

impl<T: BlackBoxCsf + ?Sized + Send> BlackBoxCsf for Box<T> {
    fn budget(&self) -> f64 {
        (**self).budget()
    }
    fn eval(&self, e: f64, p: &EffortMeasure) -> Option<f64> {
        (**self).eval(e, p)
    }
    fn eval_many(&self, efforts: &[f64], p: &EffortMeasure) -> Vec<Option<f64>> {
        (**self).eval_many(efforts, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    MarketClearing,
    EContinuity,
    PContinuity,
    Monotonicity,
    Competitiveness,
    CoMonotonicity,
    InvarianceCommonShifts,
    InvariancePShifts,
}

impl Axiom {
    /// The properties characterizing random performance functions.
    pub const RPF: [Axiom; 5] = [
        Axiom::EContinuity,
        Axiom::PContinuity,
        Axiom::Monotonicity,
        Axiom::Competitiveness,
        Axiom::CoMonotonicity,
    ];
    pub const SHIFTS: [Axiom; 2] = [Axiom::InvarianceCommonShifts, Axiom::InvariancePShifts];
    pub const ALL: [Axiom; 8] = [
        Axiom::MarketClearing,
        Axiom::EContinuity,
        Axiom::PContinuity,
        Axiom::Monotonicity,
        Axiom::Competitiveness,
        Axiom::CoMonotonicity,
        Axiom::InvarianceCommonShifts,
        Axiom::InvariancePShifts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axiom::MarketClearing => "market_clearing",
            Axiom::EContinuity => "e_continuity",
            Axiom::PContinuity => "p_continuity",
            Axiom::Monotonicity => "monotonicity",
            Axiom::Competitiveness => "competitiveness",
            Axiom::CoMonotonicity => "co_monotonicity",
            Axiom::InvarianceCommonShifts => "invariance_common_shifts",
            Axiom::InvariancePShifts => "invariance_p_shifts",
        }
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Axiom {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Axiom::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown axiom `{s}`")))
    }
}

/// Sampling and tolerance settings. Every threshold used by a check lives
/// here and is copied into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub seed: u64,
    /// Sampled cases per check.
    pub samples: usize,
    /// Violation tolerance on winning probabilities.
    pub tol: f64,
    /// Efforts are drawn log-uniformly from this range.
    pub effort_range: (f64, f64),
    /// Sampled competitions mix 1 to `max_atoms` atoms.
    pub max_atoms: usize,
    /// First rungs of the escalation ladders for the limit properties.
    pub ladder: Vec<f64>,
    /// Slack thresholds the limit properties must cross, in order.
    pub slack: Vec<f64>,
    /// Extra ×10 rungs appended to `ladder`.
    pub ladder_extension: usize,
    /// Bracket halvings in the continuity modulus tests.
    pub halvings: usize,
    /// Further halvings applied to a bracket that fails the screening
    /// halvings, before it is reported.
    pub confirm_halvings: usize,
    /// A continuity bracket whose final difference exceeds this fraction
    /// of its initial difference has not shrunk.
    pub continuity_ratio: f64,
    /// Efforts swept in the co-monotonicity check.
    pub sweep_points: usize,
    /// Required agreement when manufacturing equal-value pairs.
    pub match_tol: f64,
    /// Equal-value pairs are only formed where `W` lies in
    /// `[match_band, 1 - match_band]`.
    pub match_band: f64,
    /// When set, competitions are drawn from this pool instead of random atoms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure_pool: Option<Vec<EffortMeasure>>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            seed: 0x5eed,
            samples: 1000,
            tol: 1e-6,
            effort_range: (0.1, 10.0),
            max_atoms: 4,
            ladder: vec![10.0, 100.0, 1000.0],
            slack: vec![0.1, 0.01, 0.001],
            ladder_extension: 300,
            halvings: 6,
            confirm_halvings: 40,
            continuity_ratio: 0.5,
            sweep_points: 32,
            match_tol: 1e-10,
            match_band: 1e-3,
            measure_pool: None,
        }
    }
}

impl AuditConfig {
    fn validate(&self, k: f64) -> Result<()> {
        let (lo, hi) = self.effort_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::domain("effort range must satisfy 0 < lo < hi < inf"));
        }
        if self.samples == 0 || self.max_atoms == 0 || self.sweep_points < 2 {
            return Err(Error::domain(
                "samples, max_atoms and sweep_points must be positive",
            ));
        }
        if self.ladder.is_empty() || self.slack.is_empty() {
            return Err(Error::domain("ladder and slack must be non-empty"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("tolerance must be positive"));
        }
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::domain(format!(
                "budget fraction k must lie in (0, 1), got {k}"
            )));
        }
        if let Some(pool) = &self.measure_pool {
            if pool.is_empty() || pool.iter().any(|p| p.total_mass() <= k) {
                return Err(Error::domain(
                    "measure pool must be non-empty with every mass above k",
                ));
            }
        }
        Ok(())
    }

    /// Ladder rungs: the configured ones followed by `ladder_extension`
    /// successive ×10 extensions.
    fn rungs(&self) -> Vec<f64> {
        let mut r = self.ladder.clone();
        let mut last = *r.last().expect("validated non-empty");
        for _ in 0..self.ladder_extension {
            last *= 10.0;
            r.push(last);
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// No violation found at the sampled size and resolution.
    Pass,
    Fail,
    /// The function could not be evaluated where the check needs it.
    Inapplicable,
}

/// A concrete violating configuration with the values that were observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Clearing {
        p: EffortMeasure,
        integral: f64,
        k: f64,
    },
    /// `e < e_prime` but `W(e, p)` does not stay below `W(e_prime, p)`.
    Order {
        p: EffortMeasure,
        e: f64,
        e_prime: f64,
        w_e: f64,
        w_e_prime: f64,
    },
    /// `W(e, p)` never came within `slack` of 1 along the effort ladder.
    UpperLimit {
        p: EffortMeasure,
        e: f64,
        w: f64,
        slack: f64,
    },
    /// `W(e, δ_ē)` never fell below `slack` along the ē ladder.
    LowerLimit {
        e: f64,
        e_bar: f64,
        w: f64,
        slack: f64,
    },
    /// `W(e, p) > W(e, p')` but `W(e', p) < W(e', p')`.
    Crossing {
        e: f64,
        e_prime: f64,
        p: EffortMeasure,
        p_prime: EffortMeasure,
        w_e_p: f64,
        w_e_p_prime: f64,
        w_e_prime_p: f64,
        w_e_prime_p_prime: f64,
    },
    /// A bracket around a suspected jump that did not shrink under halving.
    /// `variable` is `"e"` (brackets are efforts, `p_prime` absent) or
    /// `"alpha"` (brackets are mixing weights of `p` against `p_prime`).
    Modulus {
        variable: String,
        e: f64,
        p: EffortMeasure,
        #[serde(skip_serializing_if = "Option::is_none")]
        p_prime: Option<EffortMeasure>,
        first: (f64, f64),
        last: (f64, f64),
        first_diff: f64,
        last_diff: f64,
    },
    CommonShift {
        e: f64,
        a: f64,
        p: EffortMeasure,
        w: f64,
        w_shifted: f64,
    },
    PShift {
        e: f64,
        e_prime: f64,
        a: f64,
        p: EffortMeasure,
        p_prime: EffortMeasure,
        w_matched: f64,
        w_matched_prime: f64,
        w_shifted: f64,
        w_shifted_prime: f64,
    },
}

impl Witness {
    /// Re-evaluates the witness against `csf`; `true` when it still shows a
    /// violation beyond the tolerances in `config`.
    pub fn recheck<C: BlackBoxCsf + ?Sized>(&self, csf: &C, config: &AuditConfig) -> bool {
        let tol = config.tol;
        let w = |e: f64, p: &EffortMeasure| csf.eval(e, p);
        let run = || -> Option<bool> {
            Some(match self {
                Witness::Clearing { p, .. } => {
                    let vals = csf.eval_many(&p.nodes().map(|(e, _)| e).collect::<Vec<_>>(), p);
                    let mut integral = 0.0;
                    for ((_, m), v) in p.nodes().zip(vals) {
                        integral += m * v?;
                    }
                    (integral - csf.budget()).abs() > tol
                }
                Witness::Order { p, e, e_prime, .. } => {
                    checks::order_violated(w(*e, p)?, w(*e_prime, p)?, tol)
                }
                Witness::UpperLimit { p, e, slack, .. } => 1.0 - w(*e, p)? > *slack,
                Witness::LowerLimit {
                    e, e_bar, slack, ..
                } => w(*e, &EffortMeasure::dirac(*e_bar).ok()?)? > *slack,
                Witness::Crossing {
                    e,
                    e_prime,
                    p,
                    p_prime,
                    ..
                } => {
                    w(*e, p)? >= w(*e, p_prime)? + tol
                        && w(*e_prime, p)? < w(*e_prime, p_prime)? - tol
                }
                Witness::Modulus {
                    variable,
                    e,
                    p,
                    p_prime,
                    first,
                    last,
                    ..
                } => {
                    let f = |x: f64| -> Option<f64> {
                        if variable == "alpha" {
                            w(*e, &EffortMeasure::mix(x, p, p_prime.as_ref()?).ok()?)
                        } else {
                            w(x, p)
                        }
                    };
                    let d0 = (f(first.1)? - f(first.0)?).abs();
                    let d1 = (f(last.1)? - f(last.0)?).abs();
                    d1 > tol && d1 > config.continuity_ratio * d0
                }
                Witness::CommonShift { e, a, p, .. } => {
                    (w(*e, p)? - w(e + a, &p.right_shift(*a).ok()?)?).abs() > tol
                }
                Witness::PShift {
                    e,
                    e_prime,
                    a,
                    p,
                    p_prime,
                    ..
                } => {
                    (w(*e, p)? - w(*e_prime, p_prime)?).abs() <= config.match_tol
                        && (w(*e, &p.right_shift(*a).ok()?)?
                            - w(*e_prime, &p_prime.right_shift(*a).ok()?)?)
                        .abs()
                            > tol
                }
            })
        };
        run().unwrap_or(false)
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomEntry {
    pub axiom: Axiom,
    pub verdict: Verdict,
    /// Cases drawn from the sampler.
    pub samples: usize,
    /// Cases that could be evaluated and were not vacuous.
    pub evaluated: usize,
    /// Largest violation statistic seen (meaning depends on the axiom).
    pub worst: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub k: f64,
    pub seed: u64,
    pub config: AuditConfig,
    pub entries: Vec<AxiomEntry>,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.verdict != Verdict::Fail)
    }

    pub fn entry(&self, axiom: Axiom) -> Option<&AxiomEntry> {
        self.entries.iter().find(|e| e.axiom == axiom)
    }

    /// Plain-text pass/fail table, one row per axiom, witnesses inline.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<26} {:<12} {:>8} {:>10} {:>12}\n",
            "axiom", "verdict", "samples", "evaluated", "worst"
        );
        for e in &self.entries {
            let verdict = match e.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
                Verdict::Inapplicable => "n/a",
            };
            out.push_str(&format!(
                "{:<26} {:<12} {:>8} {:>10} {:>12.4e}\n",
                e.axiom.name(),
                verdict,
                e.samples,
                e.evaluated,
                e.worst
            ));
            if let Some(w) = &e.witness {
                out.push_str(&format!(
                    "    witness: {}\n",
                    serde_json::to_string(w).unwrap_or_default()
                ));
            }
            if let Some(n) = &e.note {
                out.push_str(&format!("    note: {n}\n"));
            }
        }
        out
    }
}

/// Runs the requested checks, each with its own seeded random stream.
/// Entries come back in the order of `axioms`.
pub fn audit<C: BlackBoxCsf + ?Sized>(
    csf: &C,
    config: &AuditConfig,
    axioms: &[Axiom],
) -> Result<AxiomReport> {
    let k = csf.budget();
    config.validate(k)?;
    let entries = axioms
        .par_iter()
        .map(|a| run_check(*a, csf, config))
        .collect();
    Ok(AxiomReport {
        k,
        seed: config.seed,
        config: config.clone(),
        entries,
    })
}

pub fn run_check<C: BlackBoxCsf + ?Sized>(
    axiom: Axiom,
    csf: &C,
    config: &AuditConfig,
) -> AxiomEntry {
    let mut ctx = checks::Ctx::new(csf, config, axiom);
    match axiom {
        Axiom::MarketClearing => checks::market_clearing(&mut ctx),
        Axiom::EContinuity => checks::e_continuity(&mut ctx),
        Axiom::PContinuity => checks::p_continuity(&mut ctx),
        Axiom::Monotonicity => checks::monotonicity(&mut ctx),
        Axiom::Competitiveness => checks::competitiveness(&mut ctx),
        Axiom::CoMonotonicity => checks::comonotonicity(&mut ctx),
        Axiom::InvarianceCommonShifts => checks::common_shifts(&mut ctx),
        Axiom::InvariancePShifts => checks::p_shifts(&mut ctx),
    }
}

pub fn check_market_clearing<C: BlackBoxCsf + ?Sized>(csf: &C, config: &AuditConfig) -> AxiomEntry {
    run_check(Axiom::MarketClearing, csf, config)
}
pub fn check_monotonicity<C: BlackBoxCsf + ?Sized>(csf: &C, config: &AuditConfig) -> AxiomEntry {
    run_check(Axiom::Monotonicity, csf, config)
}
pub fn check_competitiveness<C: BlackBoxCsf + ?Sized>(csf: &C, config: &AuditConfig) -> AxiomEntry {
    run_check(Axiom::Competitiveness, csf, config)
}
pub fn check_comonotonicity<C: BlackBoxCsf + ?Sized>(csf: &C, config: &AuditConfig) -> AxiomEntry {
    run_check(Axiom::CoMonotonicity, csf, config)
}
pub fn check_e_continuity<C: BlackBoxCsf + ?Sized>(csf: &C, config: &AuditConfig) -> AxiomEntry {
    run_check(Axiom::EContinuity, csf, config)
}
pub fn check_p_continuity<C: BlackBoxCsf + ?Sized>(csf: &C, config: &AuditConfig) -> AxiomEntry {
    run_check(Axiom::PContinuity, csf, config)
}
pub fn check_invariance_common_shifts<C: BlackBoxCsf + ?Sized>(
    csf: &C,
    config: &AuditConfig,
) -> AxiomEntry {
    run_check(Axiom::InvarianceCommonShifts, csf, config)
}
pub fn check_invariance_p_shifts<C: BlackBoxCsf + ?Sized>(
    csf: &C,
    config: &AuditConfig,
) -> AxiomEntry {
    run_check(Axiom::InvariancePShifts, csf, config)
}

/// Draws competitions: mixtures of 1 to `max_atoms` atoms with log-uniform
/// efforts and total mass uniform in `(k, 1]`, or members of a fixed pool.
pub(crate) struct MeasureSampler<'a> {
    config: &'a AuditConfig,
    k: f64,
}

impl<'a> MeasureSampler<'a> {
    pub(crate) fn new(config: &'a AuditConfig, k: f64) -> Self {
        MeasureSampler { config, k }
    }

    pub(crate) fn effort(&self, rng: &mut ChaCha8Rng) -> f64 {
        let (lo, hi) = self.config.effort_range;
        (lo.ln() + rng.gen::<f64>() * (hi / lo).ln()).exp()
    }

    pub(crate) fn measure(&self, rng: &mut ChaCha8Rng) -> EffortMeasure {
        if let Some(pool) = &self.config.measure_pool {
            return pool[rng.gen_range(0..pool.len())].clone();
        }
        let n = rng.gen_range(1..=self.config.max_atoms);
        let total = self.k + (1.0 - self.k) * (1.0 - rng.gen::<f64>());
        let raw: Vec<f64> = (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect();
        let sum: f64 = raw.iter().sum();
        let atoms = raw
            .iter()
            .map(|w| Atom {
                effort: self.effort(rng),
                mass: total * w / sum,
            })
            .collect();
        EffortMeasure::new(atoms, Vec::new()).expect("sampled atoms are valid")
    }
}

pub(crate) fn rng_for(config: &AuditConfig, axiom: Axiom) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(axiom.stream());
    rng
}
