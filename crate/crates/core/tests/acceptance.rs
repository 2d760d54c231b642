//! Acceptance checks. Prints one line per criterion and exits non-zero if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpf_core::axioms::fixtures::PDependentExponent;
use rpf_core::axioms::{audit, AuditConfig, Axiom, RpfCsf, Verdict};
use rpf_core::design::{
    default_k_grid, dissipation_from_equilibrium, dissipation_threshold, figure1_curve,
    figure1_value, linear_grid, proposition5_check, refine_argmax, rent_dissipation_ratio,
    DesignSpec, MonotoneVerdict,
};
use rpf_core::equilibrium::{
    best_response, foc_equilibrium, soc_check_default, ContestSpec, CostFunction, Utility,
};
use rpf_core::monte_carlo::{simulate, SimConfig};
use rpf_core::{
    csf_eval, recover_translation, solve_cutoff, EffortMeasure, EffortWarp, NoiseDistribution,
    PerformanceFamily,
};

type Outcome = Result<String, String>;
type Oracle = (NoiseDistribution, fn(f64) -> f64);
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    let secs = elapsed.as_secs_f64();
    if secs < limit {
        Ok(())
    } else {
        Err(format!("took {secs:.2}s, limit {limit}s"))
    }
}

fn noises() -> Vec<NoiseDistribution> {
    vec![
        NoiseDistribution::normal(),
        NoiseDistribution::logistic(1.0).unwrap(),
        NoiseDistribution::student_t(3.0).unwrap(),
        NoiseDistribution::student_t(1.0).unwrap(),
    ]
}

fn random_family(rng: &mut ChaCha8Rng) -> PerformanceFamily {
    let noise = noises().swap_remove(rng.gen_range(0..4));
    match rng.gen_range(0..4) {
        0 | 1 => PerformanceFamily::additive(noise),
        2 => PerformanceFamily::warped(noise, EffortWarp::Log).unwrap(),
        _ => PerformanceFamily::warped(
            noise,
            EffortWarp::Power {
                exponent: rng.gen_range(0.5..2.0),
            },
        )
        .unwrap(),
    }
}

fn random_measure(rng: &mut ChaCha8Rng) -> EffortMeasure {
    if rng.gen_bool(0.2) {
        let lo = rng.gen_range(0.05..2.0);
        return EffortMeasure::uniform(lo, lo + rng.gen_range(0.1..3.0), 1.0, 64).unwrap();
    }
    let n = rng.gen_range(1..=4);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    EffortMeasure::from_atoms(raw.iter().map(|w| (rng.gen_range(0.05..5.0), w / total))).unwrap()
}

fn market_clearing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let fam = random_family(&mut rng);
        let p = random_measure(&mut rng);
        let k = rng.gen_range(0.01..0.99);
        let s = ok(solve_cutoff(&fam, &p, k))?.s;
        let total = p.integrate(|e| fam.exceed(e, s));
        worst = worst.max((total - k).abs());
    }
    within(start.elapsed(), 10.0)?;
    ensure!(worst <= 1e-8, "worst |mass - k| = {worst:e}");
    Ok(format!(
        "worst |mass - k| = {worst:.2e} over 1000 cases in {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn dirac_anchor() -> Outcome {
    let oracles: [Oracle; 4] = [
        (NoiseDistribution::normal(), common::norm_cdf),
        (
            NoiseDistribution::logistic(1.0).unwrap(),
            common::logistic_cdf,
        ),
        (NoiseDistribution::student_t(3.0).unwrap(), common::t3_cdf),
        (
            NoiseDistribution::student_t(1.0).unwrap(),
            common::cauchy_cdf,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let (mut w_err, mut s_err) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let (noise, cdf) = &oracles[i % 4];
        let fam = PerformanceFamily::additive(noise.clone());
        let e = rng.gen_range(0.0..10.0);
        let k = rng.gen_range(0.05..0.95);
        let p = ok(EffortMeasure::dirac(e))?;
        w_err = w_err.max((ok(csf_eval(&fam, &p, k, e))? - k).abs());
        let s = ok(solve_cutoff(&fam, &p, k))?.s;
        s_err = s_err.max((s - e - common::quantile(cdf, 1.0 - k)).abs());
    }
    within(start.elapsed(), 1.0)?;
    ensure!(w_err <= 1e-10, "|W - k| = {w_err:e}");
    ensure!(s_err <= 1e-9, "cutoff error {s_err:e}");
    Ok(format!(
        "|W - k| <= {w_err:.1e}, cutoff error <= {s_err:.1e}"
    ))
}

fn rpf_families() -> Vec<PerformanceFamily> {
    let mut out: Vec<PerformanceFamily> = noises()
        .into_iter()
        .map(PerformanceFamily::additive)
        .collect();
    out.push(PerformanceFamily::warped(NoiseDistribution::normal(), EffortWarp::Log).unwrap());
    out.push(
        PerformanceFamily::warped(
            NoiseDistribution::logistic(1.0).unwrap(),
            EffortWarp::Power { exponent: 0.5 },
        )
        .unwrap(),
    );
    out
}

fn axiom_suite() -> Outcome {
    let start = Instant::now();
    let cfg = AuditConfig {
        samples: 1000,
        tol: 1e-6,
        ..AuditConfig::default()
    };
    let mut audited = 0;
    for fam in rpf_families() {
        for k in [0.3, 0.8] {
            let label = fam.description().to_string();
            let csf = ok(RpfCsf::new(fam.clone(), k))?;
            let rep = ok(audit(&csf, &cfg, &Axiom::RPF))?;
            for e in &rep.entries {
                ensure!(
                    e.verdict == Verdict::Pass,
                    "{label} k={k}: {} {:?}",
                    e.axiom.name(),
                    e.verdict
                );
            }
            audited += 1;
        }
    }
    let fixture_cfg = AuditConfig {
        effort_range: (1.0, 2.0),
        ..cfg.clone()
    };
    let fixture = PDependentExponent { k: 0.3 };
    let first = ok(audit(&fixture, &fixture_cfg, &[Axiom::CoMonotonicity]))?;
    let again = ok(audit(&fixture, &fixture_cfg, &[Axiom::CoMonotonicity]))?;
    let entry = &first.entries[0];
    ensure!(
        entry.verdict == Verdict::Fail,
        "fixture co-monotonicity: {:?}",
        entry.verdict
    );
    let witness = entry
        .witness
        .as_ref()
        .ok_or("fixture failed without a witness")?;
    ensure!(
        witness.recheck(&fixture, &fixture_cfg),
        "fixture witness does not recheck"
    );
    ensure!(
        again.entries[0].witness.as_ref() == Some(witness),
        "fixture witness not reproducible"
    );
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "{audited} RPF audits pass; fixture fails co-monotonicity reproducibly; {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn shift_separation() -> Outcome {
    let start = Instant::now();
    let cfg = AuditConfig {
        samples: 1000,
        tol: 1e-6,
        ..AuditConfig::default()
    };
    let additive = ok(RpfCsf::new(
        PerformanceFamily::additive(NoiseDistribution::normal()),
        0.3,
    ))?;
    let rep = ok(audit(&additive, &cfg, &Axiom::SHIFTS))?;
    for e in &rep.entries {
        ensure!(
            e.verdict == Verdict::Pass,
            "additive normal {}: {:?}",
            e.axiom.name(),
            e.verdict
        );
    }
    let warped = ok(RpfCsf::new(
        ok(PerformanceFamily::warped(
            NoiseDistribution::normal(),
            EffortWarp::Log,
        ))?,
        0.3,
    ))?;
    let rep = ok(audit(&warped, &cfg, &Axiom::ALL))?;
    for a in Axiom::RPF {
        let e = rep.entry(a).unwrap();
        ensure!(
            e.verdict == Verdict::Pass,
            "log-warped {}: {:?}",
            a.name(),
            e.verdict
        );
    }
    let failed: Vec<&str> = Axiom::SHIFTS
        .iter()
        .filter(|a| rep.entry(**a).unwrap().verdict == Verdict::Fail)
        .map(|a| a.name())
        .collect();
    ensure!(
        !failed.is_empty(),
        "log-warped family passes both shift checks"
    );
    for a in Axiom::SHIFTS {
        let e = rep.entry(a).unwrap();
        if let Some(w) = &e.witness {
            ensure!(
                w.recheck(&warped, &cfg),
                "{} witness does not recheck",
                a.name()
            );
        }
    }
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "log-warped fails {}; {:.1}s",
        failed.join(", "),
        start.elapsed().as_secs_f64()
    ))
}

fn shift_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let fam = PerformanceFamily::additive(noises().swap_remove(i % 4));
        let p = random_measure(&mut rng);
        let a = rng.gen_range(0.0..5.0);
        let k = rng.gen_range(0.05..0.95);
        let s0 = ok(solve_cutoff(&fam, &p, k))?.s;
        let s1 = ok(solve_cutoff(&fam, &ok(p.right_shift(a))?, k))?.s;
        worst = worst.max((s1 - s0 - a).abs());
    }
    ensure!(worst <= 1e-9, "worst |s(p+a) - s(p) - a| = {worst:e}");
    Ok(format!("worst |s(p+a) - s(p) - a| = {worst:.1e}"))
}

fn uniqueness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut t_err, mut w_err) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let f1 = noises().swap_remove(i % 4);
        let t0 = rng.gen_range(-3.0..3.0);
        let f2 = f1.shift(t0);
        let k = rng.gen_range(0.1..0.9);
        t_err = t_err.max((ok(recover_translation(&f1, &f2, k))? - t0).abs());
        let (a1, a2) = (
            PerformanceFamily::additive(f1),
            PerformanceFamily::additive(f2),
        );
        for _ in 0..5 {
            let p = random_measure(&mut rng);
            let e = rng.gen_range(0.05..5.0);
            w_err = w_err.max((ok(csf_eval(&a1, &p, k, e))? - ok(csf_eval(&a2, &p, k, e))?).abs());
        }
    }
    ensure!(t_err <= 1e-9, "translation error {t_err:e}");
    ensure!(w_err <= 1e-9, "csf disagreement {w_err:e}");
    Ok(format!(
        "translation error {t_err:.1e}, csf disagreement {w_err:.1e}"
    ))
}

fn equilibrium() -> Outcome {
    let start = Instant::now();
    let anchor = ContestSpec::new(
        0.5,
        1.0,
        ok(CostFunction::quadratic(1.0))?,
        Utility::Linear,
        NoiseDistribution::normal(),
    );
    let anchor_e = ok(foc_equilibrium(&ok(anchor)?))?.e_star;
    let target = 1.0 / (2.0 * (2.0 * PI).sqrt());
    ensure!(
        (anchor_e - target).abs() <= 1e-9,
        "anchor e* = {anchor_e}, expected {target}"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut accepted, mut drawn, mut worst) = (0, 0, 0.0f64);
    while accepted < 100 {
        drawn += 1;
        ensure!(
            drawn < 2000,
            "only {accepted} SOC-passing specs in {drawn} draws"
        );
        let noise = noises().swap_remove(rng.gen_range(0..3));
        let cost = ok(CostFunction::power(
            rng.gen_range(0.5..4.0),
            rng.gen_range(1.5..3.5),
        ))?;
        let utility = if rng.gen_bool(0.5) {
            Utility::Linear
        } else {
            ok(Utility::power(rng.gen_range(0.3..1.0)))?
        };
        let spec = ok(ContestSpec::new(
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.1..5.0),
            cost,
            utility,
            noise,
        ))?;
        if !ok(soc_check_default(&spec))?.pass {
            continue;
        }
        accepted += 1;
        let e_star = ok(foc_equilibrium(&spec))?.e_star;
        let br = ok(best_response(&spec, &ok(EffortMeasure::dirac(e_star))?))?.effort;
        worst = worst.max((br - e_star).abs());
    }
    within(start.elapsed(), 30.0)?;
    ensure!(worst <= 1e-4, "worst |BR - e*| = {worst:e}");
    Ok(format!(
        "anchor error {:.1e}; worst |BR - e*| = {worst:.1e} over {accepted} specs; {:.1}s",
        (anchor_e - target).abs(),
        start.elapsed().as_secs_f64()
    ))
}

fn monotone_effort() -> Outcome {
    let grid = linear_grid(0.5, 0.99, 64);
    let mut notes = Vec::new();
    for noise in [
        NoiseDistribution::normal(),
        NoiseDistribution::logistic(1.0).unwrap(),
    ] {
        let label = noise.label();
        let spec = ok(ok(DesignSpec::new(1.0, noise))?.with_grid(grid.clone()))?;
        let rep = ok(proposition5_check(&spec))?;
        ensure!(
            rep.verdict == MonotoneVerdict::Pass,
            "{label}: {:?} at {:?}",
            rep.verdict,
            rep.at_k
        );
        notes.push(format!("{label} worst increase {:.1e}", rep.worst_increase));
    }
    Ok(notes.join("; "))
}

fn figure1() -> Outcome {
    let grid = default_k_grid();
    let normal = NoiseDistribution::normal();
    let curve = ok(figure1_curve(&normal, &grid))?;
    ensure!(
        curve.windows(2).all(|w| w[1].1 < w[0].1),
        "normal curve not strictly decreasing"
    );
    let mut argmax = Vec::new();
    for nu in [3.0, 1.0] {
        let noise = ok(NoiseDistribution::student_t(nu))?;
        let curve = ok(figure1_curve(&noise, &grid))?;
        let best = ok(refine_argmax(&curve, |k| figure1_value(&noise, k)))?;
        ensure!(!best.boundary, "t{nu} argmax at boundary {}", best.k_star);
        argmax.push(best.k_star);
    }
    ensure!(
        argmax[1] > argmax[0],
        "argmax t1 {} <= argmax t3 {}",
        argmax[1],
        argmax[0]
    );
    let cauchy = ok(figure1_value(&ok(NoiseDistribution::student_t(1.0))?, 0.25))?;
    ensure!(
        (cauchy - 2.0 / PI).abs() <= 1e-12,
        "Cauchy value at 0.25 = {cauchy}"
    );
    Ok(format!(
        "argmax t3 = {:.4}, t1 = {:.4}; Cauchy anchor error {:.1e}",
        argmax[0],
        argmax[1],
        (cauchy - 2.0 / PI).abs()
    ))
}

fn dissipation() -> Outcome {
    let mut worst = 0.0f64;
    for noise in noises() {
        for (a, k) in [(1.0, 0.5), (0.5, 0.2), (2.0, 0.8)] {
            for v in [0.3, 1.0, 7.0] {
                let formula = ok(rent_dissipation_ratio(v, a, k, &noise))?;
                let path = ok(dissipation_from_equilibrium(v, a, k, &noise))?;
                worst = worst.max((formula - path).abs());
                let doubled = ok(rent_dissipation_ratio(2.0 * v, a, k, &noise))?;
                ensure!(
                    (doubled - 2.0 * formula).abs() <= 1e-12 * formula,
                    "ratio not linear in V"
                );
            }
            let v_star = ok(dissipation_threshold(a, k, &noise))?;
            let at = ok(rent_dissipation_ratio(v_star, a, k, &noise))?;
            ensure!((at - 1.0).abs() <= 1e-12, "ratio(V*) = {at}");
            ensure!(
                ok(rent_dissipation_ratio(1.01 * v_star, a, k, &noise))? > 1.0,
                "no crossing at V*"
            );
        }
    }
    ensure!(worst <= 1e-10, "formula vs equilibrium path {worst:e}");
    Ok(format!("formula vs equilibrium path {worst:.1e}"))
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig {
        n: 100_000,
        seed: 11,
        fam: PerformanceFamily::additive(NoiseDistribution::normal()),
        p: ok(EffortMeasure::from_atoms([(1.0, 0.5), (2.0, 0.5)]))?,
        k: 0.3,
        replications: 20,
    };
    let res = ok(simulate(&cfg))?;
    let expected = cfg.winners();
    ensure!(expected == 30_000, "floor(kn) = {expected}");
    for (i, r) in res.replications.iter().enumerate() {
        ensure!(
            r.winners == expected,
            "replication {i}: {} winners",
            r.winners
        );
    }
    within(start.elapsed(), 60.0)?;
    ensure!(
        res.mean_abs_err <= 0.01,
        "mean abs error {}",
        res.mean_abs_err
    );
    Ok(format!(
        "mean |empirical - model| = {:.1e}; {expected} winners per replication; {:.1}s",
        res.mean_abs_err,
        start.elapsed().as_secs_f64()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("market clearing", market_clearing),
        ("dirac anchor", dirac_anchor),
        ("rpf axiom suite", axiom_suite),
        ("shift separation", shift_separation),
        ("additive shift identity", shift_identity),
        ("translation uniqueness", uniqueness),
        ("equilibrium", equilibrium),
        ("monotone effort for k >= 1/2", monotone_effort),
        ("hazard ratio curves", figure1),
        ("rent dissipation", dissipation),
        ("monte carlo agreement", monte_carlo),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} {name}: PASS ({detail}) [{secs:.2}s]",
                i + 1
            ),
            Err(detail) => {
                failures += 1;
                println!(
                    "criterion {:>2} {name}: FAIL ({detail}) [{secs:.2}s]",
                    i + 1
                );
            }
        }
    }
    if failures > 0 {
        println!("{failures} of 11 criteria failed");
        std::process::exit(1);
    }
    println!("all 11 criteria passed");
}
