use rand_chacha::ChaCha8Rng;

use super::{
    rng_for, AuditConfig, Axiom, AxiomEntry, BlackBoxCsf, MeasureSampler, Verdict, Witness,
};
use crate::measures::EffortMeasure;

pub(super) struct Ctx<'a, C: ?Sized> {
    csf: &'a C,
    config: &'a AuditConfig,
    axiom: Axiom,
    rng: ChaCha8Rng,
    sampler: MeasureSampler<'a>,
    evaluated: usize,
    worst: f64,
}

impl<'a, C: BlackBoxCsf + ?Sized> Ctx<'a, C> {
    pub(super) fn new(csf: &'a C, config: &'a AuditConfig, axiom: Axiom) -> Self {
        Ctx {
            csf,
            config,
            axiom,
            rng: rng_for(config, axiom),
            sampler: MeasureSampler::new(config, csf.budget()),
            evaluated: 0,
            worst: 0.0,
        }
    }

    fn effort(&mut self) -> f64 {
        self.sampler.effort(&mut self.rng)
    }

    fn measure(&mut self) -> EffortMeasure {
        self.sampler.measure(&mut self.rng)
    }

    fn w(&self, e: f64, p: &EffortMeasure) -> Option<f64> {
        self.csf.eval(e, p)
    }

    fn observe(&mut self, stat: f64) {
        self.evaluated += 1;
        if stat > self.worst {
            self.worst = stat;
        }
    }

    fn fail(self, witness: Witness, samples: usize) -> AxiomEntry {
        AxiomEntry {
            axiom: self.axiom,
            verdict: Verdict::Fail,
            samples,
            evaluated: self.evaluated,
            worst: self.worst,
            witness: Some(witness),
            note: None,
        }
    }

    fn finish(self, note: Option<String>) -> AxiomEntry {
        let verdict = if self.evaluated == 0 {
            Verdict::Inapplicable
        } else {
            Verdict::Pass
        };
        let note = match (verdict, note) {
            (Verdict::Inapplicable, None) => Some("no sampled case could be evaluated".to_string()),
            (_, n) => n,
        };
        AxiomEntry {
            axiom: self.axiom,
            verdict,
            samples: self.config.samples,
            evaluated: self.evaluated,
            worst: self.worst,
            witness: None,
            note,
        }
    }
}

fn interior(w: f64, tol: f64) -> bool {
    w >= tol && w <= 1.0 - tol
}

/// `e < e'` with `W(e) = w` and `W(e') = w_prime`: a violation is a drop
/// beyond tolerance, or no strict increase while both values are interior.
pub(super) fn order_violated(w: f64, w_prime: f64, tol: f64) -> bool {
    w - w_prime > tol || (w >= w_prime && interior(w, tol) && interior(w_prime, tol))
}

/// Trace of a bracket repeatedly halved toward its larger variation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusTrace {
    pub brackets: Vec<(f64, f64)>,
    pub diffs: Vec<f64>,
}

impl ModulusTrace {
    /// Largest ratio between consecutive bracket variations, over steps whose
    /// previous variation exceeds `floor`.
    pub fn max_halving_ratio(&self, floor: f64) -> f64 {
        self.diffs
            .windows(2)
            .filter(|w| w[0] > floor)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }

    pub fn shrink(&self) -> f64 {
        let first = self.diffs[0];
        let last = *self.diffs.last().expect("non-empty");
        if first > 0.0 {
            last / first
        } else {
            0.0
        }
    }
}

/// Halves `[lo, hi]` `halvings` times, each time keeping the half over
/// which `f` varies more. A continuous `f` sees the variation shrink with
/// the bracket; a jump keeps it bounded below.
pub fn bracket_modulus<F: FnMut(f64) -> Option<f64>>(
    mut f: F,
    lo: f64,
    hi: f64,
    halvings: usize,
) -> Option<ModulusTrace> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    let mut brackets = vec![(a, b)];
    let mut diffs = vec![(fb - fa).abs()];
    for _ in 0..halvings {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if (fm - fa).abs() >= (fb - fm).abs() {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
        brackets.push((a, b));
        diffs.push((fb - fa).abs());
    }
    Some(ModulusTrace { brackets, diffs })
}

/// A screening trace that did not shrink enough is halved further before
/// it is reported; steep but continuous stretches shrink under the longer
/// run while jumps do not.
fn confirm<F: FnMut(f64) -> Option<f64>>(
    f: F,
    trace: ModulusTrace,
    tol: f64,
    ratio: f64,
    extra: usize,
) -> Option<ModulusTrace> {
    let last = *trace.diffs.last().unwrap();
    if !(last > tol && last > ratio * trace.diffs[0]) || extra == 0 {
        return Some(trace);
    }
    let (lo, hi) = trace.brackets[0];
    bracket_modulus(f, lo, hi, trace.diffs.len() - 1 + extra)
}

pub(super) fn market_clearing<C: BlackBoxCsf + ?Sized>(ctx: &mut Ctx<'_, C>) -> AxiomEntry {
    let (k, tol) = (ctx.csf.budget(), ctx.config.tol);
    for i in 0..ctx.config.samples {
        let p = ctx.measure();
        let nodes: Vec<(f64, f64)> = p.nodes().collect();
        let efforts: Vec<f64> = nodes.iter().map(|n| n.0).collect();
        let vals: Option<Vec<f64>> = ctx.csf.eval_many(&efforts, &p).into_iter().collect();
        let Some(vals) = vals else { continue };
        let integral: f64 = nodes.iter().zip(&vals).map(|((_, m), v)| m * v).sum();
        let dev = (integral - k).abs();
        ctx.observe(dev);
        if dev > tol {
            let w = Witness::Clearing { p, integral, k };
            return take(ctx).fail(w, i + 1);
        }
    }
    take(ctx).finish(None)
}

// Checks consume the context when they finish; this swaps in a fresh one.
fn take<'a, C: BlackBoxCsf + ?Sized>(ctx: &mut Ctx<'a, C>) -> Ctx<'a, C> {
    let fresh = Ctx::new(ctx.csf, ctx.config, ctx.axiom);
    std::mem::replace(ctx, fresh)
}

pub(super) fn e_continuity<C: BlackBoxCsf + ?Sized>(ctx: &mut Ctx<'_, C>) -> AxiomEntry {
    let (tol, ratio, halvings) = (
        ctx.config.tol,
        ctx.config.continuity_ratio,
        ctx.config.halvings,
    );
    let confirm_halvings = ctx.config.confirm_halvings;
    for i in 0..ctx.config.samples {
        let p = ctx.measure();
        let e = ctx.effort();
        let csf = ctx.csf;
        let f = |x: f64| csf.eval(x, &p);
        let Some(trace) = bracket_modulus(f, e, 1.25 * e, halvings) else {
            continue;
        };
        ctx.observe(trace.max_halving_ratio(tol));
        let Some(trace) = confirm(f, trace, tol, ratio, confirm_halvings) else {
            continue;
        };
        let last = *trace.diffs.last().unwrap();
        if last > tol && last > ratio * trace.diffs[0] {
            let w = Witness::Modulus {
                variable: "e".into(),
                e,
                p,
                p_prime: None,
                first: trace.brackets[0],
                last: *trace.brackets.last().unwrap(),
                first_diff: trace.diffs[0],
                last_diff: last,
            };
            return take(ctx).fail(w, i + 1);
        }
    }
    take(ctx).finish(Some(format!(
        "no discontinuity detected at resolution {} of the initial bracket",
        0.5f64.powi(halvings as i32)
    )))
}

pub(super) fn p_continuity<C: BlackBoxCsf + ?Sized>(ctx: &mut Ctx<'_, C>) -> AxiomEntry {
    use rand::Rng;
    let (tol, ratio, halvings) = (
        ctx.config.tol,
        ctx.config.continuity_ratio,
        ctx.config.halvings,
    );
    let confirm_halvings = ctx.config.confirm_halvings;
    for i in 0..ctx.config.samples {
        let e = ctx.effort();
        let p = ctx.measure();
        let q = ctx.measure();
        let alpha0 = 0.75 * ctx.rng.gen::<f64>();
        let csf = ctx.csf;
        let f = |a: f64| {
            EffortMeasure::mix(a, &p, &q)
                .ok()
                .and_then(|m| csf.eval(e, &m))
        };
        let Some(trace) = bracket_modulus(f, alpha0, alpha0 + 0.25, halvings) else {
            continue;
        };
        ctx.observe(trace.max_halving_ratio(tol));
        let Some(trace) = confirm(f, trace, tol, ratio, confirm_halvings) else {
            continue;
        };
        let last = *trace.diffs.last().unwrap();
        if last > tol && last > ratio * trace.diffs[0] {
            let w = Witness::Modulus {
                variable: "alpha".into(),
                e,
                p,
                p_prime: Some(q),
                first: trace.brackets[0],
                last: *trace.brackets.last().unwrap(),
                first_diff: trace.diffs[0],
                last_diff: last,
            };
            return take(ctx).fail(w, i + 1);
        }
    }
    take(ctx).finish(Some(format!(
        "no discontinuity detected at mixing resolution {}",
        0.25 * 0.5f64.powi(halvings as i32)
    )))
}

pub(super) fn monotonicity<C: BlackBoxCsf + ?Sized>(ctx: &mut Ctx<'_, C>) -> AxiomEntry {
    let tol = ctx.config.tol;
    let rungs = ctx.config.rungs();
    let slack = ctx.config.slack.clone();
    let mut limit_skipped = 0;
    for i in 0..ctx.config.samples {
        let p = ctx.measure();
        let (a, b) = (ctx.effort(), ctx.effort());
        let e = a.min(b);
        let e_prime = a.max(b).max(e * (1.0 + 1e-3));
        let top = p.support().1.max(1.0);
        let mut efforts = vec![e, e_prime];
        efforts.extend(rungs.iter().map(|r| top * r));
        let vals = ctx.csf.eval_many(&efforts, &p);
        let (Some(w), Some(w_prime)) = (vals[0], vals[1]) else {
            continue;
        };
        ctx.observe(w - w_prime);
        if order_violated(w, w_prime, tol) {
            let wit = Witness::Order {
                p,
                e,
                e_prime,
                w_e: w,
                w_e_prime: w_prime,
            };
            return take(ctx).fail(wit, i + 1);
        }
        // escalate effort until 1 - W has crossed every slack level
        let mut level = 0;
        let mut last = None;
        for (x, v) in efforts[2..].iter().zip(&vals[2..]) {
            let Some(v) = v else { break };
            last = Some((*x, *v));
            while level < slack.len() && 1.0 - v <= slack[level] {
                level += 1;
            }
            if level == slack.len() {
                break;
            }
        }
        match last {
            None => limit_skipped += 1,
            Some((x, v)) if level < slack.len() => {
                let wit = Witness::UpperLimit {
                    p,
                    e: x,
                    w: v,
                    slack: slack[level],
                };
                return take(ctx).fail(wit, i + 1);
            }
            Some(_) => {}
        }
    }
    let note = (limit_skipped > 0)
        .then(|| format!("limit W -> 1 not evaluable for {limit_skipped} samples"));
    take(ctx).finish(note)
}

pub(super) fn competitiveness<C: BlackBoxCsf + ?Sized>(ctx: &mut Ctx<'_, C>) -> AxiomEntry {
    let rungs = ctx.config.rungs();
    let slack = ctx.config.slack.clone();
    for i in 0..ctx.config.samples {
        let e = ctx.effort();
        let scale = e.max(1.0);
        let mut level = 0;
        let mut last = None;
        for r in &rungs {
            let e_bar = scale * r;
            let Ok(d) = EffortMeasure::dirac(e_bar) else {
                break;
            };
            let Some(v) = ctx.w(e, &d) else { break };
            last = Some((e_bar, v));
            while level < slack.len() && v <= slack[level] {
                level += 1;
            }
            if level == slack.len() {
                break;
            }
        }
        let Some((e_bar, v)) = last else { continue };
        ctx.observe(v);
        if level < slack.len() {
            let wit = Witness::LowerLimit {
                e,
                e_bar,
                w: v,
                slack: slack[level],
            };
            return take(ctx).fail(wit, i + 1);
        }
    }
    take(ctx).finish(None)
}

pub(super) fn comonotonicity<C: BlackBoxCsf + ?Sized>(ctx: &mut Ctx<'_, C>) -> AxiomEntry {
    let tol = ctx.config.tol;
    let (lo, hi) = ctx.config.effort_range;
    let n = ctx.config.sweep_points;
    let sweep: Vec<f64> = (0..n)
        .map(|j| (lo.ln() + (hi / lo).ln() * j as f64 / (n - 1) as f64).exp())
        .collect();
    let mut vacuous = 0;
    for i in 0..ctx.config.samples {
        let e = ctx.effort();
        let p = ctx.measure();
        let q = ctx.measure();
        let mut efforts = vec![e];
        efforts.extend(&sweep);
        let vp: Option<Vec<f64>> = ctx.csf.eval_many(&efforts, &p).into_iter().collect();
        let vq: Option<Vec<f64>> = ctx.csf.eval_many(&efforts, &q).into_iter().collect();
        let (Some(vp), Some(vq)) = (vp, vq) else {
            continue;
        };
        if (vp[0] - vq[0]).abs() <= tol {
            vacuous += 1;
            ctx.evaluated += 1;
            continue;
        }
        // orient so that p is the weaker competition at e
        let (p, q, vp, vq) = if vp[0] > vq[0] {
            (p, q, vp, vq)
        } else {
            (q, p, vq, vp)
        };
        let worst = vp
            .iter()
            .zip(&vq)
            .map(|(a, b)| b - a)
            .fold(f64::NEG_INFINITY, f64::max);
        ctx.observe(worst);
        if let Some(j) = (1..efforts.len()).find(|&j| vp[j] < vq[j] - tol) {
            let wit = Witness::Crossing {
                e,
                e_prime: efforts[j],
                p,
                p_prime: q,
                w_e_p: vp[0],
                w_e_p_prime: vq[0],
                w_e_prime_p: vp[j],
                w_e_prime_p_prime: vq[j],
            };
            return take(ctx).fail(wit, i + 1);
        }
    }
    let note = (vacuous > 0).then(|| format!("{vacuous} sampled pairs were tied at e and skipped"));
    take(ctx).finish(note)
}

pub(super) fn common_shifts<C: BlackBoxCsf + ?Sized>(ctx: &mut Ctx<'_, C>) -> AxiomEntry {
    let tol = ctx.config.tol;
    for i in 0..ctx.config.samples {
        let e = ctx.effort();
        let a = ctx.effort();
        let p = ctx.measure();
        let Ok(shifted) = p.right_shift(a) else {
            continue;
        };
        let (Some(w), Some(ws)) = (ctx.w(e, &p), ctx.w(e + a, &shifted)) else {
            continue;
        };
        let dev = (w - ws).abs();
        ctx.observe(dev);
        if dev > tol {
            let wit = Witness::CommonShift {
                e,
                a,
                p,
                w,
                w_shifted: ws,
            };
            return take(ctx).fail(wit, i + 1);
        }
    }
    take(ctx).finish(None)
}

/// Effort `x` with `W(x, p) = target`, by bisection in log effort.
/// `None` when the target lies outside the range of `W(·, p)`.
fn match_effort<C: BlackBoxCsf + ?Sized>(
    csf: &C,
    p: &EffortMeasure,
    target: f64,
    start: f64,
) -> Option<(f64, f64)> {
    let g = |x: f64| csf.eval(x, p).map(|v| v - target);
    let (mut lo, mut hi) = (start, start);
    let mut g_lo = g(lo)?;
    let mut g_hi = g_lo;
    let mut n = 0;
    while g_lo > 0.0 {
        hi = lo;
        g_hi = g_lo;
        lo *= 0.5;
        g_lo = g(lo)?;
        n += 1;
        if n > 80 {
            return None;
        }
    }
    n = 0;
    while g_hi < 0.0 {
        lo = hi;
        g_lo = g_hi;
        hi *= 2.0;
        g_hi = g(hi)?;
        n += 1;
        if n > 80 {
            return None;
        }
    }
    for _ in 0..200 {
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
        let mid = (lo * hi).sqrt();
        let gm = g(mid)?;
        if gm < 0.0 {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
            g_hi = gm;
        }
    }
    Some(if g_lo.abs() < g_hi.abs() {
        (lo, g_lo)
    } else {
        (hi, g_hi)
    })
}

pub(super) fn p_shifts<C: BlackBoxCsf + ?Sized>(ctx: &mut Ctx<'_, C>) -> AxiomEntry {
    let tol = ctx.config.tol;
    let mut unmatched = 0;
    let mut saturated = 0;
    for i in 0..ctx.config.samples {
        let e = ctx.effort();
        let p = ctx.measure();
        let q = ctx.measure();
        let a = ctx.effort();
        let start = ctx.effort();
        let Some(w) = ctx.w(e, &p) else { continue };
        // near 0 or 1 an equal value barely constrains the partner effort
        if !(w >= ctx.config.match_band && w <= 1.0 - ctx.config.match_band) {
            saturated += 1;
            continue;
        }
        let Some((e_prime, gap)) = match_effort(ctx.csf, &q, w, start) else {
            unmatched += 1;
            continue;
        };
        if gap.abs() > ctx.config.match_tol {
            unmatched += 1;
            continue;
        }
        let (Ok(ps), Ok(qs)) = (p.right_shift(a), q.right_shift(a)) else {
            continue;
        };
        let (Some(ws), Some(wqs)) = (ctx.w(e, &ps), ctx.w(e_prime, &qs)) else {
            continue;
        };
        let dev = (ws - wqs).abs();
        ctx.observe(dev);
        if dev > tol {
            let wit = Witness::PShift {
                e,
                e_prime,
                a,
                p,
                p_prime: q,
                w_matched: w,
                w_matched_prime: w + gap,
                w_shifted: ws,
                w_shifted_prime: wqs,
            };
            return take(ctx).fail(wit, i + 1);
        }
    }
    let note = (unmatched + saturated > 0).then(|| {
        format!("skipped {unmatched} samples without an equal-value partner and {saturated} with saturated W")
    });
    take(ctx).finish(note)
}
