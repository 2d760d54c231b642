//! Success functions that are not random performance functions, for
//! exercising the checks.

use super::{BlackBoxCsf, RpfCsf};
use crate::measures::EffortMeasure;

/// Every participant wins with probability `k / p(E)` regardless of effort.
/// Clears the market but is not monotone.
#[derive(Debug, Clone, Copy)]
pub struct ConstantShare {
    pub k: f64,
}

impl BlackBoxCsf for ConstantShare {
    fn budget(&self) -> f64 {
        self.k
    }

    fn eval(&self, _e: f64, p: &EffortMeasure) -> Option<f64> {
        Some((self.k / p.total_mass()).min(1.0))
    }
}

/// `min(1, k e / ∫ x dp)`: proportional prizes capped at certainty.
/// Clears the market only while the cap does not bind.
#[derive(Debug, Clone, Copy)]
pub struct CappedLinear {
    pub k: f64,
}

impl BlackBoxCsf for CappedLinear {
    fn budget(&self) -> f64 {
        self.k
    }

    fn eval(&self, e: f64, p: &EffortMeasure) -> Option<f64> {
        Some((self.k * e / p.integrate(|x| x)).min(1.0))
    }
}

/// Ratio-form success `k e^θ / ∫ x^θ dp` whose exponent θ depends on the
/// competition (1 when the mean effort is below 1.5, 3 otherwise). Rankings
/// against two competitions can cross, so co-monotonicity fails.
#[derive(Debug, Clone, Copy)]
pub struct PDependentExponent {
    pub k: f64,
}

impl PDependentExponent {
    fn theta(p: &EffortMeasure) -> f64 {
        if p.mean() < 1.5 {
            1.0
        } else {
            3.0
        }
    }
}

impl BlackBoxCsf for PDependentExponent {
    fn budget(&self) -> f64 {
        self.k
    }

    fn eval(&self, e: f64, p: &EffortMeasure) -> Option<f64> {
        let theta = Self::theta(p);
        Some((self.k * e.powf(theta) / p.integrate(|x| x.powf(theta))).min(1.0))
    }
}

/// A random performance function with a jump of `size` added at effort `at`.
#[derive(Debug, Clone)]
pub struct PlantedJump {
    pub base: RpfCsf,
    pub at: f64,
    pub size: f64,
}

impl BlackBoxCsf for PlantedJump {
    fn budget(&self) -> f64 {
        self.base.budget()
    }

    fn eval(&self, e: f64, p: &EffortMeasure) -> Option<f64> {
        self.eval_many(&[e], p).pop().flatten()
    }

    fn eval_many(&self, efforts: &[f64], p: &EffortMeasure) -> Vec<Option<f64>> {
        self.base
            .eval_many(efforts, p)
            .into_iter()
            .zip(efforts)
            .map(|(w, e)| {
                w.map(|w| {
                    if *e >= self.at {
                        (w + self.size).min(1.0)
                    } else {
                        w
                    }
                })
            })
            .collect()
    }
}
