//! Continuous noise distributions used as performance shocks.
//!
//! Every built-in cdf is continuous and strictly increasing on ℝ. The
//! normal, Student-t and logistic families are symmetric about zero;
//! shifts and tabulated data generally are not.

mod tabulated;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special;

pub use tabulated::TabulatedCdf;

/// Target accuracy of cdf and quantile evaluations, in probability.
pub const CDF_TOL: f64 = 1e-10;
/// Target relative accuracy of density evaluations.
pub const PDF_TOL: f64 = 1e-8;
/// Default stopping tolerance of the iterative quantile solvers, relative to `1 + |x|`.
pub const QUANTILE_TOL: f64 = 1e-12;

/// Shape of a noise distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// Standard normal.
    Normal,
    StudentT {
        nu: f64,
    },
    Logistic {
        scale: f64,
    },
    /// `cdf(x) = base.cdf(x + t)`.
    Shifted {
        base: Box<NoiseDistribution>,
        t: f64,
    },
    Tabulated(TabulatedCdf),
}

/// A continuous, strictly increasing cdf on ℝ together with its density
/// and quantile function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseRepr", into = "NoiseRepr")]
pub struct NoiseDistribution {
    kind: NoiseKind,
}

impl NoiseDistribution {
    pub fn normal() -> Self {
        NoiseDistribution {
            kind: NoiseKind::Normal,
        }
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain(format!(
                "student_t requires nu > 0, got {nu}"
            )));
        }
        Ok(NoiseDistribution {
            kind: NoiseKind::StudentT { nu },
        })
    }

    pub fn logistic(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain(format!(
                "logistic requires scale > 0, got {scale}"
            )));
        }
        Ok(NoiseDistribution {
            kind: NoiseKind::Logistic { scale },
        })
    }

    pub fn tabulated(table: TabulatedCdf) -> Self {
        NoiseDistribution {
            kind: NoiseKind::Tabulated(table),
        }
    }

    /// Returns the distribution whose cdf at `x` equals this cdf at `x + t`.
    ///
    /// Nested shifts collapse into one; a net shift of zero returns the base.
    pub fn shift(&self, t: f64) -> Self {
        let (base, total) = match &self.kind {
            NoiseKind::Shifted { base, t: t0 } => ((**base).clone(), t0 + t),
            _ => (self.clone(), t),
        };
        if total == 0.0 {
            base
        } else {
            NoiseDistribution {
                kind: NoiseKind::Shifted {
                    base: Box::new(base),
                    t: total,
                },
            }
        }
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    /// Symmetric about zero: `cdf(-x) = 1 - cdf(x)`.
    pub fn is_symmetric(&self) -> bool {
        matches!(
            self.kind,
            NoiseKind::Normal | NoiseKind::StudentT { .. } | NoiseKind::Logistic { .. }
        )
    }

    pub fn has_density(&self) -> bool {
        match &self.kind {
            NoiseKind::Tabulated(_) => false,
            NoiseKind::Shifted { base, .. } => base.has_density(),
            _ => true,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            NoiseKind::Normal => "normal".into(),
            NoiseKind::StudentT { nu } => format!("student_t(nu={nu})"),
            NoiseKind::Logistic { scale } => format!("logistic(scale={scale})"),
            NoiseKind::Shifted { base, t } => format!("shifted({}, t={t})", base.label()),
            NoiseKind::Tabulated(tab) => format!("tabulated({} points)", tab.grid().len()),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            NoiseKind::Normal => special::norm_cdf(x),
            NoiseKind::StudentT { nu } => {
                if x <= 0.0 {
                    special::student_lower(*nu, x)
                } else {
                    1.0 - special::student_lower(*nu, -x)
                }
            }
            NoiseKind::Logistic { scale } => 1.0 / (1.0 + (-x / scale).exp()),
            NoiseKind::Shifted { base, t } => base.cdf(x + t),
            NoiseKind::Tabulated(tab) => tab.cdf(x),
        }
    }

    /// Survival function `1 - cdf(x)`, computed without cancellation in the
    /// right tail.
    pub fn sf(&self, x: f64) -> f64 {
        match &self.kind {
            NoiseKind::Normal => special::norm_sf(x),
            NoiseKind::StudentT { nu } => {
                if x >= 0.0 {
                    special::student_lower(*nu, -x)
                } else {
                    1.0 - special::student_lower(*nu, x)
                }
            }
            NoiseKind::Logistic { scale } => 1.0 / (1.0 + (x / scale).exp()),
            NoiseKind::Shifted { base, t } => base.sf(x + t),
            NoiseKind::Tabulated(tab) => tab.sf(x),
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(match &self.kind {
            NoiseKind::Normal => special::norm_pdf(x),
            NoiseKind::StudentT { nu } => special::student_pdf(*nu, x),
            NoiseKind::Logistic { scale } => {
                let z = (-(x / scale).abs()).exp();
                z / (scale * (1.0 + z) * (1.0 + z))
            }
            NoiseKind::Shifted { base, t } => base.pdf(x + t)?,
            NoiseKind::Tabulated(_) => {
                return Err(Error::Unsupported(
                    "tabulated distributions carry no density",
                ))
            }
        })
    }

    /// Derivative of the density.
    pub fn pdf_derivative(&self, x: f64) -> Result<f64> {
        Ok(match &self.kind {
            NoiseKind::Normal => -x * special::norm_pdf(x),
            NoiseKind::StudentT { nu } => {
                -special::student_pdf(*nu, x) * (nu + 1.0) * x / (nu + x * x)
            }
            NoiseKind::Logistic { scale } => -self.pdf(x)? * (0.5 * x / scale).tanh() / scale,
            NoiseKind::Shifted { base, t } => base.pdf_derivative(x + t)?,
            NoiseKind::Tabulated(_) => {
                return Err(Error::Unsupported(
                    "tabulated distributions carry no density",
                ))
            }
        })
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        self.quantile_tol(q, QUANTILE_TOL)
    }

    /// Quantile with an explicit stopping tolerance for the iterative
    /// solvers (closed forms ignore it).
    pub fn quantile_tol(&self, q: f64, tol: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!(
                "quantile requires q in (0, 1), got {q}"
            )));
        }
        Ok(self.quantile_unchecked(q, tol))
    }

    fn quantile_unchecked(&self, q: f64, tol: f64) -> f64 {
        match &self.kind {
            NoiseKind::Normal => special::norm_quantile(q),
            NoiseKind::StudentT { nu } => {
                if q <= 0.5 {
                    special::student_lower_quantile(*nu, q, tol)
                } else {
                    -special::student_lower_quantile(*nu, 1.0 - q, tol)
                }
            }
            NoiseKind::Logistic { scale } => scale * (q.ln() - (-q).ln_1p()),
            NoiseKind::Shifted { base, t } => base.quantile_unchecked(q, tol) - t,
            NoiseKind::Tabulated(tab) => tab.quantile(q, tol),
        }
    }

    /// Inverse-transform draw.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile_unchecked(open_unit(rng), QUANTILE_TOL)
    }

    /// Half-width of a range that covers the bulk of the distribution: ten
    /// "sigma-equivalents" (interquartile range / 1.349) around the median.
    pub fn bulk_range(&self) -> (f64, f64) {
        let q1 = self.quantile_unchecked(0.25, QUANTILE_TOL);
        let q3 = self.quantile_unchecked(0.75, QUANTILE_TOL);
        let med = self.quantile_unchecked(0.5, QUANTILE_TOL);
        let sigma = (q3 - q1) / 1.348_979_500_392_163_5;
        (med - 10.0 * sigma, med + 10.0 * sigma)
    }
}

/// Uniform draw on the open interval (0, 1).
pub(crate) fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Serialized form: `{"kind": "normal"}`, `{"kind": "student_t", "nu": 3}`,
/// `{"kind": "logistic", "scale": 1}`, `{"kind": "shifted", "base": {...}, "t": 1.5}`,
/// `{"kind": "tabulated", "x": [...], "cdf": [...]}` or
/// `{"kind": "tabulated", "csv": "path/to/table.csv"}`.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum NoiseRepr {
    Normal,
    StudentT {
        nu: f64,
    },
    Logistic {
        #[serde(default = "one")]
        scale: f64,
    },
    Shifted {
        base: Box<NoiseDistribution>,
        t: f64,
    },
    Tabulated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cdf: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
    },
}

fn one() -> f64 {
    1.0
}

impl TryFrom<NoiseRepr> for NoiseDistribution {
    type Error = Error;
    fn try_from(r: NoiseRepr) -> Result<Self> {
        match r {
            NoiseRepr::Normal => Ok(Self::normal()),
            NoiseRepr::StudentT { nu } => Self::student_t(nu),
            NoiseRepr::Logistic { scale } => Self::logistic(scale),
            NoiseRepr::Shifted { base, t } => {
                if !t.is_finite() {
                    return Err(Error::domain("shift must be finite"));
                }
                Ok(base.shift(t))
            }
            NoiseRepr::Tabulated {
                x: Some(x),
                cdf: Some(cdf),
                csv: None,
            } => Ok(Self::tabulated(TabulatedCdf::new(x, cdf)?)),
            NoiseRepr::Tabulated {
                x: None,
                cdf: None,
                csv: Some(path),
            } => Ok(Self::tabulated(TabulatedCdf::from_csv_path(path.as_ref())?)),
            NoiseRepr::Tabulated { .. } => Err(Error::domain(
                "tabulated noise needs either both `x` and `cdf` arrays or a `csv` path",
            )),
        }
    }
}

impl From<NoiseDistribution> for NoiseRepr {
    fn from(d: NoiseDistribution) -> Self {
        match d.kind {
            NoiseKind::Normal => NoiseRepr::Normal,
            NoiseKind::StudentT { nu } => NoiseRepr::StudentT { nu },
            NoiseKind::Logistic { scale } => NoiseRepr::Logistic { scale },
            NoiseKind::Shifted { base, t } => NoiseRepr::Shifted { base, t },
            NoiseKind::Tabulated(tab) => NoiseRepr::Tabulated {
                x: Some(tab.grid().to_vec()),
                cdf: Some(tab.values().to_vec()),
                csv: None,
            },
        }
    }
}
