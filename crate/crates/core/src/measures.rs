//! Effort distributions: finite measures on E = (0, ∞) made of weighted
//! atoms plus gridded density segments integrated by the trapezoid rule.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid points for density segments.
pub const DEFAULT_GRID_POINTS: usize = 1 << 12;

/// Slack allowed above unit total mass for rounding in mixtures.
const MASS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Atom {
    pub effort: f64,
    pub mass: f64,
}

impl From<(f64, f64)> for Atom {
    fn from((effort, mass): (f64, f64)) -> Self {
        Atom { effort, mass }
    }
}

impl From<Atom> for (f64, f64) {
    fn from(a: Atom) -> Self {
        (a.effort, a.mass)
    }
}

/// A density tabulated on a strictly increasing grid of positive efforts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SegmentRepr", into = "SegmentRepr")]
pub struct DensitySegment {
    grid: Vec<f64>,
    weights: Vec<f64>,
    /// Trapezoid mass of each node, fixed at construction so that shifting
    /// the grid cannot perturb it.
    node_mass: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRepr {
    grid: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<SegmentRepr> for DensitySegment {
    type Error = Error;
    fn try_from(r: SegmentRepr) -> Result<Self> {
        DensitySegment::new(r.grid, r.weights)
    }
}

impl From<DensitySegment> for SegmentRepr {
    fn from(s: DensitySegment) -> Self {
        SegmentRepr {
            grid: s.grid,
            weights: s.weights,
        }
    }
}

impl DensitySegment {
    pub fn new(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if grid.len() != weights.len() {
            return Err(Error::domain(
                "density segment: grid and weights lengths differ",
            ));
        }
        if grid.len() < 2 {
            return Err(Error::domain(
                "density segment needs at least two grid points",
            ));
        }
        if !(grid[0] > 0.0) {
            return Err(Error::domain(format!(
                "density grid must lie in (0, inf), got {}",
                grid[0]
            )));
        }
        if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain(
                "density grid must be finite and strictly increasing",
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain(
                "density weights must be finite and non-negative",
            ));
        }
        let n = grid.len();
        let node_mass = (0..n)
            .map(|i| {
                let left = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
                let right = if i + 1 < n {
                    grid[i + 1] - grid[i]
                } else {
                    0.0
                };
                0.5 * weights[i] * (left + right)
            })
            .collect();
        Ok(DensitySegment {
            grid,
            weights,
            node_mass,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Trapezoid quadrature nodes: each grid point with its share of mass.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .iter()
            .copied()
            .zip(self.node_mass.iter().copied())
    }

    pub fn mass(&self) -> f64 {
        self.nodes().map(|(_, m)| m).sum()
    }

    fn scaled(&self, c: f64) -> Self {
        DensitySegment {
            grid: self.grid.clone(),
            weights: self.weights.iter().map(|w| w * c).collect(),
            node_mass: self.node_mass.iter().map(|m| m * c).collect(),
        }
    }

    fn shifted(&self, a: f64) -> Self {
        DensitySegment {
            grid: self.grid.iter().map(|g| g + a).collect(),
            weights: self.weights.clone(),
            node_mass: self.node_mass.clone(),
        }
    }
}

/// A finite measure `p` on efforts with `0 < p(E) <= 1`.
///
/// Atoms are kept sorted by effort with coincident locations merged, so two
/// measures built from the same atoms compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct EffortMeasure {
    atoms: Vec<Atom>,
    segments: Vec<DensitySegment>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureRepr {
    #[serde(default)]
    atoms: Vec<Atom>,
    #[serde(default)]
    segments: Vec<DensitySegment>,
}

impl TryFrom<MeasureRepr> for EffortMeasure {
    type Error = Error;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        EffortMeasure::new(r.atoms, r.segments)
    }
}

impl From<EffortMeasure> for MeasureRepr {
    fn from(m: EffortMeasure) -> Self {
        MeasureRepr {
            atoms: m.atoms,
            segments: m.segments,
        }
    }
}

impl EffortMeasure {
    pub fn new(atoms: Vec<Atom>, segments: Vec<DensitySegment>) -> Result<Self> {
        for a in &atoms {
            if !(a.effort > 0.0 && a.effort.is_finite()) {
                return Err(Error::domain(format!(
                    "atom effort must lie in (0, inf), got {}",
                    a.effort
                )));
            }
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(Error::domain(format!(
                    "atom mass must be positive, got {}",
                    a.mass
                )));
            }
        }
        let segments: Vec<_> = segments.into_iter().filter(|s| s.mass() > 0.0).collect();
        let m = EffortMeasure {
            atoms: merge_atoms(atoms),
            segments,
        };
        let total = m.total_mass();
        if !(total > 0.0 && total <= 1.0 + MASS_SLACK) {
            return Err(Error::domain(format!(
                "total mass must lie in (0, 1], got {total}"
            )));
        }
        Ok(m)
    }

    /// Unit point mass at `e`.
    pub fn dirac(e: f64) -> Result<Self> {
        Self::new(
            vec![Atom {
                effort: e,
                mass: 1.0,
            }],
            Vec::new(),
        )
    }

    pub fn from_atoms<I: IntoIterator<Item = (f64, f64)>>(atoms: I) -> Result<Self> {
        Self::new(atoms.into_iter().map(Atom::from).collect(), Vec::new())
    }

    /// Uniform density of total `mass` on `[lo, hi]` sampled at `points` grid points.
    pub fn uniform(lo: f64, hi: f64, mass: f64, points: usize) -> Result<Self> {
        if !(hi > lo) || points < 2 {
            return Err(Error::domain(
                "uniform measure needs lo < hi and at least two points",
            ));
        }
        let grid: Vec<f64> = (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect();
        let weights = vec![mass / (hi - lo); points];
        Self::new(Vec::new(), vec![DensitySegment::new(grid, weights)?])
    }

    pub fn density(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::new(Vec::new(), vec![DensitySegment::new(grid, weights)?])
    }

    /// Reads `(effort, mass)` atom rows; a non-numeric first row is a header.
    pub fn from_csv_reader<R: Read>(source_name: &str, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut atoms = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
            if rec.len() != 2 {
                return Err(Error::parse(
                    source_name,
                    line,
                    format!("expected 2 columns, found {}", rec.len()),
                ));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(e), Ok(m)) => {
                    if !(e > 0.0 && e.is_finite() && m > 0.0 && m.is_finite()) {
                        return Err(Error::parse(
                            source_name,
                            line,
                            "effort and mass must be positive and finite",
                        ));
                    }
                    atoms.push(Atom { effort: e, mass: m });
                }
                _ if idx == 0 => continue,
                _ => return Err(Error::parse(source_name, line, "non-numeric value")),
            }
        }
        Self::new(atoms, Vec::new())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn segments(&self) -> &[DensitySegment] {
        &self.segments
    }

    pub fn is_atomic(&self) -> bool {
        self.segments.is_empty()
    }

    /// All quadrature nodes `(effort, mass)`: atoms first, then segment nodes.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms
            .iter()
            .map(|a| (a.effort, a.mass))
            .chain(self.segments.iter().flat_map(|s| s.nodes()))
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes().map(|(_, m)| m).sum()
    }

    /// `∫ g dp`: exact over atoms, trapezoid over density segments.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes().map(|(e, m)| m * g(e)).sum()
    }

    /// Mean effort among participants, `∫ e dp / p(E)`.
    pub fn mean(&self) -> f64 {
        self.integrate(|e| e) / self.total_mass()
    }

    /// Smallest and largest effort carrying mass.
    pub fn support(&self) -> (f64, f64) {
        self.nodes()
            .filter(|(_, m)| *m > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (e, _)| {
                (lo.min(e), hi.max(e))
            })
    }

    /// `alpha * p + (1 - alpha) * q`.
    pub fn mix(alpha: f64, p: &Self, q: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::domain(format!(
                "mixing weight must lie in [0, 1], got {alpha}"
            )));
        }
        let mut atoms = Vec::with_capacity(p.atoms.len() + q.atoms.len());
        let mut segments = Vec::new();
        for (w, m) in [(alpha, p), (1.0 - alpha, q)] {
            if w == 0.0 {
                continue;
            }
            atoms.extend(m.atoms.iter().map(|a| Atom {
                effort: a.effort,
                mass: w * a.mass,
            }));
            segments.extend(m.segments.iter().map(|s| s.scaled(w)));
        }
        Self::new(atoms, segments)
    }

    /// Multiplies every mass by `c > 0`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!(
                "scale factor must be positive, got {c}"
            )));
        }
        Self::new(
            self.atoms
                .iter()
                .map(|a| Atom {
                    effort: a.effort,
                    mass: c * a.mass,
                })
                .collect(),
            self.segments.iter().map(|s| s.scaled(c)).collect(),
        )
    }

    /// The right-shift `p ∔ a`: every effort moves up by `a > 0`.
    pub fn right_shift(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain(format!(
                "right shift requires a > 0, got {a}"
            )));
        }
        Ok(EffortMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|x| Atom {
                    effort: x.effort + a,
                    mass: x.mass,
                })
                .collect(),
            segments: self.segments.iter().map(|s| s.shifted(a)).collect(),
        })
    }

    /// Replaces density segments by their trapezoid nodes as atoms; integrals
    /// are unchanged.
    pub fn discretize(&self) -> Self {
        let atoms = self
            .nodes()
            .filter(|(_, m)| *m > 0.0)
            .map(Atom::from)
            .collect();
        EffortMeasure {
            atoms: merge_atoms(atoms),
            segments: Vec::new(),
        }
    }
}

fn merge_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.effort.total_cmp(&b.effort));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if last.effort == a.effort => last.mass += a.mass,
            _ => out.push(a),
        }
    }
    out
}
