use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use super::BlackBoxCsf;
use crate::error::{Error, Result};
use crate::measures::EffortMeasure;

/// A success function known from data: win rates at listed efforts against
/// listed competitions, linearly interpolated in effort. Competitions not in
/// the data and efforts outside a curve's range are not evaluable.
#[derive(Debug, Clone)]
pub struct TabulatedCsf {
    k: f64,
    ids: Vec<String>,
    measures: Vec<EffortMeasure>,
    curves: Vec<Vec<(f64, f64)>>,
}

impl TabulatedCsf {
    /// `rows` are `(effort, measure id, win rate)`.
    pub fn new(
        k: f64,
        measures: BTreeMap<String, EffortMeasure>,
        rows: Vec<(f64, String, f64)>,
    ) -> Result<Self> {
        Self::build(
            k,
            measures,
            rows.into_iter()
                .enumerate()
                .map(|(i, r)| (i + 1, r))
                .collect(),
            "rows",
        )
    }

    fn build(
        k: f64,
        measures: BTreeMap<String, EffortMeasure>,
        rows: Vec<(usize, (f64, String, f64))>,
        source: &str,
    ) -> Result<Self> {
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::domain(format!(
                "budget fraction k must lie in (0, 1), got {k}"
            )));
        }
        let ids: Vec<String> = measures.keys().cloned().collect();
        let mut curves = vec![Vec::new(); ids.len()];
        for (line, (e, id, w)) in rows {
            let Some(idx) = ids.iter().position(|m| *m == id) else {
                return Err(Error::parse(
                    source,
                    line,
                    format!("unknown measure id `{id}`"),
                ));
            };
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::parse(
                    source,
                    line,
                    format!("effort must be positive, got {e}"),
                ));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::parse(
                    source,
                    line,
                    format!("win rate must lie in [0, 1], got {w}"),
                ));
            }
            curves[idx].push((e, w, line));
        }
        let mut out = Vec::with_capacity(curves.len());
        for c in curves.iter_mut() {
            c.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(pair) = c.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(Error::parse(
                    source,
                    pair[1].2,
                    format!("duplicate effort {}", pair[1].0),
                ));
            }
            out.push(c.iter().map(|(e, w, _)| (*e, *w)).collect());
        }
        Ok(TabulatedCsf {
            k,
            ids,
            measures: measures.into_values().collect(),
            curves: out,
        })
    }

    /// Reads `effort,measure_id,win_rate` rows (an optional header row is
    /// skipped) and a JSON object mapping ids to effort measures.
    pub fn from_readers<R: Read, M: Read>(
        k: f64,
        source_name: &str,
        rows: R,
        measures: M,
    ) -> Result<Self> {
        let measures: BTreeMap<String, EffortMeasure> = serde_json::from_reader(measures)?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(rows);
        let mut parsed = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
            if rec.len() != 3 {
                return Err(Error::parse(
                    source_name,
                    line,
                    format!("expected 3 columns, found {}", rec.len()),
                ));
            }
            match (rec[0].parse::<f64>(), rec[2].parse::<f64>()) {
                (Ok(e), Ok(w)) => parsed.push((line, (e, rec[1].to_string(), w))),
                _ if idx == 0 => continue,
                _ => {
                    return Err(Error::parse(
                        source_name,
                        line,
                        "non-numeric effort or win rate",
                    ))
                }
            }
        }
        Self::build(k, measures, parsed, source_name)
    }

    pub fn from_paths(k: f64, rows: &Path, measures: &Path) -> Result<Self> {
        let r = std::fs::File::open(rows)?;
        let m = std::fs::File::open(measures)?;
        Self::from_readers(k, &rows.display().to_string(), r, m)
    }

    /// The competitions present in the data, for use as an audit pool.
    pub fn measures(&self) -> &[EffortMeasure] {
        &self.measures
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Smallest and largest tabulated effort.
    pub fn effort_range(&self) -> Option<(f64, f64)> {
        let mut it = self.curves.iter().flatten().map(|(e, _)| *e);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), e| (lo.min(e), hi.max(e))))
    }

    fn lookup(&self, p: &EffortMeasure) -> Option<usize> {
        self.measures.iter().position(|m| same_measure(m, p))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn same_measure(a: &EffortMeasure, b: &EffortMeasure) -> bool {
    if a == b {
        return true;
    }
    let (na, nb): (Vec<_>, Vec<_>) = (a.nodes().collect(), b.nodes().collect());
    na.len() == nb.len()
        && na
            .iter()
            .zip(&nb)
            .all(|(x, y)| close(x.0, y.0) && close(x.1, y.1))
}

impl BlackBoxCsf for TabulatedCsf {
    fn budget(&self) -> f64 {
        self.k
    }

    fn eval(&self, e: f64, p: &EffortMeasure) -> Option<f64> {
        let curve = &self.curves[self.lookup(p)?];
        let (first, last) = (curve.first()?, curve.last()?);
        if e < first.0 || e > last.0 {
            return None;
        }
        let i = curve.partition_point(|(x, _)| *x < e);
        let (x1, w1) = curve[i];
        if x1 == e || i == 0 {
            return Some(w1);
        }
        let (x0, w0) = curve[i - 1];
        Some(w0 + (w1 - w0) * (e - x0) / (x1 - x0))
    }
}
