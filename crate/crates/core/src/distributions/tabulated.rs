//! Empirical cdf given on a grid, monotone-cubic between grid points and
//! exponential beyond the ends.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A cdf tabulated at strictly increasing abscissae.
///
/// Between grid points the cdf is a C¹ piecewise cubic Hermite interpolant
/// with Fritsch–Butland slopes, which keeps it strictly increasing. Outside
/// the grid the tails decay exponentially, matched in value and slope at
/// the end points, so the cdf is strictly increasing on the whole line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct TabulatedCdf {
    x: Vec<f64>,
    cdf: Vec<f64>,
    slope: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    x: Vec<f64>,
    cdf: Vec<f64>,
}

impl TryFrom<TableRepr> for TabulatedCdf {
    type Error = Error;
    fn try_from(r: TableRepr) -> Result<Self> {
        TabulatedCdf::new(r.x, r.cdf)
    }
}

impl From<TabulatedCdf> for TableRepr {
    fn from(t: TabulatedCdf) -> Self {
        TableRepr { x: t.x, cdf: t.cdf }
    }
}

impl TabulatedCdf {
    pub fn new(x: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if x.len() != cdf.len() {
            return Err(Error::domain("tabulated cdf: x and cdf lengths differ"));
        }
        if x.len() < 2 {
            return Err(Error::domain("tabulated cdf needs at least two points"));
        }
        for i in 0..x.len() {
            check_row(
                "tabulated cdf",
                i + 1,
                x[i],
                cdf[i],
                (i > 0).then(|| (x[i - 1], cdf[i - 1])),
            )?;
        }
        let slope = fritsch_butland(&x, &cdf);
        Ok(TabulatedCdf { x, cdf, slope })
    }

    /// Reads two-column `x,cdf` CSV. A non-numeric first row is treated as a
    /// header; every other row must parse and continue the strict increase.
    pub fn from_csv_reader<R: Read>(source_name: &str, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut x = Vec::new();
        let mut cdf = Vec::new();
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
            let (a, b) = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            let (xi, ci) = match (a, b) {
                (Ok(a), Ok(b)) => (a, b),
                _ if idx == 0 => continue,
                _ => return Err(Error::parse(source_name, line, "non-numeric value")),
            };
            check_row(
                source_name,
                line,
                xi,
                ci,
                x.last().copied().zip(cdf.last().copied()),
            )?;
            x.push(xi);
            cdf.push(ci);
        }
        if x.len() < 2 {
            return Err(Error::parse(source_name, 0, "need at least two data rows"));
        }
        let slope = fritsch_butland(&x, &cdf);
        Ok(TabulatedCdf { x, cdf, slope })
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_csv_reader(&path.display().to_string(), f)
    }

    pub fn grid(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.cdf
    }

    fn left_rate(&self) -> f64 {
        self.slope[0] / self.cdf[0]
    }

    fn right_rate(&self) -> f64 {
        let n = self.x.len() - 1;
        self.slope[n] / (1.0 - self.cdf[n])
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.x.len() - 1;
        if x <= self.x[0] {
            return self.cdf[0] * (self.left_rate() * (x - self.x[0])).exp();
        }
        if x >= self.x[n] {
            return 1.0 - self.sf(x);
        }
        let i = self.segment(x);
        self.hermite(i, x)
    }

    pub fn sf(&self, x: f64) -> f64 {
        let n = self.x.len() - 1;
        if x >= self.x[n] {
            return (1.0 - self.cdf[n]) * (-self.right_rate() * (x - self.x[n])).exp();
        }
        1.0 - self.cdf(x)
    }

    pub fn quantile(&self, q: f64, tol: f64) -> f64 {
        let n = self.x.len() - 1;
        if q <= self.cdf[0] {
            return self.x[0] + (q / self.cdf[0]).ln() / self.left_rate();
        }
        if q >= self.cdf[n] {
            return self.x[n] - ((1.0 - q) / (1.0 - self.cdf[n])).ln() / self.right_rate();
        }
        let i = match self.cdf.binary_search_by(|c| c.total_cmp(&q)) {
            Ok(i) => return self.x[i],
            Err(i) => i - 1,
        };
        let (mut lo, mut hi) = (self.x[i], self.x[i + 1]);
        while hi - lo > tol * (1.0 + lo.abs().max(hi.abs())) * 1e-3 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.hermite(i, mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn segment(&self, x: f64) -> usize {
        match self.x.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i - 1,
        }
    }

    fn hermite(&self, i: usize, x: f64) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.cdf[i]
            + h10 * h * self.slope[i]
            + h01 * self.cdf[i + 1]
            + h11 * h * self.slope[i + 1]
    }
}

fn check_row(source: &str, line: usize, x: f64, c: f64, prev: Option<(f64, f64)>) -> Result<()> {
    if !x.is_finite() || !c.is_finite() {
        return Err(Error::parse(source, line, "non-finite value"));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::parse(
            source,
            line,
            format!("cdf value {c} must lie strictly inside (0, 1)"),
        ));
    }
    if let Some((px, pc)) = prev {
        if x <= px {
            return Err(Error::parse(
                source,
                line,
                format!("x = {x} is not strictly increasing (previous {px})"),
            ));
        }
        if c <= pc {
            return Err(Error::parse(
                source,
                line,
                format!("cdf = {c} is not strictly increasing (previous {pc})"),
            ));
        }
    }
    Ok(())
}

/// Interior slopes are weighted harmonic means of adjacent secants; end
/// slopes are the end secants. All slopes are positive for increasing data.
fn fritsch_butland(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        let w1 = 2.0 * h[i] + h[i - 1];
        let w2 = h[i] + 2.0 * h[i - 1];
        d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_increasing_with_line_number() {
        let data = "x,cdf\n-1,0.1\n0,0.5\n0,0.6\n";
        let err = TabulatedCdf::from_csv_reader("t.csv", data.as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            e => panic!("unexpected {e}"),
        }
        let data = "-1,0.1\n0,0.5\n1,0.4\n";
        let err = TabulatedCdf::from_csv_reader("t.csv", data.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn rejects_boundary_probabilities() {
        assert!(TabulatedCdf::new(vec![0.0, 1.0], vec![0.0, 0.5]).is_err());
        assert!(TabulatedCdf::new(vec![0.0, 1.0], vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn interpolates_through_knots_and_stays_increasing() {
        let t = TabulatedCdf::new(
            vec![-2.0, -0.5, 0.0, 0.3, 2.5],
            vec![0.02, 0.3, 0.5, 0.62, 0.99],
        )
        .unwrap();
        for (x, c) in t.grid().iter().zip(t.values()) {
            assert!((t.cdf(*x) - c).abs() < 1e-15);
        }
        let (mut prev_c, mut prev_s) = (0.0, 1.0);
        for i in 0..4000 {
            let x = -6.0 + i as f64 * 0.003;
            let (c, s) = (t.cdf(x), t.sf(x));
            if x < 0.0 {
                assert!(c > prev_c, "cdf not increasing at {x}");
            } else {
                assert!(s < prev_s, "sf not decreasing at {x}");
            }
            prev_c = c;
            prev_s = s;
        }
    }
}
