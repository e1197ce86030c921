//! Tabular artifact type shared by the evaluators, the comparison harness,
//! and the CLI.
//!
//! A [`DistTable`] is a single-column distribution table: strictly increasing
//! abscissae (height levels b or rescaled positions x), one value per row
//! (a probability), a per-row error estimate, and a metadata echo of the
//! configuration that produced it. Emission formats are CSV with `#` metadata
//! lines and a JSON mirror; both round-trip byte-identically because floats
//! are printed with 17 significant digits (lossless for f64) and metadata
//! keys are kept sorted.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Tolerance for declaring two abscissa grids "the same grid". Grids come
/// from integer levels or closed-form maps evaluated twice, so disagreement
/// beyond a few ulps means the tables describe different scans.
pub const ABSCISSA_MATCH_ATOL: f64 = 1e-9;

/// Slack added to the [0, 1] enclosure check so that values clamped at the
/// boundary by upstream evaluators (which guarantee containment only up to
/// their own rounding) are not rejected for sub-ulp excursions.
pub const ENCLOSURE_SLACK: f64 = 1e-12;

/// Format a float with 17 significant digits; `f64::from_str` recovers the
/// exact bit pattern from this form.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row of a distribution table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub abscissa: f64,
    pub value: f64,
    pub err: f64,
}

/// Distribution table: abscissae, values, per-row error estimates, metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DistTable {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    pub err: Vec<f64>,
    pub meta: BTreeMap<String, String>,
    /// Column names used on emission; recovered verbatim on parse so that
    /// re-emission is byte-identical.
    pub columns: [String; 3],
}

impl DistTable {
    /// Build and validate a table. The abscissae must be finite and strictly
    /// increasing; every value must lie in [0, 1] within its declared error.
    pub fn new(
        abscissae: Vec<f64>,
        values: Vec<f64>,
        err: Vec<f64>,
        meta: BTreeMap<String, String>,
        columns: [&str; 3],
    ) -> Result<Self> {
        if abscissae.is_empty() || abscissae.len() != values.len() || values.len() != err.len() {
            return Err(Error::Usage(format!(
                "table columns must be non-empty and equal length, got {}/{}/{}",
                abscissae.len(),
                values.len(),
                err.len()
            )));
        }
        for w in abscissae.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Usage(format!(
                    "abscissae not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        for i in 0..values.len() {
            let (a, v, e) = (abscissae[i], values[i], err[i]);
            if !a.is_finite() || !v.is_finite() || !e.is_finite() || e < 0.0 {
                return Err(Error::Usage(format!(
                    "non-finite table entry at row {i}: ({a}, {v}, {e})"
                )));
            }
            if v < -(e + ENCLOSURE_SLACK) || v > 1.0 + e + ENCLOSURE_SLACK {
                return Err(Error::Usage(format!(
                    "value {v} at abscissa {a} outside [0,1] beyond declared error {e}"
                )));
            }
        }
        Ok(Self {
            abscissae,
            values,
            err,
            meta,
            columns: columns.map(str::to_owned),
        })
    }

    pub fn len(&self) -> usize {
        self.abscissae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissae.is_empty()
    }

    pub fn row(&self, i: usize) -> TableRow {
        TableRow {
            abscissa: self.abscissae[i],
            value: self.values[i],
            err: self.err[i],
        }
    }

    /// Linear interpolation of the value column at abscissa `x`; errs on
    /// extrapolation. The interpolant carries the larger bracketing error.
    pub fn interp(&self, x: f64) -> Result<(f64, f64)> {
        let n = self.len();
        if x < self.abscissae[0] - ABSCISSA_MATCH_ATOL
            || x > self.abscissae[n - 1] + ABSCISSA_MATCH_ATOL
        {
            return Err(Error::Usage(format!(
                "abscissa {x} outside table range [{}, {}]",
                self.abscissae[0],
                self.abscissae[n - 1]
            )));
        }
        let j = match self
            .abscissae
            .binary_search_by(|a| a.partial_cmp(&x).expect("finite abscissae"))
        {
            Ok(j) => return Ok((self.values[j], self.err[j])),
            Err(j) => j.clamp(1, n - 1),
        };
        let (a0, a1) = (self.abscissae[j - 1], self.abscissae[j]);
        let t = ((x - a0) / (a1 - a0)).clamp(0.0, 1.0);
        let v = self.values[j - 1] + t * (self.values[j] - self.values[j - 1]);
        Ok((v, self.err[j - 1].max(self.err[j])))
    }

    /// Emit as CSV: sorted `# key = value` metadata lines, a header row, then
    /// one row per abscissa with 17-significant-digit floats.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in &self.meta {
            writeln!(w, "# {k} = {v}")?;
        }
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.columns)?;
        for i in 0..self.len() {
            wtr.write_record([
                format_float(self.abscissae[i]),
                format_float(self.values[i]),
                format_float(self.err[i]),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parse the CSV form produced by [`DistTable::write_csv`].
    pub fn read_csv<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut meta = BTreeMap::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once(" = ").ok_or_else(|| {
                    Error::Usage(format!("malformed metadata line: {line:?}"))
                })?;
                meta.insert(k.to_owned(), v.to_owned());
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.len() != 3 {
            return Err(Error::Usage(format!(
                "expected 3 columns, got {}",
                headers.len()
            )));
        }
        let columns = [&headers[0], &headers[1], &headers[2]];
        let (mut xs, mut vs, mut es) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| Error::Usage(format!("bad float {s:?}: {e}")))
            };
            xs.push(parse(&rec[0])?);
            vs.push(parse(&rec[1])?);
            es.push(parse(&rec[2])?);
        }
        Self::new(xs, vs, es, meta, columns)
    }

    /// JSON mirror: `{"columns": [...], "meta": {...}, "rows": [[a,v,e],…]}`.
    /// serde_json keeps object keys sorted and prints shortest-round-trip
    /// floats, so parse-then-emit is byte-identical.
    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        let rows: Vec<serde_json::Value> = (0..self.len())
            .map(|i| serde_json::json!([self.abscissae[i], self.values[i], self.err[i]]))
            .collect();
        let doc = serde_json::json!({
            "columns": self.columns,
            "meta": self.meta,
            "rows": rows,
        });
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        Ok(())
    }

    /// Parse the JSON mirror produced by [`DistTable::write_json`].
    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_reader(r)?;
        let cols = doc["columns"]
            .as_array()
            .filter(|a| a.len() == 3)
            .ok_or_else(|| Error::Usage("json missing 3-entry columns".into()))?;
        let col = |i: usize| -> Result<&str> {
            cols[i]
                .as_str()
                .ok_or_else(|| Error::Usage("non-string column name".into()))
        };
        let mut meta = BTreeMap::new();
        if let Some(obj) = doc["meta"].as_object() {
            for (k, v) in obj {
                let vs = v
                    .as_str()
                    .ok_or_else(|| Error::Usage("non-string meta value".into()))?;
                meta.insert(k.clone(), vs.to_owned());
            }
        }
        let rows = doc["rows"]
            .as_array()
            .ok_or_else(|| Error::Usage("json missing rows".into()))?;
        let (mut xs, mut vs, mut es) = (Vec::new(), Vec::new(), Vec::new());
        for row in rows {
            let triple = row
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| Error::Usage("row is not a 3-entry array".into()))?;
            let num = |v: &serde_json::Value| -> Result<f64> {
                v.as_f64()
                    .ok_or_else(|| Error::Usage(format!("non-numeric entry {v}")))
            };
            xs.push(num(&triple[0])?);
            vs.push(num(&triple[1])?);
            es.push(num(&triple[2])?);
        }
        Self::new(xs, vs, es, meta, [col(0)?, col(1)?, col(2)?])
    }
}

/// How [`compare`] judges a per-row deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompareMode {
    /// Pass iff |value − reference| ≤ tol on every row.
    Abs(f64),
    /// Pass iff |value − reference| ≤ the reference row's error column,
    /// interpreted as a confidence-interval half-width.
    Ci,
}

/// One failing row of a comparison.
#[derive(Debug, Clone, Copy)]
pub struct CompareRow {
    pub abscissa: f64,
    pub value: f64,
    pub reference: f64,
    pub deviation: f64,
    pub bound: f64,
}

/// Comparison outcome: worst deviation and the rows outside tolerance.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows_checked: usize,
    pub max_abs_dev: f64,
    pub failures: Vec<CompareRow>,
}

impl CompareReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compare a table against a reference row by row. Grids must match within
/// [`ABSCISSA_MATCH_ATOL`]; otherwise the reference is linearly interpolated
/// onto the table's abscissae (it must cover their range), which serves the
/// limit-vs-finite comparisons where the finite grid lands between limit
/// grid points.
pub fn compare(
    table: &DistTable,
    reference: &DistTable,
    mode: CompareMode,
) -> Result<CompareReport> {
    let same_grid = table.len() == reference.len()
        && table
            .abscissae
            .iter()
            .zip(&reference.abscissae)
            .all(|(a, b)| (a - b).abs() <= ABSCISSA_MATCH_ATOL * (1.0 + a.abs()));
    let mut report = CompareReport {
        rows_checked: table.len(),
        max_abs_dev: 0.0,
        failures: Vec::new(),
    };
    for i in 0..table.len() {
        let (rv, re) = if same_grid {
            (reference.values[i], reference.err[i])
        } else {
            reference.interp(table.abscissae[i]).map_err(|_| {
                Error::Usage(format!(
                    "abscissa mismatch: {} not covered by reference grid",
                    table.abscissae[i]
                ))
            })?
        };
        let dev = (table.values[i] - rv).abs();
        report.max_abs_dev = report.max_abs_dev.max(dev);
        let bound = match mode {
            CompareMode::Abs(tol) => tol,
            CompareMode::Ci => re,
        };
        if dev > bound {
            report.failures.push(CompareRow {
                abscissa: table.abscissae[i],
                value: table.values[i],
                reference: rv,
                deviation: dev,
                bound,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DistTable {
        let mut meta = BTreeMap::new();
        meta.insert("subcommand".into(), "exact".into());
        meta.insert("seed".into(), "7".into());
        DistTable::new(
            vec![-2.0, 0.0, 1.5, 3.0],
            vec![0.0, 0.25, 0.75, 1.0],
            vec![1e-9, 1e-9, 1e-9, 1e-9],
            meta,
            ["b", "value", "err"],
        )
        .expect("valid table")
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = DistTable::read_csv(buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        back.write_csv(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(t, back);
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_json(&mut buf).unwrap();
        let back = DistTable::read_json(buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        back.write_json(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(t, back);
    }

    #[test]
    fn seventeen_digit_floats_round_trip_exactly() {
        for &v in &[
            0.1,
            -0.0,
            1.0 / 3.0,
            std::f64::consts::PI,
            6.02e23,
            5e-324,
            -1.2345678901234567e-8,
        ] {
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn validation_rejects_bad_tables() {
        let meta = BTreeMap::new();
        assert!(DistTable::new(
            vec![0.0, 0.0],
            vec![0.1, 0.2],
            vec![0.0, 0.0],
            meta.clone(),
            ["x", "value", "err"],
        )
        .is_err());
        assert!(DistTable::new(
            vec![0.0, 1.0],
            vec![0.1, 1.2],
            vec![0.0, 1e-3],
            meta.clone(),
            ["x", "value", "err"],
        )
        .is_err());
        assert!(DistTable::new(
            vec![0.0, 1.0],
            vec![0.1, 1.2],
            vec![0.0, 0.5],
            meta,
            ["x", "value", "err"],
        )
        .is_ok());
    }

    #[test]
    fn identical_tables_compare_clean() {
        let t = sample();
        let rep = compare(&t, &t, CompareMode::Abs(1e-12)).unwrap();
        assert!(rep.pass());
        assert_eq!(rep.max_abs_dev, 0.0);
    }

    #[test]
    fn perturbed_row_is_reported() {
        let t = sample();
        let mut bad = t.clone();
        bad.values[2] += 1e-3;
        let rep = compare(&bad, &t, CompareMode::Abs(1e-6)).unwrap();
        assert!(!rep.pass());
        assert_eq!(rep.failures.len(), 1);
        assert_eq!(rep.failures[0].abscissa, 1.5);
        assert!((rep.failures[0].deviation - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn ci_mode_uses_reference_halfwidths() {
        let t = sample();
        let mut reference = t.clone();
        reference.values[1] += 5e-3;
        reference.err = vec![1e-2; 4];
        let rep = compare(&t, &reference, CompareMode::Ci).unwrap();
        assert!(rep.pass());
        reference.err = vec![1e-3; 4];
        let rep = compare(&t, &reference, CompareMode::Ci).unwrap();
        assert!(!rep.pass());
    }

    #[test]
    fn mismatched_grid_interpolates_when_covered() {
        let t = sample();
        let fine = DistTable::new(
            vec![-2.0, -1.0, 0.0, 0.75, 1.5, 2.25, 3.0],
            vec![0.0, 0.125, 0.25, 0.5, 0.75, 0.875, 1.0],
            vec![0.0; 7],
            BTreeMap::new(),
            ["b", "value", "err"],
        )
        .unwrap();
        let rep = compare(&t, &fine, CompareMode::Abs(1e-12)).unwrap();
        assert!(rep.pass(), "shared nodes agree exactly: {rep:?}");
        let shifted = DistTable::new(
            vec![0.5, 1.0],
            vec![0.3, 0.4],
            vec![0.0, 0.0],
            BTreeMap::new(),
            ["b", "value", "err"],
        )
        .unwrap();
        assert!(compare(&shifted, &t, CompareMode::Abs(1.0)).is_ok());
        let outside = DistTable::new(
            vec![-5.0],
            vec![0.0],
            vec![0.0],
            BTreeMap::new(),
            ["b", "value", "err"],
        )
        .unwrap();
        assert!(compare(&outside, &t, CompareMode::Abs(1.0)).is_err());
    }

    #[test]
    fn interp_matches_endpoints_and_midpoints() {
        let t = sample();
        let (v, _) = t.interp(0.0).unwrap();
        assert_eq!(v, 0.25);
        let (v, _) = t.interp(0.75).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }
}
