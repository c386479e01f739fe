//! Per-tick trace table and its CSV form.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// Bumped whenever the column layout changes.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Column names for `n` robots and the given ring edges.
pub fn trace_columns(n: usize, edges: &[(usize, usize)]) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for i in 0..n {
        for name in ["theta", "x", "y", "z"] {
            cols.push(format!("{name}_{i}"));
        }
    }
    for (i, j) in edges {
        for name in ["d", "cosdiff", "staleness"] {
            cols.push(format!("{name}_{i}_{j}"));
        }
    }
    cols.push("coverage_pct".into());
    cols.push("detections".into());
    cols
}

impl SimTrace {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// CSV with a leading `# trace-schema: v` comment line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# trace-schema: {TRACE_SCHEMA_VERSION}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|v| {
                    if v.is_finite() {
                        format!("{v:?}")
                    } else if v.is_nan() {
                        "nan".into()
                    } else if *v > 0.0 {
                        "inf".into()
                    } else {
                        "-inf".into()
                    }
                })
                .collect();
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_header() {
        let cols = trace_columns(2, &[(0, 1)]);
        assert_eq!(
            cols.join(","),
            "t,theta_0,x_0,y_0,z_0,theta_1,x_1,y_1,z_1,d_0_1,cosdiff_0_1,staleness_0_1,coverage_pct,detections"
        );
    }

    #[test]
    fn csv_output() {
        let mut tr = SimTrace::new(vec!["t".into(), "s".into()]);
        tr.rows.push(vec![0.0, f64::INFINITY]);
        tr.rows.push(vec![0.5, 1.25]);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# trace-schema: 1\nt,s\n0.0,inf\n0.5,1.25\n"
        );
    }
}
