use std::fmt::Write as _;

use super::HarnessError;

/// Column-major-named, row-major-stored simulation record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Trace { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a row; panics if its width does not match the schema.
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "trace row width");
        self.rows.push(row);
    }

    pub fn index(&self, name: &str) -> Result<usize, HarnessError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| HarnessError::Schema(format!("missing column `{name}`")))
    }

    pub fn has(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, HarnessError> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Comma-separated, header row, every value in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| HarnessError::Schema("empty CSV".into()))?;
        let mut trace = Trace::new(header.split(',').map(str::trim));
        let width = trace.columns.len();
        for (idx, line) in lines {
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| HarnessError::Schema(format!("line {}: {e}", idx + 1)))?;
            if row.len() != width {
                return Err(HarnessError::Schema(format!(
                    "line {}: {} fields, header has {width}",
                    idx + 1,
                    row.len()
                )));
            }
            trace.rows.push(row);
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_header_only() {
        let t = Trace::new(["t", "x"]);
        assert_eq!(t.to_csv(), "t,x\n");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = Trace::new(["t", "v"]);
        t.push(vec![0.0, 0.1 + 0.2]);
        t.push(vec![0.01, -1e-300]);
        t.push(vec![0.02, 12345.678901234567]);
        let back = Trace::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn ragged_csv_rejected() {
        assert!(Trace::from_csv("a,b\n1,2\n3\n").is_err());
        assert!(Trace::from_csv("").is_err());
    }

    #[test]
    fn missing_column_is_schema_error() {
        let t = Trace::new(["t"]);
        assert!(matches!(t.column("x"), Err(HarnessError::Schema(_))));
    }
}
