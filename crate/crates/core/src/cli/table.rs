//! Rectangular numeric tables with a provenance header.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use super::CliError;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Resolved configuration echoed into every output.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub seed: u64,
    pub config: Map<String, Value>,
}

impl Provenance {
    pub fn to_json(&self) -> Value {
        json!({
            "artifact": "entangle-lab",
            "version": ARTIFACT_VERSION,
            "command": self.command,
            "seed": self.seed,
            "config": Value::Object(self.config.clone()),
        })
    }

    fn header_lines(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# entangle-lab {ARTIFACT_VERSION}");
        let _ = writeln!(s, "# command: {}", self.command);
        let _ = writeln!(s, "# seed: {}", self.seed);
        let _ = writeln!(s, "# config: {}", Value::Object(self.config.clone()));
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Provenance,
    /// Scalar results appended as a `#`-prefixed JSON line after the rows.
    pub trailer: Option<Value>,
}

impl SweepTable {
    pub fn new(columns: &[&str], provenance: Provenance) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            provenance,
            trailer: None,
        }
    }

    /// Appends a row. A wrong width or any non-finite entry aborts the run.
    pub fn push(&mut self, row: Vec<f64>) -> Result<(), CliError> {
        if row.len() != self.columns.len() {
            return Err(CliError::Usage(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if let Some((i, v)) = row.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(CliError::Numerical(format!(
                "non-finite value {v} in column `{}` at row {}",
                self.columns[i],
                self.rows.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize, CliError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::Usage(format!("unknown column `{name}`")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.provenance.header_lines();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        if let Some(trailer) = &self.trailer {
            let _ = writeln!(s, "# {trailer}");
        }
        s
    }

    pub fn to_json(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("provenance".into(), self.provenance.to_json());
        doc.insert("columns".into(), json!(self.columns));
        doc.insert("rows".into(), json!(self.rows));
        if let Some(trailer) = &self.trailer {
            doc.insert("summary".into(), trailer.clone());
        }
        Value::Object(doc)
    }
}

/// Shortest representation that round-trips, so CSV values are exact.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        // Fold -0 into 0 so sign-of-zero noise never reaches golden files.
        return "0".into();
    }
    format!("{v:e}")
}

/// Reads `(x, y)` pairs from the first two columns of a CSV, skipping `#`
/// lines and a non-numeric header.
pub fn read_xy(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let (Some(a), Some(b)) = (cells.next(), cells.next()) else {
            return Err(CliError::Usage(format!(
                "line {}: expected at least two columns",
                lineno + 1
            )));
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => out.push((x, y)),
            _ if out.is_empty() => continue,
            _ => {
                return Err(CliError::Usage(format!(
                    "line {}: cannot parse `{line}` as numbers",
                    lineno + 1
                )))
            }
        }
    }
    Ok(out)
}
