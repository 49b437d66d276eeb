use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    I(i64),
    B(bool),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl Cell {
    /// Floats carry 17 significant digits.
    fn csv(&self) -> String {
        match self {
            Cell::F(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::F(v) => format!("{v}"),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::S(s) => s.clone(),
        }
    }

    fn table(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:.10}"),
            Cell::S(s) => s.clone(),
            other => other.csv(),
        }
    }
}

/// Result of one command: a JSON body and its tabular view.
pub struct Report {
    pub body: Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// `Some(false)` when a property check ran and failed.
    pub verdict: Option<bool>,
    pub witness: Value,
}

impl Report {
    pub fn new(body: impl Serialize, columns: Vec<&'static str>, rows: Vec<Vec<Cell>>) -> Self {
        Report {
            body: serde_json::to_value(body).expect("serializable result"),
            columns,
            rows,
            verdict: None,
            witness: Value::Null,
        }
    }

    pub fn with_verdict(mut self, passed: bool, witness: Value) -> Self {
        self.verdict = Some(passed);
        self.witness = witness;
        self
    }
}

pub fn render(
    report: &Report,
    command: &str,
    config: &Value,
    timestamp: Option<u64>,
    format: Format,
) -> String {
    match format {
        Format::Json => {
            let mut out = Map::new();
            out.insert("command".into(), Value::from(command));
            out.insert("config".into(), config.clone());
            if let Some(t) = timestamp {
                out.insert("timestamp".into(), Value::from(t));
            }
            if let Some(v) = report.verdict {
                out.insert("passed".into(), Value::from(v));
            }
            match &report.body {
                Value::Object(m) => out.extend(m.clone()),
                other => {
                    out.insert("result".into(), other.clone());
                }
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(out)).expect("json");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = format!("# command={command} config={config}\n");
            s.push_str(&report.columns.join(","));
            s.push('\n');
            for row in &report.rows {
                let line: Vec<String> = row.iter().map(Cell::csv).collect();
                s.push_str(&line.join(","));
                s.push('\n');
            }
            s
        }
        Format::Table => {
            let cells: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| r.iter().map(Cell::table).collect())
                .collect();
            let widths: Vec<usize> = (0..report.columns.len())
                .map(|j| {
                    cells
                        .iter()
                        .map(|r| r.get(j).map_or(0, |c| c.chars().count()))
                        .chain([report.columns[j].len()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let mut s = format!("{command}  {config}\n");
            let line = |s: &mut String, row: &[String]| {
                for (j, c) in row.iter().enumerate() {
                    let _ = write!(s, "{:>w$}  ", c, w = widths[j]);
                }
                s.truncate(s.trim_end().len());
                s.push('\n');
            };
            let header: Vec<String> = report.columns.iter().map(|c| c.to_string()).collect();
            line(&mut s, &header);
            for r in &cells {
                line(&mut s, r);
            }
            s
        }
    }
}
