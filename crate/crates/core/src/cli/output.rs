//! Tabular output: CSV with a unit row, or a single JSON document.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputTable {
    pub name: String,
    pub columns: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: Map<String, Value>,
}

/// JSON number, or null for NaN and infinities.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl OutputTable {
    pub fn new(name: impl Into<String>, spec: &[(&str, &str)]) -> Self {
        Self {
            name: name.into(),
            columns: spec.iter().map(|(c, _)| c.to_string()).collect(),
            units: spec.iter().map(|(_, u)| u.to_string()).collect(),
            rows: Vec::new(),
            metadata: Map::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl Into<Value>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| cells.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",");
        out.push_str(&line(&self.columns));
        out.push('\n');
        out.push_str(&line(&self.units));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn metadata_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&Value::Object(self.metadata.clone())).expect("serializable");
        s.push('\n');
        s
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(|&v| num(v)).collect()))
            .collect();
        let doc = json!({
            "name": self.name,
            "columns": self.columns,
            "units": self.units,
            "rows": rows,
            "metadata": self.metadata,
        });
        let mut s = serde_json::to_string(&doc).expect("serializable");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `<out>.meta.json` next to a CSV file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes one table to `out`, or returns it for stdout when `out` is `None`.
pub fn emit_table(table: &OutputTable, format: Format, out: Option<&Path>) -> Result<String, CliError> {
    match out {
        None => Ok(table.render(format)),
        Some(path) => {
            write_file(path, &table.render(format))?;
            if format == Format::Csv {
                write_file(&sidecar_path(path), &table.metadata_json())?;
            }
            Ok(String::new())
        }
    }
}

/// Writes each table as `<dir>/<name>.<ext>`, or concatenates them with
/// `# <name>` separator lines for stdout.
pub fn emit_tables(tables: &[OutputTable], format: Format, dir: Option<&Path>) -> Result<String, CliError> {
    match dir {
        None => {
            let mut out = String::new();
            for t in tables {
                let _ = writeln!(out, "# {}", t.name);
                out.push_str(&t.render(format));
            }
            Ok(out)
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            for t in tables {
                let path = dir.join(format!("{}.{}", t.name, format.extension()));
                emit_table(t, format, Some(&path))?;
            }
            Ok(String::new())
        }
    }
}
