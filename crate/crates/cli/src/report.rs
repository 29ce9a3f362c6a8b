use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, OutputFormat};

/// Bumped whenever a field of the JSON document changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Ten decimals for moderate magnitudes, scientific otherwise.
pub fn fmt(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let a = v.abs();
    if (1e-4..1e9).contains(&a) {
        let s = format!("{v:.10}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.into() }
    } else {
        format!("{v:.9e}")
    }
}

#[derive(Debug, Default, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn with_header(cols: &[&str]) -> Self {
        Table { header: cols.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, key: &str, value: impl Into<String>) {
        self.rows.push(vec![key.to_string(), value.into()]);
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

pub struct Report {
    pub result: Value,
    /// Key/value lines for the terminal.
    pub table: Table,
    /// Plot-ready rows.
    pub csv: Table,
}

#[derive(Serialize)]
struct Document<'a> {
    schema_version: u32,
    command: &'a str,
    config: &'a ExperimentConfig,
    result: &'a Value,
}

pub fn render(command: &str, config: &ExperimentConfig, report: &Report, out: &mut dyn Write) -> std::io::Result<()> {
    match config.output.format {
        OutputFormat::Json => {
            let doc = Document { schema_version: SCHEMA_VERSION, command, config, result: &report.result };
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            writeln!(out)
        }
        OutputFormat::Csv => {
            let meta = json!({ "schema_version": SCHEMA_VERSION, "command": command, "config": config });
            writeln!(out, "# {meta}")?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&report.csv.header)?;
            for r in &report.csv.rows {
                w.write_record(r)?;
            }
            w.flush()
        }
        OutputFormat::Table => {
            let width = report.table.rows.iter().map(|r| r[0].len()).max().unwrap_or(0);
            writeln!(out, "{command}")?;
            for r in &report.table.rows {
                writeln!(out, "  {:<width$}  {}", r[0], r[1])?;
            }
            let cfg = toml::to_string(config).unwrap_or_default();
            writeln!(out, "\nresolved config:")?;
            for line in cfg.lines() {
                writeln!(out, "  {line}")?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fmt;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt(0.5), "0.5");
        assert_eq!(fmt(-1.0), "-1");
        assert_eq!(fmt(1.0 / 3.0), "0.3333333333");
        assert_eq!(fmt(2.5e-7), "2.500000000e-7");
        assert_eq!(fmt(0.0), "0");
    }
}
