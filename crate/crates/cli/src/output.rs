//! Atomic report writing with versioned headers.
//!
//! Every text artifact starts with a `# psr vX.Y.Z` comment (CSV) or a
//! `"version"` field (JSON) so downstream tooling can tell which build
//! produced it.  All writes go through a sibling temp file plus rename, so
//! a crash never leaves a truncated report behind.

use std::path::Path;

use serde::Serialize;

use psr_core::dataset::atomic_write;

use crate::error::{CliError, Result};

/// Tool name and version, embedded in every output header.
pub fn version_string() -> String {
    format!("psr v{}", env!("CARGO_PKG_VERSION"))
}

/// A CSV report under construction.
pub struct CsvReport {
    lines: Vec<String>,
}

impl CsvReport {
    /// Starts a report: version header comment, then the column row.
    pub fn new(columns: &[&str]) -> Self {
        CsvReport {
            lines: vec![format!("# {}", version_string()), columns.join(",")],
        }
    }

    /// Appends one data row.
    pub fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    /// Serializes to the final file contents.
    pub fn to_string(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }

    /// Writes the report atomically.
    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_string().as_bytes())?;
        Ok(())
    }
}

/// Formats a float with enough digits to round-trip exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

/// Writes a JSON report atomically, wrapping the value with the version
/// string: `{"version": ..., "report": <value>}`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let wrapped = serde_json::json!({
        "version": version_string(),
        "report": value,
    });
    let text = serde_json::to_string_pretty(&wrapped)
        .map_err(|e| CliError::Data(format!("json serialization: {e}")))?;
    let mut bytes = text.into_bytes();
    bytes.push(b'\n');
    atomic_write(path, &bytes)?;
    Ok(())
}

/// Creates a directory (and parents) if it does not exist.
pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_reports_start_with_the_version_header() {
        let mut r = CsvReport::new(&["a", "b"]);
        r.row(&["1".into(), "2".into()]);
        let text = r.to_string();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("# {}", version_string()));
        assert_eq!(lines.next().unwrap(), "a,b");
        assert_eq!(lines.next().unwrap(), "1,2");
    }

    #[test]
    fn json_reports_embed_the_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_json(&path, &serde_json::json!({"x": 1})).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["version"], version_string());
        assert_eq!(parsed["report"]["x"], 1);
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
