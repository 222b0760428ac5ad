//! Trajectory files: CSV rows under a one-line JSON header comment.
//!
//! The header carries the scenario hash, mode, tolerances, and the column
//! names; every number is written with 17 significant digits so a re-read
//! trajectory is bit-identical to the in-memory one.

use crate::error::CliError;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub scenario_hash: String,
    pub kind: String,
    pub mode: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub header: TrajectoryHeader,
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryFile {
    pub fn new(header: TrajectoryHeader) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| CliError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        let render = |e: std::io::Error| CliError::Io {
            path: path.display().to_string(),
            source: e,
        };
        writeln!(
            out,
            "# {}",
            serde_json::to_string(&self.header).expect("header serializes")
        )
        .map_err(render)?;
        writeln!(out, "{}", self.header.columns.join(",")).map_err(render)?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", line.join(",")).map_err(render)?;
        }
        Ok(())
    }
}

/// Read a trajectory file back; the result reproduces the written values
/// exactly.
pub fn read_trajectory(path: impl AsRef<Path>) -> Result<TrajectoryFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| CliError::Parse("empty trajectory file".into()))?;
    let header_json = header_line
        .strip_prefix("# ")
        .ok_or_else(|| CliError::Parse("missing `# {json}` header line".into()))?;
    let header: TrajectoryHeader = serde_json::from_str(header_json)
        .map_err(|e| CliError::Parse(format!("trajectory header: {e}")))?;
    let names_line = lines
        .next()
        .ok_or_else(|| CliError::Parse("missing column-name line".into()))?;
    if names_line != header.columns.join(",") {
        return Err(CliError::Parse(
            "column-name line disagrees with the header".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|x| x.parse::<f64>()).collect();
        let row = row.map_err(|e| CliError::Parse(format!("row {}: {e}", i + 1)))?;
        if row.len() != header.columns.len() {
            return Err(CliError::Parse(format!(
                "row {} has {} fields, expected {}",
                i + 1,
                row.len(),
                header.columns.len()
            )));
        }
        rows.push(row);
    }
    Ok(TrajectoryFile { header, rows })
}
