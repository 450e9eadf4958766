//! Files written by a run: `series.csv`, `fields_<step>.vtk`, `summary.json`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use chemotaxis_core::diagnostics::CSV_COLUMNS;
use chemotaxis_core::dump::write_vtk;
use chemotaxis_core::{DiagnosticsRecord, SimState};
use serde::Serialize;

pub const SERIES_FILE: &str = "series.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn snapshot_name(step: u64) -> String {
    format!("fields_{step:07}.vtk")
}

/// First line of every series file. It is the only line that differs
/// between reruns of a scenario.
pub fn header_line(name: &str) -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# chemotaxis series scenario={name} written_unix={secs}")
}

/// Appends one row per recorded state.
pub struct SeriesWriter {
    path: PathBuf,
    out: csv::Writer<BufWriter<File>>,
}

impl SeriesWriter {
    pub fn create(dir: &Path, name: &str) -> io::Result<Self> {
        let path = dir.join(SERIES_FILE);
        let mut file = BufWriter::new(File::create(&path)?);
        writeln!(file, "{}", header_line(name))?;
        let mut out = csv::Writer::from_writer(file);
        out.write_record(CSV_COLUMNS).map_err(io::Error::from)?;
        Ok(Self { path, out })
    }

    pub fn push(&mut self, record: &DiagnosticsRecord) -> io::Result<()> {
        self.out.write_record(record.csv_fields()).map_err(io::Error::from)
    }

    pub fn finish(mut self) -> io::Result<PathBuf> {
        self.out.flush()?;
        Ok(self.path)
    }
}

pub fn write_snapshot(dir: &Path, state: &SimState) -> io::Result<PathBuf> {
    let path = dir.join(snapshot_name(state.step));
    let mut out = BufWriter::new(File::create(&path)?);
    write_vtk(state, &mut out)?;
    out.flush()?;
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    out.flush()
}

pub fn ensure_dir(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_names_sort_by_step() {
        assert_eq!(snapshot_name(0), "fields_0000000.vtk");
        assert!(snapshot_name(99) < snapshot_name(100));
    }

    #[test]
    fn header_is_a_comment() {
        let h = header_line("abc");
        assert!(h.starts_with("# "));
        assert!(h.contains("scenario=abc"));
    }
}
