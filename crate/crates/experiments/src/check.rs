//! Re-validates a written `series.csv` against the run invariants.

use std::io::Read;
use std::path::Path;

use chemotaxis_core::diagnostics::CSV_COLUMNS;
use chemotaxis_core::fields::NONNEG_SLACK;
use chemotaxis_core::stepper::{BOUND_TOL, MASS_TOL};
use chemotaxis_core::DiagnosticsRecord;
use serde::Serialize;
use thiserror::Error;

/// Relative per-row increase of the weighted functional that still counts
/// as non-increasing.
pub const LYAPUNOV_SLACK: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header {found:?}")]
    Header { found: Vec<String> },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("no data rows")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Zero-based data row.
    pub row: usize,
    pub t: f64,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub rows: usize,
    pub violations: Vec<Violation>,
    /// Rows where the weighted functional grew by more than the slack.
    /// Reported only; the continuous decay is not guaranteed discretely.
    pub lyapunov_increases: Vec<Violation>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn read_series<R: Read>(input: R) -> Result<Vec<DiagnosticsRecord>, CheckError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(CheckError::Header { found: header });
    }
    reader
        .records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec?;
            let fields: Vec<&str> = rec.iter().collect();
            DiagnosticsRecord::from_csv_fields(&fields).map_err(|e| CheckError::Row {
                row,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Mass against the first row, `u >= 0`, `0 <= v <= max v(0)` (same for
/// `w`), increasing time and absence of violation flags.
pub fn check_series(series: &[DiagnosticsRecord]) -> Result<CheckReport, CheckError> {
    let first = series.first().ok_or(CheckError::Empty)?;
    let mut violations = Vec::new();
    let mut lyapunov_increases = Vec::new();
    let mut flag = |row: usize, t: f64, what: String| violations.push(Violation { row, t, what });
    for (row, r) in series.iter().enumerate() {
        let drift = (r.mass_u - first.mass_u).abs() / first.mass_u.abs().max(f64::MIN_POSITIVE);
        if drift > MASS_TOL {
            flag(row, r.t, format!("mass drift {drift:.3e}"));
        }
        if r.min_u < -NONNEG_SLACK {
            flag(row, r.t, format!("min u = {:.3e}", r.min_u));
        }
        if r.min_v < -NONNEG_SLACK {
            flag(row, r.t, format!("min v = {:.3e}", r.min_v));
        }
        if r.max_v > first.max_v + BOUND_TOL {
            flag(row, r.t, format!("max v = {:.15e} above initial {:.15e}", r.max_v, first.max_v));
        }
        match (r.min_w, r.max_w, first.max_w) {
            (Some(lo), Some(hi), Some(hi0)) => {
                if lo < -NONNEG_SLACK {
                    flag(row, r.t, format!("min w = {lo:.3e}"));
                }
                if hi > hi0 + BOUND_TOL {
                    flag(row, r.t, format!("max w = {hi:.15e} above initial {hi0:.15e}"));
                }
            }
            (None, None, None) => {}
            _ => flag(row, r.t, "w columns present in some rows only".into()),
        }
        if r.flags.is_violation() {
            flag(row, r.t, format!("flags {}", r.flags.names().join(";")));
        }
        if row > 0 {
            let prev = &series[row - 1];
            if !(r.t > prev.t) {
                flag(row, r.t, format!("time does not increase (previous {:.6e})", prev.t));
            }
            if let (Some(a), Some(b)) = (prev.lyapunov, r.lyapunov) {
                if b > a * (1.0 + LYAPUNOV_SLACK) {
                    lyapunov_increases.push(Violation {
                        row,
                        t: r.t,
                        what: format!("E_k {a:.6e} -> {b:.6e}"),
                    });
                }
            }
        }
    }
    Ok(CheckReport {
        rows: series.len(),
        violations,
        lyapunov_increases,
    })
}

pub fn check_file(path: &Path) -> Result<CheckReport, CheckError> {
    let file = std::fs::File::open(path).map_err(|e| CheckError::Csv(e.into()))?;
    check_series(&read_series(file)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chemotaxis_core::StepFlags;

    fn rec(t: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            mass_u: 2.0,
            min_u: 0.0,
            max_u: 5.0,
            min_v: 0.0,
            max_v: 1.0,
            min_w: Some(0.0),
            max_w: Some(1.0),
            lk_u: 1.0,
            lyapunov: Some(1.0),
            flags: StepFlags::default(),
        }
    }

    fn to_csv(series: &[DiagnosticsRecord]) -> String {
        let mut out = String::from("# header comment\n");
        out.push_str(&CSV_COLUMNS.join(","));
        out.push('\n');
        for r in series {
            out.push_str(&r.csv_fields().join(","));
            out.push('\n');
        }
        out
    }

    #[test]
    fn clean_series_passes_after_round_trip() {
        let s: Vec<_> = (0..5).map(|i| rec(i as f64)).collect();
        let back = read_series(to_csv(&s).as_bytes()).unwrap();
        assert_eq!(back, s);
        let report = check_series(&back).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.lyapunov_increases.is_empty());
    }

    #[test]
    fn each_invariant_is_detected() {
        type Edit = fn(&mut DiagnosticsRecord);
        let edits: [(Edit, &str); 8] = [
            (|r| r.mass_u *= 1.0 + 1e-7, "mass"),
            (|r| r.min_u = -1e-10, "min u"),
            (|r| r.min_v = -1e-10, "min v"),
            (|r| r.max_v = 1.0 + 1e-8, "max v"),
            (|r| r.min_w = Some(-1e-10), "min w"),
            (|r| r.max_w = Some(1.0 + 1e-8), "max w"),
            (|r| r.t = 0.5, "time"),
            (|r| r.flags.u_negative = true, "flags"),
        ];
        for (edit, what) in edits {
            let mut s: Vec<_> = (0..4).map(|i| rec(i as f64)).collect();
            edit(&mut s[2]);
            let report = check_series(&s).unwrap();
            assert_eq!(report.violations.len(), 1, "{what}: {report:?}");
            assert_eq!(report.violations[0].row, 2);
            assert!(report.violations[0].what.contains(what), "{what}: {report:?}");
        }
    }

    #[test]
    fn clamped_steps_are_not_violations() {
        let mut s: Vec<_> = (0..3).map(|i| rec(i as f64)).collect();
        s[1].flags.cfl_clamped = true;
        assert!(check_series(&s).unwrap().passed());
    }

    #[test]
    fn lyapunov_growth_is_reported_separately() {
        let mut s: Vec<_> = (0..3).map(|i| rec(i as f64)).collect();
        s[1].lyapunov = Some(1.0005);
        s[2].lyapunov = Some(1.1);
        let report = check_series(&s).unwrap();
        assert!(report.passed());
        assert_eq!(report.lyapunov_increases.len(), 1);
        assert_eq!(report.lyapunov_increases[0].row, 2);
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(read_series("a,b\n1,2\n".as_bytes()), Err(CheckError::Header { .. })));
        let bad = format!("{}\n1,2,3,4,5,6,,,7,,bogus_flag\n", CSV_COLUMNS.join(","));
        assert!(matches!(read_series(bad.as_bytes()), Err(CheckError::Row { row: 0, .. })));
        assert!(matches!(check_series(&[]), Err(CheckError::Empty)));
    }
}
