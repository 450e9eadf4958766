//! Executes scenarios and sweeps and compares 2D against 3D runs.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use chemotaxis_core::diagnostics::default_lyapunov_config;
use chemotaxis_core::fields::init_field;
use chemotaxis_core::geometry::build_grid;
use chemotaxis_core::par;
use chemotaxis_core::stepper::{run, RunError, RunObserver};
use chemotaxis_core::{DiagnosticsRecord, InitialData, RunOptions, SimState};
use serde::Serialize;
use thiserror::Error;

use crate::output::{self, SeriesWriter};
use crate::scenario::{member_label, HaltPolicy, Scenario, ScenarioError, SweepSpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("scenario `{scenario}`: {message}")]
    Setup { scenario: String, message: String },
    #[error("scenario `{scenario}`: {source}")]
    Run {
        scenario: String,
        #[source]
        source: RunError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for invalid input, 3 for an
    /// invariant halt, 4 for solver or diagnostics failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Scenario(ScenarioError::Io { .. }) | ExperimentError::Io { .. } => 1,
            ExperimentError::Scenario(_) | ExperimentError::Setup { .. } => 2,
            ExperimentError::Run { source, .. } => match source {
                RunError::Params(_) | RunError::InvalidCadence => 2,
                RunError::InvariantViolation { .. } => 3,
                RunError::Step { .. } | RunError::Diagnostics { .. } => 4,
                RunError::Observer { .. } => 1,
            },
        }
    }
}

/// Where a run writes its files.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputTarget {
    /// The scenario's `output_dir`, or `out/<name>`.
    Default,
    Dir(PathBuf),
    /// Keep everything in memory.
    Discard,
}

impl OutputTarget {
    fn resolve(&self, scenario: &Scenario) -> Option<PathBuf> {
        match self {
            OutputTarget::Default => Some(
                scenario
                    .output_dir
                    .clone()
                    .unwrap_or_else(|| Path::new("out").join(&scenario.name)),
            ),
            OutputTarget::Dir(d) => Some(d.clone()),
            OutputTarget::Discard => None,
        }
    }
}

/// JSON form of a diagnostics row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordJson {
    pub t: f64,
    pub mass_u: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub min_w: Option<f64>,
    pub max_w: Option<f64>,
    pub lk_u: f64,
    pub lyapunov: Option<f64>,
    pub flags: Vec<&'static str>,
}

impl From<&DiagnosticsRecord> for RecordJson {
    fn from(r: &DiagnosticsRecord) -> Self {
        Self {
            t: r.t,
            mass_u: r.mass_u,
            min_u: r.min_u,
            max_u: r.max_u,
            min_v: r.min_v,
            max_v: r.max_v,
            min_w: r.min_w,
            max_w: r.max_w,
            lk_u: r.lk_u,
            lyapunov: r.lyapunov,
            flags: r.flags.names(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub series: PathBuf,
    pub summary: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Halted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub status: RunStatus,
    pub dim: usize,
    pub cells_per_axis: Vec<usize>,
    pub active_cells: usize,
    pub chi: f64,
    pub xi: f64,
    pub u0: InitialData,
    pub v0: InitialData,
    pub steps: u64,
    pub clamped_steps: u64,
    pub solver_iterations: u64,
    pub peak_max_u: f64,
    pub peak_time: f64,
    pub final_record: RecordJson,
    pub wall_seconds: f64,
    pub outputs: Option<OutputPaths>,
}

/// A finished run: its summary and every recorded row.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub summary: RunSummary,
    pub series: Vec<DiagnosticsRecord>,
}

/// Time and value of the largest `max_u`; the earliest one on ties.
pub fn peak(series: &[DiagnosticsRecord]) -> (f64, f64) {
    series.iter().fold((f64::NAN, f64::NEG_INFINITY), |best, r| {
        if r.max_u > best.1 {
            (r.t, r.max_u)
        } else {
            best
        }
    })
}

pub fn initial_state(s: &Scenario) -> Result<SimState, ExperimentError> {
    let setup = |message: String| ExperimentError::Setup {
        scenario: s.name.clone(),
        message,
    };
    let grid = Arc::new(build_grid(&s.domain, &s.cells_per_axis).map_err(|e| setup(format!("grid: {e}")))?);
    let field = |what: &str, d: &InitialData| init_field(&grid, d).map_err(|e| setup(format!("{what}: {e}")));
    let u = field("u0", &s.u0)?;
    let v = field("v0", &s.v0)?;
    let w = s.w0.as_ref().map(|d| field("w0", d)).transpose()?;
    SimState::new(u, v, w).map_err(|e| setup(format!("initial state: {e}")))
}

pub fn run_options(s: &Scenario, initial: &SimState) -> Result<RunOptions, ExperimentError> {
    let k = s.lyapunov_k();
    let lyapunov = k
        .map(|k| default_lyapunov_config(&s.model, s.dim(), initial.v_sup0(), initial.w_sup0(), k))
        .transpose()
        .map_err(|e| ExperimentError::Setup {
            scenario: s.name.clone(),
            message: format!("lyapunov: {e}"),
        })?;
    Ok(RunOptions {
        cadence: s.cadence,
        halt_on_violation: s.halt == HaltPolicy::Halt,
        lk_exponent: k,
        lyapunov,
    })
}

struct FileObserver {
    dir: PathBuf,
    series: SeriesWriter,
    snapshot_every: Option<usize>,
    snapshots: Vec<PathBuf>,
    last_snapshot: Option<u64>,
}

impl FileObserver {
    fn snapshot(&mut self, state: &SimState) -> std::io::Result<()> {
        if self.last_snapshot != Some(state.step) {
            self.snapshots.push(output::write_snapshot(&self.dir, state)?);
            self.last_snapshot = Some(state.step);
        }
        Ok(())
    }
}

impl RunObserver for FileObserver {
    fn on_record(&mut self, state: &SimState, record: &DiagnosticsRecord) -> Result<(), String> {
        self.series.push(record).map_err(|e| e.to_string())?;
        let due = state.step == 0
            || record.flags.is_violation()
            || self.snapshot_every.is_some_and(|n| state.step % n as u64 == 0);
        if due {
            self.snapshot(state).map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

/// Runs `s`, writing outputs according to `target`. An invariant halt still
/// writes the series recorded so far and a summary with status `halted`.
pub fn run_scenario_to(s: &Scenario, target: &OutputTarget) -> Result<ScenarioRun, ExperimentError> {
    s.validate()?;
    let initial = initial_state(s)?;
    let options = run_options(s, &initial)?;
    let active_cells = initial.grid().num_active();
    let dir = target.resolve(s);
    let mut observer = match &dir {
        Some(dir) => {
            output::ensure_dir(dir).map_err(ExperimentError::io(dir))?;
            Some(FileObserver {
                dir: dir.clone(),
                series: SeriesWriter::create(dir, &s.name).map_err(ExperimentError::io(dir))?,
                snapshot_every: s.snapshot_every,
                snapshots: Vec::new(),
                last_snapshot: None,
            })
        }
        None => None,
    };

    let clock = Instant::now();
    let result = match observer.as_mut() {
        Some(obs) => run(initial, &s.model, &options, obs),
        None => run(initial, &s.model, &options, &mut chemotaxis_core::stepper::NoObserver),
    };
    let wall_seconds = clock.elapsed().as_secs_f64();

    let (status, series, steps, clamped_steps, solver_iterations, final_state, failure) = match result {
        Ok(out) => (
            RunStatus::Completed,
            out.series,
            out.steps,
            out.clamped_steps,
            out.total_solver_iterations,
            Some(out.final_state),
            None,
        ),
        Err(RunError::InvariantViolation { step, t, flags, series }) => (
            RunStatus::Halted,
            series.clone(),
            step,
            0,
            0,
            None,
            Some(RunError::InvariantViolation { step, t, flags, series }),
        ),
        Err(source) => {
            return Err(ExperimentError::Run {
                scenario: s.name.clone(),
                source,
            })
        }
    };

    let (peak_time, peak_max_u) = peak(&series);
    let mut summary = RunSummary {
        name: s.name.clone(),
        status,
        dim: s.dim(),
        cells_per_axis: s.cells_per_axis.clone(),
        active_cells,
        chi: s.model.chi,
        xi: s.model.xi,
        u0: s.u0.clone(),
        v0: s.v0.clone(),
        steps,
        clamped_steps,
        solver_iterations,
        peak_max_u,
        peak_time,
        final_record: series.last().expect("the initial state is always recorded").into(),
        wall_seconds,
        outputs: None,
    };

    if let (Some(dir), Some(mut obs)) = (dir, observer) {
        if let Some(state) = &final_state {
            obs.snapshot(state).map_err(ExperimentError::io(&dir))?;
        }
        let series_path = obs.series.finish().map_err(ExperimentError::io(&dir))?;
        let summary_path = dir.join(output::SUMMARY_FILE);
        summary.outputs = Some(OutputPaths {
            dir: dir.clone(),
            series: series_path,
            summary: summary_path.clone(),
            snapshots: obs.snapshots,
        });
        output::write_json(&summary_path, &summary).map_err(ExperimentError::io(&summary_path))?;
    }

    match failure {
        Some(source) => Err(ExperimentError::Run {
            scenario: s.name.clone(),
            source,
        }),
        None => Ok(ScenarioRun { summary, series }),
    }
}

pub fn run_scenario(s: &Scenario) -> Result<ScenarioRun, ExperimentError> {
    run_scenario_to(s, &OutputTarget::Default)
}

/// Outcome of one sweep member.
#[derive(Debug)]
pub struct SweepMember {
    pub value: f64,
    pub label: String,
    pub result: Result<ScenarioRun, ExperimentError>,
}

#[derive(Debug)]
pub struct SweepResult {
    pub members: Vec<SweepMember>,
    pub combined_csv: Option<PathBuf>,
    pub summary_csv: Option<PathBuf>,
}

pub const COMBINED_FILE: &str = "max_u.csv";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";

/// Runs every member concurrently, each in its own `<label>/` directory.
/// A failing member is recorded and does not stop the others.
pub fn run_sweep(spec: &SweepSpec, target: &OutputTarget) -> Result<SweepResult, ExperimentError> {
    spec.validate()?;
    let root = match target {
        OutputTarget::Default => Some(
            spec.output_dir
                .clone()
                .unwrap_or_else(|| Path::new("out").join(format!("{}_sweep", spec.base.name))),
        ),
        OutputTarget::Dir(d) => Some(d.clone()),
        OutputTarget::Discard => None,
    };
    let members = par::map_items(&spec.values, |&value| {
        let label = member_label(spec.parameter, value);
        let scenario = spec.member(value);
        let member_target = match &root {
            Some(r) => OutputTarget::Dir(r.join(&label)),
            None => OutputTarget::Discard,
        };
        let result = run_scenario_to(&scenario, &member_target);
        SweepMember { value, label, result }
    });

    let (mut combined_csv, mut summary_csv) = (None, None);
    if let Some(root) = root {
        output::ensure_dir(&root).map_err(ExperimentError::io(&root))?;
        let path = root.join(COMBINED_FILE);
        write_combined(&path, &members).map_err(ExperimentError::io(&path))?;
        combined_csv = Some(path);
        let path = root.join(SWEEP_SUMMARY_FILE);
        write_sweep_summary(&path, &members).map_err(ExperimentError::io(&path))?;
        summary_csv = Some(path);
    }
    Ok(SweepResult {
        members,
        combined_csv,
        summary_csv,
    })
}

/// One row per record index: `record`, then `t_<label>` and `max_u_<label>`
/// for each member. Members that stopped early leave trailing cells empty.
fn write_combined(path: &Path, members: &[SweepMember]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    let mut header = vec!["record".to_string()];
    for m in members {
        header.push(format!("t_{}", m.label));
        header.push(format!("max_u_{}", m.label));
    }
    out.write_record(&header)?;
    let empty: &[DiagnosticsRecord] = &[];
    let series: Vec<&[DiagnosticsRecord]> = members
        .iter()
        .map(|m| m.result.as_ref().map_or(empty, |r| r.series.as_slice()))
        .collect();
    let rows = series.iter().map(|s| s.len()).max().unwrap_or(0);
    for i in 0..rows {
        let mut row = vec![i.to_string()];
        for s in &series {
            match s.get(i) {
                Some(r) => {
                    row.push(format!("{:.14e}", r.t));
                    row.push(format!("{:.14e}", r.max_u));
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        out.write_record(&row)?;
    }
    out.flush()
}

fn write_sweep_summary(path: &Path, members: &[SweepMember]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["member", "value", "status", "peak_time", "peak_max_u", "final_max_u", "steps", "error"])?;
    for m in members {
        let row = match &m.result {
            Ok(r) => vec![
                m.label.clone(),
                m.value.to_string(),
                "completed".to_string(),
                format!("{:.14e}", r.summary.peak_time),
                format!("{:.14e}", r.summary.peak_max_u),
                format!("{:.14e}", r.summary.final_record.max_u),
                r.summary.steps.to_string(),
                String::new(),
            ],
            Err(e) => vec![
                m.label.clone(),
                m.value.to_string(),
                "failed".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.to_string(),
            ],
        };
        out.write_record(&row)?;
    }
    out.flush()
}

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("no {0}D run among the summaries")]
    MissingRun(usize),
    #[error("expected one 2D and one 3D summary, got dimensions {0:?}")]
    DimensionMismatch(Vec<usize>),
    #[error("runs differ in {0}")]
    IncompatibleRuns(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Both orderings hold.
    Confirmed,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub peak_time_2d: f64,
    pub peak_time_3d: f64,
    pub peak_max_u_2d: f64,
    pub peak_max_u_3d: f64,
    /// The 2D peak comes strictly first.
    pub earlier_in_2d: bool,
    /// The 3D peak is strictly higher.
    pub larger_in_3d: bool,
    pub verdict: Verdict,
}

impl Comparison {
    pub fn table(&self) -> String {
        let yes = |b: bool| if b { "yes" } else { "no" };
        format!(
            "          peak_time        peak_max_u\n\
             2D  {:>15.6e} {:>17.6e}\n\
             3D  {:>15.6e} {:>17.6e}\n\
             2D peak earlier: {}\n\
             3D peak larger:  {}\n\
             verdict: {:?}",
            self.peak_time_2d,
            self.peak_max_u_2d,
            self.peak_time_3d,
            self.peak_max_u_3d,
            yes(self.earlier_in_2d),
            yes(self.larger_in_3d),
            self.verdict,
        )
    }
}

fn bell_shape(d: &InitialData) -> Option<(f64, f64)> {
    match d {
        InitialData::Gaussian { amplitude, sharpness, .. } => Some((*amplitude, *sharpness)),
        _ => None,
    }
}

/// Peak times and values of one 2D and one 3D run, in either order.
pub fn compare_2d_3d(summaries: &[&RunSummary]) -> Result<Comparison, CompareError> {
    let dims: Vec<usize> = summaries.iter().map(|s| s.dim).collect();
    let find = |d: usize| summaries.iter().filter(|s| s.dim == d).copied().collect::<Vec<_>>();
    let (two, three) = (find(2), find(3));
    if two.len() > 1 || three.len() > 1 || two.len() + three.len() != summaries.len() {
        return Err(CompareError::DimensionMismatch(dims));
    }
    let a = *two.first().ok_or(CompareError::MissingRun(2))?;
    let b = *three.first().ok_or(CompareError::MissingRun(3))?;
    if a.chi != b.chi {
        return Err(CompareError::IncompatibleRuns("chi"));
    }
    if bell_shape(&a.u0) != bell_shape(&b.u0) || bell_shape(&a.v0) != bell_shape(&b.v0) {
        return Err(CompareError::IncompatibleRuns("initial data"));
    }
    let earlier_in_2d = a.peak_time < b.peak_time;
    let larger_in_3d = b.peak_max_u > a.peak_max_u;
    Ok(Comparison {
        peak_time_2d: a.peak_time,
        peak_time_3d: b.peak_time,
        peak_max_u_2d: a.peak_max_u,
        peak_max_u_3d: b.peak_max_u,
        earlier_in_2d,
        larger_in_3d,
        verdict: if earlier_in_2d && larger_in_3d {
            Verdict::Confirmed
        } else {
            Verdict::Inconclusive
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chemotaxis_core::StepFlags;

    fn rec(t: f64, max_u: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            mass_u: 1.0,
            min_u: 0.0,
            max_u,
            min_v: 0.0,
            max_v: 1.0,
            min_w: None,
            max_w: None,
            lk_u: 1.0,
            lyapunov: None,
            flags: StepFlags::default(),
        }
    }

    fn summary(dim: usize, peak_time: f64, peak_max_u: f64) -> RunSummary {
        RunSummary {
            name: format!("s{dim}"),
            status: RunStatus::Completed,
            dim,
            cells_per_axis: vec![8; dim],
            active_cells: 0,
            chi: 20.0,
            xi: 0.0,
            u0: InitialData::gaussian(20.0, 30.0, &vec![0.0; dim]),
            v0: InitialData::gaussian(20.0, 30.0, &vec![0.0; dim]),
            steps: 1,
            clamped_steps: 0,
            solver_iterations: 0,
            peak_max_u,
            peak_time,
            final_record: (&rec(1.0, 1.0)).into(),
            wall_seconds: 0.0,
            outputs: None,
        }
    }

    #[test]
    fn peak_prefers_the_first_maximum() {
        let s = [rec(0.0, 1.0), rec(1.0, 3.0), rec(2.0, 3.0), rec(3.0, 2.0)];
        assert_eq!(peak(&s), (1.0, 3.0));
    }

    #[test]
    fn comparison_orderings() {
        let (a, b) = (summary(2, 1e-4, 500.0), summary(3, 5e-3, 900.0));
        let c = compare_2d_3d(&[&b, &a]).unwrap();
        assert_eq!(c.verdict, Verdict::Confirmed);
        assert!(c.earlier_in_2d && c.larger_in_3d);
        assert!(c.table().contains("verdict: Confirmed"));

        let mut same = a.clone();
        same.dim = 3;
        same.u0 = b.u0.clone();
        same.v0 = b.v0.clone();
        let c = compare_2d_3d(&[&a, &same]).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert!(!c.earlier_in_2d && !c.larger_in_3d);
    }

    #[test]
    fn comparison_errors() {
        let (a, b) = (summary(2, 1e-4, 500.0), summary(3, 5e-3, 900.0));
        assert_eq!(compare_2d_3d(&[&a]), Err(CompareError::MissingRun(3)));
        assert_eq!(compare_2d_3d(&[&b]), Err(CompareError::MissingRun(2)));
        assert_eq!(compare_2d_3d(&[&a, &b, &b]), Err(CompareError::DimensionMismatch(vec![2, 3, 3])));
        assert_eq!(compare_2d_3d(&[&a, &a]), Err(CompareError::DimensionMismatch(vec![2, 2])));
        let mut other = b.clone();
        other.chi = 5.0;
        assert_eq!(compare_2d_3d(&[&a, &other]), Err(CompareError::IncompatibleRuns("chi")));
        let mut other = b.clone();
        other.u0 = InitialData::gaussian(1.0, 30.0, &[0.0; 3]);
        assert_eq!(compare_2d_3d(&[&a, &other]), Err(CompareError::IncompatibleRuns("initial data")));
    }
}
