//! Two-stage splitting step and the run loop.
//!
//! Stage 1 advances the consumed signals with implicit Euler, `u` frozen at
//! the old level: `(I + dt diag(u^n) - dt L) v^{n+1} = v^n`, likewise for `w`.
//! Stage 2 moves `u` with the donor-cell taxis flux built from the new signal
//! gradients, then applies one implicit diffusion solve:
//! `(I - dt L) u^{n+1} = u^n + dt * taxis(u^n, v^{n+1}, w^{n+1})`.
//!
//! The step size is reduced when the new signals would make the explicit
//! taxis update non-monotone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{self, DiagnosticsRecord, LyapunovConfig};
use crate::fields::{field_extrema, ScalarField, SimState};
use crate::linsolve::{self, HelmholtzOperator, SolveError, SolveReport};
use crate::operators;
use crate::par;

/// Absolute tolerance for the bound checks on `u`, `v`, `w`.
pub const BOUND_TOL: f64 = 1e-9;
/// Relative tolerance on the change of total `u` mass since `t = 0`.
pub const MASS_TOL: f64 = 1e-8;
pub const DEFAULT_CFL_SAFETY: f64 = 0.9;

const MAX_CLAMP_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// `u, v` only: attraction towards a consumed signal.
    AttractionOnly,
    /// `u, v, w`: attraction to `v`, repulsion from `w`, both consumed.
    AttractionRepulsion,
}

fn default_cfl_safety() -> f64 {
    DEFAULT_CFL_SAFETY
}

fn default_tol() -> f64 {
    linsolve::DEFAULT_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// `None` selects [`linsolve::default_max_iter`].
    #[serde(default)]
    pub max_iter: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: linsolve::DEFAULT_TOL,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub variant: ModelVariant,
    pub chi: f64,
    #[serde(default)]
    pub xi: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_cfl_safety")]
    pub cfl_safety: f64,
    #[serde(default)]
    pub solver: SolverSettings,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("{field} must be {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("attraction-only model requires xi = 0, got {0}")]
    XiInAttractionOnly(f64),
    #[error("state has {state} but the {variant:?} model {expects}")]
    StateShape {
        variant: ModelVariant,
        state: &'static str,
        expects: &'static str,
    },
}

impl ModelParams {
    pub fn attraction_only(chi: f64, dt: f64, t_end: f64) -> Self {
        Self {
            variant: ModelVariant::AttractionOnly,
            chi,
            xi: 0.0,
            dt,
            t_end,
            cfl_safety: DEFAULT_CFL_SAFETY,
            solver: SolverSettings::default(),
        }
    }

    pub fn attraction_repulsion(chi: f64, xi: f64, dt: f64, t_end: f64) -> Self {
        Self {
            variant: ModelVariant::AttractionRepulsion,
            xi,
            ..Self::attraction_only(chi, dt, t_end)
        }
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let check = |field, ok: bool, requirement, value| {
            if ok {
                Ok(())
            } else {
                Err(ParamsError::OutOfRange {
                    field,
                    requirement,
                    value,
                })
            }
        };
        check("chi", self.chi >= 0.0 && self.chi.is_finite(), "finite and >= 0", self.chi)?;
        check("xi", self.xi >= 0.0 && self.xi.is_finite(), "finite and >= 0", self.xi)?;
        check("dt", self.dt > 0.0 && self.dt.is_finite(), "finite and > 0", self.dt)?;
        check("t_end", self.t_end > 0.0 && self.t_end.is_finite(), "finite and > 0", self.t_end)?;
        check(
            "cfl_safety",
            self.cfl_safety > 0.0 && self.cfl_safety <= 1.0,
            "in (0, 1]",
            self.cfl_safety,
        )?;
        check(
            "solver.tol",
            self.solver.tol > 0.0 && self.solver.tol < 1.0,
            "in (0, 1)",
            self.solver.tol,
        )?;
        if self.variant == ModelVariant::AttractionOnly && self.xi != 0.0 {
            return Err(ParamsError::XiInAttractionOnly(self.xi));
        }
        Ok(())
    }

    fn check_state(&self, state: &SimState) -> Result<(), ParamsError> {
        match (self.variant, state.w.is_some()) {
            (ModelVariant::AttractionOnly, true) => Err(ParamsError::StateShape {
                variant: self.variant,
                state: "a w field",
                expects: "has no w",
            }),
            (ModelVariant::AttractionRepulsion, false) => Err(ParamsError::StateShape {
                variant: self.variant,
                state: "no w field",
                expects: "needs w",
            }),
            _ => Ok(()),
        }
    }

    fn max_iter(&self, state: &SimState) -> usize {
        self.solver
            .max_iter
            .unwrap_or_else(|| linsolve::default_max_iter(state.grid()))
    }
}

/// Conditions raised by a step or accumulated between two records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepFlags {
    pub cfl_clamped: bool,
    pub u_negative: bool,
    pub v_out_of_bounds: bool,
    pub w_out_of_bounds: bool,
    pub mass_drift: bool,
}

impl StepFlags {
    pub const NAMES: [&'static str; 5] = [
        "cfl_clamped",
        "u_negative",
        "v_out_of_bounds",
        "w_out_of_bounds",
        "mass_drift",
    ];

    fn bits(&self) -> [bool; 5] {
        [
            self.cfl_clamped,
            self.u_negative,
            self.v_out_of_bounds,
            self.w_out_of_bounds,
            self.mass_drift,
        ]
    }

    /// Any flag other than `cfl_clamped`.
    pub fn is_violation(&self) -> bool {
        self.u_negative || self.v_out_of_bounds || self.w_out_of_bounds || self.mass_drift
    }

    pub fn names(&self) -> Vec<&'static str> {
        Self::NAMES
            .iter()
            .zip(self.bits())
            .filter_map(|(n, set)| set.then_some(*n))
            .collect()
    }

    pub fn parse(name: &str) -> Option<fn(&mut StepFlags)> {
        Some(match name {
            "cfl_clamped" => |f: &mut StepFlags| f.cfl_clamped = true,
            "u_negative" => |f: &mut StepFlags| f.u_negative = true,
            "v_out_of_bounds" => |f: &mut StepFlags| f.v_out_of_bounds = true,
            "w_out_of_bounds" => |f: &mut StepFlags| f.w_out_of_bounds = true,
            "mass_drift" => |f: &mut StepFlags| f.mass_drift = true,
            _ => return None,
        })
    }

    pub fn merge(&mut self, other: StepFlags) {
        self.cfl_clamped |= other.cfl_clamped;
        self.u_negative |= other.u_negative;
        self.v_out_of_bounds |= other.v_out_of_bounds;
        self.w_out_of_bounds |= other.w_out_of_bounds;
        self.mass_drift |= other.mass_drift;
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SimState,
    pub dt: f64,
    pub v_report: SolveReport,
    pub w_report: Option<SolveReport>,
    pub u_report: SolveReport,
    pub flags: StepFlags,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("{stage} solve failed: {source}")]
    Solve {
        stage: &'static str,
        #[source]
        source: SolveError,
    },
}

struct ChemicalStage {
    v: ScalarField,
    w: Option<ScalarField>,
    v_report: SolveReport,
    w_report: Option<SolveReport>,
}

fn solve_chemicals(
    state: &SimState,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ChemicalStage, StepError> {
    let grid = state.grid();
    let op = HelmholtzOperator::new(grid, dt, Some(&state.u))
        .map_err(|source| StepError::Solve { stage: "v", source })?;
    let solve_v = || linsolve::solve_spd(&op, &state.v, tol, max_iter);
    let solve_w = || state.w.as_ref().map(|w| linsolve::solve_spd(&op, w, tol, max_iter));
    let (v, w) = par::join(solve_v, solve_w);
    let (v, v_report) = v.map_err(|source| StepError::Solve { stage: "v", source })?;
    let (w, w_report) = match w {
        Some(res) => {
            let (w, rep) = res.map_err(|source| StepError::Solve { stage: "w", source })?;
            (Some(w), Some(rep))
        }
        None => (None, None),
    };
    Ok(ChemicalStage {
        v,
        w,
        v_report,
        w_report,
    })
}

/// Advances `state` by at most `params.dt`.
pub fn step(state: &SimState, params: &ModelParams) -> Result<StepOutcome, StepError> {
    step_with_limit(state, params, params.dt)
}

/// One step with requested size `dt_request` (`<= params.dt` in the run loop).
pub fn step_with_limit(state: &SimState, params: &ModelParams, dt_request: f64) -> Result<StepOutcome, StepError> {
    params.validate()?;
    params.check_state(state)?;
    let grid = state.grid();
    let tol = params.solver.tol;
    let max_iter = params.max_iter(state);
    let (chi, xi) = match params.variant {
        ModelVariant::AttractionOnly => (params.chi, 0.0),
        ModelVariant::AttractionRepulsion => (params.chi, params.xi),
    };

    let mut dt = dt_request;
    let mut clamped = false;
    let mut chem = solve_chemicals(state, dt, tol, max_iter)?;
    let mut velocity = operators::face_velocities(grid, &chem.v, chem.w.as_ref(), chi, xi);
    for _ in 0..MAX_CLAMP_ATTEMPTS {
        let cfl = operators::cfl_from_velocities(grid, &velocity);
        let limit = params.cfl_safety * cfl;
        // Accept once within the safety margin, or within the hard monotonicity
        // bound after a reduction.
        if dt <= limit || (clamped && dt <= cfl) {
            break;
        }
        dt = limit;
        clamped = true;
        chem = solve_chemicals(state, dt, tol, max_iter)?;
        velocity = operators::face_velocities(grid, &chem.v, chem.w.as_ref(), chi, xi);
    }

    let fluxes = operators::upwind_fluxes(grid, &state.u, &velocity);
    let inflow = fluxes.net_inflow(grid);
    let scale = dt / grid.cell_volume();
    let u_old = state.u.values();
    let u_star = state.u.with_values(par::map_indexed(u_old.len(), |c| u_old[c] + scale * inflow[c]));
    let heat = HelmholtzOperator::new(grid, dt, None).map_err(|source| StepError::Solve { stage: "u", source })?;
    let (u_new, u_report) =
        linsolve::solve_spd(&heat, &u_star, tol, max_iter).map_err(|source| StepError::Solve { stage: "u", source })?;

    let mut flags = StepFlags {
        cfl_clamped: clamped,
        ..StepFlags::default()
    };
    let (u_min, _) = field_extrema(&u_new);
    flags.u_negative = u_min < -BOUND_TOL;
    let (_, v_old_max) = field_extrema(&state.v);
    let (v_min, v_max) = field_extrema(&chem.v);
    flags.v_out_of_bounds = v_min < -BOUND_TOL || v_max > v_old_max + BOUND_TOL;
    if let (Some(w_old), Some(w_new)) = (&state.w, &chem.w) {
        let (_, w_old_max) = field_extrema(w_old);
        let (w_min, w_max) = field_extrema(w_new);
        flags.w_out_of_bounds = w_min < -BOUND_TOL || w_max > w_old_max + BOUND_TOL;
    }
    let m_old = diagnostics::mass(&state.u);
    let m_new = diagnostics::mass(&u_new);
    flags.mass_drift = (m_new - m_old).abs() > MASS_TOL * m_old.abs().max(f64::MIN_POSITIVE);

    let new_state = state.advanced(u_new, chem.v, chem.w, dt);
    Ok(StepOutcome {
        state: new_state,
        dt,
        v_report: chem.v_report,
        w_report: chem.w_report,
        u_report,
        flags,
    })
}

/// Run-loop settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Record diagnostics every `cadence` steps (plus the initial and final
    /// state).
    pub cadence: usize,
    pub halt_on_violation: bool,
    /// Exponent of the recorded `L^k` norm; `None` uses `dim/2 + 0.5`.
    pub lk_exponent: Option<f64>,
    /// Weighted functional to record; `None` records no value.
    pub lyapunov: Option<LyapunovConfig>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            cadence: 1,
            halt_on_violation: true,
            lk_exponent: None,
            lyapunov: None,
        }
    }
}

/// Receives every recorded state.
pub trait RunObserver {
    fn on_record(&mut self, state: &SimState, record: &DiagnosticsRecord) -> Result<(), String>;
}

pub struct NoObserver;

impl RunObserver for NoObserver {
    fn on_record(&mut self, _: &SimState, _: &DiagnosticsRecord) -> Result<(), String> {
        Ok(())
    }
}

impl<F> RunObserver for F
where
    F: FnMut(&SimState, &DiagnosticsRecord) -> Result<(), String>,
{
    fn on_record(&mut self, state: &SimState, record: &DiagnosticsRecord) -> Result<(), String> {
        self(state, record)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: SimState,
    pub series: Vec<DiagnosticsRecord>,
    pub steps: u64,
    pub clamped_steps: u64,
    pub total_solver_iterations: u64,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("step {step} (t = {t:.6e}): {source}")]
    Step {
        step: u64,
        t: f64,
        #[source]
        source: StepError,
    },
    #[error("invariant violation at step {step} (t = {t:.6e}): {}", .flags.names().join(";"))]
    InvariantViolation {
        step: u64,
        t: f64,
        flags: StepFlags,
        /// Everything recorded up to and including the offending step.
        series: Vec<DiagnosticsRecord>,
    },
    #[error("diagnostics failed at step {step}: {source}")]
    Diagnostics {
        step: u64,
        #[source]
        source: diagnostics::DiagnosticsError,
    },
    #[error("observer failed at step {step}: {message}")]
    Observer { step: u64, message: String },
    #[error("cadence must be >= 1")]
    InvalidCadence,
}

/// Steps `initial` until `t_end`, recording diagnostics at the configured
/// cadence. The final step is shortened to land on `t_end`.
pub fn run(
    initial: SimState,
    params: &ModelParams,
    options: &RunOptions,
    observer: &mut dyn RunObserver,
) -> Result<RunOutput, RunError> {
    params.validate()?;
    params.check_state(&initial)?;
    if options.cadence == 0 {
        return Err(RunError::InvalidCadence);
    }
    let k = options
        .lk_exponent
        .unwrap_or_else(|| diagnostics::default_k(initial.grid().dim()));
    let mass0 = diagnostics::mass(&initial.u);
    let record = |state: &SimState, flags: StepFlags| {
        diagnostics::record(state, k, options.lyapunov.as_ref(), flags)
            .map_err(|source| RunError::Diagnostics { step: state.step, source })
    };

    let mut series = Vec::new();
    let first = record(&initial, StepFlags::default())?;
    observer
        .on_record(&initial, &first)
        .map_err(|message| RunError::Observer { step: 0, message })?;
    series.push(first);

    let mut state = initial;
    let mut pending = StepFlags::default();
    let mut clamped_steps = 0;
    let mut iterations = 0u64;
    let finish_slack = 1e-9 * params.dt;
    while params.t_end - state.t > finish_slack {
        let dt_request = params.dt.min(params.t_end - state.t);
        let outcome = step_with_limit(&state, params, dt_request).map_err(|source| RunError::Step {
            step: state.step + 1,
            t: state.t,
            source,
        })?;
        iterations += (outcome.v_report.iterations
            + outcome.w_report.as_ref().map_or(0, |r| r.iterations)
            + outcome.u_report.iterations) as u64;
        let mut flags = outcome.flags;
        // Cumulative drift since t = 0, not only across this step.
        let m = diagnostics::mass(&outcome.state.u);
        flags.mass_drift |= (m - mass0).abs() > MASS_TOL * mass0.abs().max(f64::MIN_POSITIVE);
        if flags.cfl_clamped {
            clamped_steps += 1;
        }
        pending.merge(flags);
        state = outcome.state;

        let done = params.t_end - state.t <= finish_slack;
        let violation = flags.is_violation() && options.halt_on_violation;
        if state.step % options.cadence as u64 == 0 || done || violation {
            let rec = record(&state, pending)?;
            observer
                .on_record(&state, &rec)
                .map_err(|message| RunError::Observer { step: state.step, message })?;
            series.push(rec);
            pending = StepFlags::default();
        }
        if violation {
            return Err(RunError::InvariantViolation {
                step: state.step,
                t: state.t,
                flags,
                series,
            });
        }
    }

    Ok(RunOutput {
        steps: state.step,
        final_state: state,
        series,
        clamped_steps,
        total_solver_iterations: iterations,
    })
}
