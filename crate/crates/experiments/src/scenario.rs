//! Scenario and sweep documents.
//!
//! A scenario file is a JSON object. It may name a built-in preset under
//! `"extends"`; the remaining keys are then merged over that preset before
//! parsing, so `{"extends": "circle2d", "cells_per_axis": [64, 64]}` is a
//! coarser copy of `circle2d`. See `docs/scenario.md` for the full schema.

use std::fs;
use std::path::{Path, PathBuf};

use chemotaxis_core::diagnostics::default_k;
use chemotaxis_core::stepper::ParamsError;
use chemotaxis_core::{DomainSpec, InitialData, ModelParams, ModelVariant};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::presets;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("unknown preset `{0}` (see `chemotaxis presets`)")]
    UnknownPreset(String),
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, message: impl ToString) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            message: message.to_string(),
        }
    }

    fn parse(origin: &str, err: serde_json::Error) -> Self {
        ScenarioError::Parse {
            origin: origin.to_string(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltPolicy {
    /// Stop at the first step that breaks an invariant.
    #[default]
    Halt,
    /// Flag the step in the series and keep going.
    Continue,
}

/// Weighted functional to record alongside the standard diagnostics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSpec {
    /// Defaults to `dim/2 + 0.5`.
    #[serde(default)]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub domain: DomainSpec,
    pub cells_per_axis: Vec<usize>,
    pub model: ModelParams,
    pub u0: InitialData,
    pub v0: InitialData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<InitialData>,
    /// Diagnostics are recorded every `cadence` steps.
    #[serde(default = "one")]
    pub cadence: usize,
    /// VTK snapshots every this many steps; `None` writes only the initial
    /// and final fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    /// Relative paths resolve against the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub halt: HaltPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovSpec>,
}

fn one() -> usize {
    1
}

impl Scenario {
    /// Checks every field; the error names the first offending one.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.trim().is_empty() {
            return Err(ScenarioError::invalid("name", "must not be empty"));
        }
        if self.name.contains(['/', '\\']) {
            return Err(ScenarioError::invalid("name", "must not contain path separators"));
        }
        let dim = self.domain.validate().map_err(|e| ScenarioError::invalid("domain", e))?;
        if self.cells_per_axis.len() != dim {
            return Err(ScenarioError::invalid(
                "cells_per_axis",
                format!("expected {dim} entries, got {}", self.cells_per_axis.len()),
            ));
        }
        if let Some(&n) = self.cells_per_axis.iter().find(|&&n| n < chemotaxis_core::geometry::MIN_CELLS_PER_AXIS) {
            return Err(ScenarioError::invalid(
                "cells_per_axis",
                format!("need at least {} cells per axis, got {n}", chemotaxis_core::geometry::MIN_CELLS_PER_AXIS),
            ));
        }
        self.model.validate().map_err(|e| {
            let field = match &e {
                ParamsError::OutOfRange { field, .. } => format!("model.{field}"),
                ParamsError::XiInAttractionOnly(_) => "model.xi".to_string(),
                ParamsError::StateShape { .. } => "model.variant".to_string(),
            };
            ScenarioError::invalid(field, e)
        })?;
        for (field, data) in [("u0", Some(&self.u0)), ("v0", Some(&self.v0)), ("w0", self.w0.as_ref())] {
            if let Some(data) = data {
                data.validate(dim).map_err(|e| ScenarioError::invalid(field, e))?;
            }
        }
        match (self.model.variant, &self.w0) {
            (ModelVariant::AttractionRepulsion, None) => {
                return Err(ScenarioError::invalid("w0", "required by the attraction_repulsion model"))
            }
            (ModelVariant::AttractionOnly, Some(_)) => {
                return Err(ScenarioError::invalid("w0", "not used by the attraction_only model"))
            }
            _ => {}
        }
        if self.cadence == 0 {
            return Err(ScenarioError::invalid("cadence", "must be >= 1"));
        }
        if let Some(n) = self.snapshot_every {
            if n == 0 || n % self.cadence != 0 {
                return Err(ScenarioError::invalid(
                    "snapshot_every",
                    format!("must be a positive multiple of cadence = {}, got {n}", self.cadence),
                ));
            }
        }
        if let Some(LyapunovSpec { k: Some(k) }) = &self.lyapunov {
            if !(*k > dim as f64 / 2.0 && k.is_finite()) {
                return Err(ScenarioError::invalid("lyapunov.k", format!("must exceed n/2 = {}, got {k}", dim as f64 / 2.0)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.cells_per_axis.len()
    }

    pub fn lyapunov_k(&self) -> Option<f64> {
        self.lyapunov.as_ref().map(|l| l.k.unwrap_or_else(|| default_k(self.dim())))
    }
}

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Xi,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub base: Scenario,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepDoc {
    /// A preset name or an inline scenario object.
    base: Value,
    parameter: SweepParameter,
    values: Vec<f64>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.base.validate().map_err(|e| match e {
            ScenarioError::Invalid { field, message } => ScenarioError::Invalid {
                field: format!("base.{field}"),
                message,
            },
            other => other,
        })?;
        if self.values.is_empty() {
            return Err(ScenarioError::invalid("values", "must not be empty"));
        }
        if let Some(v) = self.values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(ScenarioError::invalid("values", format!("must be finite and >= 0, got {v}")));
        }
        if self.parameter == SweepParameter::Xi && self.base.model.variant != ModelVariant::AttractionRepulsion {
            return Err(ScenarioError::invalid("base.model.variant", "a xi sweep needs attraction_repulsion"));
        }
        Ok(())
    }

    /// The base scenario with the swept parameter set to `value`.
    pub fn member(&self, value: f64) -> Scenario {
        let mut s = self.base.clone();
        match self.parameter {
            SweepParameter::Xi => s.model.xi = value,
        }
        s.name = format!("{}_{}", s.name, member_label(self.parameter, value));
        s
    }
}

/// Directory and column label for one sweep member, e.g. `xi_5`.
pub fn member_label(parameter: SweepParameter, value: f64) -> String {
    let name = match parameter {
        SweepParameter::Xi => "xi",
    };
    format!("{name}_{value}")
}

/// Recursively overlays `patch` on `base`; objects merge key by key and
/// everything else is replaced.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, patch) => *slot = patch,
    }
}

/// Builds a scenario from a parsed JSON value, resolving `extends`.
pub fn scenario_from_value(mut value: Value, origin: &str) -> Result<Scenario, ScenarioError> {
    if let Some(obj) = value.as_object_mut() {
        if let Some(parent) = obj.remove("extends") {
            let name = parent
                .as_str()
                .ok_or_else(|| ScenarioError::invalid("extends", "must be a preset name"))?;
            let preset = presets::preset(name).ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))?;
            let mut base = serde_json::to_value(preset).expect("presets serialize");
            merge(&mut base, value);
            value = base;
        }
    }
    let scenario: Scenario = serde_json::from_value(value).map_err(|e| {
        // Values carry no positions; report the message against the origin.
        ScenarioError::Parse {
            origin: origin.to_string(),
            line: 0,
            column: 0,
            message: e.to_string(),
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Parses a scenario document. Syntax and schema errors carry line info
/// whenever the document has no `extends` key.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ScenarioError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ScenarioError::parse(origin, e))?;
    if value.get("extends").is_none() {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::parse(origin, e))?;
        scenario.validate()?;
        return Ok(scenario);
    }
    scenario_from_value(value, origin)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

/// A path to a scenario file, or the name of a preset when no such file
/// exists.
pub fn resolve_scenario(arg: &str) -> Result<Scenario, ScenarioError> {
    let path = Path::new(arg);
    if path.is_file() {
        return load_scenario(path);
    }
    presets::preset(arg).ok_or_else(|| ScenarioError::UnknownPreset(arg.to_string()))
}

pub fn parse_sweep(text: &str, origin: &str) -> Result<SweepSpec, ScenarioError> {
    let doc: SweepDoc = serde_json::from_str(text).map_err(|e| ScenarioError::parse(origin, e))?;
    let base = match doc.base {
        Value::String(name) => presets::preset(&name).ok_or(ScenarioError::UnknownPreset(name))?,
        other => scenario_from_value(other, origin).map_err(|e| match e {
            ScenarioError::Invalid { field, message } => ScenarioError::Invalid {
                field: format!("base.{field}"),
                message,
            },
            other => other,
        })?,
    };
    let spec = SweepSpec {
        base,
        parameter: doc.parameter,
        values: doc.values,
        output_dir: doc.output_dir,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_sweep(&text, &path.display().to_string())
}
