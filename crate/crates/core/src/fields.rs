//! Per-cell value storage for the unknowns and the simulation state.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Grid;
use crate::par;

/// Absolute round-off slack for fields that must be nonnegative.
pub const NONNEG_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("explicit table has {got} values, grid has {expected} active cells")]
    TableLength { expected: usize, got: usize },
    #[error("gaussian initial data needs amplitude >= 0 and sharpness > 0 (got {amplitude}, {sharpness})")]
    InvalidGaussian { amplitude: f64, sharpness: f64 },
    #[error("gaussian center has {got} coordinates, grid dimension is {expected}")]
    CenterDimension { expected: usize, got: usize },
    #[error("initial value {0} is negative or not finite")]
    InvalidValue(f64),
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Values of one unknown, one per active cell.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.num_active();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let n = grid.num_active();
        Self { grid, values: vec![value; n] }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.num_active() {
            return Err(FieldError::TableLength {
                expected: grid.num_active(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// Field with the same grid and new values; panics on length mismatch.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> ScalarField {
        assert_eq!(values.len(), self.grid.num_active());
        ScalarField {
            grid: Arc::clone(&self.grid),
            values,
        }
    }
}

/// Initial condition for one unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialData {
    /// `amplitude * exp(-sharpness * |x - center|^2)`.
    Gaussian {
        amplitude: f64,
        sharpness: f64,
        center: Vec<f64>,
    },
    Constant {
        value: f64,
    },
    /// One value per active cell, in active-cell order.
    Table {
        values: Vec<f64>,
    },
}

impl InitialData {
    pub fn gaussian(amplitude: f64, sharpness: f64, center: &[f64]) -> Self {
        InitialData::Gaussian {
            amplitude,
            sharpness,
            center: center.to_vec(),
        }
    }

    /// Checks the data against a grid dimension without sampling it.
    pub fn validate(&self, dim: usize) -> Result<(), FieldError> {
        match self {
            InitialData::Gaussian {
                amplitude,
                sharpness,
                center,
            } => {
                if !(*amplitude >= 0.0 && amplitude.is_finite() && *sharpness > 0.0 && sharpness.is_finite()) {
                    return Err(FieldError::InvalidGaussian {
                        amplitude: *amplitude,
                        sharpness: *sharpness,
                    });
                }
                if center.len() != dim {
                    return Err(FieldError::CenterDimension {
                        expected: dim,
                        got: center.len(),
                    });
                }
                Ok(())
            }
            InitialData::Constant { value } => {
                if !(*value >= 0.0 && value.is_finite()) {
                    return Err(FieldError::InvalidValue(*value));
                }
                Ok(())
            }
            InitialData::Table { values } => match values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                Some(v) => Err(FieldError::InvalidValue(*v)),
                None => Ok(()),
            },
        }
    }
}

/// Samples `data` at the active cell centers.
pub fn init_field(grid: &Arc<Grid>, data: &InitialData) -> Result<ScalarField, FieldError> {
    data.validate(grid.dim())?;
    match data {
        InitialData::Gaussian {
            amplitude,
            sharpness,
            center,
        } => {
            let g = grid.as_ref();
            let values = par::map_indexed(g.num_active(), |c| {
                let x = g.center(c);
                let r2: f64 = center.iter().zip(&x).map(|(c, x)| (x - c) * (x - c)).sum();
                amplitude * (-sharpness * r2).exp()
            });
            Ok(ScalarField {
                grid: Arc::clone(grid),
                values,
            })
        }
        InitialData::Constant { value } => Ok(ScalarField::constant(Arc::clone(grid), *value)),
        InitialData::Table { values } => ScalarField::from_values(Arc::clone(grid), values.clone()),
    }
}

/// Exact `(min, max)` over the active cells.
pub fn field_extrema(f: &ScalarField) -> (f64, f64) {
    let v = f.values();
    par::min_max_indexed(v.len(), |i| v[i])
}

/// The triple `(u, v, w)` plus time bookkeeping.
///
/// `v_sup0`/`w_sup0` are the maxima of the initial chemical fields; they are
/// fixed at construction and bound `v`, `w` for the whole run.
#[derive(Debug, Clone)]
pub struct SimState {
    pub u: ScalarField,
    pub v: ScalarField,
    pub w: Option<ScalarField>,
    pub t: f64,
    pub step: u64,
    v_sup0: f64,
    w_sup0: Option<f64>,
}

impl SimState {
    pub fn new(u: ScalarField, v: ScalarField, w: Option<ScalarField>) -> Result<Self, FieldError> {
        if !u.same_grid(&v) || w.as_ref().is_some_and(|w| !u.same_grid(w)) {
            return Err(FieldError::GridMismatch);
        }
        for f in std::iter::once(&u).chain(Some(&v)).chain(w.as_ref()) {
            let (lo, hi) = field_extrema(f);
            if lo < -NONNEG_SLACK || !hi.is_finite() {
                return Err(FieldError::InvalidValue(if hi.is_finite() { lo } else { hi }));
            }
        }
        let v_sup0 = field_extrema(&v).1;
        let w_sup0 = w.as_ref().map(|w| field_extrema(w).1);
        Ok(Self {
            u,
            v,
            w,
            t: 0.0,
            step: 0,
            v_sup0,
            w_sup0,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn v_sup0(&self) -> f64 {
        self.v_sup0
    }

    pub fn w_sup0(&self) -> Option<f64> {
        self.w_sup0
    }

    /// Replaces the fields, keeping the recorded initial maxima.
    pub(crate) fn advanced(&self, u: ScalarField, v: ScalarField, w: Option<ScalarField>, dt: f64) -> SimState {
        SimState {
            u,
            v,
            w,
            t: self.t + dt,
            step: self.step + 1,
            v_sup0: self.v_sup0,
            w_sup0: self.w_sup0,
        }
    }
}
