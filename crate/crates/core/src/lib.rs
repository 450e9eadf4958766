//! Finite-volume solver for chemotaxis systems with consumed signals.
//!
//! The attraction-repulsion model
//!
//! ```text
//! u_t = Δu − χ ∇·(u ∇v) + ξ ∇·(u ∇w)
//! v_t = Δv − u v
//! w_t = Δw − u w
//! ```
//!
//! and its attraction-only reduction (no `w`) are integrated on structured,
//! masked grids with zero-flux boundaries. The scheme keeps the discrete
//! analogues of mass conservation, `0 <= v <= max v0`, `0 <= w <= max w0` and
//! `u >= 0`; [`diagnostics`] measures them together with the weighted
//! functional and coefficient thresholds that the boundedness theory uses.
//!
//! Loops over cells and faces run on rayon when the `parallel` feature is
//! enabled (the default); reductions are chunked so that both builds produce
//! bit-identical results.

pub mod diagnostics;
pub mod dump;
pub mod fields;
pub mod geometry;
pub mod linsolve;
pub mod operators;
pub mod par;
pub mod stepper;

pub use diagnostics::{DiagnosticsRecord, LyapunovConfig, ThresholdReport};
pub use fields::{InitialData, ScalarField, SimState};
pub use geometry::{DomainKind, DomainSpec, Grid};
pub use stepper::{ModelParams, ModelVariant, RunOptions, StepFlags};
