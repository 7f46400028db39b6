//! Desk-scale simulator for a two-dimensional free-boundary viscoelastic
//! flow written on a conformal chart, built to chase boundary
//! self-intersection (splash) events and the contraction/stability behavior
//! of the underlying Picard iteration.
//!
//! Layout:
//! - [`chart`], [`curve`]: the square-root chart and closed-polyline geometry.
//! - [`mesh`], [`state`]: mapped structured grids, fields, and the discrete
//!   differential operators and residuals.
//! - [`linsolve`]: banded LU and the saddle-system assembly scaffolding.
//! - [`norms`]: fractional space-time norms used by the iteration diagnostics.
//! - [`initial`]: tubular-neighborhood stream-function initial data.
//! - [`solver`]: the windowed Picard iteration and time marching.
//! - [`config`], [`report`], [`commands`]: run configuration, outputs, CLI.

pub mod chart;
pub mod commands;
pub mod config;
pub mod curve;
pub mod initial;
pub mod linsolve;
pub mod mesh;
pub mod norms;
pub mod report;
pub mod solver;
pub mod state;
pub mod verify;

pub use chart::{Chart, ChartError, Mat2, Vec2};
pub use curve::{CurveError, PlanarCurve};
