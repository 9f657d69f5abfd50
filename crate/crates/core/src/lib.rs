//! Inverse mean curvature flow of star-shaped graphs `{(u(p), p)}` in the
//! warped product `ℝ₊ ×_Id Mⁿ`, `n ∈ {1, 2}`, with metric `dr² + r² σ`.
//!
//! The flow is integrated in `φ = log u`, which satisfies the scalar
//! parabolic equation `φ̇ = 1/F(Dφ, D²φ)` with `F = H u / v`. Around the
//! integrator sit an identity oracle that checks the geometric formulas on
//! sampled graphs, bound monitors and evolution cross-checks.

// Index loops mirror the tensor notation; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ambient;
pub mod base;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod graph;
pub mod grid;
pub mod initial;
pub mod io;
pub mod oracle;
pub mod run;
pub mod tensor;

pub use base::{eval_metric, MetricField, MetricPreset, MetricSource};
pub use config::{emit_config, parse_config, parse_config_str, RunConfig};
pub use diagnostics::{DiagnosticsRecord, RateFit};
pub use error::{FlowError, Result};
pub use flow::{FlowOperator, Integrator, Stepper};
pub use graph::{GraphGeometry, GraphState, PointGeometry};
pub use grid::{AxisTopology, ChartGrid, GridSpec, Stencil};
pub use initial::InitialProfile;
pub use run::{Simulation, Termination, Trajectory};
