//! Estimation of response functions, impact curves and the propagator matrix
//! from a market tape, with symmetry inference on the estimated kernels.
//!
//! All estimators work per day (the propagator sum never crosses a day
//! boundary) and aggregate daily moments weighted by the trade count of the
//! triggering asset, mirroring how the averages are reported.

mod impact_curve;
mod moments;
mod propagator;
mod response;
mod symmetry;

pub use impact_curve::{impact_curve, ImpactBin, ImpactCurve, PairCurve};
pub use propagator::{
    estimate_propagator, to_kernel_spec, CTildeConvention, PropagatorConfig, PropagatorEstimate,
    TabulatedSpec,
};
pub use response::{response, ResponseFunction};
pub use symmetry::{symmetry_test, Aggregation, PairSymmetry, SymmetryTest};

use serde::{Deserialize, Serialize};

/// What the returns are regressed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimMode {
    /// Signed trade events `ε I`; the estimated kernel is `H`.
    #[default]
    Events,
    /// Signed traded value `ε W I` with `W = S·V`; the estimated kernel is
    /// `K`, related to `H` by the average traded value.
    Value,
}
