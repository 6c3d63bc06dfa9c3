//! Multi-asset transient impact model with cross-impact.
//!
//! The library covers four workflows:
//!
//! - **Model primitives** ([`kernel`], [`spec`], [`strategy`],
//!   [`price_path`]): decay kernels `G^{ij}(τ)`, instantaneous impact
//!   functions `f^{ij}(v)` and piecewise-constant trading schedules, with the
//!   expected price path they induce.
//! - **Cost engine** ([`cost`]): expected execution cost of any schedule,
//!   closed forms for the permanent/exponential/power-law kernel families and
//!   a nested-quadrature fallback for tabulated kernels.
//! - **Arbitrage analysis** ([`arbitrage`]): spectral and constructive
//!   detection of round trips with negative expected cost, plus the
//!   slippage-adjusted profitability of exploiting asymmetric cross-impact.
//! - **Data loop** ([`sim`], [`tape`], [`ingest`], [`estimator`]): synthetic
//!   correlated order flow from a planted propagator, trade/quote ingestion,
//!   and estimation of response functions, impact curves and the propagator
//!   matrix in combined trade time, with symmetry inference.

pub mod arbitrage;
pub mod cost;
pub mod error;
pub mod estimator;
pub mod ingest;
pub mod kernel;
pub mod linalg;
pub mod price_path;
pub mod quad;
pub mod sim;
pub mod spec;
pub mod stats;
pub mod strategy;
pub mod tape;

pub use cost::{cost, cost_in_out, cost_powerlaw_inout, exponential_expansion_cost, CostBreakdown};
pub use error::{Error, Result};
pub use kernel::{DecayKernel, ImpactFunction};
pub use price_path::expected_price_path;
pub use spec::KernelSpec;
pub use strategy::{Phase, Strategy};
pub use tape::MarketTape;
