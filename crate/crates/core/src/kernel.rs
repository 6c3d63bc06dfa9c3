//! Decay kernels and instantaneous impact functions.
//!
//! A decay kernel `G(τ)` weights the residual effect of a trade after lag τ
//! and is dimensionless, normalized so that `G(0) = 1` for the bounded
//! families. All dimensionality (and sign) of impact sits in the impact
//! function `f(v)`, the price drift contributed by trading at rate `v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-step tolerance when checking monotonicity of tabulated kernels.
pub const MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayKernel {
    /// `G(τ) = 1`: impact never decays.
    Permanent,
    /// `G(τ) = exp(-ρ τ)` with ρ ≥ 0; ρ = 0 recovers the permanent kernel.
    Exponential { rho: f64 },
    /// `G(τ) = τ^{-γ}` with 0 < γ < 1. Unbounded at τ → 0⁺; operations that
    /// require a bounded kernel must reject it.
    PowerLaw { gamma: f64 },
    /// Piecewise-linear table of `(lag, value)` points, held constant beyond
    /// the last lag.
    Tabulated {
        lags: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        assert_monotone: bool,
        #[serde(default)]
        assert_strictly_decreasing: bool,
    },
}

impl DecayKernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DecayKernel::Permanent => Ok(()),
            DecayKernel::Exponential { rho } => {
                if !rho.is_finite() || *rho < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "exponential kernel needs finite rho >= 0, got {rho}"
                    )));
                }
                Ok(())
            }
            DecayKernel::PowerLaw { gamma } => {
                if !gamma.is_finite() || *gamma <= 0.0 || *gamma >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "power-law kernel needs 0 < gamma < 1, got {gamma}"
                    )));
                }
                Ok(())
            }
            DecayKernel::Tabulated {
                lags,
                values,
                assert_monotone,
                assert_strictly_decreasing,
            } => {
                if lags.is_empty() || lags.len() != values.len() {
                    return Err(Error::InvalidParameter(
                        "tabulated kernel needs equally many lags and values, at least one".into(),
                    ));
                }
                if lags[0] < 0.0 {
                    return Err(Error::InvalidParameter("tabulated kernel lags must be >= 0".into()));
                }
                for w in lags.windows(2) {
                    if !(w[1] > w[0]) {
                        return Err(Error::InvalidParameter(
                            "tabulated kernel lags must be strictly increasing".into(),
                        ));
                    }
                }
                if lags.iter().chain(values.iter()).any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("tabulated kernel has non-finite entries".into()));
                }
                if *assert_monotone {
                    for (k, w) in values.windows(2).enumerate() {
                        if w[1] > w[0] + MONOTONE_TOL {
                            return Err(Error::Validation(format!(
                                "tabulated kernel flagged non-increasing but rises at step {k}: {} -> {}",
                                w[0], w[1]
                            )));
                        }
                    }
                }
                if *assert_strictly_decreasing {
                    for (k, w) in values.windows(2).enumerate() {
                        if w[1] >= w[0] - MONOTONE_TOL {
                            return Err(Error::Validation(format!(
                                "tabulated kernel flagged strictly decreasing but step {k} does not fall: {} -> {}",
                                w[0], w[1]
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, DecayKernel::PowerLaw { .. })
    }

    /// Evaluate `G(τ)`. Requires τ > 0 for power-law kernels, τ ≥ 0 otherwise.
    pub fn eval(&self, tau: f64) -> Result<f64> {
        if tau < 0.0 {
            return Err(Error::InvalidParameter(format!("kernel lag must be >= 0, got {tau}")));
        }
        match self {
            DecayKernel::Permanent => Ok(1.0),
            DecayKernel::Exponential { rho } => Ok((-rho * tau).exp()),
            DecayKernel::PowerLaw { gamma } => {
                if tau == 0.0 {
                    Err(Error::SingularKernel)
                } else {
                    Ok(tau.powf(-gamma))
                }
            }
            DecayKernel::Tabulated { lags, values, .. } => Ok(interp_hold(lags, values, tau)),
        }
    }

    /// `∫_0^x G(u) du` in closed form; `None` for tabulated kernels, which go
    /// through quadrature. Converges for power-law kernels despite the
    /// singularity at zero lag.
    pub fn first_primitive(&self, x: f64) -> Option<f64> {
        debug_assert!(x >= 0.0);
        match self {
            DecayKernel::Permanent => Some(x),
            DecayKernel::Exponential { rho } => {
                if *rho == 0.0 {
                    Some(x)
                } else {
                    // (1 - e^{-ρx}) / ρ, stable for small ρx via expm1
                    Some(-(-rho * x).exp_m1() / rho)
                }
            }
            DecayKernel::PowerLaw { gamma } => Some(x.powf(1.0 - gamma) / (1.0 - gamma)),
            DecayKernel::Tabulated { .. } => None,
        }
    }

    /// Double primitive `P(x) = ∫_0^x ∫_0^t G(u) du dt`, the building block
    /// for phase-pair cost integrals; `None` for tabulated kernels.
    pub fn double_primitive(&self, x: f64) -> Option<f64> {
        debug_assert!(x >= 0.0);
        match self {
            DecayKernel::Permanent => Some(0.5 * x * x),
            DecayKernel::Exponential { rho } => Some(exp_double_primitive(*rho, x)),
            DecayKernel::PowerLaw { gamma } => {
                Some(x.powf(2.0 - gamma) / ((1.0 - gamma) * (2.0 - gamma)))
            }
            DecayKernel::Tabulated { .. } => None,
        }
    }
}

/// `(ρx - 1 + e^{-ρx}) / ρ²` evaluated without catastrophic cancellation.
fn exp_double_primitive(rho: f64, x: f64) -> f64 {
    let u = rho * x;
    if u < 0.5 {
        // x² Σ_{m>=0} (-u)^m / (m+2)!
        let mut sum = 0.0;
        let mut term = 0.5; // m = 0: 1/2!
        let mut m = 0usize;
        loop {
            sum += term;
            m += 1;
            term *= -u / (m + 2) as f64;
            if term.abs() < f64::EPSILON * sum.abs() || m > 40 {
                break;
            }
        }
        x * x * sum
    } else {
        (u - 1.0 + (-u).exp()) / (rho * rho)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImpactFunction {
    /// `f(v) = η v`.
    Linear { eta: f64 },
    /// `f(v) = η sgn(v) |v|^δ` with η ≥ 0 and 0 < δ ≤ 1; odd by construction.
    PowerLawSign { eta: f64, delta: f64 },
    /// Piecewise-linear table of `(volume, impact)` points, held constant
    /// beyond the table. Not forced odd unless `assert_odd` is set, so that
    /// estimated or deliberately inconsistent impact curves can be expressed.
    Tabulated {
        volumes: Vec<f64>,
        impacts: Vec<f64>,
        #[serde(default)]
        assert_odd: bool,
    },
}

impl ImpactFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            ImpactFunction::Linear { eta } => {
                if !eta.is_finite() {
                    return Err(Error::InvalidParameter("linear impact eta must be finite".into()));
                }
                Ok(())
            }
            ImpactFunction::PowerLawSign { eta, delta } => {
                if !eta.is_finite() || *eta < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "power-law impact needs eta >= 0, got {eta}"
                    )));
                }
                if !delta.is_finite() || *delta <= 0.0 || *delta > 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "power-law impact needs 0 < delta <= 1, got {delta}"
                    )));
                }
                Ok(())
            }
            ImpactFunction::Tabulated { volumes, impacts, assert_odd } => {
                if volumes.is_empty() || volumes.len() != impacts.len() {
                    return Err(Error::InvalidParameter(
                        "tabulated impact needs equally many volumes and impacts, at least one".into(),
                    ));
                }
                for w in volumes.windows(2) {
                    if !(w[1] > w[0]) {
                        return Err(Error::InvalidParameter(
                            "tabulated impact volumes must be strictly increasing".into(),
                        ));
                    }
                }
                if volumes.iter().chain(impacts.iter()).any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("tabulated impact has non-finite entries".into()));
                }
                if *assert_odd {
                    for (v, imp) in volumes.iter().zip(impacts.iter()) {
                        let mirrored = interp_hold(volumes, impacts, -*v);
                        if (mirrored + imp).abs() > 1e-12 * imp.abs().max(1.0) {
                            return Err(Error::Validation(format!(
                                "tabulated impact flagged odd but f({v}) = {imp} while f({}) = {mirrored}",
                                -v
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Evaluate `f(v)`. `f(0) = 0` holds for the built-in kinds; tabulated
    /// data may deliberately violate it (that is an arbitrage signal, not a
    /// construction error).
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            ImpactFunction::Linear { eta } => eta * v,
            ImpactFunction::PowerLawSign { eta, delta } => {
                if v == 0.0 {
                    0.0
                } else {
                    eta * v.signum() * v.abs().powf(*delta)
                }
            }
            ImpactFunction::Tabulated { volumes, impacts, .. } => interp_hold(volumes, impacts, v),
        }
    }

    /// Linear slope η when the function is exactly linear.
    pub fn linear_eta(&self) -> Option<f64> {
        match self {
            ImpactFunction::Linear { eta } => Some(*eta),
            ImpactFunction::PowerLawSign { eta, delta } if *delta == 1.0 => Some(*eta),
            _ => None,
        }
    }
}

/// Linear interpolation over a sorted table, holding the boundary values
/// outside the covered range.
fn interp_hold(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    // partition_point: first index with xs[idx] > x
    let hi = xs.partition_point(|&t| t <= x);
    let lo = hi - 1;
    let w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + w * (ys[hi] - ys[lo])
}
