//! Expected execution cost of piecewise-constant strategies.
//!
//! The double time integral of the cost functional reduces, for
//! piecewise-constant schedules, to a sum over ordered phase pairs weighted
//! by the kernel's double primitive `P(x) = ∫_0^x ∫_0^t G(u) du dt`:
//!
//! - same phase `[a, b]` (triangle): `P(b - a)`
//! - earlier phase `[a, b]` hit from `[c, d]` (rectangle, `b <= c`):
//!   `P(d-a) - P(c-a) - P(d-b) + P(c-b)`
//!
//! Permanent, exponential and power-law kernels have closed-form `P`;
//! tabulated kernels go through nested adaptive quadrature. The power-law
//! singularity at zero lag never gets evaluated pointwise: the inner integral
//! is always done analytically for that family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{DecayKernel, ImpactFunction};
use crate::quad;
use crate::spec::KernelSpec;
use crate::strategy::Strategy;

/// Relative tolerance for the quadrature fallback.
pub const COST_QUAD_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMethod {
    ClosedForm,
    Quadrature,
}

/// Per-pair decomposition of the expected cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// `per_pair[i][j]` is the cost contribution of impact from trading asset
    /// `j` on the execution of asset `i`.
    pub per_pair: Vec<Vec<f64>>,
    pub total: f64,
    pub method: CostMethod,
    pub quadrature_error_estimate: f64,
}

impl CostBreakdown {
    fn from_pairs(per_pair: Vec<Vec<f64>>, method: CostMethod, err: f64) -> Self {
        let total = per_pair.iter().flatten().sum();
        CostBreakdown { per_pair, total, method, quadrature_error_estimate: err }
    }
}

/// Triangle weight `∫_a^b dt ∫_a^t G(t-s) ds`.
fn triangle(kernel: &DecayKernel, a: f64, b: f64, abs_floor: f64) -> Result<(f64, f64)> {
    debug_assert!(b >= a);
    match kernel.double_primitive(b - a) {
        Some(p) => Ok((p, 0.0)),
        None => {
            let inner = |t: f64| {
                quad::integrate(&|s| kernel.eval(t - s).unwrap_or(0.0), a, t, COST_QUAD_REL_TOL, abs_floor)
                    .map(|(v, _)| v)
                    .unwrap_or(f64::NAN)
            };
            quad::integrate(&inner, a, b, COST_QUAD_REL_TOL, abs_floor)
        }
    }
}

/// Rectangle weight `∫_c^d dt ∫_a^b G(t-s) ds` with `b <= c`.
fn rectangle(kernel: &DecayKernel, span_t: (f64, f64), span_s: (f64, f64), abs_floor: f64) -> Result<(f64, f64)> {
    let (c, d) = span_t;
    let (a, b) = span_s;
    debug_assert!(b <= c + 1e-12 * d.abs().max(1.0));
    match kernel.double_primitive(d - a) {
        Some(p_da) => {
            let p = |x: f64| kernel.double_primitive(x).expect("same family");
            Ok((p_da - p(c - a) - p(d - b) + p((c - b).max(0.0)), 0.0))
        }
        None => {
            let inner = |t: f64| {
                quad::integrate(&|s| kernel.eval(t - s).unwrap_or(0.0), a, b, COST_QUAD_REL_TOL, abs_floor)
                    .map(|(v, _)| v)
                    .unwrap_or(f64::NAN)
            };
            quad::integrate(&inner, c, d, COST_QUAD_REL_TOL, abs_floor)
        }
    }
}

fn cost_scale(spec: &KernelSpec, strat: &Strategy) -> f64 {
    let vmax = strat.max_abs_rate();
    let fmax = spec
        .f
        .iter()
        .flatten()
        .map(|f| f.eval(vmax).abs().max(f.eval(-vmax).abs()))
        .fold(0.0f64, f64::max);
    (fmax * vmax * strat.horizon * strat.horizon).max(f64::MIN_POSITIVE)
}

/// Expected cost `C(Π)` of a strategy under a spec, decomposed per asset
/// pair.
pub fn cost(spec: &KernelSpec, strat: &Strategy) -> Result<CostBreakdown> {
    spec.check_dims(strat.n_assets, "strategy")?;
    let n = spec.n_assets;
    let abs_floor = 1e-12 * cost_scale(spec, strat);
    let mut per_pair = vec![vec![0.0; n]; n];
    let mut any_quad = false;
    let mut err_acc = 0.0;

    for i in 0..n {
        for j in 0..n {
            let kernel = &spec.g[i][j];
            if !matches!(kernel, DecayKernel::Tabulated { .. }) {
                // closed form via double primitives
                let mut acc = 0.0;
                for (k, outer) in strat.phases.iter().enumerate() {
                    let vi = outer.rates[i];
                    if vi == 0.0 {
                        continue;
                    }
                    for inner in &strat.phases[..=k] {
                        let fj = spec.f[i][j].eval(inner.rates[j]);
                        if fj == 0.0 {
                            continue;
                        }
                        let w = if std::ptr::eq(outer, inner) {
                            triangle(kernel, outer.start, outer.end, abs_floor)?.0
                        } else {
                            rectangle(kernel, (outer.start, outer.end), (inner.start, inner.end), abs_floor)?.0
                        };
                        acc += vi * fj * w;
                    }
                }
                per_pair[i][j] = acc;
            } else {
                any_quad = true;
                let (v, e) = pair_cost_quadrature(spec, strat, i, j, abs_floor)?;
                per_pair[i][j] = v;
                err_acc += e;
            }
        }
    }

    let method = if any_quad { CostMethod::Quadrature } else { CostMethod::ClosedForm };
    Ok(CostBreakdown::from_pairs(per_pair, method, err_acc))
}

fn pair_cost_quadrature(
    spec: &KernelSpec,
    strat: &Strategy,
    i: usize,
    j: usize,
    abs_floor: f64,
) -> Result<(f64, f64)> {
    let kernel = &spec.g[i][j];
    if !kernel.is_bounded() {
        return Err(Error::Numerical(
            "power-law kernels must use analytic phase integrals, not quadrature".into(),
        ));
    }
    let mut acc = 0.0;
    let mut err = 0.0;
    for (k, outer) in strat.phases.iter().enumerate() {
        let vi = outer.rates[i];
        if vi == 0.0 {
            continue;
        }
        for inner in &strat.phases[..=k] {
            let fj = spec.f[i][j].eval(inner.rates[j]);
            if fj == 0.0 {
                continue;
            }
            let (w, e) = if std::ptr::eq(outer, inner) {
                triangle(kernel, outer.start, outer.end, abs_floor)?
            } else {
                rectangle(kernel, (outer.start, outer.end), (inner.start, inner.end), abs_floor)?
            };
            acc += vi * fj * w;
            err += (vi * fj).abs() * e;
        }
    }
    Ok((acc, err))
}

/// Force the nested-quadrature route for every pair (bounded kernels only).
/// The production path prefers closed forms; this exists so the two routes
/// can be compared.
pub fn cost_quadrature(spec: &KernelSpec, strat: &Strategy) -> Result<CostBreakdown> {
    spec.check_dims(strat.n_assets, "strategy")?;
    let n = spec.n_assets;
    let abs_floor = 1e-12 * cost_scale(spec, strat);
    let mut per_pair = vec![vec![0.0; n]; n];
    let mut err_acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let kernel = &spec.g[i][j];
            if !kernel.is_bounded() {
                return Err(Error::Numerical(
                    "power-law kernels must use analytic phase integrals, not quadrature".into(),
                ));
            }
            let mut acc = 0.0;
            for (k, outer) in strat.phases.iter().enumerate() {
                let vi = outer.rates[i];
                if vi == 0.0 {
                    continue;
                }
                for inner in &strat.phases[..=k] {
                    let fj = spec.f[i][j].eval(inner.rates[j]);
                    if fj == 0.0 {
                        continue;
                    }
                    let eval = |t: f64, s: f64| kernel.eval((t - s).max(0.0)).unwrap_or(0.0);
                    let (w, e) = if std::ptr::eq(outer, inner) {
                        let (a, b) = (outer.start, outer.end);
                        let inner_int = |t: f64| {
                            quad::integrate(&|s| eval(t, s), a, t, COST_QUAD_REL_TOL, abs_floor)
                                .map(|(v, _)| v)
                                .unwrap_or(f64::NAN)
                        };
                        quad::integrate(&inner_int, a, b, COST_QUAD_REL_TOL, abs_floor)?
                    } else {
                        let (a, b) = (inner.start, inner.end);
                        let inner_int = |t: f64| {
                            quad::integrate(&|s| eval(t, s), a, b, COST_QUAD_REL_TOL, abs_floor)
                                .map(|(v, _)| v)
                                .unwrap_or(f64::NAN)
                        };
                        quad::integrate(&inner_int, outer.start, outer.end, COST_QUAD_REL_TOL, abs_floor)?
                    };
                    acc += vi * fj * w;
                    err_acc += (vi * fj).abs() * e;
                }
            }
            per_pair[i][j] = acc;
        }
    }
    Ok(CostBreakdown::from_pairs(per_pair, CostMethod::Quadrature, err_acc))
}

/// Three-term decomposition of the simple two-phase build/unwind strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InOutCost {
    /// Build-phase self interaction `C_A`.
    pub a: Vec<Vec<f64>>,
    /// Unwind-against-build interaction `C_B`.
    pub b: Vec<Vec<f64>>,
    /// Unwind-phase self interaction `C_C`.
    pub c: Vec<Vec<f64>>,
    pub breakdown: CostBreakdown,
    pub theta: f64,
}

/// Cost of the in-out strategy trading at `v1` until the turnaround and `v2`
/// afterwards. Requires a common rate ratio `κ = v1/v2 < 0` across active
/// assets (the round-trip condition); the turnaround is `Θ = T / (1 - κ)`.
pub fn cost_in_out(spec: &KernelSpec, v1: &[f64], v2: &[f64], horizon: f64) -> Result<InOutCost> {
    let n = spec.n_assets;
    spec.check_dims(v1.len(), "v1")?;
    spec.check_dims(v2.len(), "v2")?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }

    let mut kappa: Option<f64> = None;
    for (i, (&a, &b)) in v1.iter().zip(v2.iter()).enumerate() {
        if a == 0.0 && b == 0.0 {
            continue;
        }
        if a == 0.0 || b == 0.0 || a.signum() == b.signum() {
            return Err(Error::InvalidStrategy(format!(
                "asset {i}: in/out rates must be opposite-signed, got {a} and {b}"
            )));
        }
        let k = a / b;
        match kappa {
            None => kappa = Some(k),
            Some(k0) => {
                if (k - k0).abs() > 1e-9 * k0.abs() {
                    return Err(Error::InvalidStrategy(format!(
                        "rate ratio must be common to all assets: {k0} vs {k} (asset {i})"
                    )));
                }
            }
        }
    }

    let kappa = kappa.unwrap_or(-1.0);
    let theta = horizon / (1.0 - kappa);
    let abs_floor = {
        let vmax = v1.iter().chain(v2.iter()).fold(0.0f64, |m, r| m.max(r.abs()));
        let fmax = spec
            .f
            .iter()
            .flatten()
            .map(|f| f.eval(vmax).abs().max(f.eval(-vmax).abs()))
            .fold(0.0f64, f64::max);
        1e-12 * (fmax * vmax * horizon * horizon).max(f64::MIN_POSITIVE)
    };

    let mut a_term = vec![vec![0.0; n]; n];
    let mut b_term = vec![vec![0.0; n]; n];
    let mut c_term = vec![vec![0.0; n]; n];
    let mut err = 0.0;
    let mut any_quad = false;
    for i in 0..n {
        for j in 0..n {
            let kernel = &spec.g[i][j];
            any_quad |= matches!(kernel, DecayKernel::Tabulated { .. });
            let (tri1, e1) = triangle(kernel, 0.0, theta, abs_floor)?;
            let (tri2, e2) = triangle(kernel, theta, horizon, abs_floor)?;
            let (rect, e3) = rectangle(kernel, (theta, horizon), (0.0, theta), abs_floor)?;
            let f1 = spec.f[i][j].eval(v1[j]);
            let f2 = spec.f[i][j].eval(v2[j]);
            a_term[i][j] = v1[i] * f1 * tri1;
            b_term[i][j] = v2[i] * f1 * rect;
            c_term[i][j] = v2[i] * f2 * tri2;
            err += (v1[i] * f1).abs() * e1 + (v2[i] * f1).abs() * e3 + (v2[i] * f2).abs() * e2;
        }
    }

    let per_pair: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a_term[i][j] + b_term[i][j] + c_term[i][j]).collect())
        .collect();
    let method = if any_quad { CostMethod::Quadrature } else { CostMethod::ClosedForm };
    Ok(InOutCost {
        a: a_term,
        b: b_term,
        c: c_term,
        breakdown: CostBreakdown::from_pairs(per_pair, method, err),
        theta,
    })
}

/// Equal-phase build/unwind cost under pure power-law kernels and power-law
/// impact, in closed form: the self contribution is
/// `Λ^{ii} |v_i|^{1+δ^{ii}}` with
/// `Λ^{ij} = η^{ij} T^{2-γ^{ij}} (2^{γ^{ij}} - 1) / ((1-γ^{ij})(2-γ^{ij}))`,
/// and each pair contributes `Λ^{ij} v_i sgn(v_j) |v_j|^{δ^{ij}}`; opposite
/// trade directions make the cross terms negative.
pub fn cost_powerlaw_inout(
    eta: &[Vec<f64>],
    gamma: &[Vec<f64>],
    delta: &[Vec<f64>],
    v: &[f64],
    horizon: f64,
) -> Result<CostBreakdown> {
    let n = v.len();
    for (name, m) in [("eta", eta), ("gamma", gamma), ("delta", delta)] {
        if m.len() != n || m.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!("{name} must be {n} x {n}")));
        }
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    for row in gamma {
        for &g in row {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {g}")));
            }
        }
    }
    let mut per_pair = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let g = gamma[i][j];
            let lambda = eta[i][j] * horizon.powf(2.0 - g) * (2f64.powf(g) - 1.0)
                / ((1.0 - g) * (2.0 - g));
            let d = delta[i][j];
            let fj = if v[j] == 0.0 { 0.0 } else { v[j].signum() * v[j].abs().powf(d) };
            per_pair[i][j] = lambda * v[i] * fj;
        }
    }
    Ok(CostBreakdown::from_pairs(per_pair, CostMethod::ClosedForm, 0.0))
}

/// One exponential bracket of the three-phase strategy cost:
/// `B(u) = Σ_i a_i e^{-c_i u} + p0 + p1 u`, whose constant and linear orders
/// cancel by construction, evaluated as `B(ρT)/ρ²`. A series in `u = ρT` is
/// used for small arguments where the closed form cancels catastrophically.
struct ExpBracket {
    coeffs: &'static [(f64, f64)],
    p0: f64,
    p1: f64,
}

impl ExpBracket {
    fn over_rho_sq(&self, rho: f64, horizon: f64) -> f64 {
        let u = rho * horizon;
        if u < 0.5 {
            // Σ_{k>=2} E_k ρ^{k-2} T^k / k!  with E_k = Σ_i a_i (-c_i)^k
            let mut sum = 0.0;
            let mut t_pow = horizon * horizon; // T^k
            let mut factorial = 2.0; // k!
            let mut c_pows: Vec<f64> = self.coeffs.iter().map(|&(_, c)| c * c).collect();
            let mut rho_pow = 1.0; // ρ^{k-2}
            for k in 2..60 {
                let e_k: f64 = self
                    .coeffs
                    .iter()
                    .zip(c_pows.iter())
                    .map(|(&(a, _), &cp)| {
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        a * sign * cp
                    })
                    .sum();
                let term = e_k * rho_pow * t_pow / factorial;
                sum += term;
                if term.abs() < f64::EPSILON * sum.abs().max(1e-300) && k > 4 {
                    break;
                }
                for (cp, &(_, c)) in c_pows.iter_mut().zip(self.coeffs.iter()) {
                    *cp *= c;
                }
                rho_pow *= rho;
                t_pow *= horizon;
                factorial *= (k + 1) as f64;
            }
            sum
        } else {
            let b: f64 = self.coeffs.iter().map(|&(a, c)| a * (-c * u).exp()).sum::<f64>()
                + self.p0
                + self.p1 * u;
            b / (rho * rho)
        }
    }
}

const BRACKET_AA: ExpBracket = ExpBracket {
    coeffs: &[(-1.0, 1.0), (2.0, 2.0 / 3.0), (1.0, 1.0 / 3.0)],
    p0: -2.0,
    p1: 2.0 / 3.0,
};
const BRACKET_BB: ExpBracket = ExpBracket {
    coeffs: &[(-1.0, 2.0 / 3.0), (4.0, 1.0 / 3.0)],
    p0: -3.0,
    p1: 2.0 / 3.0,
};
const BRACKET_AB: ExpBracket = ExpBracket {
    coeffs: &[(1.0, 1.0), (2.0, 1.0 / 3.0), (-3.0, 2.0 / 3.0)],
    p0: 0.0,
    p1: -1.0 / 3.0,
};
const BRACKET_BA: ExpBracket = ExpBracket {
    coeffs: &[(1.0, 2.0 / 3.0), (-3.0, 1.0 / 3.0)],
    p0: 2.0,
    p1: -1.0 / 3.0,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionCost {
    pub exact: CostBreakdown,
    /// First non-vanishing order in `ρT`:
    /// `(T³/6)[(10/27) η^{aa} v_a² ρ^{aa} + (4/27) η^{bb} v_b² ρ^{bb}
    ///  - (5/27) η^{cross} v_a v_b (ρ^{ab} + ρ^{ba})]`.
    pub leading_order: f64,
}

/// Exact and leading-order cost of the asymmetric three-phase round trip
/// under exponential decay with symmetric linear cross-impact.
pub fn exponential_expansion_cost(
    eta: &[Vec<f64>],
    rho: &[Vec<f64>],
    v: (f64, f64),
    horizon: f64,
) -> Result<ExpansionCost> {
    for (name, m) in [("eta", eta), ("rho", rho)] {
        if m.len() != 2 || m.iter().any(|r| r.len() != 2) {
            return Err(Error::DimensionMismatch(format!("{name} must be 2 x 2")));
        }
    }
    let eta_cross = eta[0][1];
    if (eta[0][1] - eta[1][0]).abs() > 1e-12 * eta_cross.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "cross impact must be symmetric, got eta[0][1] = {} vs eta[1][0] = {}",
            eta[0][1], eta[1][0]
        )));
    }
    if rho.iter().flatten().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::InvalidParameter("decay rates must be finite and >= 0".into()));
    }
    let (v_a, v_b) = v;
    let t = horizon;

    let c_aa = eta[0][0] * v_a * v_a * BRACKET_AA.over_rho_sq(rho[0][0], t);
    let c_bb = eta[1][1] * v_b * v_b * BRACKET_BB.over_rho_sq(rho[1][1], t);
    let c_ab = eta_cross * v_a * v_b * BRACKET_AB.over_rho_sq(rho[0][1], t);
    let c_ba = eta_cross * v_a * v_b * BRACKET_BA.over_rho_sq(rho[1][0], t);

    let per_pair = vec![vec![c_aa, c_ab], vec![c_ba, c_bb]];
    let leading = t.powi(3) / 6.0
        * ((10.0 / 27.0) * eta[0][0] * v_a * v_a * rho[0][0]
            + (4.0 / 27.0) * eta[1][1] * v_b * v_b * rho[1][1]
            - (5.0 / 27.0) * eta_cross * v_a * v_b * (rho[0][1] + rho[1][0]));

    Ok(ExpansionCost {
        exact: CostBreakdown::from_pairs(per_pair, CostMethod::ClosedForm, 0.0),
        leading_order: leading,
    })
}

/// Convenience: the spec for a uniform-η linear model with per-pair
/// exponential decay rates (used by tests and the arbitrage module).
pub fn exponential_linear_spec(eta: &[Vec<f64>], rho: &[Vec<f64>]) -> Result<KernelSpec> {
    let n = eta.len();
    let g = (0..n)
        .map(|i| (0..n).map(|j| DecayKernel::Exponential { rho: rho[i][j] }).collect())
        .collect();
    let f = eta
        .iter()
        .map(|row| row.iter().map(|&e| ImpactFunction::Linear { eta: e }).collect())
        .collect();
    KernelSpec::new(g, f, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn permanent_linear(eta: &[Vec<f64>]) -> KernelSpec {
        KernelSpec::uniform_linear(DecayKernel::Permanent, eta).unwrap()
    }

    #[test]
    fn zero_strategy_costs_nothing() {
        let spec = permanent_linear(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        let strat = Strategy::from_durations(2, &[(1.0, vec![0.0, 0.0])]).unwrap();
        let c = cost(&spec, &strat).unwrap();
        assert_eq!(c.total, 0.0);
    }

    #[test]
    fn asymmetric_permanent_closed_form() {
        // total = v_a v_b T²/18 (η_ba - η_ab)
        let (eta_ab, eta_ba) = (0.2, 0.1);
        let spec = permanent_linear(&[vec![1.0, eta_ab], vec![eta_ba, 1.0]]);
        let (v_a, v_b, t) = (1.0, 1.0, 3.0);
        let strat = Strategy::asymmetric_three_phase(2, 0, 1, v_a, v_b, t).unwrap();
        let c = cost(&spec, &strat).unwrap();
        assert_relative_eq!(c.total, v_a * v_b * t * t / 18.0 * (eta_ba - eta_ab), max_relative = 1e-12);
        assert_relative_eq!(c.total, -0.05, max_relative = 1e-12);
        // self terms drop out entirely for the round trip
        assert_relative_eq!(c.per_pair[0][0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(c.per_pair[1][1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn single_asset_round_trip_under_permanent_impact_is_free() {
        let spec = permanent_linear(&[vec![0.8]]);
        let strat =
            Strategy::from_durations(1, &[(0.5, vec![2.0]), (1.0, vec![-0.4]), (0.5, vec![-1.2])]).unwrap();
        assert!(strat.is_round_trip());
        let c = cost(&spec, &strat).unwrap();
        assert_relative_eq!(c.total, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn only_one_asset_trading_leaves_other_pairs_empty() {
        let spec = KernelSpec::uniform_linear(
            DecayKernel::Exponential { rho: 0.7 },
            &[vec![1.0, 0.5], vec![0.5, 1.0]],
        )
        .unwrap();
        let strat =
            Strategy::from_durations(2, &[(1.0, vec![1.0, 0.0]), (1.0, vec![-1.0, 0.0])]).unwrap();
        let c = cost(&spec, &strat).unwrap();
        for (i, row) in c.per_pair.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if (i, j) != (0, 0) {
                    assert_eq!(x, 0.0, "pair ({i},{j})");
                }
            }
        }
        assert!(c.per_pair[0][0] > 0.0);
    }

    #[test]
    fn in_out_unit_example() {
        // κ = -1, N = 1, permanent, linear η, v = 1, T = 2 → Θ = 1
        let eta = 0.8;
        let spec = permanent_linear(&[vec![eta]]);
        let io = cost_in_out(&spec, &[1.0], &[-1.0], 2.0).unwrap();
        assert_relative_eq!(io.theta, 1.0);
        assert_relative_eq!(io.a[0][0], 0.5 * eta, max_relative = 1e-14);
        assert_relative_eq!(io.b[0][0], -eta, max_relative = 1e-14);
        assert_relative_eq!(io.c[0][0], 0.5 * eta, max_relative = 1e-14);
        assert_relative_eq!(io.breakdown.total, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn in_out_zero_rates() {
        let spec = permanent_linear(&[vec![1.0, 0.2], vec![0.2, 1.0]]);
        let io = cost_in_out(&spec, &[0.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(io.breakdown.total, 0.0);
    }

    #[test]
    fn in_out_rejects_mixed_ratio() {
        let spec = permanent_linear(&[vec![1.0, 0.2], vec![0.2, 1.0]]);
        let res = cost_in_out(&spec, &[1.0, 2.0], &[-1.0, -0.5], 1.0);
        assert!(res.is_err());
    }

    #[test]
    fn in_out_matches_generic_cost() {
        let spec = KernelSpec::uniform_linear(
            DecayKernel::Exponential { rho: 0.9 },
            &[vec![1.0, 0.4], vec![0.3, 1.0]],
        )
        .unwrap();
        let (v1, v2, t) = ([1.0, -0.5], [-2.0, 1.0], 1.5);
        let io = cost_in_out(&spec, &v1, &v2, t).unwrap();
        let strat = Strategy::in_out(&v1, &v2, io.theta, t).unwrap();
        assert!(strat.is_round_trip());
        let c = cost(&spec, &strat).unwrap();
        assert_relative_eq!(io.breakdown.total, c.total, max_relative = 1e-12);
    }

    #[test]
    fn in_out_same_rate_factorizes() {
        // uniform kernel, κ = -1: total ∝ [v_a f_aa(v_a) + v_b f_bb(v_b)
        //                                  - v_a f_ab(v_b) - v_b f_ba(v_a)]
        let spec = KernelSpec::uniform_linear(
            DecayKernel::Exponential { rho: 1.0 },
            &[vec![1.0, 0.7], vec![0.4, 1.0]],
        )
        .unwrap();
        let (v_a, v_b, t) = (1.3, 0.6, 2.0);
        let io = cost_in_out(&spec, &[v_a, -v_b], &[-v_a, v_b], t).unwrap();
        let bracket = v_a * 1.0 * v_a + v_b * 1.0 * v_b - v_a * 0.7 * v_b - v_b * 0.4 * v_a;
        let kernel = DecayKernel::Exponential { rho: 1.0 };
        let factor = 4.0 * kernel.double_primitive(t / 2.0).unwrap() - kernel.double_primitive(t).unwrap();
        assert!(factor > 0.0);
        assert_relative_eq!(io.breakdown.total, bracket * factor, max_relative = 1e-12);
    }

    #[test]
    fn powerlaw_inout_unit_lambda() {
        // γ = 0.5, η = 1, δ = 1, v = 1, T = 1 → Λ = (√2 - 1)/(0.5 · 1.5)
        let c = cost_powerlaw_inout(
            &[vec![1.0]],
            &[vec![0.5]],
            &[vec![1.0]],
            &[1.0],
            1.0,
        )
        .unwrap();
        assert_relative_eq!(c.total, (2f64.sqrt() - 1.0) / 0.75, max_relative = 1e-12);
        assert_relative_eq!(c.total, 0.552284749, max_relative = 1e-8);
    }

    #[test]
    fn powerlaw_single_asset_always_costs() {
        for gamma in [0.05, 0.3, 0.5, 0.7, 0.95] {
            let c = cost_powerlaw_inout(&[vec![1.0]], &[vec![gamma]], &[vec![0.7]], &[1.0], 1.0).unwrap();
            assert!(c.total > 0.0, "gamma = {gamma}");
        }
    }

    #[test]
    fn powerlaw_inout_matches_generic_cost() {
        // two assets, opposite directions; generic route integrates the
        // power-law kernel analytically through its double primitive
        let eta = vec![vec![1.0, 0.5], vec![0.4, 1.2]];
        let gamma = vec![vec![0.5, 0.3], vec![0.7, 0.45]];
        let delta = vec![vec![1.0, 0.8], vec![0.6, 1.0]];
        let v = [1.4, -0.9];
        let t = 1.8;
        let closed = cost_powerlaw_inout(&eta, &gamma, &delta, &v, t).unwrap();

        let g = (0..2)
            .map(|i| (0..2).map(|j| DecayKernel::PowerLaw { gamma: gamma[i][j] }).collect())
            .collect();
        let f = (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| ImpactFunction::PowerLawSign { eta: eta[i][j], delta: delta[i][j] })
                    .collect()
            })
            .collect();
        let spec = KernelSpec::new(g, f, None).unwrap();
        let strat = Strategy::in_out(&v, &[-v[0], -v[1]], t / 2.0, t).unwrap();
        let generic = cost(&spec, &strat).unwrap();
        assert_relative_eq!(closed.total, generic.total, max_relative = 1e-10);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(closed.per_pair[i][j], generic.per_pair[i][j], max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn expansion_zero_decay_symmetric_is_free() {
        let eta = vec![vec![1.0, 0.6], vec![0.6, 1.0]];
        let rho = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let e = exponential_expansion_cost(&eta, &rho, (1.0, 1.0), 2.0).unwrap();
        assert_relative_eq!(e.exact.total, 0.0, epsilon = 1e-14);
        assert_relative_eq!(e.leading_order, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn expansion_fast_cross_decay_goes_negative() {
        let eta = vec![vec![1.0, 0.9], vec![0.9, 1.0]];
        let rho = vec![vec![0.01, 0.2], vec![0.2, 0.01]];
        let e = exponential_expansion_cost(&eta, &rho, (1.0, 1.0), 1.0).unwrap();
        assert!(e.leading_order < 0.0);
        assert!(e.exact.total < 0.0);
    }

    #[test]
    fn expansion_exact_matches_generic_cost() {
        let eta = vec![vec![1.0, 0.8], vec![0.8, 1.3]];
        let rho = vec![vec![0.7, 1.9], vec![0.4, 1.1]];
        let (v_a, v_b, t) = (1.2, 0.9, 1.7);
        let e = exponential_expansion_cost(&eta, &rho, (v_a, v_b), t).unwrap();
        let spec = exponential_linear_spec(&eta, &rho).unwrap();
        let strat = Strategy::asymmetric_three_phase(2, 0, 1, v_a, v_b, t).unwrap();
        let c = cost(&spec, &strat).unwrap();
        assert_relative_eq!(e.exact.total, c.total, max_relative = 1e-11);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(e.exact.per_pair[i][j], c.per_pair[i][j], max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn expansion_rejects_asymmetric_eta() {
        let eta = vec![vec![1.0, 0.5], vec![0.4, 1.0]];
        let rho = vec![vec![0.1, 0.1], vec![0.1, 0.1]];
        assert!(exponential_expansion_cost(&eta, &rho, (1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn bracket_series_continuous_at_switch() {
        for bracket in [&BRACKET_AA, &BRACKET_BB, &BRACKET_AB, &BRACKET_BA] {
            let below = bracket.over_rho_sq(0.499, 1.0);
            let above = bracket.over_rho_sq(0.501, 1.0);
            assert_relative_eq!(below, above, max_relative = 1e-2);
            // series against closed form at the same point
            let closed = {
                let u: f64 = 0.499;
                let b: f64 = bracket.coeffs.iter().map(|&(a, c)| a * (-c * u).exp()).sum::<f64>()
                    + bracket.p0
                    + bracket.p1 * u;
                b / (u * u)
            };
            assert_relative_eq!(below, closed, max_relative = 1e-9);
        }
    }

    #[test]
    fn bilinearity_of_linear_cost() {
        let spec = KernelSpec::uniform_linear(
            DecayKernel::Exponential { rho: 1.2 },
            &[vec![1.0, 0.5], vec![0.3, 1.0]],
        )
        .unwrap();
        let strat = Strategy::from_durations(
            2,
            &[(0.7, vec![1.0, -0.4]), (0.5, vec![-0.2, 0.9]), (0.8, vec![-0.75, -0.2125])],
        )
        .unwrap();
        let base = cost(&spec, &strat).unwrap().total;
        for c in [0.5, 2.0, -3.0] {
            let scaled = cost(&spec, &strat.scaled(c)).unwrap().total;
            assert_relative_eq!(scaled, c * c * base, max_relative = 1e-12);
        }
    }

    #[test]
    fn time_reversed_swapped_strategy_flips_permanent_total() {
        let spec = permanent_linear(&[vec![1.0, 0.35], vec![0.15, 1.0]]);
        let (v_a, v_b, t) = (1.1, 0.7, 2.4);
        let fwd = cost(&spec, &Strategy::asymmetric_three_phase(2, 0, 1, v_a, v_b, t).unwrap())
            .unwrap()
            .total;
        let swapped = cost(&spec, &Strategy::asymmetric_three_phase(2, 1, 0, v_b, v_a, t).unwrap())
            .unwrap()
            .total;
        assert_relative_eq!(fwd, -swapped, max_relative = 1e-12);
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        let spec = KernelSpec::uniform_linear(
            DecayKernel::Exponential { rho: 0.8 },
            &[vec![1.0, 0.45], vec![0.55, 1.0]],
        )
        .unwrap();
        let strat = Strategy::from_durations(
            2,
            &[(0.9, vec![1.0, -0.3]), (0.6, vec![-0.5, 0.8]), (1.1, vec![-0.545454545454545, -0.19090909090909]) ],
        )
        .unwrap();
        let closed = cost(&spec, &strat).unwrap();
        let quadr = cost_quadrature(&spec, &strat).unwrap();
        assert_eq!(closed.method, CostMethod::ClosedForm);
        assert_eq!(quadr.method, CostMethod::Quadrature);
        assert_relative_eq!(closed.total, quadr.total, max_relative = 1e-9);
    }

    #[test]
    fn quadrature_refuses_power_law() {
        let spec = KernelSpec::new(
            vec![vec![DecayKernel::PowerLaw { gamma: 0.5 }]],
            vec![vec![ImpactFunction::Linear { eta: 1.0 }]],
            None,
        )
        .unwrap();
        let strat = Strategy::from_durations(1, &[(1.0, vec![1.0]), (1.0, vec![-1.0])]).unwrap();
        assert!(cost_quadrature(&spec, &strat).is_err());
        // the production path handles it analytically
        assert!(cost(&spec, &strat).unwrap().total > 0.0);
    }
}
