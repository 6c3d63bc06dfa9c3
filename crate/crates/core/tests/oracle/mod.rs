//! Independent numerical oracles for the integration tests.
//!
//! Everything here is deliberately written from scratch — composite Simpson
//! with Richardson-style refinement over hand-coded kernel evaluations — so
//! it shares no code path with the library's double-primitive closed forms or
//! its adaptive Gauss-Legendre fallback.

/// Composite Simpson, doubling panels until two refinements agree.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut n = 64usize;
    let mut prev = simpson_fixed(f, a, b, n);
    loop {
        n *= 2;
        let cur = simpson_fixed(f, a, b, n);
        if (cur - prev).abs() <= rel_tol * cur.abs().max(1e-300) || n >= 1 << 22 {
            return cur;
        }
        prev = cur;
    }
}

fn simpson_fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let x = a + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

/// A kernel for the oracle: evaluate `G(τ)` and, when the single primitive is
/// known analytically (the singular power-law case), `∫_0^x G`.
#[derive(Clone, Copy)]
pub enum OracleKernel {
    Permanent,
    Exponential { rho: f64 },
    PowerLaw { gamma: f64 },
}

impl OracleKernel {
    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            OracleKernel::Permanent => 1.0,
            OracleKernel::Exponential { rho } => (-rho * tau).exp(),
            OracleKernel::PowerLaw { gamma } => tau.powf(-gamma),
        }
    }

    /// `∫_0^x G(u) du`; the singularity-aware inner primitive.
    pub fn primitive(&self, x: f64) -> f64 {
        match self {
            OracleKernel::Permanent => x,
            OracleKernel::Exponential { rho } => {
                if *rho == 0.0 {
                    x
                } else {
                    (1.0 - (-rho * x).exp()) / rho
                }
            }
            OracleKernel::PowerLaw { gamma } => x.powf(1.0 - gamma) / (1.0 - gamma),
        }
    }
}

/// Piecewise-constant schedule for the oracle: `(start, end, rates)`.
pub type OraclePhases = Vec<(f64, f64, Vec<f64>)>;

/// Expected cost by brute force: the outer time integral runs through
/// Simpson phase by phase; the inner integral over past trading uses the
/// analytic single primitive (exact even for singular kernels).
///
/// `kernels[i][j]`, `impact(i, j, v)`.
pub fn cost_oracle(
    kernels: &[Vec<OracleKernel>],
    impact: &dyn Fn(usize, usize, f64) -> f64,
    phases: &OraclePhases,
    rel_tol: f64,
) -> f64 {
    let n = kernels.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let k = kernels[i][j];
            for &(c, d, ref outer_rates) in phases {
                let vi = outer_rates[i];
                if vi == 0.0 {
                    continue;
                }
                // ∫_c^d v_i dt Σ_{phases before t} f(v_j) [Q(t-a) - Q(t-min(b,t))]
                let integrand = |t: f64| {
                    let mut inner = 0.0;
                    for &(a, b, ref inner_rates) in phases {
                        if a >= t {
                            break;
                        }
                        let f = impact(i, j, inner_rates[j]);
                        if f == 0.0 {
                            continue;
                        }
                        let hi = b.min(t);
                        inner += f * (k.primitive(t - a) - k.primitive(t - hi));
                    }
                    vi * inner
                };
                // the primitive of a power-law kernel has an algebraic kink
                // at the phase open; a left-endpoint s⁴ substitution makes
                // the composite integrand smooth for Simpson
                let len = d - c;
                let transformed = |s: f64| {
                    let t = c + len * s.powi(4);
                    integrand(t) * 4.0 * len * s.powi(3)
                };
                total += simpson(&transformed, 0.0, 1.0, rel_tol);
            }
        }
    }
    total
}

/// Expected price shift of asset `i` at time `t` by brute force.
pub fn price_shift_oracle(
    kernels: &[Vec<OracleKernel>],
    impact: &dyn Fn(usize, usize, f64) -> f64,
    phases: &OraclePhases,
    asset: usize,
    t: f64,
    rel_tol: f64,
) -> f64 {
    let n = kernels.len();
    let mut shift = 0.0;
    for j in 0..n {
        let k = kernels[asset][j];
        for &(a, b, ref rates) in phases {
            if a >= t {
                break;
            }
            let f = impact(asset, j, rates[j]);
            if f == 0.0 {
                continue;
            }
            let hi = b.min(t);
            // ∫_a^hi G(t-s) ds via Simpson on the non-singular part
            let val = if t - hi > 1e-12 {
                simpson(&|s| k.eval(t - s), a, hi, rel_tol)
            } else {
                // endpoint touches the singularity: use the primitive
                k.primitive(t - a) - k.primitive(t - hi)
            };
            shift += f * val;
        }
    }
    shift
}
