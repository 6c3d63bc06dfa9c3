//! Propagator estimation: solve the block-Toeplitz system `S̃ = 𝓗 C̃` for
//! the kernel increments and accumulate them into `H` (or `K` in value mode).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::moments::{aggregate_days, Aggregated};
use super::EstimMode;
use crate::error::{Error, Result};
use crate::kernel::{DecayKernel, ImpactFunction};
use crate::linalg::{rcond_estimate, solve_block_levinson, solve_dense, BlockToeplitz};
use crate::spec::KernelSpec;
use crate::tape::MarketTape;

/// How the sign-correlation matrix is assembled from the estimated lags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CTildeConvention {
    /// Use the directly estimated blocks for both lag signs. Keeps the
    /// in-sample identity exact (noiseless tapes solve to machine precision)
    /// at the price of an `O(1/√M)` asymmetry of the assembled matrix.
    #[default]
    TwoSided,
    /// Enforce `C̃(-m) = C̃(m)ᵀ` by construction: the assembled matrix is
    /// exactly symmetric, the identity holds only up to sampling error.
    Symmetrized,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub p: usize,
    pub mode: EstimMode,
    /// Weight daily moments by the triggering asset's trade count.
    pub weighted_days: bool,
    pub convention: CTildeConvention,
    /// Solve through the block Levinson fast path instead of dense LU.
    pub use_levinson: bool,
    /// Statistical floor: require at least `this · N · p` steps.
    pub min_steps_per_lag: usize,
    /// Ridge regularization kicks in below this reciprocal condition number.
    pub rcond_threshold: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            p: 128,
            mode: EstimMode::Events,
            weighted_days: true,
            convention: CTildeConvention::default(),
            use_levinson: false,
            min_steps_per_lag: 10,
            rcond_threshold: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropagatorEstimate {
    pub n_assets: usize,
    pub p: usize,
    pub mode: EstimMode,
    /// `S̃(ℓ)` for ℓ = 0..p-1.
    pub s_tilde: Vec<DMatrix<f64>>,
    /// `C̃(m)` for m = 0..p-1.
    pub c_tilde: Vec<DMatrix<f64>>,
    /// Directly estimated negative lags `C̃(-m)`, m = 1..p-1.
    pub c_tilde_neg: Vec<DMatrix<f64>>,
    /// Kernel increments `𝓗(ℓ)` (or `𝓚`), ℓ = 0..p-1.
    pub increments: Vec<DMatrix<f64>>,
    /// Cumulative kernel `H(n) = Σ_{ℓ<n} 𝓗(ℓ)` for n = 0..=p; `H(0) = 0`.
    pub kernel: Vec<DMatrix<f64>>,
    /// Per-day replicate kernels, for inference.
    pub replicates: Vec<Vec<DMatrix<f64>>>,
    /// Entrywise standard error of `kernel` from the replicates.
    pub kernel_std_error: Option<Vec<DMatrix<f64>>>,
    /// Reciprocal condition estimate of the assembled system.
    pub rcond: f64,
    pub regularized: bool,
    pub trigger_counts: Vec<usize>,
    pub warnings: Vec<String>,
}

impl PropagatorEstimate {
    /// Estimated instantaneous impact strength: the kernel at its smallest
    /// lag, `η̃^{ij} = H^{ij}(1)`.
    pub fn eta_tilde(&self) -> DMatrix<f64> {
        self.kernel[1].clone()
    }
}

fn assemble(agg: &Aggregated, p: usize, convention: CTildeConvention) -> BlockToeplitz {
    let c0 = agg.c[p - 1].clone();
    let pos: Vec<DMatrix<f64>> = (1..p).map(|m| agg.c[p - 1 + m].clone()).collect();
    let neg: Vec<DMatrix<f64>> = (1..p).map(|m| agg.c[p - 1 - m].clone()).collect();
    // system matrix: row n, column ℓ holds C̃(ℓ-n)ᵀ, i.e. T(o) = C̃(-o)ᵀ
    match convention {
        CTildeConvention::TwoSided => BlockToeplitz::new(
            c0.transpose(),
            neg.iter().map(|b| b.transpose()).collect(),
            pos.iter().map(|b| b.transpose()).collect(),
        )
        .expect("square blocks"),
        CTildeConvention::Symmetrized => {
            let zero = (&c0 + c0.transpose()) * 0.5;
            let bar: Vec<DMatrix<f64>> = pos
                .iter()
                .zip(neg.iter())
                .map(|(cp, cn)| (cp + cn.transpose()) * 0.5)
                .collect();
            // C̄(-m) = C̄(m)ᵀ: T(m) = C̄(-m)ᵀ = C̄(m)
            BlockToeplitz::new(
                zero,
                bar.clone(),
                bar.iter().map(|b| b.transpose()).collect(),
            )
            .expect("square blocks")
        }
    }
}

struct SolveOutcome {
    increments: Vec<DMatrix<f64>>,
    rcond: f64,
    regularized: bool,
}

fn solve_system(
    agg: &Aggregated,
    n: usize,
    p: usize,
    cfg: &PropagatorConfig,
) -> Result<SolveOutcome> {
    let toeplitz = assemble(agg, p, cfg.convention);
    let mut a = toeplitz.assemble();
    let rcond = rcond_estimate(&a);
    let mut regularized = false;
    if rcond < cfg.rcond_threshold {
        let lam = 1e-10 * a.trace() / (n * p) as f64;
        for k in 0..a.nrows() {
            a[(k, k)] += lam;
        }
        regularized = true;
    }

    // right-hand side: stacked S̃(ℓ)ᵀ blocks; solution rows are 𝓗(ℓ)ᵀ
    let mut rhs = DMatrix::zeros(n * p, n);
    for (l, s_l) in agg.s.iter().enumerate() {
        rhs.rows_mut(l * n, n).copy_from(&s_l.transpose());
    }
    let x = if cfg.use_levinson && !regularized {
        solve_block_levinson(&toeplitz, &rhs)?
    } else {
        solve_dense(&a, &rhs)?
    };
    let increments: Vec<DMatrix<f64>> = (0..p).map(|l| x.rows(l * n, n).transpose()).collect();
    Ok(SolveOutcome { increments, rcond, regularized })
}

fn accumulate_kernel(increments: &[DMatrix<f64>], n: usize) -> Vec<DMatrix<f64>> {
    let mut kernel = Vec::with_capacity(increments.len() + 1);
    kernel.push(DMatrix::zeros(n, n));
    for inc in increments {
        let last = kernel.last().unwrap();
        kernel.push(last + inc);
    }
    kernel
}

/// Estimate the propagator from a set of days (a window) of the tape.
pub(super) fn estimate_from_days(
    tape: &MarketTape,
    days: &[std::ops::Range<usize>],
    cfg: &PropagatorConfig,
) -> Result<(Aggregated, SolveParts)> {
    let n = tape.n_assets;
    let agg = aggregate_days(tape, days, cfg.p, cfg.mode, cfg.weighted_days);
    if agg.days_used == 0 {
        return Err(Error::InsufficientData(format!(
            "no day has enough steps for p = {} (need > 2p per day)",
            cfg.p
        )));
    }
    let outcome = solve_system(&agg, n, cfg.p, cfg)?;
    let kernel = accumulate_kernel(&outcome.increments, n);
    Ok((
        agg,
        SolveParts {
            increments: outcome.increments,
            kernel,
            rcond: outcome.rcond,
            regularized: outcome.regularized,
        },
    ))
}

pub(super) struct SolveParts {
    pub increments: Vec<DMatrix<f64>>,
    pub kernel: Vec<DMatrix<f64>>,
    pub rcond: f64,
    pub regularized: bool,
}

pub fn estimate_propagator(tape: &MarketTape, cfg: &PropagatorConfig) -> Result<PropagatorEstimate> {
    let n = tape.n_assets;
    let p = cfg.p;
    if p < 1 {
        return Err(Error::InvalidParameter("lag cutoff p must be >= 1".into()));
    }
    if tape.n_steps() < cfg.min_steps_per_lag * n * p {
        return Err(Error::InsufficientData(format!(
            "tape has {} steps, need at least {} for N = {n}, p = {p}",
            tape.n_steps(),
            cfg.min_steps_per_lag * n * p
        )));
    }
    let days = tape.day_ranges();
    if days.iter().all(|d| d.len() <= 2 * p) {
        return Err(Error::InsufficientData(format!(
            "lag cutoff p = {p} is not below any day's step count"
        )));
    }

    let (agg, parts) = estimate_from_days(tape, &days, cfg)?;
    let mut warnings = Vec::new();
    if parts.regularized {
        warnings.push(format!(
            "sign-correlation matrix near-singular (rcond = {:.3e}); ridge applied",
            parts.rcond
        ));
    }
    if agg.days_skipped > 0 {
        warnings.push(format!("{} day(s) skipped: fewer than 2p+1 steps", agg.days_skipped));
    }

    // per-day replicates for inference
    let mut replicates = Vec::new();
    for day in &days {
        if day.len() <= 2 * p {
            continue;
        }
        if let Ok((_, day_parts)) = estimate_from_days(tape, &[day.clone()], cfg) {
            replicates.push(day_parts.kernel);
        }
    }
    let kernel_std_error = if replicates.len() >= 2 {
        let w = replicates.len() as f64;
        let mut se = Vec::with_capacity(p + 1);
        for l in 0..=p {
            let mean = replicates.iter().map(|r| &r[l]).fold(DMatrix::zeros(n, n), |a, b| a + b) / w;
            let var = replicates
                .iter()
                .map(|r| {
                    let d = &r[l] - &mean;
                    d.component_mul(&d)
                })
                .fold(DMatrix::zeros(n, n), |a, b| a + b)
                / (w - 1.0);
            se.push(var.map(|v| (v / w).sqrt()));
        }
        Some(se)
    } else {
        None
    };

    Ok(PropagatorEstimate {
        n_assets: n,
        p,
        mode: cfg.mode,
        s_tilde: agg.s,
        c_tilde: (0..p).map(|m| agg.c[p - 1 + m].clone()).collect(),
        c_tilde_neg: (1..p).map(|m| agg.c[p - 1 - m].clone()).collect(),
        increments: parts.increments,
        kernel: parts.kernel,
        replicates,
        kernel_std_error,
        rcond: parts.rcond,
        regularized: parts.regularized,
        trigger_counts: agg.trigger_counts,
        warnings,
    })
}

/// An estimated propagator converted back to kernel-spec form: linear impact
/// `η̃^{ij} = H^{ij}(1)` and tabulated decay `G^{ij}(ℓ) = H^{ij}(ℓ+1)/H^{ij}(1)`.
#[derive(Debug, Clone)]
pub struct TabulatedSpec {
    pub spec: KernelSpec,
    /// Pairs whose kernel changes sign across lags; their normalization is
    /// ill-posed and the tabulated entry should not be trusted.
    pub unusable: Vec<(usize, usize)>,
}

pub fn to_kernel_spec(est: &PropagatorEstimate) -> Result<TabulatedSpec> {
    let n = est.n_assets;
    let p = est.p;
    let h1 = &est.kernel[1];
    let scale = h1.amax();
    if scale == 0.0 {
        return Err(Error::Numerical("kernel at lag 1 is identically zero; nothing to normalize".into()));
    }
    let mut g = Vec::with_capacity(n);
    let mut f = Vec::with_capacity(n);
    let mut unusable = Vec::new();
    for i in 0..n {
        let mut g_row = Vec::with_capacity(n);
        let mut f_row = Vec::with_capacity(n);
        for j in 0..n {
            let anchor = h1[(i, j)];
            if anchor == 0.0 {
                return Err(Error::Numerical(format!(
                    "H[{i}][{j}](1) = 0: kernel normalization undefined"
                )));
            }
            let mut values = Vec::with_capacity(p);
            let mut flipped = false;
            for l in 0..p {
                let v = est.kernel[l + 1][(i, j)] / anchor;
                if v < 0.0 {
                    flipped = true;
                }
                values.push(v);
            }
            if flipped {
                unusable.push((i, j));
            }
            g_row.push(DecayKernel::Tabulated {
                lags: (0..p).map(|l| l as f64).collect(),
                values,
                assert_monotone: false,
                assert_strictly_decreasing: false,
            });
            f_row.push(ImpactFunction::Linear { eta: anchor });
        }
        g.push(g_row);
        f.push(f_row);
    }
    Ok(TabulatedSpec { spec: KernelSpec::new(g, f, None)?, unusable })
}
