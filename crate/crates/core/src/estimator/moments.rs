//! Per-day moment accumulation for the propagator system.
//!
//! For a day with steps `[d0, d1)` and lag cutoff `p`, the conditioning
//! window is `t ∈ [d0 + p - 1, d1 - 1 - p]`: wide enough that every product
//! the linear system refers to — `r_{t+ℓ}` for `ℓ < p` and `(εI)_{t+m}` for
//! `|m| < p` — stays inside the day. Using one common window for every lag
//! makes the in-sample identity `S̃(ℓ) = Σ_n 𝓗(n) C̃(ℓ-n)` exact, which is
//! what lets noiseless planted tapes be recovered to machine precision.

use nalgebra::DMatrix;

use super::EstimMode;
use crate::tape::MarketTape;

pub(super) struct DayMoments {
    /// `s[ℓ]` accumulates `Σ_t r_{t+ℓ} z_t^T` (an N×N block per lag).
    pub s: Vec<DMatrix<f64>>,
    /// `c[p-1+m]` accumulates `Σ_t z_{t+m} z_t^T` for `m ∈ [-(p-1), p-1]`.
    pub c: Vec<DMatrix<f64>>,
    /// Number of conditioning steps in the window.
    pub window_len: usize,
    /// Trades per asset inside the window (the triggering counts).
    pub trigger_counts: Vec<usize>,
}

/// Regressor value `z^j_t`: signed indicator, or signed traded value.
#[inline]
pub(super) fn regressor(tape: &MarketTape, step: usize, asset: usize, mode: EstimMode) -> f64 {
    match mode {
        EstimMode::Events => tape.eps_i(step, asset),
        EstimMode::Value => tape.eps_i(step, asset).signum() * tape.trade_value(step, asset),
    }
}

/// Accumulate one day's moments; `None` when the day is too short for the
/// window (needs at least `2p + 1` steps, and `2p + 1` mids for the returns).
pub(super) fn day_moments(
    tape: &MarketTape,
    day: std::ops::Range<usize>,
    p: usize,
    mode: EstimMode,
) -> Option<DayMoments> {
    let n = tape.n_assets;
    let d0 = day.start;
    let d1 = day.end;
    let len = d1 - d0;
    if len < 2 * p + 1 {
        return None;
    }
    let w_lo = d0 + p - 1;
    let w_hi = d1 - 1 - p; // inclusive
    if w_hi < w_lo {
        return None;
    }

    let mut s = vec![DMatrix::zeros(n, n); p];
    let mut c = vec![DMatrix::zeros(n, n); 2 * p - 1];
    let mut trigger_counts = vec![0usize; n];

    // day-local returns r_t = X_{t+1} - X_t, defined for t in [d0, d1-2]
    let r = |t: usize, i: usize| tape.mid(t + 1, i) - tape.mid(t, i);

    for t in w_lo..=w_hi {
        for j in 0..n {
            if !tape.has_trade(t, j) {
                continue;
            }
            trigger_counts[j] += 1;
            let z_j = regressor(tape, t, j, mode);
            for (l, s_l) in s.iter_mut().enumerate() {
                let tl = t + l;
                for i in 0..n {
                    s_l[(i, j)] += r(tl, i) * z_j;
                }
            }
            for m in -(p as i64 - 1)..=(p as i64 - 1) {
                let tm = (t as i64 + m) as usize;
                let c_m = &mut c[(m + p as i64 - 1) as usize];
                for k in 0..n {
                    if tape.has_trade(tm, k) {
                        c_m[(k, j)] += regressor(tape, tm, k, mode) * z_j;
                    }
                }
            }
        }
    }

    Some(DayMoments { s, c, window_len: w_hi - w_lo + 1, trigger_counts })
}

/// Weighted aggregation across days. Weights apply per *column* (triggering
/// asset): each day's mean moment in column `j` enters with weight `w_{jd}`,
/// so the in-sample identity survives averaging.
pub(super) struct Aggregated {
    pub s: Vec<DMatrix<f64>>,
    pub c: Vec<DMatrix<f64>>,
    pub trigger_counts: Vec<usize>,
    pub days_used: usize,
    pub days_skipped: usize,
}

pub(super) fn aggregate_days(
    tape: &MarketTape,
    days: &[std::ops::Range<usize>],
    p: usize,
    mode: EstimMode,
    weighted: bool,
) -> Aggregated {
    let n = tape.n_assets;
    let mut s_acc = vec![DMatrix::zeros(n, n); p];
    let mut c_acc = vec![DMatrix::zeros(n, n); 2 * p - 1];
    let mut weight_sum = vec![0.0f64; n];
    let mut trigger_counts = vec![0usize; n];
    let mut days_used = 0;
    let mut days_skipped = 0;

    for day in days {
        let Some(dm) = day_moments(tape, day.clone(), p, mode) else {
            days_skipped += 1;
            continue;
        };
        days_used += 1;
        let inv_len = 1.0 / dm.window_len as f64;
        for j in 0..n {
            let w = if weighted { dm.trigger_counts[j] as f64 } else { 1.0 };
            if w == 0.0 {
                continue;
            }
            weight_sum[j] += w;
            trigger_counts[j] += dm.trigger_counts[j];
            let scale = w * inv_len;
            for (acc, day_s) in s_acc.iter_mut().zip(dm.s.iter()) {
                for i in 0..n {
                    acc[(i, j)] += day_s[(i, j)] * scale;
                }
            }
            for (acc, day_c) in c_acc.iter_mut().zip(dm.c.iter()) {
                for k in 0..n {
                    acc[(k, j)] += day_c[(k, j)] * scale;
                }
            }
        }
    }

    for j in 0..n {
        if weight_sum[j] > 0.0 {
            let inv = 1.0 / weight_sum[j];
            for acc in s_acc.iter_mut().chain(c_acc.iter_mut()) {
                for i in 0..n {
                    acc[(i, j)] *= inv;
                }
            }
        }
    }

    Aggregated { s: s_acc, c: c_acc, trigger_counts, days_used, days_skipped }
}
