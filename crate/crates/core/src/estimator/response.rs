//! Self- and cross-response functions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tape::MarketTape;

/// `R^{ij}(Δt) = E[(X^i_{t+Δt-} - X^i_{t-}) ε^j_t I^j_t]`: the unconditional
/// Δt-ahead return controlled for the order sign, averaged per day over a
/// common window and aggregated across days weighted by the trade count of
/// the triggering asset.
#[derive(Debug, Clone)]
pub struct ResponseFunction {
    pub lags: Vec<i64>,
    /// One N×N matrix per lag; `values[l][(i, j)]` is `R^{ij}(lags[l])`.
    pub values: Vec<DMatrix<f64>>,
    /// Pooled i.i.d.-approximation standard error of each cell.
    pub std_errors: Vec<DMatrix<f64>>,
    /// Trades of the triggering asset inside the windows; cells in column `j`
    /// of every lag share `counts[j]`. A zero count marks undefined cells.
    pub counts: Vec<usize>,
}

pub fn response(tape: &MarketTape, lags: &[i64]) -> Result<ResponseFunction> {
    let n = tape.n_assets;
    if lags.is_empty() {
        return Err(Error::InvalidParameter("need at least one lag".into()));
    }
    let max_pos = lags.iter().copied().max().unwrap().max(0) as usize;
    let max_neg = (-lags.iter().copied().min().unwrap()).max(0) as usize;
    if max_pos.max(max_neg) >= tape.n_steps() {
        return Err(Error::InvalidParameter(format!(
            "lag out of range for a tape of {} steps",
            tape.n_steps()
        )));
    }

    let mut acc: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); lags.len()];
    let mut acc_sq: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); lags.len()];
    let mut weight_sum = vec![0.0f64; n];
    let mut counts = vec![0usize; n];
    let mut steps_total = vec![0usize; n];

    for day in tape.day_ranges() {
        if day.len() <= max_pos + max_neg {
            continue;
        }
        let w_lo = day.start + max_neg;
        let w_hi = day.end - 1 - max_pos; // inclusive
        if w_hi < w_lo {
            continue;
        }
        let window_len = (w_hi - w_lo + 1) as f64;
        let mut day_acc: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); lags.len()];
        let mut day_sq: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); lags.len()];
        let mut day_counts = vec![0usize; n];
        for t in w_lo..=w_hi {
            for j in 0..n {
                let eps = tape.eps_i(t, j);
                if eps == 0.0 {
                    continue;
                }
                day_counts[j] += 1;
                for (l, &lag) in lags.iter().enumerate() {
                    let tl = (t as i64 + lag) as usize;
                    for i in 0..n {
                        let q = (tape.mid(tl, i) - tape.mid(t, i)) * eps;
                        day_acc[l][(i, j)] += q;
                        day_sq[l][(i, j)] += q * q;
                    }
                }
            }
        }
        for j in 0..n {
            let w = day_counts[j] as f64;
            if w == 0.0 {
                continue;
            }
            weight_sum[j] += w;
            counts[j] += day_counts[j];
            steps_total[j] += w_hi - w_lo + 1;
            for l in 0..lags.len() {
                for i in 0..n {
                    acc[l][(i, j)] += day_acc[l][(i, j)] / window_len * w;
                    acc_sq[l][(i, j)] += day_sq[l][(i, j)] / window_len * w;
                }
            }
        }
    }

    let mut std_errors = vec![DMatrix::zeros(n, n); lags.len()];
    for j in 0..n {
        if weight_sum[j] > 0.0 {
            for l in 0..lags.len() {
                for i in 0..n {
                    acc[l][(i, j)] /= weight_sum[j];
                    let m2 = acc_sq[l][(i, j)] / weight_sum[j];
                    let var = (m2 - acc[l][(i, j)].powi(2)).max(0.0);
                    std_errors[l][(i, j)] = (var / steps_total[j].max(1) as f64).sqrt();
                }
            }
        }
    }

    Ok(ResponseFunction { lags: lags.to_vec(), values: acc, std_errors, counts })
}
