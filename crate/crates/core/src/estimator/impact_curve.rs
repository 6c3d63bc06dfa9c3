//! Instantaneous impact as a function of trade size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{MarketTape, TimeUnit};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpactBin {
    pub volume_lo: f64,
    pub volume_hi: f64,
    pub volume_mean: f64,
    /// Mean signed return over the horizon, conditional on the bin.
    pub mean_impact: f64,
    pub std_error: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairCurve {
    pub asset_i: usize,
    pub asset_j: usize,
    pub bins: Vec<ImpactBin>,
    pub n_conditioning: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpactCurve {
    pub pairs: Vec<PairCurve>,
    pub horizon: f64,
    pub isolated: bool,
}

/// Measured impact `f̂^{ij}(V)`: the expected return of asset `i` from just
/// before a trade in asset `j` of size `V` until `horizon` later, times the
/// trade sign, in volume bins. With an isolation window, conditioning trades
/// accompanied by any other trade inside the window are excluded.
///
/// The horizon and the window are in the tape's time unit: steps for
/// synthetic tapes, seconds for ingested ones.
pub fn impact_curve(
    tape: &MarketTape,
    horizon: f64,
    isolation_window: Option<(f64, f64)>,
    n_bins: Option<usize>,
) -> Result<ImpactCurve> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let max_span = match tape.time_unit {
        TimeUnit::Steps => (tape.n_steps() - 1) as f64,
        TimeUnit::Seconds => {
            (tape.timestamps_ms[tape.n_steps() - 1] - tape.timestamps_ms[0]) as f64 / 1000.0
        }
    };
    if horizon > max_span {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} exceeds the tape span {max_span}"
        )));
    }

    let n = tape.n_assets;
    let days = tape.day_ranges();
    let mut pairs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            // (volume, signed return) samples conditional on a trade in j
            let mut samples: Vec<(f64, f64)> = Vec::new();
            for day in &days {
                for t in day.clone() {
                    let eps = tape.eps_i(t, j);
                    if eps == 0.0 {
                        continue;
                    }
                    if let Some((before, after)) = isolation_window {
                        if !is_isolated(tape, day.clone(), t, j, before, after) {
                            continue;
                        }
                    }
                    let Some(t_h) = horizon_step(tape, day.clone(), t, horizon) else {
                        continue;
                    };
                    let ret = tape.mid(t_h, i) - tape.mid(t, i);
                    samples.push((tape.volumes[tape.idx(t, j)], ret * eps));
                }
            }
            let n_cond = samples.len();
            let bins = bin_samples(samples, n_bins);
            pairs.push(PairCurve { asset_i: i, asset_j: j, bins, n_conditioning: n_cond });
        }
    }
    Ok(ImpactCurve { pairs, horizon, isolated: isolation_window.is_some() })
}

/// Step whose mid is the prevailing price `horizon` after step `t`, within
/// the same day. In step units that is simply `t + horizon`; in seconds it is
/// the first step past the horizon (its mid is sampled just before it).
fn horizon_step(tape: &MarketTape, day: std::ops::Range<usize>, t: usize, horizon: f64) -> Option<usize> {
    match tape.time_unit {
        TimeUnit::Steps => {
            let t_h = t + horizon.round() as usize;
            (t_h < day.end).then_some(t_h)
        }
        TimeUnit::Seconds => {
            let target = tape.timestamps_ms[t] + (horizon * 1000.0).round() as i64;
            let mut k = t + 1;
            while k < day.end && tape.timestamps_ms[k] <= target {
                k += 1;
            }
            (k < day.end).then_some(k)
        }
    }
}

fn is_isolated(
    tape: &MarketTape,
    day: std::ops::Range<usize>,
    t: usize,
    j: usize,
    before: f64,
    after: f64,
) -> bool {
    let in_window = |s: usize| -> bool {
        match tape.time_unit {
            TimeUnit::Steps => {
                let d = s as f64 - t as f64;
                d >= -before && d <= after
            }
            TimeUnit::Seconds => {
                let d = (tape.timestamps_ms[s] - tape.timestamps_ms[t]) as f64 / 1000.0;
                d >= -before && d <= after
            }
        }
    };
    let mut s = t;
    loop {
        for a in 0..tape.n_assets {
            if tape.has_trade(s, a) && !(s == t && a == j) {
                return false;
            }
        }
        if s == day.start || !in_window(s - 1) {
            break;
        }
        s -= 1;
    }
    let mut s = t + 1;
    while s < day.end && in_window(s) {
        for a in 0..tape.n_assets {
            if tape.has_trade(s, a) {
                return false;
            }
        }
        s += 1;
    }
    true
}

/// Equal-count (quantile) bins; the default bin count grows with the number
/// of conditioning trades as `clamp(⌊√n / 5⌋, 5, 50)`.
fn bin_samples(mut samples: Vec<(f64, f64)>, n_bins: Option<usize>) -> Vec<ImpactBin> {
    if samples.is_empty() {
        return Vec::new();
    }
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n = samples.len();
    let distinct = {
        let mut d = 1;
        for w in samples.windows(2) {
            if w[1].0 > w[0].0 {
                d += 1;
            }
        }
        d
    };
    let want = n_bins
        .unwrap_or_else(|| (((n as f64).sqrt() / 5.0).floor() as usize).clamp(5, 50))
        .clamp(1, n)
        .min(distinct);

    let mut bins = Vec::with_capacity(want);
    let mut start = 0usize;
    for b in 0..want {
        let mut end = ((b + 1) * n) / want;
        // never split identical volumes across bins
        while end < n && end > 0 && samples[end].0 == samples[end - 1].0 {
            end += 1;
        }
        if end <= start {
            continue;
        }
        let chunk = &samples[start..end];
        let count = chunk.len();
        let v_mean = chunk.iter().map(|s| s.0).sum::<f64>() / count as f64;
        let mean = chunk.iter().map(|s| s.1).sum::<f64>() / count as f64;
        let var = if count > 1 {
            chunk.iter().map(|s| (s.1 - mean).powi(2)).sum::<f64>() / (count as f64 - 1.0)
        } else {
            0.0
        };
        bins.push(ImpactBin {
            volume_lo: chunk[0].0,
            volume_hi: chunk[count - 1].0,
            volume_mean: v_mean,
            mean_impact: mean,
            std_error: (var / count as f64).sqrt(),
            count,
        });
        start = end;
    }
    bins
}
