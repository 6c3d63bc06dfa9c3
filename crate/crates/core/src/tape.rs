//! Market tapes: ordered event streams in combined trade time.
//!
//! Combined trade time advances by one unit for any unique timestamp carrying
//! at least one trade in any asset; a step can carry several trades. Each
//! step records every asset's mid log-price *just before* the step, so the
//! return over a step already excludes the step's own trades.
//!
//! Storage is column-oriented: per-asset fields are flattened step-major
//! (`idx = step * n_assets + asset`), which keeps multi-million-step tapes
//! compact.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    /// Synthetic tapes: horizons and isolation windows count steps.
    Steps,
    /// Ingested tapes: horizons and isolation windows are physical seconds.
    Seconds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketTape {
    pub n_assets: usize,
    pub time_unit: TimeUnit,
    /// Millisecond timestamp per step, strictly increasing.
    pub timestamps_ms: Vec<i64>,
    /// `X^i` just before each step, step-major.
    pub mid_logs: Vec<f64>,
    /// Trade sign in {-1, 0, +1}; 0 means no trade of that asset at the step.
    pub signs: Vec<i8>,
    /// Face volume of the trade (0 when absent).
    pub volumes: Vec<f64>,
    /// Execution price (0 when absent).
    pub prices: Vec<f64>,
    /// Index of the first step of each day; always starts with 0.
    pub day_starts: Vec<usize>,
    pub asset_ids: Vec<String>,
}

impl MarketTape {
    pub fn n_steps(&self) -> usize {
        self.timestamps_ms.len()
    }

    #[inline]
    pub fn idx(&self, step: usize, asset: usize) -> usize {
        step * self.n_assets + asset
    }

    #[inline]
    pub fn mid(&self, step: usize, asset: usize) -> f64 {
        self.mid_logs[self.idx(step, asset)]
    }

    /// Signed indicator `ε^i_t I^i_t ∈ {-1, 0, +1}` as a float.
    #[inline]
    pub fn eps_i(&self, step: usize, asset: usize) -> f64 {
        self.signs[self.idx(step, asset)] as f64
    }

    #[inline]
    pub fn has_trade(&self, step: usize, asset: usize) -> bool {
        self.signs[self.idx(step, asset)] != 0
    }

    /// Traded value `S · V` (mid just before the step times face volume), the
    /// regressor of the per-value estimation route; 0 without a trade.
    #[inline]
    pub fn trade_value(&self, step: usize, asset: usize) -> f64 {
        let k = self.idx(step, asset);
        if self.signs[k] == 0 {
            0.0
        } else {
            self.mid_logs[k].exp() * self.volumes[k]
        }
    }

    pub fn day_ranges(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.day_starts.len());
        for (d, &start) in self.day_starts.iter().enumerate() {
            let end = self.day_starts.get(d + 1).copied().unwrap_or(self.n_steps());
            out.push(start..end);
        }
        out
    }

    pub fn trade_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_assets];
        for step in 0..self.n_steps() {
            for a in 0..self.n_assets {
                if self.has_trade(step, a) {
                    counts[a] += 1;
                }
            }
        }
        counts
    }

    /// Step time in the tape's own unit (step index or seconds).
    pub fn time_of(&self, step: usize) -> f64 {
        match self.time_unit {
            TimeUnit::Steps => step as f64,
            TimeUnit::Seconds => self.timestamps_ms[step] as f64 / 1000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_steps();
        let per_asset = n * self.n_assets;
        if self.mid_logs.len() != per_asset
            || self.signs.len() != per_asset
            || self.volumes.len() != per_asset
            || self.prices.len() != per_asset
        {
            return Err(Error::DimensionMismatch("tape column lengths disagree".into()));
        }
        if self.asset_ids.len() != self.n_assets {
            return Err(Error::DimensionMismatch("asset id count disagrees with n_assets".into()));
        }
        for w in self.timestamps_ms.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Validation(format!(
                    "step timestamps must be strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if n > 0 && self.day_starts.first() != Some(&0) {
            return Err(Error::Validation("day starts must begin at step 0".into()));
        }
        for w in self.day_starts.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Validation("day starts must be strictly increasing".into()));
            }
        }
        if let Some(&last) = self.day_starts.last() {
            if n > 0 && last >= n {
                return Err(Error::Validation("day start beyond tape end".into()));
            }
        }
        for step in 0..n {
            let mut any = false;
            for a in 0..self.n_assets {
                let s = self.signs[self.idx(step, a)];
                if !matches!(s, -1 | 0 | 1) {
                    return Err(Error::Validation(format!("sign out of range at step {step}")));
                }
                any |= s != 0;
            }
            if !any {
                return Err(Error::Validation(format!(
                    "combined trade time requires at least one trade per step, step {step} has none"
                )));
            }
        }
        Ok(())
    }

    /// Canonical tape schema: one row per (step, asset) with empty trade
    /// fields when the asset did not trade at the step.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "step",
            "timestamp_ms",
            "day",
            "asset",
            "asset_id",
            "mid_log",
            "sign",
            "volume",
            "price",
        ])?;
        let days = self.day_ranges();
        let mut day = 0usize;
        for step in 0..self.n_steps() {
            while day + 1 < days.len() && step >= days[day].end {
                day += 1;
            }
            for a in 0..self.n_assets {
                let k = self.idx(step, a);
                let (sign, vol, price) = if self.signs[k] != 0 {
                    (
                        self.signs[k].to_string(),
                        self.volumes[k].to_string(),
                        self.prices[k].to_string(),
                    )
                } else {
                    (String::new(), String::new(), String::new())
                };
                w.write_record([
                    step.to_string(),
                    self.timestamps_ms[step].to_string(),
                    day.to_string(),
                    a.to_string(),
                    self.asset_ids[a].clone(),
                    self.mid_logs[k].to_string(),
                    sign,
                    vol,
                    price,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, time_unit: TimeUnit) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut timestamps = Vec::new();
        let mut mid_logs = Vec::new();
        let mut signs = Vec::new();
        let mut volumes = Vec::new();
        let mut prices = Vec::new();
        let mut day_starts = Vec::new();
        let mut asset_ids: Vec<String> = Vec::new();
        let mut n_assets = 0usize;
        let mut last_step: Option<usize> = None;
        let mut last_day: Option<usize> = None;

        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let ctx = |what: &str| Error::Validation(format!("tape csv row {row}: bad {what}"));
            let step: usize = rec.get(0).ok_or_else(|| ctx("step"))?.parse().map_err(|_| ctx("step"))?;
            let ts: i64 = rec.get(1).ok_or_else(|| ctx("timestamp"))?.parse().map_err(|_| ctx("timestamp"))?;
            let day: usize = rec.get(2).ok_or_else(|| ctx("day"))?.parse().map_err(|_| ctx("day"))?;
            let asset: usize = rec.get(3).ok_or_else(|| ctx("asset"))?.parse().map_err(|_| ctx("asset"))?;
            let asset_id = rec.get(4).ok_or_else(|| ctx("asset_id"))?.to_string();
            let mid: f64 = rec.get(5).ok_or_else(|| ctx("mid_log"))?.parse().map_err(|_| ctx("mid_log"))?;

            if asset >= n_assets {
                n_assets = asset + 1;
                asset_ids.resize(n_assets, String::new());
            }
            asset_ids[asset] = asset_id;

            if last_step != Some(step) {
                if step != timestamps.len() {
                    return Err(Error::Validation(format!(
                        "tape csv steps must be contiguous, expected {} got {step}",
                        timestamps.len()
                    )));
                }
                timestamps.push(ts);
                if last_day != Some(day) {
                    day_starts.push(step);
                    last_day = Some(day);
                }
                last_step = Some(step);
            }
            let needed = (step + 1) * n_assets;
            if mid_logs.len() < needed {
                mid_logs.resize(needed, f64::NAN);
                signs.resize(needed, 0i8);
                volumes.resize(needed, 0.0);
                prices.resize(needed, 0.0);
            }
            let k = step * n_assets + asset;
            mid_logs[k] = mid;
            let sign_field = rec.get(6).unwrap_or("");
            if !sign_field.is_empty() {
                signs[k] = sign_field.parse::<i8>().map_err(|_| ctx("sign"))?;
                volumes[k] = rec.get(7).ok_or_else(|| ctx("volume"))?.parse().map_err(|_| ctx("volume"))?;
                prices[k] = rec.get(8).ok_or_else(|| ctx("price"))?.parse().map_err(|_| ctx("price"))?;
            }
        }
        let tape = MarketTape {
            n_assets,
            time_unit,
            timestamps_ms: timestamps,
            mid_logs,
            signs,
            volumes,
            prices,
            day_starts,
            asset_ids,
        };
        tape.validate()?;
        Ok(tape)
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv_path(path: &Path, time_unit: TimeUnit) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?), time_unit)
    }
}

/// Hand-built single-day tape from per-step (asset, sign, volume) trades and
/// externally supplied mids. Used by tests across the crate.
pub fn tape_from_events(
    n_assets: usize,
    mids: &[Vec<f64>],
    trades: &[Vec<(usize, i8, f64)>],
    prices: Option<&[Vec<f64>]>,
) -> MarketTape {
    let n = mids.len();
    assert_eq!(trades.len(), n);
    let mut tape = MarketTape {
        n_assets,
        time_unit: TimeUnit::Steps,
        timestamps_ms: (0..n as i64).map(|k| 36_000_000 + k * 1000).collect(),
        mid_logs: vec![0.0; n * n_assets],
        signs: vec![0; n * n_assets],
        volumes: vec![0.0; n * n_assets],
        prices: vec![0.0; n * n_assets],
        day_starts: vec![0],
        asset_ids: (0..n_assets).map(|i| format!("asset_{i}")).collect(),
    };
    for step in 0..n {
        for a in 0..n_assets {
            tape.mid_logs[step * n_assets + a] = mids[step][a];
        }
        for (t_idx, &(a, s, v)) in trades[step].iter().enumerate() {
            let k = step * n_assets + a;
            tape.signs[k] = s;
            tape.volumes[k] = v;
            tape.prices[k] = prices
                .map(|p| p[step][t_idx])
                .unwrap_or_else(|| mids[step][a].exp());
        }
    }
    tape.validate().unwrap();
    tape
}
