//! Trade/quote CSV ingestion into a combined-trade-time tape.
//!
//! Trades sharing a millisecond timestamp collapse into one combined-time
//! step. Mids are sampled *strictly before* each step's timestamp (a quote at
//! the same millisecond as a trade is taken to precede it). Unsigned trades
//! are classified by the quote rule (at ask → buy, at bid → sell) with a tick
//! test as fallback; trades that stay unclassifiable are dropped and counted.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{MarketTape, TimeUnit};

const MS_PER_DAY: i64 = 86_400_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Session window as milliseconds since midnight (UTC); trades outside
    /// are dropped. Defaults to 10:00–17:00.
    pub session_start_ms: i64,
    pub session_end_ms: i64,
    /// Absolute-timestamp exclusion windows (volatility auctions etc.).
    pub exclusion_windows_ms: Vec<(i64, i64)>,
    /// Relative tolerance when matching a trade price to the best quote.
    pub quote_match_tol: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            session_start_ms: 10 * 3_600_000,
            session_end_ms: 17 * 3_600_000,
            exclusion_windows_ms: Vec::new(),
            quote_match_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub trades_read: usize,
    pub quotes_read: usize,
    pub trades_kept: usize,
    pub dropped_outside_session: usize,
    pub dropped_exclusion_window: usize,
    pub dropped_unclassified: usize,
    /// Steps discarded because some asset had no strictly-earlier quote yet.
    pub dropped_warmup_steps: usize,
    pub classified_given: usize,
    pub classified_quote_rule: usize,
    pub classified_tick_test: usize,
    pub asset_ids: Vec<String>,
}

#[derive(Debug, Clone)]
struct RawTrade {
    ts: i64,
    asset: usize,
    price: f64,
    volume: f64,
    sign: Option<i8>,
}

#[derive(Debug, Clone, Copy)]
struct RawQuote {
    ts: i64,
    bid: f64,
    ask: f64,
}

fn parse_ts(field: &str, row: usize, file: &str) -> Result<i64> {
    field
        .trim()
        .parse::<i64>()
        .map_err(|e| Error::Validation(format!("{file} row {row}: bad timestamp_ms: {e}")))
}

fn parse_f64(field: &str, row: usize, file: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Validation(format!("{file} row {row}: bad {what}: {e}")))
}

/// Ingest raw trade and quote streams.
///
/// Trades: `timestamp_ms, asset_id, price, face_volume[, sign]`.
/// Quotes: `timestamp_ms, asset_id, best_bid, best_ask`.
/// Both files must be sorted by timestamp.
pub fn ingest_csv<R1: Read, R2: Read>(
    trades: R1,
    quotes: R2,
    cfg: &IngestConfig,
) -> Result<(MarketTape, IngestReport)> {
    let mut report = IngestReport::default();

    // quotes, keyed by asset id
    let mut quote_map: BTreeMap<String, Vec<RawQuote>> = BTreeMap::new();
    {
        let mut rdr = csv::Reader::from_reader(quotes);
        let mut last_ts = i64::MIN;
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 4 {
                return Err(Error::Validation(format!("quotes row {row}: need 4 columns")));
            }
            let ts = parse_ts(&rec[0], row, "quotes")?;
            if ts < last_ts {
                return Err(Error::Validation(format!("quotes row {row}: file not sorted by timestamp")));
            }
            last_ts = ts;
            let bid = parse_f64(&rec[2], row, "quotes", "best_bid")?;
            let ask = parse_f64(&rec[3], row, "quotes", "best_ask")?;
            if !(bid > 0.0 && ask > 0.0 && ask >= bid) {
                return Err(Error::Validation(format!(
                    "quotes row {row}: need 0 < bid <= ask, got {bid}/{ask}"
                )));
            }
            quote_map
                .entry(rec[1].trim().to_string())
                .or_default()
                .push(RawQuote { ts, bid, ask });
            report.quotes_read += 1;
        }
    }
    if quote_map.is_empty() {
        return Err(Error::Validation("quote file is empty".into()));
    }

    // trades
    let mut raw_trades: Vec<RawTrade> = Vec::new();
    let mut asset_ids: Vec<String> = Vec::new();
    {
        let mut rdr = csv::Reader::from_reader(trades);
        let has_sign = rdr
            .headers()?
            .iter()
            .any(|h| h.trim().eq_ignore_ascii_case("sign"));
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut last_ts = i64::MIN;
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 4 {
                return Err(Error::Validation(format!("trades row {row}: need at least 4 columns")));
            }
            report.trades_read += 1;
            let ts = parse_ts(&rec[0], row, "trades")?;
            if ts < last_ts {
                return Err(Error::Validation(format!("trades row {row}: file not sorted by timestamp")));
            }
            last_ts = ts;
            let id = rec[1].trim().to_string();
            if !quote_map.contains_key(&id) {
                return Err(Error::Validation(format!(
                    "trades row {row}: asset {id} has no quotes"
                )));
            }
            let asset = *index.entry(id.clone()).or_insert_with(|| {
                asset_ids.push(id.clone());
                asset_ids.len() - 1
            });
            let price = parse_f64(&rec[2], row, "trades", "price")?;
            let volume = parse_f64(&rec[3], row, "trades", "face_volume")?;
            let sign = if has_sign {
                let f = rec.get(4).unwrap_or("").trim();
                if f.is_empty() {
                    None
                } else {
                    let s: i8 = f
                        .parse()
                        .map_err(|e| Error::Validation(format!("trades row {row}: bad sign: {e}")))?;
                    if !matches!(s, -1 | 1) {
                        return Err(Error::Validation(format!(
                            "trades row {row}: sign must be -1 or +1, got {s}"
                        )));
                    }
                    Some(s)
                }
            } else {
                None
            };

            // session and exclusion filters apply to trades only
            let tod = ts.rem_euclid(MS_PER_DAY);
            if tod < cfg.session_start_ms || tod >= cfg.session_end_ms {
                report.dropped_outside_session += 1;
                continue;
            }
            if cfg
                .exclusion_windows_ms
                .iter()
                .any(|&(lo, hi)| ts >= lo && ts < hi)
            {
                report.dropped_exclusion_window += 1;
                continue;
            }
            raw_trades.push(RawTrade { ts, asset, price, volume, sign });
        }
    }

    let n_assets = asset_ids.len();
    if n_assets == 0 {
        return Err(Error::Validation("no trades survived ingestion filters".into()));
    }
    // deterministic asset order, independent of first appearance
    {
        let mut order: Vec<usize> = (0..n_assets).collect();
        order.sort_by(|&a, &b| asset_ids[a].cmp(&asset_ids[b]));
        let mut relabel = vec![0usize; n_assets];
        for (new_idx, &old_idx) in order.iter().enumerate() {
            relabel[old_idx] = new_idx;
        }
        let sorted_ids: Vec<String> = order.iter().map(|&o| asset_ids[o].clone()).collect();
        asset_ids = sorted_ids;
        for tr in &mut raw_trades {
            tr.asset = relabel[tr.asset];
        }
    }
    let asset_quotes: Vec<&Vec<RawQuote>> = asset_ids
        .iter()
        .map(|id| quote_map.get(id).expect("checked during trade parse"))
        .collect();

    // classification state for the tick test
    let mut last_price: Vec<Option<f64>> = vec![None; n_assets];
    let mut last_direction: Vec<Option<i8>> = vec![None; n_assets];
    let mut quote_ptr: Vec<usize> = vec![0; n_assets];

    let mut timestamps = Vec::new();
    let mut mid_logs: Vec<f64> = Vec::new();
    let mut signs: Vec<i8> = Vec::new();
    let mut volumes: Vec<f64> = Vec::new();
    let mut prices: Vec<f64> = Vec::new();
    let mut day_starts: Vec<usize> = Vec::new();
    let mut last_day: Option<i64> = None;

    let mut k = 0usize;
    while k < raw_trades.len() {
        let ts = raw_trades[k].ts;
        let mut group_end = k + 1;
        while group_end < raw_trades.len() && raw_trades[group_end].ts == ts {
            group_end += 1;
        }
        let group = &raw_trades[k..group_end];
        k = group_end;

        // prevailing mid per asset, strictly before ts
        let mut mids = vec![f64::NAN; n_assets];
        let mut warm = true;
        for a in 0..n_assets {
            let qs = asset_quotes[a];
            let mut ptr = quote_ptr[a];
            while ptr < qs.len() && qs[ptr].ts < ts {
                ptr += 1;
            }
            quote_ptr[a] = ptr;
            if ptr == 0 {
                warm = false;
            } else {
                let q = qs[ptr - 1];
                mids[a] = (0.5 * (q.bid + q.ask)).ln();
            }
        }
        if !warm {
            report.dropped_warmup_steps += 1;
            // tick-test state still advances on the dropped step's prints
            for tr in group {
                update_tick_state(&mut last_price, &mut last_direction, tr);
            }
            continue;
        }

        let mut step_signs = vec![0i8; n_assets];
        let mut step_vols = vec![0.0; n_assets];
        let mut step_prices = vec![0.0; n_assets];
        let mut any = false;
        for tr in group {
            let a = tr.asset;
            let sign = match tr.sign {
                Some(s) => {
                    report.classified_given += 1;
                    Some(s)
                }
                None => {
                    let qs = asset_quotes[a];
                    let q = qs[quote_ptr[a] - 1];
                    let tol = cfg.quote_match_tol * tr.price.abs().max(1.0);
                    if (tr.price - q.ask).abs() <= tol {
                        report.classified_quote_rule += 1;
                        Some(1)
                    } else if (tr.price - q.bid).abs() <= tol {
                        report.classified_quote_rule += 1;
                        Some(-1)
                    } else {
                        match tick_test(&last_price, &last_direction, tr) {
                            Some(s) => {
                                report.classified_tick_test += 1;
                                Some(s)
                            }
                            None => None,
                        }
                    }
                }
            };
            update_tick_state(&mut last_price, &mut last_direction, tr);
            match sign {
                Some(s) => {
                    step_signs[a] = s;
                    step_vols[a] = tr.volume;
                    step_prices[a] = tr.price;
                    any = true;
                    report.trades_kept += 1;
                }
                None => report.dropped_unclassified += 1,
            }
        }
        if !any {
            continue;
        }

        let day = ts.div_euclid(MS_PER_DAY);
        if last_day != Some(day) {
            day_starts.push(timestamps.len());
            last_day = Some(day);
        }
        timestamps.push(ts);
        mid_logs.extend_from_slice(&mids);
        signs.extend_from_slice(&step_signs);
        volumes.extend_from_slice(&step_vols);
        prices.extend_from_slice(&step_prices);
    }

    report.asset_ids = asset_ids.clone();
    let tape = MarketTape {
        n_assets,
        time_unit: TimeUnit::Seconds,
        timestamps_ms: timestamps,
        mid_logs,
        signs,
        volumes,
        prices,
        day_starts,
        asset_ids,
    };
    if tape.n_steps() == 0 {
        return Err(Error::Validation("no steps survived ingestion".into()));
    }
    tape.validate()?;
    Ok((tape, report))
}

fn update_tick_state(last_price: &mut [Option<f64>], last_direction: &mut [Option<i8>], tr: &RawTrade) {
    let a = tr.asset;
    if let Some(prev) = last_price[a] {
        if tr.price > prev {
            last_direction[a] = Some(1);
        } else if tr.price < prev {
            last_direction[a] = Some(-1);
        }
    }
    last_price[a] = Some(tr.price);
}

/// Tick test: uptick → buy, downtick → sell, zero tick → last direction.
fn tick_test(last_price: &[Option<f64>], last_direction: &[Option<i8>], tr: &RawTrade) -> Option<i8> {
    let a = tr.asset;
    match last_price[a] {
        Some(prev) if tr.price > prev => Some(1),
        Some(prev) if tr.price < prev => Some(-1),
        Some(_) => last_direction[a],
        None => None,
    }
}

pub fn ingest_csv_paths(
    trades: &Path,
    quotes: &Path,
    cfg: &IngestConfig,
) -> Result<(MarketTape, IngestReport)> {
    let t = std::fs::File::open(trades)
        .map_err(|e| Error::Validation(format!("cannot open trades file {}: {e}", trades.display())))?;
    let q = std::fs::File::open(quotes)
        .map_err(|e| Error::Validation(format!("cannot open quotes file {}: {e}", quotes.display())))?;
    ingest_csv(std::io::BufReader::new(t), std::io::BufReader::new(q), cfg)
}

/// Export a tape as a (trades, quotes) CSV pair in the canonical raw schema.
/// Quotes are emitted one per step and asset, 500 ms before the step, with
/// `bid = ask = mid`; re-ingesting reproduces the tape's steps, mids, signs
/// and day structure.
pub fn export_csv<W1: std::io::Write, W2: std::io::Write>(
    tape: &MarketTape,
    trades_out: W1,
    quotes_out: W2,
) -> Result<()> {
    let mut tw = csv::Writer::from_writer(trades_out);
    tw.write_record(["timestamp_ms", "asset_id", "price", "face_volume", "sign"])?;
    let mut qw = csv::Writer::from_writer(quotes_out);
    qw.write_record(["timestamp_ms", "asset_id", "best_bid", "best_ask"])?;
    for step in 0..tape.n_steps() {
        let ts = tape.timestamps_ms[step];
        for a in 0..tape.n_assets {
            let mid = tape.mid(step, a).exp();
            qw.write_record([
                (ts - 500).to_string(),
                tape.asset_ids[a].clone(),
                mid.to_string(),
                mid.to_string(),
            ])?;
            if tape.has_trade(step, a) {
                let k = tape.idx(step, a);
                tw.write_record([
                    ts.to_string(),
                    tape.asset_ids[a].clone(),
                    tape.prices[k].to_string(),
                    tape.volumes[k].to_string(),
                    tape.signs[k].to_string(),
                ])?;
            }
        }
    }
    tw.flush()?;
    qw.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest_str(trades: &str, quotes: &str) -> Result<(MarketTape, IngestReport)> {
        ingest_csv(trades.as_bytes(), quotes.as_bytes(), &IngestConfig::default())
    }

    const TS0: i64 = 36_000_000 + 1000; // 10:00:01 on day 0

    #[test]
    fn same_millisecond_trades_share_a_step() {
        let quotes = format!(
            "timestamp_ms,asset_id,best_bid,best_ask\n\
             {q0},A,99.0,101.0\n\
             {q0},B,49.0,51.0\n",
            q0 = TS0 - 500
        );
        let trades = format!(
            "timestamp_ms,asset_id,price,face_volume\n\
             {TS0},A,101.0,10\n\
             {TS0},B,49.0,5\n"
        );
        let (tape, report) = ingest_str(&trades, &quotes).unwrap();
        assert_eq!(tape.n_steps(), 1);
        assert_eq!(report.trades_kept, 2);
        // at ask → buy, at bid → sell
        let a = tape.asset_ids.iter().position(|s| s == "A").unwrap();
        let b = tape.asset_ids.iter().position(|s| s == "B").unwrap();
        assert_eq!(tape.signs[tape.idx(0, a)], 1);
        assert_eq!(tape.signs[tape.idx(0, b)], -1);
        assert_eq!(report.classified_quote_rule, 2);
    }

    #[test]
    fn mid_uses_strictly_earlier_quote() {
        // a quote at the same millisecond as the trade counts as before it
        let quotes = format!(
            "timestamp_ms,asset_id,best_bid,best_ask\n\
             {},A,99.0,101.0\n\
             {TS0},A,100.0,102.0\n",
            TS0 - 2000
        );
        let trades = format!("timestamp_ms,asset_id,price,face_volume,sign\n{ts},A,101.0,10,1\n", ts = TS0 + 1);
        let (tape, _) = ingest_str(&trades, &quotes).unwrap();
        assert_eq!(tape.mid(0, 0), (101.0f64).ln());
    }

    #[test]
    fn tick_test_fallback_and_unclassified_drop() {
        let quotes = format!(
            "timestamp_ms,asset_id,best_bid,best_ask\n{},A,99.0,101.0\n",
            TS0 - 500
        );
        // first print mid-spread: unclassifiable; second at higher price: uptick buy
        let trades = format!(
            "timestamp_ms,asset_id,price,face_volume\n\
             {TS0},A,100.0,10\n\
             {},A,100.5,10\n",
            TS0 + 1000
        );
        let (tape, report) = ingest_str(&trades, &quotes).unwrap();
        assert_eq!(report.dropped_unclassified, 1);
        assert_eq!(report.classified_tick_test, 1);
        assert_eq!(tape.n_steps(), 1);
        assert_eq!(tape.signs[0], 1);
    }

    #[test]
    fn session_filter_drops_early_trades() {
        let quotes = format!(
            "timestamp_ms,asset_id,best_bid,best_ask\n{},A,99.0,101.0\n",
            TS0 - 3_600_000 - 500
        );
        let trades = format!(
            "timestamp_ms,asset_id,price,face_volume,sign\n\
             {},A,101.0,10,1\n\
             {TS0},A,101.0,10,1\n",
            TS0 - 3_600_000
        );
        let (tape, report) = ingest_str(&trades, &quotes).unwrap();
        assert_eq!(report.dropped_outside_session, 1);
        assert_eq!(tape.n_steps(), 1);
    }

    #[test]
    fn empty_quotes_is_an_error() {
        let trades = format!("timestamp_ms,asset_id,price,face_volume\n{TS0},A,100.0,10\n");
        let quotes = "timestamp_ms,asset_id,best_bid,best_ask\n";
        assert!(ingest_str(&trades, quotes).is_err());
    }

    #[test]
    fn asset_without_quotes_is_an_error() {
        let quotes = format!(
            "timestamp_ms,asset_id,best_bid,best_ask\n{},A,99.0,101.0\n",
            TS0 - 500
        );
        let trades = format!("timestamp_ms,asset_id,price,face_volume\n{TS0},B,100.0,10\n");
        assert!(ingest_str(&trades, &quotes).is_err());
    }

    #[test]
    fn unsorted_trades_rejected() {
        let quotes = format!(
            "timestamp_ms,asset_id,best_bid,best_ask\n{},A,99.0,101.0\n",
            TS0 - 500
        );
        let trades = format!(
            "timestamp_ms,asset_id,price,face_volume,sign\n\
             {},A,101.0,10,1\n\
             {TS0},A,101.0,10,1\n",
            TS0 + 1000
        );
        assert!(ingest_str(&trades, &quotes).is_err());
    }

    #[test]
    fn export_then_ingest_is_identity() {
        use crate::sim::{simulate, SimConfig};
        let cfg = SimConfig {
            n_assets: 2,
            h_true: vec![vec![vec![1e-4, 2e-5], vec![3e-5, 8e-5]]; 4],
            sign_persistence: vec![0.2, 0.4],
            cross_sign_corr: vec![vec![1.0, 0.3], vec![0.3, 1.0]],
            trade_intensity: vec![1.0, 2.0],
            simultaneity_prob: 0.05,
            noise_vol: vec![1e-4, 1e-4],
            volume_median: vec![100.0, 200.0],
            volume_sigma: vec![0.4, 0.4],
            spread_bp: vec![5.0, 8.0],
            initial_price: Vec::new(),
            seed: 42,
            n_steps: 400,
            steps_per_day: Some(150),
            impact_mode: Default::default(),
        };
        let tape = simulate(&cfg).unwrap();
        let mut tbuf = Vec::new();
        let mut qbuf = Vec::new();
        export_csv(&tape, &mut tbuf, &mut qbuf).unwrap();
        let (back, report) = ingest_csv(
            tbuf.as_slice(),
            qbuf.as_slice(),
            &IngestConfig::default(),
        )
        .unwrap();
        assert_eq!(report.dropped_unclassified, 0);
        assert_eq!(back.n_steps(), tape.n_steps());
        assert_eq!(back.day_starts, tape.day_starts);
        assert_eq!(back.timestamps_ms, tape.timestamps_ms);
        assert_eq!(back.signs, tape.signs);
        assert_eq!(back.volumes, tape.volumes);
        assert_eq!(back.prices, tape.prices);
        for (a, b) in back.mid_logs.iter().zip(tape.mid_logs.iter()) {
            approx::assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }
}
