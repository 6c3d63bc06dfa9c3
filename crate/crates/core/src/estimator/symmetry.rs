//! Statistical tests of cross-impact symmetry on windowed kernel estimates.

use serde::{Deserialize, Serialize};

use super::propagator::{estimate_from_days, PropagatorConfig};
use crate::error::{Error, Result};
use crate::stats::t_test_one_sample;
use crate::tape::MarketTape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Weekly,
    Biweekly,
    Monthly,
}

impl Aggregation {
    /// Trading days per window.
    pub fn days(self) -> usize {
        match self {
            Aggregation::Weekly => 5,
            Aggregation::Biweekly => 10,
            Aggregation::Monthly => 21,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Aggregation::Weekly => "weekly",
            Aggregation::Biweekly => "bi-weekly",
            Aggregation::Monthly => "monthly",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSymmetry {
    pub asset_i: usize,
    pub asset_j: usize,
    /// Per-window asymmetries `ΔH^{ij}_w = H^{ij}_w(1) - H^{ji}_w(1)`.
    pub deltas: Vec<f64>,
    pub mean: f64,
    /// `None` with fewer than two usable windows.
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryTest {
    pub aggregation: Aggregation,
    pub mode: super::EstimMode,
    pub n_windows: usize,
    pub skipped_windows: usize,
    pub pairs: Vec<PairSymmetry>,
}

impl SymmetryTest {
    /// Fraction of testable pairs rejected at the given two-sided level.
    pub fn rejection_rate(&self, level: f64) -> Option<f64> {
        let tested: Vec<&PairSymmetry> = self.pairs.iter().filter(|p| p.p_value.is_some()).collect();
        if tested.is_empty() {
            return None;
        }
        let rejected = tested.iter().filter(|p| p.p_value.unwrap() < level).count();
        Some(rejected as f64 / tested.len() as f64)
    }

    /// Rejection percentages at the 1%, 5% and 10% levels.
    pub fn rejection_row(&self) -> [Option<f64>; 3] {
        [
            self.rejection_rate(0.01),
            self.rejection_rate(0.05),
            self.rejection_rate(0.10),
        ]
    }
}

/// Split days into consecutive complete windows, estimate the kernel per
/// window, and run a per-pair one-sample two-sided t-test on the lag-1
/// asymmetry across windows.
pub fn symmetry_test(
    tape: &MarketTape,
    cfg: &PropagatorConfig,
    aggregation: Aggregation,
) -> Result<SymmetryTest> {
    let n = tape.n_assets;
    let days = tape.day_ranges();
    let per = aggregation.days();
    let n_windows_raw = days.len() / per;
    if n_windows_raw < 2 {
        return Err(Error::InsufficientData(format!(
            "{} day(s) make {} {} window(s); need at least 2",
            days.len(),
            n_windows_raw,
            aggregation.label()
        )));
    }

    let mut window_kernels = Vec::new();
    let mut skipped = 0usize;
    for w in 0..n_windows_raw {
        let chunk = &days[w * per..(w + 1) * per];
        match estimate_from_days(tape, chunk, cfg) {
            Ok((_, parts)) => window_kernels.push(parts.kernel),
            Err(_) => skipped += 1,
        }
    }
    if window_kernels.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two windows had enough data for the kernel estimate".into(),
        ));
    }

    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let deltas: Vec<f64> = window_kernels
                .iter()
                .map(|k| k[1][(i, j)] - k[1][(j, i)])
                .collect();
            let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
            let test = t_test_one_sample(&deltas);
            pairs.push(PairSymmetry {
                asset_i: i,
                asset_j: j,
                deltas,
                mean,
                t_stat: test.map(|t| t.t_stat),
                p_value: test.map(|t| t.p_value),
            });
        }
    }

    Ok(SymmetryTest {
        aggregation,
        mode: cfg.mode,
        n_windows: window_kernels.len(),
        skipped_windows: skipped,
        pairs,
    })
}
