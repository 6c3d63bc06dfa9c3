//! Synthetic correlated order flow from a planted discrete propagator.
//!
//! Signs come from a latent Gaussian copula: each asset carries an AR(1)
//! driver with cross-correlated innovations, thresholded to ±1. The AR
//! coefficient is `sin(π/2 · persistence)` so the lag-1 autocorrelation of
//! the *signs* equals the configured persistence. Mid log-prices follow the
//! propagator recursion truncated at the planted kernel's maximum lag, with
//! i.i.d. Gaussian noise; day boundaries reset the propagator sum.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{MarketTape, TimeUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImpactMode {
    /// Price moves by `H(ℓ) ε I` per trade event.
    #[default]
    PerEvent,
    /// Price moves by `H(ℓ) ε W I` with `W = S·V` the traded value.
    PerValue,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_assets: usize,
    /// Planted kernel, lag-major: `h_true[l][i][j]` is `H^{ij}(l+1)`; the
    /// maximum lag `p_true` is the outer length, and `H` vanishes beyond it.
    pub h_true: Vec<Vec<Vec<f64>>>,
    /// Target lag-1 autocorrelation of each asset's trade signs, in [0, 1).
    pub sign_persistence: Vec<f64>,
    /// Correlation matrix of the latent sign drivers.
    pub cross_sign_corr: Vec<Vec<f64>>,
    /// Relative weights governing which asset trades at a step.
    pub trade_intensity: Vec<f64>,
    /// Probability that a step carries two simultaneous trades.
    pub simultaneity_prob: f64,
    /// Standard deviation of the i.i.d. per-step noise added to each mid.
    pub noise_vol: Vec<f64>,
    pub volume_median: Vec<f64>,
    pub volume_sigma: Vec<f64>,
    /// Quoted spread per asset in basis points of the mid.
    pub spread_bp: Vec<f64>,
    /// Defaults to 100 per asset when empty.
    #[serde(default)]
    pub initial_price: Vec<f64>,
    pub seed: u64,
    pub n_steps: usize,
    /// Steps per trading day; the whole tape is one day when absent.
    #[serde(default)]
    pub steps_per_day: Option<usize>,
    #[serde(default)]
    pub impact_mode: ImpactMode,
}

impl SimConfig {
    pub fn p_true(&self) -> usize {
        self.h_true.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_assets;
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one asset".into()));
        }
        if self.p_true() >= self.n_steps {
            return Err(Error::InvalidParameter(format!(
                "kernel lag cutoff {} must be smaller than n_steps {}",
                self.p_true(),
                self.n_steps
            )));
        }
        for (l, mat) in self.h_true.iter().enumerate() {
            if mat.len() != n || mat.iter().any(|r| r.len() != n) {
                return Err(Error::DimensionMismatch(format!("h_true lag {l} is not {n} x {n}")));
            }
        }
        for (name, v) in [
            ("sign_persistence", &self.sign_persistence),
            ("trade_intensity", &self.trade_intensity),
            ("noise_vol", &self.noise_vol),
            ("volume_median", &self.volume_median),
            ("volume_sigma", &self.volume_sigma),
            ("spread_bp", &self.spread_bp),
        ] {
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!("{name} must have {n} entries")));
            }
        }
        if !self.initial_price.is_empty() && self.initial_price.len() != n {
            return Err(Error::DimensionMismatch(format!("initial_price must have {n} entries")));
        }
        if self.sign_persistence.iter().any(|&a| !(0.0..1.0).contains(&a)) {
            return Err(Error::InvalidParameter("sign persistence must lie in [0, 1)".into()));
        }
        if self.trade_intensity.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("trade intensities must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.simultaneity_prob) {
            return Err(Error::InvalidParameter("simultaneity probability must lie in [0, 1)".into()));
        }
        if n == 1 && self.simultaneity_prob > 0.0 {
            return Err(Error::InvalidParameter(
                "simultaneous trades need at least two assets".into(),
            ));
        }
        let c = &self.cross_sign_corr;
        if c.len() != n || c.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("cross_sign_corr must be N x N".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| c[i][j]);
        if (&m - m.transpose()).amax() > 1e-10 {
            return Err(Error::Validation("cross_sign_corr must be symmetric".into()));
        }
        for i in 0..n {
            if (m[(i, i)] - 1.0).abs() > 1e-10 {
                return Err(Error::Validation("cross_sign_corr needs unit diagonal".into()));
            }
        }
        if m.symmetric_eigen().eigenvalues.min() < -1e-10 {
            return Err(Error::Validation("cross_sign_corr must be positive semidefinite".into()));
        }
        if let Some(spd) = self.steps_per_day {
            if spd == 0 {
                return Err(Error::InvalidParameter("steps_per_day must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn read_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: SimConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?,
            _ => toml::from_str(&text)
                .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Signed regressor contributions of one step: `(asset, ε)` per event, or
/// `(asset, ε·W)` per value.
type EventList = Vec<(usize, f64)>;

/// Kernel sum over a day-local event history; `history[k]` is the step `k+1`
/// lags back.
fn propagated_shift(h_true: &[Vec<Vec<f64>>], history: &VecDeque<EventList>, asset: usize) -> f64 {
    let mut x = 0.0;
    for (back, events) in history.iter().enumerate() {
        let h = &h_true[back];
        for &(j, u) in events {
            x += h[asset][j] * u;
        }
    }
    x
}

pub fn simulate(cfg: &SimConfig) -> Result<MarketTape> {
    cfg.validate()?;
    let n = cfg.n_assets;
    let p_true = cfg.p_true();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let corr = DMatrix::from_fn(n, n, |i, j| cfg.cross_sign_corr[i][j]);
    // PSD but possibly singular: fall back to a symmetric square root
    let chol = corr.clone().cholesky().map(|c| c.l()).unwrap_or_else(|| {
        let mut eig = corr.symmetric_eigen();
        for v in eig.eigenvalues.iter_mut() {
            *v = v.max(0.0).sqrt();
        }
        &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues)
    });
    let ar: Vec<f64> = cfg
        .sign_persistence
        .iter()
        .map(|&rho_s| (std::f64::consts::FRAC_PI_2 * rho_s).sin())
        .collect();
    let ar_innov: Vec<f64> = ar.iter().map(|a| (1.0 - a * a).sqrt()).collect();

    let total_w: f64 = cfg.trade_intensity.iter().sum();
    let single_cdf: Vec<f64> = {
        let mut acc = 0.0;
        cfg.trade_intensity
            .iter()
            .map(|w| {
                acc += w / total_w;
                acc
            })
            .collect()
    };
    // simultaneous steps draw an unordered pair with weight w_i w_j
    let mut pair_items: Vec<(usize, usize)> = Vec::new();
    let mut pair_cdf: Vec<f64> = Vec::new();
    if n > 1 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                acc += cfg.trade_intensity[i] * cfg.trade_intensity[j];
                pair_items.push((i, j));
                pair_cdf.push(acc);
            }
        }
        for c in &mut pair_cdf {
            *c /= acc;
        }
    }

    let spd = cfg.steps_per_day.unwrap_or(cfg.n_steps).max(1);
    let n_steps = cfg.n_steps;

    let mut tape = MarketTape {
        n_assets: n,
        time_unit: TimeUnit::Steps,
        timestamps_ms: Vec::with_capacity(n_steps),
        mid_logs: vec![0.0; n_steps * n],
        signs: vec![0; n_steps * n],
        volumes: vec![0.0; n_steps * n],
        prices: vec![0.0; n_steps * n],
        day_starts: Vec::new(),
        asset_ids: (0..n).map(|i| format!("asset_{i}")).collect(),
    };

    let mut latent = vec![0.0f64; n];
    {
        let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for i in 0..n {
            latent[i] = (0..n).map(|k| chol[(i, k)] * z[k]).sum();
        }
    }

    let mut day_open: Vec<f64> = (0..n)
        .map(|i| cfg.initial_price.get(i).copied().unwrap_or(100.0).ln())
        .collect();
    let mut noise_cum = vec![0.0f64; n];
    let mut history: VecDeque<EventList> = VecDeque::new();

    for step in 0..n_steps {
        let in_day = step % spd;
        if in_day == 0 {
            if step > 0 {
                // close the day: realize the prevailing mid, drop old impact
                for (i, open) in day_open.iter_mut().enumerate() {
                    *open += propagated_shift(&cfg.h_true, &history, i) + noise_cum[i];
                }
                history.clear();
                noise_cum.iter_mut().for_each(|x| *x = 0.0);
            }
            tape.day_starts.push(step);
        }
        let day = step / spd;
        tape.timestamps_ms
            .push(day as i64 * 86_400_000 + 36_000_000 + in_day as i64 * 1000);

        // mid just before this step
        for i in 0..n {
            tape.mid_logs[step * n + i] =
                day_open[i] + propagated_shift(&cfg.h_true, &history, i) + noise_cum[i];
        }

        // latent sign drivers advance every step for every asset
        let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for i in 0..n {
            let e: f64 = (0..n).map(|k| chol[(i, k)] * z[k]).sum();
            latent[i] = ar[i] * latent[i] + ar_innov[i] * e;
        }

        let mut active: [usize; 2] = [usize::MAX; 2];
        let mut n_active = 1usize;
        if n > 1 && rng.gen::<f64>() < cfg.simultaneity_prob {
            let u = rng.gen::<f64>();
            let k = pair_cdf.partition_point(|&c| c < u).min(pair_items.len() - 1);
            let (i, j) = pair_items[k];
            active = [i, j];
            n_active = 2;
        } else {
            let u = rng.gen::<f64>();
            active[0] = single_cdf.partition_point(|&c| c < u).min(n - 1);
        }

        let mut events: EventList = Vec::with_capacity(n_active);
        for &a in active.iter().take(n_active) {
            let sign: i8 = if latent[a] >= 0.0 { 1 } else { -1 };
            let z: f64 = rng.sample(StandardNormal);
            let volume = cfg.volume_median[a] * (cfg.volume_sigma[a] * z).exp();
            let k = step * n + a;
            let mid = tape.mid_logs[k].exp();
            tape.signs[k] = sign;
            tape.volumes[k] = volume;
            tape.prices[k] = mid * (1.0 + sign as f64 * 0.5 * cfg.spread_bp[a] * 1e-4);
            let u = match cfg.impact_mode {
                ImpactMode::PerEvent => sign as f64,
                ImpactMode::PerValue => sign as f64 * mid * volume,
            };
            events.push((a, u));
        }

        if p_true > 0 {
            history.push_front(events);
            if history.len() > p_true {
                history.pop_back();
            }
        }

        for i in 0..n {
            if cfg.noise_vol[i] > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                noise_cum[i] += cfg.noise_vol[i] * z;
            }
        }
    }

    tape.validate()?;
    Ok(tape)
}
