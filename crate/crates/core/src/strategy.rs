//! Piecewise-constant multi-asset trading schedules.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the per-asset zero-net-position (round-trip) check.
pub const ROUND_TRIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub start: f64,
    pub end: f64,
    /// Trading rate per asset, in shares per unit of time.
    pub rates: Vec<f64>,
}

/// A trading schedule on `[0, T]`: consecutive phases of constant rates that
/// tile the horizon without gaps or overlaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub n_assets: usize,
    pub horizon: f64,
    pub phases: Vec<Phase>,
}

impl Strategy {
    pub fn new(n_assets: usize, phases: Vec<Phase>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::InvalidStrategy("strategy needs at least one phase".into()));
        }
        let horizon = phases.last().unwrap().end;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidStrategy(format!("horizon must be positive, got {horizon}")));
        }
        let tol = 1e-12 * horizon.max(1.0);
        if phases[0].start.abs() > tol {
            return Err(Error::InvalidStrategy(format!(
                "first phase must start at 0, starts at {}",
                phases[0].start
            )));
        }
        for (k, ph) in phases.iter().enumerate() {
            if !(ph.end > ph.start) {
                return Err(Error::InvalidStrategy(format!(
                    "phase {k} has non-positive length: [{}, {}]",
                    ph.start, ph.end
                )));
            }
            if ph.rates.len() != n_assets {
                return Err(Error::DimensionMismatch(format!(
                    "phase {k} has {} rates, expected {n_assets}",
                    ph.rates.len()
                )));
            }
            if ph.rates.iter().any(|r| !r.is_finite()) {
                return Err(Error::InvalidStrategy(format!("phase {k} has non-finite rates")));
            }
            if k + 1 < phases.len() && (phases[k + 1].start - ph.end).abs() > tol {
                return Err(Error::InvalidStrategy(format!(
                    "phases {k} and {} leave a gap or overlap: {} vs {}",
                    k + 1,
                    ph.end,
                    phases[k + 1].start
                )));
            }
        }
        Ok(Strategy { n_assets, horizon, phases })
    }

    /// Build from per-phase durations (starts are accumulated from 0).
    pub fn from_durations(n_assets: usize, parts: &[(f64, Vec<f64>)]) -> Result<Self> {
        let mut phases = Vec::with_capacity(parts.len());
        let mut t = 0.0;
        for (dur, rates) in parts {
            phases.push(Phase { start: t, end: t + dur, rates: rates.clone() });
            t += dur;
        }
        Strategy::new(n_assets, phases)
    }

    /// Two-phase build/unwind schedule: rates `v1` on `[0, theta]`, `v2` on
    /// `(theta, horizon]`.
    pub fn in_out(v1: &[f64], v2: &[f64], theta: f64, horizon: f64) -> Result<Self> {
        if v1.len() != v2.len() {
            return Err(Error::DimensionMismatch("in/out rate vectors differ in length".into()));
        }
        if !(theta > 0.0 && theta < horizon) {
            return Err(Error::InvalidStrategy(format!(
                "turnaround {theta} must lie strictly inside (0, {horizon})"
            )));
        }
        Strategy::new(
            v1.len(),
            vec![
                Phase { start: 0.0, end: theta, rates: v1.to_vec() },
                Phase { start: theta, end: horizon, rates: v2.to_vec() },
            ],
        )
    }

    /// The asymmetric two-asset round trip over three equal phases: asset `a`
    /// trades `+v_a` then rests then `-v_a`, asset `b` trades `-v_b` then
    /// `+v_b` then rests. Assets beyond the pair (for larger specs) are idle.
    pub fn asymmetric_three_phase(
        n_assets: usize,
        asset_a: usize,
        asset_b: usize,
        v_a: f64,
        v_b: f64,
        horizon: f64,
    ) -> Result<Self> {
        if asset_a >= n_assets || asset_b >= n_assets || asset_a == asset_b {
            return Err(Error::InvalidParameter("asset indices out of range or equal".into()));
        }
        let mut r1 = vec![0.0; n_assets];
        let mut r2 = vec![0.0; n_assets];
        let mut r3 = vec![0.0; n_assets];
        r1[asset_a] = v_a;
        r1[asset_b] = -v_b;
        r2[asset_b] = v_b;
        r3[asset_a] = -v_a;
        let third = horizon / 3.0;
        Strategy::from_durations(n_assets, &[(third, r1), (third, r2), (third, r3)])
    }

    /// Net traded quantity per asset, `∫ ẋ dt`.
    pub fn net_position(&self) -> Vec<f64> {
        let mut net = vec![0.0; self.n_assets];
        for ph in &self.phases {
            let dur = ph.end - ph.start;
            for (n, r) in net.iter_mut().zip(ph.rates.iter()) {
                *n += r * dur;
            }
        }
        net
    }

    pub fn max_abs_rate(&self) -> f64 {
        self.phases
            .iter()
            .flat_map(|p| p.rates.iter())
            .fold(0.0f64, |m, r| m.max(r.abs()))
    }

    /// True when every asset's net traded quantity vanishes within
    /// `1e-12 · max|rate| · T`.
    pub fn is_round_trip(&self) -> bool {
        let tol = ROUND_TRIP_TOL * self.max_abs_rate() * self.horizon;
        self.net_position().iter().all(|n| n.abs() <= tol)
    }

    /// Scale every rate by `c`.
    pub fn scaled(&self, c: f64) -> Strategy {
        let mut s = self.clone();
        for ph in &mut s.phases {
            for r in &mut ph.rates {
                *r *= c;
            }
        }
        s
    }

    /// Rate vector in effect at time `t` (phases are right-closed except the
    /// first, matching the tiling convention).
    pub fn rates_at(&self, t: f64) -> Option<&[f64]> {
        self.phases
            .iter()
            .find(|p| t >= p.start && t <= p.end)
            .map(|p| p.rates.as_slice())
    }

    /// Write the `phase_start, phase_end, rate_0..rate_{N-1}` schema.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["phase_start".to_string(), "phase_end".to_string()];
        for i in 0..self.n_assets {
            header.push(format!("rate_{i}"));
        }
        w.write_record(&header)?;
        for ph in &self.phases {
            let mut rec = vec![ph.start.to_string(), ph.end.to_string()];
            rec.extend(ph.rates.iter().map(|r| r.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "phase_start" || &headers[1] != "phase_end" {
            return Err(Error::Validation(
                "strategy csv must start with phase_start, phase_end, rate_0..".into(),
            ));
        }
        let n_assets = headers.len() - 2;
        let mut phases = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |idx: usize| -> Result<f64> {
                rec.get(idx)
                    .ok_or_else(|| Error::Validation(format!("strategy csv row {row} too short")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Validation(format!("strategy csv row {row} col {idx}: {e}")))
            };
            let start = field(0)?;
            let end = field(1)?;
            let rates = (0..n_assets).map(|i| field(i + 2)).collect::<Result<Vec<_>>>()?;
            phases.push(Phase { start, end, rates });
        }
        Strategy::new(n_assets, phases)
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
