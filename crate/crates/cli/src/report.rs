//! Plot-ready aggregation of prior artifacts: mean self- and cross-response
//! per lag, mean self- and cross-kernel per lag, and mean impact curves,
//! each weighted by the trade count of the triggering asset.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::output::OutputDir;

struct WeightedCell {
    value_sum: f64,
    weight: f64,
}

impl WeightedCell {
    fn new() -> Self {
        WeightedCell { value_sum: 0.0, weight: 0.0 }
    }

    fn add(&mut self, value: f64, weight: f64) {
        self.value_sum += value * weight;
        self.weight += weight;
    }

    fn mean(&self) -> Option<f64> {
        (self.weight > 0.0).then(|| self.value_sum / self.weight)
    }
}

fn find_artifacts(inputs: &[PathBuf], name: &str) -> Vec<PathBuf> {
    let mut found = Vec::new();
    for dir in inputs {
        let candidate = dir.join(name);
        if candidate.is_file() {
            found.push(candidate);
        }
    }
    found
}

/// `(lag, self_mean, cross_mean)` rows from `response.csv` or
/// `propagator.csv` artifacts (both share the lag/i/j/value/../count layout,
/// with the value in a named column).
fn lag_table(paths: &[PathBuf], value_col: &str) -> Result<Vec<(i64, f64, f64)>> {
    use std::collections::BTreeMap;
    let mut self_cells: BTreeMap<i64, WeightedCell> = BTreeMap::new();
    let mut cross_cells: BTreeMap<i64, WeightedCell> = BTreeMap::new();
    for path in paths {
        let mut rdr = csv::Reader::from_path(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(c_lag), Some(c_i), Some(c_j), Some(c_val), Some(c_count)) =
            (col("lag"), col("i"), col("j"), col(value_col), col("count"))
        else {
            anyhow::bail!("{} lacks the expected columns", path.display());
        };
        for rec in rdr.records() {
            let rec = rec?;
            let lag: i64 = rec[c_lag].parse()?;
            let i: usize = rec[c_i].parse()?;
            let j: usize = rec[c_j].parse()?;
            let value: f64 = rec[c_val].parse()?;
            let count: f64 = rec[c_count].parse()?;
            let cell = if i == j {
                self_cells.entry(lag).or_insert_with(WeightedCell::new)
            } else {
                cross_cells.entry(lag).or_insert_with(WeightedCell::new)
            };
            cell.add(value, count);
        }
    }
    let mut rows = Vec::new();
    for (&lag, cell) in &self_cells {
        let self_mean = cell.mean().unwrap_or(f64::NAN);
        let cross_mean = cross_cells
            .get(&lag)
            .and_then(|c| c.mean())
            .unwrap_or(f64::NAN);
        rows.push((lag, self_mean, cross_mean));
    }
    Ok(rows)
}

fn write_lag_table(out: &mut OutputDir, name: &str, rows: &[(i64, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lag", "self_mean", "cross_mean"])?;
    for (lag, s, c) in rows {
        w.write_record([lag.to_string(), s.to_string(), c.to_string()])?;
    }
    out.write_bytes(name, &w.into_inner()?)?;
    Ok(())
}

/// Mean impact per quantile-bin index, self and cross pairs separately.
fn impact_table(paths: &[PathBuf]) -> Result<Vec<(usize, f64, f64, f64, f64)>> {
    use std::collections::BTreeMap;
    // bin -> (volume cell, impact cell) for self / cross
    let mut self_cells: BTreeMap<usize, (WeightedCell, WeightedCell)> = BTreeMap::new();
    let mut cross_cells: BTreeMap<usize, (WeightedCell, WeightedCell)> = BTreeMap::new();
    for path in paths {
        let mut rdr = csv::Reader::from_path(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(c_i), Some(c_j), Some(c_bin), Some(c_vol), Some(c_imp), Some(c_count)) = (
            col("i"),
            col("j"),
            col("bin"),
            col("volume_mean"),
            col("impact"),
            col("count"),
        ) else {
            anyhow::bail!("{} lacks the expected columns", path.display());
        };
        for rec in rdr.records() {
            let rec = rec?;
            let i: usize = rec[c_i].parse()?;
            let j: usize = rec[c_j].parse()?;
            let bin: usize = rec[c_bin].parse()?;
            let vol: f64 = rec[c_vol].parse()?;
            let imp: f64 = rec[c_imp].parse()?;
            let count: f64 = rec[c_count].parse()?;
            let store = if i == j { &mut self_cells } else { &mut cross_cells };
            let entry = store
                .entry(bin)
                .or_insert_with(|| (WeightedCell::new(), WeightedCell::new()));
            entry.0.add(vol, count);
            entry.1.add(imp, count);
        }
    }
    let bins: std::collections::BTreeSet<usize> =
        self_cells.keys().chain(cross_cells.keys()).copied().collect();
    let get = |cells: &BTreeMap<usize, (WeightedCell, WeightedCell)>, b: usize| {
        cells
            .get(&b)
            .map(|(v, i)| (v.mean().unwrap_or(f64::NAN), i.mean().unwrap_or(f64::NAN)))
            .unwrap_or((f64::NAN, f64::NAN))
    };
    Ok(bins
        .into_iter()
        .map(|b| {
            let (sv, si) = get(&self_cells, b);
            let (cv, ci) = get(&cross_cells, b);
            (b, sv, si, cv, ci)
        })
        .collect())
}

/// Returns the number of tables written.
pub fn build_report(inputs: &[PathBuf], out: &mut OutputDir) -> Result<usize> {
    let mut written = 0;

    let responses = find_artifacts(inputs, "response.csv");
    if !responses.is_empty() {
        for p in &responses {
            record(out, p)?;
        }
        let rows = lag_table(&responses, "value")?;
        write_lag_table(out, "response_mean.csv", &rows)?;
        written += 1;
    }

    let propagators = find_artifacts(inputs, "propagator.csv");
    if !propagators.is_empty() {
        for p in &propagators {
            record(out, p)?;
        }
        let rows = lag_table(&propagators, "kernel")?;
        write_lag_table(out, "kernel_mean.csv", &rows)?;
        written += 1;
    }

    let curves = find_artifacts(inputs, "impact_curve.csv");
    if !curves.is_empty() {
        for p in &curves {
            record(out, p)?;
        }
        let rows = impact_table(&curves)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "bin",
            "self_volume_mean",
            "self_impact_mean",
            "cross_volume_mean",
            "cross_impact_mean",
        ])?;
        for (b, sv, si, cv, ci) in rows {
            w.write_record([
                b.to_string(),
                sv.to_string(),
                si.to_string(),
                cv.to_string(),
                ci.to_string(),
            ])?;
        }
        out.write_bytes("impact_mean.csv", &w.into_inner()?)?;
        written += 1;
    }

    Ok(written)
}

fn record(out: &mut OutputDir, path: &Path) -> Result<()> {
    out.record_input(path)
}
