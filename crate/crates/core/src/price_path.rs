//! Expected price shift along a trading schedule.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use crate::quad;
use crate::spec::KernelSpec;
use crate::strategy::Strategy;

const PATH_REL_TOL: f64 = 1e-12;

/// `E[S^i_t - S^i_0]` for every asset `i` and every grid time, accumulated
/// phase-wise: analytic single primitives for the permanent, exponential and
/// power-law families, adaptive quadrature for tabulated kernels.
pub fn expected_price_path(
    spec: &KernelSpec,
    strat: &Strategy,
    grid: &[f64],
) -> Result<DMatrix<f64>> {
    spec.check_dims(strat.n_assets, "strategy")?;
    for w in grid.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidParameter("price path grid must be sorted".into()));
        }
    }
    if let Some(&t) = grid.last() {
        if t > strat.horizon * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "grid time {t} exceeds strategy horizon {}",
                strat.horizon
            )));
        }
    }
    if grid.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("grid times must be >= 0".into()));
    }

    let n = spec.n_assets;
    let mut out = DMatrix::zeros(n, grid.len());
    for (col, &t) in grid.iter().enumerate() {
        for i in 0..n {
            let mut shift = 0.0;
            for j in 0..n {
                for ph in &strat.phases {
                    if ph.start >= t {
                        break;
                    }
                    let rate = ph.rates[j];
                    if rate == 0.0 {
                        continue;
                    }
                    let upper = ph.end.min(t);
                    let kernel = &spec.g[i][j];
                    // ∫_{start}^{upper} G(t - s) ds
                    let weight = match kernel.first_primitive(t - ph.start) {
                        Some(q_hi) => q_hi - kernel.first_primitive(t - upper).expect("same family"),
                        None => {
                            let (v, _) = quad::integrate(
                                &|s| kernel.eval(t - s).unwrap_or(0.0),
                                ph.start,
                                upper,
                                PATH_REL_TOL,
                                1e-14,
                            )?;
                            v
                        }
                    };
                    shift += spec.f[i][j].eval(rate) * weight;
                }
            }
            out[(i, col)] = shift;
        }
    }
    Ok(out)
}
