//! Full model specification: an N×N grid of decay kernels and impact
//! functions plus the noise covariance.
//!
//! `G[i][j]` and `f[i][j]` describe how trading in asset `j` moves the price
//! of asset `i`. Trading rates are in shares per unit of time throughout; for
//! the value-based estimation route the conversion to traded value is
//! `W = S · V` with `S` the mid price.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{DecayKernel, ImpactFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub n_assets: usize,
    /// Row-major N×N decay kernels: `g[i][j]` weights impact of `j` on `i`.
    pub g: Vec<Vec<DecayKernel>>,
    /// Row-major N×N impact functions.
    pub f: Vec<Vec<ImpactFunction>>,
    /// Covariance of the noise term, variance units per time. Enters only the
    /// simulator; expected cost and paths are noise-free.
    #[serde(default)]
    pub noise_cov: Option<Vec<Vec<f64>>>,
}

impl KernelSpec {
    pub fn new(
        g: Vec<Vec<DecayKernel>>,
        f: Vec<Vec<ImpactFunction>>,
        noise_cov: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n_assets = g.len();
        let spec = KernelSpec { n_assets, g, f, noise_cov };
        spec.validate()?;
        Ok(spec)
    }

    /// Uniform spec: one kernel shape for every pair, linear impact with the
    /// given η matrix.
    pub fn uniform_linear(kernel: DecayKernel, eta: &[Vec<f64>]) -> Result<Self> {
        let n = eta.len();
        let g = vec![vec![kernel.clone(); n]; n];
        let f = eta
            .iter()
            .map(|row| row.iter().map(|&e| ImpactFunction::Linear { eta: e }).collect())
            .collect();
        KernelSpec::new(g, f, None)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_assets;
        if n == 0 {
            return Err(Error::InvalidParameter("spec needs at least one asset".into()));
        }
        if self.g.len() != n || self.f.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "spec declares {n} assets but has {} kernel rows and {} impact rows",
                self.g.len(),
                self.f.len()
            )));
        }
        for (i, row) in self.g.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!("kernel row {i} has {} entries", row.len())));
            }
            for k in row {
                k.validate()?;
            }
        }
        for (i, row) in self.f.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!("impact row {i} has {} entries", row.len())));
            }
            for f in row {
                f.validate()?;
            }
        }
        if let Some(cov) = &self.noise_cov {
            if cov.len() != n || cov.iter().any(|r| r.len() != n) {
                return Err(Error::DimensionMismatch("noise covariance must be N x N".into()));
            }
            let m = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
            if cov.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("noise covariance has non-finite entries".into()));
            }
            let scale = m.amax().max(1.0);
            if (&m - m.transpose()).amax() > 1e-10 * scale {
                return Err(Error::Validation("noise covariance must be symmetric".into()));
            }
            let eig = m.symmetric_eigen();
            if eig.eigenvalues.min() < -1e-10 * scale {
                return Err(Error::Validation(format!(
                    "noise covariance must be positive semidefinite (min eigenvalue {})",
                    eig.eigenvalues.min()
                )));
            }
        }
        Ok(())
    }

    /// True iff no power-law kernel entry is present.
    pub fn is_bounded(&self) -> bool {
        self.g.iter().flatten().all(|k| k.is_bounded())
    }

    /// The η matrix when every impact entry is exactly linear.
    pub fn eta_matrix(&self) -> Option<DMatrix<f64>> {
        let n = self.n_assets;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.f[i][j].linear_eta()?;
            }
        }
        Some(m)
    }

    pub fn all_linear(&self) -> bool {
        self.eta_matrix().is_some()
    }

    pub fn check_dims(&self, n: usize, what: &str) -> Result<()> {
        if self.n_assets != n {
            return Err(Error::DimensionMismatch(format!(
                "spec has {} assets but {what} has {n}",
                self.n_assets
            )));
        }
        Ok(())
    }

    /// Parse from TOML or JSON depending on the file extension.
    pub fn read_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: KernelSpec = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?,
            _ => toml::from_str(&text)
                .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let text = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::to_string_pretty(self)
                .map_err(|e| Error::ConfigParse(e.to_string()))?,
            _ => toml::to_string_pretty(self).map_err(|e| Error::ConfigParse(e.to_string()))?,
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}
