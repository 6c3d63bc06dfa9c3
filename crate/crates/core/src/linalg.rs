//! Block-Toeplitz systems and small matrix utilities.
//!
//! The propagator estimation solves `𝓗 C̃ = S̃` where `C̃` is an `Np × Np`
//! block-Toeplitz matrix of sign cross-correlations. The dense LU route is
//! authoritative; a block Levinson recursion provides an `O(p² N³)` fast path
//! that must agree with it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Blocks `T(m)` for `m ∈ [-(p-1), p-1]`, stored as `neg[m-1] = T(-m)`,
/// `zero = T(0)`, `pos[m-1] = T(m)`. The assembled matrix has
/// `[A]_{rc} = T(c - r)` in block coordinates.
#[derive(Debug, Clone)]
pub struct BlockToeplitz {
    pub block_dim: usize,
    pub n_blocks: usize,
    pub zero: DMatrix<f64>,
    pub pos: Vec<DMatrix<f64>>,
    pub neg: Vec<DMatrix<f64>>,
}

impl BlockToeplitz {
    pub fn new(zero: DMatrix<f64>, pos: Vec<DMatrix<f64>>, neg: Vec<DMatrix<f64>>) -> Result<Self> {
        let d = zero.nrows();
        if zero.ncols() != d {
            return Err(Error::DimensionMismatch("block T(0) must be square".into()));
        }
        if pos.len() != neg.len() {
            return Err(Error::DimensionMismatch("need equally many positive and negative blocks".into()));
        }
        for b in pos.iter().chain(neg.iter()) {
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::DimensionMismatch("all blocks must share the dimension of T(0)".into()));
            }
        }
        Ok(BlockToeplitz { block_dim: d, n_blocks: pos.len() + 1, zero, pos, neg })
    }

    /// Symmetric case: `T(-m) = T(m)ᵀ`.
    pub fn symmetric(zero: DMatrix<f64>, pos: Vec<DMatrix<f64>>) -> Result<Self> {
        let neg = pos.iter().map(|b| b.transpose()).collect();
        BlockToeplitz::new(zero, pos, neg)
    }

    pub fn block(&self, offset: i64) -> &DMatrix<f64> {
        match offset {
            0 => &self.zero,
            m if m > 0 => &self.pos[(m - 1) as usize],
            m => &self.neg[(-m - 1) as usize],
        }
    }

    pub fn dim(&self) -> usize {
        self.block_dim * self.n_blocks
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        let d = self.block_dim;
        let p = self.n_blocks;
        let mut a = DMatrix::zeros(d * p, d * p);
        for r in 0..p {
            for c in 0..p {
                let b = self.block(c as i64 - r as i64);
                a.view_mut((r * d, c * d), (d, d)).copy_from(b);
            }
        }
        a
    }
}

/// Dense LU solve of `A x = b` with multiple right-hand sides.
pub fn solve_dense(a: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.clone().lu();
    lu.solve(rhs)
        .ok_or_else(|| Error::Numerical("singular linear system in dense solve".into()))
}

/// Block Levinson recursion for `A x = b` with `[A]_{rc} = T(c - r)`.
///
/// Maintains the first- and last-column inverse blocks of the growing leading
/// principal system, so each order extension costs `O(k N³)`. Requires the
/// leading principal block systems to stay well conditioned; degenerate
/// intermediate systems surface as an error (the dense route still applies).
pub fn solve_block_levinson(t: &BlockToeplitz, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = t.block_dim;
    let p = t.n_blocks;
    let nrhs = rhs.ncols();
    if rhs.nrows() != d * p {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} rows, expected {}",
            rhs.nrows(),
            d * p
        )));
    }

    let inv0 = t
        .zero
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("T(0) is singular in Levinson recursion".into()))?;

    // F solves A_k F = E_first, B solves A_k B = E_last (block columns)
    let mut f: Vec<DMatrix<f64>> = vec![inv0.clone()];
    let mut b: Vec<DMatrix<f64>> = vec![inv0.clone()];
    let mut x: Vec<DMatrix<f64>> = vec![&inv0 * rhs.rows(0, d)];

    for k in 1..p {
        // residual of [F; 0] against the new last block row: Σ_j T(j-k) F_j
        let mut phi = DMatrix::zeros(d, d);
        for (j, fj) in f.iter().enumerate() {
            phi += t.block(j as i64 - k as i64) * fj;
        }
        // residual of [0; B] against the new first block row: Σ_j T(j+1) B_j
        let mut psi = DMatrix::zeros(d, d);
        for (j, bj) in b.iter().enumerate() {
            psi += t.block(j as i64 + 1) * bj;
        }

        let eye = DMatrix::identity(d, d);
        let inv_i_pp = (&eye - &psi * &phi)
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("degenerate reflection block in Levinson recursion".into()))?;
        let inv_i_fp = (&eye - &phi * &psi)
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("degenerate reflection block in Levinson recursion".into()))?;

        // F_{k+1} = ([F;0] - [0;B] φ) (I - ψφ)^{-1}
        // B_{k+1} = ([0;B] - [F;0] ψ) (I - φψ)^{-1}
        let mut new_f: Vec<DMatrix<f64>> = Vec::with_capacity(k + 1);
        let mut new_b: Vec<DMatrix<f64>> = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let f_part = if j < k { f[j].clone() } else { DMatrix::zeros(d, d) };
            let b_part = if j > 0 { b[j - 1].clone() } else { DMatrix::zeros(d, d) };
            new_f.push((&f_part - &b_part * &phi) * &inv_i_pp);
            new_b.push((&b_part - &f_part * &psi) * &inv_i_fp);
        }
        f = new_f;
        b = new_b;

        // extend the solution: X_{k+1} = [X; 0] + B_{k+1} (b_k - Σ_j T(j-k) X_j)
        let mut resid = DMatrix::zeros(d, nrhs);
        resid.copy_from(&rhs.rows(k * d, d));
        for (j, xj) in x.iter().enumerate() {
            resid -= t.block(j as i64 - k as i64) * xj;
        }
        x.push(DMatrix::zeros(d, nrhs));
        for j in 0..=k {
            let corr = &b[j] * &resid;
            x[j] += corr;
        }
    }

    let mut out = DMatrix::zeros(d * p, nrhs);
    for (j, xj) in x.iter().enumerate() {
        out.rows_mut(j * d, d).copy_from(xj);
    }
    Ok(out)
}

/// Reciprocal 1-norm condition estimate of `A` from an LU factorization,
/// using a few rounds of Hager's method for `‖A⁻¹‖₁`.
pub fn rcond_estimate(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let norm_a = one_norm(a);
    if norm_a == 0.0 {
        return 0.0;
    }
    let lu = a.clone().lu();
    let solve = |v: &DVector<f64>| -> Option<DVector<f64>> { lu.solve(v) };
    let solve_t = {
        let lut = a.transpose().lu();
        move |v: &DVector<f64>| -> Option<DVector<f64>> { lut.solve(v) }
    };

    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0f64;
    for _ in 0..5 {
        let y = match solve(&x) {
            Some(y) => y,
            None => return 0.0,
        };
        est = y.iter().map(|v| v.abs()).sum();
        let xi = DVector::from_iterator(n, y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }));
        let z = match solve_t(&xi) {
            Some(z) => z,
            None => return 0.0,
        };
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |(jm, m), (j, &v)| if v.abs() > m { (j, v.abs()) } else { (jm, m) });
        // converged when the dual vector stops improving
        if zmax <= z.dot(&x).abs() {
            break;
        }
        x = DVector::zeros(n);
        x[jmax] = 1.0;
    }
    if est == 0.0 {
        return 0.0;
    }
    1.0 / (norm_a * est)
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Minimum eigenvalue and its eigenvector of a symmetric matrix.
pub fn min_eigenpair(a: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = a.clone().symmetric_eigen();
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("non-empty matrix");
    (val, eig.eigenvectors.column(idx).into_owned())
}
