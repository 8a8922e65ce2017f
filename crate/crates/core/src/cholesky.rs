//! Semi-definite factorization of covariance matrices.
//!
//! Every positive semi-definite `Sigma` admits a factor `L` in `L` with
//! `L L' = Sigma`; the factor fixes which adapted Gaussian process carries
//! the covariance, so the choice matters and must be canonical. The factor
//! produced here is the unique lower-triangular one with nonnegative
//! diagonal whose columns are exactly zero on dependent directions: column
//! `j` vanishes precisely when row `j` of any factor lies in the span of
//! the rows above it.
//!
//! Rank decisions are made on a diagonally pivoted pass (stable for
//! rank-deficient input); the canonical triangular form is then rebuilt
//! from the permuted factor by a row Gram-Schmidt sweep, which is the
//! square-root-form equivalent of an unpivoted semi-definite Cholesky.

use nalgebra::{DMatrix, DVector};

use crate::block::{BlockLowerTriangular, BlockShape};
use crate::error::{AbwError, Result};

/// Pivoted semi-definite Cholesky: returns `(perm, c, rank)` with
/// `P Sigma P' = C C'`, where row `i` of the work matrix corresponds to
/// original index `perm[i]`. Columns of `C` beyond `rank` are zero.
fn pivoted_cholesky(sigma: &DMatrix<f64>, tol: f64) -> Result<(Vec<usize>, DMatrix<f64>, usize)> {
    let n = sigma.nrows();
    let mut a = sigma.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max).max(0.0);
    let abs_scale = (0..n)
        .map(|i| a[(i, i)].abs())
        .fold(scale, f64::max)
        .max(1e-300);
    let stop_tol = tol * scale;
    let neg_tol = -tol * abs_scale;

    let mut rank = n;
    for k in 0..n {
        let (mut piv, mut piv_val) = (k, a[(k, k)]);
        for j in (k + 1)..n {
            if a[(j, j)] > piv_val {
                piv = j;
                piv_val = a[(j, j)];
            }
        }
        let min_remaining = (k..n).map(|j| a[(j, j)]).fold(f64::INFINITY, f64::min);
        if min_remaining < neg_tol {
            return Err(AbwError::NotPsd(format!(
                "negative pivot {min_remaining:.3e} below tolerance {neg_tol:.3e}"
            )));
        }
        if piv_val <= stop_tol {
            rank = k;
            break;
        }
        if piv != k {
            a.swap_rows(k, piv);
            a.swap_columns(k, piv);
            perm.swap(k, piv);
        }
        let root = a[(k, k)].sqrt();
        a[(k, k)] = root;
        for i in (k + 1)..n {
            a[(i, k)] /= root;
        }
        for j in (k + 1)..n {
            for i in j..n {
                let delta = a[(i, k)] * a[(j, k)];
                a[(i, j)] -= delta;
                if i != j {
                    a[(j, i)] -= delta;
                }
            }
        }
    }

    let mut c = DMatrix::<f64>::zeros(n, rank);
    for j in 0..rank {
        for i in j..n {
            c[(i, j)] = a[(i, j)];
        }
    }
    Ok((perm, c, rank))
}

/// Canonical lower-triangular factor from an arbitrary factor `F` with
/// `F F' = Sigma`: modified Gram-Schmidt on the rows of `F`, skipping
/// dependent rows, which land as exactly-zero columns of `L`. The pivot
/// drop test matches the rank threshold of the pivoted pass (`rho^2 <=
/// tol * scale`).
fn retriangularize(f: &DMatrix<f64>, stop_tol: f64) -> DMatrix<f64> {
    let n = f.nrows();
    let r = f.ncols();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut basis: Vec<Option<DVector<f64>>> = vec![None; n];

    for i in 0..n {
        let mut resid: DVector<f64> = f.row(i).transpose();
        for j in 0..i {
            if let Some(q) = &basis[j] {
                let coeff = q.dot(&resid);
                resid -= q * coeff;
                l[(i, j)] = coeff;
            }
        }
        // second orthogonalization pass against accumulated drift
        for j in 0..i {
            if let Some(q) = &basis[j] {
                let coeff = q.dot(&resid);
                resid -= q * coeff;
                l[(i, j)] += coeff;
            }
        }
        let rho = resid.norm();
        if rho * rho > stop_tol && rho > 0.0 && r > 0 {
            l[(i, i)] = rho;
            basis[i] = Some(resid / rho);
        }
    }
    l
}

/// Factorizes a positive semi-definite covariance `Sigma` into the
/// canonical block-lower-triangular `L` with `L L' = Sigma`.
///
/// `Sigma` must be symmetric within `tol`-scaled tolerance; eigenvalues may
/// dip below zero by at most `tol * |Sigma|` (round-off band), anything
/// lower is rejected as `NotPsd`. Rank-deficient input yields exact zero
/// columns.
pub fn block_cholesky(
    sigma: &DMatrix<f64>,
    shape: BlockShape,
    tol: f64,
) -> Result<BlockLowerTriangular> {
    let n = shape.dim();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(AbwError::Shape(format!(
            "covariance is {}x{}, expected {n}x{n}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if sigma.iter().any(|x| !x.is_finite()) {
        return Err(AbwError::InvalidInput(
            "covariance contains non-finite entries".into(),
        ));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(AbwError::InvalidInput(format!(
            "tolerance must lie in (0,1), got {tol}"
        )));
    }
    let asym = (sigma - sigma.transpose()).norm();
    if asym > tol * (1.0 + sigma.norm()) {
        return Err(AbwError::InvalidInput(format!(
            "covariance is not symmetric: |S - S'|_F = {asym:.3e}"
        )));
    }
    let sym = (sigma + sigma.transpose()) * 0.5;

    let (perm, c, _rank) = pivoted_cholesky(&sym, tol)?;
    // permute back: F = P' C
    let mut f = DMatrix::<f64>::zeros(n, c.ncols());
    for (i, &orig) in perm.iter().enumerate() {
        f.row_mut(orig).copy_from(&c.row(i));
    }

    let scale = (0..n).map(|i| sym[(i, i)]).fold(0.0f64, f64::max).max(0.0);
    let stop_tol = tol * scale;
    let l = retriangularize(&f, stop_tol);

    // Indefiniteness can hide off the diagonal (e.g. [[0,1],[1,0]]): for a
    // genuine PSD input the factorization residual is bounded by the rank
    // truncation, anything larger means the input was not PSD.
    let resid = (&l * l.transpose() - &sym).norm();
    let bound = 10.0 * n as f64 * (stop_tol + f64::EPSILON * scale);
    if resid > bound {
        return Err(AbwError::NotPsd(format!(
            "factorization residual {resid:.3e} exceeds PSD bound {bound:.3e}"
        )));
    }
    BlockLowerTriangular::new(shape, l)
}
