//! Singular value decomposition of small dense blocks.
//!
//! Everything downstream (distances, optimizer frames, kernels, ranks)
//! reduces to SVDs of `d x d` diagonal blocks and `n x d` block columns,
//! with `d` and `n` at desk scale. A one-sided Jacobi iteration is used:
//! it reconstructs to a few ulps (the general-purpose bidiagonalization
//! SVDs miss the tight reconstruction bound required here) and its
//! singular values carry high relative accuracy, which the numerical rank
//! decisions depend on.

use nalgebra::{DMatrix, DVector};

use crate::block::BlockLowerTriangular;
use crate::error::{AbwError, Result};

/// Result of [`svd_small`]: `A = U * diag(S) * V'` with `U` having
/// orthonormal columns (orthogonal when `A` is square), `V` orthogonal and
/// `S` nonincreasing and nonnegative.
///
/// `rank` counts singular values above `tol * S[0]`; it is `0` exactly when
/// `S[0] = 0`.
#[derive(Clone, Debug)]
pub struct SmallSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
    pub rank: usize,
}

impl SmallSvd {
    /// `U * diag(S) * V'`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled: DMatrix<f64> = DMatrix::from_fn(self.u.nrows(), self.u.ncols(), |i, j| {
            self.u[(i, j)] * self.singular_values[j]
        });
        scaled * self.v.transpose()
    }

    /// Sum of all singular values (the nuclear norm).
    pub fn nuclear_norm(&self) -> f64 {
        self.singular_values.sum()
    }
}

const MAX_SWEEPS: usize = 64;

/// One-sided Jacobi: rotates column pairs of a working copy `B = A * V`
/// until the columns are mutually orthogonal; then `A = U * diag(S) * V'`
/// with `S_j = |B_j|` and `U_j = B_j / S_j`.
///
/// The input is pre-scaled by an exact power of two and columns whose norm
/// falls below `eps` times the largest column norm are flushed to exact
/// zero: a column that small carries no resolvable direction, and leaving
/// it in stalls the sweeps near the denormal range, wrecking the
/// orthogonality of `U`. Flushing perturbs `A` within the reconstruction
/// budget and routes the column through the orthogonal completion.
fn jacobi(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let m = a.nrows();
    let n = a.ncols();
    let eps = f64::EPSILON;

    let amax = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let scale = if amax > 0.0 {
        2.0f64.powi(-amax.log2().floor() as i32)
    } else {
        1.0
    };
    let mut b = a * scale;
    let mut v = DMatrix::<f64>::identity(n, n);

    let max_col = (0..n).map(|j| b.column(j).norm()).fold(0.0f64, f64::max);
    let flush2 = (eps * max_col) * (eps * max_col);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    let bip = b[(i, p)];
                    let biq = b[(i, q)];
                    app += bip * bip;
                    aqq += biq * biq;
                    apq += bip * biq;
                }
                if app > 0.0 && app <= flush2 {
                    b.column_mut(p).fill(0.0);
                    app = 0.0;
                    apq = 0.0;
                }
                if aqq > 0.0 && aqq <= flush2 {
                    b.column_mut(q).fill(0.0);
                    aqq = 0.0;
                    apq = 0.0;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let bip = b[(i, p)];
                    let biq = b[(i, q)];
                    b[(i, p)] = c * bip - s * biq;
                    b[(i, q)] = s * bip + c * biq;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Flush any straggler below the floor, then sort columns by
    // descending norm and normalize into U.
    for j in 0..n {
        let nsq = b.column(j).norm_squared();
        if nsq > 0.0 && nsq <= flush2 {
            b.column_mut(j).fill(0.0);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| b.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = DMatrix::<f64>::zeros(m, n);
    let mut sigma = DVector::<f64>::zeros(n);
    let mut v_sorted = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src] / scale;
        v_sorted.set_column(dst, &v.column(src));
        if norms[src] > 0.0 {
            u.set_column(dst, &(b.column(src) / norms[src]));
        }
    }

    // Complete U on exactly-zero singular directions with standard basis
    // vectors orthogonalized against the existing columns.
    for j in 0..n {
        if sigma[j] > 0.0 {
            continue;
        }
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = -1.0;
        for k in 0..m {
            let mut cand = DVector::<f64>::zeros(m);
            cand[k] = 1.0;
            for _ in 0..2 {
                for c in 0..n {
                    if c == j || (sigma[c] == 0.0 && c > j) {
                        continue;
                    }
                    let col = u.column(c);
                    let proj = col.dot(&cand);
                    cand -= col * proj;
                }
            }
            let nrm = cand.norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = Some(cand);
            }
        }
        let cand = best.expect("orthogonal completion candidate");
        u.set_column(j, &(cand / best_norm));
    }

    (u, sigma, v_sorted)
}

/// Deterministic frame convention: the largest-magnitude entry of each
/// column of `U` is made nonnegative (ties broken toward the lowest row
/// index), flipping the matching column of `V` to preserve the product.
fn apply_sign_convention(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for j in 0..u.ncols() {
        let mut best_row = 0;
        let mut best_abs = u[(0, j)].abs();
        for i in 1..u.nrows() {
            let a = u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best_row = i;
            }
        }
        if u[(best_row, j)] < 0.0 {
            for i in 0..u.nrows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.nrows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
}

/// Numerical rank at relative threshold `tol`: the number of singular
/// values strictly above `tol * sigma_1`, and `0` when `sigma_1 = 0`.
pub fn numerical_rank(singular_values: &DVector<f64>, tol: f64) -> usize {
    let sigma1 = singular_values[0];
    if sigma1 == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > tol * sigma1).count()
}

/// SVD of a small dense matrix with `nrows >= ncols`, with the
/// deterministic sign convention and the numerical rank at `tol`.
pub fn svd_small(a: &DMatrix<f64>, tol: f64) -> Result<SmallSvd> {
    if a.nrows() < a.ncols() || a.ncols() == 0 {
        return Err(AbwError::Shape(format!(
            "svd_small expects a tall or square nonempty matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(AbwError::InvalidInput(format!(
            "rank tolerance must lie in (0,1), got {tol}"
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(AbwError::InvalidInput(
            "matrix contains non-finite entries".into(),
        ));
    }
    let (mut u, sigma, mut v) = jacobi(a);
    apply_sign_convention(&mut u, &mut v);
    let rank = numerical_rank(&sigma, tol);
    Ok(SmallSvd {
        u,
        singular_values: sigma,
        v,
        rank,
    })
}

/// SVD of the block column `L_{.,t}` (an `n x d` matrix). The squared
/// singular values are the eigenvalues of `(L'L)_{t,t}`, and the trailing
/// right singular vectors span `ker(L_{.,t})`; regularity tests, kernel
/// bases and spectral radii all read off this one decomposition.
pub fn column_block_svd(l: &BlockLowerTriangular, t: usize, tol: f64) -> Result<SmallSvd> {
    if t >= l.shape().time_steps() {
        return Err(AbwError::Shape(format!(
            "block index {t} out of range for T={}",
            l.shape().time_steps()
        )));
    }
    svd_small(&l.col_block(t).into_owned(), tol)
}
