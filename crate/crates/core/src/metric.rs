//! The adapted Bures-Wasserstein distance and its optimizer structure.
//!
//! For factors `L, M` in `L` the distance is the block Procrustes problem
//!
//! ```text
//! d_ABW(L, M)^2 = min over O in O of |L - M O|_F^2
//!              = |L|_F^2 + |M|_F^2 - 2 sum_t tr(S_t),
//! ```
//!
//! where `S_t` holds the singular values of the diagonal block `(M'L)_{t,t}`;
//! the von Neumann trace inequality collapses the per-block suprema into
//! singular value sums. The minimizing set `O*(L, M)` is parametrized per
//! block by the SVD frames `(M'L)_{t,t} = U_t S_t V_t'` as
//! `P_t = U_t Q_t V_t'` with `Q_t` orthogonal on the null coordinates and
//! identity on the first `rank` coordinates. The stabilizer `O*(L, L)` --
//! the members fixing `L` -- consists of blocks acting as the identity on
//! the row space of `L_{.,t}` and arbitrarily orthogonally on its kernel.

use nalgebra::{DMatrix, DVector};

use crate::block::{
    diag_block_product, BlockDiagOrthogonal, BlockLowerTriangular, BlockShape,
};
use crate::error::{AbwError, Result};
use crate::sample::{haar_orthogonal, rng_from_seed};
use crate::svd::{column_block_svd, svd_small};

fn check_shapes(l: &BlockLowerTriangular, m: &BlockLowerTriangular) -> Result<()> {
    if l.shape() != m.shape() {
        return Err(AbwError::Shape(format!(
            "factor shapes differ: (T={}, d={}) vs (T={}, d={})",
            l.shape().time_steps(),
            l.shape().block_dim(),
            m.shape().time_steps(),
            m.shape().block_dim()
        )));
    }
    Ok(())
}

/// Squared adapted Bures-Wasserstein distance by the trace formula
/// `|L|^2 + |M|^2 - 2 sum_t tr(S_t)`, clamped at zero against round-off
/// (the singular-value sum can exceed `(|L|^2 + |M|^2)/2` by machine noise
/// when the distance vanishes).
pub fn abw_distance_squared(
    l: &BlockLowerTriangular,
    m: &BlockLowerTriangular,
    tol: f64,
) -> Result<f64> {
    check_shapes(l, m)?;
    let mut cross = 0.0;
    for t in 0..l.shape().time_steps() {
        let blk = diag_block_product(m, l, t)?;
        cross += svd_small(&blk, tol)?.nuclear_norm();
    }
    let d2 = l.frobenius_norm_squared() + m.frobenius_norm_squared() - 2.0 * cross;
    Ok(d2.max(0.0))
}

/// Adapted Bures-Wasserstein distance between two factors, evaluated as
/// the attained Procrustes residual `|L - M P|_F` at the canonical
/// optimizer.
///
/// The residual and the trace formula of [`abw_distance_squared`] agree to
/// round-off, but the residual stays relatively accurate when the distance
/// is near zero (the trace formula cancels there and its square root
/// inflates the noise), which the quotient tests rely on.
pub fn abw_distance(l: &BlockLowerTriangular, m: &BlockLowerTriangular, tol: f64) -> Result<f64> {
    let p = optimizer_set(l, m, tol)?.canonical_member();
    let aligned = m.mul_block_diag(&p)?;
    Ok((l.as_matrix() - aligned.as_matrix()).norm())
}

/// Adapted Wasserstein distance between Gaussian processes with means:
/// the mean component splits off as a Euclidean distance.
pub fn aw_gaussian_distance(
    a: &DVector<f64>,
    l: &BlockLowerTriangular,
    b: &DVector<f64>,
    m: &BlockLowerTriangular,
    tol: f64,
) -> Result<f64> {
    check_shapes(l, m)?;
    let n = l.shape().dim();
    if a.len() != n || b.len() != n {
        return Err(AbwError::Shape(format!(
            "mean vectors must have length {n}, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(AbwError::InvalidInput(
            "mean vector contains non-finite entries".into(),
        ));
    }
    let mean_sq = (a - b).norm_squared();
    let factor_dist = abw_distance(l, m, tol)?;
    Ok((mean_sq + factor_dist * factor_dist).sqrt())
}

/// Quotient equality: `[L] = [M]` iff the distance vanishes (equivalently
/// `L = M O` for some `O`).
pub fn quotient_equal(l: &BlockLowerTriangular, m: &BlockLowerTriangular, tol: f64) -> Result<bool> {
    let d = abw_distance(l, m, tol)?;
    Ok(d <= tol * (1.0 + l.frobenius_norm() + m.frobenius_norm()))
}

/// SVD frame of one diagonal block `(M'L)_{t,t}`.
#[derive(Clone, Debug)]
struct OptimizerBlock {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    singular_values: DVector<f64>,
    rank: usize,
}

/// Compact parametrization of the optimizer set `O*(L, M)`.
///
/// Members are exactly the block-diagonal `P` with `P_t = U_t Q_t V_t'`,
/// `Q_t` identity on the first `rank_t` coordinates and an arbitrary
/// orthogonal matrix on the remaining `d - rank_t`. The set is a singleton
/// iff every block has full numerical rank.
#[derive(Clone, Debug)]
pub struct OptimizerSet {
    shape: BlockShape,
    blocks: Vec<OptimizerBlock>,
}

impl OptimizerSet {
    #[inline]
    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    /// Numerical rank of `(M'L)_{t,t}`.
    pub fn rank(&self, t: usize) -> usize {
        self.blocks[t].rank
    }

    /// Singular values of `(M'L)_{t,t}`, nonincreasing.
    pub fn singular_values(&self, t: usize) -> &DVector<f64> {
        &self.blocks[t].singular_values
    }

    /// Gap bracketing the rank decision at block `t`: the smallest retained
    /// singular value (infinity when the rank is zero) and the largest
    /// discarded one (zero at full rank). A narrow gap flags a fragile
    /// optimizer-set dimension.
    pub fn rank_gap(&self, t: usize) -> (f64, f64) {
        let b = &self.blocks[t];
        let kept = if b.rank == 0 {
            f64::INFINITY
        } else {
            b.singular_values[b.rank - 1]
        };
        let dropped = if b.rank == b.singular_values.len() {
            0.0
        } else {
            b.singular_values[b.rank]
        };
        (kept, dropped)
    }

    /// Dimension of the free orthogonal group at block `t`:
    /// `dim O(d - rank_t)`.
    pub fn dof(&self, t: usize) -> usize {
        let free = self.shape.block_dim() - self.blocks[t].rank;
        free * (free - 1) / 2
    }

    /// True iff the optimizer set contains exactly one member.
    pub fn is_singleton(&self) -> bool {
        let d = self.shape.block_dim();
        self.blocks.iter().all(|b| b.rank == d)
    }

    /// The canonical member: all `Q_t = Id`, i.e. `P_t = U_t V_t'`.
    pub fn canonical_member(&self) -> BlockDiagOrthogonal {
        let blocks = self
            .blocks
            .iter()
            .map(|b| &b.u * b.v.transpose())
            .collect();
        BlockDiagOrthogonal::from_blocks_unchecked(self.shape, blocks)
    }

    /// Member determined by one orthogonal matrix of size `d - rank_t` per
    /// block (the free part of `Q_t`).
    pub fn member_from_free_blocks(&self, free: &[DMatrix<f64>]) -> Result<BlockDiagOrthogonal> {
        if free.len() != self.shape.time_steps() {
            return Err(AbwError::Shape(format!(
                "expected {} free blocks, got {}",
                self.shape.time_steps(),
                free.len()
            )));
        }
        let d = self.shape.block_dim();
        let mut blocks = Vec::with_capacity(free.len());
        for (t, q_free) in free.iter().enumerate() {
            let b = &self.blocks[t];
            let k = d - b.rank;
            if q_free.nrows() != k || q_free.ncols() != k {
                return Err(AbwError::Shape(format!(
                    "free block {t} must be {k}x{k}, got {}x{}",
                    q_free.nrows(),
                    q_free.ncols()
                )));
            }
            let orth = (q_free.transpose() * q_free - DMatrix::identity(k, k)).norm();
            if orth > 1e-9 {
                return Err(AbwError::InvalidInput(format!(
                    "free block {t} is not orthogonal: {orth:.3e}"
                )));
            }
            let mut q = DMatrix::<f64>::identity(d, d);
            q.view_mut((b.rank, b.rank), (k, k)).copy_from(q_free);
            blocks.push(&b.u * q * b.v.transpose());
        }
        Ok(BlockDiagOrthogonal::from_blocks_unchecked(self.shape, blocks))
    }

    /// Random member: Haar-distributed free part per block, reproducible
    /// from the seed.
    pub fn sample_member(&self, seed: u64) -> BlockDiagOrthogonal {
        let mut rng = rng_from_seed(seed);
        let d = self.shape.block_dim();
        let free: Vec<DMatrix<f64>> = self
            .blocks
            .iter()
            .map(|b| haar_orthogonal(d - b.rank, &mut rng))
            .collect();
        self.member_from_free_blocks(&free)
            .expect("sampled free blocks are orthogonal")
    }

    /// Full enumeration for `d = 1`, where each free block is a sign. The
    /// member count is `2^(number of rank-zero blocks)`.
    pub fn enumerate_members_d1(&self) -> Result<Vec<BlockDiagOrthogonal>> {
        if self.shape.block_dim() != 1 {
            return Err(AbwError::InvalidInput(
                "member enumeration is only available for d = 1".into(),
            ));
        }
        let free_blocks: Vec<usize> = (0..self.shape.time_steps())
            .filter(|&t| self.blocks[t].rank == 0)
            .collect();
        if free_blocks.len() > 20 {
            return Err(AbwError::InvalidInput(format!(
                "too many free blocks to enumerate: {}",
                free_blocks.len()
            )));
        }
        let mut members = Vec::with_capacity(1usize << free_blocks.len());
        for mask in 0..(1usize << free_blocks.len()) {
            let free: Vec<DMatrix<f64>> = (0..self.shape.time_steps())
                .map(|t| {
                    if self.blocks[t].rank == 1 {
                        DMatrix::zeros(0, 0)
                    } else {
                        let pos = free_blocks.iter().position(|&f| f == t).unwrap();
                        let sign = if mask >> pos & 1 == 0 { 1.0 } else { -1.0 };
                        DMatrix::from_element(1, 1, sign)
                    }
                })
                .collect();
            members.push(self.member_from_free_blocks(&free)?);
        }
        Ok(members)
    }
}

/// Per-block SVD frames of `(M'L)_{t,t}`, parametrizing `O*(L, M)`.
pub fn optimizer_set(
    l: &BlockLowerTriangular,
    m: &BlockLowerTriangular,
    tol: f64,
) -> Result<OptimizerSet> {
    check_shapes(l, m)?;
    let mut blocks = Vec::with_capacity(l.shape().time_steps());
    for t in 0..l.shape().time_steps() {
        let prod = diag_block_product(m, l, t)?;
        let svd = svd_small(&prod, tol)?;
        blocks.push(OptimizerBlock {
            u: svd.u,
            v: svd.v,
            singular_values: svd.singular_values,
            rank: svd.rank,
        });
    }
    Ok(OptimizerSet {
        shape: l.shape(),
        blocks,
    })
}

/// Trace test for membership in `O*(L, M)`: `P` is optimal iff
/// `tr((M'L)_{t,t} P_t') = tr(S_t)` for every `t`; the test accepts within
/// a relative band `tol * (1 + tr(S_t))`.
pub fn is_optimizer(
    l: &BlockLowerTriangular,
    m: &BlockLowerTriangular,
    p: &BlockDiagOrthogonal,
    tol: f64,
) -> Result<bool> {
    check_shapes(l, m)?;
    if p.shape() != l.shape() {
        return Err(AbwError::Shape("optimizer shape mismatch".into()));
    }
    let d = l.shape().block_dim();
    for t in 0..l.shape().time_steps() {
        let orth = (p.block(t).transpose() * p.block(t) - DMatrix::identity(d, d)).norm();
        if orth > tol.max(1e3 * f64::EPSILON) {
            return Err(AbwError::InvalidInput(format!(
                "candidate block {t} is not orthogonal within tolerance: {orth:.3e}"
            )));
        }
    }
    for t in 0..l.shape().time_steps() {
        let prod = diag_block_product(m, l, t)?;
        let trace_s = svd_small(&prod, tol)?.nuclear_norm();
        let attained = (&prod * p.block(t).transpose()).trace();
        if attained < trace_s - tol * (1.0 + trace_s) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One block of the stabilizer: an orthonormal basis of `ker(L_{.,t})`.
#[derive(Clone, Debug)]
struct StabilizerBlock {
    kernel: DMatrix<f64>,
}

/// The stabilizer `O*(L, L)`: all `O` in `O` with `L O = L`.
///
/// Block `t` of a member acts as the identity on the row space of the
/// block column `L_{.,t}` and as an arbitrary orthogonal map on its
/// kernel: `O_t = (Id - N_t N_t') + N_t Q' N_t'`. The stabilizer is
/// trivial exactly when `L` is regular.
#[derive(Clone, Debug)]
pub struct StabilizerSet {
    shape: BlockShape,
    blocks: Vec<StabilizerBlock>,
}

impl StabilizerSet {
    #[inline]
    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    /// Kernel dimension `k_t = d - rk((L'L)_{t,t})`.
    pub fn kernel_dim(&self, t: usize) -> usize {
        self.blocks[t].kernel.ncols()
    }

    /// Orthonormal basis `N_t` of `ker(L_{.,t})`, a `d x k_t` matrix.
    pub fn kernel_basis(&self, t: usize) -> &DMatrix<f64> {
        &self.blocks[t].kernel
    }

    /// True iff the stabilizer is `{Id}` (all kernels trivial).
    pub fn is_trivial(&self) -> bool {
        self.blocks.iter().all(|b| b.kernel.ncols() == 0)
    }

    /// Member determined by one orthogonal `k_t x k_t` matrix per block.
    pub fn member_from_kernel_blocks(&self, qs: &[DMatrix<f64>]) -> Result<BlockDiagOrthogonal> {
        if qs.len() != self.shape.time_steps() {
            return Err(AbwError::Shape(format!(
                "expected {} kernel blocks, got {}",
                self.shape.time_steps(),
                qs.len()
            )));
        }
        let d = self.shape.block_dim();
        let mut blocks = Vec::with_capacity(qs.len());
        for (t, q) in qs.iter().enumerate() {
            let k = self.kernel_dim(t);
            if q.nrows() != k || q.ncols() != k {
                return Err(AbwError::Shape(format!(
                    "kernel block {t} must be {k}x{k}, got {}x{}",
                    q.nrows(),
                    q.ncols()
                )));
            }
            let orth = (q.transpose() * q - DMatrix::identity(k, k)).norm();
            if orth > 1e-9 {
                return Err(AbwError::InvalidInput(format!(
                    "kernel block {t} is not orthogonal: {orth:.3e}"
                )));
            }
            let n_t = &self.blocks[t].kernel;
            let block = DMatrix::identity(d, d) - n_t * n_t.transpose() + n_t * q * n_t.transpose();
            blocks.push(block);
        }
        Ok(BlockDiagOrthogonal::from_blocks_unchecked(self.shape, blocks))
    }

    /// Random member, reproducible from the seed.
    pub fn sample_member(&self, seed: u64) -> BlockDiagOrthogonal {
        let mut rng = rng_from_seed(seed);
        let qs: Vec<DMatrix<f64>> = self
            .blocks
            .iter()
            .map(|b| haar_orthogonal(b.kernel.ncols(), &mut rng))
            .collect();
        self.member_from_kernel_blocks(&qs)
            .expect("sampled kernel blocks are orthogonal")
    }

    /// Full enumeration for `d = 1`: each kernel block contributes a sign.
    pub fn enumerate_members_d1(&self) -> Result<Vec<BlockDiagOrthogonal>> {
        if self.shape.block_dim() != 1 {
            return Err(AbwError::InvalidInput(
                "member enumeration is only available for d = 1".into(),
            ));
        }
        let free_blocks: Vec<usize> = (0..self.shape.time_steps())
            .filter(|&t| self.kernel_dim(t) == 1)
            .collect();
        if free_blocks.len() > 20 {
            return Err(AbwError::InvalidInput(format!(
                "too many free blocks to enumerate: {}",
                free_blocks.len()
            )));
        }
        let mut members = Vec::with_capacity(1usize << free_blocks.len());
        for mask in 0..(1usize << free_blocks.len()) {
            let qs: Vec<DMatrix<f64>> = (0..self.shape.time_steps())
                .map(|t| {
                    if self.kernel_dim(t) == 0 {
                        DMatrix::zeros(0, 0)
                    } else {
                        let pos = free_blocks.iter().position(|&f| f == t).unwrap();
                        let sign = if mask >> pos & 1 == 0 { 1.0 } else { -1.0 };
                        DMatrix::from_element(1, 1, sign)
                    }
                })
                .collect();
            members.push(self.member_from_kernel_blocks(&qs)?);
        }
        Ok(members)
    }
}

/// Stabilizer of `L`: per-block orthonormal kernel bases of the block
/// columns `L_{.,t}` (right singular vectors below the rank threshold).
pub fn stabilizer(l: &BlockLowerTriangular, tol: f64) -> Result<StabilizerSet> {
    let d = l.shape().block_dim();
    let mut blocks = Vec::with_capacity(l.shape().time_steps());
    for t in 0..l.shape().time_steps() {
        let svd = column_block_svd(l, t, tol)?;
        let k = d - svd.rank;
        let kernel = svd.v.columns(svd.rank, k).into_owned();
        blocks.push(StabilizerBlock { kernel });
    }
    Ok(StabilizerSet {
        shape: l.shape(),
        blocks,
    })
}

/// A Gaussian process law: mean vector plus factor. The adapted distance
/// between two such laws is the Pythagorean combination of the mean shift
/// and the factor distance.
#[derive(Clone, Debug)]
pub struct GaussianProcess {
    mean: DVector<f64>,
    factor: BlockLowerTriangular,
}

impl GaussianProcess {
    pub fn new(mean: DVector<f64>, factor: BlockLowerTriangular) -> Result<Self> {
        if mean.len() != factor.shape().dim() {
            return Err(AbwError::Shape(format!(
                "mean has length {}, factor dimension is {}",
                mean.len(),
                factor.shape().dim()
            )));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(AbwError::InvalidInput(
                "mean contains non-finite entries".into(),
            ));
        }
        Ok(Self { mean, factor })
    }

    pub fn centered(factor: BlockLowerTriangular) -> Self {
        let mean = DVector::zeros(factor.shape().dim());
        Self { mean, factor }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn factor(&self) -> &BlockLowerTriangular {
        &self.factor
    }

    pub fn distance(&self, other: &Self, tol: f64) -> Result<f64> {
        aw_gaussian_distance(&self.mean, &self.factor, &other.mean, &other.factor, tol)
    }
}
