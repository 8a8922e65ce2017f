//! Block-structured dense matrices.
//!
//! A `dT x dT` matrix is viewed as a `T x T` grid of `d x d` blocks,
//! written `A_{s,t}` for `s, t = 0, ..., T-1`. Three structural classes
//! matter here:
//!
//! * [`BlockMatrix`] -- any dense matrix with a block view,
//! * [`BlockLowerTriangular`] -- `A_{s,t} = 0` for `s < t` (the set `L` of
//!   factors of adapted Gaussian processes; zeros are exact and enforced
//!   on construction),
//! * [`BlockDiagOrthogonal`] -- block-diagonal with orthogonal `d x d`
//!   blocks (the group `O` acting on factors from the right).

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{AbwError, Result};

/// Block layout: `T` time steps of spatial dimension `d`, total dimension
/// `n = d * T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockShape {
    time_steps: usize,
    block_dim: usize,
}

impl BlockShape {
    pub fn new(time_steps: usize, block_dim: usize) -> Result<Self> {
        if time_steps == 0 || block_dim == 0 {
            return Err(AbwError::InvalidInput(format!(
                "block shape requires T >= 1 and d >= 1, got T={time_steps}, d={block_dim}"
            )));
        }
        Ok(Self {
            time_steps,
            block_dim,
        })
    }

    /// Number of time steps `T`.
    #[inline]
    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    /// Spatial dimension `d` of a single block.
    #[inline]
    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    /// Total dimension `n = d * T`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.time_steps * self.block_dim
    }
}

fn check_finite(data: &DMatrix<f64>) -> Result<()> {
    if data.iter().any(|x| !x.is_finite()) {
        return Err(AbwError::InvalidInput(
            "matrix contains non-finite entries".into(),
        ));
    }
    Ok(())
}

fn check_dims(shape: BlockShape, data: &DMatrix<f64>) -> Result<()> {
    let n = shape.dim();
    if data.nrows() != n || data.ncols() != n {
        return Err(AbwError::Shape(format!(
            "expected {n}x{n} matrix for shape (T={}, d={}), got {}x{}",
            shape.time_steps(),
            shape.block_dim(),
            data.nrows(),
            data.ncols()
        )));
    }
    Ok(())
}

/// Dense square matrix addressable as `d x d` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    shape: BlockShape,
    data: DMatrix<f64>,
}

impl BlockMatrix {
    pub fn new(shape: BlockShape, data: DMatrix<f64>) -> Result<Self> {
        check_dims(shape, &data)?;
        check_finite(&data)?;
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: BlockShape) -> Self {
        let n = shape.dim();
        Self {
            shape,
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(shape: BlockShape) -> Self {
        let n = shape.dim();
        Self {
            shape,
            data: DMatrix::identity(n, n),
        }
    }

    #[inline]
    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    /// The block `A_{s,t}`: rows `s*d .. (s+1)*d`, columns `t*d .. (t+1)*d`.
    pub fn block(&self, s: usize, t: usize) -> DMatrixView<'_, f64> {
        let d = self.shape.block_dim();
        self.data.view((s * d, t * d), (d, d))
    }

    /// The block column `A_{.,t}` of size `n x d`.
    pub fn col_block(&self, t: usize) -> DMatrixView<'_, f64> {
        let d = self.shape.block_dim();
        self.data.view((0, t * d), (self.shape.dim(), d))
    }

    #[inline]
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }
}

/// Block-lower-triangular factor: `A_{s,t} = 0` for `s < t`, with the zeros
/// exact. `L` in this form represents the centered Gaussian process `X = LG`
/// driven by independent standard Gaussians `G_1, ..., G_T`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockLowerTriangular {
    shape: BlockShape,
    data: DMatrix<f64>,
}

impl BlockLowerTriangular {
    /// Builds from a dense matrix; entries strictly above the block diagonal
    /// must be exactly zero.
    pub fn new(shape: BlockShape, data: DMatrix<f64>) -> Result<Self> {
        check_dims(shape, &data)?;
        check_finite(&data)?;
        let d = shape.block_dim();
        for t in 1..shape.time_steps() {
            for s in 0..t {
                let blk = data.view((s * d, t * d), (d, d));
                if blk.iter().any(|&x| x != 0.0) {
                    return Err(AbwError::InvalidInput(format!(
                        "block ({s},{t}) above the diagonal is nonzero; \
                         factors must be exactly block-lower-triangular"
                    )));
                }
            }
        }
        Ok(Self { shape, data })
    }

    /// Builds from an entry function, evaluated only on the block-lower
    /// part; everything above the block diagonal is set to zero.
    pub fn from_fn(shape: BlockShape, f: impl Fn(usize, usize) -> f64) -> Self {
        let d = shape.block_dim();
        let data = DMatrix::from_fn(shape.dim(), shape.dim(), |i, j| {
            if j / d > i / d {
                0.0
            } else {
                f(i, j)
            }
        });
        Self { shape, data }
    }

    pub(crate) fn from_parts_unchecked(shape: BlockShape, data: DMatrix<f64>) -> Self {
        debug_assert!(check_dims(shape, &data).is_ok());
        Self { shape, data }
    }

    pub fn zeros(shape: BlockShape) -> Self {
        let n = shape.dim();
        Self {
            shape,
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(shape: BlockShape) -> Self {
        let n = shape.dim();
        Self {
            shape,
            data: DMatrix::identity(n, n),
        }
    }

    #[inline]
    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn block(&self, s: usize, t: usize) -> DMatrixView<'_, f64> {
        let d = self.shape.block_dim();
        self.data.view((s * d, t * d), (d, d))
    }

    pub fn col_block(&self, t: usize) -> DMatrixView<'_, f64> {
        let d = self.shape.block_dim();
        self.data.view((0, t * d), (self.shape.dim(), d))
    }

    #[inline]
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn frobenius_norm_squared(&self) -> f64 {
        self.data.norm_squared()
    }

    /// `self + r * v`. Block triangularity is preserved exactly.
    pub fn add_scaled(&self, r: f64, v: &Self) -> Result<Self> {
        if self.shape != v.shape {
            return Err(AbwError::Shape(
                "mismatched shapes in factor combination".into(),
            ));
        }
        Ok(Self {
            shape: self.shape,
            data: &self.data + &v.data * r,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(-1.0, other)
    }

    pub fn scale(&self, r: f64) -> Self {
        Self {
            shape: self.shape,
            data: &self.data * r,
        }
    }

    /// Right action `L * O` of a block-diagonal orthogonal matrix. The
    /// product acts per block column, so the exact zeros above the block
    /// diagonal are untouched.
    pub fn mul_block_diag(&self, o: &BlockDiagOrthogonal) -> Result<Self> {
        if self.shape != o.shape() {
            return Err(AbwError::Shape(
                "mismatched shapes in factor-orthogonal product".into(),
            ));
        }
        let d = self.shape.block_dim();
        let mut data = self.data.clone();
        for t in 0..self.shape.time_steps() {
            let prod = self.col_block(t) * o.block(t);
            data.view_mut((0, t * d), (self.shape.dim(), d)).copy_from(&prod);
        }
        Ok(Self {
            shape: self.shape,
            data,
        })
    }
}

/// Block-diagonal matrix with orthogonal `d x d` diagonal blocks; an element
/// of the group `O` under which factors represent the same adapted law.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagOrthogonal {
    shape: BlockShape,
    blocks: Vec<DMatrix<f64>>,
}

impl BlockDiagOrthogonal {
    /// Builds from the `T` diagonal blocks; each must satisfy
    /// `|O_t' O_t - Id|_F <= tol`.
    pub fn new(shape: BlockShape, blocks: Vec<DMatrix<f64>>, tol: f64) -> Result<Self> {
        if blocks.len() != shape.time_steps() {
            return Err(AbwError::Shape(format!(
                "expected {} diagonal blocks, got {}",
                shape.time_steps(),
                blocks.len()
            )));
        }
        let d = shape.block_dim();
        for (t, b) in blocks.iter().enumerate() {
            if b.nrows() != d || b.ncols() != d {
                return Err(AbwError::Shape(format!(
                    "diagonal block {t} is {}x{}, expected {d}x{d}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            check_finite(b)?;
            let err = (b.transpose() * b - DMatrix::identity(d, d)).norm();
            if err > tol {
                return Err(AbwError::InvalidInput(format!(
                    "diagonal block {t} is not orthogonal: |O'O - Id|_F = {err:.3e} > {tol:.3e}"
                )));
            }
        }
        Ok(Self { shape, blocks })
    }

    /// Builds from a dense matrix: off-diagonal blocks must be exactly zero.
    pub fn from_matrix(shape: BlockShape, data: &DMatrix<f64>, tol: f64) -> Result<Self> {
        check_dims(shape, data)?;
        let d = shape.block_dim();
        for s in 0..shape.time_steps() {
            for t in 0..shape.time_steps() {
                if s == t {
                    continue;
                }
                let blk = data.view((s * d, t * d), (d, d));
                if blk.iter().any(|&x| x != 0.0) {
                    return Err(AbwError::InvalidInput(format!(
                        "off-diagonal block ({s},{t}) is nonzero; expected block-diagonal"
                    )));
                }
            }
        }
        let blocks = (0..shape.time_steps())
            .map(|t| data.view((t * d, t * d), (d, d)).into_owned())
            .collect();
        Self::new(shape, blocks, tol)
    }

    pub(crate) fn from_blocks_unchecked(shape: BlockShape, blocks: Vec<DMatrix<f64>>) -> Self {
        debug_assert_eq!(blocks.len(), shape.time_steps());
        Self { shape, blocks }
    }

    pub fn identity(shape: BlockShape) -> Self {
        let d = shape.block_dim();
        Self {
            shape,
            blocks: (0..shape.time_steps())
                .map(|_| DMatrix::identity(d, d))
                .collect(),
        }
    }

    #[inline]
    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn block(&self, t: usize) -> &DMatrix<f64> {
        &self.blocks[t]
    }

    pub fn transpose(&self) -> Self {
        Self {
            shape: self.shape,
            blocks: self.blocks.iter().map(|b| b.transpose()).collect(),
        }
    }

    /// Group product `self * rhs`, blockwise.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        if self.shape != rhs.shape {
            return Err(AbwError::Shape(
                "mismatched shapes in orthogonal composition".into(),
            ));
        }
        Ok(Self {
            shape: self.shape,
            blocks: self
                .blocks
                .iter()
                .zip(&rhs.blocks)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.shape.block_dim();
        let n = self.shape.dim();
        let mut out = DMatrix::zeros(n, n);
        for (t, b) in self.blocks.iter().enumerate() {
            out.view_mut((t * d, t * d), (d, d)).copy_from(b);
        }
        out
    }

    /// Every block-diagonal matrix is in particular block-lower-triangular.
    pub fn to_lower_triangular(&self) -> BlockLowerTriangular {
        BlockLowerTriangular::from_parts_unchecked(self.shape, self.to_matrix())
    }
}

/// Frobenius inner product `<A, B> = sum_ij A_ij B_ij`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(AbwError::Shape(format!(
            "frobenius inner product of {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(a.dot(b))
}

/// Frobenius norm `|A|_F = sqrt(<A, A>)`.
pub fn frobenius_norm(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// The diagonal block `(M'L)_{t,t}`, computed as `M_{.,t}' L_{.,t}`. Only
/// rows `s >= t` carry data by triangularity, but the zero rows contribute
/// exact zeros so the full block column is used as is.
pub fn diag_block_product(
    m: &BlockLowerTriangular,
    l: &BlockLowerTriangular,
    t: usize,
) -> Result<DMatrix<f64>> {
    if m.shape() != l.shape() {
        return Err(AbwError::Shape(
            "mismatched shapes in diagonal block product".into(),
        ));
    }
    if t >= l.shape().time_steps() {
        return Err(AbwError::Shape(format!(
            "block index {t} out of range for T={}",
            l.shape().time_steps()
        )));
    }
    Ok(m.col_block(t).transpose() * l.col_block(t))
}
