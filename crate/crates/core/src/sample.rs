//! Seeded random generation of factors and orthogonal matrices.
//!
//! All randomness in the library flows through explicit seeds so that
//! optimizer samples, stabilizer samples and oracle runs are reproducible.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::block::{BlockDiagOrthogonal, BlockLowerTriangular, BlockShape};

/// The stream cipher generator used everywhere; stable across platforms.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// R-diagonal sign fix.
pub fn haar_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    if dim == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Random element of the group `O`: independent Haar blocks.
pub fn random_block_orthogonal(shape: BlockShape, rng: &mut ChaCha8Rng) -> BlockDiagOrthogonal {
    let blocks = (0..shape.time_steps())
        .map(|_| haar_orthogonal(shape.block_dim(), rng))
        .collect();
    BlockDiagOrthogonal::from_blocks_unchecked(shape, blocks)
}

/// Random factor with i.i.d. standard normal entries on the block-lower
/// part.
pub fn random_lower_triangular(shape: BlockShape, rng: &mut ChaCha8Rng) -> BlockLowerTriangular {
    let mut draws = {
        let n = shape.dim();
        DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal))
    };
    let d = shape.block_dim();
    for t in 1..shape.time_steps() {
        for s in 0..t {
            draws.view_mut((s * d, t * d), (d, d)).fill(0.0);
        }
    }
    BlockLowerTriangular::new(shape, draws).expect("construction from masked draws")
}

/// Standard normal vector of length `n`.
pub fn standard_normal_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}
