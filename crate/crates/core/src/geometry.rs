//! Geodesics, exponential and logarithmic maps, and tangent-cone geometry.
//!
//! Geodesics from `[L]` are the displacement interpolations
//! `u -> [L + u V]` with `V = M P - L` for an optimizer `P`; they have
//! constant speed `|V|_F`. The tangent cone at `[L]` is the linear space
//!
//! ```text
//! V(L) = { V : (V'L)_{t,t} symmetric for all t }
//! ```
//!
//! quotiented by the stabilizer `O*(L, L)`, with metric
//! `d(V, W)^2 = |V|^2 + |W|^2 - 2 sup_O <V, W O>`. On the kernel of a
//! block column the supremum over the stabilizer is a von Neumann trace
//! bound, which gives the closed form used throughout:
//!
//! ```text
//! sup_O <V, W O> = sum_t [ tr A_t - tr(N_t' A_t N_t) + sum_i sigma_i(N_t' A_t N_t) ],
//! ```
//!
//! with `A_t = (W'V)_{t,t}` and `N_t` an orthonormal kernel basis of
//! `L_{.,t}`. Regular factors (all `(L'L)_{t,t}` positive definite) have
//! trivial stabilizer: the cone is the flat space `(V(L), |.|_F)` and the
//! regular set is geodesically convex.



use crate::block::{diag_block_product, BlockDiagOrthogonal, BlockLowerTriangular};
use crate::error::{AbwError, Result};
use crate::metric::{
    abw_distance_squared, is_optimizer, optimizer_set, stabilizer, StabilizerSet,
};
use crate::svd::{column_block_svd, svd_small};

/// Membership test for the tangent space `V(L)`: every diagonal block of
/// `V'L` must be symmetric within `tol * (1 + |V| |L|)`.
pub fn is_tangent(l: &BlockLowerTriangular, v: &BlockLowerTriangular, tol: f64) -> Result<bool> {
    if l.shape() != v.shape() {
        return Err(AbwError::Shape("tangent test shape mismatch".into()));
    }
    let band = tol * (1.0 + v.frobenius_norm() * l.frobenius_norm());
    for t in 0..l.shape().time_steps() {
        let a = diag_block_product(v, l, t)?;
        if (&a - a.transpose()).norm() > band {
            return Ok(false);
        }
    }
    Ok(true)
}

fn require_tangent(
    l: &BlockLowerTriangular,
    v: &BlockLowerTriangular,
    tol: f64,
    what: &str,
) -> Result<()> {
    if !is_tangent(l, v, tol)? {
        return Err(AbwError::NotTangent(format!(
            "{what}: some diagonal block of V'L is not symmetric"
        )));
    }
    Ok(())
}

/// A validated tangent vector: direction `V` in `V(L)` anchored at `L`.
#[derive(Clone, Debug)]
pub struct TangentVector {
    base: BlockLowerTriangular,
    direction: BlockLowerTriangular,
}

impl TangentVector {
    pub fn new(
        base: BlockLowerTriangular,
        direction: BlockLowerTriangular,
        tol: f64,
    ) -> Result<Self> {
        require_tangent(&base, &direction, tol, "tangent vector construction")?;
        Ok(Self { base, direction })
    }

    pub(crate) fn new_unchecked(
        base: BlockLowerTriangular,
        direction: BlockLowerTriangular,
    ) -> Self {
        Self { base, direction }
    }

    pub fn base(&self) -> &BlockLowerTriangular {
        &self.base
    }

    pub fn direction(&self) -> &BlockLowerTriangular {
        &self.direction
    }

    pub fn norm(&self) -> f64 {
        self.direction.frobenius_norm()
    }
}

/// Regularity: `(L'L)_{t,t}` positive definite for every `t`, decided as
/// `lambda_min > tol * lambda_max` (and `lambda_max > 0`) on the squared
/// singular values of the block columns.
pub fn is_regular(l: &BlockLowerTriangular, tol: f64) -> Result<bool> {
    let d = l.shape().block_dim();
    for t in 0..l.shape().time_steps() {
        let svd = column_block_svd(l, t, tol)?;
        let smax = svd.singular_values[0];
        let smin = svd.singular_values[d - 1];
        if smax <= 0.0 || smin * smin <= tol * smax * smax {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A constant-speed geodesic segment `u -> [L + u V]`, `u` in `[0, 1]`,
/// with `V = M P - L` for an optimizer `P`.
#[derive(Clone, Debug)]
pub struct GeodesicSegment {
    base: BlockLowerTriangular,
    direction: BlockLowerTriangular,
    optimizer: BlockDiagOrthogonal,
}

impl GeodesicSegment {
    pub fn base(&self) -> &BlockLowerTriangular {
        &self.base
    }

    pub fn direction(&self) -> &BlockLowerTriangular {
        &self.direction
    }

    /// The optimizer used to align the endpoint.
    pub fn optimizer(&self) -> &BlockDiagOrthogonal {
        &self.optimizer
    }

    /// Speed of the segment, equal to the distance between its endpoints.
    pub fn length(&self) -> f64 {
        self.direction.frobenius_norm()
    }

    /// The point `L + u V`.
    pub fn point(&self, u: f64) -> BlockLowerTriangular {
        self.base
            .add_scaled(u, &self.direction)
            .expect("direction shares the base shape")
    }
}

/// Geodesic from `[L]` to `[M]` through the canonical optimizer.
pub fn geodesic(
    l: &BlockLowerTriangular,
    m: &BlockLowerTriangular,
    tol: f64,
) -> Result<GeodesicSegment> {
    let p = optimizer_set(l, m, tol)?.canonical_member();
    geodesic_with(l, m, &p, tol)
}

/// Geodesic built from an explicit optimizer member; rejects `P` outside
/// `O*(L, M)`. Distinct members generate the distinct geodesics between
/// `[L]` and `[M]`.
pub fn geodesic_with(
    l: &BlockLowerTriangular,
    m: &BlockLowerTriangular,
    p: &BlockDiagOrthogonal,
    tol: f64,
) -> Result<GeodesicSegment> {
    if !is_optimizer(l, m, p, tol)? {
        return Err(AbwError::InvalidInput(
            "supplied block-orthogonal matrix is not an optimizer for (L, M)".into(),
        ));
    }
    let direction = m.mul_block_diag(p)?.sub(l)?;
    Ok(GeodesicSegment {
        base: l.clone(),
        direction,
        optimizer: p.clone(),
    })
}

/// Result of the logarithmic map.
#[derive(Clone, Debug)]
pub struct LogResult {
    pub tangent: TangentVector,
    /// True iff the geodesic from `[L]` to `[M]` is unique, decided by the
    /// rank test `rk((M'M)_{t,t}) = rk((M'L)_{t,t})` for all `t`.
    pub unique: bool,
    /// Set when some singular value sits within a decade of the rank
    /// threshold, making the uniqueness verdict fragile.
    pub marginal: bool,
    pub optimizer_used: BlockDiagOrthogonal,
}

/// Logarithmic map `log_[L]([M])`: the initial velocity `M P - L` of a
/// geodesic toward `[M]`. When the rank test fails the direction returned
/// is still a valid geodesic velocity, but other, inequivalent choices
/// exist and `unique` is cleared.
pub fn log_map(l: &BlockLowerTriangular, m: &BlockLowerTriangular, tol: f64) -> Result<LogResult> {
    let oset = optimizer_set(l, m, tol)?;
    let p = oset.canonical_member();
    let direction = m.mul_block_diag(&p)?.sub(l)?;

    let mut unique = true;
    let mut marginal = false;
    let near_threshold = |sv: &nalgebra::DVector<f64>| {
        let s1 = sv[0];
        s1 > 0.0
            && sv
                .iter()
                .any(|&s| s > s1 * tol / 10.0 && s < s1 * tol * 10.0)
    };
    for t in 0..l.shape().time_steps() {
        let gram = diag_block_product(m, m, t)?;
        let gram_svd = svd_small(&gram, tol)?;
        if gram_svd.rank != oset.rank(t) {
            unique = false;
        }
        if near_threshold(&gram_svd.singular_values) || near_threshold(oset.singular_values(t)) {
            marginal = true;
        }
    }
    Ok(LogResult {
        tangent: TangentVector::new_unchecked(l.clone(), direction),
        unique,
        marginal,
        optimizer_used: p,
    })
}

/// Result of the exponential map.
#[derive(Clone, Debug)]
pub struct ExpResult {
    pub point: BlockLowerTriangular,
    /// Certified radius within which the stabilizer is preserved and the
    /// curve is the unique geodesic with this velocity.
    pub safe_radius: f64,
    /// Cleared when `r` exceeds the safe radius; the point is still
    /// returned (the curve may stop being the unique geodesic, it does not
    /// stop existing).
    pub within_safe_radius: bool,
}

/// Exponential map `exp_[L](r V) = [L + r V]` for a tangent direction `V`.
pub fn exp_map(
    l: &BlockLowerTriangular,
    v: &BlockLowerTriangular,
    r: f64,
    tol: f64,
) -> Result<ExpResult> {
    require_tangent(l, v, tol, "exp map")?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(AbwError::InvalidInput(format!(
            "exp map radius must be finite and nonnegative, got {r}"
        )));
    }
    let radius = safe_radius_inner(l, v, tol)?;
    Ok(ExpResult {
        point: l.add_scaled(r, v)?,
        safe_radius: radius,
        within_safe_radius: r <= radius,
    })
}

fn safe_radius_inner(l: &BlockLowerTriangular, v: &BlockLowerTriangular, tol: f64) -> Result<f64> {
    let mut radius = f64::INFINITY;
    for t in 0..l.shape().time_steps() {
        let v_op = column_block_svd(v, t, tol)?.singular_values[0];
        if v_op == 0.0 {
            continue;
        }
        let l_svd = column_block_svd(l, t, tol)?;
        if l_svd.rank == 0 {
            // zero block: lambda_min^+ = +infinity by convention
            continue;
        }
        let lambda_plus_min = {
            let s = l_svd.singular_values[l_svd.rank - 1];
            s * s
        };
        radius = radius.min(lambda_plus_min.sqrt() / v_op);
    }
    Ok(radius)
}

/// Largest `r` with `r^2 |V_{.,t}|_op^2 < lambda_min^+((L'L)_{t,t})` for
/// all `t`; within this radius the optimizer set of `(L, L + r V)` equals
/// the stabilizer of `L`. Infinite when `V = 0` or all blocks of `L`
/// vanish.
pub fn safe_radius(l: &BlockLowerTriangular, v: &BlockLowerTriangular, tol: f64) -> Result<f64> {
    require_tangent(l, v, tol, "safe radius")?;
    safe_radius_inner(l, v, tol)
}

/// `sup over O in O*(L,L) of <V, W O>`, evaluated per block by splitting
/// into the row space (where members act as the identity) and the kernel
/// (where the supremum is the nuclear norm of the compressed block).
fn stabilizer_sup(
    stab: &StabilizerSet,
    v: &BlockLowerTriangular,
    w: &BlockLowerTriangular,
    tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..stab.shape().time_steps() {
        let a = diag_block_product(w, v, t)?;
        total += a.trace();
        let n_t = stab.kernel_basis(t);
        if n_t.ncols() == 0 {
            continue;
        }
        let compressed = n_t.transpose() * &a * n_t;
        total -= compressed.trace();
        total += svd_small(&compressed, tol)?.nuclear_norm();
    }
    Ok(total)
}

/// Tangent-cone distance `inf over O in O*(L,L) of |V - W O|_F` between
/// two tangent directions at `L`. Reduces to the plain Frobenius distance
/// when the stabilizer is trivial.
pub fn tangent_cone_distance(
    l: &BlockLowerTriangular,
    v: &BlockLowerTriangular,
    w: &BlockLowerTriangular,
    tol: f64,
) -> Result<f64> {
    require_tangent(l, v, tol, "tangent-cone distance")?;
    require_tangent(l, w, tol, "tangent-cone distance")?;
    let stab = stabilizer(l, tol)?;
    if stab.is_trivial() {
        return Ok(v.sub(w)?.frobenius_norm());
    }
    let sup = stabilizer_sup(&stab, v, w, tol)?;
    let d2 = v.frobenius_norm_squared() + w.frobenius_norm_squared() - 2.0 * sup;
    Ok(d2.max(0.0).sqrt())
}

/// Cosine of the angle between the geodesics generated by `V` and `W`:
/// `sup over O in O*(L,L) of <V, W O> / (|V| |W|)`, clamped to `[-1, 1]`.
pub fn cos_angle(
    l: &BlockLowerTriangular,
    v: &BlockLowerTriangular,
    w: &BlockLowerTriangular,
    tol: f64,
) -> Result<f64> {
    require_tangent(l, v, tol, "angle")?;
    require_tangent(l, w, tol, "angle")?;
    let nv = v.frobenius_norm();
    let nw = w.frobenius_norm();
    if nv == 0.0 || nw == 0.0 {
        return Err(AbwError::InvalidInput(
            "angle is undefined for a zero direction".into(),
        ));
    }
    let stab = stabilizer(l, tol)?;
    let sup = stabilizer_sup(&stab, v, w, tol)?;
    Ok((sup / (nv * nw)).clamp(-1.0, 1.0))
}

/// Outcome of a semi-concavity comparison.
#[derive(Clone, Copy, Debug)]
pub struct Semiconcavity {
    pub satisfied: bool,
    /// `d^2(gamma(u), Z) - [(1-u) d^2(L,Z) + u d^2(M,Z) - u(1-u) d^2(L,M)]`;
    /// nonnegative in exact arithmetic on a space of nonnegative curvature.
    pub slack: f64,
}

/// Checks the semi-concavity inequality along the canonical geodesic from
/// `[L]` to `[M]` against the reference point `[Z]` at parameter `u`.
pub fn semiconcavity_check(
    l: &BlockLowerTriangular,
    m: &BlockLowerTriangular,
    z: &BlockLowerTriangular,
    u: f64,
    tol: f64,
) -> Result<Semiconcavity> {
    if !(0.0..=1.0).contains(&u) {
        return Err(AbwError::InvalidInput(format!(
            "interpolation parameter must lie in [0,1], got {u}"
        )));
    }
    let gamma = geodesic(l, m, tol)?;
    let lhs = abw_distance_squared(&gamma.point(u), z, tol)?;
    let d_lz = abw_distance_squared(l, z, tol)?;
    let d_mz = abw_distance_squared(m, z, tol)?;
    let d_lm = abw_distance_squared(l, m, tol)?;
    let slack = lhs - ((1.0 - u) * d_lz + u * d_mz - u * (1.0 - u) * d_lm);
    Ok(Semiconcavity {
        satisfied: slack >= -tol,
        slack,
    })
}

/// Sufficient condition for a unique geodesic from a regular base:
/// `d^2([L],[M]) < min_t lambda_min((L'L)_{t,t})`. A `false` verdict does
/// not rule out uniqueness (the rank test of [`log_map`] is the exact
/// criterion).
pub fn unique_geodesic_sufficient(
    l: &BlockLowerTriangular,
    m: &BlockLowerTriangular,
    tol: f64,
) -> Result<bool> {
    if !is_regular(l, tol)? {
        return Err(AbwError::NotRegular(
            "the sufficient condition requires a regular base factor".into(),
        ));
    }
    let d = l.shape().block_dim();
    let mut lambda_min = f64::INFINITY;
    for t in 0..l.shape().time_steps() {
        let s = column_block_svd(l, t, tol)?.singular_values[d - 1];
        lambda_min = lambda_min.min(s * s);
    }
    Ok(abw_distance_squared(l, m, tol)? < lambda_min - tol)
}
