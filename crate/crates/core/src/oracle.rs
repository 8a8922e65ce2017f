//! Independent verification engines.
//!
//! None of these recompute the closed forms they check: the `d = 1`
//! oracle enumerates the sign group exhaustively, the random search
//! samples the orthogonal group, the Monte-Carlo engine simulates the
//! coupling `(L G, M P G)` pathwise, and the angle oracle evaluates the
//! comparison-triangle quantity from raw distances. All randomness is
//! seeded and single-threaded, so reports are bit-reproducible.

use nalgebra::DMatrix;

use crate::block::{BlockDiagOrthogonal, BlockLowerTriangular};
use crate::error::{AbwError, Result};
use crate::geometry::{cos_angle, is_tangent, safe_radius};
use crate::metric::{abw_distance, abw_distance_squared};
use crate::sample::{random_block_orthogonal, rng_from_seed, standard_normal_vector};
use crate::DEFAULT_TOL;

/// Outcome of one oracle run against a closed-form value.
///
/// For minimization oracles `oracle_value >= closed_form` up to round-off:
/// sampling can only over-estimate a minimum.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub closed_form: f64,
    pub oracle_value: f64,
    /// `|oracle_value - closed_form|`.
    pub gap: f64,
    /// Enumerated states, drawn samples, or grid points, by oracle.
    pub samples_or_states: u64,
    pub seed: u64,
    /// Standard error of the estimate (Monte-Carlo oracle only).
    pub stderr: Option<f64>,
    /// Count of monotonicity violations along the grid (angle oracle only).
    pub monotonicity_violations: Option<u64>,
}

impl OracleReport {
    fn deterministic(closed_form: f64, oracle_value: f64, states: u64, seed: u64) -> Self {
        Self {
            closed_form,
            oracle_value,
            gap: (oracle_value - closed_form).abs(),
            samples_or_states: states,
            seed,
            stderr: None,
            monotonicity_violations: None,
        }
    }
}

fn require_d1(l: &BlockLowerTriangular) -> Result<()> {
    if l.shape().block_dim() != 1 {
        return Err(AbwError::InvalidInput(format!(
            "exhaustive search requires d = 1, got d = {}",
            l.shape().block_dim()
        )));
    }
    Ok(())
}

fn procrustes_value_signs(
    l: &BlockLowerTriangular,
    m: &BlockLowerTriangular,
    mask: usize,
) -> f64 {
    // |L - M diag(eps)|_F for the sign pattern encoded in the mask bits
    let t_steps = l.shape().time_steps();
    let lm = l.as_matrix();
    let mm = m.as_matrix();
    let mut acc = 0.0;
    for j in 0..t_steps {
        let sign = if mask >> j & 1 == 0 { 1.0 } else { -1.0 };
        for i in 0..t_steps {
            let diff = lm[(i, j)] - sign * mm[(i, j)];
            acc += diff * diff;
        }
    }
    acc.sqrt()
}

/// Exact minimum of `|L - M diag(eps)|_F` over all sign patterns
/// `eps in {-1, +1}^T`; for `d = 1` this enumerates the whole group `O`.
pub fn exhaustive_distance_d1(
    l: &BlockLowerTriangular,
    m: &BlockLowerTriangular,
) -> Result<OracleReport> {
    require_d1(l)?;
    require_d1(m)?;
    if l.shape() != m.shape() {
        return Err(AbwError::Shape("exhaustive oracle shape mismatch".into()));
    }
    let t_steps = l.shape().time_steps();
    if t_steps > 20 {
        return Err(AbwError::InvalidInput(format!(
            "exhaustive search over 2^{t_steps} states refused (T <= 20)"
        )));
    }
    let states = 1usize << t_steps;
    let mut best = f64::INFINITY;
    for mask in 0..states {
        best = best.min(procrustes_value_signs(l, m, mask));
    }
    let closed = abw_distance(l, m, DEFAULT_TOL)?;
    Ok(OracleReport::deterministic(closed, best, states as u64, 0))
}

/// All sign patterns attaining the exhaustive minimum within `tol`,
/// returned as `+-1` vectors. Used to cross-check optimizer-set
/// enumerations.
pub fn exhaustive_minimizers_d1(
    l: &BlockLowerTriangular,
    m: &BlockLowerTriangular,
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let report = exhaustive_distance_d1(l, m)?;
    let t_steps = l.shape().time_steps();
    let mut out = Vec::new();
    for mask in 0..(1usize << t_steps) {
        if procrustes_value_signs(l, m, mask) <= report.oracle_value + tol {
            out.push(
                (0..t_steps)
                    .map(|j| if mask >> j & 1 == 0 { 1.0 } else { -1.0 })
                    .collect(),
            );
        }
    }
    Ok(out)
}

/// Randomized search over the orthogonal group: Haar samples per block
/// plus the canonical optimizer as one candidate, so the gap closes to
/// round-off while every sampled value dominates the closed form.
pub fn random_search_distance(
    l: &BlockLowerTriangular,
    m: &BlockLowerTriangular,
    n_samples: u64,
    seed: u64,
) -> Result<OracleReport> {
    if n_samples == 0 {
        return Err(AbwError::InvalidInput(
            "random search requires at least one sample".into(),
        ));
    }
    if l.shape() != m.shape() {
        return Err(AbwError::Shape("random search shape mismatch".into()));
    }
    let closed = abw_distance(l, m, DEFAULT_TOL)?;
    let canonical = crate::metric::optimizer_set(l, m, DEFAULT_TOL)?.canonical_member();
    let mut best = (l.as_matrix() - m.mul_block_diag(&canonical)?.as_matrix()).norm();
    let mut rng = rng_from_seed(seed);
    for _ in 0..n_samples {
        let o = random_block_orthogonal(l.shape(), &mut rng);
        let value = (l.as_matrix() - m.mul_block_diag(&o)?.as_matrix()).norm();
        best = best.min(value);
    }
    Ok(OracleReport::deterministic(
        closed,
        best,
        n_samples + 1,
        seed,
    ))
}

/// Monte-Carlo check of the optimal coupling: simulates
/// `(a + L G, b + M P G)` pathwise and compares the mean squared gap with
/// `|a - b|^2 + |L - M P|_F^2`, which it equals in expectation.
pub fn monte_carlo_coupling(
    a: &nalgebra::DVector<f64>,
    l: &BlockLowerTriangular,
    b: &nalgebra::DVector<f64>,
    m: &BlockLowerTriangular,
    p: &BlockDiagOrthogonal,
    n_paths: u64,
    seed: u64,
) -> Result<OracleReport> {
    if l.shape() != m.shape() || p.shape() != l.shape() {
        return Err(AbwError::Shape("coupling shape mismatch".into()));
    }
    let n = l.shape().dim();
    if a.len() != n || b.len() != n {
        return Err(AbwError::Shape(format!(
            "mean vectors must have length {n}"
        )));
    }
    if n_paths < 100 {
        return Err(AbwError::InvalidInput(
            "Monte-Carlo coupling requires at least 100 paths".into(),
        ));
    }
    let d = l.shape().block_dim();
    for t in 0..p.shape().time_steps() {
        let orth = (p.block(t).transpose() * p.block(t) - DMatrix::identity(d, d)).norm();
        if orth > 1e-9 {
            return Err(AbwError::InvalidInput(format!(
                "coupling block {t} is not orthogonal: {orth:.3e}"
            )));
        }
    }

    let mp = m.mul_block_diag(p)?;
    let closed = (a - b).norm_squared() + (l.as_matrix() - mp.as_matrix()).norm_squared();

    let mut rng = rng_from_seed(seed);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n_paths {
        let g = standard_normal_vector(n, &mut rng);
        let x = a + l.as_matrix() * &g;
        let y = b + mp.as_matrix() * &g;
        let sq = (x - y).norm_squared();
        // Welford
        let delta = sq - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (sq - mean);
    }
    let variance = m2 / (n_paths - 1) as f64;
    let stderr = (variance / n_paths as f64).sqrt();

    Ok(OracleReport {
        closed_form: closed,
        oracle_value: mean,
        gap: (mean - closed).abs(),
        samples_or_states: n_paths,
        seed,
        stderr: Some(stderr),
        monotonicity_violations: None,
    })
}

/// The comparison-triangle quantity
/// `alpha = [d^2(L, L+uV) + d^2(L, L+uW) - d^2(L+uV, L+uW)] /
/// [2 d(L, L+uV) d(L, L+uW)]`, evaluated purely from distances. For
/// directions in the geodesic cone it is nonincreasing as `u` decreases
/// and converges to the angle cosine from above.
pub fn angle_comparison(
    l: &BlockLowerTriangular,
    v: &BlockLowerTriangular,
    w: &BlockLowerTriangular,
    u: f64,
    tol: f64,
) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(AbwError::InvalidInput(format!(
            "comparison parameter must lie in (0, 1], got {u}"
        )));
    }
    let gamma = l.add_scaled(u, v)?;
    let eta = l.add_scaled(u, w)?;
    let d_lg = abw_distance_squared(l, &gamma, tol)?;
    let d_le = abw_distance_squared(l, &eta, tol)?;
    let d_ge = abw_distance_squared(&gamma, &eta, tol)?;
    let denom = 2.0 * (d_lg * d_le).sqrt();
    if denom == 0.0 {
        return Err(AbwError::InvalidInput(
            "comparison quantity is undefined: a leg has zero length".into(),
        ));
    }
    Ok((d_lg + d_le - d_ge) / denom)
}

/// Float resolution of the comparison quantity at parameter `u`: the
/// distance terms cancel to `O(u^2)` out of `O(|L|^2)`-sized inputs, so
/// alpha cannot be resolved below roughly `eps * |L|^2 / (u^2 |V| |W|)`.
fn alpha_resolution(
    l: &BlockLowerTriangular,
    v: &BlockLowerTriangular,
    w: &BlockLowerTriangular,
    u: f64,
) -> f64 {
    let scale = l.frobenius_norm_squared()
        + v.frobenius_norm_squared()
        + w.frobenius_norm_squared();
    let denom = 2.0 * u * u * v.frobenius_norm() * w.frobenius_norm();
    64.0 * f64::EPSILON * scale / denom
}

/// Finite-difference validation of the angle: evaluates the comparison
/// quantity on a decreasing grid and reports the smallest-`u` value, its
/// gap to the closed-form [`cos_angle`], and the number of monotonicity
/// violations.
///
/// The directions are scaled by `min(1, safe_radius / 2)` first so that
/// every `L + uV` on the grid is a genuine geodesic point. A violation is
/// counted when a step increases by more than `1e-9` plus the float
/// resolution of alpha at that grid point (the comparison quantity is a
/// difference of squared distances, so its resolution degrades like
/// `u^-2`; see [`angle_comparison`]).
pub fn finite_difference_angle(
    l: &BlockLowerTriangular,
    v: &BlockLowerTriangular,
    w: &BlockLowerTriangular,
    u_grid: &[f64],
    tol: f64,
) -> Result<OracleReport> {
    if v.frobenius_norm() == 0.0 || w.frobenius_norm() == 0.0 {
        return Err(AbwError::InvalidInput(
            "angle validation requires nonzero directions".into(),
        ));
    }
    if !is_tangent(l, v, tol)? || !is_tangent(l, w, tol)? {
        return Err(AbwError::NotTangent(
            "angle validation requires tangent directions".into(),
        ));
    }
    if u_grid.is_empty() {
        return Err(AbwError::InvalidInput("empty comparison grid".into()));
    }
    if u_grid.iter().any(|&u| !(u > 0.0 && u <= 1.0)) {
        return Err(AbwError::InvalidInput(
            "comparison grid must lie in (0, 1]".into(),
        ));
    }
    let mut grid = u_grid.to_vec();
    grid.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let sv = (0.5 * safe_radius(l, v, tol)?).min(1.0);
    let sw = (0.5 * safe_radius(l, w, tol)?).min(1.0);
    let v_scaled = v.scale(sv);
    let w_scaled = w.scale(sw);

    let closed = cos_angle(l, &v_scaled, &w_scaled, tol)?;

    let mut violations = 0u64;
    let mut previous: Option<f64> = None;
    let mut last = f64::NAN;
    for &u in &grid {
        let alpha = angle_comparison(l, &v_scaled, &w_scaled, u, tol)?;
        if let Some(prev) = previous {
            let band = 1e-9 + alpha_resolution(l, &v_scaled, &w_scaled, u);
            if alpha > prev + band {
                violations += 1;
            }
        }
        previous = Some(alpha);
        last = alpha;
    }

    Ok(OracleReport {
        closed_form: closed,
        oracle_value: last,
        gap: (last - closed).abs(),
        samples_or_states: grid.len() as u64,
        seed: 0,
        stderr: None,
        monotonicity_violations: Some(violations),
    })
}
