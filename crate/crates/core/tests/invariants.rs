//! Cross-module property sweeps: dual-route consistency between the trace
//! formula and the Procrustes residual, optimizer-set algebra, geodesic
//! rank stability, and the tangent-cone supremum against sampled
//! stabilizer members.

use abw_core::sample::{random_block_orthogonal, random_lower_triangular, rng_from_seed};
use abw_core::{
    abw_distance, abw_distance_squared, cos_angle, diag_block_product, geodesic, is_optimizer,
    log_map, optimizer_set, stabilizer, svd_small, tangent_cone_distance, unique_geodesic_sufficient,
    BlockLowerTriangular, BlockShape, DEFAULT_TOL,
};
use proptest::prelude::*;
use rand::Rng;

fn shape(t: usize, d: usize) -> BlockShape {
    BlockShape::new(t, d).unwrap()
}

/// Random factor with a few columns zeroed so kernels are nontrivial.
fn degenerate_factor(
    s: BlockShape,
    kill: &[usize],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> BlockLowerTriangular {
    let mut data = random_lower_triangular(s, rng).as_matrix().clone();
    for &c in kill {
        data.column_mut(c).fill(0.0);
    }
    BlockLowerTriangular::new(s, data).unwrap()
}

#[test]
fn diag_block_product_matches_full_multiply() {
    let mut rng = rng_from_seed(211);
    for trial in 0..200 {
        let t = 1 + trial % 4;
        let d = 1 + trial % 3;
        let s = shape(t, d);
        let l = random_lower_triangular(s, &mut rng);
        let m = random_lower_triangular(s, &mut rng);
        let full = m.as_matrix().transpose() * l.as_matrix();
        for k in 0..t {
            let blk = diag_block_product(&m, &l, k).unwrap();
            let reference = full.view((k * d, k * d), (d, d));
            assert!((blk - reference).norm() <= 64.0 * f64::EPSILON * full.norm());
        }
    }
}

#[test]
fn procrustes_residual_matches_trace_formula() {
    let mut rng = rng_from_seed(223);
    for trial in 0..300 {
        let s = shape(1 + trial % 4, 1 + trial % 3);
        let l = random_lower_triangular(s, &mut rng);
        let m = if trial % 5 == 0 {
            degenerate_factor(s, &[0], &mut rng)
        } else {
            random_lower_triangular(s, &mut rng)
        };
        let residual = abw_distance(&l, &m, DEFAULT_TOL).unwrap();
        let trace = abw_distance_squared(&l, &m, DEFAULT_TOL).unwrap();
        let diff = (residual * residual - trace).abs();
        assert!(
            diff <= 1e-10 * (1.0 + trace),
            "dual routes disagree: residual^2 = {}, trace = {}",
            residual * residual,
            trace
        );
    }
}

#[test]
fn optimizer_set_closed_under_stabilizer_and_transposition() {
    let mut rng = rng_from_seed(227);
    for trial in 0..100 {
        let s = shape(2 + trial % 3, 1 + trial % 3);
        let n = s.dim();
        let l = degenerate_factor(s, &[trial % n], &mut rng);
        let m = if trial % 2 == 0 {
            random_lower_triangular(s, &mut rng)
        } else {
            degenerate_factor(s, &[(trial + 1) % n], &mut rng)
        };

        let p = optimizer_set(&l, &m, DEFAULT_TOL)
            .unwrap()
            .sample_member(trial as u64);
        assert!(is_optimizer(&l, &m, &p, DEFAULT_TOL).unwrap());

        // closure under the stabilizer acting on the right
        let o = stabilizer(&l, DEFAULT_TOL)
            .unwrap()
            .sample_member(trial as u64 + 1000);
        let po = p.compose(&o).unwrap();
        assert!(is_optimizer(&l, &m, &po, DEFAULT_TOL).unwrap());

        // transposition swaps the arguments
        assert!(is_optimizer(&m, &l, &p.transpose(), DEFAULT_TOL).unwrap());
    }
}

#[test]
fn ranks_stable_along_geodesics() {
    let mut rng = rng_from_seed(229);
    for trial in 0..60 {
        let s = shape(2 + trial % 3, 1 + trial % 3);
        let l = if trial % 3 == 0 {
            degenerate_factor(s, &[0, s.dim() - 1], &mut rng)
        } else {
            random_lower_triangular(s, &mut rng)
        };
        let m = random_lower_triangular(s, &mut rng);
        let gamma = geodesic(&l, &m, DEFAULT_TOL).unwrap();

        let base_ranks: Vec<usize> = (0..s.time_steps())
            .map(|t| {
                svd_small(&diag_block_product(&l, &l, t).unwrap(), DEFAULT_TOL)
                    .unwrap()
                    .rank
            })
            .collect();
        for &u in &[0.1, 0.35, 0.6, 0.9] {
            let pt = gamma.point(u);
            for t in 0..s.time_steps() {
                let rank_u =
                    svd_small(&diag_block_product(&pt, &l, t).unwrap(), DEFAULT_TOL)
                        .unwrap()
                        .rank;
                assert_eq!(
                    rank_u, base_ranks[t],
                    "rank drift at u={u}, block {t} (trial {trial})"
                );
            }
            // the identity stays optimal between L and every interior point
            let id = abw_core::BlockDiagOrthogonal::identity(s);
            assert!(is_optimizer(&l, &pt, &id, DEFAULT_TOL).unwrap());
        }
    }
}

#[test]
fn sufficient_condition_implies_rank_test_and_singleton() {
    let mut rng = rng_from_seed(233);
    let mut hits = 0;
    for trial in 0..200 {
        let s = shape(1 + trial % 4, 1 + trial % 3);
        let l = random_lower_triangular(s, &mut rng);
        let target = random_lower_triangular(s, &mut rng);
        // shrink toward L so that some trials satisfy the bound
        let v = geodesic(&l, &target, DEFAULT_TOL).unwrap().direction().clone();
        let scale: f64 = rng.gen_range(0.01..0.8);
        let m = l.add_scaled(scale / (1.0 + v.frobenius_norm()), &v).unwrap();

        if !abw_core::is_regular(&l, DEFAULT_TOL).unwrap() {
            continue;
        }
        if unique_geodesic_sufficient(&l, &m, DEFAULT_TOL).unwrap() {
            hits += 1;
            let log = log_map(&l, &m, DEFAULT_TOL).unwrap();
            assert!(log.unique, "sufficient condition must imply the rank test");
            assert!(
                optimizer_set(&l, &m, DEFAULT_TOL).unwrap().is_singleton(),
                "sufficient condition must pin a single optimizer"
            );
        }
    }
    assert!(hits >= 50, "sweep failed to exercise the bound ({hits} hits)");
}

#[test]
fn stabilizer_sup_dominates_sampled_members() {
    let mut rng = rng_from_seed(239);
    for trial in 0..10 {
        let s = shape(3, 2);
        let l = degenerate_factor(s, &[1, 4], &mut rng);
        let m1 = random_lower_triangular(s, &mut rng);
        let m2 = random_lower_triangular(s, &mut rng);
        let v = geodesic(&l, &m1, DEFAULT_TOL).unwrap().direction().clone();
        let w = geodesic(&l, &m2, DEFAULT_TOL).unwrap().direction().clone();

        let nv = v.frobenius_norm();
        let nw = w.frobenius_norm();
        let sup = cos_angle(&l, &v, &w, DEFAULT_TOL).unwrap() * nv * nw;

        let stab = stabilizer(&l, DEFAULT_TOL).unwrap();
        assert!(!stab.is_trivial());
        for k in 0..1000u64 {
            let o = stab.sample_member(trial as u64 * 10_000 + k);
            let wo = w.mul_block_diag(&o).unwrap();
            let inner = abw_core::frobenius_inner(v.as_matrix(), wo.as_matrix()).unwrap();
            assert!(
                inner <= sup + 1e-9,
                "sampled member beats the closed-form supremum: {inner} > {sup}"
            );
        }

        // law of cosines ties the cone distance to the angle
        let d = tangent_cone_distance(&l, &v, &w, DEFAULT_TOL).unwrap();
        let cos = sup / (nv * nw);
        let law = (nv * nv + nw * nw - 2.0 * nv * nw * cos).max(0.0);
        assert!((d * d - law).abs() <= 1e-9 * (1.0 + law));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // cos_angle is scale-invariant in both arguments and bounded
    #[test]
    fn angle_scaling_invariance(seed in 0u64..10_000, a in 0.05f64..20.0, b in 0.05f64..20.0) {
        let mut rng = rng_from_seed(seed);
        let s = shape(2, 2);
        let l = random_lower_triangular(s, &mut rng);
        let m1 = random_lower_triangular(s, &mut rng);
        let m2 = random_lower_triangular(s, &mut rng);
        let v = geodesic(&l, &m1, DEFAULT_TOL).unwrap().direction().clone();
        let w = geodesic(&l, &m2, DEFAULT_TOL).unwrap().direction().clone();
        prop_assume!(v.frobenius_norm() > 1e-9 && w.frobenius_norm() > 1e-9);

        let base = cos_angle(&l, &v, &w, DEFAULT_TOL).unwrap();
        prop_assert!((-1.0..=1.0).contains(&base));
        let scaled = cos_angle(&l, &v.scale(a), &w.scale(b), DEFAULT_TOL).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-9);
        let self_cos = cos_angle(&l, &v, &v, DEFAULT_TOL).unwrap();
        prop_assert!((self_cos - 1.0).abs() <= 1e-12);
    }

    // quotient invariance of the distance under the group action
    #[test]
    fn distance_invariant_under_group_action(seed in 0u64..10_000) {
        let mut rng = rng_from_seed(seed);
        let s = shape(3, 2);
        let l = random_lower_triangular(s, &mut rng);
        let m = random_lower_triangular(s, &mut rng);
        let o1 = random_block_orthogonal(s, &mut rng);
        let o2 = random_block_orthogonal(s, &mut rng);
        let d = abw_distance(&l, &m, DEFAULT_TOL).unwrap();
        let d_rot = abw_distance(
            &l.mul_block_diag(&o1).unwrap(),
            &m.mul_block_diag(&o2).unwrap(),
            DEFAULT_TOL,
        )
        .unwrap();
        prop_assert!((d - d_rot).abs() <= 1e-10 * (1.0 + d));
    }
}
