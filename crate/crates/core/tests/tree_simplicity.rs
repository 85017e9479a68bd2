use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specmult_core::linalg;
use specmult_core::operator_model::{build_canopy_bethe, build_rooted_tree, RootedTreeModel};
use specmult_core::tree_simplicity::*;
use specmult_core::{CVector, Error, C64};

fn tol() -> TreeTolerances {
    TreeTolerances::default()
}

fn eigenpairs(tree: &RootedTreeModel, tau: &[f64]) -> (Vec<f64>, specmult_core::CMatrix) {
    linalg::hermitian_eigen(&h_tau(tree, tau).unwrap())
}

#[test]
fn recursion_matches_dense_examples() {
    let t = build_rooted_tree(3, 1).unwrap();
    let z = C64::new(0.0, 1.0);
    let a = tree_green_root(&t, &[1.0, 2.0, 3.0], z).unwrap();
    let b = dense_green_root(&t, &[1.0, 2.0, 3.0], z).unwrap();
    assert!((a - b).norm() <= 1e-10 * b.norm());
    // Star with leaves 1, 2, 3: 1/(-z - sum 1/(t - z)).
    let closed = (-z
        - [1.0, 2.0, 3.0]
            .iter()
            .map(|&t| (C64::new(t, 0.0) - z).inv())
            .sum::<C64>())
    .inv();
    assert!((a - closed).norm() < 1e-15);

    let t = build_rooted_tree(2, 2).unwrap();
    let z = C64::new(0.0, 2.0);
    let a = tree_green_root(&t, &[0.0; 4], z).unwrap();
    let b = dense_green_root(&t, &[0.0; 4], z).unwrap();
    assert!((a - b).norm() <= 1e-10 * b.norm());
}

#[test]
fn recursion_matches_dense_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for (k, l) in [(2, 1), (2, 3), (3, 2), (4, 2)] {
        let t = build_rooted_tree(k, l).unwrap();
        for i in 0..100 {
            let tau = sample_tau(&t, 42, i);
            let z = C64::new(rng.random_range(-3.0..3.0), rng.random_range(0.01..2.0));
            let a = tree_green_root(&t, &tau, z).unwrap();
            let b = dense_green_root(&t, &tau, z).unwrap();
            assert!((a - b).norm() <= 1e-10 * b.norm(), "K={k} L={l}");
        }
    }
}

#[test]
fn single_site_tree_green() {
    let t = build_rooted_tree(2, 0).unwrap();
    let z = C64::new(0.5, 0.25);
    let g = tree_green_root(&t, &[1.5], z).unwrap();
    assert!((g - (C64::new(1.5, 0.0) - z).inv()).norm() < 1e-15);
}

#[test]
fn boundary_length_is_checked() {
    let t = build_rooted_tree(3, 1).unwrap();
    assert!(matches!(
        h_tau(&t, &[0.0, 1.0]),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn star_spectrum_is_simple() {
    let t = build_rooted_tree(3, 1).unwrap();
    let s = check_simple(&t, &[1.0, 2.0, 3.0], DEFAULT_GAP_TOL).unwrap();
    assert!(s.simple && s.min_gap > 0.0);
}

#[test]
fn equal_leaves_give_symmetric_degeneracy() {
    // On the star with K equal leaves the K - 1 antisymmetric states share the leaf value.
    for k in [3, 4, 5] {
        let t = build_rooted_tree(k, 1).unwrap();
        let tau = vec![0.4; k];
        assert!(!check_simple(&t, &tau, DEFAULT_GAP_TOL).unwrap().simple);
        let (vals, _) = eigenpairs(&t, &tau);
        let at_leaf = vals.iter().filter(|v| (*v - 0.4).abs() < 1e-9).count();
        assert_eq!(at_leaf, k - 1);
    }
}

#[test]
fn random_boundary_values_give_simple_spectra() {
    let t = build_rooted_tree(3, 2).unwrap();
    let reports = simplicity_ensemble(&t, 1000, 7, tol()).unwrap();
    assert!(reports.iter().all(|r| r.simple));
}

#[test]
fn star_root_amplitudes() {
    let t = build_rooted_tree(3, 1).unwrap();
    let amp = check_root_nonvanishing(&t, &[1.0, 2.0, 3.0], tol()).unwrap();
    assert!(amp > 1e-9);
    assert!(matches!(
        check_root_nonvanishing(&t, &[1.0, 1.0, 1.0], tol()),
        Err(Error::DegenerateSpectrum { .. })
    ));
}

#[test]
fn antisymmetric_leaf_state_misses_the_root() {
    let t = build_rooted_tree(3, 1).unwrap();
    let tau = [0.3, 0.3, 0.9];
    let amp = check_root_nonvanishing(&t, &tau, tol()).unwrap();
    assert!(amp <= 1e-9);
    let (vals, vecs) = eigenpairs(&t, &tau);
    let i = vals.iter().position(|v| (v - 0.3).abs() < 1e-12).unwrap();
    let (a, b) = (t.boundary[0], t.boundary[1]);
    assert!((vecs[(a, i)] + vecs[(b, i)]).norm() < 1e-12);
    assert!(vecs[(0, i)].norm() < 1e-12);
}

#[test]
fn ensemble_root_amplitudes_positive() {
    let t = build_rooted_tree(2, 3).unwrap();
    let reports = simplicity_ensemble(&t, 200, 8, tol()).unwrap();
    let min = reports
        .iter()
        .map(|r| r.min_root_amplitude)
        .fold(f64::INFINITY, f64::min);
    assert!(min > 1e-9);
}

#[test]
fn sibling_separation_examples() {
    let t = build_rooted_tree(2, 1).unwrap();
    assert!((check_sibling_disjoint(&t, &[0.2, 0.9]).unwrap() - 0.7).abs() < 1e-15);
    let t = build_rooted_tree(2, 2).unwrap();
    assert_eq!(
        check_sibling_disjoint(&t, &[0.1, 0.5, 0.1, 0.5]).unwrap(),
        0.0
    );
    let t = build_rooted_tree(3, 2).unwrap();
    for i in 0..200 {
        assert!(check_sibling_disjoint(&t, &sample_tau(&t, 9, i)).unwrap() > 1e-9);
    }
}

#[test]
fn pole_counts() {
    let t = build_rooted_tree(3, 1).unwrap();
    assert_eq!(count_poles(&t, &[1.0, 2.0, 3.0], tol()).unwrap(), (4, 4));
    let (poles, expected) = count_poles(&t, &[1.0, 1.0, 1.0], tol()).unwrap();
    assert!(poles < expected);
    let t = build_rooted_tree(2, 3).unwrap();
    assert_eq!(
        count_poles(&t, &sample_tau(&t, 10, 0), tol()).unwrap(),
        (15, 15)
    );
}

#[test]
fn pole_count_follows_root_check_on_faint_roots() {
    // Root amplitude 2.2e-5 clears the amplitude check while its residue is below 1e-9.
    let t = build_rooted_tree(3, 2).unwrap();
    let tau = sample_tau(&t, 0, 10);
    let r = simplicity_report(&t, &tau, tol()).unwrap();
    assert!(r.min_root_amplitude < 1e-4 && r.min_root_amplitude * r.min_root_amplitude < 1e-9);
    assert!(r.verdict);
    assert_eq!(r.pole_count, 13);
    for s in 0..300 {
        let r = simplicity_report(&t, &sample_tau(&t, 7, s), tol()).unwrap();
        if r.simple && r.root_nonvanishing && r.siblings_disjoint {
            assert_eq!(r.pole_count, r.expected_pole_count, "sample {s}");
        }
    }
}

#[test]
fn true_eigenpairs_have_boundary_witnesses() {
    let t = build_rooted_tree(3, 2).unwrap();
    let tau = sample_tau(&t, 11, 0);
    let (vals, vecs) = eigenpairs(&t, &tau);
    assert_eq!(vals.len(), 13);
    for (i, &val) in vals.iter().enumerate() {
        let psi: CVector = vecs.column(i).into_owned();
        match zero_boundary_propagation(&t, &tau, &psi, val, DEFAULT_AMP_TOL).unwrap() {
            PropagationVerdict::Witness { site, amplitude } => {
                assert!(t.boundary.contains(&site));
                assert!(amplitude > DEFAULT_AMP_TOL);
            }
            PropagationVerdict::Contradiction => panic!("eigenpair {i} vanished on the boundary"),
        }
    }
}

#[test]
fn zero_boundary_data_forces_zero() {
    let t = build_rooted_tree(2, 3).unwrap();
    let tau = sample_tau(&t, 12, 0);
    let psi = eliminate_from_boundary(&t, &tau, 0.123, &[C64::new(0.0, 0.0); 8]).unwrap();
    assert!(psi.iter().all(|v| v.norm() == 0.0));
    // Non-zero data reproduces the eigenvector from its boundary values.
    let (vals, vecs) = eigenpairs(&t, &tau);
    let data: Vec<C64> = t.boundary.iter().map(|&x| vecs[(x, 3)]).collect();
    let rebuilt = eliminate_from_boundary(&t, &tau, vals[3], &data).unwrap();
    for (v, r) in vecs.column(3).iter().zip(&rebuilt) {
        assert!((v - r).norm() < 1e-9);
    }
}

#[test]
fn propagation_rejects_non_eigenpairs() {
    let t = build_rooted_tree(2, 1).unwrap();
    let psi = CVector::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
    ]);
    assert!(matches!(
        zero_boundary_propagation(&t, &[0.1, 0.2], &psi, 0.0, DEFAULT_AMP_TOL),
        Err(Error::NotEigenpair { .. })
    ));
}

#[test]
fn feynman_hellmann_single_site() {
    let t = build_rooted_tree(2, 0).unwrap();
    let r = feynman_hellmann_check(&t, &[0.7], 0, 1e-4, DEFAULT_GAP_TOL).unwrap();
    assert!(r.max_residual < 1e-10);
}

#[test]
fn feynman_hellmann_star() {
    let t = build_rooted_tree(3, 1).unwrap();
    for &x in &t.boundary {
        let r = feynman_hellmann_check(&t, &[1.0, 2.0, 3.0], x, 1e-4, DEFAULT_GAP_TOL).unwrap();
        assert!(r.max_residual <= 1e-6, "{r:?}");
        assert!((r.amplitude_sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn derivative_sum_rule() {
    // Sum over boundary sites of dE_i/dt_x is the boundary mass of psi_i, at most 1.
    let t = build_rooted_tree(2, 2).unwrap();
    let tau = sample_tau(&t, 13, 0);
    let (_, vecs) = eigenpairs(&t, &tau);
    let n = t.vertex_count();
    let mut sums = vec![0.0; n];
    for &x in &t.boundary {
        let r = feynman_hellmann_check(&t, &tau, x, 1e-5, DEFAULT_GAP_TOL).unwrap();
        for i in 0..n {
            sums[i] += vecs[(x, i)].norm_sqr();
        }
        assert!(r.max_residual <= 1e-6);
    }
    assert!(sums.iter().all(|&s| s <= 1.0 + 1e-12));
    assert!(
        sums.iter().all(|&s| s < 1.0 - 1e-6),
        "interior sites carry mass"
    );
}

#[test]
fn feynman_hellmann_step_guard() {
    let t = build_rooted_tree(3, 1).unwrap();
    assert!(
        feynman_hellmann_check(&t, &[1.0, 2.0, 3.0], t.boundary[0], 1.0, DEFAULT_GAP_TOL).is_err()
    );
    assert!(feynman_hellmann_check(&t, &[1.0, 2.0, 3.0], 0, 1e-4, DEFAULT_GAP_TOL).is_err());
}

#[test]
fn feynman_hellmann_second_order() {
    let t = build_rooted_tree(3, 2).unwrap();
    let tau = sample_tau(&t, 14, 0);
    let (ratio, coarse, _) =
        feynman_hellmann_order(&t, &tau, t.boundary[4], 1e-3, DEFAULT_GAP_TOL).unwrap();
    assert!(coarse.max_residual > 1e-9);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn feynman_hellmann_truncation_estimate_bounds_residuals() {
    let t = build_rooted_tree(3, 2).unwrap();
    let mut checked = 0;
    for s in 0..200 {
        let tau = sample_tau(&t, 3, s);
        let site = t.boundary[s as usize % t.boundary.len()];
        let Ok(r) = feynman_hellmann_check(&t, &tau, site, 1e-4, 1e-9) else {
            continue;
        };
        checked += 1;
        assert!(r.within_bound, "sample {s}");
        for (res, est) in r.residuals.iter().zip(&r.error_estimates) {
            // The estimate tracks the actual truncation error once it dominates roundoff.
            if *res > 1e-7 {
                assert!(
                    *est > 0.25 * res && *est < 4.0 * res,
                    "sample {s}: {res:e} vs {est:e}"
                );
            }
        }
    }
    assert!(checked > 150);
}

#[test]
fn exceptional_witnesses_fail_predicted_checks() {
    for (k, l) in [(2, 1), (2, 2), (3, 1), (3, 2)] {
        let t = build_rooted_tree(k, l).unwrap();
        let n_leaf = t.boundary.len();
        let r = simplicity_report(&t, &vec![0.5; n_leaf], tol()).unwrap();
        assert!(
            !r.root_nonvanishing && !r.siblings_disjoint && !r.poles_match,
            "K={k} L={l}"
        );
        assert_eq!(!r.simple, k >= 3 || l >= 2, "K={k} L={l}");

        // Two leaves under one parent share a value; the rest are generic.
        let mut tau = sample_tau(&t, 15, 0);
        tau[1] = tau[0];
        let r = simplicity_report(&t, &tau, tol()).unwrap();
        assert!(
            r.simple && !r.root_nonvanishing && !r.poles_match,
            "K={k} L={l}"
        );
        assert_eq!(!r.siblings_disjoint, l == 1, "K={k} L={l}");
    }
}

#[test]
fn independent_draws_have_disjoint_spectra() {
    let t = build_rooted_tree(3, 2).unwrap();
    for i in 0..200 {
        let d =
            cross_spectrum_distance(&t, &sample_tau(&t, 16, i), &sample_tau(&t, 17, i)).unwrap();
        assert!(d > 0.0);
    }
}

#[test]
fn canopy_root_block() {
    let (base, layout) = build_canopy_bethe(3, 3, 2).unwrap();
    let omega: Vec<f64> = (0..base.blocks.len())
        .map(|i| (i as f64 * 0.37).sin())
        .collect();
    let inst = base.assemble(&omega).unwrap();
    let rep = canopy_boundary_check(&inst, &layout, 0, C64::new(0.3, 0.4)).unwrap();
    assert!(
        rep.diagonal && rep.cross_zero && rep.fraction_match,
        "{rep:?}"
    );
    assert_eq!(rep.cross_max, 0.0);
}

#[test]
fn canopy_deepest_block_has_no_forward_coupling() {
    let (base, layout) = build_canopy_bethe(3, 3, 2).unwrap();
    let omega = vec![0.2; base.blocks.len()];
    let inst = base.assemble(&omega).unwrap();
    let deepest = base.blocks.len() - 1;
    assert!(layout.forward_pairs(deepest).is_empty());
    let rep = canopy_boundary_check(&inst, &layout, deepest, C64::new(-0.1, 0.8)).unwrap();
    assert_eq!(rep.forward_coupling_max, 0.0);
    assert_eq!(rep.boundary_pairs.len(), 1);
    assert!(rep.pass, "{rep:?}");

    let (single, layout) = build_canopy_bethe(3, 1, 2).unwrap();
    let inst = single.assemble(&[0.4]).unwrap();
    let rep = canopy_boundary_check(&inst, &layout, 0, C64::new(0.0, 1.0)).unwrap();
    assert!(rep.boundary_pairs.is_empty());
    assert_eq!(rep.fraction_max_diff, 0.0);
    assert!(rep.pass);
}

#[test]
fn canopy_every_block() {
    let (base, layout) = build_canopy_bethe(3, 5, 3).unwrap();
    let omega: Vec<f64> = (0..base.blocks.len())
        .map(|i| (i as f64 * 1.1).cos())
        .collect();
    let inst = base.assemble(&omega).unwrap();
    for n in 0..base.blocks.len() {
        let rep = canopy_boundary_check(&inst, &layout, n, C64::new(0.5, 0.3)).unwrap();
        assert!(rep.pass, "block {n}: {rep:?}");
    }
}
