mod common;

use common::{c, instance, uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specmult_core::greens_function::{green_block, GreenBlock};
use specmult_core::multiplicity::*;
use specmult_core::operator_model::*;
use specmult_core::{CMatrix, Error, C64};

fn green(matrix: CMatrix) -> GreenBlock {
    GreenBlock {
        z: C64::new(0.0, 1.0),
        n: 0,
        m: 0,
        matrix,
        residual: 0.0,
    }
}

fn single_block(a: HermitianOperator, w: f64) -> ModelInstance {
    let dim = a.dim();
    BaseModel::new(
        SiteSpace::indexed(dim),
        a,
        vec![PerturbationBlock::projection(0, (0..dim).collect())],
    )
    .unwrap()
    .assemble(&[w])
    .unwrap()
}

fn onsite_path(len: usize) -> BaseModel {
    let edges: Vec<(usize, usize, f64)> = (1..len).map(|i| (i - 1, i, 1.0)).collect();
    BaseModel::new(
        SiteSpace::indexed(len),
        HermitianOperator::from_edges(len, &edges),
        (0..len)
            .map(|i| PerturbationBlock::projection(i, vec![i]))
            .collect(),
    )
    .unwrap()
}

fn re(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| c(x)).collect()
}

#[test]
fn char_poly_of_diagonal_block() {
    let block = PerturbationBlock::projection(0, vec![0, 1]);
    let (a, b) = (C64::new(0.3, 0.1), C64::new(-0.7, 0.4));
    let g = green(CMatrix::from_row_slice(2, 2, &[a, c(0.0), c(0.0), b]));
    let p = char_poly(&block, &g).unwrap();
    let expected = [a * b, -(a + b), c(1.0)];
    for (x, y) in p.coeffs.iter().zip(expected) {
        assert!((x - y).norm() < 1e-14);
    }
    assert!(p.similarity_defect.unwrap() <= 1e-8);
}

#[test]
fn scalar_green_gives_double_root() {
    let w = 0.5;
    let inst = single_block(HermitianOperator::zeros(2), w);
    let z = C64::new(0.1, 0.9);
    let g = green_block(&inst, 0, 0, z).unwrap();
    let p = char_poly(&inst.blocks[0], &g).unwrap();
    let root = (c(w) - z).inv();
    let expected = [root * root, -root * c(2.0), c(1.0)];
    for (x, y) in p.coeffs.iter().zip(expected) {
        assert!((x - y).norm() < 1e-14);
    }
    assert_eq!(mult_by_clustering(&p, DEFAULT_CLUSTER_TOL).unwrap().k, 2);
}

#[test]
fn strip_char_poly_against_cofactors() {
    let base = build_strip(3, 2).unwrap();
    let inst = instance(&base, 31, 0);
    let g = green_block(&inst, 1, 1, C64::new(0.2, 0.5)).unwrap();
    let p = char_poly(&inst.blocks[1], &g).unwrap();
    let m = inst.blocks[1].c_in_basis() * &g.matrix;
    // det [[a - x, b], [c, d - x]] = x^2 - (a + d) x + (a d - b c).
    let (a, b, cc, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let expected = [a * d - b * cc, -(a + d), c(1.0)];
    for (x, y) in p.coeffs.iter().zip(expected) {
        assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
    }
}

#[test]
fn clustering_examples() {
    // (x - 1)^2 (x - 2), expanded.
    let p = CharPoly::from_coeffs(re(&[-2.0, 5.0, -4.0, 1.0]));
    assert_eq!(mult_by_clustering(&p, 1e-8).unwrap().k, 2);
    let tol = 1e-8;
    let apart = CharPoly::from_roots(&re(&[1.0, 1.0 + 10.0 * tol, 5.0]));
    assert_eq!(mult_by_clustering(&apart, tol).unwrap().k, 1);
    let merged = CharPoly::from_roots(&re(&[1.0, 1.0 + tol / 2.0, 5.0]));
    assert_eq!(mult_by_clustering(&merged, tol).unwrap().k, 2);
}

#[test]
fn gcd_examples() {
    let cube = CharPoly::from_roots(&re(&[1.0, 1.0, 1.0]));
    let (est, chain) =
        mult_by_gcd(&CharPoly::from_coeffs(cube.coeffs.clone()), DEFAULT_GCD_TOL).unwrap();
    assert_eq!(est.k, 3);
    assert_eq!(chain.degrees, vec![3, 2, 1, 0]);
    assert!(chain.certified);
    let simple = CharPoly::from_coeffs(CharPoly::from_roots(&re(&[0.0, 1.0, 2.0])).coeffs);
    let (est, chain) = mult_by_gcd(&simple, DEFAULT_GCD_TOL).unwrap();
    assert_eq!(est.k, 1);
    assert_eq!(chain.degrees[1], 0);
}

#[test]
fn gcd_agrees_with_clustering_on_strips() {
    let base = build_strip(4, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in 0..20 {
        let inst = instance(&base, 32, s);
        let z = C64::new(rng.random_range(-2.0..2.0), rng.random_range(0.05..2.0));
        let n = rng.random_range(0..4);
        let g = green_block(&inst, n, n, z).unwrap();
        let p = CharPoly::from_coeffs(char_poly(&inst.blocks[n], &g).unwrap().coeffs);
        let k_cluster = mult_by_clustering(&p, DEFAULT_CLUSTER_TOL).unwrap().k;
        let (est, _) = mult_by_gcd(&p, DEFAULT_GCD_TOL).unwrap();
        assert_eq!(k_cluster, 3);
        if est.certified {
            assert_eq!(est.k, k_cluster);
        }
    }
}

#[test]
fn exact_dimer_at_three() {
    // (A - 3)^{-1} = (A + 3)/(1 - 9) = -(1/8)[[3, 1], [1, 3]], eigenvalues -1/2 and -1/4.
    let a = HermitianOperator::from_edges(2, &[(0, 1, 1.0)]);
    let blocks = vec![PerturbationBlock::projection(0, vec![0, 1])];
    let omega = vec![rational_from_f64(0.0).unwrap()];
    let est =
        mult_exact_rational(&a, &blocks, &omega, &rational_from_f64(3.0).unwrap(), 0).unwrap();
    assert_eq!(est.k, 1);
    assert!(est.certified);
    assert_eq!(est.witnesses, Witness::Exponents(vec![2]));
}

#[test]
fn exact_scalar_model_has_full_multiplicity() {
    let a = HermitianOperator::zeros(3);
    let blocks = vec![PerturbationBlock::projection(0, vec![0, 1, 2])];
    let omega = vec![rational_from_f64(0.25).unwrap()];
    let est =
        mult_exact_rational(&a, &blocks, &omega, &rational_from_f64(-1.5).unwrap(), 0).unwrap();
    assert_eq!(est.k, 3);
    let spectral = mult_exact_rational(&a, &blocks, &omega, &rational_from_f64(0.25).unwrap(), 0);
    assert!(matches!(spectral, Err(Error::SpectralPoint(_))));
}

#[test]
fn exact_strip_fiber_degeneracy() {
    let base = build_strip(3, 2).unwrap();
    let omega: Vec<_> = [0.5, -0.25, 0.75]
        .iter()
        .map(|&w| rational_from_f64(w).unwrap())
        .collect();
    for n in 0..3 {
        let est = mult_exact_rational(
            &base.operator,
            &base.blocks,
            &omega,
            &rational_from_f64(-10.0).unwrap(),
            n,
        )
        .unwrap();
        assert_eq!(est.k, 2);
    }
}

#[test]
fn sampled_m_n_for_strip_and_onsite() {
    let base = build_strip(4, 2).unwrap();
    let rep = estimate_m_n(
        &base,
        &uniform(-1.0, 1.0, 5),
        10,
        8,
        &[],
        1,
        DEFAULT_CLUSTER_TOL,
    )
    .unwrap();
    assert!(rep.constant);
    assert_eq!(rep.m_n, Some(2));
    assert!(rep.exceptions.is_empty());

    let path = onsite_path(6);
    let rep = estimate_m_n(
        &path,
        &uniform(-1.0, 1.0, 6),
        10,
        8,
        &[],
        3,
        DEFAULT_CLUSTER_TOL,
    )
    .unwrap();
    assert_eq!(rep.m_n, Some(1));
    assert!(estimate_m_n(
        &path,
        &uniform(-1.0, 1.0, 6),
        0,
        8,
        &[],
        3,
        DEFAULT_CLUSTER_TOL
    )
    .is_err());
}

#[test]
fn nested_blocks_follow_row_classes() {
    // Row classes {1}, {2,3}, {4..7}; each block sees its largest class.
    let base = build_nested_model(3).unwrap();
    let expected = [1, 2, 4, 2, 4, 4];
    for (n, &k) in expected.iter().enumerate() {
        let rep = estimate_m_n(
            &base,
            &uniform(-1.0, 1.0, 7),
            5,
            6,
            &[],
            n,
            DEFAULT_CLUSTER_TOL,
        )
        .unwrap();
        assert_eq!(rep.m_n, Some(k), "block {n}");
    }
}

#[test]
fn corollary_bounds() {
    let shell = build_shell_model(2, 3).unwrap();
    let inst = shell.assemble(&vec![0.0; shell.blocks.len()]).unwrap();
    for n in 0..inst.blocks.len() {
        assert!(corollary_bound(&inst, n).unwrap() <= 2);
    }

    let cm = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(2.0), c(3.0)]));
    let block = PerturbationBlock::new(0, vec![0, 1, 2], cm).unwrap();
    let a = HermitianOperator::from_edges(3, &[(0, 1, 1.0)]);
    let inst = BaseModel::new(SiteSpace::indexed(3), a, vec![block])
        .unwrap()
        .assemble(&[0.1])
        .unwrap();
    assert_eq!(corollary_bound(&inst, 0).unwrap(), 1);

    let inst = single_block(HermitianOperator::zeros(4), 0.3);
    assert_eq!(corollary_bound(&inst, 0).unwrap(), 4);
}

#[test]
fn degeneracy_examples() {
    let base = build_strip(5, 3).unwrap();
    assert_eq!(
        global_degeneracy(&instance(&base, 33, 0), DEFAULT_CLUSTER_TOL),
        3
    );
    let clean = base.assemble(&[0.0; 5]).unwrap();
    assert_eq!(global_degeneracy(&clean, DEFAULT_CLUSTER_TOL), 3);
    let path = onsite_path(8);
    assert_eq!(
        global_degeneracy(&instance(&path, 34, 0), DEFAULT_CLUSTER_TOL),
        1
    );
}

#[test]
fn real_energy_multiplicity() {
    let base = build_strip(4, 3).unwrap();
    let inst = instance(&base, 35, 0);
    assert_eq!(
        real_e_mult(&inst, 2, -10.0, DEFAULT_CLUSTER_TOL).unwrap().k,
        3
    );
    let path = onsite_path(5);
    assert_eq!(
        real_e_mult(&instance(&path, 36, 0), 2, -10.0, DEFAULT_CLUSTER_TOL)
            .unwrap()
            .k,
        1
    );
    let inst = single_block(HermitianOperator::zeros(3), 0.2);
    assert_eq!(
        real_e_mult(&inst, 0, 1.7, DEFAULT_CLUSTER_TOL).unwrap().k,
        3
    );
    assert!(matches!(
        real_e_mult(&inst, 0, 0.2, DEFAULT_CLUSTER_TOL),
        Err(Error::TooCloseToSpectrum { .. })
    ));
}

#[test]
fn real_energy_multiplicity_ignores_own_disorder() {
    let base = build_shell_model(2, 2).unwrap();
    let inst = instance(&base, 37, 0);
    let reference = real_e_mult(&inst, 1, -12.0, DEFAULT_CLUSTER_TOL).unwrap().k;
    for i in 0..10 {
        let mut omega = inst.omega.clone();
        omega[1] = -1.0 + 0.2 * i as f64;
        let k = real_e_mult(
            &inst.with_omega(&omega).unwrap(),
            1,
            -12.0,
            DEFAULT_CLUSTER_TOL,
        )
        .unwrap()
        .k;
        assert_eq!(k, reference);
    }
}

#[test]
fn z_constancy_and_bound_chain() {
    let models = [
        build_strip(4, 2).unwrap(),
        build_shell_model(2, 2).unwrap(),
        build_canopy_bethe(3, 3, 2).unwrap().0,
    ];
    for base in &models {
        let mut sup = 0;
        for n in 0..base.blocks.len() {
            let rep = estimate_m_n(
                base,
                &uniform(-1.0, 1.0, 8),
                3,
                50,
                &[],
                n,
                DEFAULT_CLUSTER_TOL,
            )
            .unwrap();
            assert!(rep.exceptions.is_empty(), "{:?}", rep.exceptions);
            sup = sup.max(rep.per_sample.iter().copied().max().unwrap());
        }
        for s in 0..3 {
            let omega = sample_disorder_at(&uniform(-1.0, 1.0, 8), base.blocks.len(), s).unwrap();
            let inst = base.assemble(&omega).unwrap();
            assert!(global_degeneracy(&inst, DEFAULT_CLUSTER_TOL) <= sup);
        }
    }
}

#[test]
fn corollary_dominates_sampled_multiplicity_far_below_spectrum() {
    let base = build_shell_model(2, 2).unwrap();
    for s in 0..5 {
        let inst = instance(&base, 38, s);
        let a_norm = inst.a.matrix().norm();
        let margin = 3.0 * (a_norm + 1.0);
        let e = inst.spectrum()[0] - margin;
        for n in 0..inst.blocks.len() {
            let k = real_e_mult(&inst, n, e, DEFAULT_CLUSTER_TOL).unwrap().k;
            assert!(corollary_bound(&inst, n).unwrap() >= k);
        }
    }
}
