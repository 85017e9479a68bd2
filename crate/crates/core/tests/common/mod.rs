#![allow(dead_code)]

use specmult_core::operator_model::{
    build_canopy_bethe, build_nested_model, build_shell_model, build_strip, sample_disorder_at,
    BaseModel, DisorderSpec, Distribution, HermitianOperator, ModelInstance, PerturbationBlock,
    SiteSpace,
};
use specmult_core::{CMatrix, C64};

pub fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn uniform(a: f64, b: f64, seed: u64) -> DisorderSpec {
    DisorderSpec::iid(Distribution::Uniform { a, b }, seed)
}

pub fn instance(base: &BaseModel, seed: u64, index: u64) -> ModelInstance {
    let omega = sample_disorder_at(&uniform(-1.0, 1.0, seed), base.blocks.len(), index).unwrap();
    base.assemble(&omega).unwrap()
}

/// One small base model per builder.
pub fn builders() -> Vec<(&'static str, BaseModel)> {
    vec![
        ("strip", build_strip(4, 2).unwrap()),
        ("shell1", build_shell_model(1, 3).unwrap()),
        ("shell2", build_shell_model(2, 2).unwrap()),
        ("nested", build_nested_model(3).unwrap()),
        ("canopy", build_canopy_bethe(3, 3, 2).unwrap().0),
    ]
}

pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

/// Symmetric `U(-1, 1)` background with a projection block on the first `rank`
/// sites and singleton blocks elsewhere, at disorder `omega_n = 0`.
pub fn random_model(dim: usize, rank: usize, seed: u64) -> ModelInstance {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut h = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = c(rng.random_range(-1.0..1.0));
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let mut blocks = vec![PerturbationBlock::projection(0, (0..rank).collect())];
    for (k, s) in (rank..dim).enumerate() {
        blocks.push(PerturbationBlock::projection(k + 1, vec![s]));
    }
    let base = BaseModel::new(
        SiteSpace::indexed(dim),
        HermitianOperator::from_matrix(h).unwrap(),
        blocks,
    )
    .unwrap();
    let n = base.blocks.len();
    base.assemble(&vec![0.0; n]).unwrap()
}
