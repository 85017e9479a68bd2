use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::{CMatrix, CVector, C64};

use super::{decompose_matrix, SpectralDecomposition};

/// Spectral components below this fraction of the generator norm count as absent.
pub const CYCLIC_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicSubspace {
    pub generators: CMatrix,
    pub basis: CMatrix,
    /// Dimension contributed by each atom.
    pub atom_dims: Vec<usize>,
    /// `||(I - P) H P||`.
    pub invariance_residual: f64,
    /// `||(I - P) Phi|| / ||Phi||`.
    pub containment_residual: f64,
    /// Projector distance to the sum of the single-generator subspaces.
    pub sum_identity_defect: f64,
}

fn column_scale(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|k| m.column(k).norm())
        .fold(0.0, f64::max)
}

/// Per-atom orthonormal basis of `span{Pi_j phi}`, in full coordinates.
fn atom_parts(decomp: &SpectralDecomposition, gens: &CMatrix, floor: f64) -> Vec<CMatrix> {
    (0..decomp.atom_count())
        .map(|j| {
            let v = decomp.cluster_vectors(j);
            let coeffs = v.adjoint() * gens;
            &v * linalg::orthonormal_basis(&coeffs, 0.0, floor)
        })
        .collect()
}

fn hstack(parts: &[CMatrix], rows: usize) -> CMatrix {
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut k = 0;
    for p in parts {
        out.columns_mut(k, p.ncols()).copy_from(p);
        k += p.ncols();
    }
    out
}

/// Orthonormal basis of `sum_j span{Pi_j phi : phi a generator}`.
pub fn cyclic_subspace(
    h: &CMatrix,
    decomp: &SpectralDecomposition,
    generators: &CMatrix,
) -> Result<CyclicSubspace> {
    let dim = h.nrows();
    if generators.nrows() != dim {
        return Err(Error::DimensionMismatch("generator length".into()));
    }
    if generators.ncols() == 0
        || (0..generators.ncols()).any(|k| generators.column(k).norm() == 0.0)
    {
        return Err(Error::pre("generators must be non-zero"));
    }
    let scale = column_scale(generators);
    let floor = CYCLIC_TOL * scale;
    let parts = atom_parts(decomp, generators, floor);
    let atom_dims = parts.iter().map(|p| p.ncols()).collect();
    let basis = hstack(&parts, dim);
    let p = linalg::projector(&basis);
    let id = CMatrix::identity(dim, dim);
    let invariance_residual = ((&id - &p) * h * &p).norm();
    let containment_residual = ((&id - &p) * generators).norm() / generators.norm();

    let singles: Vec<CMatrix> = (0..generators.ncols())
        .map(|k| {
            let g = generators.columns(k, 1).into_owned();
            hstack(&atom_parts(decomp, &g, CYCLIC_TOL * g.norm()), dim)
        })
        .collect();
    let sum_basis = linalg::orthonormal_basis(&hstack(&singles, dim), CYCLIC_TOL, 0.0);
    let sum_identity_defect = linalg::op_norm(&(&p - linalg::projector(&sum_basis)));

    Ok(CyclicSubspace {
        generators: generators.clone(),
        basis,
        atom_dims,
        invariance_residual,
        containment_residual,
        sum_identity_defect,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicProjection {
    pub output: CVector,
    /// `(E_j, f(E_j))` at atoms where `phi` has weight.
    pub f_values: Vec<(f64, C64)>,
    /// `||output - P psi||` with `P` the projector onto the cyclic subspace of `phi`.
    pub oracle_difference: f64,
}

/// `f(H) phi` with `f(E_j) = <phi, Pi_j psi> / <phi, Pi_j phi>`.
pub fn cyclic_projection(
    h: &CMatrix,
    decomp: &SpectralDecomposition,
    phi: &CVector,
    psi: &CVector,
) -> Result<CyclicProjection> {
    let dim = h.nrows();
    if phi.len() != dim || psi.len() != dim {
        return Err(Error::DimensionMismatch("vector length".into()));
    }
    if phi.norm() == 0.0 {
        return Err(Error::pre("phi must be non-zero"));
    }
    let floor = CYCLIC_TOL * phi.norm();
    let mut output = CVector::zeros(dim);
    let mut f_values = Vec::new();
    for j in 0..decomp.atom_count() {
        let v = decomp.cluster_vectors(j);
        let a = v.adjoint() * phi;
        if a.norm() <= floor {
            continue;
        }
        let b = v.adjoint() * psi;
        let f = a.dotc(&b) / c(a.norm_squared());
        output += &v * (a * f);
        f_values.push((decomp.atom_energy(j), f));
    }
    let gens = CMatrix::from_column_slice(dim, 1, phi.as_slice());
    let sub = cyclic_subspace(h, decomp, &gens)?;
    let oracle = &sub.basis * (sub.basis.adjoint() * psi);
    Ok(CyclicProjection {
        oracle_difference: (&output - oracle).norm(),
        output,
        f_values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionVerdict {
    pub lambda: f64,
    /// Largest principal sine of the `Q` part against the `P_1` part over atoms with `P_1` weight.
    pub max_sine: f64,
    pub verdict: bool,
    /// Atoms where `Q` has weight but `P_1` has none.
    pub zero_weight_atoms: Vec<f64>,
}

/// Atom-wise inclusion of `cyclic(Q)` in `cyclic(P_1)` for `H + lambda C_1`.
pub fn singular_inclusion_check(
    h: &CMatrix,
    c1: &CMatrix,
    q: &CMatrix,
    lambdas: &[f64],
    cluster_tol: f64,
    tol: f64,
) -> Result<Vec<InclusionVerdict>> {
    let dim = h.nrows();
    if c1.shape() != (dim, dim) || q.nrows() != dim {
        return Err(Error::DimensionMismatch("inclusion check inputs".into()));
    }
    if linalg::hermitian_eigenvalues(c1)
        .first()
        .is_some_and(|&m| m < -1e-12 * linalg::op_norm(c1))
    {
        return Err(Error::pre("C_1 must be positive semi-definite"));
    }
    let p1 = linalg::orthonormal_basis(c1, 1e-10, 0.0);
    let qb = linalg::orthonormal_basis(q, 1e-10, 0.0);
    Ok(lambdas
        .par_iter()
        .map(|&lambda| {
            let hl = h + c1 * c(lambda);
            let d = decompose_matrix(&hl, cluster_tol);
            let mut max_sine = 0.0f64;
            let mut zero_weight_atoms = Vec::new();
            for j in 0..d.atom_count() {
                let v = d.cluster_vectors(j);
                let q_part = linalg::orthonormal_basis(&(v.adjoint() * &qb), 0.0, CYCLIC_TOL);
                if q_part.ncols() == 0 {
                    continue;
                }
                let p_part = linalg::orthonormal_basis(&(v.adjoint() * &p1), 0.0, CYCLIC_TOL);
                if p_part.ncols() == 0 {
                    zero_weight_atoms.push(d.atom_energy(j));
                    continue;
                }
                max_sine = max_sine.max(linalg::max_principal_sine(&q_part, &p_part));
            }
            InclusionVerdict {
                lambda,
                max_sine,
                verdict: max_sine <= tol,
                zero_weight_atoms,
            }
        })
        .collect())
}
