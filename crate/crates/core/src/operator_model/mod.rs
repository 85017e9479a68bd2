//! Finite-volume Anderson-type operators `A + sum_n omega_n C_n`.
//!
//! A [`BaseModel`] holds the background operator and its perturbation blocks;
//! [`assemble`] adds one disorder realisation and yields an immutable
//! [`ModelInstance`].

mod builders;
mod disorder;
mod document;

pub use builders::{
    build_canopy_bethe, build_nested_model, build_nested_model_capped, build_random_dense,
    build_rooted_tree, build_rooted_tree_capped, build_shell_model, build_strip, build_strip_with,
    nested_block_rows, CanopyLayout, RootedTreeModel, DEFAULT_SIZE_CAP,
};
pub use disorder::{sample_disorder, sample_disorder_at, DisorderSpec, Distribution};
pub use document::{load_model, BlockDocument, DisorderDocument, ModelDocument};

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::{CMatrix, C64};

/// Ordered, pairwise distinct site labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteSpace {
    labels: Vec<String>,
}

impl SiteSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::pre("site space must be non-empty"));
        }
        let mut seen = std::collections::HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::pre(format!("duplicate site label {l:?}")));
            }
        }
        Ok(SiteSpace { labels })
    }

    /// Sites labelled `0..dim`.
    pub fn indexed(dim: usize) -> Self {
        SiteSpace {
            labels: (0..dim).map(|i| i.to_string()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Dense Hermitian matrix; Hermiticity is exact, never up to tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if let Some((row, col)) = linalg::is_exactly_hermitian(&matrix) {
            return Err(Error::NotHermitian { row, col });
        }
        Ok(HermitianOperator { matrix })
    }

    /// Real symmetric operator from a list of weighted undirected edges.
    pub fn from_edges(dim: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        for &(i, j, w) in edges {
            m[(i, j)] += c(w);
            if i != j {
                m[(j, i)] += c(w);
            }
        }
        HermitianOperator { matrix: m }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|v| v.im == 0.0)
    }
}

/// Eigenvalue threshold (relative to the block norm) below which a direction
/// of `C` is treated as outside its range.
pub const RANK_TOL: f64 = 1e-10;

/// A non-negative finite-rank perturbation `C_n` living on `support`.
///
/// The block basis is fixed once: eigenvectors of `C` on its range in
/// descending eigenvalue order, first significant component real positive.
/// When `C` is diagonal the basis is the site basis of the support, ordered
/// by descending diagonal value.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationBlock {
    pub index: usize,
    support: Vec<usize>,
    c: CMatrix,
    basis: CMatrix,
    strengths: Vec<f64>,
}

impl PerturbationBlock {
    pub fn new(index: usize, support: Vec<usize>, c_mat: CMatrix) -> Result<Self> {
        let r = support.len();
        if r == 0 {
            return Err(Error::pre(format!("block {index} has empty support")));
        }
        if c_mat.nrows() != r || c_mat.ncols() != r {
            return Err(Error::DimensionMismatch(format!(
                "block {index}: C is {}x{} but support has {r} sites",
                c_mat.nrows(),
                c_mat.ncols()
            )));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::pre(format!(
                "block {index} has a repeated support site"
            )));
        }
        if let Some((row, col)) = linalg::is_exactly_hermitian(&c_mat) {
            return Err(Error::NotHermitian { row, col });
        }
        let is_diagonal =
            (0..r).all(|i| (0..r).all(|j| i == j || c_mat[(i, j)] == C64::new(0.0, 0.0)));
        let (values, vectors) = if is_diagonal {
            let mut order: Vec<usize> = (0..r).collect();
            order.sort_by(|&a, &b| c_mat[(b, b)].re.total_cmp(&c_mat[(a, a)].re));
            let values: Vec<f64> = order.iter().map(|&i| c_mat[(i, i)].re).collect();
            let mut vectors = CMatrix::zeros(r, r);
            for (k, &i) in order.iter().enumerate() {
                vectors[(i, k)] = c(1.0);
            }
            (values, vectors)
        } else {
            let (vals, vecs) = linalg::hermitian_eigen(&c_mat);
            let order: Vec<usize> = (0..r).rev().collect();
            let values = order.iter().map(|&i| vals[i]).collect();
            let mut vectors = CMatrix::zeros(r, r);
            for (k, &i) in order.iter().enumerate() {
                vectors.set_column(k, &vecs.column(i));
            }
            (values, vectors)
        };
        let norm = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let min_eig = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-12 * norm {
            return Err(Error::NotPositive { index, min_eig });
        }
        let cut = RANK_TOL * norm;
        let rank = values.iter().filter(|&&v| v > cut).count();
        if rank == 0 {
            return Err(Error::pre(format!("block {index} has rank zero")));
        }
        let basis = vectors.columns(0, rank).into_owned();
        let strengths = values[..rank].to_vec();
        Ok(PerturbationBlock {
            index,
            support,
            c: c_mat,
            basis,
            strengths,
        })
    }

    /// Orthogonal projection onto the given sites (`C = I` on the support).
    pub fn projection(index: usize, support: Vec<usize>) -> Self {
        let r = support.len();
        Self::new(index, support, CMatrix::identity(r, r)).expect("identity block is valid")
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `C` in support coordinates.
    pub fn c(&self) -> &CMatrix {
        &self.c
    }

    pub fn rank(&self) -> usize {
        self.strengths.len()
    }

    /// Eigenvalues of `C` on its range, descending; `C` is diagonal in the block basis.
    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    /// `C` expressed in the block basis.
    pub fn c_in_basis(&self) -> CMatrix {
        linalg::diag(&self.strengths)
    }

    /// Block basis in support coordinates (`|support| x rank`).
    pub fn local_basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Block basis embedded into the full site space (`dim x rank`).
    pub fn embedded_basis(&self, dim: usize) -> CMatrix {
        let mut b = CMatrix::zeros(dim, self.rank());
        for (li, &site) in self.support.iter().enumerate() {
            for k in 0..self.rank() {
                b[(site, k)] = self.basis[(li, k)];
            }
        }
        b
    }

    /// `C` embedded into the full site space.
    pub fn embedded_c(&self, dim: usize) -> CMatrix {
        let mut m = CMatrix::zeros(dim, dim);
        for (a, &i) in self.support.iter().enumerate() {
            for (b, &j) in self.support.iter().enumerate() {
                m[(i, j)] = self.c[(a, b)];
            }
        }
        m
    }

    /// True when `C^2 = C` within 1e-12 on its range.
    pub fn is_projection(&self) -> bool {
        self.strengths.iter().all(|s| (s - 1.0).abs() <= 1e-12)
    }
}

/// Background operator, its block decomposition and site labels.
#[derive(Debug, Clone)]
pub struct BaseModel {
    pub sites: SiteSpace,
    pub operator: HermitianOperator,
    pub blocks: Vec<PerturbationBlock>,
}

impl BaseModel {
    pub fn new(
        sites: SiteSpace,
        operator: HermitianOperator,
        blocks: Vec<PerturbationBlock>,
    ) -> Result<Self> {
        let dim = operator.dim();
        if sites.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{} sites but operator dimension {dim}",
                sites.dim()
            )));
        }
        check_supports(&blocks, dim)?;
        Ok(BaseModel {
            sites,
            operator,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn assemble(&self, omega: &[f64]) -> Result<ModelInstance> {
        let mut inst = assemble(&self.operator, &self.blocks, omega)?;
        inst.sites = self.sites.clone();
        Ok(inst)
    }
}

fn check_supports(blocks: &[PerturbationBlock], dim: usize) -> Result<()> {
    for b in blocks {
        if let Some(&s) = b.support.iter().find(|&&s| s >= dim) {
            return Err(Error::DimensionMismatch(format!(
                "block {} references site {s} outside dimension {dim}",
                b.index
            )));
        }
    }
    Ok(())
}

/// One disorder realisation `A^omega`, immutable after construction.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub sites: SiteSpace,
    pub a: HermitianOperator,
    pub blocks: Vec<PerturbationBlock>,
    pub omega: Vec<f64>,
    pub assembled: HermitianOperator,
    spectrum: OnceLock<Vec<f64>>,
}

impl ModelInstance {
    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn block(&self, n: usize) -> Result<&PerturbationBlock> {
        self.blocks.get(n).ok_or_else(|| {
            Error::pre(format!(
                "block index {n} out of range ({} blocks)",
                self.blocks.len()
            ))
        })
    }

    /// Eigenvalues of the assembled operator, ascending (computed once).
    pub fn spectrum(&self) -> &[f64] {
        self.spectrum
            .get_or_init(|| linalg::hermitian_eigenvalues(self.assembled.matrix()))
    }

    /// Largest eigenvalue modulus of the assembled operator.
    pub fn norm(&self) -> f64 {
        self.spectrum().iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn distance_to_spectrum(&self, z: C64) -> f64 {
        self.spectrum()
            .iter()
            .map(|&e| (z - c(e)).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Same background and blocks with different disorder.
    pub fn with_omega(&self, omega: &[f64]) -> Result<ModelInstance> {
        let mut inst = assemble(&self.a, &self.blocks, omega)?;
        inst.sites = self.sites.clone();
        Ok(inst)
    }

    pub fn base(&self) -> BaseModel {
        BaseModel {
            sites: self.sites.clone(),
            operator: self.a.clone(),
            blocks: self.blocks.clone(),
        }
    }
}

/// Adds `sum_n omega[n] C_n` to `A` in ascending block order. The upper
/// triangle is summed and mirrored, so the result is exactly Hermitian.
pub fn assemble(
    a: &HermitianOperator,
    blocks: &[PerturbationBlock],
    omega: &[f64],
) -> Result<ModelInstance> {
    if omega.len() != blocks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} disorder values for {} blocks",
            omega.len(),
            blocks.len()
        )));
    }
    let dim = a.dim();
    check_supports(blocks, dim)?;
    let mut m = a.matrix().clone();
    for (block, &w) in blocks.iter().zip(omega) {
        for (p, &i) in block.support.iter().enumerate() {
            for (q, &j) in block.support.iter().enumerate() {
                if i <= j {
                    m[(i, j)] += block.c[(p, q)] * w;
                }
            }
        }
    }
    for i in 0..dim {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..dim {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    Ok(ModelInstance {
        sites: SiteSpace::indexed(dim),
        a: a.clone(),
        blocks: blocks.to_vec(),
        omega: omega.to_vec(),
        assembled: HermitianOperator { matrix: m },
        spectrum: OnceLock::new(),
    })
}

/// Result of checking `sum_n P_n = I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionCheck {
    pub holds: bool,
    pub defect: f64,
}

pub fn verify_partition(blocks: &[PerturbationBlock], dim: usize) -> PartitionCheck {
    let mut sum = CMatrix::zeros(dim, dim);
    for b in blocks {
        if b.support.iter().any(|&s| s >= dim) {
            return PartitionCheck {
                holds: false,
                defect: f64::INFINITY,
            };
        }
        let basis = b.embedded_basis(dim);
        sum += &basis * basis.adjoint();
    }
    let defect = linalg::op_norm(&(sum - CMatrix::identity(dim, dim)));
    PartitionCheck {
        holds: defect <= 1e-10,
        defect,
    }
}
