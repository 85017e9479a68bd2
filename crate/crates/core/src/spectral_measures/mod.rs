//! Finite-dimensional spectral data of `A^omega`. Every spectral measure here
//! is atomic, so "singular" is read as "atomic" throughout.

mod averaging;
mod cyclic;
mod kernel;

pub use averaging::{
    averaging_center, canonical_averaging_model, dyadic_intervals, spectral_averaging_estimate,
    AveragingReport, LambdaLaw,
};
pub use cyclic::{
    cyclic_projection, cyclic_subspace, singular_inclusion_check, CyclicProjection, CyclicSubspace,
    InclusionVerdict, CYCLIC_TOL,
};
pub use kernel::{
    kernel_inclusion_at, kernel_inclusion_check, KernelAtom, KernelReport, KernelWitness,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::greens_function::{resolvent_apply, EpsilonSchedule};
use crate::linalg::{self, c};
use crate::operator_model::ModelInstance;
use crate::{CMatrix, C64};

/// Trace weights at or below this are treated as absent.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    pub clusters: Vec<Vec<usize>>,
    pub cluster_tol: f64,
    /// `max_i ||H v_i - E_i v_i||`.
    pub residual: f64,
    /// `||V* V - I||`.
    pub gram_defect: f64,
    pub norm: f64,
}

impl SpectralDecomposition {
    pub fn atom_count(&self) -> usize {
        self.clusters.len()
    }

    /// Mean eigenvalue of cluster `j`.
    pub fn atom_energy(&self, j: usize) -> f64 {
        let cl = &self.clusters[j];
        cl.iter().map(|&i| self.eigenvalues[i]).sum::<f64>() / cl.len() as f64
    }

    pub fn cluster_vectors(&self, j: usize) -> CMatrix {
        let cl = &self.clusters[j];
        let mut v = CMatrix::zeros(self.eigenvectors.nrows(), cl.len());
        for (k, &i) in cl.iter().enumerate() {
            v.set_column(k, &self.eigenvectors.column(i));
        }
        v
    }

    /// Spectral projection `Pi_j` onto cluster `j`.
    pub fn projector(&self, j: usize) -> CMatrix {
        linalg::projector(&self.cluster_vectors(j))
    }

    /// Distance from atom `j` to the nearest other atom.
    pub fn nearest_distance(&self, j: usize) -> f64 {
        let e = self.atom_energy(j);
        (0..self.atom_count())
            .filter(|&k| k != j)
            .map(|k| (self.atom_energy(k) - e).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eigendecomposition of a Hermitian matrix with clusters at consecutive gap
/// `cluster_tol * ||h||`.
pub fn decompose_matrix(h: &CMatrix, cluster_tol: f64) -> SpectralDecomposition {
    let (eigenvalues, eigenvectors) = linalg::hermitian_eigen(h);
    let norm = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let clusters = linalg::cluster_sorted(&eigenvalues, cluster_tol * norm);
    let residual = (0..eigenvalues.len())
        .map(|i| {
            let v = eigenvectors.column(i);
            (h * v - v * c(eigenvalues[i])).norm()
        })
        .fold(0.0f64, f64::max);
    let n = eigenvalues.len();
    let gram_defect = (eigenvectors.adjoint() * &eigenvectors - CMatrix::identity(n, n)).norm();
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        clusters,
        cluster_tol,
        residual,
        gram_defect,
        norm,
    }
}

pub fn decompose(model: &ModelInstance, cluster_tol: f64) -> SpectralDecomposition {
    decompose_matrix(model.assembled.matrix(), cluster_tol)
}

/// Orthonormal basis of the range of block `n`, embedded (`dim x rank`).
pub fn block_basis(model: &ModelInstance, n: usize) -> Result<CMatrix> {
    Ok(model.block(n)?.embedded_basis(model.dim()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceAtom {
    pub energy: f64,
    pub multiplicity: usize,
    pub weight: f64,
}

/// Atoms `(E_j, tr(P Pi_j P))` for the projection onto span(`basis`).
pub fn trace_measure(decomp: &SpectralDecomposition, basis: &CMatrix) -> Vec<TraceAtom> {
    (0..decomp.atom_count())
        .map(|j| TraceAtom {
            energy: decomp.atom_energy(j),
            multiplicity: decomp.clusters[j].len(),
            weight: (basis.adjoint() * decomp.cluster_vectors(j)).norm_squared(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightAtom {
    pub atom: usize,
    pub energy: f64,
    pub trace: f64,
    /// `B* Pi_j B`.
    pub raw: CMatrix,
    /// `raw / trace`.
    pub normalized: CMatrix,
    /// Eigenvalues of the normalised weight, ascending (they sum to one).
    pub f_values: Vec<f64>,
    /// Eigenvectors of the normalised weight as columns.
    pub unitary: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixMeasure {
    pub atoms: Vec<WeightAtom>,
    /// Atoms whose trace weight is at most [`WEIGHT_FLOOR`].
    pub skipped: Vec<usize>,
    /// `||sum_j W_j - I||` over all atoms.
    pub sum_defect: f64,
}

pub fn matrix_weight(decomp: &SpectralDecomposition, basis: &CMatrix) -> MatrixMeasure {
    let r = basis.ncols();
    let mut total = CMatrix::zeros(r, r);
    let mut atoms = Vec::new();
    let mut skipped = Vec::new();
    for j in 0..decomp.atom_count() {
        let proj = basis.adjoint() * decomp.cluster_vectors(j);
        let raw = &proj * proj.adjoint();
        total += &raw;
        let trace = raw.trace().re;
        if trace <= WEIGHT_FLOOR {
            skipped.push(j);
            continue;
        }
        let normalized = &raw / c(trace);
        let (f_values, unitary) = linalg::hermitian_eigen(&normalized);
        atoms.push(WeightAtom {
            atom: j,
            energy: decomp.atom_energy(j),
            trace,
            raw,
            normalized,
            f_values,
            unitary,
        });
    }
    MatrixMeasure {
        atoms,
        skipped,
        sum_defect: (total - CMatrix::identity(r, r)).norm(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoltoratskiiReport {
    pub atom: usize,
    pub energy: f64,
    pub nearest_distance: f64,
    pub eps: Vec<f64>,
    /// `||G(E+i eps)/tr G(E+i eps) - W_norm||` per schedule point.
    pub deviations: Vec<f64>,
    /// Same after removing the linear term in `eps` between neighbouring points.
    pub extrapolated_deviations: Vec<f64>,
    pub final_deviation: f64,
    /// Non-increasing raw deviations once `eps < nearest_distance / 10`.
    pub monotone: bool,
}

/// Ratio `G_nn(E_j + i eps) / tr G_nn(E_j + i eps)` against the normalised weight at atom `j`.
pub fn poltoratskii_ratio(
    model: &ModelInstance,
    basis: &CMatrix,
    decomp: &SpectralDecomposition,
    j: usize,
    sched: &EpsilonSchedule,
) -> Result<PoltoratskiiReport> {
    if j >= decomp.atom_count() {
        return Err(Error::pre(format!("atom index {j} out of range")));
    }
    let proj = basis.adjoint() * decomp.cluster_vectors(j);
    let raw = &proj * proj.adjoint();
    let trace = raw.trace().re;
    if trace <= WEIGHT_FLOOR {
        return Err(Error::pre(format!("atom {j} carries no block weight")));
    }
    let target = &raw / c(trace);
    let energy = decomp.atom_energy(j);
    let nearest = decomp.nearest_distance(j);
    let resolution = 10.0 * sched.eps_min();
    if nearest < resolution {
        return Err(Error::AtomsUnresolved {
            distance: nearest,
            resolution,
        });
    }
    let h = model.assembled.matrix();
    let mut ratios = Vec::with_capacity(sched.eps.len());
    for &eps in &sched.eps {
        let (x, _) = resolvent_apply(h, C64::new(energy, eps), basis)?;
        let g = basis.adjoint() * x;
        let tr = g.trace();
        ratios.push(g / tr);
    }
    let deviations: Vec<f64> = ratios
        .iter()
        .map(|r| linalg::op_norm(&(r - &target)))
        .collect();
    let extrapolated_deviations: Vec<f64> = ratios
        .windows(2)
        .zip(sched.eps.windows(2))
        .map(|(w, e)| {
            let q = e[1] / e[0];
            linalg::op_norm(&((&w[1] - &w[0] * c(q)) / c(1.0 - q) - &target))
        })
        .collect();
    let past: Vec<f64> = sched
        .eps
        .iter()
        .zip(&deviations)
        .filter(|(e, _)| **e < nearest / 10.0)
        .map(|(_, d)| *d)
        .collect();
    let monotone = past.windows(2).all(|w| w[1] <= w[0]);
    Ok(PoltoratskiiReport {
        atom: j,
        energy,
        nearest_distance: nearest,
        eps: sched.eps.clone(),
        final_deviation: *extrapolated_deviations
            .last()
            .expect("schedule has two points"),
        deviations,
        extrapolated_deviations,
        monotone,
    })
}
