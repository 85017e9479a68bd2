use serde::Serialize;

use crate::error::{Error, Result};
use crate::greens_function::{
    boundary_value, green_block, resolvent_apply, EpsilonSchedule, Side, REAL_AXIS_MARGIN,
};
use crate::linalg::{self, c};
use crate::operator_model::ModelInstance;
use crate::{CMatrix, C64};

use super::decompose_matrix;

pub const RANK_THRESHOLD: f64 = 1e-8;
pub const ANGLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelWitness {
    pub energy: f64,
    /// Basis of `ker(C^{-1} + lambda G_pp(E +- i0))` in block coordinates.
    pub kernel: CMatrix,
    /// Basis of `range(lim eps C G^lambda_pp(E +- i eps) C)`.
    pub range: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelAtom {
    pub witness: KernelWitness,
    pub range_in_kernel_sine: f64,
    pub kernel_in_im_kernel_sine: f64,
    /// The limit vanished, so both inclusions hold trivially.
    pub vacuous: bool,
    pub converged: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedAtom {
    pub energy: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub p: usize,
    pub lambda: f64,
    pub atoms: Vec<KernelAtom>,
    pub skipped: Vec<SkippedAtom>,
    pub pass: bool,
}

/// Pseudo-inverse of a Hermitian PSD matrix, dropping eigenvalues below `1e-10 ||C||`.
fn pseudo_inverse(cm: &CMatrix) -> CMatrix {
    let (vals, vecs) = linalg::hermitian_eigen(cm);
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let inv: Vec<f64> = vals
        .iter()
        .map(|&v| if v.abs() > 1e-10 * top { 1.0 / v } else { 0.0 })
        .collect();
    &vecs * linalg::diag(&inv) * vecs.adjoint()
}

/// Both inclusions at a single real energy `E`, separated from the spectrum of `A^omega`.
pub fn kernel_inclusion_at(
    model: &ModelInstance,
    p: usize,
    lambda: f64,
    energy: f64,
    sched: &EpsilonSchedule,
    side: Side,
) -> Result<KernelAtom> {
    let block = model.block(p)?;
    let dim = model.dim();
    let b = block.embedded_basis(dim);
    let cb = block.c_in_basis();
    // Off the spectrum the real-axis resolvent is exact; the epsilon limit leaves an
    // O(eps^2 / dist^2) error that swamps the kernel test next to a pole.
    let g = if model.distance_to_spectrum(c(energy)) > REAL_AXIS_MARGIN {
        green_block(model, p, p, c(energy))?.matrix
    } else {
        boundary_value(model, p, p, energy, sched, side)?.0.matrix
    };

    let hl = model.assembled.matrix() + &b * &cb * b.adjoint() * c(lambda);
    let mut seq = Vec::with_capacity(sched.eps.len());
    for &eps in &sched.eps {
        let (x, _) = resolvent_apply(&hl, C64::new(energy, side.sign() * eps), &b)?;
        seq.push(&cb * (b.adjoint() * x) * &cb * c(eps));
    }
    let extrapolated: Vec<CMatrix> = seq
        .windows(2)
        .zip(sched.eps.windows(2))
        .map(|(w, e)| {
            let q = e[1] / e[0];
            (&w[1] - &w[0] * c(q)) / c(1.0 - q)
        })
        .collect();
    let diffs: Vec<f64> = extrapolated
        .windows(2)
        .map(|w| (&w[1] - &w[0]).norm())
        .collect();
    let converged = diffs.len() >= 3
        && diffs[diffs.len() - 3..]
            .iter()
            .all(|&d| d < sched.stall_tol);
    let lim = extrapolated.last().expect("schedule has two points");

    let c_norm = linalg::op_norm(&cb);
    let range = linalg::orthonormal_basis(lim, 0.0, RANK_THRESHOLD * c_norm * c_norm);
    let cinv = pseudo_inverse(&cb);
    let m = &cinv + &g * c(lambda);
    let m_scale = linalg::op_norm(&cinv) + lambda.abs() * linalg::op_norm(&g);
    let kernel = linalg::kernel_basis(&m, 0.0, RANK_THRESHOLD * m_scale);
    let im = linalg::im_part(&g);
    let im_kernel = linalg::kernel_basis(&im, 0.0, RANK_THRESHOLD * linalg::op_norm(&g).max(1.0));

    let range_in_kernel_sine = linalg::max_principal_sine(&range, &kernel);
    let kernel_in_im_kernel_sine = linalg::max_principal_sine(&kernel, &im_kernel);
    Ok(KernelAtom {
        vacuous: range.ncols() == 0,
        pass: range_in_kernel_sine <= ANGLE_TOL && kernel_in_im_kernel_sine <= ANGLE_TOL,
        witness: KernelWitness {
            energy,
            kernel,
            range,
        },
        range_in_kernel_sine,
        kernel_in_im_kernel_sine,
        converged,
    })
}

/// Runs [`kernel_inclusion_at`] at every atom of `A^omega + lambda C_p` that lies
/// at least `10 eps_min` from the spectrum of `A^omega`; closer atoms are skipped.
pub fn kernel_inclusion_check(
    model: &ModelInstance,
    p: usize,
    lambda: f64,
    sched: &EpsilonSchedule,
    side: Side,
    cluster_tol: f64,
) -> Result<KernelReport> {
    let block = model.block(p)?;
    let dim = model.dim();
    let hl = model.assembled.matrix() + block.embedded_c(dim) * c(lambda);
    let d = decompose_matrix(&hl, cluster_tol);
    let margin = 10.0 * sched.eps_min();
    let mut atoms = Vec::new();
    let mut skipped = Vec::new();
    for j in 0..d.atom_count() {
        let energy = d.atom_energy(j);
        let dist = model.distance_to_spectrum(c(energy));
        if dist < margin {
            skipped.push(SkippedAtom {
                energy,
                reason: format!("distance {dist:e} to the unperturbed spectrum"),
            });
            continue;
        }
        match kernel_inclusion_at(model, p, lambda, energy, sched, side) {
            Ok(a) => atoms.push(a),
            Err(e @ Error::LimitNotAttained { .. }) => skipped.push(SkippedAtom {
                energy,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(KernelReport {
        p,
        lambda,
        pass: atoms.iter().all(|a| a.pass),
        atoms,
        skipped,
    })
}
