//! Block Green's functions `G_nm(z) = P_n (A^omega - z)^{-1} P_m` in the fixed
//! block bases, their real-axis boundary values and the rank-update identities.

use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::operator_model::ModelInstance;
use crate::{CMatrix, C64};

/// Relative backward error accepted from a dense solve.
pub const SOLVE_TOL: f64 = 1e-10;
/// Real spectral parameters closer than this to an eigenvalue are refused.
pub const REAL_AXIS_MARGIN: f64 = 1e-8;
/// Singular-value threshold used to extract kernels.
pub const KERNEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GreenBlock {
    pub z: C64,
    pub n: usize,
    pub m: usize,
    pub matrix: CMatrix,
    /// Relative backward error of the solve that produced the block.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    pub eps: Vec<f64>,
    pub stall_tol: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            eps: (0..=20).map(|k| 1e-2 * 0.5f64.powi(k)).collect(),
            stall_tol: 1e-8,
        }
    }
}

impl EpsilonSchedule {
    pub fn new(eps: Vec<f64>, stall_tol: f64) -> Result<Self> {
        if eps.len() < 2 {
            return Err(Error::pre("epsilon schedule needs at least two values"));
        }
        if eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) || eps.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::pre(
                "epsilon schedule must be positive and strictly decreasing",
            ));
        }
        if !(stall_tol > 0.0) {
            return Err(Error::pre("stall_tol must be positive"));
        }
        Ok(EpsilonSchedule { eps, stall_tol })
    }

    pub fn eps_min(&self) -> f64 {
        *self.eps.last().expect("schedule is non-empty")
    }
}

/// Cauchy diagnostic of an epsilon sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDiagnostic {
    /// `||G(E +- i eps_{k+1}) - G(E +- i eps_k)||` along the raw schedule.
    pub raw_differences: Vec<f64>,
    /// Successive differences of the extrapolated sequence `2 G_{k+1} - G_k`.
    pub differences: Vec<f64>,
    pub converged: bool,
    pub diverging: bool,
}

fn embedded_bases(model: &ModelInstance, n: usize, m: usize) -> Result<(CMatrix, CMatrix)> {
    let dim = model.dim();
    Ok((
        model.block(n)?.embedded_basis(dim),
        model.block(m)?.embedded_basis(dim),
    ))
}

/// `(h - z)^{-1} rhs` with the refuse-rather-than-regularise policy.
pub fn resolvent_apply(h: &CMatrix, z: C64, rhs: &CMatrix) -> Result<(CMatrix, f64)> {
    let dim = h.nrows();
    let shifted = h - CMatrix::identity(dim, dim) * z;
    let x = linalg::solve_checked(&shifted, rhs, z, SOLVE_TOL)?;
    let residual = (&shifted * &x - rhs).norm() / (shifted.norm() * x.norm() + rhs.norm());
    Ok((x, residual))
}

fn check_regular(model: &ModelInstance, z: C64) -> Result<()> {
    let dist = model.distance_to_spectrum(z);
    if z.im == 0.0 && dist <= REAL_AXIS_MARGIN {
        return Err(Error::TooCloseToSpectrum {
            energy: z.re,
            distance: dist,
        });
    }
    if dist <= 1e-14 * model.norm().max(1.0) {
        return Err(Error::NearSingular {
            z,
            detail: format!("distance {dist:e} to the spectrum is at roundoff level"),
        });
    }
    Ok(())
}

pub fn green_block(model: &ModelInstance, n: usize, m: usize, z: C64) -> Result<GreenBlock> {
    check_regular(model, z)?;
    let (bn, bm) = embedded_bases(model, n, m)?;
    let (x, residual) = resolvent_apply(model.assembled.matrix(), z, &bm)?;
    Ok(GreenBlock {
        z,
        n,
        m,
        matrix: bn.adjoint() * x,
        residual,
    })
}

/// Full resolvent `(A^omega - z)^{-1}`.
pub fn resolvent(model: &ModelInstance, z: C64) -> Result<CMatrix> {
    check_regular(model, z)?;
    let dim = model.dim();
    Ok(resolvent_apply(model.assembled.matrix(), z, &CMatrix::identity(dim, dim))?.0)
}

/// Smallest eigenvalue of `(G - G*)/(2i)`; non-negative for Herglotz blocks.
pub fn herglotz_margin(g: &CMatrix) -> f64 {
    linalg::hermitian_eigenvalues(&linalg::im_part(g))
        .first()
        .copied()
        .unwrap_or(0.0)
}

/// Largest residue norm `||P_n Pi_j P_m||` over eigenvalue clusters within `radius` of `e`.
fn weight_near(model: &ModelInstance, n: usize, m: usize, e: f64, radius: f64) -> Result<f64> {
    let (vals, vecs) = linalg::hermitian_eigen(model.assembled.matrix());
    let (bn, bm) = embedded_bases(model, n, m)?;
    let near: Vec<usize> = (0..vals.len())
        .filter(|&i| (vals[i] - e).abs() <= radius)
        .collect();
    if near.is_empty() {
        return Ok(0.0);
    }
    let mut v = CMatrix::zeros(model.dim(), near.len());
    for (k, &i) in near.iter().enumerate() {
        v.set_column(k, &vecs.column(i));
    }
    Ok(linalg::op_norm(&((bn.adjoint() * &v) * (v.adjoint() * bm))))
}

/// Evaluates `G_nm(E +- i eps)` along the schedule and the extrapolated sequence.
pub fn boundary_sequence(
    model: &ModelInstance,
    n: usize,
    m: usize,
    energy: f64,
    sched: &EpsilonSchedule,
    side: Side,
) -> Result<(Vec<CMatrix>, BoundaryDiagnostic)> {
    let (bn, bm) = embedded_bases(model, n, m)?;
    let mut raw = Vec::with_capacity(sched.eps.len());
    for &eps in &sched.eps {
        let z = C64::new(energy, side.sign() * eps);
        let (x, _) = resolvent_apply(model.assembled.matrix(), z, &bm)?;
        raw.push(bn.adjoint() * x);
    }
    let extrapolated: Vec<CMatrix> = raw
        .windows(2)
        .zip(sched.eps.windows(2))
        .map(|(g, e)| {
            // Linear-in-eps error removed for an arbitrary ratio e1/e0.
            let r = e[1] / e[0];
            (&g[1] - &g[0] * c(r)) / c(1.0 - r)
        })
        .collect();
    let raw_differences: Vec<f64> = raw.windows(2).map(|w| (&w[1] - &w[0]).norm()).collect();
    let differences: Vec<f64> = extrapolated
        .windows(2)
        .map(|w| (&w[1] - &w[0]).norm())
        .collect();
    let tail = &differences[differences.len().saturating_sub(3)..];
    let converged = tail.len() == 3 && tail.iter().all(|&d| d < sched.stall_tol);
    let diverging = !converged && raw_differences.len() >= 3 && {
        let k = raw_differences.len();
        raw_differences[k - 1] > raw_differences[k - 2]
            && raw_differences[k - 2] > raw_differences[k - 3]
    };
    Ok((
        extrapolated,
        BoundaryDiagnostic {
            raw_differences,
            differences,
            converged,
            diverging,
        },
    ))
}

/// Extrapolated `lim_{eps -> 0} G_nm(E +- i eps)`.
pub fn boundary_value(
    model: &ModelInstance,
    n: usize,
    m: usize,
    energy: f64,
    sched: &EpsilonSchedule,
    side: Side,
) -> Result<(GreenBlock, BoundaryDiagnostic)> {
    let radius = 10.0 * sched.eps_min();
    let weighted = weight_near(model, n, m, energy, radius)? > 1e-10;
    let (seq, diag) = boundary_sequence(model, n, m, energy, sched, side)?;
    if weighted || diag.diverging {
        return Err(Error::LimitNotAttained {
            energy,
            last_difference: diag
                .raw_differences
                .last()
                .copied()
                .unwrap_or(f64::INFINITY),
        });
    }
    let matrix = seq
        .last()
        .expect("schedule has at least two points")
        .clone();
    Ok((
        GreenBlock {
            z: c(energy),
            n,
            m,
            matrix,
            residual: diag.differences.last().copied().unwrap_or(0.0),
        },
        diag,
    ))
}

/// Residuals of the four rank-update identities for `A^omega -> A^omega + lambda C_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankUpdateReport {
    pub p: usize,
    pub lambda: f64,
    pub z: C64,
    pub det_abs: f64,
    /// Compressed perturbed block versus `G_pp (I + lambda C G_pp)^{-1}`.
    pub single_block: f64,
    /// Worst pair `(n, m)` of the off-diagonal update formula.
    pub off_diagonal: f64,
    /// `(I - lambda C G^lambda_pp)(I + lambda C G_pp) - I`, both orders.
    pub inverse_pair: f64,
    /// Worst pair of the second-order expansion.
    pub second_order: f64,
}

impl RankUpdateReport {
    pub fn residuals(&self) -> [f64; 4] {
        [
            self.single_block,
            self.off_diagonal,
            self.inverse_pair,
            self.second_order,
        ]
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals().into_iter().fold(0.0, f64::max)
    }
}

fn rel(diff: &CMatrix, scale: f64) -> f64 {
    let d = diff.norm();
    if d == 0.0 {
        0.0
    } else {
        d / scale.max(f64::MIN_POSITIVE)
    }
}

/// Left sides use the directly assembled `A^omega + lambda C_p`; right sides
/// only blocks of `A^omega`.
pub fn rank_update_check(
    model: &ModelInstance,
    p: usize,
    lambda: f64,
    z: C64,
) -> Result<RankUpdateReport> {
    let dim = model.dim();
    let nb = model.blocks.len();
    let bp = model.block(p)?;
    let bases: Vec<CMatrix> = model.blocks.iter().map(|b| b.embedded_basis(dim)).collect();
    let all = {
        let width: usize = bases.iter().map(|b| b.ncols()).sum();
        let mut m = CMatrix::zeros(dim, width);
        let mut off = 0;
        for b in &bases {
            m.columns_mut(off, b.ncols()).copy_from(b);
            off += b.ncols();
        }
        m
    };
    let offsets: Vec<usize> = bases
        .iter()
        .scan(0, |acc, b| {
            let o = *acc;
            *acc += b.ncols();
            Some(o)
        })
        .collect();
    let block = |g: &CMatrix, n: usize, m: usize| -> CMatrix {
        g.view(
            (offsets[n], offsets[m]),
            (bases[n].ncols(), bases[m].ncols()),
        )
        .into_owned()
    };

    check_regular(model, z)?;
    let (x, _) = resolvent_apply(model.assembled.matrix(), z, &all)?;
    let g = all.adjoint() * x;

    let r = bp.rank();
    let id = CMatrix::identity(r, r);
    let cp = bp.c_in_basis();
    let gpp = block(&g, p, p);
    let update = &id + &cp * &gpp * c(lambda);
    let det_abs = update.determinant().norm();
    if det_abs <= 1e-12 {
        return Err(Error::SingularUpdate { det_abs });
    }

    let mut perturbed = model.assembled.matrix().clone();
    perturbed += bp.embedded_c(dim) * c(lambda);
    let (xl, _) = resolvent_apply(&perturbed, z, &all)?;
    let gl = all.adjoint() * xl;
    let glpp = block(&gl, p, p);
    let inv = update
        .clone()
        .try_inverse()
        .ok_or(Error::SingularUpdate { det_abs })?;

    let rhs1 = &gpp * &inv;
    let single_block = rel(&(&glpp - &rhs1), glpp.norm().max(rhs1.norm()));

    let back = &id - &cp * &glpp * c(lambda);
    let left = &back * &update - &id;
    let right = &update * &back - &id;
    let inverse_pair =
        rel(&left, back.norm() * update.norm()).max(rel(&right, back.norm() * update.norm()));

    let mut off_diagonal = 0.0f64;
    let mut second_order = 0.0f64;
    for n in 0..nb {
        for m in 0..nb {
            let gnp = block(&g, n, p);
            let gpm = block(&g, p, m);
            let gnm = block(&g, n, m);
            let lhs = block(&gl, n, m);
            let corr = &gnp * &inv * &cp * &gpm * c(lambda);
            let rhs2 = &gnm - &corr;
            let scale2 = lhs.norm().max(gnm.norm()).max(corr.norm());
            off_diagonal = off_diagonal.max(rel(&(&lhs - &rhs2), scale2));

            let first = &gnp * &cp * &gpm * c(lambda);
            let second = &gnp * &cp * &glpp * &cp * &gpm * c(lambda * lambda);
            let rhs4 = &gnm - &first + &second;
            let scale4 = lhs
                .norm()
                .max(gnm.norm())
                .max(first.norm())
                .max(second.norm());
            second_order = second_order.max(rel(&(&lhs - &rhs4), scale4));
        }
    }
    Ok(RankUpdateReport {
        p,
        lambda,
        z,
        det_abs,
        single_block,
        off_diagonal,
        inverse_pair,
        second_order,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointReport {
    pub kernel_dim: usize,
    pub residual: f64,
    /// True when the kernel is trivial and nothing was checked.
    pub vacuous: bool,
}

/// `G_kp phi = G_pk^* phi` on the kernel of `Im G_pp`, given the three blocks.
pub fn adjoint_symmetry_from_blocks(gkp: &CMatrix, gpk: &CMatrix, gpp: &CMatrix) -> AdjointReport {
    let im = linalg::im_part(gpp);
    let floor = KERNEL_TOL * linalg::op_norm(gpp).max(1.0) * 1e-2;
    let kernel = linalg::kernel_basis(&im, KERNEL_TOL, floor);
    if kernel.ncols() == 0 {
        return AdjointReport {
            kernel_dim: 0,
            residual: 0.0,
            vacuous: true,
        };
    }
    let diff = gkp * &kernel - gpk.adjoint() * &kernel;
    let residual = (0..kernel.ncols())
        .map(|j| diff.column(j).norm())
        .fold(0.0, f64::max);
    AdjointReport {
        kernel_dim: kernel.ncols(),
        residual,
        vacuous: false,
    }
}

/// Adjoint symmetry at real `E` using boundary values.
pub fn adjoint_symmetry_check(
    model: &ModelInstance,
    k: usize,
    p: usize,
    energy: f64,
    side: Side,
    sched: &EpsilonSchedule,
) -> Result<AdjointReport> {
    let (gkp, _) = boundary_value(model, k, p, energy, sched, side)?;
    let (gpk, _) = boundary_value(model, p, k, energy, sched, side)?;
    let (gpp, _) = boundary_value(model, p, p, energy, sched, side)?;
    Ok(adjoint_symmetry_from_blocks(
        &gkp.matrix,
        &gpk.matrix,
        &gpp.matrix,
    ))
}

/// Adjoint symmetry at a finite spectral parameter.
pub fn adjoint_symmetry_at(
    model: &ModelInstance,
    k: usize,
    p: usize,
    z: C64,
) -> Result<AdjointReport> {
    let gkp = green_block(model, k, p, z)?;
    let gpk = green_block(model, p, k, z)?;
    let gpp = green_block(model, p, p, z)?;
    Ok(adjoint_symmetry_from_blocks(
        &gkp.matrix,
        &gpk.matrix,
        &gpp.matrix,
    ))
}

/// Pieces of the Schur form of `G_nn`: the local block `P_n A^omega P_n`
/// and the coupling `P_n A (I-P_n) (A~ - z)^{-1} (I-P_n) A P_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurParts {
    pub local: CMatrix,
    pub coupling: CMatrix,
}

/// Orthonormal basis of the orthogonal complement of the block range.
fn complement_basis(model: &ModelInstance, n: usize) -> Result<CMatrix> {
    let dim = model.dim();
    let block = model.block(n)?;
    let b = block.embedded_basis(dim);
    let is_sites =
        (0..b.ncols()).all(|j| b.column(j).iter().filter(|v| **v != c(0.0)).count() == 1);
    if is_sites {
        let mut used = vec![false; dim];
        for j in 0..b.ncols() {
            let i = b
                .column(j)
                .iter()
                .position(|v| *v != c(0.0))
                .expect("unit column");
            used[i] = true;
        }
        let free: Vec<usize> = (0..dim).filter(|&i| !used[i]).collect();
        let mut q = CMatrix::zeros(dim, free.len());
        for (j, &i) in free.iter().enumerate() {
            q[(i, j)] = c(1.0);
        }
        return Ok(q);
    }
    let comp = CMatrix::identity(dim, dim) - &b * b.adjoint();
    let (vals, vecs) = linalg::hermitian_eigen(&comp);
    let keep: Vec<usize> = (0..dim).filter(|&i| vals[i] > 0.5).collect();
    let mut q = CMatrix::zeros(dim, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        q.set_column(j, &vecs.column(i));
    }
    Ok(q)
}

pub fn schur_parts(model: &ModelInstance, n: usize, z: C64) -> Result<SchurParts> {
    let dim = model.dim();
    let b = model.block(n)?.embedded_basis(dim);
    let q = complement_basis(model, n)?;
    let h = model.assembled.matrix();
    let local = b.adjoint() * h * &b;
    if q.ncols() == 0 {
        return Ok(SchurParts {
            coupling: CMatrix::zeros(b.ncols(), b.ncols()),
            local,
        });
    }
    let hq = q.adjoint() * h * &q;
    let cross = q.adjoint() * h * &b;
    let (x, _) = resolvent_apply(&hq, z, &cross).map_err(|_| Error::SingularSchur { block: n })?;
    Ok(SchurParts {
        coupling: cross.adjoint() * x,
        local,
    })
}

/// `G_nn(z)` as the inverse of the Schur complement of the block.
pub fn schur_green(model: &ModelInstance, n: usize, z: C64) -> Result<GreenBlock> {
    let parts = schur_parts(model, n, z)?;
    let r = parts.local.nrows();
    let complement = &parts.local - CMatrix::identity(r, r) * z - &parts.coupling;
    let id = CMatrix::identity(r, r);
    let matrix = linalg::solve_checked(&complement, &id, z, SOLVE_TOL)
        .map_err(|_| Error::SingularSchur { block: n })?;
    let residual =
        (&complement * &matrix - &id).norm() / (complement.norm() * matrix.norm() + id.norm());
    Ok(GreenBlock {
        z,
        n,
        m: n,
        matrix,
        residual,
    })
}
