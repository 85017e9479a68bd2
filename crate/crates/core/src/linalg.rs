//! Dense helpers shared by every module: Hermitian eigendecomposition with a
//! fixed phase convention, clustering, rank-revealing bases and principal angles.

use nalgebra::{DMatrix, Schur, SymmetricEigen};

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Components with modulus below this are skipped when fixing eigenvector phases.
const PHASE_FLOOR: f64 = 1e-12;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd(m).values.first().copied().unwrap_or(0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Rotates a column so its first component of modulus above the floor is real positive.
pub fn fix_phase(col: &mut [C64]) {
    let scale = col.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    if scale == 0.0 {
        return;
    }
    if let Some(lead) = col.iter().find(|v| v.norm() > PHASE_FLOOR * scale) {
        let phase = lead.conj() / lead.norm();
        for v in col.iter_mut() {
            *v *= phase;
        }
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending, eigenvector
/// phases normalised by [`fix_phase`].
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col: Vec<C64> = eig.eigenvectors.column(i).iter().copied().collect();
        fix_phase(&mut col);
        for (r, v) in col.into_iter().enumerate() {
            vectors[(r, k)] = v;
        }
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Real symmetric eigendecomposition, eigenvalues ascending, each eigenvector
/// with its first significant component positive.
pub fn real_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(i);
        let scale = col.amax();
        let sign = col
            .iter()
            .find(|v| v.abs() > PHASE_FLOOR * scale)
            .map_or(1.0, |v| v.signum());
        for r in 0..n {
            vectors[(r, k)] = sign * col[r];
        }
    }
    (values, vectors)
}

/// Eigenvalues of a general complex square matrix via the complex Schur form.
pub fn complex_eigenvalues(m: &CMatrix) -> Vec<C64> {
    match m.nrows() {
        0 => Vec::new(),
        1 => vec![m[(0, 0)]],
        _ => {
            let t = Schur::new(m.clone()).unpack().1;
            (0..t.nrows()).map(|i| t[(i, i)]).collect()
        }
    }
}

/// Groups sorted values into runs whose consecutive gaps are at most `radius`.
pub fn cluster_sorted(values: &[f64], radius: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match clusters.last_mut() {
            Some(last) if v - values[*last.last().unwrap()] <= radius => last.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    clusters
}

/// Largest cluster size of sorted values at the given radius (0 for empty input).
pub fn max_cluster_size(values: &[f64], radius: f64) -> usize {
    cluster_sorted(values, radius)
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0)
}

/// Single-linkage clustering of points in the complex plane.
pub fn single_linkage(points: &[C64], radius: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (points[i] - points[j]).norm() <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Thin singular value decomposition `m = u diag(values) v*`, values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub values: Vec<f64>,
    pub u: CMatrix,
    pub v: CMatrix,
}

/// Relative reconstruction and orthogonality tolerance for accepting nalgebra's factors.
const SVD_ACCEPT: f64 = 1e-10;

/// Thin SVD. nalgebra's complex SVD occasionally returns factors that do not
/// reproduce `m` (seen on rank-deficient input); those are recomputed from the
/// Hermitian embedding `[[0, m], [m*, 0]]`, whose eigenpairs are
/// `(+-s, (u, +-v) / sqrt 2)`.
pub fn svd(m: &CMatrix) -> Svd {
    let (r, n) = m.shape();
    let k = r.min(n);
    if k == 0 {
        return Svd {
            values: Vec::new(),
            u: CMatrix::zeros(r, 0),
            v: CMatrix::zeros(n, 0),
        };
    }
    let raw = m.clone().svd(true, true);
    let u = raw.u.expect("left singular vectors requested");
    let v = raw.v_t.expect("right singular vectors requested").adjoint();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| raw.singular_values[b].total_cmp(&raw.singular_values[a]));
    let values: Vec<f64> = order.iter().map(|&i| raw.singular_values[i]).collect();
    let u = CMatrix::from_fn(r, k, |i, j| u[(i, order[j])]);
    let v = CMatrix::from_fn(n, k, |i, j| v[(i, order[j])]);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let recon = (&u * diag(&values) * v.adjoint() - m).norm();
    let orth = (u.adjoint() * &u - identity(k)).norm() + (v.adjoint() * &v - identity(k)).norm();
    if recon <= SVD_ACCEPT * scale && orth <= SVD_ACCEPT * k as f64 {
        return Svd { values, u, v };
    }
    embedded_svd(m)
}

fn embedded_svd(m: &CMatrix) -> Svd {
    let (r, n) = m.shape();
    let k = r.min(n);
    let mut big = CMatrix::zeros(r + n, r + n);
    big.view_mut((0, r), (r, n)).copy_from(m);
    big.view_mut((r, 0), (n, r)).copy_from(&m.adjoint());
    let (vals, vecs) = hermitian_eigen(&big);
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tiny = 1e-13 * top;
    let mut values = Vec::with_capacity(k);
    let mut us = Vec::new();
    let mut vs = Vec::new();
    for idx in (0..r + n).rev().take(k) {
        let s = vals[idx].max(0.0);
        values.push(s);
        if s > tiny {
            let col = vecs.column(idx);
            let a = col.rows(0, r).into_owned();
            let b = col.rows(r, n).into_owned();
            us.push(&a / c(a.norm()));
            vs.push(&b / c(b.norm()));
        }
    }
    let fill = |cols: Vec<nalgebra::DVector<C64>>, dim: usize| {
        let kept = if cols.is_empty() {
            CMatrix::zeros(dim, 0)
        } else {
            CMatrix::from_columns(&cols)
        };
        let rest = orthogonal_complement(&kept, dim);
        let mut out = CMatrix::zeros(dim, k);
        for j in 0..k {
            let src = if j < kept.ncols() {
                kept.column(j).into_owned()
            } else {
                rest.column(j - kept.ncols()).into_owned()
            };
            out.set_column(j, &src);
        }
        out
    };
    let u = fill(us, r);
    let v = fill(vs, n);
    Svd { values, u, v }
}

/// Orthonormal basis of the orthogonal complement of span(`q`) in C^dim; `q`
/// must have orthonormal columns.
pub fn orthogonal_complement(q: &CMatrix, dim: usize) -> CMatrix {
    if q.ncols() == 0 {
        return identity(dim);
    }
    let (vals, vecs) = hermitian_eigen(&(identity(dim) - q * q.adjoint()));
    let keep: Vec<usize> = (0..dim).filter(|&i| vals[i] > 0.5).collect();
    CMatrix::from_fn(dim, keep.len(), |i, j| vecs[(i, keep[j])])
}

/// Orthonormal basis of the column span, keeping singular directions above
/// `rel_tol` times the largest singular value (and above an absolute floor).
pub fn orthonormal_basis(cols: &CMatrix, rel_tol: f64, abs_floor: f64) -> CMatrix {
    let (n, k) = cols.shape();
    if n == 0 || k == 0 {
        return CMatrix::zeros(n, 0);
    }
    let d = svd(cols);
    let smax = d.values.first().copied().unwrap_or(0.0);
    let cut = (rel_tol * smax).max(abs_floor);
    let keep = d.values.iter().take_while(|&&s| s > cut).count();
    d.u.columns(0, keep).into_owned()
}

/// Orthonormal basis of the kernel of `m`, by singular-value threshold
/// `max(rel_tol * s_max, abs_floor)`. A matrix whose largest singular value
/// is below `abs_floor` is treated as zero.
pub fn kernel_basis(m: &CMatrix, rel_tol: f64, abs_floor: f64) -> CMatrix {
    let (rows, n) = m.shape();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return identity(n);
    }
    let d = svd(m);
    let smax = d.values.first().copied().unwrap_or(0.0);
    if smax <= abs_floor {
        return identity(n);
    }
    let cut = (rel_tol * smax).max(abs_floor);
    let keep = d.values.iter().take_while(|&&s| s > cut).count();
    orthogonal_complement(&d.v.columns(0, keep).into_owned(), n)
}

pub fn projector(basis: &CMatrix) -> CMatrix {
    basis * basis.adjoint()
}

/// Sine of the largest principal angle of span(`sub`) against span(`target`);
/// both arguments must have orthonormal columns. Zero when `sub` is empty.
pub fn max_principal_sine(sub: &CMatrix, target: &CMatrix) -> f64 {
    if sub.ncols() == 0 {
        return 0.0;
    }
    let residual = if target.ncols() == 0 {
        sub.clone()
    } else {
        sub - target * (target.adjoint() * sub)
    };
    op_norm(&residual).min(1.0)
}

/// Solves `a x = b` by pivoted LU. Refuses (rather than regularises) when the
/// factorisation is singular or the relative backward error exceeds `tol`.
pub fn solve_checked(a: &CMatrix, b: &CMatrix, z: C64, tol: f64) -> Result<CMatrix> {
    let lu = a.clone().lu();
    let x = lu.solve(b).ok_or_else(|| Error::NearSingular {
        z,
        detail: "LU factorisation has a zero pivot".into(),
    })?;
    let residual = (a * &x - b).norm();
    let scale = a.norm() * x.norm() + b.norm();
    if !residual.is_finite() || residual > tol * scale {
        return Err(Error::NearSingular {
            z,
            detail: format!("relative backward error {:e}", residual / scale),
        });
    }
    Ok(x)
}

pub fn is_exactly_hermitian(m: &CMatrix) -> Option<(usize, usize)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Some((0, 0));
    }
    for i in 0..n {
        for j in i..n {
            if m[(i, j)] != m[(j, i)].conj() {
                return Some((i, j));
            }
        }
    }
    None
}

/// Hermitian part `(m + m*)/2` and anti-Hermitian part `(m - m*)/(2i)`.
pub fn im_part(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()) / C64::new(0.0, 2.0)
}

pub fn diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A rank-one input on which nalgebra's complex SVD returns inconsistent factors.
    fn awkward_rank_one() -> (CMatrix, CMatrix) {
        let x = [
            0.20009627403916141,
            0.7760281211950448,
            -0.6749215802026303,
            0.5924285451032567,
            0.6897876823745395,
        ];
        let x = CMatrix::from_fn(5, 1, |i, _| c(x[i]));
        let m = &x * x.adjoint() * C64::new(1.0, 4.6707104183928877e-7);
        (m, &x / c(x.norm()))
    }

    #[test]
    fn svd_reconstructs_awkward_rank_one() {
        let (m, x) = awkward_rank_one();
        let d = svd(&m);
        assert!((&d.u * diag(&d.values) * d.v.adjoint() - &m).norm() < 1e-12 * m.norm());
        assert!((d.u.adjoint() * &d.u - identity(5)).norm() < 1e-12);
        assert!((d.v.adjoint() * &d.v - identity(5)).norm() < 1e-12);
        assert!(d.values.windows(2).all(|w| w[0] >= w[1]));
        let range = orthonormal_basis(&m, 0.0, 1e-8);
        assert_eq!(range.ncols(), 1);
        assert!(max_principal_sine(&range, &x) < 1e-12);
        let ker = kernel_basis(&m, 1e-8, 0.0);
        assert_eq!(ker.ncols(), 4);
        assert!((&m * &ker).norm() < 1e-12);
    }

    #[test]
    fn embedded_svd_matches_on_full_rank() {
        let m = CMatrix::from_fn(3, 2, |i, j| {
            C64::new((i + 2 * j) as f64, (i * j) as f64 - 0.5)
        });
        let a = svd(&m);
        let b = embedded_svd(&m);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((&b.u * diag(&b.values) * b.v.adjoint() - &m).norm() < 1e-12);
    }

    #[test]
    fn complement_is_orthogonal() {
        let q = orthonormal_basis(
            &CMatrix::from_fn(4, 2, |i, j| c((i * j + 1) as f64)),
            1e-12,
            0.0,
        );
        let r = orthogonal_complement(&q, 4);
        assert_eq!(r.ncols(), 2);
        assert!((q.adjoint() * &r).norm() < 1e-12);
    }

    #[test]
    fn clusters_by_consecutive_gap() {
        let cl = cluster_sorted(&[1.0, 1.0, 2.0], 1e-8);
        assert_eq!(cl, vec![vec![0, 1], vec![2]]);
        assert_eq!(max_cluster_size(&[], 1.0), 0);
    }

    #[test]
    fn single_linkage_chains() {
        let pts = [c(0.0), c(0.9), c(1.8), c(5.0)];
        let groups = single_linkage(&pts, 1.0);
        assert_eq!(groups, vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn kernel_of_rank_one() {
        let v = CMatrix::from_row_slice(2, 1, &[c(1.0), c(1.0)]);
        let m = &v * v.adjoint();
        let k = kernel_basis(&m, 1e-8, 1e-300);
        assert_eq!(k.ncols(), 1);
        assert!((k[(0, 0)] + k[(1, 0)]).norm() < 1e-12);
        let z = CMatrix::zeros(2, 2);
        assert_eq!(kernel_basis(&z, 1e-8, 1e-14).ncols(), 2);
    }

    #[test]
    fn phase_convention_makes_lead_positive() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), c(0.0)],
        );
        let (vals, vecs) = hermitian_eigen(&m);
        assert!((vals[0] + 1.0).abs() < 1e-12);
        for k in 0..2 {
            assert!(vecs[(0, k)].im.abs() < 1e-14 && vecs[(0, k)].re > 0.0);
        }
    }

    #[test]
    fn principal_sine_of_orthogonal_lines_is_one() {
        let e0 = CMatrix::from_row_slice(2, 1, &[c(1.0), c(0.0)]);
        let e1 = CMatrix::from_row_slice(2, 1, &[c(0.0), c(1.0)]);
        assert!((max_principal_sine(&e0, &e1) - 1.0).abs() < 1e-15);
        assert!(max_principal_sine(&e0, &e0) < 1e-15);
    }
}
