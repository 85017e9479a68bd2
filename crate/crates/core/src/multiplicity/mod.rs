//! Root multiplicity of `det(C_n G_nn(z) - x I)` by root clustering, by an
//! approximate gcd chain and by exact rational arithmetic, plus the bounds
//! that compare it with the observed spectral degeneracy.

mod ensemble;
mod exact;
mod gcd;
pub mod poly;

pub use ensemble::{estimate_m_n, halton_z_grid, MnReport, MnRow, ZException};
pub use exact::{mult_exact_rational, mult_exact_rational_f64, rational_from_f64};
pub use gcd::{mult_by_gcd, GcdChain, GcdStep};

use crate::error::{Error, Result};
use crate::greens_function::{green_block, GreenBlock};
use crate::linalg::{self, c};
use crate::operator_model::{ModelInstance, PerturbationBlock};
use crate::{CMatrix, C64};

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;
pub const DEFAULT_GCD_TOL: f64 = 1e-8;

/// Radii tried, relative to the root scale, when a polynomial carries no
/// root information and multiple roots must be recovered from coefficients.
const LOOSE_RADII: [f64; 6] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];
/// Backward-error level used to accept a coefficient-derived root cluster.
const TAYLOR_TOL: f64 = 256.0 * f64::EPSILON;

/// Characteristic polynomial `det(C G - x I)`, ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPoly {
    pub coeffs: Vec<C64>,
    /// Roots when known independently of the coefficients.
    pub roots: Option<Vec<C64>>,
    /// Coefficient mismatch against `det(sqrt(C) G sqrt(C) - x I)`, when checked.
    pub similarity_defect: Option<f64>,
}

impl CharPoly {
    /// `(-1)^l prod (x - r_i)`, keeping the roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let lead = if roots.len().is_multiple_of(2) {
            c(1.0)
        } else {
            c(-1.0)
        };
        CharPoly {
            coeffs: poly::from_roots(roots, lead),
            roots: Some(roots.to_vec()),
            similarity_defect: None,
        }
    }

    pub fn from_coeffs(coeffs: Vec<C64>) -> Self {
        CharPoly {
            coeffs,
            roots: None,
            similarity_defect: None,
        }
    }

    pub fn degree(&self) -> usize {
        poly::degree(&self.coeffs)
    }

    pub fn eval(&self, x: C64) -> C64 {
        poly::eval(&self.coeffs, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Clustering,
    ApproxGcd,
    ExactRational,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Clustering => "cluster",
            Method::ApproxGcd => "gcd",
            Method::ExactRational => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// Root clusters found at the working radius.
    Clusters(Vec<Vec<C64>>),
    /// Degrees of the gcd chain `h_0, h_1, ...`.
    ChainDegrees(Vec<usize>),
    /// Square-free decomposition: degree of the factor of each exponent `1, 2, ...`.
    Exponents(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicityEstimate {
    pub k: usize,
    pub method: Method,
    pub tol: f64,
    pub certified: bool,
    pub witnesses: Witness,
}

/// `det(C_n G - x I)` from the eigenvalues of `C_n G` in the block basis,
/// with the similarity check against `sqrt(C_n) G sqrt(C_n)`.
pub fn char_poly(block: &PerturbationBlock, g: &GreenBlock) -> Result<CharPoly> {
    if g.n != g.m || g.n != block.index {
        return Err(Error::pre(format!(
            "char_poly needs the diagonal block {} but got ({}, {})",
            block.index, g.n, g.m
        )));
    }
    let r = block.rank();
    if g.matrix.nrows() != r || g.matrix.ncols() != r {
        return Err(Error::DimensionMismatch(format!(
            "Green block is {}x{} for a block of rank {r}",
            g.matrix.nrows(),
            g.matrix.ncols()
        )));
    }
    let product = block.c_in_basis() * &g.matrix;
    let roots = linalg::complex_eigenvalues(&product);
    let mut cp = CharPoly::from_roots(&roots);
    let sqrt_c = linalg::diag(
        &block
            .strengths()
            .iter()
            .map(|s| s.sqrt())
            .collect::<Vec<_>>(),
    );
    let symmetric = &sqrt_c * &g.matrix * &sqrt_c;
    let other = CharPoly::from_roots(&linalg::complex_eigenvalues(&symmetric));
    let scale = poly::coeff_norm(&cp.coeffs).max(1.0);
    let defect = cp
        .coeffs
        .iter()
        .zip(&other.coeffs)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / scale;
    cp.similarity_defect = Some(defect);
    Ok(cp)
}

fn root_scale(roots: &[C64]) -> f64 {
    let s = roots.iter().fold(0.0f64, |a, r| a.max(r.norm()));
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

fn clusters_of(roots: &[C64], radius: f64) -> Vec<Vec<C64>> {
    linalg::single_linkage(roots, radius)
        .into_iter()
        .map(|g| g.into_iter().map(|i| roots[i]).collect())
        .collect()
}

/// A cluster is accepted when the Taylor coefficients below its size vanish at
/// the centroid to backward-error level.
fn taylor_verified(coeffs: &[C64], cluster: &[C64]) -> bool {
    if cluster.len() < 2 {
        return true;
    }
    let centroid = cluster.iter().fold(c(0.0), |a, r| a + r) / cluster.len() as f64;
    let (t, s) = poly::taylor_at(coeffs, centroid);
    (0..cluster.len()).all(|j| t[j].norm() <= TAYLOR_TOL * s[j].max(f64::MIN_POSITIVE))
}

/// Roots of a coefficient-only polynomial grouped into verified clusters.
fn coefficient_clusters(coeffs: &[C64], roots: &[C64], radius: f64) -> Vec<Vec<C64>> {
    let scale = root_scale(roots);
    let mut pending: Vec<Vec<C64>> = vec![roots.to_vec()];
    let mut done = Vec::new();
    for &rel in LOOSE_RADII.iter() {
        let r = rel * scale;
        if r <= radius {
            break;
        }
        let mut next = Vec::new();
        for group in pending {
            for cl in clusters_of(&group, r) {
                if cl.len() == 1 || taylor_verified(coeffs, &cl) {
                    done.push(cl);
                } else {
                    next.push(cl);
                }
            }
        }
        pending = next;
    }
    for group in pending {
        done.extend(clusters_of(&group, radius));
    }
    done
}

/// Largest root cluster under single linkage at radius `cluster_tol * max|root|`.
pub fn mult_by_clustering(p: &CharPoly, cluster_tol: f64) -> Result<MultiplicityEstimate> {
    if !(cluster_tol > 0.0) {
        return Err(Error::pre("cluster_tol must be positive"));
    }
    if p.degree() == 0 {
        return Err(Error::pre("multiplicity needs a polynomial of degree >= 1"));
    }
    let (roots, from_coeffs) = match &p.roots {
        Some(r) => (r.clone(), false),
        None => (poly::companion_roots(&p.coeffs), true),
    };
    let radius = cluster_tol * root_scale(&roots);
    let clusters = if from_coeffs {
        coefficient_clusters(&p.coeffs, &roots, radius)
    } else {
        clusters_of(&roots, radius)
    };
    let k = clusters.iter().map(Vec::len).max().unwrap_or(1);
    // Ambiguous when two clusters sit within a few radii of each other.
    let certified = clusters.iter().enumerate().all(|(i, a)| {
        clusters.iter().skip(i + 1).all(|b| {
            a.iter()
                .all(|x| b.iter().all(|y| (x - y).norm() > 10.0 * radius))
        })
    });
    Ok(MultiplicityEstimate {
        k,
        method: Method::Clustering,
        tol: cluster_tol,
        certified,
        witnesses: Witness::Clusters(clusters),
    })
}

/// Multiplicity at `z` by clustering the eigenvalues of `C_n G_nn(z)`.
pub fn mult_at(
    model: &ModelInstance,
    n: usize,
    z: C64,
    cluster_tol: f64,
) -> Result<MultiplicityEstimate> {
    let g = green_block(model, n, n, z)?;
    mult_by_clustering(&char_poly(model.block(n)?, &g)?, cluster_tol)
}

/// Maximal eigenvalue multiplicity on the block range of `C_n A C_n` (projection
/// blocks) or of `C_n` itself (otherwise).
pub fn corollary_bound(model: &ModelInstance, n: usize) -> Result<usize> {
    let block = model.block(n)?;
    let values = if block.is_projection() {
        let b = block.embedded_basis(model.dim());
        let local = b.adjoint() * model.a.matrix() * &b;
        linalg::hermitian_eigenvalues(&local)
    } else {
        let mut v = block.strengths().to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let radius = DEFAULT_CLUSTER_TOL * if scale > 0.0 { scale } else { 1.0 };
    Ok(linalg::max_cluster_size(&values, radius))
}

/// Largest eigenvalue cluster of the assembled operator, consecutive gaps at
/// most `cluster_tol * max(||A^omega||, 1)`.
pub fn global_degeneracy(model: &ModelInstance, cluster_tol: f64) -> usize {
    linalg::max_cluster_size(model.spectrum(), cluster_tol * model.norm().max(1.0))
}

/// Multiplicity of the Hermitian matrix `sqrt(C_n) G_nn(E) sqrt(C_n)` at real `E`.
pub fn real_e_mult(
    model: &ModelInstance,
    n: usize,
    energy: f64,
    cluster_tol: f64,
) -> Result<MultiplicityEstimate> {
    let dist = model.distance_to_spectrum(c(energy));
    if dist < 1e-6 {
        return Err(Error::TooCloseToSpectrum {
            energy,
            distance: dist,
        });
    }
    let block = model.block(n)?;
    let g = green_block(model, n, n, c(energy))?;
    let sqrt_c = linalg::diag(
        &block
            .strengths()
            .iter()
            .map(|s| s.sqrt())
            .collect::<Vec<_>>(),
    );
    let m = &sqrt_c * &g.matrix * &sqrt_c;
    let herm: CMatrix = (&m + m.adjoint()) * c(0.5);
    let values = linalg::hermitian_eigenvalues(&herm);
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let radius = cluster_tol * if scale > 0.0 { scale } else { 1.0 };
    let groups = linalg::cluster_sorted(&values, radius);
    let k = groups.iter().map(Vec::len).max().unwrap_or(1);
    let clusters = groups
        .iter()
        .map(|g| g.iter().map(|&i| c(values[i])).collect())
        .collect();
    Ok(MultiplicityEstimate {
        k,
        method: Method::Clustering,
        tol: cluster_tol,
        certified: true,
        witnesses: Witness::Clusters(clusters),
    })
}
