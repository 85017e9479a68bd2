//! Simplicity of `H_tau = Delta_{T_L} + sum_x t_x |x><x|` on rooted trees with
//! random boundary values, checked piece by piece: gaps, root amplitudes,
//! disjoint sibling spectra, pole count of the root Green function, the
//! non-vanishing of eigenvectors on the boundary and Feynman-Hellmann slopes.

mod canopy;

pub use canopy::{canopy_boundary_check, tree_continued_fraction, CanopyReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::operator_model::RootedTreeModel;
use crate::{CMatrix, CVector, C64};

pub type RootedTree = RootedTreeModel;

pub const DEFAULT_GAP_TOL: f64 = 1e-9;
pub const DEFAULT_AMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeTolerances {
    pub gap_tol: f64,
    pub amp_tol: f64,
}

impl Default for TreeTolerances {
    fn default() -> Self {
        TreeTolerances {
            gap_tol: DEFAULT_GAP_TOL,
            amp_tol: DEFAULT_AMP_TOL,
        }
    }
}

fn check_tau(tree: &RootedTree, tau: &[f64]) -> Result<()> {
    if tau.len() != tree.boundary.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} boundary values for {} boundary sites",
            tau.len(),
            tree.boundary.len()
        )));
    }
    if tau.iter().any(|t| !t.is_finite()) {
        return Err(Error::pre("boundary values must be finite"));
    }
    Ok(())
}

/// Potential on every vertex: `tau` on the boundary, zero elsewhere.
pub fn potential(tree: &RootedTree, tau: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; tree.vertex_count()];
    for (&x, &t) in tree.boundary.iter().zip(tau) {
        v[x] = t;
    }
    v
}

pub fn h_tau(tree: &RootedTree, tau: &[f64]) -> Result<CMatrix> {
    check_tau(tree, tau)?;
    let mut h = tree.operator.matrix().clone();
    for (&x, &t) in tree.boundary.iter().zip(tau) {
        h[(x, x)] += c(t);
    }
    Ok(h)
}

/// Vertices of the subtree below `v` (inclusive), preorder.
pub fn subtree(tree: &RootedTree, v: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        out.push(u);
        for &w in tree.children[u].iter().rev() {
            stack.push(w);
        }
    }
    out
}

fn principal(h: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])])
}

/// `<root, (H_tau - z)^{-1} root>` by the subtree recursion: a leaf gives
/// `1/(t_x - z)`, an internal vertex `1/(-z - sum over children)`.
pub fn tree_green_root(tree: &RootedTree, tau: &[f64], z: C64) -> Result<C64> {
    check_tau(tree, tau)?;
    if z.im == 0.0 {
        return Err(Error::pre("tree_green_root needs Im z != 0"));
    }
    let pot = potential(tree, tau);
    let mut value = vec![c(0.0); tree.vertex_count()];
    // Preorder numbering puts every child after its parent.
    for v in (0..tree.vertex_count()).rev() {
        let sum = tree.children[v].iter().fold(c(0.0), |a, &w| a + value[w]);
        let denom = c(pot[v]) - z - sum;
        if denom == c(0.0) {
            return Err(Error::RecursionPole { vertex: v });
        }
        value[v] = denom.inv();
    }
    Ok(value[0])
}

/// Root entry of the resolvent by a dense solve.
pub fn dense_green_root(tree: &RootedTree, tau: &[f64], z: C64) -> Result<C64> {
    let h = h_tau(tree, tau)?;
    let n = h.nrows();
    let mut rhs = CMatrix::zeros(n, 1);
    rhs[(0, 0)] = c(1.0);
    let (x, _) = crate::greens_function::resolvent_apply(&h, z, &rhs)?;
    Ok(x[(0, 0)])
}

fn min_gap(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimpleCheck {
    pub min_gap: f64,
    pub simple: bool,
}

pub fn check_simple(tree: &RootedTree, tau: &[f64], gap_tol: f64) -> Result<SimpleCheck> {
    let values = linalg::hermitian_eigenvalues(&h_tau(tree, tau)?);
    let gap = min_gap(&values);
    Ok(SimpleCheck {
        min_gap: gap,
        simple: gap > gap_tol,
    })
}

/// Smallest `|<psi_i, root>|` over normalised eigenvectors; needs a simple spectrum.
pub fn check_root_nonvanishing(tree: &RootedTree, tau: &[f64], tol: TreeTolerances) -> Result<f64> {
    let (values, vectors) = linalg::hermitian_eigen(&h_tau(tree, tau)?);
    let gap = min_gap(&values);
    if gap <= tol.gap_tol {
        return Err(Error::DegenerateSpectrum {
            gap,
            tol: tol.gap_tol,
        });
    }
    Ok((0..values.len())
        .map(|i| vectors[(0, i)].norm())
        .fold(f64::INFINITY, f64::min))
}

/// Minimal distance between the spectra of the root's subtrees.
pub fn check_sibling_disjoint(tree: &RootedTree, tau: &[f64]) -> Result<f64> {
    let h = h_tau(tree, tau)?;
    let spectra: Vec<Vec<f64>> = tree.children[0]
        .iter()
        .map(|&x| linalg::hermitian_eigenvalues(&principal(&h, &subtree(tree, x))))
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..spectra.len() {
        for j in (i + 1)..spectra.len() {
            for a in &spectra[i] {
                for b in &spectra[j] {
                    best = best.min((a - b).abs());
                }
            }
        }
    }
    Ok(best)
}

/// Number of distinct poles of the root Green function against the vertex count.
/// A pole counts when its root amplitude exceeds `amp_tol`, the same threshold
/// as the root-nonvanishing check, so its residue must exceed `amp_tol^2`.
pub fn count_poles(tree: &RootedTree, tau: &[f64], tol: TreeTolerances) -> Result<(usize, usize)> {
    let (values, vectors) = linalg::hermitian_eigen(&h_tau(tree, tau)?);
    let poles = linalg::cluster_sorted(&values, tol.gap_tol)
        .iter()
        .filter(|cl| {
            cl.iter().map(|&i| vectors[(0, i)].norm_sqr()).sum::<f64>() > tol.amp_tol * tol.amp_tol
        })
        .count();
    Ok((poles, tree.vertex_count()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PropagationVerdict {
    /// A boundary site where the eigenvector does not vanish.
    Witness { site: usize, amplitude: f64 },
    /// Zero boundary data forces the whole vector to vanish.
    Contradiction,
}

/// Rebuilds an eigenvector from its boundary values using `H psi = E psi`
/// one level at a time toward the root.
pub fn eliminate_from_boundary(
    tree: &RootedTree,
    tau: &[f64],
    energy: f64,
    boundary: &[C64],
) -> Result<Vec<C64>> {
    check_tau(tree, tau)?;
    if boundary.len() != tree.boundary.len() {
        return Err(Error::DimensionMismatch("boundary data length".into()));
    }
    let pot = potential(tree, tau);
    let n = tree.vertex_count();
    let mut psi = vec![c(0.0); n];
    let mut known = vec![false; n];
    for (&x, &v) in tree.boundary.iter().zip(boundary) {
        psi[x] = v;
        known[x] = true;
    }
    let mut depth = vec![0usize; n];
    for v in 1..n {
        depth[v] = depth[tree.parent[v].expect("non-root")] + 1;
    }
    for level in (1..=tree.depth).rev() {
        for v in (0..n).filter(|&v| depth[v] == level) {
            let p = tree.parent[v].expect("non-root");
            if known[p] {
                continue;
            }
            // Row v: psi_parent + pot_v psi_v + sum_children psi_w = E psi_v.
            let kids = tree.children[v].iter().fold(c(0.0), |a, &w| a + psi[w]);
            psi[p] = c(energy - pot[v]) * psi[v] - kids;
            known[p] = true;
        }
    }
    Ok(psi)
}

pub fn zero_boundary_propagation(
    tree: &RootedTree,
    tau: &[f64],
    psi: &CVector,
    energy: f64,
    amp_tol: f64,
) -> Result<PropagationVerdict> {
    let h = h_tau(tree, tau)?;
    if psi.len() != h.nrows() {
        return Err(Error::DimensionMismatch("eigenvector length".into()));
    }
    let residual = (&h * psi - psi * c(energy)).norm();
    let norm_defect = (psi.norm() - 1.0).abs();
    if residual > 1e-10 || norm_defect > 1e-10 {
        return Err(Error::NotEigenpair {
            residual: residual.max(norm_defect),
        });
    }
    if let Some(&x) = tree.boundary.iter().find(|&&x| psi[x].norm() > amp_tol) {
        return Ok(PropagationVerdict::Witness {
            site: x,
            amplitude: psi[x].norm(),
        });
    }
    let zeros = vec![c(0.0); tree.boundary.len()];
    let rebuilt = eliminate_from_boundary(tree, tau, energy, &zeros)?;
    debug_assert!(rebuilt.iter().all(|v| *v == c(0.0)));
    Ok(PropagationVerdict::Contradiction)
}

fn perturbed_tau(tau: &[f64], slot: usize, delta: f64) -> Vec<f64> {
    let mut t = tau.to_vec();
    t[slot] += delta;
    t
}

/// Eigenvalues of `H` at shifted `tau`, relabelled to follow the reference
/// eigenvectors by maximal overlap (ties broken by sorted order).
fn tracked_eigenvalues(tree: &RootedTree, tau: &[f64], reference: &CMatrix) -> Result<Vec<f64>> {
    let (values, vectors) = linalg::hermitian_eigen(&h_tau(tree, tau)?);
    let overlaps = reference.adjoint() * &vectors;
    let n = values.len();
    let mut taken = vec![false; n];
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut best = i;
        let mut best_val = -1.0;
        for j in 0..n {
            let o = overlaps[(i, j)].norm();
            if o > best_val + 1e-12 || ((o - best_val).abs() <= 1e-12 && j == i) {
                best = j;
                best_val = o;
            }
        }
        if taken[best] || best_val < 0.5 {
            return Err(Error::TrackingFailure(format!(
                "eigenvalue {i} has no unambiguous partner (overlap {best_val:.3})"
            )));
        }
        taken[best] = true;
        out[i] = values[best];
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeynmanHellmannReport {
    pub site: usize,
    pub h: f64,
    pub max_residual: f64,
    pub worst_index: usize,
    /// Per-eigenvalue `|finite difference - |psi_i(x)|^2|`.
    pub residuals: Vec<f64>,
    /// Sum over eigenvalues of the squared amplitudes at the site (equals 1).
    pub amplitude_sum: f64,
    /// Per-eigenvalue truncation estimate `C_i h^2 = |D(2h) - D(h)| / 3`, with
    /// `D` the central difference.
    pub error_estimates: Vec<f64>,
    /// Every residual is at most `max(FH_FLOOR, 2 C_i h^2)`.
    pub within_bound: bool,
}

/// Absolute residual always accepted by the Feynman-Hellmann check.
pub const FH_FLOOR: f64 = 1e-6;

/// Central difference of every eigenvalue in `t_x` against `|psi_i(x)|^2`.
pub fn feynman_hellmann_check(
    tree: &RootedTree,
    tau: &[f64],
    site: usize,
    h: f64,
    gap_tol: f64,
) -> Result<FeynmanHellmannReport> {
    let slot = tree
        .boundary
        .iter()
        .position(|&x| x == site)
        .ok_or_else(|| Error::pre(format!("site {site} is not a boundary site")))?;
    let (values, vectors) = linalg::hermitian_eigen(&h_tau(tree, tau)?);
    let gap = min_gap(&values);
    if gap <= gap_tol {
        return Err(Error::DegenerateSpectrum { gap, tol: gap_tol });
    }
    if !(h > 0.0) || h > gap / 10.0 {
        return Err(Error::pre(format!(
            "step {h:e} must lie in (0, gap/10] with gap {gap:e}"
        )));
    }
    let plus = tracked_eigenvalues(tree, &perturbed_tau(tau, slot, h), &vectors)?;
    let minus = tracked_eigenvalues(tree, &perturbed_tau(tau, slot, -h), &vectors)?;
    let plus2 = tracked_eigenvalues(tree, &perturbed_tau(tau, slot, 2.0 * h), &vectors)?;
    let minus2 = tracked_eigenvalues(tree, &perturbed_tau(tau, slot, -2.0 * h), &vectors)?;
    let central: Vec<f64> = (0..values.len())
        .map(|i| (plus[i] - minus[i]) / (2.0 * h))
        .collect();
    let residuals: Vec<f64> = (0..values.len())
        .map(|i| (central[i] - vectors[(site, i)].norm_sqr()).abs())
        .collect();
    let error_estimates: Vec<f64> = (0..values.len())
        .map(|i| ((plus2[i] - minus2[i]) / (4.0 * h) - central[i]).abs() / 3.0)
        .collect();
    let within_bound = residuals
        .iter()
        .zip(&error_estimates)
        .all(|(r, e)| *r <= FH_FLOOR.max(2.0 * e));
    let (worst_index, max_residual) = residuals
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    Ok(FeynmanHellmannReport {
        site,
        h,
        max_residual,
        worst_index,
        amplitude_sum: (0..values.len())
            .map(|i| vectors[(site, i)].norm_sqr())
            .sum(),
        residuals,
        error_estimates,
        within_bound,
    })
}

/// Ratio of the residual of the worst eigenvalue at `h` to the same eigenvalue's residual at `h/2`.
pub fn feynman_hellmann_order(
    tree: &RootedTree,
    tau: &[f64],
    site: usize,
    h: f64,
    gap_tol: f64,
) -> Result<(f64, FeynmanHellmannReport, FeynmanHellmannReport)> {
    let coarse = feynman_hellmann_check(tree, tau, site, h, gap_tol)?;
    let fine = feynman_hellmann_check(tree, tau, site, h / 2.0, gap_tol)?;
    let i = coarse.worst_index;
    Ok((coarse.residuals[i] / fine.residuals[i], coarse, fine))
}

/// Per-sample verdicts of the simplicity checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplicityReport {
    pub min_gap: f64,
    pub min_root_amplitude: f64,
    pub sibling_min_separation: f64,
    pub pole_count: usize,
    pub expected_pole_count: usize,
    pub fh_max_residual: Option<f64>,
    pub simple: bool,
    pub root_nonvanishing: bool,
    pub siblings_disjoint: bool,
    pub poles_match: bool,
    pub verdict: bool,
}

/// All four checks at once. A degenerate eigenspace always contains a vector
/// orthogonal to the root, so its root amplitude is reported as zero.
pub fn simplicity_report(
    tree: &RootedTree,
    tau: &[f64],
    tol: TreeTolerances,
) -> Result<SimplicityReport> {
    let s = check_simple(tree, tau, tol.gap_tol)?;
    let amp = if s.simple {
        check_root_nonvanishing(tree, tau, tol)?
    } else {
        0.0
    };
    let sep = check_sibling_disjoint(tree, tau)?;
    let (poles, expected) = count_poles(tree, tau, tol)?;
    let root_nonvanishing = amp > tol.amp_tol;
    let siblings_disjoint = sep > tol.gap_tol;
    let poles_match = poles == expected;
    Ok(SimplicityReport {
        min_gap: s.min_gap,
        min_root_amplitude: amp,
        sibling_min_separation: sep,
        pole_count: poles,
        expected_pole_count: expected,
        fh_max_residual: None,
        simple: s.simple,
        root_nonvanishing,
        siblings_disjoint,
        poles_match,
        verdict: s.simple && root_nonvanishing && siblings_disjoint && poles_match,
    })
}

/// Boundary values `tau ~ U(0,1)` for sample `index` under `seed`.
pub fn sample_tau(tree: &RootedTree, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let u = Uniform::new(0.0, 1.0).expect("valid interval");
    (0..tree.boundary.len())
        .map(|_| u.sample(&mut rng))
        .collect()
}

/// Reports for `samples` seeded boundary draws, in sample order.
pub fn simplicity_ensemble(
    tree: &RootedTree,
    samples: usize,
    seed: u64,
    tol: TreeTolerances,
) -> Result<Vec<SimplicityReport>> {
    (0..samples as u64)
        .into_par_iter()
        .map(|i| simplicity_report(tree, &sample_tau(tree, seed, i), tol))
        .collect()
}

/// Minimal distance between the spectra of `H_tau` and `H_omega` on the same tree.
pub fn cross_spectrum_distance(tree: &RootedTree, tau: &[f64], omega: &[f64]) -> Result<f64> {
    let a = linalg::hermitian_eigenvalues(&h_tau(tree, tau)?);
    let b = linalg::hermitian_eigenvalues(&h_tau(tree, omega)?);
    Ok(a.iter()
        .flat_map(|x| b.iter().map(move |y| (x - y).abs()))
        .fold(f64::INFINITY, f64::min))
}
