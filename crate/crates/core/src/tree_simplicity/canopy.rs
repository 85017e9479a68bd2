use serde::Serialize;

use crate::error::{Error, Result};
use crate::greens_function::{resolvent_apply, schur_parts};
use crate::linalg::c;
use crate::operator_model::{CanopyLayout, ModelInstance};
use crate::{CMatrix, C64};

pub const DIAGONAL_TOL: f64 = 1e-10;
pub const FRACTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanopyReport {
    pub block: usize,
    pub z: (f64, f64),
    pub boundary_pairs: Vec<(usize, usize)>,
    /// Largest off-diagonal entry of the coupling in site coordinates.
    pub off_diagonal_max: f64,
    /// Largest `|G_{q1 q2}|` over outside neighbours in different components.
    pub cross_max: f64,
    /// Largest gap between the coupling diagonal and the continued fraction.
    pub fraction_max_diff: f64,
    /// Largest modulus of the part carried by forward pairs only.
    pub forward_coupling_max: f64,
    pub diagonal: bool,
    pub cross_zero: bool,
    pub fraction_match: bool,
    pub pass: bool,
}

/// `<q, (H restricted to the sites not excluded - z)^{-1} q>` for a forest,
/// by `1/(V_q - z - sum_w |h_qw|^2 branch(w, q))`.
pub fn tree_continued_fraction(h: &CMatrix, excluded: &[bool], q: usize, z: C64) -> Result<C64> {
    let n = h.nrows();
    if excluded.len() != n || q >= n || excluded[q] {
        return Err(Error::pre(
            "continued fraction start must be an included site",
        ));
    }
    let nbrs = |u: usize| (0..n).filter(move |&w| w != u && !excluded[w] && h[(u, w)] != c(0.0));
    // Depth-first order from q; every branch is evaluated after its subtree.
    let mut order = Vec::new();
    let mut from = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut stack = vec![q];
    seen[q] = true;
    while let Some(u) = stack.pop() {
        order.push(u);
        for w in nbrs(u) {
            if !seen[w] {
                seen[w] = true;
                from[w] = u;
                stack.push(w);
            } else if w != from[u] {
                return Err(Error::pre("continued fraction needs a forest"));
            }
        }
    }
    let mut value = vec![c(0.0); n];
    for &u in order.iter().rev() {
        let sum = nbrs(u)
            .filter(|&w| w != from[u])
            .fold(c(0.0), |a, w| a + value[w] * h[(u, w)].norm_sqr());
        let denom = h[(u, u)] - z - sum;
        if denom == c(0.0) {
            return Err(Error::RecursionPole { vertex: u });
        }
        value[u] = denom.inv();
    }
    Ok(value[q])
}

fn components(h: &CMatrix, excluded: &[bool]) -> Vec<usize> {
    let n = h.nrows();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if excluded[s] || comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = next;
        while let Some(u) = stack.pop() {
            for w in 0..n {
                if w != u && !excluded[w] && comp[w] == usize::MAX && h[(u, w)] != c(0.0) {
                    comp[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Checks that the coupling of block `n` to its exterior is diagonal, that
/// exterior Green entries across components vanish, and that each diagonal
/// entry equals `sum_q G_qq` over the exterior neighbours `q` of the site.
pub fn canopy_boundary_check(
    model: &ModelInstance,
    layout: &CanopyLayout,
    n: usize,
    z: C64,
) -> Result<CanopyReport> {
    if z.im == 0.0 {
        return Err(Error::pre("canopy check needs Im z != 0"));
    }
    let block = model.block(n)?;
    let dim = model.dim();
    let h = model.assembled.matrix();
    let basis = block.embedded_basis(dim);
    let sites: Vec<usize> = (0..basis.ncols())
        .map(|k| {
            (0..dim)
                .find(|&s| basis[(s, k)] == c(1.0))
                .ok_or_else(|| Error::pre("canopy blocks must be site indicators"))
        })
        .collect::<Result<_>>()?;
    let parts = schur_parts(model, n, z)?;
    let coupling = &parts.coupling;
    let r = sites.len();

    let mut off_diagonal_max = 0.0f64;
    for i in 0..r {
        for j in 0..r {
            if i != j {
                off_diagonal_max = off_diagonal_max.max(coupling[(i, j)].norm());
            }
        }
    }

    let mut excluded = vec![false; dim];
    for &s in block.support() {
        excluded[s] = true;
    }
    let pairs = layout.boundary_pairs(n);
    let mut outside: Vec<usize> = pairs.iter().map(|&(_, q)| q).collect();
    outside.sort_unstable();
    outside.dedup();

    let mut cross_max = 0.0f64;
    let mut g_diag = vec![c(0.0); dim];
    if !outside.is_empty() {
        let rest: Vec<usize> = (0..dim).filter(|&s| !excluded[s]).collect();
        let pos = |s: usize| rest.binary_search(&s).expect("exterior site");
        let h_rest = CMatrix::from_fn(rest.len(), rest.len(), |i, j| h[(rest[i], rest[j])]);
        let mut rhs = CMatrix::zeros(rest.len(), outside.len());
        for (k, &q) in outside.iter().enumerate() {
            rhs[(pos(q), k)] = c(1.0);
        }
        let (g, _) = resolvent_apply(&h_rest, z, &rhs)?;
        let comp = components(h, &excluded);
        for (k, &q) in outside.iter().enumerate() {
            g_diag[q] = g[(pos(q), k)];
            for &q2 in &outside {
                if comp[q2] != comp[q] {
                    cross_max = cross_max.max(g[(pos(q2), k)].norm());
                }
            }
        }
    }

    let mut fraction_max_diff = 0.0f64;
    let mut forward_coupling_max = 0.0f64;
    for (i, &p) in sites.iter().enumerate() {
        let mut expected = c(0.0);
        let mut forward = c(0.0);
        for &(pp, q) in &pairs {
            if pp != p {
                continue;
            }
            let cf = tree_continued_fraction(h, &excluded, q, z)?;
            expected += cf * h[(p, q)].norm_sqr();
            if layout.parent[q] == Some(p) {
                forward += g_diag[q] * h[(p, q)].norm_sqr();
            }
        }
        fraction_max_diff = fraction_max_diff.max((coupling[(i, i)] - expected).norm());
        forward_coupling_max = forward_coupling_max.max(forward.norm());
    }

    let diagonal = off_diagonal_max <= DIAGONAL_TOL;
    let cross_zero = cross_max == 0.0;
    let fraction_match = fraction_max_diff <= FRACTION_TOL;
    Ok(CanopyReport {
        block: n,
        z: (z.re, z.im),
        boundary_pairs: pairs,
        off_diagonal_max,
        cross_max,
        fraction_max_diff,
        forward_coupling_max,
        diagonal,
        cross_zero,
        fraction_match,
        pass: diagonal && cross_zero && fraction_match,
    })
}
