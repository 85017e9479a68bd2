//! Tolerance-free multiplicity at a rational real energy: Bareiss elimination,
//! Faddeev-LeVerrier characteristic polynomial and Yun's square-free decomposition.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::operator_model::{HermitianOperator, ModelInstance, PerturbationBlock};
use crate::CMatrix;

use super::{Method, MultiplicityEstimate, Witness};

type Q = BigRational;
type QPoly = Vec<Q>;

/// Exact value of a finite float.
pub fn rational_from_f64(x: f64) -> Result<Q> {
    Q::from_float(x).ok_or_else(|| Error::NotReal(format!("{x} is not finite")))
}

fn real_matrix(m: &CMatrix, what: &str) -> Result<Vec<Vec<Q>>> {
    let mut out = Vec::with_capacity(m.nrows());
    for i in 0..m.nrows() {
        let mut row = Vec::with_capacity(m.ncols());
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v.im != 0.0 {
                return Err(Error::NotReal(format!(
                    "{what}[{i}][{j}] has imaginary part {}",
                    v.im
                )));
            }
            row.push(rational_from_f64(v.re)?);
        }
        out.push(row);
    }
    Ok(out)
}

/// Solves `h x = rhs` exactly. Rows are scaled to integers, eliminated
/// fraction-free, then back-substituted. `None` when `h` is singular.
fn bareiss_solve(h: &[Vec<Q>], rhs: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = h.len();
    let w = rhs.first().map_or(0, Vec::len);
    let mut a: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            let lcm = h[i]
                .iter()
                .chain(rhs[i].iter())
                .fold(BigInt::one(), |l, q| l.lcm(q.denom()));
            h[i].iter()
                .chain(rhs[i].iter())
                .map(|q| (q * Q::from_integer(lcm.clone())).to_integer())
                .collect()
        })
        .collect();
    let mut prev = BigInt::one();
    for k in 0..n {
        let piv = (k..n).find(|&i| !a[i][k].is_zero())?;
        a.swap(k, piv);
        for i in (k + 1)..n {
            for j in (k + 1)..(n + w) {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
            a[i][k] = BigInt::zero();
        }
        prev = a[k][k].clone();
    }
    let mut x = vec![vec![Q::zero(); w]; n];
    for col in 0..w {
        for i in (0..n).rev() {
            let mut acc = Q::from_integer(a[i][n + col].clone());
            for j in (i + 1)..n {
                acc -= Q::from_integer(a[i][j].clone()) * &x[j][col];
            }
            x[i][col] = acc / Q::from_integer(a[i][i].clone());
        }
    }
    Some(x)
}

fn rank(m: &[Vec<Q>]) -> usize {
    let mut a: Vec<Vec<Q>> = m.to_vec();
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        for i in (r + 1)..rows {
            if !a[i][c].is_zero() {
                let f = &a[i][c] / &a[r][c];
                for j in c..cols {
                    let t = &f * &a[r][j];
                    a[i][j] -= t;
                }
            }
        }
        r += 1;
    }
    r
}

fn matmul(a: &[Vec<Q>], b: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let inner = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..inner).fold(Q::zero(), |acc, k| acc + &a[i][k] * &b[k][j]))
                .collect()
        })
        .collect()
}

/// Coefficients of `det(x I - m)`, ascending, by Faddeev-LeVerrier.
fn char_poly_monic(m: &[Vec<Q>]) -> QPoly {
    let n = m.len();
    let mut coeffs = vec![Q::zero(); n + 1];
    coeffs[n] = Q::one();
    let mut mk: Vec<Vec<Q>> = vec![vec![Q::zero(); n]; n];
    for k in 1..=n {
        // M_k = M (M_{k-1} + c_{n-k+1} I)
        let mut shifted = mk.clone();
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] += &coeffs[n - k + 1];
        }
        mk = matmul(m, &shifted);
        let trace = (0..n).fold(Q::zero(), |acc, i| acc + &mk[i][i]);
        coeffs[n - k] = -trace / Q::from_integer(BigInt::from(k));
    }
    coeffs
}

fn p_trim(mut p: QPoly) -> QPoly {
    while p.len() > 1 && p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    if p.is_empty() {
        p.push(Q::zero());
    }
    p
}

fn p_deg(p: &QPoly) -> usize {
    p.len() - 1
}

fn p_is_zero(p: &QPoly) -> bool {
    p.iter().all(Zero::is_zero)
}

fn p_monic(p: &QPoly) -> QPoly {
    let lead = p.last().expect("non-empty").clone();
    if lead.is_zero() {
        return p.clone();
    }
    p.iter().map(|a| a / &lead).collect()
}

fn p_deriv(p: &QPoly) -> QPoly {
    if p.len() <= 1 {
        return vec![Q::zero()];
    }
    p_trim(
        p.iter()
            .enumerate()
            .skip(1)
            .map(|(i, a)| a * Q::from_integer(BigInt::from(i)))
            .collect(),
    )
}

fn p_sub(a: &QPoly, b: &QPoly) -> QPoly {
    let n = a.len().max(b.len());
    p_trim(
        (0..n)
            .map(|i| {
                a.get(i).cloned().unwrap_or_else(Q::zero)
                    - b.get(i).cloned().unwrap_or_else(Q::zero)
            })
            .collect(),
    )
}

fn p_divrem(a: &QPoly, b: &QPoly) -> (QPoly, QPoly) {
    let b = p_trim(b.clone());
    let db = p_deg(&b);
    let lead = b[db].clone();
    let mut r = p_trim(a.clone());
    if r.len() <= db {
        return (vec![Q::zero()], r);
    }
    let mut q = vec![Q::zero(); r.len() - db];
    while r.len() > db {
        let top = r.len() - 1;
        let f = &r[top] / &lead;
        for i in 0..=db {
            let t = &f * &b[i];
            r[top - db + i] -= t;
        }
        q[top - db] = f;
        r.pop();
    }
    (p_trim(q), p_trim(r))
}

fn p_gcd(a: &QPoly, b: &QPoly) -> QPoly {
    let (mut a, mut b) = (p_trim(a.clone()), p_trim(b.clone()));
    while !p_is_zero(&b) {
        let (_, r) = p_divrem(&a, &b);
        a = b;
        b = r;
    }
    p_monic(&a)
}

/// Degrees of the square-free factors `a_1, a_2, ...` with `f = prod a_i^i` (Yun).
fn squarefree_degrees(f: &QPoly) -> Vec<usize> {
    let f = p_monic(&p_trim(f.clone()));
    if p_deg(&f) == 0 {
        return Vec::new();
    }
    let fp = p_deriv(&f);
    let a0 = p_gcd(&f, &fp);
    let mut b = p_divrem(&f, &a0).0;
    let c = p_divrem(&fp, &a0).0;
    let mut d = p_sub(&c, &p_deriv(&b));
    let mut degrees = Vec::new();
    while p_deg(&b) > 0 {
        let a = p_gcd(&b, &d);
        let nb = p_divrem(&b, &a).0;
        let nc = p_divrem(&d, &a).0;
        d = p_sub(&nc, &p_deriv(&nb));
        b = nb;
        degrees.push(p_deg(&a));
    }
    degrees
}

/// Exact multiplicity of the roots of `det(C_n G_nn(E) - x I)` for rational
/// `A`, `C`, `omega` and `E`.
pub fn mult_exact_rational(
    a: &HermitianOperator,
    blocks: &[PerturbationBlock],
    omega: &[Q],
    energy: &Q,
    n: usize,
) -> Result<MultiplicityEstimate> {
    if omega.len() != blocks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} disorder values for {} blocks",
            omega.len(),
            blocks.len()
        )));
    }
    let block = blocks
        .get(n)
        .ok_or_else(|| Error::pre(format!("block index {n} out of range")))?;
    let dim = a.dim();
    let mut h = real_matrix(a.matrix(), "A")?;
    for (b, w) in blocks.iter().zip(omega) {
        let c = real_matrix(b.c(), &format!("C_{}", b.index))?;
        for (p, &i) in b.support().iter().enumerate() {
            for (q, &j) in b.support().iter().enumerate() {
                if i >= dim || j >= dim {
                    return Err(Error::DimensionMismatch(format!(
                        "block {} leaves the site space",
                        b.index
                    )));
                }
                h[i][j] += &c[p][q] * w;
            }
        }
    }
    for (i, row) in h.iter_mut().enumerate() {
        row[i] -= energy;
    }
    let support = block.support();
    let r = support.len();
    let mut rhs = vec![vec![Q::zero(); r]; dim];
    for (k, &s) in support.iter().enumerate() {
        rhs[s][k] = Q::one();
    }
    let x = bareiss_solve(&h, &rhs).ok_or_else(|| Error::SpectralPoint(energy.to_string()))?;
    let g: Vec<Vec<Q>> = support.iter().map(|&s| x[s].clone()).collect();
    let c = real_matrix(block.c(), "C")?;
    let rk = rank(&c);
    let cp = char_poly_monic(&matmul(&c, &g));
    // The r - rank extra roots at zero come from the kernel of C.
    let reduced = p_trim(cp[(r - rk)..].to_vec());
    let degrees = squarefree_degrees(&reduced);
    let k = degrees
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 0)
        .map(|(i, _)| i + 1)
        .max()
        .unwrap_or(0);
    debug_assert!(cp[..(r - rk)].iter().all(|q| q.is_zero()) || rk == r);
    if k == 0 {
        return Err(Error::pre("block has rank zero"));
    }
    Ok(MultiplicityEstimate {
        k,
        method: Method::ExactRational,
        tol: 0.0,
        certified: true,
        witnesses: Witness::Exponents(degrees),
    })
}

/// Exact path on the rational values of a float model at float energy `E`.
pub fn mult_exact_rational_f64(
    model: &ModelInstance,
    n: usize,
    energy: f64,
) -> Result<MultiplicityEstimate> {
    let omega = model
        .omega
        .iter()
        .map(|&w| rational_from_f64(w))
        .collect::<Result<Vec<_>>>()?;
    mult_exact_rational(
        &model.a,
        &model.blocks,
        &omega,
        &rational_from_f64(energy)?,
        n,
    )
}
