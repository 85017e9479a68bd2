//! Dense complex polynomials, coefficients in ascending order.

use crate::linalg;
use crate::{CMatrix, C64};

pub(crate) fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn eval(coeffs: &[C64], x: C64) -> C64 {
    coeffs.iter().rev().fold(zero(), |acc, &a| acc * x + a)
}

pub fn derivative(coeffs: &[C64]) -> Vec<C64> {
    if coeffs.len() <= 1 {
        return vec![zero()];
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &a)| a * i as f64)
        .collect()
}

/// Degree after dropping exact trailing zeros; the zero polynomial has degree 0.
pub fn degree(coeffs: &[C64]) -> usize {
    coeffs.iter().rposition(|a| *a != zero()).unwrap_or(0)
}

pub fn coeff_norm(coeffs: &[C64]) -> f64 {
    coeffs.iter().fold(0.0f64, |a, c| a.max(c.norm()))
}

/// `lead * prod (x - r_i)`.
pub fn from_roots(roots: &[C64], lead: C64) -> Vec<C64> {
    let mut p = vec![lead];
    for &r in roots {
        let mut next = vec![zero(); p.len() + 1];
        for (i, &a) in p.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        p = next;
    }
    p
}

/// Roots from the eigenvalues of the companion matrix.
pub fn companion_roots(coeffs: &[C64]) -> Vec<C64> {
    let d = degree(coeffs);
    if d == 0 {
        return Vec::new();
    }
    let lead = coeffs[d];
    let mut m = CMatrix::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..d {
        m[(i, d - 1)] = -coeffs[i] / lead;
    }
    linalg::complex_eigenvalues(&m)
}

/// Taylor coefficients `p^{(j)}(c)/j!` together with the matching
/// magnitude scales `sum_i |a_i| binom(i, j) |c|^{i-j}`.
pub fn taylor_at(coeffs: &[C64], c: C64) -> (Vec<C64>, Vec<f64>) {
    let n = coeffs.len();
    let mut t = coeffs.to_vec();
    let mut s: Vec<f64> = coeffs.iter().map(|a| a.norm()).collect();
    let cn = c.norm();
    // Repeated synthetic division by (x - c).
    for j in 0..n {
        for i in (j..n - 1).rev() {
            let carry = t[i + 1];
            t[i] += carry * c;
            let carry_s = s[i + 1];
            s[i] += carry_s * cn;
        }
    }
    (t, s)
}

/// Remainder of `a` divided by `b` (the divisor's leading coefficient must be non-zero).
pub fn rem(a: &[C64], b: &[C64]) -> Vec<C64> {
    let db = degree(b);
    if db == 0 {
        return vec![zero()];
    }
    let lead = b[db];
    let mut r: Vec<C64> = a[..=degree(a)].to_vec();
    while r.len() > db {
        let top = r.len() - 1;
        let q = r[top] / lead;
        for i in 0..=db {
            r[top - db + i] -= q * b[i];
        }
        r.pop();
    }
    r
}

/// Rescales to unit maximal coefficient modulus; the zero polynomial is unchanged.
pub fn normalized(coeffs: &[C64]) -> Vec<C64> {
    let n = coeff_norm(coeffs);
    if n == 0.0 {
        return coeffs.to_vec();
    }
    coeffs.iter().map(|a| a / n).collect()
}

/// Substitutes `x = s y`.
pub fn scale_variable(coeffs: &[C64], s: f64) -> Vec<C64> {
    let mut f = 1.0;
    coeffs
        .iter()
        .map(|&a| {
            let v = a * f;
            f *= s;
            v
        })
        .collect()
}
