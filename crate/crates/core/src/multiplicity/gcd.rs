//! Euclid remainder sequences on floating-point polynomials.

use crate::error::{Error, Result};
use crate::C64;

use super::poly;
use super::{CharPoly, Method, MultiplicityEstimate, Witness};

/// One division in a remainder sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct GcdStep {
    pub dividend_degree: usize,
    pub divisor_degree: usize,
    /// Remainder coefficient norm relative to the (normalised) dividend.
    pub remainder_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcdChain {
    /// Variable scaling `x = s y` applied before the chain.
    pub scale: f64,
    /// `g, g', g'', ...` in the scaled variable.
    pub derivatives: Vec<Vec<C64>>,
    /// `h_0 = g, h_j = gcd(h_{j-1}, g^{(j)})`.
    pub gcds: Vec<Vec<C64>>,
    pub degrees: Vec<usize>,
    pub steps: Vec<Vec<GcdStep>>,
    pub certified: bool,
}

/// Root magnitude bound `max_i |a_i / a_d|^{1/(d-i)}`, used to balance coefficients.
fn magnitude_scale(coeffs: &[C64]) -> f64 {
    let d = poly::degree(coeffs);
    let lead = coeffs[d].norm();
    let s = (0..d)
        .filter(|&i| coeffs[i].norm() > 0.0)
        .map(|i| (coeffs[i].norm() / lead).powf(1.0 / (d - i) as f64))
        .fold(0.0f64, f64::max);
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

fn trim(mut p: Vec<C64>) -> Vec<C64> {
    let d = poly::degree(&p);
    p.truncate(d + 1);
    p
}

/// Approximate gcd of two normalised polynomials.
fn approx_gcd(
    a: &[C64],
    b: &[C64],
    tol: f64,
    steps: &mut Vec<GcdStep>,
    uncertain: &mut bool,
) -> Vec<C64> {
    let (mut a, mut b) = (
        poly::normalized(&trim(a.to_vec())),
        poly::normalized(&trim(b.to_vec())),
    );
    if poly::degree(&a) < poly::degree(&b) {
        std::mem::swap(&mut a, &mut b);
    }
    loop {
        if poly::degree(&b) == 0 {
            return vec![C64::new(1.0, 0.0)];
        }
        let r = poly::rem(&a, &b);
        let rn = poly::coeff_norm(&r) / poly::coeff_norm(&a).max(f64::MIN_POSITIVE);
        steps.push(GcdStep {
            dividend_degree: poly::degree(&a),
            divisor_degree: poly::degree(&b),
            remainder_norm: rn,
        });
        if rn > 0.0 && rn > tol / 10.0 && rn < tol * 10.0 {
            *uncertain = true;
        }
        if rn <= tol {
            return b;
        }
        a = b;
        b = poly::normalized(&trim(r));
    }
}

/// `k` is the first `j` at which `gcd(g, g', ..., g^{(j)})` is constant.
pub fn mult_by_gcd(p: &CharPoly, gcd_tol: f64) -> Result<(MultiplicityEstimate, GcdChain)> {
    if !(gcd_tol > 0.0) {
        return Err(Error::pre("gcd_tol must be positive"));
    }
    let d = p.degree();
    if d == 0 {
        return Err(Error::pre("multiplicity needs a polynomial of degree >= 1"));
    }
    let scale = magnitude_scale(&p.coeffs[..=d]);
    let g = poly::normalized(&poly::scale_variable(&p.coeffs[..=d], scale));
    let mut derivatives = vec![g.clone()];
    let mut gcds = vec![g.clone()];
    let mut degrees = vec![d];
    let mut steps = Vec::new();
    let mut uncertain = false;
    let mut h = g;
    let mut k = 0;
    while degrees[k] > 0 {
        let next_deriv = poly::normalized(&poly::derivative(&derivatives[k]));
        derivatives.push(next_deriv);
        let mut local = Vec::new();
        h = approx_gcd(&h, &derivatives[k + 1], gcd_tol, &mut local, &mut uncertain);
        steps.push(local);
        degrees.push(poly::degree(&h));
        gcds.push(h.clone());
        k += 1;
    }
    let chain = GcdChain {
        scale,
        derivatives,
        gcds,
        degrees: degrees.clone(),
        steps,
        certified: !uncertain,
    };
    Ok((
        MultiplicityEstimate {
            k,
            method: Method::ApproxGcd,
            tol: gcd_tol,
            certified: !uncertain,
            witnesses: Witness::ChainDegrees(degrees),
        },
        chain,
    ))
}
