use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::{CMatrix, CVector};

/// Coupling law `lambda ~ U(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaLaw {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragingReport {
    pub intervals: Vec<(f64, f64)>,
    pub interval_lengths: Vec<f64>,
    /// `a_k`: mean over lambda of `<phi, E_lambda(I_k) phi>`.
    pub means: Vec<f64>,
    /// Least-squares slope of `log a_k` against `log |I_k|` over positive `a_k`.
    pub slope: Option<f64>,
    /// Fewer than two positive means.
    pub degenerate: bool,
    pub in_band: bool,
    pub samples: usize,
}

pub const SLOPE_BAND: (f64, f64) = (0.8, 1.2);

/// `count` nested intervals centred at `center`, the first of length `first_len`, halving.
pub fn dyadic_intervals(center: f64, first_len: f64, count: usize) -> Vec<(f64, f64)> {
    (0..count)
        .map(|k| {
            let half = first_len / 2f64.powi(k as i32 + 1);
            (center - half, center + half)
        })
        .collect()
}

/// Random symmetric `8 x 8` background with entries `U(-1, 1)`, `C = |0><0|`, `phi = delta_0`.
pub fn canonical_averaging_model(seed: u64) -> (CMatrix, CMatrix, CVector) {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = c(rng.random_range(-1.0..1.0));
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let mut cm = CMatrix::zeros(n, n);
    cm[(0, 0)] = c(1.0);
    let mut phi = CVector::zeros(n);
    phi[0] = c(1.0);
    (h, cm, phi)
}

/// Eigenvalue of `H + lambda_mid C` carrying the largest `phi`-weight, where
/// `lambda_mid` is the midpoint of the law. A natural centre for nested intervals.
pub fn averaging_center(h: &CMatrix, c_mat: &CMatrix, phi: &CVector, law: LambdaLaw) -> f64 {
    let (values, vectors) = linalg::hermitian_eigen(&(h + c_mat * c(0.5 * (law.a + law.b))));
    (0..values.len())
        .map(|i| (vectors.column(i).dotc(phi).norm_sqr(), values[i]))
        .fold((f64::NEG_INFINITY, 0.0), |best, cur| {
            if cur.0 > best.0 {
                cur
            } else {
                best
            }
        })
        .1
}

fn check_nested(intervals: &[(f64, f64)]) -> Result<()> {
    if intervals.is_empty() {
        return Err(Error::pre("at least one interval is required"));
    }
    for (k, &(lo, hi)) in intervals.iter().enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::pre(format!("interval {k} is empty or unbounded")));
        }
        if k > 0 {
            let (plo, phi) = intervals[k - 1];
            let ratio = (hi - lo) / (phi - plo);
            if lo < plo || hi > phi || (ratio - 0.5).abs() > 1e-9 {
                return Err(Error::pre(format!(
                    "interval {k} is not a halving of interval {}",
                    k - 1
                )));
            }
        }
    }
    Ok(())
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Stratified Monte Carlo over `lambda`: sample `s` is drawn uniformly from the
/// `s`-th of `samples` equal cells of `(a, b)`, on ChaCha stream `s`.
pub fn spectral_averaging_estimate(
    h: &CMatrix,
    c_mat: &CMatrix,
    phi: &CVector,
    intervals: &[(f64, f64)],
    law: LambdaLaw,
    samples: usize,
    seed: u64,
) -> Result<AveragingReport> {
    let dim = h.nrows();
    if c_mat.shape() != (dim, dim) || phi.len() != dim {
        return Err(Error::DimensionMismatch("averaging inputs".into()));
    }
    if samples == 0 || !(law.a < law.b) {
        return Err(Error::pre("averaging needs samples > 0 and a < b"));
    }
    check_nested(intervals)?;
    let range = linalg::orthonormal_basis(c_mat, 1e-10, 0.0);
    let outside = (phi - &range * (range.adjoint() * phi)).norm();
    if phi.norm() == 0.0 || outside > 1e-10 * phi.norm() {
        return Err(Error::pre(
            "phi must be a non-zero vector in the range of C",
        ));
    }
    let per: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let u: f64 = rng.random();
            let lambda = law.a + (law.b - law.a) * (s as f64 + u) / samples as f64;
            let (values, vectors) = linalg::hermitian_eigen(&(h + c_mat * c(lambda)));
            let w: Vec<f64> = (0..dim)
                .map(|i| vectors.column(i).dotc(phi).norm_sqr())
                .collect();
            intervals
                .iter()
                .map(|&(lo, hi)| {
                    (0..dim)
                        .filter(|&i| values[i] >= lo && values[i] < hi)
                        .map(|i| w[i])
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut means = vec![0.0; intervals.len()];
    for row in &per {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= samples as f64;
    }
    let lengths: Vec<f64> = intervals.iter().map(|(lo, hi)| hi - lo).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = lengths
        .iter()
        .zip(&means)
        .filter(|(_, &m)| m > 0.0)
        .map(|(l, m)| (l.ln(), m.ln()))
        .unzip();
    let degenerate = lx.len() < 2;
    let slope = (!degenerate).then(|| slope(&lx, &ly));
    Ok(AveragingReport {
        intervals: intervals.to_vec(),
        interval_lengths: lengths,
        means,
        in_band: slope.is_some_and(|s| s >= SLOPE_BAND.0 && s <= SLOPE_BAND.1),
        slope,
        degenerate,
        samples,
    })
}
