use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator_model::{sample_disorder_at, BaseModel, DisorderSpec};
use crate::C64;

use super::mult_at;

/// A spectral parameter whose multiplicity differs from the per-sample mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ZException {
    pub sample: usize,
    pub z: C64,
    pub k: usize,
}

/// One evaluated `(sample, z)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct MnRow {
    pub sample: usize,
    pub z: C64,
    pub k: usize,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnReport {
    pub block: usize,
    /// `max_z Mult(z)` per disorder sample, in sample order.
    pub per_sample: Vec<usize>,
    /// Common value when every sample agrees.
    pub m_n: Option<usize>,
    pub constant: bool,
    pub exceptions: Vec<ZException>,
    pub rows: Vec<MnRow>,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut x = 0.0;
    while i > 0 {
        x += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    x
}

/// Halton points (bases 2 and 3) in `[-w, w] x [0.05, 2]`.
pub fn halton_z_grid(count: usize, half_width: f64) -> Vec<C64> {
    let w = half_width.max(1.0);
    (1..=count as u64)
        .map(|i| {
            C64::new(
                -w + 2.0 * w * radical_inverse(i, 2),
                0.05 + 1.95 * radical_inverse(i, 3),
            )
        })
        .collect()
}

fn mode(values: &[usize]) -> usize {
    let mut best = (0, 0);
    for &v in values {
        let count = values.iter().filter(|&&x| x == v).count();
        if count > best.1 || (count == best.1 && v > best.0) {
            best = (v, count);
        }
    }
    best.0
}

/// Sampled `M_n`: for every disorder sample, the maximum certified multiplicity
/// over a Halton grid of `samples_z` points plus `extra_z`.
pub fn estimate_m_n(
    base: &BaseModel,
    disorder: &DisorderSpec,
    samples_omega: usize,
    samples_z: usize,
    extra_z: &[C64],
    n: usize,
    cluster_tol: f64,
) -> Result<MnReport> {
    if samples_omega == 0 || samples_z == 0 {
        return Err(Error::pre(
            "estimate_m_n needs at least one disorder sample and one z",
        ));
    }
    if n >= base.blocks.len() {
        return Err(Error::pre(format!("block index {n} out of range")));
    }
    let per: Vec<Result<(usize, Vec<MnRow>, Vec<ZException>)>> = (0..samples_omega)
        .into_par_iter()
        .map(|s| {
            let omega = sample_disorder_at(disorder, base.blocks.len(), s as u64)?;
            let model = base.assemble(&omega)?;
            let mut zs = halton_z_grid(samples_z, model.norm());
            zs.extend_from_slice(extra_z);
            let mut rows = Vec::with_capacity(zs.len());
            for z in zs {
                let est = mult_at(&model, n, z, cluster_tol)?;
                rows.push(MnRow {
                    sample: s,
                    z,
                    k: est.k,
                    certified: est.certified,
                });
            }
            let certified: Vec<usize> = rows.iter().filter(|r| r.certified).map(|r| r.k).collect();
            let pool: Vec<usize> = if certified.is_empty() {
                rows.iter().map(|r| r.k).collect()
            } else {
                certified
            };
            let typical = mode(&pool);
            let exceptions = rows
                .iter()
                .filter(|r| r.certified && r.k != typical)
                .map(|r| ZException {
                    sample: s,
                    z: r.z,
                    k: r.k,
                })
                .collect();
            let m_hat = pool.iter().copied().max().unwrap_or(0);
            Ok((m_hat, rows, exceptions))
        })
        .collect();
    let mut per_sample = Vec::with_capacity(samples_omega);
    let mut rows = Vec::new();
    let mut exceptions = Vec::new();
    for item in per {
        let (m, r, e) = item?;
        per_sample.push(m);
        rows.extend(r);
        exceptions.extend(e);
    }
    let constant = per_sample.windows(2).all(|w| w[0] == w[1]);
    Ok(MnReport {
        block: n,
        m_n: constant.then(|| per_sample[0]),
        per_sample,
        constant,
        exceptions,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_points_stay_in_rectangle() {
        let pts = halton_z_grid(64, 3.0);
        assert_eq!(pts.len(), 64);
        assert!(pts
            .iter()
            .all(|z| z.re.abs() <= 3.0 && z.im >= 0.05 && z.im <= 2.0));
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert!((radical_inverse(2, 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mode_prefers_frequency() {
        assert_eq!(mode(&[1, 2, 2, 3]), 2);
    }
}
