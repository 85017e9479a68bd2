use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Distribution {
    Uniform { a: f64, b: f64 },
    Gaussian { mu: f64, sigma: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { a, b } if !(a.is_finite() && b.is_finite() && a < b) => {
                Err(Error::pre(format!("uniform({a}, {b}) needs finite a < b")))
            }
            Distribution::Gaussian { mu, sigma }
                if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) =>
            {
                Err(Error::pre(format!(
                    "gaussian({mu}, {sigma}) needs finite sigma > 0"
                )))
            }
            _ => Ok(()),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Uniform { a, b } => Uniform::new(a, b).expect("validated").sample(rng),
            Distribution::Gaussian { mu, sigma } => {
                Normal::new(mu, sigma).expect("validated").sample(rng)
            }
        }
    }
}

/// Per-block laws plus a master seed. A single entry is broadcast to all blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub per_block: Vec<Distribution>,
    pub iid: bool,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn iid(dist: Distribution, seed: u64) -> Self {
        DisorderSpec {
            per_block: vec![dist],
            iid: true,
            seed,
        }
    }

    pub fn validate(&self, n_blocks: usize) -> Result<()> {
        if self.per_block.is_empty() {
            return Err(Error::pre("disorder needs at least one distribution"));
        }
        for d in &self.per_block {
            d.validate()?;
        }
        if self.per_block.len() != 1 && self.per_block.len() != n_blocks {
            return Err(Error::DimensionMismatch(format!(
                "{} distributions for {n_blocks} blocks",
                self.per_block.len()
            )));
        }
        if self.iid && self.per_block.iter().any(|d| d != &self.per_block[0]) {
            return Err(Error::pre(
                "iid disorder needs one law shared by every block",
            ));
        }
        Ok(())
    }

    fn law(&self, block: usize) -> &Distribution {
        if self.per_block.len() == 1 {
            &self.per_block[0]
        } else {
            &self.per_block[block]
        }
    }
}

/// Disorder vector number `index`. Each sample index owns its own ChaCha
/// stream under the master seed, so results do not depend on evaluation order.
pub fn sample_disorder_at(spec: &DisorderSpec, n_blocks: usize, index: u64) -> Result<Vec<f64>> {
    spec.validate(n_blocks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    Ok((0..n_blocks)
        .map(|b| spec.law(b).sample(&mut rng))
        .collect())
}

pub fn sample_disorder(
    spec: &DisorderSpec,
    n_blocks: usize,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::pre("sample count must be at least 1"));
    }
    (0..count as u64)
        .map(|i| sample_disorder_at(spec, n_blocks, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_output() {
        let spec = DisorderSpec::iid(Distribution::Uniform { a: 0.0, b: 1.0 }, 7);
        let a = sample_disorder(&spec, 5, 2).unwrap();
        let b = sample_disorder(&spec, 5, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn sample_at_matches_batch() {
        let spec = DisorderSpec::iid(
            Distribution::Gaussian {
                mu: 0.0,
                sigma: 1.0,
            },
            3,
        );
        let batch = sample_disorder(&spec, 4, 6).unwrap();
        assert_eq!(batch[5], sample_disorder_at(&spec, 4, 5).unwrap());
    }

    #[test]
    fn invalid_laws_rejected() {
        assert!(Distribution::Uniform { a: 1.0, b: 1.0 }.validate().is_err());
        assert!(Distribution::Gaussian {
            mu: 0.0,
            sigma: 0.0
        }
        .validate()
        .is_err());
        let mixed = DisorderSpec {
            per_block: vec![
                Distribution::Uniform { a: 0.0, b: 1.0 },
                Distribution::Uniform { a: 0.0, b: 2.0 },
            ],
            iid: true,
            seed: 0,
        };
        assert!(mixed.validate(2).is_err());
    }

    #[test]
    fn zero_count_rejected() {
        let spec = DisorderSpec::iid(Distribution::Uniform { a: 0.0, b: 1.0 }, 1);
        assert!(sample_disorder(&spec, 1, 0).is_err());
    }
}
