//! JSON form of a model: `{sites, A, blocks: [{index, support, C}], disorder}`
//! with complex entries as `[re, im]` pairs and matrices row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

use super::builders::DEFAULT_SIZE_CAP;
use super::{
    BaseModel, DisorderSpec, Distribution, HermitianOperator, PerturbationBlock, SiteSpace,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDocument {
    pub index: usize,
    pub support: Vec<usize>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderDocument {
    pub family: String,
    pub params: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_iid")]
    pub iid: bool,
}

fn default_iid() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub sites: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<[f64; 2]>>,
    pub blocks: Vec<BlockDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderDocument>,
}

fn matrix_from_rows(rows: &[Vec<[f64; 2]>], n: usize, path: &str) -> Result<CMatrix> {
    if rows.len() != n {
        return Err(Error::doc(
            path,
            format!("expected {n} rows, found {}", rows.len()),
        ));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::doc(
                format!("{path}[{i}]"),
                format!("expected {n} entries, found {}", row.len()),
            ));
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::doc(format!("{path}[{i}][{j}]"), "non-finite entry"));
            }
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}

fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

impl DisorderDocument {
    pub fn to_spec(&self) -> Result<DisorderSpec> {
        let dist = match (self.family.as_str(), self.params.as_slice()) {
            ("uniform", &[a, b]) => Distribution::Uniform { a, b },
            ("gaussian", &[mu, sigma]) => Distribution::Gaussian { mu, sigma },
            ("uniform" | "gaussian", p) => {
                return Err(Error::doc(
                    "disorder.params",
                    format!("expected 2 parameters, found {}", p.len()),
                ))
            }
            (other, _) => {
                return Err(Error::doc(
                    "disorder.family",
                    format!("unknown family {other:?}"),
                ))
            }
        };
        dist.validate()
            .map_err(|e| Error::doc("disorder.params", e.to_string()))?;
        Ok(DisorderSpec {
            per_block: vec![dist],
            iid: self.iid,
            seed: self.seed,
        })
    }
}

impl ModelDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::doc("$", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialise")
    }

    /// Validates every field and builds the model. Dimensions are checked
    /// against `cap` before any matrix is allocated.
    pub fn to_model(&self, cap: usize) -> Result<(BaseModel, Option<DisorderSpec>)> {
        let dim = self.sites.len();
        if dim == 0 {
            return Err(Error::doc("sites", "at least one site is required"));
        }
        if dim > cap {
            return Err(Error::SizeOverflow { required: dim, cap });
        }
        let sites =
            SiteSpace::new(self.sites.clone()).map_err(|e| Error::doc("sites", e.to_string()))?;
        let a = matrix_from_rows(&self.a, dim, "A")?;
        let operator =
            HermitianOperator::from_matrix(a).map_err(|e| Error::doc("A", e.to_string()))?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            let path = format!("blocks[{i}]");
            if b.index != i {
                return Err(Error::doc(
                    format!("{path}.index"),
                    format!("expected {i}, found {}", b.index),
                ));
            }
            if let Some(&s) = b.support.iter().find(|&&s| s >= dim) {
                return Err(Error::doc(
                    format!("{path}.support"),
                    format!("site {s} outside 0..{dim}"),
                ));
            }
            let c = matrix_from_rows(&b.c, b.support.len(), &format!("{path}.C"))?;
            let block = PerturbationBlock::new(i, b.support.clone(), c)
                .map_err(|e| Error::doc(&path, e.to_string()))?;
            blocks.push(block);
        }
        let disorder = match &self.disorder {
            Some(d) => {
                let spec = d.to_spec()?;
                spec.validate(blocks.len())
                    .map_err(|e| Error::doc("disorder", e.to_string()))?;
                Some(spec)
            }
            None => None,
        };
        Ok((BaseModel::new(sites, operator, blocks)?, disorder))
    }

    pub fn from_model(model: &BaseModel, disorder: Option<DisorderDocument>) -> Self {
        ModelDocument {
            sites: model.sites.labels().to_vec(),
            a: matrix_to_rows(model.operator.matrix()),
            blocks: model
                .blocks
                .iter()
                .map(|b| BlockDocument {
                    index: b.index,
                    support: b.support().to_vec(),
                    c: matrix_to_rows(b.c()),
                })
                .collect(),
            disorder,
        }
    }
}

/// Parses and validates a model document with the default size cap.
pub fn load_model(text: &str) -> Result<(BaseModel, Option<DisorderSpec>)> {
    ModelDocument::parse(text)?.to_model(DEFAULT_SIZE_CAP)
}
