//! Boundary-value files for tree checks: a JSON array of numbers (one vector)
//! or an array of such arrays (one vector per sample).

use serde::Deserialize;

use crate::error::RunError;

#[derive(Deserialize)]
#[serde(untagged)]
enum TauDocument {
    One(Vec<f64>),
    Many(Vec<Vec<f64>>),
}

/// Parses boundary vectors, each of length `expected` when given.
pub fn parse_tau(text: &str, expected: Option<usize>) -> Result<Vec<Vec<f64>>, RunError> {
    let doc: TauDocument = serde_json::from_str(text).map_err(|e| RunError::Config {
        path: "tau".into(),
        message: format!("expected an array of numbers or of arrays: {e}"),
    })?;
    let many = match doc {
        TauDocument::One(v) => vec![v],
        TauDocument::Many(v) => v,
    };
    if many.is_empty() {
        return Err(RunError::Config {
            path: "tau".into(),
            message: "no boundary vectors".into(),
        });
    }
    for (i, v) in many.iter().enumerate() {
        if v.is_empty() {
            return Err(RunError::Config {
                path: format!("tau[{i}]"),
                message: "empty boundary vector".into(),
            });
        }
        if let Some(n) = expected {
            if v.len() != n {
                return Err(RunError::Config {
                    path: format!("tau[{i}]"),
                    message: format!("expected {n} values, found {}", v.len()),
                });
            }
        }
        if let Some(j) = v.iter().position(|x| !x.is_finite()) {
            return Err(RunError::Config {
                path: format!("tau[{i}][{j}]"),
                message: "non-finite value".into(),
            });
        }
    }
    Ok(many)
}
