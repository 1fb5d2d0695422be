//! JSON chain specifications.
//!
//! ```json
//! {"type": "matrix", "P": [[0.0, 1.0], [1.0, 0.0]]}
//! {"type": "network", "edges": [["a", "b", 1.0], ["b", "c", 2.0]]}
//! {"type": "family", "name": "cycle", "params": {"n": 8}}
//! {"type": "family", "name": "lazy", "params": {"base": {...}, "a": 0.5}}
//! {"type": "rescale", "base": {...}, "r": [1.0, 2.0]}
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::chain::{ChainModel, WeightedNetwork};
use crate::error::{Error, Result};
use crate::family::family;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainSpec {
    Matrix {
        #[serde(rename = "P")]
        p: Vec<Vec<f64>>,
    },
    Network {
        /// `[a, b, w]`; labels may be strings or integers.
        edges: Vec<(Value, Value, f64)>,
    },
    Family {
        name: String,
        #[serde(default)]
        params: Map<String, Value>,
    },
    Rescale {
        base: Box<ChainSpec>,
        r: Vec<f64>,
    },
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::SpecParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn label(v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::BadParams(format!("edge endpoint {other} is not a string or number"))),
    }
}

impl ChainSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(parse_error)
    }

    pub fn build(&self) -> Result<ChainModel> {
        match self {
            ChainSpec::Matrix { p } => {
                let n = p.len();
                if let Some(row) = p.iter().find(|r| r.len() != n) {
                    return Err(Error::NotSquare(n, row.len()));
                }
                ChainModel::from_matrix(DMatrix::from_fn(n, n, |i, j| p[i][j]))
            }
            ChainSpec::Network { edges } => {
                let labeled = edges
                    .iter()
                    .map(|(a, b, w)| Ok((label(a)?, label(b)?, *w)))
                    .collect::<Result<Vec<_>>>()?;
                ChainModel::from_network(&WeightedNetwork::from_labeled_edges(&labeled)?)
            }
            ChainSpec::Family { name, params } if name == "lazy" => {
                let base = params
                    .get("base")
                    .ok_or_else(|| Error::BadParams("lazy needs a 'base' spec".into()))?;
                let base: ChainSpec = serde_json::from_value(base.clone()).map_err(|e| Error::BadParams(e.to_string()))?;
                let a = params.get("a").and_then(Value::as_f64).unwrap_or(0.5);
                base.build()?.lazy(a)
            }
            ChainSpec::Family { name, params } => family(name, params),
            ChainSpec::Rescale { base, r } => base.build()?.rescale_rows(r),
        }
    }
}

/// Parses and builds a chain from spec text.
pub fn load_spec(text: &str) -> Result<ChainModel> {
    ChainSpec::parse(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_and_family() {
        let c = load_spec(r#"{"type":"matrix","P":[[0,1],[1,0]]}"#).unwrap();
        assert_eq!(c.n(), 2);
        let c = load_spec(r#"{"type":"family","name":"cycle","params":{"n":5}}"#).unwrap();
        assert_eq!(c.n(), 5);
    }

    #[test]
    fn network_labels() {
        let c = load_spec(r#"{"type":"network","edges":[["a","b",1.0],["b",3,2.0]]}"#).unwrap();
        assert_eq!(c.states(), &["a", "b", "3"]);
        assert!((c.pi()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lazy_and_rescale() {
        let c = load_spec(r#"{"type":"family","name":"lazy","params":{"base":{"type":"family","name":"path","params":{"n":3}},"a":0.5}}"#).unwrap();
        assert!((c.p()[(0, 0)] - 0.5).abs() < 1e-15);
        let c = load_spec(r#"{"type":"rescale","base":{"type":"family","name":"path","params":{"n":3}},"r":[1,2,1]}"#).unwrap();
        assert!(c.is_generator_form());
    }

    #[test]
    fn malformed_reports_position() {
        match load_spec("{\"type\":\"matrix\",\n \"P\": [[0,1],[1,0]") {
            Err(Error::SpecParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_spec(r#"{"type":"blob"}"#), Err(Error::SpecParse { .. })));
    }
}
