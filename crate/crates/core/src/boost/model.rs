use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::RawDataset;
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::scalar::Scalar;
use crate::tree::Tree;

/// Version written by [`Ensemble::to_json`] and the only one accepted on load.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Raw,
    /// Sigmoid of the raw score (log-loss models only).
    Probability,
}

impl FromStr for OutputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(OutputKind::Raw),
            "prob" => Ok(OutputKind::Probability),
            other => Err(Error::InvalidParameter(format!("unknown output kind {other:?}"))),
        }
    }
}

/// `F(x) = initial + α · Σ_k tree_k(x)`. Leaf values are stored unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    pub initial: T,
    pub trees: Vec<Tree<T>>,
    pub learning_rate: T,
    pub loss: LossKind,
    /// Training bin edges; tree splits refer to them by index.
    pub bin_edges: Vec<Vec<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument<T> {
    version: u32,
    loss: LossKind,
    alpha: T,
    initial: T,
    bin_edges: Vec<Vec<T>>,
    trees: Vec<Tree<T>>,
}

impl<T: Scalar> Ensemble<T> {
    pub fn new(initial: T, learning_rate: T, loss: LossKind, bin_edges: Vec<Vec<T>>) -> Self {
        Ensemble {
            initial,
            trees: Vec::new(),
            learning_rate,
            loss,
            bin_edges,
        }
    }

    pub fn n_features(&self) -> usize {
        self.bin_edges.len()
    }

    /// Raw score of one feature row.
    pub fn predict_row(&self, row: &[T]) -> T {
        let sum: T = self
            .trees
            .iter()
            .map(|t| t.predict_raw(row, &self.bin_edges))
            .sum();
        self.initial + self.learning_rate * sum
    }

    pub fn predict(&self, data: &RawDataset<T>, output: OutputKind) -> Result<Vec<T>> {
        if data.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: data.n_features(),
            });
        }
        if output == OutputKind::Probability && self.loss != LossKind::LogLoss {
            return Err(Error::InvalidParameter(
                "probability output requires a logloss model".into(),
            ));
        }
        let mut row = Vec::with_capacity(data.n_features());
        Ok((0..data.n_rows())
            .map(|i| {
                data.row_into(i, &mut row);
                let raw = self.predict_row(&row);
                match output {
                    OutputKind::Raw => raw,
                    OutputKind::Probability => self.loss.transform(raw),
                }
            })
            .collect())
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            version: MODEL_VERSION,
            loss: self.loss,
            alpha: self.learning_rate,
            initial: self.initial,
            bin_edges: self.bin_edges.clone(),
            trees: self.trees.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
        match value.get("version") {
            Some(v) if v.as_u64() == Some(MODEL_VERSION as u64) => {}
            Some(v) => {
                return Err(Error::UnsupportedVersion {
                    found: v.to_string(),
                    supported: MODEL_VERSION,
                })
            }
            None => {
                return Err(Error::ModelParse {
                    line: 1,
                    column: 1,
                    offset: 0,
                    message: "missing field `version`".into(),
                })
            }
        }
        let doc: ModelDocument<T> =
            serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;

        for (f, edges) in doc.bin_edges.iter().enumerate() {
            if edges.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidParameter(format!(
                    "bin edges of feature {f} are not strictly increasing"
                )));
            }
        }
        let n_bins: Vec<usize> = doc.bin_edges.iter().map(|e| e.len() + 1).collect();
        for (k, tree) in doc.trees.iter().enumerate() {
            tree.validate(&n_bins)
                .map_err(|e| Error::InvalidParameter(format!("tree {k}: {e}")))?;
        }
        Ok(Ensemble {
            initial: doc.initial,
            trees: doc.trees,
            learning_rate: doc.alpha,
            loss: doc.loss,
            bin_edges: doc.bin_edges,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

fn parse_error(text: &str, err: &serde_json::Error) -> Error {
    let (line, column) = (err.line(), err.column());
    let offset = if line == 0 {
        0
    } else {
        text.split_inclusive('\n')
            .take(line - 1)
            .map(str::len)
            .sum::<usize>()
            + column.saturating_sub(1)
    };
    Error::ModelParse {
        line,
        column,
        offset: offset.min(text.len()),
        message: err.to_string(),
    }
}
