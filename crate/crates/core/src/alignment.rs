//! Image–sentence compatibility from region and word vectors.
//!
//! Each image region is matched to the sentence word with the largest inner
//! product, and the per-region maxima are summed. Higher is a better match;
//! [`unary_cost`] negates the score for use as a minimization cost.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Error, Result};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("image `{0}` has no regions")]
    NoRegions(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("word-vector line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Precomputed region vectors of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    image_id: String,
    regions: Vec<Vec<f64>>,
}

impl RegionSet {
    pub fn new(image_id: impl Into<String>, regions: Vec<Vec<f64>>) -> Result<Self, AlignError> {
        let image_id = image_id.into();
        let Some(dim) = regions.first().map(Vec::len) else {
            return Err(AlignError::NoRegions(image_id));
        };
        for (i, r) in regions.iter().enumerate() {
            if r.len() != dim {
                return Err(AlignError::DimensionMismatch {
                    context: format!("region {i} of image `{image_id}`"),
                    expected: dim,
                    found: r.len(),
                });
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(AlignError::NonFinite(format!("region {i} of image `{image_id}`")));
            }
        }
        Ok(Self { image_id, regions })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn dim(&self) -> usize {
        self.regions[0].len()
    }

    pub fn regions(&self) -> &[Vec<f64>] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}

/// What to do with a sentence word that has no vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Ignore the word.
    #[default]
    Drop,
    /// Treat the word as the zero vector.
    Zero,
}

/// Word-vector table.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentModel {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    oov: OovPolicy,
}

impl AlignmentModel {
    pub fn new(dim: usize, oov: OovPolicy) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
            oov,
        }
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<(), AlignError> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(AlignError::DimensionMismatch {
                context: format!("word vector `{token}`"),
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(AlignError::NonFinite(format!("word vector `{token}`")));
        }
        self.vectors.insert(token, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov
    }

    pub fn set_oov_policy(&mut self, oov: OovPolicy) {
        self.oov = oov;
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Parses the word-vector text format: one `token f1 ... fD` record per
    /// line. Blank lines and lines starting with `#` are skipped. The first
    /// record fixes `D`.
    pub fn parse(reader: impl BufRead, oov: OovPolicy) -> Result<Self, AlignError> {
        let mut model: Option<Self> = None;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| AlignError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line has a field");
            let vector = fields
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| AlignError::Parse {
                    line: line_no,
                    message: format!("bad number for `{token}`: {e}"),
                })?;
            if vector.is_empty() {
                return Err(AlignError::Parse {
                    line: line_no,
                    message: format!("`{token}` has no values"),
                });
            }
            let model = model.get_or_insert_with(|| Self::new(vector.len(), oov));
            if model.vectors.contains_key(token) {
                return Err(AlignError::Parse {
                    line: line_no,
                    message: format!("duplicate token `{token}`"),
                });
            }
            model.insert(token, vector).map_err(|e| AlignError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        }
        model.ok_or(AlignError::Parse {
            line: 0,
            message: "no word vectors".into(),
        })
    }

    pub fn load(path: impl AsRef<Path>, oov: OovPolicy) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file), oov).map_err(|e| match e {
            AlignError::Parse { line, message } => Error::parse(path, line, message),
            other => other.into(),
        })
    }
}

/// Alignment score plus how many sentence words had a vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentScore {
    pub value: f64,
    pub embedded_words: usize,
}

impl AlignmentScore {
    /// Set when no word of the sentence could be embedded; `value` is 0.
    pub fn is_unembeddable(&self) -> bool {
        self.embedded_words == 0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_regions max_words ⟨region, word⟩`.
pub fn align_score(
    sentence: &[String],
    regions: &RegionSet,
    model: &AlignmentModel,
) -> Result<AlignmentScore, AlignError> {
    if regions.dim() != model.dim() {
        return Err(AlignError::DimensionMismatch {
            context: format!("regions of image `{}` vs word vectors", regions.image_id()),
            expected: model.dim(),
            found: regions.dim(),
        });
    }
    let zero = vec![0.0; model.dim()];
    let words: Vec<&[f64]> = sentence
        .iter()
        .filter_map(|w| match (model.vector(w), model.oov) {
            (Some(v), _) => Some(v),
            (None, OovPolicy::Zero) => Some(zero.as_slice()),
            (None, OovPolicy::Drop) => None,
        })
        .collect();
    if words.is_empty() {
        log::warn!(
            "no embeddable word in `{}` for image `{}`; scoring 0",
            sentence.join(" "),
            regions.image_id()
        );
        return Ok(AlignmentScore {
            value: 0.0,
            embedded_words: 0,
        });
    }
    let value = regions
        .regions()
        .iter()
        .map(|r| words.iter().map(|w| dot(r, w)).fold(f64::NEG_INFINITY, f64::max))
        .sum();
    Ok(AlignmentScore {
        value,
        embedded_words: words.len(),
    })
}

/// Negated alignment score, lower is better.
pub fn unary_cost(sentence: &[String], regions: &RegionSet, model: &AlignmentModel) -> Result<f64, AlignError> {
    Ok(-align_score(sentence, regions, model)?.value)
}
