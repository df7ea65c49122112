use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DecodeError, Predictor, TokenId, Vocabulary};
use crate::{Error, Result};

/// Small deterministic stand-in for a neural captioner.
///
/// An image feature picks a cluster by nearest centroid (squared Euclidean
/// distance, lowest index on ties). Within a cluster the next-token
/// activations depend only on the previous token, `START` for the first
/// step. Pairs without a table row produce `default_activation` for every
/// token.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPredictor {
    vocab: Vocabulary,
    centroids: Vec<Vec<f64>>,
    table: HashMap<(usize, TokenId), Vec<f64>>,
    default_activation: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ToyPredictorFile {
    vocabulary: Vocabulary,
    centroids: Vec<Vec<f64>>,
    #[serde(default)]
    bigrams: Vec<BigramRow>,
    #[serde(default)]
    default_activation: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BigramRow {
    cluster: usize,
    previous: String,
    activations: Vec<f64>,
}

impl ToyPredictor {
    pub fn new(vocab: Vocabulary, centroids: Vec<Vec<f64>>) -> Result<Self, DecodeError> {
        let Some(dim) = centroids.first().map(Vec::len) else {
            return Err(DecodeError::Predictor(
                "toy predictor needs at least one centroid".into(),
            ));
        };
        if dim == 0 {
            return Err(DecodeError::Predictor("centroids must have positive dimension".into()));
        }
        for (i, c) in centroids.iter().enumerate() {
            if c.len() != dim {
                return Err(DecodeError::Predictor(format!(
                    "centroid {i} has dimension {}, expected {dim}",
                    c.len()
                )));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(DecodeError::Predictor(format!("centroid {i} is not finite")));
            }
        }
        Ok(Self {
            vocab,
            centroids,
            table: HashMap::new(),
            default_activation: 0.0,
        })
    }

    pub fn with_default_activation(mut self, value: f64) -> Self {
        self.default_activation = value;
        self
    }

    /// Sets the activations after `previous` within `cluster`.
    pub fn set_bigram(&mut self, cluster: usize, previous: &str, activations: Vec<f64>) -> Result<(), DecodeError> {
        if cluster >= self.centroids.len() {
            return Err(DecodeError::Predictor(format!("unknown cluster {cluster}")));
        }
        let prev = self
            .vocab
            .id(previous)
            .ok_or_else(|| DecodeError::Predictor(format!("unknown token `{previous}`")))?;
        if activations.len() != self.vocab.len() {
            return Err(DecodeError::Predictor(format!(
                "bigram ({cluster}, {previous}) has {} activations, vocabulary has {}",
                activations.len(),
                self.vocab.len()
            )));
        }
        self.table.insert((cluster, prev), activations);
        Ok(())
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn feature_dim(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn cluster_of(&self, feature: &[f64]) -> Result<usize, DecodeError> {
        if feature.len() != self.feature_dim() {
            return Err(DecodeError::Predictor(format!(
                "feature has dimension {}, predictor expects {}",
                feature.len(),
                self.feature_dim()
            )));
        }
        let dist = |c: &[f64]| c.iter().zip(feature).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut best = (0, dist(&self.centroids[0]));
        for (i, c) in self.centroids.iter().enumerate().skip(1) {
            let d = dist(c);
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }

    pub fn from_json(json: &str) -> Result<Self, DecodeError> {
        let file: ToyPredictorFile = serde_json::from_str(json).map_err(|e| DecodeError::Predictor(e.to_string()))?;
        let mut predictor =
            Self::new(file.vocabulary, file.centroids)?.with_default_activation(file.default_activation);
        for row in file.bigrams {
            let key = (row.cluster, predictor.vocab.id(&row.previous).unwrap_or(usize::MAX));
            if predictor.table.contains_key(&key) {
                return Err(DecodeError::Predictor(format!(
                    "duplicate bigram row ({}, {})",
                    row.cluster, row.previous
                )));
            }
            predictor.set_bigram(row.cluster, &row.previous, row.activations)?;
        }
        Ok(predictor)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json).map_err(|e| Error::parse(path, 0, e))
    }

    /// Serializes with rows sorted by (cluster, previous id).
    pub fn to_json(&self) -> String {
        let mut keys: Vec<_> = self.table.keys().copied().collect();
        keys.sort_unstable();
        let file = ToyPredictorFile {
            vocabulary: self.vocab.clone(),
            centroids: self.centroids.clone(),
            bigrams: keys
                .into_iter()
                .map(|(cluster, prev)| BigramRow {
                    cluster,
                    previous: self.vocab.token(prev).to_string(),
                    activations: self.table[&(cluster, prev)].clone(),
                })
                .collect(),
            default_activation: self.default_activation,
        };
        serde_json::to_string_pretty(&file).expect("plain data serializes")
    }
}

impl Predictor for ToyPredictor {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn activations(&self, feature: &[f64], prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        let cluster = self.cluster_of(feature)?;
        let prev = prefix.last().copied().unwrap_or(self.vocab.start());
        Ok(self
            .table
            .get(&(cluster, prev))
            .cloned()
            .unwrap_or_else(|| vec![self.default_activation; self.vocab.len()]))
    }
}
