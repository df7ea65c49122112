use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CaptionHypothesis, Vocabulary};
use crate::text;

/// A sentence with the model score it came with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    pub words: Vec<String>,
    pub log_score: f64,
    /// Beam-search round, when the sentence was decoded here.
    pub round: Option<usize>,
}

impl ScoredSentence {
    /// Tokenizes external text into a scored sentence.
    pub fn from_text(text: &str, log_score: f64) -> Self {
        Self {
            words: text::tokenize(text),
            log_score,
            round: None,
        }
    }

    pub fn from_hypothesis(hyp: &CaptionHypothesis, vocab: &Vocabulary) -> Self {
        Self {
            words: hyp.words(vocab),
            log_score: hyp.log_score,
            round: Some(hyp.round),
        }
    }

    pub fn text(&self) -> String {
        text::join(&self.words)
    }
}

/// The candidate sentences proposed for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageCandidates {
    pub image_id: String,
    pub candidates: Vec<ScoredSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSource {
    /// Position of the proposing image in the stream.
    pub image: usize,
    pub log_score: f64,
}

/// One distinct sentence of the pooled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub words: Vec<String>,
    pub text: String,
    /// Every (image, score) that proposed this sentence, in stream order.
    pub sources: Vec<CandidateSource>,
}

impl Candidate {
    /// Best log-score with which `image` proposed this sentence, if it did.
    pub fn score_for(&self, image: usize) -> Option<f64> {
        self.sources
            .iter()
            .filter(|s| s.image == image)
            .map(|s| s.log_score)
            .reduce(f64::max)
    }
}

/// Deduplicated union of the candidate sentences of a stream. Indices are
/// assigned in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    candidates: Vec<Candidate>,
    index: HashMap<String, usize>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, index: usize) -> &Candidate {
        &self.candidates[index]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Candidate> {
        self.candidates.iter()
    }

    pub fn position(&self, text: &str) -> Option<usize> {
        self.index.get(text).copied()
    }

    pub fn texts(&self) -> Vec<String> {
        self.candidates.iter().map(|c| c.text.clone()).collect()
    }

    fn insert(&mut self, sentence: &ScoredSentence, image: usize) -> usize {
        let text = sentence.text();
        let source = CandidateSource {
            image,
            log_score: sentence.log_score,
        };
        if let Some(&i) = self.index.get(&text) {
            self.candidates[i].sources.push(source);
            return i;
        }
        let i = self.candidates.len();
        self.index.insert(text.clone(), i);
        self.candidates.push(Candidate {
            words: sentence.words.clone(),
            text,
            sources: vec![source],
        });
        i
    }
}

impl<'a> IntoIterator for &'a CandidateSet {
    type Item = &'a Candidate;
    type IntoIter = std::slice::Iter<'a, Candidate>;

    fn into_iter(self) -> Self::IntoIter {
        self.candidates.iter()
    }
}

/// Pools the per-image candidates of a stream. Sentences with the same
/// canonical text become one candidate.
pub fn pool_candidates(per_image: &[ImageCandidates]) -> CandidateSet {
    let mut set = CandidateSet::default();
    for (image, entry) in per_image.iter().enumerate() {
        for sentence in &entry.candidates {
            set.insert(sentence, image);
        }
    }
    set
}
