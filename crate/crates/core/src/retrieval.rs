//! Keyword search over generated captions to flag sensitive photos.
//!
//! An image is a sensitive place if any of its top captions mentions a place
//! keyword, otherwise a display if any caption mentions a display keyword.
//! Place wins when both match.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{align_score, AlignmentModel, RegionSet};
use crate::text::{porter_stem, tokenize};

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("invalid keyword config: {0}")]
    InvalidConfig(String),
    #[error("no predictions to summarize")]
    EmptyPredictions,
    #[error("recall undefined: no positive examples")]
    NoPositives,
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("unknown label `{0}` (expected not_sensitive, place or display)")]
    UnknownLabel(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Lowercased token equality.
    #[default]
    Exact,
    /// Equality of Porter stems, so "lockers" matches "locker".
    Stem,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeywordConfig {
    pub place_keywords: Vec<String>,
    pub display_keywords: Vec<String>,
    pub captions_per_image: usize,
    pub match_mode: MatchMode,
}

impl Default for KeywordConfig {
    fn default() -> Self {
        let own = |words: &[&str]| words.iter().map(|w| w.to_string()).collect();
        Self {
            place_keywords: own(&["toilet", "bathroom", "locker", "lavatory", "washroom"]),
            display_keywords: own(&["computer", "laptop", "iphone", "smartphone", "screen"]),
            captions_per_image: 5,
            match_mode: MatchMode::Exact,
        }
    }
}

impl KeywordConfig {
    fn normalize(&self, word: &str) -> String {
        match self.match_mode {
            MatchMode::Exact => word.to_string(),
            MatchMode::Stem => porter_stem(word),
        }
    }

    fn keyword_set(&self, words: &[String], which: &str) -> Result<BTreeSet<String>, RetrievalError> {
        words
            .iter()
            .map(|w| match tokenize(w).as_slice() {
                [single] => Ok(self.normalize(single)),
                _ => Err(RetrievalError::InvalidConfig(format!(
                    "{which} keyword `{w}` is not a single word"
                ))),
            })
            .collect()
    }

    /// Normalized place and display keyword sets.
    fn compile(&self) -> Result<(BTreeSet<String>, BTreeSet<String>), RetrievalError> {
        if self.captions_per_image == 0 {
            return Err(RetrievalError::InvalidConfig(
                "captions_per_image must be at least 1".into(),
            ));
        }
        let place = self.keyword_set(&self.place_keywords, "place")?;
        let display = self.keyword_set(&self.display_keywords, "display")?;
        if let Some(shared) = place.intersection(&display).next() {
            return Err(RetrievalError::InvalidConfig(format!(
                "`{shared}` is both a place and a display keyword"
            )));
        }
        Ok((place, display))
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        self.compile().map(|_| ())
    }

    pub fn from_json(json: &str) -> Result<Self, RetrievalError> {
        let config: Self = serde_json::from_str(json).map_err(|e| RetrievalError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityLabel {
    NotSensitive,
    Place,
    Display,
}

impl SensitivityLabel {
    pub const ALL: [SensitivityLabel; 3] = [Self::NotSensitive, Self::Place, Self::Display];

    pub fn is_sensitive(self) -> bool {
        self != Self::NotSensitive
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NotSensitive => "not_sensitive",
            Self::Place => "place",
            Self::Display => "display",
        }
    }
}

impl fmt::Display for SensitivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensitivityLabel {
    type Err = RetrievalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "not_sensitive" | "notsen" | "none" => Ok(Self::NotSensitive),
            "place" | "sensitive_place" => Ok(Self::Place),
            "display" => Ok(Self::Display),
            _ => Err(RetrievalError::UnknownLabel(s.to_string())),
        }
    }
}

/// Fraction of captions mentioning a keyword of each kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub place: f64,
    pub display: f64,
    pub any: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: SensitivityLabel,
    /// Score of the winning class; 0 for not-sensitive.
    pub confidence: f64,
    /// Winning-class keywords found, sorted.
    pub matched_keywords: Vec<String>,
    pub scores: ClassScores,
}

impl Classification {
    /// Ranking score for retrieving `target`; `NotSensitive` ranks by any
    /// sensitive keyword.
    pub fn score_for(&self, target: SensitivityLabel) -> f64 {
        match target {
            SensitivityLabel::Place => self.scores.place,
            SensitivityLabel::Display => self.scores.display,
            SensitivityLabel::NotSensitive => self.scores.any,
        }
    }
}

/// Classifies one image from its top captions. Captions beyond
/// `captions_per_image` are ignored.
pub fn classify_image<S: AsRef<str>>(captions: &[S], config: &KeywordConfig) -> Result<Classification, RetrievalError> {
    let tokenized: Vec<Vec<String>> = captions.iter().map(|c| tokenize(c.as_ref())).collect();
    classify_tokens(&tokenized, config)
}

pub fn classify_tokens(captions: &[Vec<String>], config: &KeywordConfig) -> Result<Classification, RetrievalError> {
    let (place, display) = config.compile()?;
    let captions = &captions[..captions.len().min(config.captions_per_image)];

    let mut place_hits = 0;
    let mut display_hits = 0;
    let mut any_hits = 0;
    let mut place_found = BTreeSet::new();
    let mut display_found = BTreeSet::new();
    for caption in captions {
        let words: BTreeSet<String> = caption.iter().map(|w| config.normalize(&w.to_lowercase())).collect();
        let p: Vec<_> = place.intersection(&words).cloned().collect();
        let d: Vec<_> = display.intersection(&words).cloned().collect();
        place_hits += usize::from(!p.is_empty());
        display_hits += usize::from(!d.is_empty());
        any_hits += usize::from(!p.is_empty() || !d.is_empty());
        place_found.extend(p);
        display_found.extend(d);
    }

    let per = config.captions_per_image as f64;
    let scores = ClassScores {
        place: place_hits as f64 / per,
        display: display_hits as f64 / per,
        any: any_hits as f64 / per,
    };
    let (label, confidence, found) = if place_hits > 0 {
        (SensitivityLabel::Place, scores.place, place_found)
    } else if display_hits > 0 {
        (SensitivityLabel::Display, scores.display, display_found)
    } else {
        (SensitivityLabel::NotSensitive, 0.0, BTreeSet::new())
    };
    Ok(Classification {
        label,
        confidence,
        matched_keywords: found.into_iter().collect(),
        scores,
    })
}

/// Alternative confidence: logistic of the best alignment score among the
/// captions that contain a keyword of the predicted class, 0 when the image
/// is not sensitive or no such caption embeds.
pub fn alignment_confidence<S: AsRef<str>>(
    captions: &[S],
    regions: &RegionSet,
    model: &AlignmentModel,
    config: &KeywordConfig,
) -> Result<f64, crate::Error> {
    let classification = classify_image(captions, config)?;
    if classification.label == SensitivityLabel::NotSensitive {
        return Ok(0.0);
    }
    let mut best: Option<f64> = None;
    for caption in captions.iter().take(config.captions_per_image) {
        let one = classify_image(&[caption.as_ref()], config)?;
        if one.label != classification.label {
            continue;
        }
        let score = align_score(&tokenize(caption.as_ref()), regions, model)?;
        if !score.is_unembeddable() {
            best = Some(best.map_or(score.value, |b: f64| b.max(score.value)));
        }
    }
    Ok(best.map_or(0.0, |s| 1.0 / (1.0 + (-s).exp())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixMode {
    ThreeWay,
    /// Place and display merged into one sensitive class.
    TwoWay,
}

/// Confusion matrix: actual classes in rows, predicted in columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
    /// Row-normalized counts; `None` for a class with no actual examples.
    pub rates: Vec<Option<Vec<f64>>>,
}

impl ConfusionMatrix {
    pub fn row_total(&self, row: usize) -> usize {
        self.counts[row].iter().sum()
    }

    /// Tab-separated table of rates, `-` for undefined rows.
    pub fn to_table(&self) -> String {
        let mut out = std::iter::once("actual\\predicted")
            .chain(self.classes.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join("\t");
        out.push('\n');
        for (name, rates) in self.classes.iter().zip(&self.rates) {
            out.push_str(name);
            for c in 0..self.classes.len() {
                match rates {
                    Some(r) => out.push_str(&format!("\t{:.3}", r[c])),
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion_matrix(
    predictions: &[(SensitivityLabel, SensitivityLabel)],
    mode: MatrixMode,
) -> Result<ConfusionMatrix, RetrievalError> {
    if predictions.is_empty() {
        return Err(RetrievalError::EmptyPredictions);
    }
    let (classes, index): (Vec<String>, fn(SensitivityLabel) -> usize) = match mode {
        MatrixMode::ThreeWay => (SensitivityLabel::ALL.iter().map(|l| l.to_string()).collect(), |l| {
            l as usize
        }),
        MatrixMode::TwoWay => (vec!["not_sensitive".into(), "sensitive".into()], |l| {
            usize::from(l.is_sensitive())
        }),
    };
    let n = classes.len();
    let mut counts = vec![vec![0usize; n]; n];
    for &(actual, predicted) in predictions {
        counts[index(actual)][index(predicted)] += 1;
    }
    let rates = counts
        .iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| row.iter().map(|&c| c as f64 / total as f64).collect())
        })
        .collect();
    Ok(ConfusionMatrix { classes, counts, rates })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall when predicting positive for `confidence >=
/// threshold`, at every distinct confidence from highest to lowest.
pub fn pr_curve(scored: &[(bool, f64)]) -> Result<Vec<PrPoint>, RetrievalError> {
    if scored.is_empty() {
        return Err(RetrievalError::EmptyPredictions);
    }
    if let Some(&(_, c)) = scored.iter().find(|(_, c)| !(0.0..=1.0).contains(c)) {
        return Err(RetrievalError::ConfidenceOutOfRange(c));
    }
    let positives = scored.iter().filter(|(p, _)| *p).count();
    if positives == 0 {
        return Err(RetrievalError::NoPositives);
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, &(positive, confidence)) in sorted.iter().enumerate() {
        if positive {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_at_threshold = sorted.get(i + 1).is_none_or(|next| next.1 != confidence);
        if last_at_threshold {
            points.push(PrPoint {
                threshold: confidence,
                precision: tp as f64 / (tp + fp) as f64,
                recall: tp as f64 / positives as f64,
            });
        }
    }
    Ok(points)
}

/// Confusion matrices and per-class PR curves for a labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalEvaluation {
    pub three_way: ConfusionMatrix,
    pub two_way: ConfusionMatrix,
    /// Sensitive-vs-not, ranked by [`ClassScores::any`].
    pub pr_sensitive: Option<Vec<PrPoint>>,
    pub pr_place: Option<Vec<PrPoint>>,
    pub pr_display: Option<Vec<PrPoint>>,
}

impl RetrievalEvaluation {
    /// `(curve name, points)` for every defined curve.
    pub fn curves(&self) -> Vec<(&'static str, &[PrPoint])> {
        [
            ("sensitive", &self.pr_sensitive),
            ("place", &self.pr_place),
            ("display", &self.pr_display),
        ]
        .into_iter()
        .filter_map(|(name, c)| c.as_deref().map(|c| (name, c)))
        .collect()
    }
}

/// `items` pairs each image's actual label with its classification. A PR
/// curve is `None` when its class has no actual examples.
pub fn evaluate(items: &[(SensitivityLabel, &Classification)]) -> Result<RetrievalEvaluation, RetrievalError> {
    let pairs: Vec<_> = items.iter().map(|(a, c)| (*a, c.label)).collect();
    let curve = |target: SensitivityLabel| {
        let scored: Vec<(bool, f64)> = items
            .iter()
            .map(|(actual, c)| {
                let positive = match target {
                    SensitivityLabel::NotSensitive => actual.is_sensitive(),
                    t => *actual == t,
                };
                (positive, c.score_for(target))
            })
            .collect();
        match pr_curve(&scored) {
            Ok(points) => Ok(Some(points)),
            Err(RetrievalError::NoPositives) => Ok(None),
            Err(e) => Err(e),
        }
    };
    Ok(RetrievalEvaluation {
        three_way: confusion_matrix(&pairs, MatrixMode::ThreeWay)?,
        two_way: confusion_matrix(&pairs, MatrixMode::TwoWay)?,
        pr_sensitive: curve(SensitivityLabel::NotSensitive)?,
        pr_place: curve(SensitivityLabel::Place)?,
        pr_display: curve(SensitivityLabel::Display)?,
    })
}
