//! Diverse candidate caption generation.
//!
//! A [`Predictor`] maps an image feature and a token prefix to activation
//! scores over the vocabulary. [`beam_search`] keeps the `b` best partial
//! sentences at each step; [`diverse_m_best`] repeats the search for several
//! rounds, each time lowering the score of every word that an earlier round
//! emitted at the same position.
//!
//! Scores: at step `t` the predictor's activations are log-softmax
//! normalized and the per-position bias is added to the normalized value of
//! each token. A hypothesis is ranked by the sum of these biased values, so
//! moving the bias of token `k` at position `t` by `δ` moves exactly the
//! hypotheses that emit `k` at `t`, by exactly `δ`. The reported
//! [`CaptionHypothesis::log_score`] is the unbiased sum.

mod pool;
mod toy;
mod vocab;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pool::{pool_candidates, Candidate, CandidateSet, CandidateSource, ImageCandidates, ScoredSentence};
pub use toy::ToyPredictor;
pub use vocab::{TokenId, Vocabulary, START, STOP};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid decoder config: {0}")]
    InvalidConfig(String),
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
    #[error("predictor: {0}")]
    Predictor(String),
}

/// Next-word model used by the decoder.
///
/// Implementations must be deterministic and cheap to share across threads.
pub trait Predictor: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    /// Raw activations for the token after `prefix` (which excludes
    /// `START`). The returned vector has one entry per vocabulary token.
    fn activations(&self, feature: &[f64], prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError>;

    /// Log-normalized activations with the bias for position `prefix.len()`
    /// added token by token.
    fn biased_log_probs(&self, feature: &[f64], prefix: &[TokenId], bias: &BiasTable) -> Result<Vec<f64>, DecodeError> {
        let mut scores = next_log_probs(self, feature, prefix)?;
        bias.apply(prefix.len(), &mut scores);
        Ok(scores)
    }
}

/// Log-probabilities of the next token. `START` is masked out before
/// normalization, so the emittable tokens carry all of the mass.
pub fn next_log_probs<P: Predictor + ?Sized>(
    predictor: &P,
    feature: &[f64],
    prefix: &[TokenId],
) -> Result<Vec<f64>, DecodeError> {
    let vocab = predictor.vocabulary();
    let mut activations = predictor.activations(feature, prefix)?;
    if activations.len() != vocab.len() {
        return Err(DecodeError::Predictor(format!(
            "predictor returned {} activations for a vocabulary of {}",
            activations.len(),
            vocab.len()
        )));
    }
    activations[vocab.start()] = f64::NEG_INFINITY;
    log_softmax(&activations)
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn vocabulary(&self) -> &Vocabulary {
        (**self).vocabulary()
    }

    fn activations(&self, feature: &[f64], prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        (**self).activations(feature, prefix)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn vocabulary(&self) -> &Vocabulary {
        (**self).vocabulary()
    }

    fn activations(&self, feature: &[f64], prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        (**self).activations(feature, prefix)
    }
}

/// Numerically stable log-softmax. `-inf` entries stay `-inf`.
pub fn log_softmax(activations: &[f64]) -> Result<Vec<f64>, DecodeError> {
    if activations.iter().any(|a| a.is_nan() || *a == f64::INFINITY) {
        return Err(DecodeError::Predictor("activation is NaN or +inf".into()));
    }
    let max = activations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(DecodeError::Predictor("no finite activation".into()));
    }
    let log_z = max + activations.iter().map(|a| (a - max).exp()).sum::<f64>().ln();
    Ok(activations.iter().map(|a| a - log_z).collect())
}

/// Additive per-position, per-token bias. Positions count from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTable {
    vocab_len: usize,
    values: Vec<f64>,
}

impl BiasTable {
    pub fn zeros(positions: usize, vocab_len: usize) -> Self {
        Self {
            vocab_len,
            values: vec![0.0; positions * vocab_len],
        }
    }

    pub fn positions(&self) -> usize {
        self.values.len().checked_div(self.vocab_len).unwrap_or(0)
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab_len
    }

    pub fn get(&self, position: usize, token: TokenId) -> f64 {
        self.values[position * self.vocab_len + token]
    }

    pub fn set(&mut self, position: usize, token: TokenId, value: f64) {
        self.values[position * self.vocab_len + token] = value;
    }

    pub fn add(&mut self, position: usize, token: TokenId, delta: f64) {
        self.values[position * self.vocab_len + token] += delta;
    }

    fn apply(&self, position: usize, scores: &mut [f64]) {
        if position >= self.positions() {
            return;
        }
        let row = &self.values[position * self.vocab_len..(position + 1) * self.vocab_len];
        for (s, b) in scores.iter_mut().zip(row) {
            *s += b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub beam_size: usize,
    pub rounds: usize,
    /// Penalty per earlier occurrence, in log-activation units.
    pub diversity_penalty: f64,
    pub max_len: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            beam_size: 5,
            rounds: 3,
            diversity_penalty: 2.0,
            max_len: 20,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_size == 0 {
            return Err(DecodeError::InvalidConfig("beam size must be positive".into()));
        }
        if self.rounds == 0 {
            return Err(DecodeError::InvalidConfig("rounds must be positive".into()));
        }
        if self.max_len == 0 {
            return Err(DecodeError::InvalidConfig("max_len must be positive".into()));
        }
        if !(self.diversity_penalty >= 0.0 && self.diversity_penalty.is_finite()) {
            return Err(DecodeError::InvalidConfig(
                "diversity penalty must be a finite nonnegative number".into(),
            ));
        }
        Ok(())
    }

    /// Candidates produced per image, `beam_size * rounds`.
    pub fn candidates_per_image(&self) -> usize {
        self.beam_size * self.rounds
    }
}

/// One decoded sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionHypothesis {
    /// Emitted tokens, ending in `STOP` unless cut off at `max_len`.
    pub tokens: Vec<TokenId>,
    /// Unbiased cumulative log-probability.
    pub log_score: f64,
    /// Ranking score: `log_score` plus the bias collected along the way.
    pub biased_score: f64,
    /// Beam-search round that produced the hypothesis, from 1.
    pub round: usize,
}

impl CaptionHypothesis {
    pub fn words(&self, vocab: &Vocabulary) -> Vec<String> {
        vocab.words(&self.tokens)
    }

    pub fn text(&self, vocab: &Vocabulary) -> String {
        self.words(vocab).join(" ")
    }

    pub fn is_stopped(&self, vocab: &Vocabulary) -> bool {
        self.tokens.last() == Some(&vocab.stop())
    }
}

#[derive(Debug, Clone)]
struct Partial {
    tokens: Vec<TokenId>,
    log_score: f64,
    biased_score: f64,
}

/// Higher biased score first, then lexicographically smaller token ids,
/// with a proper prefix (shorter sentence) before its extensions.
fn rank(a: &Partial, b: &Partial) -> Ordering {
    b.biased_score
        .total_cmp(&a.biased_score)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search under a per-position bias.
///
/// Finished sentences leave the beam and are kept in a separate pool; the
/// beam then shrinks so that at most `beam_size` sentences are ever
/// finished. Partial sentences still alive at `max_len` are cut off and
/// returned as they are.
pub fn beam_search<P: Predictor + ?Sized>(
    predictor: &P,
    feature: &[f64],
    config: &DecoderConfig,
    bias: &BiasTable,
) -> Result<Vec<CaptionHypothesis>, DecodeError> {
    run_beam(predictor, feature, config, bias, 1)
}

fn run_beam<P: Predictor + ?Sized>(
    predictor: &P,
    feature: &[f64],
    config: &DecoderConfig,
    bias: &BiasTable,
    round: usize,
) -> Result<Vec<CaptionHypothesis>, DecodeError> {
    config.validate()?;
    let vocab = predictor.vocabulary();
    if vocab.len() <= 2 {
        return Err(DecodeError::InvalidConfig("vocabulary has no words".into()));
    }
    if bias.vocab_len() != vocab.len() || bias.positions() < config.max_len {
        return Err(DecodeError::InvalidConfig(format!(
            "bias table is {}x{}, decoder needs {}x{}",
            bias.positions(),
            bias.vocab_len(),
            config.max_len,
            vocab.len()
        )));
    }
    let b = config.beam_size;

    let mut beam = vec![Partial {
        tokens: Vec::new(),
        log_score: 0.0,
        biased_score: 0.0,
    }];
    let mut finished: Vec<Partial> = Vec::new();

    for position in 0..config.max_len {
        let slots = b - finished.len();
        if slots == 0 || beam.is_empty() {
            beam.clear();
            break;
        }
        let mut expansions = Vec::with_capacity(beam.len() * vocab.len());
        for partial in &beam {
            let log_probs = next_log_probs(predictor, feature, &partial.tokens)?;
            for (token, &lp) in log_probs.iter().enumerate() {
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                let mut tokens = Vec::with_capacity(partial.tokens.len() + 1);
                tokens.extend_from_slice(&partial.tokens);
                tokens.push(token);
                expansions.push(Partial {
                    tokens,
                    log_score: partial.log_score + lp,
                    biased_score: partial.biased_score + (lp + bias.get(position, token)),
                });
            }
        }
        expansions.sort_by(rank);
        expansions.truncate(slots);

        beam.clear();
        for e in expansions {
            if e.tokens.last() == Some(&vocab.stop()) {
                finished.push(e);
            } else {
                beam.push(e);
            }
        }
    }
    // Anything left ran into max_len without stopping.
    finished.append(&mut beam);
    finished.sort_by(rank);
    finished.truncate(b);

    Ok(finished
        .into_iter()
        .map(|p| CaptionHypothesis {
            tokens: p.tokens,
            log_score: p.log_score,
            biased_score: p.biased_score,
            round,
        })
        .collect())
}

/// Runs `config.rounds` beam searches. Round `r` penalizes token `k` at
/// position `p` by `diversity_penalty` times the number of earlier rounds
/// whose kept hypotheses had `k` at `p`. The reserved tokens are never
/// penalized. Output is the rounds concatenated in order.
pub fn diverse_m_best<P: Predictor + ?Sized>(
    predictor: &P,
    feature: &[f64],
    config: &DecoderConfig,
) -> Result<Vec<CaptionHypothesis>, DecodeError> {
    config.validate()?;
    let vocab = predictor.vocabulary();
    let mut bias = BiasTable::zeros(config.max_len, vocab.len());
    let mut out = Vec::with_capacity(config.candidates_per_image());

    for round in 1..=config.rounds {
        let hyps = run_beam(predictor, feature, config, &bias, round)?;

        let mut seen = vec![false; config.max_len * vocab.len()];
        for hyp in &hyps {
            for (position, &token) in hyp.tokens.iter().enumerate() {
                if vocab.is_reserved(token) {
                    continue;
                }
                let slot = &mut seen[position * vocab.len() + token];
                if !*slot {
                    *slot = true;
                    bias.add(position, token, -config.diversity_penalty);
                }
            }
        }
        out.extend(hyps);
    }
    Ok(out)
}
