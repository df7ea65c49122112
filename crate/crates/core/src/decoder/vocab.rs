use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DecodeError;

/// Reserved token that conditions the first step. Never emitted.
pub const START: &str = "<start>";
/// Reserved token that ends a sentence.
pub const STOP: &str = "<stop>";

pub type TokenId = usize;

/// Dense token dictionary over which predictors emit activations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    start: TokenId,
    stop: TokenId,
}

impl Vocabulary {
    /// Builds a vocabulary from an ordered token list that already contains
    /// [`START`] and [`STOP`].
    pub fn new<I, S>(tokens: I) -> Result<Self, DecodeError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, token) in tokens.iter().enumerate() {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(DecodeError::Vocabulary(format!(
                    "token {id} ({token:?}) is empty or contains whitespace"
                )));
            }
            if index.insert(token.clone(), id).is_some() {
                return Err(DecodeError::Vocabulary(format!("duplicate token `{token}`")));
            }
        }
        let reserved = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| DecodeError::Vocabulary(format!("missing reserved token `{name}`")))
        };
        let start = reserved(START)?;
        let stop = reserved(STOP)?;
        Ok(Self {
            tokens,
            index,
            start,
            stop,
        })
    }

    /// `START` gets id 0, `STOP` id 1, then `words` in order.
    pub fn from_words<I, S>(words: I) -> Result<Self, DecodeError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let all = [START.to_string(), STOP.to_string()]
            .into_iter()
            .chain(words.into_iter().map(Into::into));
        Self::new(all)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn start(&self) -> TokenId {
        self.start
    }

    pub fn stop(&self) -> TokenId {
        self.stop
    }

    pub fn is_reserved(&self, id: TokenId) -> bool {
        id == self.start || id == self.stop
    }

    /// Surface words of `ids`, dropping the reserved tokens.
    pub fn words(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .filter(|&&id| !self.is_reserved(id))
            .map(|&id| self.tokens[id].clone())
            .collect()
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = DecodeError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(vocab: Vocabulary) -> Self {
        vocab.tokens
    }
}
