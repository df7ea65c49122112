//! Canonical sentence normalization shared by every stage.
//!
//! Text is lowercased, split on whitespace, and each token loses its leading
//! and trailing ASCII punctuation. Tokens that end up empty are dropped.

mod stem;

pub use stem::porter_stem;

/// Splits `text` into canonical tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let token = raw.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase();
            (!token.is_empty()).then_some(token)
        })
        .collect()
}

/// Canonical surface form of a token sequence: tokens joined by one space.
pub fn join(words: &[String]) -> String {
    words.join(" ")
}

/// Tokenizes and re-joins, so that two strings compare equal exactly when
/// they denote the same sentence.
pub fn canonical(text: &str) -> String {
    join(&tokenize(text))
}
