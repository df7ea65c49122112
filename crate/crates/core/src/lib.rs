//! Joint captioning of lifelogging photo streams.
//!
//! The crate turns a time-ordered stream of photos into a short activity
//! diary:
//!
//! 1. [`decoder`] produces several diverse candidate captions per image by
//!    running repeated beam searches that penalize words already used at the
//!    same position in earlier rounds.
//! 2. [`alignment`] scores how well a sentence describes an image by matching
//!    each image region to its best word vector.
//! 3. [`joint`] picks one sentence per image from the pooled candidates by
//!    minimizing a chain energy (unary cost plus a constant penalty per label
//!    change) with an exact Viterbi pass, then groups equal-sentence runs.
//! 4. [`metrics`] and [`retrieval`] evaluate the generated text: the usual
//!    captioning metrics, and keyword-based detection of sensitive photos.
//!
//! [`pipeline`] wires the stages together and [`io`] holds the file formats
//! shared with the command-line tool.

pub mod alignment;
pub mod decoder;
mod error;
pub mod io;
pub mod joint;
pub mod metrics;
pub mod pipeline;
pub mod retrieval;
pub mod text;

pub use error::{Error, Result};
