//! Part-of-speech tagging toolkit.
//!
//! * [`corpus`]: column-format corpora, splits, statistics.
//! * [`features`]: affix/window/n-gram feature templates.
//! * [`linear`]: CRF, averaged perceptron and history-based hinge classifier.
//! * [`neural`]: recurrent taggers over word and character embeddings.
//! * [`eval`]: macro P/R/F1, accuracy, confusion analysis.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod linear;
pub mod neural;

pub use error::{CorpusError, Error, Result};
pub use linear::Tagger;
