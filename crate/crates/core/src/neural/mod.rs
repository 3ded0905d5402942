//! Recurrent neural taggers: SimpleRNN, LSTM and BiLSTM sentence encoders
//! over word embeddings and/or character-composed word vectors.

pub mod cells;
pub mod embeddings;
pub mod io;
pub mod model;
pub mod train;

pub use embeddings::{load_embeddings, oov_vector, write_embeddings, EmbeddingTable, LoadedEmbeddings, Vocab};
pub use io::{read_neural_model, write_neural_model};
pub use model::{
    forward_tagger, loss_and_gradients, tag_sentence_neural, Architecture, CharVocab, EncoderKind, NeuralParams,
    NeuralTagger, PaddedBatch,
};
pub use train::{evaluate_loss, format_history, train_neural, EpochRecord, NeuralTrainConfig, OptimizerKind};

use crate::error::Result;
use crate::linear::Tagger;

impl Tagger for NeuralTagger {
    fn tag_forms(&self, forms: &[&str]) -> Result<Vec<String>> {
        NeuralTagger::tag_forms(self, forms)
    }
}
