//! Descriptive-sentence classifier.
//!
//! A frozen [`EmbeddingProvider`] maps text to a vector, a small
//! [`ClassifierHead`] maps the vector to descriptive / non-descriptive
//! probabilities, and [`train`] fits the head with the soft bootstrap loss.

mod embedding;
mod head;
mod loss;
mod metrics;
mod model_file;
mod score;
pub mod synthetic;
mod train;

use thiserror::Error;

pub use embedding::{
    cosine_distance, EmbeddingProvider, HashedNgramProvider, PrecomputedProvider, ProviderDescriptor, SparseVec,
    DEFAULT_HASH_DIM,
};
pub use head::{ClassifierHead, DEFAULT_HIDDEN, NUM_CLASSES};
pub use loss::{
    cross_entropy, prediction_entropy, soft_bootstrap_grad_logits, soft_bootstrap_grad_probs, soft_bootstrap_loss,
    softmax, PROB_EPS,
};
pub use metrics::{evaluate_detector, evaluate_examples, ClassMetrics, DetectorMetrics, MetricsTable};
pub use model_file::{decode_model, encode_model, load_model, save_model, SavedModel};
pub use score::{filter_descriptive, score, Detector, DEFAULT_THRESHOLD};
pub use train::{
    embed_spans, train, train_examples, train_with_validation, EpochLog, Example, TrainConfig, EXTERNAL_LEARNING_RATE,
    HASHED_LEARNING_RATE,
};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training corpus must contain both classes")]
    DegenerateCorpus,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
