//! Linear-chain CRF line tagger.

mod features;
pub mod inference;
mod model;
mod train;

use alloc::string::String;

use thiserror::Error;

use crate::item::LineLabel;
use crate::labels::LabelError;

pub use features::{extract_all, extract_features, LineFeatures, WORD_LEN_CAP};
pub use model::{segment_crf, CrfModel, EncodedSeq, ForwardBackward};
pub use train::{label_set, nll_and_gradient, train_crf, CrfConfig, CrfGradient, CrfTrainReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrfError {
    #[error("empty sequence")]
    EmptySequence,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("label {0} is not in the model's label set")]
    UnknownLabel(LineLabel),
    #[error("weight arrays do not match the label set and vocabulary")]
    Shape,
    #[error("non-finite weight or regularization constant")]
    NonFiniteWeights,
    #[error("duplicate feature name in vocabulary")]
    DuplicateFeature,
    #[error("gold labels of {doc_id} are invalid: {error}")]
    InvalidGold { doc_id: String, error: LabelError },
    #[error("loss became non-finite ({loss}) at iteration {iteration}")]
    NonFiniteLoss { iteration: usize, loss: f64 },
}
