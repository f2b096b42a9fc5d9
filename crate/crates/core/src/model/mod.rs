//! Transformer encoder with a BERT-style pooler and the feature-fusion head:
//!
//! ```text
//! pooled    = tanh(W_p · LN(encoder(ids, mask))[CLS] + b_p)
//! processed = W1 · f_out + b1
//! logits    = W2 · dropout([pooled; processed]) + b2
//! ```

mod backward;
mod checkpoint;
mod config;
mod forward;
mod gradcheck;
mod loss;
mod params;
mod tensor;

pub use backward::{backward, backward_into};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, MAGIC,
};
pub use config::ModelConfig;
pub use forward::{
    forward, predict, prediction_from_logits, DropoutMask, ForwardOutput, ForwardTrace, Mode,
    Prediction,
};
pub use gradcheck::{
    gradient_check, random_encoding, relative_error, GradCheckReport, COORDS_PER_PROBE, FD_STEP,
    REL_ERR_FLOOR,
};
pub use loss::{binary_cross_entropy, cross_entropy, cross_entropy_grad, softmax};
pub use params::{LayerParams, Parameters};
pub use tensor::Tensor;
