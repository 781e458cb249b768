//! Neural building blocks: dense layers, LSTM/BiLSTM with hand-derived
//! backpropagation through time, inverted dropout, masked softmax
//! cross-entropy, Adam, and a finite-difference gradient checker.
//!
//! All arithmetic is 64-bit. Every backward pass here is covered by the
//! checker in [`gradcheck`].

mod adam;
mod dense;
mod dropout;
mod gradcheck;
mod lstm;
pub mod mat;
mod loss;
mod params;

use thiserror::Error;

pub use adam::{adam_update, AdamHyper, AdamState};
pub use dense::DenseParams;
pub use dropout::{dropout, DropoutMask, Mode};
pub use gradcheck::{grad_check, GradCheckReport, GroupCheck, DEFAULT_COORDS_PER_GROUP, DEFAULT_EPS};
pub use lstm::{
    bilstm_backward, bilstm_forward, lstm_backward, lstm_forward, lstm_step, run_bilstm,
    run_lstm_last_state, BilstmTrace, LstmParams, LstmTrace,
};
pub use loss::softmax_xent;
pub use mat::Mat;
pub use params::{clip_global_norm, get_coord, group_meta, param_count, set_coord, ParamSet};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("parameter/gradient group mismatch: expected {expected}, found {found}")]
    GroupMismatch { expected: String, found: String },
}
