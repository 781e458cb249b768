//! Aspect term extraction toolkit: SemEval-style corpus handling, word and
//! character embeddings, (Bi)LSTM encoders with an optional linear-chain CRF
//! head, exact-match chunk evaluation, and rank statistics for comparing
//! model/embedding grids.
//!
//! Everything numeric is plain `f64` with hand-written backward passes; the
//! gradient of every layer is validated against central finite differences in
//! the test suite.

pub mod charcomp;
pub mod checkpoint;
pub mod corpus;
pub mod crf;
pub mod embeddings;
pub mod eval;
pub mod model;
pub mod net;
pub mod stats;
pub mod synth;
pub mod train;

pub use corpus::{AspectSpan, IobTag, TaggedSentence, Token};
pub use embeddings::{CharVocab, CoverageReport, EmbeddingTable};
pub use eval::{EvalReport, MethodScore};
pub use model::{ModelConfig, ModelParams, Variant};
pub use train::{RunRecord, TrainAggregate, TrainSpec};
