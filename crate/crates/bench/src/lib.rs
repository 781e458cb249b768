//! Shared fixtures for the pipeline benchmarks: a deterministic mid-size
//! model, its embedding table, and review-like sentences.

use atag_core::embeddings::CharVocab;
use atag_core::model::{build, ModelConfig, ModelParams, Variant};
use atag_core::synth::{planted_corpus, stub_vectors};
use atag_core::{EmbeddingTable, TaggedSentence};

pub struct BenchSetup {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub table: EmbeddingTable,
    pub char_vocab: CharVocab,
    pub sentences: Vec<TaggedSentence>,
}

/// A trained-size WoCh-BiLSTM-CRF instance over the planted corpus.
pub fn full_model_setup(hidden: usize) -> BenchSetup {
    let corpus = planted_corpus(64, 8, 42);
    let table = stub_vectors(corpus.table_words.iter().map(|s| s.as_str()), 300, 7);
    let char_vocab = CharVocab::from_words(
        corpus.train.iter().flat_map(|s| s.tokens.iter()).map(|t| t.text.as_str()),
    );
    let mut config = ModelConfig::new(Variant::WoChBiLstmCrf);
    config.hidden = hidden;
    config.seed = 13;
    let params = build(&config, &table, Some(&char_vocab)).unwrap();
    BenchSetup { config, params, table, char_vocab, sentences: corpus.train }
}
