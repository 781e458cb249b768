//! Assembles the eight tagger variants (word/char channels × LSTM/BiLSTM ×
//! softmax/CRF head) behind a single build/forward/loss/predict surface.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charcomp::{
    compose_backward, compose_forward, CharComposerParams, ComposeTrace, COMPOSED_DIM,
};
use crate::corpus::{IobTag, TaggedSentence, NUM_TAGS};
use crate::crf::{crf_nll, viterbi, CrfParams};
use crate::embeddings::{CharVocab, EmbeddingTable};
use crate::net::mat::Mat;
use crate::net::{
    bilstm_backward, bilstm_forward, lstm_backward, lstm_forward, softmax_xent, BilstmTrace,
    DenseParams, DropoutMask, LstmParams, LstmTrace, Mode, NetError, ParamSet,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// The eight architecture variants: word embeddings always on, char channel
/// / bidirectionality / CRF head toggled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "Wo-LSTM")]
    WoLstm,
    #[serde(rename = "Wo-LSTM-CRF")]
    WoLstmCrf,
    #[serde(rename = "WoCh-LSTM")]
    WoChLstm,
    #[serde(rename = "WoCh-LSTM-CRF")]
    WoChLstmCrf,
    #[serde(rename = "Wo-BiLSTM")]
    WoBiLstm,
    #[serde(rename = "Wo-BiLSTM-CRF")]
    WoBiLstmCrf,
    #[serde(rename = "WoCh-BiLSTM")]
    WoChBiLstm,
    #[serde(rename = "WoCh-BiLSTM-CRF")]
    WoChBiLstmCrf,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::WoLstm,
        Variant::WoLstmCrf,
        Variant::WoChLstm,
        Variant::WoChLstmCrf,
        Variant::WoBiLstm,
        Variant::WoBiLstmCrf,
        Variant::WoChBiLstm,
        Variant::WoChBiLstmCrf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::WoLstm => "Wo-LSTM",
            Variant::WoLstmCrf => "Wo-LSTM-CRF",
            Variant::WoChLstm => "WoCh-LSTM",
            Variant::WoChLstmCrf => "WoCh-LSTM-CRF",
            Variant::WoBiLstm => "Wo-BiLSTM",
            Variant::WoBiLstmCrf => "Wo-BiLSTM-CRF",
            Variant::WoChBiLstm => "WoCh-BiLSTM",
            Variant::WoChBiLstmCrf => "WoCh-BiLSTM-CRF",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s)
    }

    pub fn use_char(self) -> bool {
        matches!(
            self,
            Variant::WoChLstm | Variant::WoChLstmCrf | Variant::WoChBiLstm | Variant::WoChBiLstmCrf
        )
    }

    pub fn bidirectional(self) -> bool {
        matches!(
            self,
            Variant::WoBiLstm | Variant::WoBiLstmCrf | Variant::WoChBiLstm | Variant::WoChBiLstmCrf
        )
    }

    pub fn use_crf(self) -> bool {
        matches!(
            self,
            Variant::WoLstmCrf | Variant::WoChLstmCrf | Variant::WoBiLstmCrf | Variant::WoChBiLstmCrf
        )
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Encoder hidden size per direction.
    pub hidden: usize,
    /// Sentences are truncated to this many tokens for the network.
    pub max_len: usize,
    pub dropout: f64,
    pub embedding_name: String,
    pub seed: u64,
    /// Mask invalid IOB transitions at decode time (CRF variants only).
    pub constrained_decode: bool,
}

impl ModelConfig {
    pub fn new(variant: Variant) -> ModelConfig {
        ModelConfig {
            variant,
            hidden: 100,
            max_len: 30,
            dropout: 0.5,
            embedding_name: String::new(),
            seed: 0,
            constrained_decode: false,
        }
    }
}

/// All learnable weights of one model instance. Word vectors are not here:
/// they are frozen transfer inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub word_dim: usize,
    pub char_comp: Option<CharComposerParams>,
    pub enc_fwd: LstmParams,
    pub enc_bwd: Option<LstmParams>,
    /// Encoder output (H or 2H) to the K=3 tag scores.
    pub proj: DenseParams,
    pub crf: Option<CrfParams>,
}

impl ModelParams {
    pub fn input_dim(&self) -> usize {
        self.word_dim + if self.char_comp.is_some() { COMPOSED_DIM } else { 0 }
    }

    /// All-zero parameters of the shape a config implies, for filling from a
    /// checkpoint. `char_vocab_len` counts ids including the UNK slot.
    pub fn zeros_for(
        config: &ModelConfig,
        word_dim: usize,
        char_vocab_len: Option<usize>,
    ) -> Result<ModelParams, ModelError> {
        let char_comp = if config.variant.use_char() {
            let len = char_vocab_len.ok_or_else(|| {
                ModelError::Config(format!("variant {} needs a char vocabulary", config.variant))
            })?;
            Some(CharComposerParams::zeros(len))
        } else {
            None
        };
        let input_dim = word_dim + if config.variant.use_char() { COMPOSED_DIM } else { 0 };
        let enc_out = config.hidden * if config.variant.bidirectional() { 2 } else { 1 };
        Ok(ModelParams {
            word_dim,
            char_comp,
            enc_fwd: LstmParams::zeros(input_dim, config.hidden),
            enc_bwd: config
                .variant
                .bidirectional()
                .then(|| LstmParams::zeros(input_dim, config.hidden)),
            proj: DenseParams::zeros(enc_out, NUM_TAGS),
            crf: config.variant.use_crf().then(CrfParams::zeros),
        })
    }

    /// A same-shaped, all-zero mirror for gradient accumulation.
    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            word_dim: self.word_dim,
            char_comp: self.char_comp.as_ref().map(|c| CharComposerParams::zeros(c.vocab_len())),
            enc_fwd: LstmParams::zeros(self.enc_fwd.input_dim, self.enc_fwd.hidden_dim),
            enc_bwd: self
                .enc_bwd
                .as_ref()
                .map(|e| LstmParams::zeros(e.input_dim, e.hidden_dim)),
            proj: DenseParams::zeros(self.proj.input_dim(), self.proj.output_dim()),
            crf: self.crf.as_ref().map(|_| CrfParams::zeros()),
        }
    }
}

impl ParamSet for ModelParams {
    fn visit_groups(&self, f: &mut dyn FnMut(&str, &[f64], &[usize])) {
        if let Some(c) = &self.char_comp {
            c.visit_groups(&mut |n, d, s| f(&format!("char.{n}"), d, s));
        }
        self.enc_fwd.visit_groups(&mut |n, d, s| f(&format!("enc_fwd.{n}"), d, s));
        if let Some(e) = &self.enc_bwd {
            e.visit_groups(&mut |n, d, s| f(&format!("enc_bwd.{n}"), d, s));
        }
        self.proj.visit_groups(&mut |n, d, s| f(&format!("proj.{n}"), d, s));
        if let Some(c) = &self.crf {
            c.visit_groups(&mut |n, d, s| f(&format!("crf.{n}"), d, s));
        }
    }

    fn visit_groups_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        if let Some(c) = &mut self.char_comp {
            c.visit_groups_mut(&mut |n, d| f(&format!("char.{n}"), d));
        }
        self.enc_fwd.visit_groups_mut(&mut |n, d| f(&format!("enc_fwd.{n}"), d));
        if let Some(e) = &mut self.enc_bwd {
            e.visit_groups_mut(&mut |n, d| f(&format!("enc_bwd.{n}"), d));
        }
        self.proj.visit_groups_mut(&mut |n, d| f(&format!("proj.{n}"), d));
        if let Some(c) = &mut self.crf {
            c.visit_groups_mut(&mut |n, d| f(&format!("crf.{n}"), d));
        }
    }
}

/// Deterministically initialize all parameter groups for a config. The char
/// vocabulary is required exactly when the variant has a char channel.
pub fn build(
    config: &ModelConfig,
    table: &EmbeddingTable,
    char_vocab: Option<&CharVocab>,
) -> Result<ModelParams, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let char_comp = if config.variant.use_char() {
        let vocab = char_vocab.ok_or_else(|| {
            ModelError::Config(format!("variant {} needs a char vocabulary", config.variant))
        })?;
        Some(CharComposerParams::init(vocab.len(), &mut rng))
    } else {
        None
    };
    let input_dim =
        table.dim() + if config.variant.use_char() { COMPOSED_DIM } else { 0 };
    let enc_fwd = LstmParams::init(input_dim, config.hidden, &mut rng);
    let enc_bwd = config
        .variant
        .bidirectional()
        .then(|| LstmParams::init(input_dim, config.hidden, &mut rng));
    let enc_out = config.hidden * if config.variant.bidirectional() { 2 } else { 1 };
    let proj = DenseParams::init(enc_out, NUM_TAGS, &mut rng);
    let crf = config.variant.use_crf().then(|| CrfParams::init(&mut rng));
    Ok(ModelParams { word_dim: table.dim(), char_comp, enc_fwd, enc_bwd, proj, crf })
}

enum EncTrace {
    Uni(LstmTrace),
    Bi(BilstmTrace),
}

/// Everything one sentence's backward pass needs.
struct SentenceTrace {
    compose: Vec<ComposeTrace>,
    input_masks: Vec<DropoutMask>,
    enc: EncTrace,
    out_masks: Vec<DropoutMask>,
    proj_inputs: Vec<Vec<f64>>, // post output-dropout encoder outputs
    emissions: Mat,
}

fn forward_sentence<R: Rng>(
    params: &ModelParams,
    config: &ModelConfig,
    table: &EmbeddingTable,
    char_vocab: Option<&CharVocab>,
    words: &[String],
    mode: Mode,
    rng: &mut R,
) -> Result<SentenceTrace, ModelError> {
    if words.is_empty() {
        return Err(NetError::EmptySequence.into());
    }
    let len = words.len().min(config.max_len);
    let words = &words[..len];

    let mut compose = Vec::new();
    let mut inputs = Vec::with_capacity(len);
    let mut input_masks = Vec::with_capacity(len);
    for w in words {
        let mut rep = table.lookup(w).to_vec();
        if let Some(c) = &params.char_comp {
            let vocab = char_vocab.ok_or_else(|| {
                ModelError::Config("char variant forwarded without a char vocabulary".into())
            })?;
            let (out, trace) = compose_forward(w, vocab, c, config.dropout, mode, rng)?;
            rep.extend(out);
            compose.push(trace);
        }
        let mask = match mode {
            Mode::Train => DropoutMask::sample(rep.len(), config.dropout, rng),
            Mode::Infer => DropoutMask::identity(rep.len()),
        };
        inputs.push(mask.apply(&rep));
        input_masks.push(mask);
    }

    let (enc, outputs) = match &params.enc_bwd {
        Some(bwd) => {
            let trace = bilstm_forward(&inputs, &params.enc_fwd, bwd)?;
            let outputs = trace.outputs();
            (EncTrace::Bi(trace), outputs)
        }
        None => {
            let trace = lstm_forward(&inputs, &params.enc_fwd)?;
            let outputs = (0..len).map(|t| trace.hidden(t).to_vec()).collect();
            (EncTrace::Uni(trace), outputs)
        }
    };

    let mut out_masks = Vec::with_capacity(len);
    let mut proj_inputs = Vec::with_capacity(len);
    let mut emissions = Mat::zeros(len, NUM_TAGS);
    for (t, out) in outputs.iter().enumerate() {
        let mask = match mode {
            Mode::Train => DropoutMask::sample(out.len(), config.dropout, rng),
            Mode::Infer => DropoutMask::identity(out.len()),
        };
        let dropped = mask.apply(out);
        let scores = params.proj.forward(&dropped);
        for (j, &s) in scores.iter().enumerate() {
            emissions.set(t, j, s);
        }
        out_masks.push(mask);
        proj_inputs.push(dropped);
    }

    Ok(SentenceTrace { compose, input_masks, enc, out_masks, proj_inputs, emissions })
}

fn backward_sentence(
    trace: &SentenceTrace,
    params: &ModelParams,
    d_emissions: &Mat,
    grads: &mut ModelParams,
) {
    let len = trace.emissions.rows();
    let mut d_enc_out = Vec::with_capacity(len);
    for t in 0..len {
        let d_dropped =
            params.proj.backward(&trace.proj_inputs[t], d_emissions.row(t), &mut grads.proj);
        d_enc_out.push(trace.out_masks[t].backward(&d_dropped));
    }

    let d_inputs = match (&trace.enc, &params.enc_bwd) {
        (EncTrace::Bi(bi), Some(bwd)) => bilstm_backward(
            bi,
            &params.enc_fwd,
            bwd,
            &d_enc_out,
            &mut grads.enc_fwd,
            grads.enc_bwd.as_mut().expect("grads mirror params"),
        ),
        (EncTrace::Uni(uni), None) => {
            lstm_backward(uni, &params.enc_fwd, &d_enc_out, &mut grads.enc_fwd)
        }
        _ => unreachable!("trace and params disagree on directionality"),
    };

    if let Some(c) = &params.char_comp {
        let g = grads.char_comp.as_mut().expect("grads mirror params");
        for (t, d_in) in d_inputs.iter().enumerate() {
            let d_rep = trace.input_masks[t].backward(d_in);
            compose_backward(&trace.compose[t], c, &d_rep[params.word_dim..], g);
        }
    }
    // word-channel gradient is dropped: pre-trained vectors stay frozen
}

/// Per-token tag scores for one sentence (truncated to `max_len`). Fully
/// deterministic in infer mode.
pub fn forward(
    params: &ModelParams,
    config: &ModelConfig,
    table: &EmbeddingTable,
    char_vocab: Option<&CharVocab>,
    words: &[String],
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<Mat, ModelError> {
    forward_sentence(params, config, table, char_vocab, words, mode, rng)
        .map(|trace| trace.emissions)
}

/// One sentence of a padded batch. `gold` and `mask` run to the padded
/// length; `words` keeps the true (truncated) length.
#[derive(Debug, Clone)]
pub struct BatchSentence {
    pub words: Vec<String>,
    pub gold: Vec<usize>,
    pub mask: Vec<bool>,
}

/// A padded mini-batch. Masked positions contribute nothing to the loss or
/// to any gradient.
#[derive(Debug, Clone)]
pub struct SequenceBatch {
    pub padded_len: usize,
    pub sentences: Vec<BatchSentence>,
}

impl SequenceBatch {
    pub fn from_sentences(sentences: &[&TaggedSentence], max_len: usize) -> SequenceBatch {
        let padded_len =
            sentences.iter().map(|s| s.tokens.len().min(max_len)).max().unwrap_or(0);
        let sentences = sentences
            .iter()
            .map(|s| {
                let len = s.tokens.len().min(max_len);
                let words: Vec<String> =
                    s.tokens[..len].iter().map(|t| t.text.clone()).collect();
                let mut gold: Vec<usize> = s.tags[..len].iter().map(|t| t.index()).collect();
                let mut mask = vec![true; len];
                gold.resize(padded_len, 0);
                mask.resize(padded_len, false);
                BatchSentence { words, gold, mask }
            })
            .collect();
        SequenceBatch { padded_len, sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Derive an independent seed from a base seed and a stream index
/// (splitmix64), so nested RNG streams stay stable regardless of batch
/// composition or execution order.
pub fn derive_seed(base: u64, idx: u64) -> u64 {
    let mut z = base.wrapping_add(idx.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Batch loss and gradients. CRF variants: mean per-sentence negative
/// log-likelihood. Softmax variants: cross-entropy averaged over all
/// unmasked positions in the batch.
pub fn batch_loss(
    params: &ModelParams,
    config: &ModelConfig,
    table: &EmbeddingTable,
    char_vocab: Option<&CharVocab>,
    batch: &SequenceBatch,
    mode: Mode,
    noise_seed: u64,
) -> Result<(f64, ModelParams), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Config("empty batch".into()));
    }
    let mut grads = params.zeros_like();
    let mut total = 0.0;

    let total_positions: usize = batch
        .sentences
        .iter()
        .map(|s| s.mask.iter().filter(|&&m| m).count())
        .sum();
    let n_sentences = batch.len() as f64;

    for (idx, sent) in batch.sentences.iter().enumerate() {
        let len = sent.words.len();
        if len == 0 {
            return Err(NetError::EmptySequence.into());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(noise_seed, idx as u64));
        let trace =
            forward_sentence(params, config, table, char_vocab, &sent.words, mode, &mut rng)?;

        match &params.crf {
            Some(crf) => {
                let (nll, d_e, d_crf) = crf_nll(&trace.emissions, &sent.gold[..len], crf);
                let scale = 1.0 / n_sentences;
                total += nll * scale;
                let mut d_emissions = d_e;
                for v in d_emissions.data_mut() {
                    *v *= scale;
                }
                let g_crf = grads.crf.as_mut().expect("grads mirror params");
                for (g, d) in g_crf.start.iter_mut().zip(&d_crf.start) {
                    *g += d * scale;
                }
                for (g, d) in g_crf.end.iter_mut().zip(&d_crf.end) {
                    *g += d * scale;
                }
                for (g, d) in g_crf.trans.data_mut().iter_mut().zip(d_crf.trans.data()) {
                    *g += d * scale;
                }
                backward_sentence(&trace, params, &d_emissions, &mut grads);
            }
            None => {
                let (mean, grad) =
                    softmax_xent(&trace.emissions, &sent.gold[..len], &sent.mask[..len]);
                // softmax_xent averages over this sentence's positions;
                // rescale to the batch-wide position count
                let rescale = len as f64 / total_positions as f64;
                total += mean * rescale;
                let mut d_emissions = grad;
                for v in d_emissions.data_mut() {
                    *v *= rescale;
                }
                backward_sentence(&trace, params, &d_emissions, &mut grads);
            }
        }
    }
    Ok((total, grads))
}

/// Tag a sentence. CRF variants decode with Viterbi (optionally with the
/// hard IOB constraint mask); softmax variants take the per-position argmax.
/// Tokens beyond `max_len` get `O`.
pub fn predict(
    params: &ModelParams,
    config: &ModelConfig,
    table: &EmbeddingTable,
    char_vocab: Option<&CharVocab>,
    words: &[String],
) -> Result<Vec<IobTag>, ModelError> {
    if words.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let emissions =
        forward(params, config, table, char_vocab, words, Mode::Infer, &mut rng)?;
    let len = emissions.rows();

    let ids: Vec<usize> = match &params.crf {
        Some(crf) => viterbi(&emissions, crf, config.constrained_decode).0,
        None => (0..len)
            .map(|t| {
                let row = emissions.row(t);
                let mut best = 0usize;
                for j in 1..row.len() {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect(),
    };

    let mut tags: Vec<IobTag> =
        ids.into_iter().map(|i| IobTag::from_index(i).expect("tag id in range")).collect();
    tags.resize(words.len(), IobTag::O);
    Ok(tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::param_count;

    fn stub_table(dim: usize) -> EmbeddingTable {
        let words = ["the", "battery", "life", "is", "great", "screen", "bad"];
        let pairs = words.iter().enumerate().map(|(i, w)| {
            (w.to_string(), (0..dim).map(|j| ((i * dim + j) as f64 * 0.01).sin() * 0.3).collect())
        });
        EmbeddingTable::from_pairs(dim, pairs, 99).0
    }

    fn words(text: &str) -> Vec<String> {
        crate::corpus::tokenize(text).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn variant_flags_enumerate_all_eight_combinations() {
        let mut seen = std::collections::BTreeSet::new();
        for v in Variant::ALL {
            seen.insert((v.use_char(), v.bidirectional(), v.use_crf()));
            assert_eq!(Variant::parse(v.as_str()), Some(v));
        }
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn variant_serde_uses_table_names() {
        let json = serde_json::to_string(&Variant::WoChBiLstmCrf).unwrap();
        assert_eq!(json, "\"WoCh-BiLSTM-CRF\"");
        let back: Variant = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Variant::WoChBiLstmCrf);
    }

    #[test]
    fn build_registers_the_right_groups() {
        let table = stub_table(8);
        let vocab = CharVocab::from_words(["battery", "life"]);

        let mut cfg = ModelConfig::new(Variant::WoLstm);
        cfg.hidden = 4;
        let p = build(&cfg, &table, None).unwrap();
        assert!(p.char_comp.is_none() && p.enc_bwd.is_none() && p.crf.is_none());
        assert_eq!(p.proj.input_dim(), 4);

        let mut cfg = ModelConfig::new(Variant::WoChBiLstmCrf);
        cfg.hidden = 4;
        let p = build(&cfg, &table, Some(&vocab)).unwrap();
        assert!(p.char_comp.is_some() && p.enc_bwd.is_some() && p.crf.is_some());
        assert_eq!(p.proj.input_dim(), 8);
        assert_eq!(p.input_dim(), 8 + COMPOSED_DIM);
        assert!(param_count(&p) > 0);

        // char variant without a vocabulary is a configuration error
        assert!(build(&cfg, &table, None).is_err());
    }

    #[test]
    fn registry_names_every_group_exactly_once() {
        let table = stub_table(8);
        let vocab = CharVocab::from_words(["battery", "life"]);
        for variant in Variant::ALL {
            let mut cfg = ModelConfig::new(variant);
            cfg.hidden = 3;
            let p = build(&cfg, &table, Some(&vocab)).unwrap();
            let meta = crate::net::group_meta(&p);
            let names: std::collections::BTreeSet<&str> =
                meta.iter().map(|(n, _, _)| n.as_str()).collect();
            assert_eq!(names.len(), meta.len(), "{variant}: duplicate group names");
            let expected = 12
                + if variant.use_char() { 1 + 24 + 2 } else { 0 }
                + if variant.bidirectional() { 12 } else { 0 }
                + 2
                + if variant.use_crf() { 3 } else { 0 };
            assert_eq!(meta.len(), expected, "{variant}");
        }
    }

    #[test]
    fn build_is_seed_deterministic() {
        let table = stub_table(8);
        let vocab = CharVocab::from_words(["battery"]);
        let mut cfg = ModelConfig::new(Variant::WoChBiLstmCrf);
        cfg.hidden = 3;
        cfg.seed = 17;
        let a = build(&cfg, &table, Some(&vocab)).unwrap();
        let b = build(&cfg, &table, Some(&vocab)).unwrap();
        assert_eq!(a, b);
        cfg.seed = 18;
        let c = build(&cfg, &table, Some(&vocab)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn forward_shape_and_determinism() {
        let table = stub_table(8);
        let vocab = CharVocab::from_words(["the", "battery", "life", "is", "great"]);
        let mut cfg = ModelConfig::new(Variant::WoChBiLstm);
        cfg.hidden = 5;
        cfg.seed = 3;
        let p = build(&cfg, &table, Some(&vocab)).unwrap();
        let w = words("the battery life is great");

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let first = forward(&p, &cfg, &table, Some(&vocab), &w, Mode::Infer, &mut rng).unwrap();
        assert_eq!((first.rows(), first.cols()), (5, NUM_TAGS));
        for _ in 0..100 {
            let again =
                forward(&p, &cfg, &table, Some(&vocab), &w, Mode::Infer, &mut rng).unwrap();
            assert_eq!(again, first);
        }
    }

    #[test]
    fn forward_rejects_empty_sentence() {
        let table = stub_table(8);
        let cfg = ModelConfig::new(Variant::WoLstm);
        let p = build(&cfg, &table, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(forward(&p, &cfg, &table, None, &[], Mode::Infer, &mut rng).is_err());
    }

    #[test]
    fn predict_handles_truncation_with_o_tail() {
        let table = stub_table(8);
        let mut cfg = ModelConfig::new(Variant::WoLstm);
        cfg.hidden = 3;
        cfg.max_len = 4;
        let p = build(&cfg, &table, None).unwrap();
        let w = words("the battery life is great screen bad");
        let tags = predict(&p, &cfg, &table, None, &w).unwrap();
        assert_eq!(tags.len(), w.len());
        assert!(tags[4..].iter().all(|&t| t == IobTag::O));
    }

    #[test]
    fn predict_single_token() {
        let table = stub_table(8);
        let mut cfg = ModelConfig::new(Variant::WoLstmCrf);
        cfg.hidden = 3;
        let p = build(&cfg, &table, None).unwrap();
        let tags = predict(&p, &cfg, &table, None, &words("battery")).unwrap();
        assert_eq!(tags.len(), 1);
    }

    #[test]
    fn batch_of_identical_sentences_has_single_sentence_loss() {
        let table = stub_table(8);
        let sent = {
            let (raw, _) = crate::corpus::parse_semeval(
                r#"<sentences><sentence id="1"><text>great battery life</text>
                   <aspectTerms><aspectTerm term="battery life" from="6" to="18"/></aspectTerms>
                   </sentence></sentences>"#,
            )
            .unwrap();
            crate::corpus::to_tagged_sentences(&raw).0.remove(0)
        };
        for variant in [Variant::WoLstm, Variant::WoLstmCrf] {
            let mut cfg = ModelConfig::new(variant);
            cfg.hidden = 3;
            cfg.dropout = 0.0;
            let p = build(&cfg, &table, None).unwrap();
            let single = SequenceBatch::from_sentences(&[&sent], cfg.max_len);
            let triple = SequenceBatch::from_sentences(&[&sent, &sent, &sent], cfg.max_len);
            let (l1, _) = batch_loss(&p, &cfg, &table, None, &single, Mode::Train, 0).unwrap();
            let (l3, _) = batch_loss(&p, &cfg, &table, None, &triple, Mode::Train, 0).unwrap();
            assert!((l1 - l3).abs() < 1e-12, "{variant}: {l1} vs {l3}");
        }
    }

    #[test]
    fn perfect_emissions_give_near_zero_loss() {
        // a projection rigged to echo gold one-hots scaled hugely
        let table = stub_table(2);
        let mut cfg = ModelConfig::new(Variant::WoLstm);
        cfg.hidden = 3;
        cfg.dropout = 0.0;
        let sent = {
            let (raw, _) = crate::corpus::parse_semeval(
                r#"<sentences><sentence id="1"><text>bad screen</text>
                   <aspectTerms><aspectTerm term="screen" from="4" to="10"/></aspectTerms>
                   </sentence></sentences>"#,
            )
            .unwrap();
            crate::corpus::to_tagged_sentences(&raw).0.remove(0)
        };
        // train a tiny model long enough to overfit two tokens
        let mut p = build(&cfg, &table, None).unwrap();
        let batch = SequenceBatch::from_sentences(&[&sent], cfg.max_len);
        let mut st = crate::net::AdamState::new(&p, crate::net::AdamHyper { lr: 0.05, ..Default::default() });
        for _ in 0..400 {
            let (_, grads) = batch_loss(&p, &cfg, &table, None, &batch, Mode::Train, 0).unwrap();
            crate::net::adam_update(&mut p, &grads, &mut st).unwrap();
        }
        let (loss, _) = batch_loss(&p, &cfg, &table, None, &batch, Mode::Train, 0).unwrap();
        assert!(loss < 1e-3, "loss {loss}");
    }

    #[test]
    fn masked_padding_changes_nothing() {
        let table = stub_table(8);
        let short = {
            let (raw, _) = crate::corpus::parse_semeval(
                r#"<sentences><sentence id="1"><text>great battery</text>
                   <aspectTerms><aspectTerm term="battery" from="6" to="13"/></aspectTerms>
                   </sentence></sentences>"#,
            )
            .unwrap();
            crate::corpus::to_tagged_sentences(&raw).0.remove(0)
        };
        let long = {
            let (raw, _) = crate::corpus::parse_semeval(
                r#"<sentences><sentence id="2"><text>the screen is great and bad</text></sentence></sentences>"#,
            )
            .unwrap();
            crate::corpus::to_tagged_sentences(&raw).0.remove(0)
        };
        let mut cfg = ModelConfig::new(Variant::WoBiLstm);
        cfg.hidden = 3;
        cfg.dropout = 0.0;
        let p = build(&cfg, &table, None).unwrap();

        // the short sentence alone (padded_len = 2) vs padded next to a
        // longer one (padded_len = 6): identical per-sentence trace, so the
        // combined loss decomposes exactly
        let alone = SequenceBatch::from_sentences(&[&short], cfg.max_len);
        let both = SequenceBatch::from_sentences(&[&short, &long], cfg.max_len);
        let only_long = SequenceBatch::from_sentences(&[&long], cfg.max_len);
        let (l_alone, _) = batch_loss(&p, &cfg, &table, None, &alone, Mode::Train, 0).unwrap();
        let (l_both, _) = batch_loss(&p, &cfg, &table, None, &both, Mode::Train, 0).unwrap();
        let (l_long, _) = batch_loss(&p, &cfg, &table, None, &only_long, Mode::Train, 0).unwrap();
        let expected = (l_alone * 2.0 + l_long * 6.0) / 8.0;
        assert!((l_both - expected).abs() < 1e-12, "{l_both} vs {expected}");
    }
}
