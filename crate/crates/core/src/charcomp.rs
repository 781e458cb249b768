//! Character-level word composer: char embeddings → forward and backward
//! char LSTMs → concatenated last states → tanh projection, with dropout on
//! the result at train time.

use rand::Rng;

use crate::embeddings::{CharVocab, EmbeddingTable};
use crate::net::mat::{add_assign, Mat};
use crate::net::{
    lstm_backward, lstm_forward, DenseParams, DropoutMask, LstmParams, LstmTrace, Mode, NetError,
    ParamSet,
};

/// Per-character embedding width.
pub const CHAR_EMB_DIM: usize = 25;
/// Concatenated forward+backward last states, and the projection width.
pub const COMPOSED_DIM: usize = 2 * CHAR_EMB_DIM;

#[derive(Debug, Clone, PartialEq)]
pub struct CharComposerParams {
    /// |C| × 25; row 0 is the unknown-character embedding.
    pub emb: Mat,
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    /// 50 → 50 with tanh.
    pub proj: DenseParams,
}

impl CharComposerParams {
    pub fn zeros(vocab_len: usize) -> CharComposerParams {
        CharComposerParams {
            emb: Mat::zeros(vocab_len, CHAR_EMB_DIM),
            fwd: LstmParams::zeros(CHAR_EMB_DIM, CHAR_EMB_DIM),
            bwd: LstmParams::zeros(CHAR_EMB_DIM, CHAR_EMB_DIM),
            proj: DenseParams::zeros(COMPOSED_DIM, COMPOSED_DIM),
        }
    }

    /// Char embeddings drawn uniformly from [-0.25, 0.25]; LSTMs and the
    /// projection use the shared initialization scheme.
    pub fn init<R: Rng>(vocab_len: usize, rng: &mut R) -> CharComposerParams {
        CharComposerParams {
            emb: Mat::uniform(vocab_len, CHAR_EMB_DIM, -0.25, 0.25, rng),
            fwd: LstmParams::init(CHAR_EMB_DIM, CHAR_EMB_DIM, rng),
            bwd: LstmParams::init(CHAR_EMB_DIM, CHAR_EMB_DIM, rng),
            proj: DenseParams::init(COMPOSED_DIM, COMPOSED_DIM, rng),
        }
    }

    pub fn vocab_len(&self) -> usize {
        self.emb.rows()
    }
}

impl ParamSet for CharComposerParams {
    fn visit_groups(&self, f: &mut dyn FnMut(&str, &[f64], &[usize])) {
        f("emb", self.emb.data(), &[self.emb.rows(), CHAR_EMB_DIM]);
        self.fwd.visit_groups(&mut |n, d, s| f(&format!("fwd.{n}"), d, s));
        self.bwd.visit_groups(&mut |n, d, s| f(&format!("bwd.{n}"), d, s));
        self.proj.visit_groups(&mut |n, d, s| f(&format!("proj.{n}"), d, s));
    }

    fn visit_groups_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("emb", self.emb.data_mut());
        self.fwd.visit_groups_mut(&mut |n, d| f(&format!("fwd.{n}"), d));
        self.bwd.visit_groups_mut(&mut |n, d| f(&format!("bwd.{n}"), d));
        self.proj.visit_groups_mut(&mut |n, d| f(&format!("proj.{n}"), d));
    }
}

/// Intermediates needed to backpropagate one composed word.
#[derive(Debug, Clone)]
pub struct ComposeTrace {
    char_ids: Vec<usize>,
    fwd: LstmTrace,
    bwd: LstmTrace,
    concat: Vec<f64>,
    /// Projection output after tanh, before dropout.
    activated: Vec<f64>,
    mask: DropoutMask,
}

pub fn compose_forward<R: Rng>(
    word: &str,
    vocab: &CharVocab,
    p: &CharComposerParams,
    dropout_rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Vec<f64>, ComposeTrace), NetError> {
    let char_ids: Vec<usize> = word.chars().map(|c| vocab.id(c)).collect();
    if char_ids.is_empty() {
        return Err(NetError::EmptySequence);
    }
    let vectors: Vec<Vec<f64>> = char_ids.iter().map(|&id| p.emb.row(id).to_vec()).collect();
    let reversed: Vec<Vec<f64>> = vectors.iter().rev().cloned().collect();

    let fwd = lstm_forward(&vectors, &p.fwd)?;
    let bwd = lstm_forward(&reversed, &p.bwd)?;
    let mut concat = fwd.last_hidden().to_vec();
    concat.extend_from_slice(bwd.last_hidden());

    let activated: Vec<f64> = p.proj.forward(&concat).iter().map(|v| v.tanh()).collect();
    let mask = match mode {
        Mode::Train => DropoutMask::sample(activated.len(), dropout_rate, rng),
        Mode::Infer => DropoutMask::identity(activated.len()),
    };
    let out = mask.apply(&activated);
    Ok((out, ComposeTrace { char_ids, fwd, bwd, concat, activated, mask }))
}

/// Build a word vector from its characters (unknown characters map to the
/// reserved id-0 row). Deterministic in infer mode.
pub fn compose_word<R: Rng>(
    word: &str,
    vocab: &CharVocab,
    p: &CharComposerParams,
    dropout_rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Vec<f64>, NetError> {
    compose_forward(word, vocab, p, dropout_rate, mode, rng).map(|(out, _)| out)
}

/// Accumulate gradients for one composed word.
pub fn compose_backward(
    trace: &ComposeTrace,
    p: &CharComposerParams,
    d_out: &[f64],
    grads: &mut CharComposerParams,
) {
    let d_activated = trace.mask.backward(d_out);
    let d_pre: Vec<f64> = d_activated
        .iter()
        .zip(&trace.activated)
        .map(|(d, y)| d * (1.0 - y * y))
        .collect();
    let d_concat = p.proj.backward(&trace.concat, &d_pre, &mut grads.proj);

    let n = trace.char_ids.len();
    // gradient enters each scan only through its final hidden state
    let mut d_fwd_h = vec![vec![0.0; CHAR_EMB_DIM]; n];
    d_fwd_h[n - 1].copy_from_slice(&d_concat[..CHAR_EMB_DIM]);
    let mut d_bwd_h = vec![vec![0.0; CHAR_EMB_DIM]; n];
    d_bwd_h[n - 1].copy_from_slice(&d_concat[CHAR_EMB_DIM..]);

    let dx_fwd = lstm_backward(&trace.fwd, &p.fwd, &d_fwd_h, &mut grads.fwd);
    let dx_bwd = lstm_backward(&trace.bwd, &p.bwd, &d_bwd_h, &mut grads.bwd);

    for (t, &id) in trace.char_ids.iter().enumerate() {
        let row = grads.emb.row_mut(id);
        add_assign(row, &dx_fwd[t]);
        add_assign(row, &dx_bwd[n - 1 - t]);
    }
}

/// Per-token input to the encoder: the word-channel lookup, concatenated
/// with the 50-dim character composition when the char channel is on.
pub fn word_representation<R: Rng>(
    token: &str,
    table: &EmbeddingTable,
    composer: Option<(&CharComposerParams, &CharVocab)>,
    dropout_rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Vec<f64>, NetError> {
    let mut rep = table.lookup(token).to_vec();
    if let Some((p, vocab)) = composer {
        rep.extend(compose_word(token, vocab, p, dropout_rate, mode, rng)?);
    }
    Ok(rep)
}
