//! Model checkpoints: one file holding a single-line JSON header (config,
//! shapes, char vocabulary, tokenizer version) followed by every parameter
//! group as raw little-endian f64, in header order.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TOKENIZER_VERSION;
use crate::embeddings::CharVocab;
use crate::model::{ModelConfig, ModelError, ModelParams};
use crate::net::{group_meta, ParamSet};

const FORMAT: &str = "atag-checkpoint-1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("header error: {0}")]
    Header(#[from] serde_json::Error),
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupMeta {
    pub name: String,
    pub shape: Vec<usize>,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub config: ModelConfig,
    pub word_dim: usize,
    /// Seed the word-vector table's UNK row was drawn with; reloading the
    /// vectors with this seed reproduces the exact training-time lookups.
    pub embedding_unk_seed: u64,
    pub tokenizer_version: String,
    /// Ordered char list (id 1 onward; id 0 is the reserved UNK).
    pub char_vocab: Option<String>,
    pub groups: Vec<GroupMeta>,
}

pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams,
    pub char_vocab: Option<CharVocab>,
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    config: &ModelConfig,
    char_vocab: Option<&CharVocab>,
    embedding_unk_seed: u64,
) -> Result<(), CheckpointError> {
    let groups = group_meta(params)
        .into_iter()
        .map(|(name, len, shape)| GroupMeta { name, shape, len })
        .collect();
    let header = CheckpointHeader {
        format: FORMAT.to_string(),
        config: config.clone(),
        word_dim: params.word_dim,
        embedding_unk_seed,
        tokenizer_version: TOKENIZER_VERSION.to_string(),
        char_vocab: char_vocab.map(|v| v.ordered_chars().iter().collect()),
        groups,
    };

    let mut payload = Vec::new();
    params.visit_groups(&mut |_, data, _| {
        for v in data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    });

    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);

    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte).map_err(|_| {
            CheckpointError::Format("missing header line terminator".into())
        })?;
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
    }
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;
    if header.format != FORMAT {
        return Err(CheckpointError::Format(format!(
            "unsupported format {:?}, expected {FORMAT:?}",
            header.format
        )));
    }

    let char_vocab = header
        .char_vocab
        .as_ref()
        .map(|s| CharVocab::from_ordered_chars(s.chars().collect()));
    let mut params = ModelParams::zeros_for(
        &header.config,
        header.word_dim,
        char_vocab.as_ref().map(|v| v.len()),
    )?;

    let expected = group_meta(&params);
    if expected.len() != header.groups.len() {
        return Err(CheckpointError::Format(format!(
            "group count mismatch: header {} vs config {}",
            header.groups.len(),
            expected.len()
        )));
    }
    for ((name, len, _), meta) in expected.iter().zip(&header.groups) {
        if name != &meta.name || *len != meta.len {
            return Err(CheckpointError::Format(format!(
                "group mismatch: header {}[{}] vs config {}[{}]",
                meta.name, meta.len, name, len
            )));
        }
    }

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let total: usize = expected.iter().map(|(_, len, _)| len).sum();
    if payload.len() != total * 8 {
        return Err(CheckpointError::Format(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            total * 8
        )));
    }

    let mut cursor = 0usize;
    params.visit_groups_mut(&mut |_, data| {
        for v in data.iter_mut() {
            let bytes: [u8; 8] = payload[cursor..cursor + 8].try_into().unwrap();
            *v = f64::from_le_bytes(bytes);
            cursor += 8;
        }
    });

    Ok(Checkpoint { header, params, char_vocab })
}
