//! SemEval-2014 ABSA corpus handling: XML ingestion, tokenization with
//! character offsets, and conversion between aspect spans and IOB tag
//! sequences.
//!
//! Offsets throughout this module are *character* offsets (not bytes), which
//! is what the SemEval `from`/`to` attributes use.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifies the tokenizer rules baked into this build. Recorded in run
/// manifests and checkpoints so outputs can be traced to the exact splitter.
pub const TOKENIZER_VERSION: &str = "ws-punct-1";

/// Punctuation characters split off token edges by [`tokenize`].
const EDGE_PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '\'', '"', '(', ')', '[', ']'];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("xml parse error: {0}")]
    Xml(String),
    #[error("conll parse error at line {line}: {msg}")]
    Conll { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A token with its character span into the source sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Character offset, inclusive.
    pub start: usize,
    /// Character offset, exclusive.
    pub end: usize,
}

/// An annotated aspect term with its character span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectSpan {
    pub term: String,
    pub from: usize,
    pub to: usize,
}

/// Per-token chunk label. Exactly three values; `B-aspect` opens a chunk,
/// `I-aspect` continues it, `O` is outside any chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IobTag {
    O,
    #[serde(rename = "B-aspect")]
    B,
    #[serde(rename = "I-aspect")]
    I,
}

/// Number of distinct tags (the CRF's K).
pub const NUM_TAGS: usize = 3;

impl IobTag {
    pub fn index(self) -> usize {
        match self {
            IobTag::O => 0,
            IobTag::B => 1,
            IobTag::I => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<IobTag> {
        match i {
            0 => Some(IobTag::O),
            1 => Some(IobTag::B),
            2 => Some(IobTag::I),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IobTag::O => "O",
            IobTag::B => "B-aspect",
            IobTag::I => "I-aspect",
        }
    }

    pub fn parse(s: &str) -> Option<IobTag> {
        match s {
            "O" => Some(IobTag::O),
            "B-aspect" => Some(IobTag::B),
            "I-aspect" => Some(IobTag::I),
            _ => None,
        }
    }
}

impl fmt::Display for IobTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A tokenized sentence with one IOB tag per token; the unit of training and
/// evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub tags: Vec<IobTag>,
}

impl TaggedSentence {
    /// Gold chunks as inclusive (first, last) token-index pairs.
    pub fn chunks(&self) -> Vec<(usize, usize)> {
        decode_chunks(&self.tags)
    }
}

/// One `<sentence>` record from a SemEval file, before tokenization.
#[derive(Debug, Clone)]
pub struct RawSentence {
    pub id: String,
    pub text: String,
    pub spans: Vec<AspectSpan>,
}

/// Parse/validation noise produced while ingesting a corpus. Warnings keep
/// the sentence; errors drop it.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestReport {
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

impl IngestReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty() && self.errors.is_empty()
    }
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Substring by character offsets, `[start, end)`.
pub fn char_slice(s: &str, start: usize, end: usize) -> String {
    s.chars().skip(start).take(end.saturating_sub(start)).collect()
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parse a SemEval-2014 ABSA XML document into raw sentence records.
///
/// Sentences whose aspect offsets are inconsistent (`from >= to`, or offsets
/// outside the sentence text) are skipped and recorded in the report. A
/// `term` attribute that does not match the text at `[from, to)` after
/// whitespace normalization is kept verbatim but noted as a warning.
pub fn parse_semeval(xml: &str) -> Result<(Vec<RawSentence>, IngestReport), CorpusError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| CorpusError::Xml(e.to_string()))?;
    let mut report = IngestReport::default();
    let mut out = Vec::new();

    for sent in doc.descendants().filter(|n| n.has_tag_name("sentence")) {
        let id = sent.attribute("id").unwrap_or("").to_string();
        let text = sent
            .children()
            .find(|c| c.has_tag_name("text"))
            .and_then(|t| t.text())
            .unwrap_or("")
            .to_string();
        let text_chars = char_len(&text);

        let mut spans = Vec::new();
        let mut bad = false;
        for term in sent.descendants().filter(|n| n.has_tag_name("aspectTerm")) {
            let word = term.attribute("term").unwrap_or("").to_string();
            let from: usize = match term.attribute("from").and_then(|v| v.parse().ok()) {
                Some(v) => v,
                None => {
                    report
                        .errors
                        .push(format!("sentence {id}: aspectTerm with unparsable `from`"));
                    bad = true;
                    continue;
                }
            };
            let to: usize = match term.attribute("to").and_then(|v| v.parse().ok()) {
                Some(v) => v,
                None => {
                    report
                        .errors
                        .push(format!("sentence {id}: aspectTerm with unparsable `to`"));
                    bad = true;
                    continue;
                }
            };
            if from >= to || to > text_chars {
                report.errors.push(format!(
                    "sentence {id}: invalid span [{from}, {to}) for text of {text_chars} chars"
                ));
                bad = true;
                continue;
            }
            let actual = char_slice(&text, from, to);
            if normalize_ws(&actual) != normalize_ws(&word) {
                report.warnings.push(format!(
                    "sentence {id}: term {word:?} != text at [{from}, {to}) ({actual:?})"
                ));
            }
            spans.push(AspectSpan { term: word, from, to });
        }

        if bad {
            continue;
        }
        out.push(RawSentence { id, text, spans });
    }

    Ok((out, report))
}

/// Deterministic whitespace + edge-punctuation tokenizer.
///
/// Splits on whitespace, then peels the characters `.,!?;:'"()[]` off token
/// edges one at a time, each becoming its own token. Inner punctuation
/// (contractions, hyphens) is left alone. Offsets always recover the
/// original text.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && !chars[j].is_whitespace() {
            j += 1;
        }
        // [i, j) is a whitespace-delimited word; peel edge punctuation.
        let mut a = i;
        let mut b = j;
        let mut leading = Vec::new();
        while a < b && EDGE_PUNCT.contains(&chars[a]) {
            leading.push((a, a + 1));
            a += 1;
        }
        let mut trailing = Vec::new();
        while b > a && EDGE_PUNCT.contains(&chars[b - 1]) {
            trailing.push((b - 1, b));
            b -= 1;
        }
        for (s, e) in leading {
            tokens.push(Token { text: chars[s..e].iter().collect(), start: s, end: e });
        }
        if a < b {
            tokens.push(Token { text: chars[a..b].iter().collect(), start: a, end: b });
        }
        for (s, e) in trailing.into_iter().rev() {
            tokens.push(Token { text: chars[s..e].iter().collect(), start: s, end: e });
        }
        i = j;
    }
    tokens
}

/// Map aspect spans onto a token sequence as IOB tags.
///
/// A token whose `[start, end)` intersects a span gets `B-aspect` if it is
/// the first intersecting token of that span, `I-aspect` otherwise. A span
/// boundary that falls strictly inside a token keeps the whole token in the
/// chunk and records an alignment warning.
pub fn encode_iob(tokens: &[Token], spans: &[AspectSpan]) -> (Vec<IobTag>, Vec<String>) {
    let mut tags = vec![IobTag::O; tokens.len()];
    let mut warnings = Vec::new();

    let mut sorted: Vec<&AspectSpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.from, s.to));

    for span in sorted {
        let mut first = true;
        for (idx, tok) in tokens.iter().enumerate() {
            let intersects = tok.start < span.to && span.from < tok.end;
            if !intersects {
                continue;
            }
            if tok.start < span.from || tok.end > span.to {
                warnings.push(format!(
                    "span {:?} [{}, {}) cuts token {:?} [{}, {}); whole token included",
                    span.term, span.from, span.to, tok.text, tok.start, tok.end
                ));
            }
            tags[idx] = if first { IobTag::B } else { IobTag::I };
            first = false;
        }
        if first {
            warnings.push(format!(
                "span {:?} [{}, {}) intersects no token",
                span.term, span.from, span.to
            ));
        }
    }

    (tags, warnings)
}

/// Extract chunks as inclusive (first, last) token-index pairs.
///
/// Accepts invalid IOB from model output: an `I-aspect` with no open chunk
/// opens one, as if it were `B-aspect`.
pub fn decode_chunks(tags: &[IobTag]) -> Vec<(usize, usize)> {
    let mut chunks = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            IobTag::O => {
                if let Some(s) = open.take() {
                    chunks.push((s, i - 1));
                }
            }
            IobTag::B => {
                if let Some(s) = open.take() {
                    chunks.push((s, i - 1));
                }
                open = Some(i);
            }
            IobTag::I => {
                if open.is_none() {
                    // repair: chunk-opening I is treated as B
                    open = Some(i);
                }
            }
        }
    }
    if let Some(s) = open {
        chunks.push((s, tags.len() - 1));
    }
    chunks
}

/// Tokenize and IOB-encode raw sentence records.
pub fn to_tagged_sentences(raw: &[RawSentence]) -> (Vec<TaggedSentence>, Vec<String>) {
    let mut out = Vec::with_capacity(raw.len());
    let mut warnings = Vec::new();
    for r in raw {
        let tokens = tokenize(&r.text);
        let (tags, mut w) = encode_iob(&tokens, &r.spans);
        for msg in w.drain(..) {
            warnings.push(format!("sentence {}: {msg}", r.id));
        }
        out.push(TaggedSentence { id: r.id.clone(), text: r.text.clone(), tokens, tags });
    }
    (out, warnings)
}

/// Write sentences as two-column CoNLL: `token<TAB>tag`, blank line between
/// sentences.
pub fn write_conll<W: Write>(w: &mut W, sentences: &[TaggedSentence]) -> Result<(), CorpusError> {
    for (i, sent) in sentences.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        for (tok, tag) in sent.tokens.iter().zip(&sent.tags) {
            writeln!(w, "{}\t{}", tok.text, tag)?;
        }
    }
    Ok(())
}

/// Read two-column CoNLL back into sentences. Text and offsets are
/// reconstructed by joining tokens with single spaces; sentence ids are the
/// 0-based record index.
pub fn read_conll<R: BufRead>(r: R) -> Result<Vec<TaggedSentence>, CorpusError> {
    let mut sentences = Vec::new();
    let mut words: Vec<String> = Vec::new();
    let mut tags: Vec<IobTag> = Vec::new();

    let flush = |words: &mut Vec<String>, tags: &mut Vec<IobTag>, out: &mut Vec<TaggedSentence>| {
        if words.is_empty() {
            return;
        }
        let mut tokens = Vec::with_capacity(words.len());
        let mut text = String::new();
        let mut offset = 0usize;
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                text.push(' ');
                offset += 1;
            }
            let len = char_len(w);
            tokens.push(Token { text: w.clone(), start: offset, end: offset + len });
            text.push_str(w);
            offset += len;
        }
        out.push(TaggedSentence {
            id: out.len().to_string(),
            text,
            tokens,
            tags: std::mem::take(tags),
        });
        words.clear();
    };

    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            flush(&mut words, &mut tags, &mut sentences);
            continue;
        }
        let (word, tag) = line.split_once('\t').ok_or(CorpusError::Conll {
            line: lineno + 1,
            msg: "expected `token<TAB>tag`".into(),
        })?;
        let tag = IobTag::parse(tag.trim()).ok_or(CorpusError::Conll {
            line: lineno + 1,
            msg: format!("unknown tag {:?}", tag.trim()),
        })?;
        words.push(word.to_string());
        tags.push(tag);
    }
    flush(&mut words, &mut tags, &mut sentences);
    Ok(sentences)
}

/// Case-insensitive vocabulary over the token texts of a set of sentences.
pub fn vocabulary(sentences: &[TaggedSentence]) -> BTreeSet<String> {
    sentences
        .iter()
        .flat_map(|s| s.tokens.iter())
        .map(|t| t.text.to_lowercase())
        .collect()
}
