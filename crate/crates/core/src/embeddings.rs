//! Pre-trained word-vector tables, the char vocabulary, and
//! vocabulary-coverage statistics.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no usable vector lines in {path} (expected dim {dim})")]
    Empty { path: String, dim: usize },
    #[error("empty vocabulary")]
    EmptyVocab,
}

/// Immutable word-to-vector table. Lookups never fail: exact-case match
/// first, then lowercase, then the seeded UNK row.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    matrix: Vec<f64>, // |V| * dim, row-major
    unk_row: Vec<f64>,
}

/// Counters from ingesting a vector file.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadReport {
    pub lines: usize,
    pub loaded: usize,
    pub malformed: usize,
    pub duplicates: usize,
}

impl EmbeddingTable {
    /// Build a table from (word, vector) pairs. Duplicate words keep the
    /// first occurrence. The UNK row is drawn uniformly from [-0.25, 0.25]
    /// with the given seed.
    pub fn from_pairs<I>(dim: usize, pairs: I, seed: u64) -> (EmbeddingTable, LoadReport)
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut index = HashMap::new();
        let mut matrix = Vec::new();
        let mut report = LoadReport::default();
        for (word, vec) in pairs {
            report.lines += 1;
            if vec.len() != dim {
                report.malformed += 1;
                continue;
            }
            if index.contains_key(&word) {
                report.duplicates += 1;
                continue;
            }
            index.insert(word, matrix.len() / dim.max(1));
            matrix.extend_from_slice(&vec);
            report.loaded += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unk_row = (0..dim).map(|_| rng.gen_range(-0.25..=0.25)).collect();
        (EmbeddingTable { dim, index, matrix, unk_row }, report)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.index.len()
    }

    pub fn unk_row(&self) -> &[f64] {
        &self.unk_row
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    /// Resolve a word without the UNK fallback: exact case first, then
    /// lowercase.
    pub fn resolve(&self, word: &str) -> Option<&[f64]> {
        if let Some(&i) = self.index.get(word) {
            return Some(self.row(i));
        }
        let lower = word.to_lowercase();
        if lower != word {
            if let Some(&i) = self.index.get(&lower) {
                return Some(self.row(i));
            }
        }
        None
    }

    /// Total lookup: exact case, else lowercase, else the UNK row.
    pub fn lookup(&self, word: &str) -> &[f64] {
        self.resolve(word).unwrap_or(&self.unk_row)
    }
}

/// Parse one `word v1 v2 ... vD` line; `None` if it does not carry exactly
/// `dim` numbers.
fn parse_vector_line(line: &str, dim: usize) -> Option<(String, Vec<f64>)> {
    let mut it = line.split_whitespace();
    let word = it.next()?.to_string();
    let values: Result<Vec<f64>, _> = it.map(str::parse).collect();
    match values {
        Ok(v) if v.len() == dim => Some((word, v)),
        _ => None,
    }
}

/// Load a text-format vector file (`word v1 ... vD` per line, an optional
/// `|V| D` count header tolerated and skipped). Lines with the wrong
/// dimensionality are skipped and counted; a file with zero usable lines is
/// a fatal error.
pub fn load_text_vectors(
    path: &Path,
    expected_dim: usize,
    seed: u64,
) -> Result<(EmbeddingTable, LoadReport), EmbeddingError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines();

    let mut pending: Vec<(String, Vec<f64>)> = Vec::new();
    let mut extra_malformed = 0usize;
    if let Some(first) = lines.next() {
        let first = first?;
        let fields: Vec<&str> = first.split_whitespace().collect();
        let is_count_header =
            fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok());
        if !is_count_header {
            match parse_vector_line(&first, expected_dim) {
                Some(p) => pending.push(p),
                None => extra_malformed += 1,
            }
        }
    }
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_vector_line(&line, expected_dim) {
            Some(p) => pending.push(p),
            None => extra_malformed += 1,
        }
    }

    let (table, mut report) = EmbeddingTable::from_pairs(expected_dim, pending, seed);
    report.lines += extra_malformed;
    report.malformed += extra_malformed;
    if report.loaded == 0 {
        return Err(EmbeddingError::Empty {
            path: path.display().to_string(),
            dim: expected_dim,
        });
    }
    Ok((table, report))
}

/// Character-to-id map for the char-embedding channel. Id 0 is reserved for
/// unknown characters; known characters get contiguous ids starting at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>, // position i holds the char with id i+1
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub const UNK_ID: usize = 0;

    /// Build from training text only; iteration order is sorted so the vocab
    /// is deterministic regardless of input order.
    pub fn from_words<'a, I: IntoIterator<Item = &'a str>>(words: I) -> CharVocab {
        let mut set: Vec<char> = words
            .into_iter()
            .flat_map(|w| w.chars())
            .collect::<std::collections::BTreeSet<char>>()
            .into_iter()
            .collect();
        set.sort_unstable();
        let index = set.iter().enumerate().map(|(i, &c)| (c, i + 1)).collect();
        CharVocab { chars: set, index }
    }

    /// Rebuild from the ordered char list stored in a checkpoint header.
    pub fn from_ordered_chars(chars: Vec<char>) -> CharVocab {
        let index = chars.iter().enumerate().map(|(i, &c)| (c, i + 1)).collect();
        CharVocab { chars, index }
    }

    pub fn id(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(Self::UNK_ID)
    }

    /// Number of ids including the UNK slot.
    pub fn len(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn ordered_chars(&self) -> &[char] {
        &self.chars
    }
}

/// Fraction of a dataset vocabulary resolvable from an embedding table.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub dataset: String,
    pub embedding: String,
    pub covered: usize,
    pub total: usize,
    pub ratio: f64,
}

/// Coverage of a dataset vocabulary (case-insensitively deduplicated word
/// forms) against a table. A word counts as covered when it resolves without
/// the UNK fallback.
pub fn coverage<'a, I>(
    dataset: &str,
    embedding: &str,
    vocab: I,
    table: &EmbeddingTable,
) -> Result<CoverageReport, EmbeddingError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut total = 0usize;
    let mut covered = 0usize;
    for word in vocab {
        total += 1;
        if table.resolve(word).is_some() {
            covered += 1;
        }
    }
    if total == 0 {
        return Err(EmbeddingError::EmptyVocab);
    }
    Ok(CoverageReport {
        dataset: dataset.to_string(),
        embedding: embedding.to_string(),
        covered,
        total,
        ratio: covered as f64 / total as f64,
    })
}
