//! Deterministic synthetic corpora for smoke tests and scaled end-to-end
//! validation: a tiny memorizable fixture, and a planted-aspect corpus whose
//! test aspects are word forms never seen in training (recognizable only by
//! their character shape or by context).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{IobTag, TaggedSentence, Token};
use crate::embeddings::EmbeddingTable;

/// Assemble a sentence from (word, tag) pairs, with single-space joins and
/// consistent character offsets.
fn sentence_from_pairs(id: String, pairs: &[(String, IobTag)]) -> TaggedSentence {
    let mut text = String::new();
    let mut tokens = Vec::with_capacity(pairs.len());
    let mut tags = Vec::with_capacity(pairs.len());
    let mut offset = 0usize;
    for (i, (word, tag)) in pairs.iter().enumerate() {
        if i > 0 {
            text.push(' ');
            offset += 1;
        }
        let len = word.chars().count();
        tokens.push(Token { text: word.clone(), start: offset, end: offset + len });
        text.push_str(word);
        offset += len;
        tags.push(*tag);
    }
    TaggedSentence { id, text, tokens, tags }
}

/// 32 short review-like sentences over a closed vocabulary; small enough for
/// any of the model variants to memorize.
pub fn overfit_fixture() -> Vec<TaggedSentence> {
    let aspects: [&[&str]; 8] = [
        &["battery", "life"],
        &["screen"],
        &["keyboard"],
        &["touch", "pad"],
        &["speakers"],
        &["price"],
        &["hard", "drive"],
        &["cooling", "fan"],
    ];
    let frames: [(&[&str], &[&str]); 4] = [
        (&["the"], &["is", "great"]),
        (&["its"], &["feels", "cheap"]),
        (&["a", "solid"], &["overall"]),
        (&["i", "love", "the"], &["on", "this", "laptop"]),
    ];
    let mut out = Vec::with_capacity(32);
    for (ai, aspect) in aspects.iter().enumerate() {
        for (fi, (before, after)) in frames.iter().enumerate() {
            let mut pairs: Vec<(String, IobTag)> = Vec::new();
            for w in *before {
                pairs.push((w.to_string(), IobTag::O));
            }
            for (k, w) in aspect.iter().enumerate() {
                pairs.push((w.to_string(), if k == 0 { IobTag::B } else { IobTag::I }));
            }
            for w in *after {
                pairs.push((w.to_string(), IobTag::O));
            }
            out.push(sentence_from_pairs(format!("fix-{ai}-{fi}"), &pairs));
        }
    }
    out
}

/// A planted-aspect corpus. Every aspect chunk is immediately preceded by a
/// trigger word; train and test draw their aspect forms from disjoint pools
/// that share only a character signature (the `ix` suffix).
pub struct PlantedCorpus {
    pub train: Vec<TaggedSentence>,
    pub test: Vec<TaggedSentence>,
    /// Vocabulary a word-vector table would realistically cover: fillers,
    /// triggers, and the train-pool aspect forms. Test-pool aspects are
    /// deliberately absent.
    pub table_words: Vec<String>,
}

const TRIGGERS: [&str; 3] = ["love", "hate", "want"];

fn random_word(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let alphabet = b"abcdefghlmnoprstu";
    let len = rng.gen_range(min..=max);
    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())] as char).collect()
}

/// 157 fillers + 3 triggers + 40 aspect forms = vocabulary of 200.
fn build_vocab(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>, Vec<String>) {
    let mut fillers = Vec::new();
    while fillers.len() < 157 {
        let w = random_word(rng, 3, 7);
        if w.ends_with("ix") || fillers.contains(&w) || TRIGGERS.contains(&w.as_str()) {
            continue;
        }
        fillers.push(w);
    }
    let mut aspects = Vec::new();
    while aspects.len() < 40 {
        let w = format!("{}ix", random_word(rng, 3, 5));
        if aspects.contains(&w) {
            continue;
        }
        aspects.push(w);
    }
    let train_aspects = aspects[..30].to_vec();
    let test_aspects = aspects[30..].to_vec();
    (fillers, train_aspects, test_aspects)
}

fn plant_sentence(
    id: String,
    rng: &mut ChaCha8Rng,
    fillers: &[String],
    aspect_pool: &[String],
) -> TaggedSentence {
    let n_fill = rng.gen_range(4..=9);
    let mut pairs: Vec<(String, IobTag)> = (0..n_fill)
        .map(|_| (fillers.choose(rng).unwrap().clone(), IobTag::O))
        .collect();
    let n_events = rng.gen_range(1..=2);
    // events land between fillers only; splicing right-to-left keeps a
    // trigger glued to its chunk when two events share a slot
    let mut positions: Vec<usize> = (0..n_events).map(|_| rng.gen_range(0..=n_fill)).collect();
    positions.sort_unstable_by(|a, b| b.cmp(a));
    for pos in positions {
        let trigger = TRIGGERS[rng.gen_range(0..TRIGGERS.len())].to_string();
        let chunk_len = rng.gen_range(1..=3);
        let mut event = vec![(trigger, IobTag::O)];
        for k in 0..chunk_len {
            let w = aspect_pool.choose(rng).unwrap().clone();
            event.push((w, if k == 0 { IobTag::B } else { IobTag::I }));
        }
        pairs.splice(pos..pos, event);
    }
    sentence_from_pairs(id, &pairs)
}

pub fn planted_corpus(n_train: usize, n_test: usize, seed: u64) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fillers, train_aspects, test_aspects) = build_vocab(&mut rng);

    let train = (0..n_train)
        .map(|i| plant_sentence(format!("train-{i}"), &mut rng, &fillers, &train_aspects))
        .collect();
    let test = (0..n_test)
        .map(|i| plant_sentence(format!("test-{i}"), &mut rng, &fillers, &test_aspects))
        .collect();

    let mut table_words: Vec<String> = fillers;
    table_words.extend(TRIGGERS.iter().map(|t| t.to_string()));
    table_words.extend(train_aspects);
    PlantedCorpus { train, test, table_words }
}

/// A random word-vector table over the given words, U(-0.5, 0.5) per
/// coordinate, seeded.
pub fn stub_vectors<'a, I>(words: I, dim: usize, seed: u64) -> EmbeddingTable
where
    I: IntoIterator<Item = &'a str>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(String, Vec<f64>)> = words
        .into_iter()
        .map(|w| (w.to_string(), (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect()))
        .collect();
    EmbeddingTable::from_pairs(dim, pairs, seed).0
}
