//! Property tests for the corpus layer: IOB encode/decode round trips on
//! randomized token-aligned span sets, tokenizer offset reconstruction, and
//! the hard IOB validity constraints of the encoder.

use atag_core::corpus::{decode_chunks, encode_iob, tokenize, AspectSpan, IobTag, Token};
use proptest::prelude::*;

/// Random sentence of space-separated words plus a set of non-overlapping,
/// token-aligned chunk ranges (inclusive token indices).
fn aligned_instance() -> impl Strategy<Value = (Vec<Token>, Vec<(usize, usize)>)> {
    (2usize..25).prop_flat_map(|n_tokens| {
        let ranges = prop::collection::vec((0usize..6, 0usize..3, prop::bool::ANY), 0..4);
        ranges.prop_map(move |raw| {
            let mut tokens = Vec::new();
            let mut off = 0usize;
            for i in 0..n_tokens {
                let text = format!("w{i}");
                let len = text.chars().count();
                tokens.push(Token { text, start: off, end: off + len });
                off += len + 1;
            }
            let mut chunks: Vec<(usize, usize)> = Vec::new();
            let mut cursor = 0usize;
            for (gap, width, keep) in raw {
                let first = cursor + gap;
                let last = first + width;
                if last >= n_tokens {
                    break;
                }
                if keep {
                    chunks.push((first, last));
                }
                cursor = last + 2; // at least one O between chunks
            }
            (tokens, chunks)
        })
    })
}

fn spans_for(tokens: &[Token], chunks: &[(usize, usize)]) -> Vec<AspectSpan> {
    chunks
        .iter()
        .map(|&(first, last)| AspectSpan {
            term: (first..=last).map(|i| tokens[i].text.clone()).collect::<Vec<_>>().join(" "),
            from: tokens[first].start,
            to: tokens[last].end,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn encode_decode_round_trips_aligned_spans((tokens, chunks) in aligned_instance()) {
        let spans = spans_for(&tokens, &chunks);
        let (tags, warnings) = encode_iob(&tokens, &spans);
        prop_assert!(warnings.is_empty(), "{warnings:?}");
        prop_assert_eq!(decode_chunks(&tags), chunks);
    }

    #[test]
    fn encoder_output_is_always_iob_valid((tokens, chunks) in aligned_instance()) {
        let spans = spans_for(&tokens, &chunks);
        let (tags, _) = encode_iob(&tokens, &spans);
        if let Some(first) = tags.first() {
            prop_assert_ne!(*first, IobTag::I);
        }
        for pair in tags.windows(2) {
            prop_assert!(!(pair[0] == IobTag::O && pair[1] == IobTag::I));
        }
    }

    #[test]
    fn decode_tolerates_arbitrary_tag_sequences(ids in prop::collection::vec(0usize..3, 0..20)) {
        let tags: Vec<IobTag> = ids.iter().map(|&i| IobTag::from_index(i).unwrap()).collect();
        let chunks = decode_chunks(&tags);
        // chunks are ordered, disjoint, in range
        for w in chunks.windows(2) {
            prop_assert!(w[0].1 < w[1].0);
        }
        for (first, last) in &chunks {
            prop_assert!(first <= last);
            prop_assert!(*last < tags.len());
        }
        // every B opens a chunk; every chunk start is B or a repaired I
        let starts: Vec<usize> = chunks.iter().map(|c| c.0).collect();
        for (i, &t) in tags.iter().enumerate() {
            if t == IobTag::B {
                prop_assert!(starts.contains(&i));
            }
        }
    }

    #[test]
    fn tokenizer_offsets_reconstruct_any_text(text in "[ a-zA-Z0-9.,!?;:'\"()\\[\\]-]{0,60}") {
        let tokens = tokenize(&text);
        let chars: Vec<char> = text.chars().collect();
        let mut cursor = 0usize;
        for t in &tokens {
            prop_assert!(t.start >= cursor);
            // skipped gaps are whitespace only
            for &c in &chars[cursor..t.start] {
                prop_assert!(c.is_whitespace());
            }
            let slice: String = chars[t.start..t.end].iter().collect();
            prop_assert_eq!(&slice, &t.text);
            prop_assert!(!t.text.is_empty());
            cursor = t.end;
        }
        for &c in &chars[cursor..] {
            prop_assert!(c.is_whitespace());
        }
    }
}
