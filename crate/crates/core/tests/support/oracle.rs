//! Brute-force reference annotator and random fixture generator.
//!
//! The reference scans the text character by character, tries every
//! token-aligned window against every label of every term (no trie, no
//! precomputed surface map), picks the numerically smallest id among
//! matching terms, and applies greedy leftmost-longest selection.

#![allow(dead_code)]

use mra_core::annotator::normalize;
use mra_core::lexicon::{Lexicon, LexiconTerm, TermId};
use rand::rngs::StdRng;
use rand::RngExt;

/// (term id, start, end, matched text) in scalar values.
pub type Span = (String, usize, usize, String);

fn runs(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            out.push((start, i));
        } else {
            i += 1;
        }
    }
    out
}

fn normalized_words(s: &str) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    runs(&chars)
        .into_iter()
        .map(|(a, b)| normalize(&chars[a..b].iter().collect::<String>()))
        .collect()
}

pub fn oracle_annotate(text: &str, lexicon: &Lexicon) -> Vec<Span> {
    let chars: Vec<char> = text.chars().collect();
    let tokens = runs(&chars);
    let labels: Vec<(TermId, Vec<String>)> = lexicon
        .terms()
        .flat_map(|t| {
            std::iter::once(t.preferred_label.as_str())
                .chain(t.synonyms.iter().map(String::as_str))
                .map(move |l| (t.id.clone(), normalized_words(l)))
        })
        .filter(|(_, words)| !words.is_empty())
        .collect();
    let longest = labels.iter().map(|(_, w)| w.len()).max().unwrap_or(0);

    let mut candidates: Vec<Span> = Vec::new();
    for i in 0..tokens.len() {
        for k in 1..=longest.min(tokens.len() - i) {
            let (start, end) = (tokens[i].0, tokens[i + k - 1].1);
            let window: String = chars[start..end].iter().collect();
            let words = normalized_words(&window);
            let best = labels
                .iter()
                .filter(|(_, l)| *l == words)
                .map(|(id, _)| id)
                .min();
            if let Some(id) = best {
                candidates.push((id.to_string(), start, end, window));
            }
        }
    }
    candidates.sort_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)));

    let mut kept: Vec<Span> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| c.2 <= k.1 || c.1 >= k.2) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|c| c.1);
    kept
}

const WORDS: &[&str] = &[
    "chest", "pleural", "effusion", "lobe", "lower", "right", "left", "lung", "nodule", "ct",
    "mass", "liver", "fígado", "naïve", "Straße", "x", "ray", "opacity", "ground", "glass", "no",
    "findings", "derrame", "çà", "1", "2cm", "ÉCHO", "kidney", "cyst", "small", "structure",
];

const SEPARATORS: &[&str] = &[" ", " ", " ", ", ", ". ", "-", "'", "\n", " (", ") ", ": ", "—", "  "];

fn word(rng: &mut StdRng) -> String {
    let w = WORDS[rng.random_range(0..WORDS.len())];
    match rng.random_range(0..4) {
        0 => w.to_uppercase(),
        1 => {
            let mut c = w.chars();
            c.next()
                .map(|f| f.to_uppercase().chain(c).collect())
                .unwrap_or_default()
        }
        _ => w.to_owned(),
    }
}

/// Lexicon with up to `max_terms` terms whose labels are 1-3 vocabulary words.
pub fn random_lexicon(rng: &mut StdRng, max_terms: usize) -> Lexicon {
    let n = rng.random_range(0..=max_terms);
    let mut ids: Vec<u32> = (0..n).map(|_| rng.random_range(1..400)).collect();
    ids.sort();
    ids.dedup();
    let label = |rng: &mut StdRng| {
        let len = rng.random_range(1..=3);
        (0..len).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
    };
    let terms: Vec<LexiconTerm> = ids
        .iter()
        .map(|num| {
            let synonyms = (0..rng.random_range(0..3)).map(|_| label(rng)).collect();
            LexiconTerm {
                id: format!("RID{num}").parse().unwrap(),
                preferred_label: label(rng),
                synonyms,
                parent_id: None,
            }
        })
        .collect();
    Lexicon::from_terms(terms).unwrap()
}

/// Text of at most `max_chars` scalar values built from the same vocabulary.
pub fn random_text(rng: &mut StdRng, max_chars: usize) -> String {
    let target = rng.random_range(0..=max_chars);
    let mut text = String::new();
    let mut count = 0;
    loop {
        let piece = if rng.random_bool(0.5) || text.is_empty() {
            word(rng)
        } else {
            SEPARATORS[rng.random_range(0..SEPARATORS.len())].to_owned()
        };
        let len = piece.chars().count();
        if count + len > target {
            break;
        }
        count += len;
        text.push_str(&piece);
    }
    text
}

pub fn seeded(seed: u64) -> StdRng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn spans(annotations: &[mra_core::Annotation]) -> Vec<Span> {
    annotations
        .iter()
        .map(|a| (a.term_id.to_string(), a.start, a.end, a.matched_text.clone()))
        .collect()
}

