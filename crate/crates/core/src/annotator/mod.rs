//! Dictionary NER over English text.
//!
//! Text is split into alphanumeric tokens, every token-aligned window is
//! looked up in a [`MatchIndex`], and overlapping hits are resolved greedily
//! leftmost-longest. All offsets are counted in Unicode scalar values.

mod backend;
pub mod remote;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::lexicon::{MatchIndex, TermId};

pub use backend::{AnnotationPass, AnnotatorBackend, AnnotatorError, LocalAnnotator};
pub use remote::{
    parse_remote_annotations, to_remote_records, RemoteAnnotations, RemoteAnnotatorClient, RemoteRecord,
};

/// A maximal run of letters or digits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Scalar-value offset, inclusive.
    pub start: usize,
    /// Scalar-value offset, exclusive.
    pub end: usize,
    /// Byte range of the token in the source text.
    pub bytes: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationSource {
    Local,
    Remote,
}

/// A lexicon term occurrence anchored to `[start, end)` in the annotated text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub term_id: TermId,
    pub start: usize,
    pub end: usize,
    pub matched_text: String,
    pub surface_form: String,
    pub source: AnnotationSource,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateMatch {
    pub term_id: TermId,
    pub start: usize,
    pub end: usize,
    pub matched_text: String,
    pub surface_form: String,
    /// (first token index, token count)
    pub token_span: (usize, usize),
}

impl CandidateMatch {
    fn into_annotation(self, source: AnnotationSource) -> Annotation {
        Annotation {
            term_id: self.term_id,
            start: self.start,
            end: self.end,
            matched_text: self.matched_text,
            surface_form: self.surface_form,
            source,
        }
    }
}

/// Splits `text` into maximal runs of alphanumeric characters. Everything
/// else, including `-` and apostrophes, separates tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, usize)> = None; // (char start, byte start)

    let mut char_idx = 0;
    for (byte_idx, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if current.is_none() {
                current = Some((char_idx, byte_idx));
            }
        } else if let Some((start, byte_start)) = current.take() {
            tokens.push(Token {
                text: text[byte_start..byte_idx].to_owned(),
                start,
                end: char_idx,
                bytes: byte_start..byte_idx,
            });
        }
        char_idx += 1;
    }
    if let Some((start, byte_start)) = current {
        tokens.push(Token {
            text: text[byte_start..].to_owned(),
            start,
            end: char_idx,
            bytes: byte_start..text.len(),
        });
    }
    tokens
}

/// Case folds, decomposes and strips combining marks.
pub fn normalize(s: &str) -> String {
    let once = fold_and_strip(s);
    // A second pass reaches the fixed point for the few characters whose
    // folded form decomposes into something foldable again.
    let twice = fold_and_strip(&once);
    if twice == once {
        once
    } else {
        fold_and_strip(&twice)
    }
}

fn fold_and_strip(s: &str) -> String {
    caseless::default_case_fold_str(s)
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .collect()
}

/// Normalized token sequence of a phrase, the unit the match index is keyed on.
pub fn surface_tokens(s: &str) -> Vec<String> {
    tokenize(s).iter().map(|t| normalize(&t.text)).collect()
}

/// Every token-aligned window of `tokens` accepted by `index`, sorted by
/// `(start asc, end desc)`.
pub fn find_candidates(text: &str, tokens: &[Token], index: &MatchIndex) -> Vec<CandidateMatch> {
    let normalized: Vec<String> = tokens.iter().map(|t| normalize(&t.text)).collect();
    let mut candidates = Vec::new();
    for first in 0..tokens.len() {
        for (count, accept) in index.prefix_matches(&normalized[first..]) {
            let last = &tokens[first + count - 1];
            candidates.push(CandidateMatch {
                term_id: accept.term_id.clone(),
                start: tokens[first].start,
                end: last.end,
                matched_text: text[tokens[first].bytes.start..last.bytes.end].to_owned(),
                surface_form: accept.surface_form.clone(),
                token_span: (first, count),
            });
        }
    }
    sort_candidates(&mut candidates);
    candidates
}

pub(crate) fn sort_candidates(candidates: &mut [CandidateMatch]) {
    candidates.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
}

/// Greedy leftmost-longest selection over candidates sorted by
/// `(start asc, end desc)`. A candidate is kept iff it does not overlap any
/// candidate kept before it.
pub fn resolve_overlaps(candidates: Vec<CandidateMatch>) -> Vec<Annotation> {
    select_non_overlapping(candidates, AnnotationSource::Local)
}

pub(crate) fn select_non_overlapping(
    candidates: Vec<CandidateMatch>,
    source: AnnotationSource,
) -> Vec<Annotation> {
    let mut kept: Vec<Annotation> = Vec::new();
    for candidate in candidates {
        // Input is start-sorted, so only the last kept span can overlap.
        let overlaps = kept.last().is_some_and(|k| candidate.start < k.end);
        if !overlaps {
            kept.push(candidate.into_annotation(source));
        }
    }
    kept
}

/// Annotates English text with the terms of `index`.
pub fn annotate(text: &str, index: &MatchIndex) -> Vec<Annotation> {
    let tokens = tokenize(text);
    resolve_overlaps(find_candidates(text, &tokens, index))
}

/// Slice of `text` between two scalar-value offsets, or `None` when out of range.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut boundaries = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()));
    let byte_start = boundaries.nth(start)?;
    let byte_end = if end == start {
        byte_start
    } else {
        boundaries.nth(end - start - 1)?
    };
    Some(&text[byte_start..byte_end])
}
