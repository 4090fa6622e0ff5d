//! Terminology lexicon: TSV parsing, validation and the token trie used for
//! matching.
//!
//! The file format is one term per line, four tab separated fields:
//! `id<TAB>preferred_label<TAB>synonyms<TAB>parent_id`, with `|` between
//! synonyms. `#` lines and blank lines are skipped.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotator::surface_tokens;

/// A `RID`-prefixed term identifier. Ordered by numeric value, then by the
/// raw string so that `RID7` and `RID007` stay distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TermId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid term id {0:?}: expected RID followed by digits")]
pub struct InvalidTermId(pub String);

impl TermId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn digits(&self) -> &str {
        let digits = &self.0[3..];
        let trimmed = digits.trim_start_matches('0');
        if trimmed.is_empty() {
            "0"
        } else {
            trimmed
        }
    }
}

impl FromStr for TermId {
    type Err = InvalidTermId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("RID") {
            Some(digits) if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) => {
                Ok(TermId(s.to_owned()))
            }
            _ => Err(InvalidTermId(s.to_owned())),
        }
    }
}

impl TryFrom<String> for TermId {
    type Error = InvalidTermId;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<TermId> for String {
    fn from(id: TermId) -> Self {
        id.0
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Ord for TermId {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.digits(), other.digits());
        a.len()
            .cmp(&b.len())
            .then_with(|| a.cmp(b))
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for TermId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconTerm {
    pub id: TermId,
    pub preferred_label: String,
    /// Kept in lexicographic order.
    pub synonyms: Vec<String>,
    pub parent_id: Option<TermId>,
}

impl LexiconTerm {
    /// Preferred label followed by synonyms.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.preferred_label.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("line {line}: expected 4 tab-separated fields, found {found}")]
    MalformedLine { line: usize, found: usize },
    #[error("line {line}: duplicate id {id} (first defined on line {first_line})")]
    DuplicateId {
        id: String,
        line: usize,
        first_line: usize,
    },
    #[error("line {line}: invalid id {id:?}")]
    InvalidId { id: String, line: usize },
    #[error("line {line}: term {id} has an empty preferred label")]
    EmptyLabel { id: String, line: usize },
    #[error("line {line}: term {id} has an empty synonym")]
    EmptySynonym { id: String, line: usize },
    #[error("line {line}: term {id} refers to undefined parent {parent}")]
    DanglingParent {
        id: String,
        parent: String,
        line: usize,
    },
    #[error("lexicon is not valid UTF-8")]
    InvalidUtf8,
    #[error("cannot read lexicon: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown term {0}")]
    UnknownTerm(String),
}

impl LexiconError {
    /// Line the problem was found on, when it is tied to one.
    pub fn line(&self) -> Option<usize> {
        match self {
            LexiconError::MalformedLine { line, .. }
            | LexiconError::DuplicateId { line, .. }
            | LexiconError::InvalidId { line, .. }
            | LexiconError::EmptyLabel { line, .. }
            | LexiconError::EmptySynonym { line, .. }
            | LexiconError::DanglingParent { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    terms: BTreeMap<TermId, LexiconTerm>,
    /// Normalized surface form (tokens joined by one space) to owning term.
    surface_forms: BTreeMap<String, TermId>,
}

impl Lexicon {
    /// Builds a lexicon from in-memory terms, applying the same checks as
    /// the TSV parser. Positions in the iterator stand in for line numbers.
    pub fn from_terms(terms: impl IntoIterator<Item = LexiconTerm>) -> Result<Self, LexiconError> {
        let mut errors = Vec::new();
        let mut numbered = Vec::new();
        for (i, mut term) in terms.into_iter().enumerate() {
            term.synonyms.sort();
            match check_labels(&term, i + 1) {
                Ok(()) => numbered.push((term, i + 1)),
                Err(e) => errors.push(e),
            }
        }
        assemble(numbered, errors).map_err(|mut errors| errors.remove(0))
    }

    fn index_terms(terms: BTreeMap<TermId, LexiconTerm>) -> Self {
        let mut surface_forms = BTreeMap::new();
        // Ascending id order plus first-wins gives the smallest id per form.
        for term in terms.values() {
            for label in term.labels() {
                let tokens = surface_tokens(label);
                if tokens.is_empty() {
                    continue;
                }
                surface_forms.entry(tokens.join(" ")).or_insert_with(|| term.id.clone());
            }
        }
        Lexicon {
            terms,
            surface_forms,
        }
    }

    /// Reads and parses a lexicon file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let text = String::from_utf8(bytes).map_err(|_| LexiconError::InvalidUtf8)?;
        parse_lexicon(&text)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &LexiconTerm> {
        self.terms.values()
    }

    pub fn surface_forms(&self) -> &BTreeMap<String, TermId> {
        &self.surface_forms
    }

    pub fn get(&self, id: &TermId) -> Option<&LexiconTerm> {
        self.terms.get(id)
    }

    /// Canonical TSV: terms by numeric id, synonyms sorted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for term in self.terms.values() {
            out.push_str(term.id.as_str());
            out.push('\t');
            out.push_str(&term.preferred_label);
            out.push('\t');
            out.push_str(&term.synonyms.join("|"));
            out.push('\t');
            if let Some(parent) = &term.parent_id {
                out.push_str(parent.as_str());
            }
            out.push('\n');
        }
        out
    }
}

fn check_labels(term: &LexiconTerm, line: usize) -> Result<(), LexiconError> {
    if term.preferred_label.trim().is_empty() {
        return Err(LexiconError::EmptyLabel {
            id: term.id.to_string(),
            line,
        });
    }
    if term.synonyms.iter().any(|s| s.trim().is_empty()) {
        return Err(LexiconError::EmptySynonym {
            id: term.id.to_string(),
            line,
        });
    }
    Ok(())
}

/// Parses lexicon TSV, failing on the first problem in line order.
pub fn parse_lexicon(input: &str) -> Result<Lexicon, LexiconError> {
    check_lexicon(input).map_err(|mut errors| errors.remove(0))
}

/// Parses lexicon TSV and collects every problem instead of stopping at the
/// first one. Errors are ordered by line number.
pub fn check_lexicon(input: &str) -> Result<Lexicon, Vec<LexiconError>> {
    let mut errors = Vec::new();
    let mut numbered = Vec::new();

    for (idx, raw) in input.split('\n').enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 4 {
            errors.push(LexiconError::MalformedLine {
                line,
                found: fields.len(),
            });
            continue;
        }
        let id = match fields[0].parse::<TermId>() {
            Ok(id) => id,
            Err(_) => {
                errors.push(LexiconError::InvalidId {
                    id: fields[0].to_owned(),
                    line,
                });
                continue;
            }
        };
        let parent_id = match fields[3] {
            "" => None,
            p => match p.parse::<TermId>() {
                Ok(p) => Some(p),
                Err(_) => {
                    errors.push(LexiconError::InvalidId {
                        id: p.to_owned(),
                        line,
                    });
                    continue;
                }
            },
        };
        let mut synonyms: Vec<String> = if fields[2].is_empty() {
            Vec::new()
        } else {
            fields[2].split('|').map(str::to_owned).collect()
        };
        synonyms.sort();
        let term = LexiconTerm {
            id,
            preferred_label: fields[1].to_owned(),
            synonyms,
            parent_id,
        };
        if let Err(e) = check_labels(&term, line) {
            errors.push(e);
            continue;
        }
        numbered.push((term, line));
    }
    assemble(numbered, errors)
}

/// Rejects duplicate ids and dangling parents, then indexes surface forms.
fn assemble(
    numbered: Vec<(LexiconTerm, usize)>,
    mut errors: Vec<LexiconError>,
) -> Result<Lexicon, Vec<LexiconError>> {
    let mut terms: BTreeMap<TermId, (LexiconTerm, usize)> = BTreeMap::new();
    for (term, line) in numbered {
        match terms.entry(term.id.clone()) {
            Entry::Occupied(first) => errors.push(LexiconError::DuplicateId {
                id: term.id.to_string(),
                line,
                first_line: first.get().1,
            }),
            Entry::Vacant(slot) => {
                slot.insert((term, line));
            }
        }
    }

    for (term, line) in terms.values() {
        if let Some(parent) = &term.parent_id {
            if !terms.contains_key(parent) {
                errors.push(LexiconError::DanglingParent {
                    id: term.id.to_string(),
                    parent: parent.to_string(),
                    line: *line,
                });
            }
        }
    }

    if errors.is_empty() {
        let terms = terms.into_iter().map(|(id, (term, _))| (id, term)).collect();
        Ok(Lexicon::index_terms(terms))
    } else {
        errors.sort_by_key(|e| e.line());
        Err(errors)
    }
}

/// Fetches a term by id.
pub fn lookup_term<'a>(lex: &'a Lexicon, id: &str) -> Result<&'a LexiconTerm, LexiconError> {
    id.parse::<TermId>()
        .ok()
        .and_then(|id| lex.get(&id))
        .ok_or_else(|| LexiconError::UnknownTerm(id.to_owned()))
}

/// What an accepting trie node resolves to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accept {
    pub term_id: TermId,
    pub surface_form: String,
    pub token_count: usize,
}

#[derive(Debug, Clone, Default)]
struct Node {
    children: HashMap<String, usize>,
    accept: Option<Accept>,
}

/// Token-sequence trie over every normalized label and synonym of a lexicon.
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct MatchIndex {
    nodes: Vec<Node>,
    accepting: usize,
}

impl MatchIndex {
    pub fn build(lex: &Lexicon) -> Self {
        let mut nodes = vec![Node::default()];
        for (surface, id) in &lex.surface_forms {
            let tokens: Vec<&str> = surface.split(' ').collect();
            let mut at = 0;
            for token in &tokens {
                at = match nodes[at].children.get(*token) {
                    Some(&next) => next,
                    None => {
                        nodes.push(Node::default());
                        let next = nodes.len() - 1;
                        nodes[at].children.insert((*token).to_owned(), next);
                        next
                    }
                };
            }
            nodes[at].accept = Some(Accept {
                term_id: id.clone(),
                surface_form: surface.clone(),
                token_count: tokens.len(),
            });
        }
        let accepting = lex.surface_forms.len();
        MatchIndex { nodes, accepting }
    }

    /// Number of accepted surface forms.
    pub fn len(&self) -> usize {
        self.accepting
    }

    pub fn is_empty(&self) -> bool {
        self.accepting == 0
    }

    /// Exact lookup of a normalized token sequence.
    pub fn lookup<S: AsRef<str>>(&self, tokens: &[S]) -> Option<&Accept> {
        if tokens.is_empty() {
            return None;
        }
        let mut at = 0;
        for token in tokens {
            at = *self.nodes[at].children.get(token.as_ref())?;
        }
        self.nodes[at].accept.as_ref()
    }

    /// All accepted prefixes of `tokens`, as (token count, accept), shortest first.
    pub fn prefix_matches<'a, S: AsRef<str>>(&'a self, tokens: &[S]) -> Vec<(usize, &'a Accept)> {
        let mut out = Vec::new();
        let mut at = 0;
        for (i, token) in tokens.iter().enumerate() {
            match self.nodes[at].children.get(token.as_ref()) {
                Some(&next) => at = next,
                None => break,
            }
            if let Some(accept) = &self.nodes[at].accept {
                out.push((i + 1, accept));
            }
        }
        out
    }

    /// Every (token sequence, term id) pair the index accepts, sorted.
    pub fn entries(&self) -> Vec<(Vec<String>, TermId)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::<String>::new())];
        while let Some((at, path)) = stack.pop() {
            if let Some(accept) = &self.nodes[at].accept {
                out.push((path.clone(), accept.term_id.clone()));
            }
            for (token, &next) in &self.nodes[at].children {
                let mut child = path.clone();
                child.push(token.clone());
                stack.push((next, child));
            }
        }
        out.sort();
        out
    }
}

pub fn build_match_index(lex: &Lexicon) -> MatchIndex {
    MatchIndex::build(lex)
}
