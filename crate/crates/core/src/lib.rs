//! Core of the multilingual report annotator.
//!
//! Reports arrive as free text in one of the supported languages. Non-English
//! text is sent through a [`translator::TranslationBackend`], the English side
//! is annotated against a terminology [`lexicon::Lexicon`] (or a remote
//! annotator), and every lifecycle step is recorded in an append-only
//! [`store::Store`] journal so state survives restarts.

pub mod annotator;
pub mod http;
pub mod language;
pub mod lexicon;
pub mod pipeline;
pub mod store;
pub mod translator;

pub use annotator::{annotate, Annotation, AnnotationSource};
pub use language::LanguageCode;
pub use lexicon::{build_match_index, parse_lexicon, Lexicon, LexiconTerm, MatchIndex, TermId};
pub use pipeline::{ReportStatus, TransitionEvent};
pub use store::{Report, Store};
