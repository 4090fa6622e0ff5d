use std::sync::Arc;

use async_trait::async_trait;

use super::{annotate, Annotation};
use crate::lexicon::MatchIndex;

/// Result of one annotation pass over a text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationPass {
    pub annotations: Vec<Annotation>,
    /// Remote records discarded for bad offsets or mismatched text.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotatorError {
    #[error("annotator API key is not configured")]
    MissingCredentials,
    #[error("annotator unavailable: {0}")]
    Unavailable(String),
    #[error("annotator returned status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed annotator payload: {0}")]
    MalformedPayload(String),
}

#[async_trait]
pub trait AnnotatorBackend: Send + Sync {
    /// Short name reported by the health endpoint.
    fn name(&self) -> &'static str;

    async fn annotate(&self, text: &str) -> Result<AnnotationPass, AnnotatorError>;
}

/// In-process dictionary annotator.
#[derive(Debug, Clone)]
pub struct LocalAnnotator {
    index: Arc<MatchIndex>,
}

impl LocalAnnotator {
    pub fn new(index: Arc<MatchIndex>) -> Self {
        LocalAnnotator { index }
    }
}

#[async_trait]
impl AnnotatorBackend for LocalAnnotator {
    fn name(&self) -> &'static str {
        "local"
    }

    async fn annotate(&self, text: &str) -> Result<AnnotationPass, AnnotatorError> {
        Ok(AnnotationPass {
            annotations: annotate(text, &self.index),
            dropped: 0,
        })
    }
}
