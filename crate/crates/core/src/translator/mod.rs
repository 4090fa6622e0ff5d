//! Translation backends.
//!
//! A backend accepts a [`TranslationRequest`], hands back a
//! [`TranslationJob`] immediately, and makes progress visible only through
//! [`TranslationBackend::poll`]. Terminal snapshots never change afterwards.

mod mock;
mod remote;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::language::{LanguageCode, SupportedLanguages};

pub use mock::{
    mock_translate, parse_phrase_tables, MockTranslator, PhraseTable, DEFAULT_PHRASE_TABLES,
    MAX_MOCK_LATENCY,
};
pub use remote::RemoteTranslator;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub text: String,
    pub source_lang: LanguageCode,
    pub target_lang: LanguageCode,
}

impl TranslationRequest {
    /// Builds an English-bound request, rejecting English sources, languages
    /// outside `supported` and empty text.
    pub fn to_english(
        text: impl Into<String>,
        source_lang: LanguageCode,
        supported: &SupportedLanguages,
    ) -> Result<Self, TranslatorError> {
        let text = text.into();
        if source_lang.is_english() || !supported.contains(&source_lang) {
            return Err(TranslatorError::UnsupportedLanguage(source_lang.to_string()));
        }
        if text.trim().is_empty() {
            return Err(TranslatorError::EmptyText);
        }
        Ok(TranslationRequest {
            text,
            source_lang,
            target_lang: LanguageCode::english(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Running,
    Succeeded,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Succeeded | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationJob {
    pub job_id: String,
    pub request: TranslationRequest,
    pub state: JobState,
    pub submitted_at: DateTime<Utc>,
    pub completed_at: Option<DateTime<Utc>>,
    pub result_text: Option<String>,
    pub failure_reason: Option<String>,
}

impl TranslationJob {
    pub(crate) fn pending(job_id: String, request: TranslationRequest) -> Self {
        TranslationJob {
            job_id,
            request,
            state: JobState::Pending,
            submitted_at: Utc::now(),
            completed_at: None,
            result_text: None,
            failure_reason: None,
        }
    }

    pub(crate) fn succeed(&mut self, text: String) {
        self.state = JobState::Succeeded;
        self.completed_at = Some(Utc::now().max(self.submitted_at));
        self.result_text = Some(text);
        self.failure_reason = None;
    }

    pub(crate) fn fail(&mut self, reason: String) {
        self.state = JobState::Failed;
        self.completed_at = Some(Utc::now().max(self.submitted_at));
        self.result_text = None;
        self.failure_reason = Some(reason);
    }

    /// Checks the field-presence rules tied to `state`.
    pub fn is_consistent(&self) -> bool {
        let terminal = self.state.is_terminal();
        self.result_text.is_some() == (self.state == JobState::Succeeded)
            && self.failure_reason.is_some() == (self.state == JobState::Failed)
            && self.completed_at.is_some() == terminal
            && self.completed_at.is_none_or(|c| c >= self.submitted_at)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslatorError {
    #[error("unsupported source language {0:?}")]
    UnsupportedLanguage(String),
    #[error("nothing to translate")]
    EmptyText,
    #[error("translation API key is not configured")]
    MissingCredentials,
    #[error("translation backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("unknown translation job {0}")]
    UnknownJob(String),
}

#[async_trait]
pub trait TranslationBackend: Send + Sync {
    /// Short name reported by the health endpoint.
    fn name(&self) -> &'static str;

    /// Starts a translation and returns without waiting for it.
    async fn submit(&self, request: TranslationRequest) -> Result<TranslationJob, TranslatorError>;

    async fn poll(&self, job_id: &str) -> Result<TranslationJob, TranslatorError>;
}
