//! Client for a submit/poll machine-translation service.
//!
//! Wire contract:
//! `POST {base}/translations` `{text, source_lang, target_lang}` answers
//! `201 {job_id}`; `GET {base}/translations/{job_id}` answers
//! `{status, translated_text?, reason?}`.

use std::collections::HashMap;
use std::sync::Mutex;

use async_trait::async_trait;
use reqwest::StatusCode;
use serde::Deserialize;

use super::{JobState, TranslationBackend, TranslationJob, TranslationRequest, TranslatorError};
use crate::http::{self, RemoteEndpoint};
use crate::language::SupportedLanguages;

#[derive(Deserialize)]
struct Submitted {
    job_id: String,
}

#[derive(Deserialize)]
struct Status {
    status: JobState,
    #[serde(default)]
    translated_text: Option<String>,
    #[serde(default)]
    reason: Option<String>,
}

pub struct RemoteTranslator {
    endpoint: RemoteEndpoint,
    supported: SupportedLanguages,
    client: reqwest::Client,
    jobs: Mutex<HashMap<String, TranslationJob>>,
}

impl RemoteTranslator {
    pub fn new(endpoint: RemoteEndpoint, supported: SupportedLanguages) -> Self {
        RemoteTranslator {
            endpoint,
            supported,
            client: http::client(),
            jobs: Mutex::new(HashMap::new()),
        }
    }

    fn unavailable(e: impl std::fmt::Display) -> TranslatorError {
        TranslatorError::BackendUnavailable(e.to_string())
    }
}

#[async_trait]
impl TranslationBackend for RemoteTranslator {
    fn name(&self) -> &'static str {
        "remote"
    }

    async fn submit(&self, request: TranslationRequest) -> Result<TranslationJob, TranslatorError> {
        if request.source_lang.is_english() || !self.supported.contains(&request.source_lang) {
            return Err(TranslatorError::UnsupportedLanguage(request.source_lang.to_string()));
        }
        if request.text.trim().is_empty() {
            return Err(TranslatorError::EmptyText);
        }
        let key = self.endpoint.key().ok_or(TranslatorError::MissingCredentials)?;
        let response = self
            .client
            .post(self.endpoint.url("translations"))
            .bearer_auth(key)
            .json(&request)
            .send()
            .await
            .map_err(Self::unavailable)?;
        if response.status() != StatusCode::CREATED {
            return Err(Self::unavailable(format!(
                "submit answered {}",
                response.status()
            )));
        }
        let Submitted { job_id } = response.json().await.map_err(Self::unavailable)?;
        let job = TranslationJob::pending(job_id, request);
        self.jobs.lock().unwrap().insert(job.job_id.clone(), job.clone());
        Ok(job)
    }

    async fn poll(&self, job_id: &str) -> Result<TranslationJob, TranslatorError> {
        let mut job = {
            let jobs = self.jobs.lock().unwrap();
            let job = jobs
                .get(job_id)
                .ok_or_else(|| TranslatorError::UnknownJob(job_id.to_owned()))?;
            if job.state.is_terminal() {
                return Ok(job.clone());
            }
            job.clone()
        };
        let key = self.endpoint.key().ok_or(TranslatorError::MissingCredentials)?;
        let response = self
            .client
            .get(self.endpoint.url(&format!("translations/{job_id}")))
            .bearer_auth(key)
            .send()
            .await
            .map_err(Self::unavailable)?;
        match response.status() {
            StatusCode::OK => {}
            StatusCode::NOT_FOUND => return Err(TranslatorError::UnknownJob(job_id.to_owned())),
            other => return Err(Self::unavailable(format!("poll answered {other}"))),
        }
        let status: Status = response.json().await.map_err(Self::unavailable)?;
        match status.status {
            JobState::Succeeded => match status.translated_text {
                Some(text) => job.succeed(text),
                None => job.fail("backend reported success without translated_text".into()),
            },
            JobState::Failed => job.fail(
                status
                    .reason
                    .unwrap_or_else(|| "backend reported failure".into()),
            ),
            state => job.state = state,
        }

        let mut jobs = self.jobs.lock().unwrap();
        let stored = jobs.entry(job_id.to_owned()).or_insert_with(|| job.clone());
        // A concurrent poll may already have recorded the terminal snapshot.
        if !stored.state.is_terminal() {
            *stored = job;
        }
        Ok(stored.clone())
    }
}
