//! Remote annotator adapter.
//!
//! The remote service answers with records carrying 1-based inclusive
//! `[from, to]` character ranges. They are converted to 0-based half-open
//! scalar offsets, checked against the submitted text and passed through the
//! same overlap resolution as local matches.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{
    char_slice, normalize, select_non_overlapping, sort_candidates, surface_tokens, Annotation,
    AnnotationPass, AnnotationSource, AnnotatorBackend, AnnotatorError, CandidateMatch,
};
use crate::http::{self, RemoteEndpoint};
use crate::lexicon::TermId;

/// One record of the remote annotator response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteRecord {
    pub id: String,
    pub from: i64,
    pub to: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_text: Option<String>,
}

/// Accepts either a bare record list or `{"annotations": [...]}`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Envelope {
    Bare(Vec<RemoteRecord>),
    Wrapped { annotations: Vec<RemoteRecord> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteAnnotations {
    pub annotations: Vec<Annotation>,
    pub dropped: usize,
}

/// Extracts a term id from either a bare `RID123` or an IRI ending in one.
fn term_id_of(raw: &str) -> Option<TermId> {
    if let Ok(id) = raw.parse() {
        return Some(id);
    }
    let pos = raw.rfind("RID")?;
    raw[pos..].parse().ok()
}

/// Decodes a remote annotator response for `text`.
pub fn parse_remote_annotations(
    payload: &[u8],
    text: &str,
) -> Result<RemoteAnnotations, AnnotatorError> {
    let records = match serde_json::from_slice::<Envelope>(payload) {
        Ok(Envelope::Bare(records)) | Ok(Envelope::Wrapped { annotations: records }) => records,
        Err(e) => return Err(AnnotatorError::MalformedPayload(e.to_string())),
    };
    Ok(convert_records(records, text))
}

fn convert_records(records: Vec<RemoteRecord>, text: &str) -> RemoteAnnotations {
    let mut dropped = 0;
    let mut candidates = Vec::with_capacity(records.len());
    for record in records {
        match to_candidate(record, text) {
            Some(c) => candidates.push(c),
            None => dropped += 1,
        }
    }
    sort_candidates(&mut candidates);
    candidates.dedup_by(|a, b| a.start == b.start && a.end == b.end && a.term_id == b.term_id);
    RemoteAnnotations {
        annotations: select_non_overlapping(candidates, AnnotationSource::Remote),
        dropped,
    }
}

fn to_candidate(record: RemoteRecord, text: &str) -> Option<CandidateMatch> {
    let term_id = term_id_of(&record.id)?;
    if record.from < 1 || record.to < record.from {
        return None;
    }
    let start = usize::try_from(record.from - 1).ok()?;
    let end = usize::try_from(record.to).ok()?;
    let slice = char_slice(text, start, end)?;
    if let Some(reported) = &record.matched_text {
        // Remote services may echo the span in a different case.
        if reported != slice && normalize(reported) != normalize(slice) {
            return None;
        }
    }
    let tokens = surface_tokens(slice);
    Some(CandidateMatch {
        term_id,
        start,
        end,
        matched_text: slice.to_owned(),
        surface_form: tokens.join(" "),
        token_span: (0, tokens.len().max(1)),
    })
}

/// Encodes annotations in the remote wire convention (1-based inclusive).
pub fn to_remote_records(annotations: &[Annotation]) -> Vec<RemoteRecord> {
    annotations
        .iter()
        .map(|a| RemoteRecord {
            id: a.term_id.to_string(),
            from: a.start as i64 + 1,
            to: a.end as i64,
            matched_text: Some(a.matched_text.clone()),
        })
        .collect()
}

#[derive(Serialize)]
struct AnnotateRequest<'a> {
    text: &'a str,
}

/// HTTP client for a remote annotator: `POST {base}/annotations` with
/// `{"text": ...}`.
#[derive(Debug, Clone)]
pub struct RemoteAnnotatorClient {
    endpoint: RemoteEndpoint,
    client: reqwest::Client,
}

impl RemoteAnnotatorClient {
    pub fn new(endpoint: RemoteEndpoint) -> Self {
        RemoteAnnotatorClient {
            endpoint,
            client: http::client(),
        }
    }
}

#[async_trait]
impl AnnotatorBackend for RemoteAnnotatorClient {
    fn name(&self) -> &'static str {
        "remote"
    }

    async fn annotate(&self, text: &str) -> Result<AnnotationPass, AnnotatorError> {
        let key = self.endpoint.key().ok_or(AnnotatorError::MissingCredentials)?;
        let response = self
            .client
            .post(self.endpoint.url("annotations"))
            .bearer_auth(key)
            .json(&AnnotateRequest { text })
            .send()
            .await
            .map_err(|e| AnnotatorError::Unavailable(e.to_string()))?;
        let status = response.status();
        let body = response
            .bytes()
            .await
            .map_err(|e| AnnotatorError::Unavailable(e.to_string()))?;
        if !status.is_success() {
            return Err(AnnotatorError::Rejected {
                status: status.as_u16(),
                body: String::from_utf8_lossy(&body).chars().take(200).collect(),
            });
        }
        let parsed = parse_remote_annotations(&body, text)?;
        if parsed.dropped > 0 {
            tracing::warn!(dropped = parsed.dropped, "discarded invalid remote annotation records");
        }
        Ok(AnnotationPass {
            annotations: parsed.annotations,
            dropped: parsed.dropped,
        })
    }
}
