use std::fmt;

use serde::{Deserialize, Serialize};

use crate::annotator::Annotation;
use crate::language::LanguageCode;

/// Where a report is in its lifecycle.
///
/// ```text
/// Received ──Start(non-en)──> Translating ──ok──> Translated ──Start──> Annotating ──ok──> Done
///    └─────────Start(en)─────────────────────────────────────────────────┘
/// Translating, Annotating ──failure──> Failed ──Reprocess──> Received
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Received,
    Translating,
    Translated,
    Annotating,
    Done,
    Failed,
}

impl ReportStatus {
    pub const ALL: [ReportStatus; 6] = [
        ReportStatus::Received,
        ReportStatus::Translating,
        ReportStatus::Translated,
        ReportStatus::Annotating,
        ReportStatus::Done,
        ReportStatus::Failed,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, ReportStatus::Done | ReportStatus::Failed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReportStatus::Received => "received",
            ReportStatus::Translating => "translating",
            ReportStatus::Translated => "translated",
            ReportStatus::Annotating => "annotating",
            ReportStatus::Done => "done",
            ReportStatus::Failed => "failed",
        }
    }
}

impl fmt::Display for ReportStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", content = "payload", rename_all = "snake_case")]
pub enum TransitionEvent {
    /// Begins the next phase: translation or annotation out of `Received`,
    /// annotation out of `Translated`.
    Start,
    TranslationSucceeded(String),
    TranslationFailed(String),
    AnnotationSucceeded(Vec<Annotation>),
    AnnotationFailed(String),
    Reprocess,
}

impl TransitionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            TransitionEvent::Start => "start",
            TransitionEvent::TranslationSucceeded(_) => "translation_succeeded",
            TransitionEvent::TranslationFailed(_) => "translation_failed",
            TransitionEvent::AnnotationSucceeded(_) => "annotation_succeeded",
            TransitionEvent::AnnotationFailed(_) => "annotation_failed",
            TransitionEvent::Reprocess => "reprocess",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("event {event} is not applicable in status {status}")]
pub struct IllegalTransition {
    pub status: ReportStatus,
    pub event: &'static str,
}

/// The legal-transition table.
pub fn step(
    status: ReportStatus,
    lang: &LanguageCode,
    event: &TransitionEvent,
) -> Result<ReportStatus, IllegalTransition> {
    use ReportStatus::*;
    use TransitionEvent as E;

    let next = match (status, event) {
        (Received, E::Start) if lang.is_english() => Annotating,
        (Received, E::Start) => Translating,
        (Translating, E::TranslationSucceeded(_)) => Translated,
        (Translating, E::TranslationFailed(_)) => Failed,
        (Translated, E::Start) => Annotating,
        (Annotating, E::AnnotationSucceeded(_)) => Done,
        (Annotating, E::AnnotationFailed(_)) => Failed,
        (Failed, E::Reprocess) => Received,
        _ => {
            return Err(IllegalTransition {
                status,
                event: event.name(),
            })
        }
    };
    Ok(next)
}
