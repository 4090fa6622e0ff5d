use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::journal::{JournalEntry, JournalRecord};
use crate::annotator::Annotation;
use crate::language::LanguageCode;
use crate::pipeline::{step, IllegalTransition, ReportStatus, TransitionEvent};
use crate::translator::{JobState, TranslationJob};

/// One uploaded report and everything derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub code: u64,
    pub category: String,
    pub original_language: LanguageCode,
    pub created_at: DateTime<Utc>,
    pub original_text: String,
    pub translated_text: Option<String>,
    pub status: ReportStatus,
    pub annotations: Vec<Annotation>,
    pub failure_reason: Option<String>,
    pub translation_job: Option<TranslationJob>,
    /// Remote annotation records discarded in the last pass.
    pub dropped_annotations: usize,
    /// Time of the last journal record touching this report.
    pub updated_at: DateTime<Utc>,
    /// Sequence number of the last journal record touching this report.
    pub revision: u64,
}

impl Report {
    /// `Processed` column: derived, never stored.
    pub fn processed(&self) -> bool {
        self.status == ReportStatus::Done
    }

    /// The English side: the translation, or the original for English reports.
    pub fn english_text(&self) -> Option<&str> {
        if self.original_language.is_english() {
            Some(&self.original_text)
        } else {
            self.translated_text.as_deref()
        }
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            code: self.code,
            category: self.category.clone(),
            original_language: self.original_language.clone(),
            created_at: self.created_at,
            processed: self.processed(),
            status: self.status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub code: u64,
    pub category: String,
    pub original_language: LanguageCode,
    pub created_at: DateTime<Utc>,
    pub processed: bool,
    pub status: ReportStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error("record seq {seq} does not follow {last}")]
    OutOfOrder { seq: u64, last: u64 },
    #[error("unknown report {0}")]
    UnknownReport(u64),
    #[error("report code {code} is not above the current maximum {max}")]
    CodeNotIncreasing { code: u64, max: u64 },
    #[error("report {code} is {actual}, record expects {expected}")]
    StatusMismatch {
        code: u64,
        expected: ReportStatus,
        actual: ReportStatus,
    },
    #[error(transparent)]
    Illegal(#[from] IllegalTransition),
    #[error("translation job snapshot for report {0} is inconsistent")]
    InconsistentJob(u64),
}

/// Full store contents, produced by folding journal records in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreState {
    reports: BTreeMap<u64, Report>,
    last_seq: u64,
}

impl StoreState {
    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn max_code(&self) -> u64 {
        self.reports.keys().next_back().copied().unwrap_or(0)
    }

    pub fn get(&self, code: u64) -> Option<&Report> {
        self.reports.get(&code)
    }

    pub fn reports(&self) -> impl Iterator<Item = &Report> {
        self.reports.values()
    }

    /// Summaries, newest first: `created_at` descending then code descending.
    pub fn summaries(&self) -> Vec<ReportSummary> {
        let mut list: Vec<_> = self.reports.values().map(Report::summary).collect();
        list.sort_by(|a, b| b.created_at.cmp(&a.created_at).then(b.code.cmp(&a.code)));
        list
    }

    /// Applies one record. On error the state is left untouched.
    pub fn apply(&mut self, record: &JournalRecord) -> Result<(), ApplyError> {
        let report = self.prepare(record)?;
        self.reports.insert(report.code, report);
        self.last_seq = record.seq;
        Ok(())
    }

    /// Validates `record` against the current state and returns the report
    /// as it would look after applying it.
    pub fn prepare(&self, record: &JournalRecord) -> Result<Report, ApplyError> {
        if record.seq <= self.last_seq {
            return Err(ApplyError::OutOfOrder {
                seq: record.seq,
                last: self.last_seq,
            });
        }
        let mut report = match &record.entry {
            JournalEntry::ReportCreated {
                code,
                category,
                original_language,
                created_at,
                original_text,
            } => {
                let max = self.max_code();
                if *code <= max {
                    return Err(ApplyError::CodeNotIncreasing { code: *code, max });
                }
                Report {
                    code: *code,
                    category: category.clone(),
                    original_language: original_language.clone(),
                    created_at: *created_at,
                    original_text: original_text.clone(),
                    translated_text: None,
                    status: ReportStatus::Received,
                    annotations: Vec::new(),
                    failure_reason: None,
                    translation_job: None,
                    dropped_annotations: 0,
                    updated_at: record.at,
                    revision: record.seq,
                }
            }
            JournalEntry::StatusChanged {
                code,
                from,
                to,
                event,
            } => {
                let mut report = self.report(*code)?.clone();
                expect_status(&report, *from)?;
                let next = transition(&mut report, event)?;
                if next != *to {
                    return Err(ApplyError::StatusMismatch {
                        code: *code,
                        expected: *to,
                        actual: next,
                    });
                }
                report
            }
            JournalEntry::TranslationRecorded { code, job } => {
                let mut report = self.report(*code)?.clone();
                expect_status(&report, ReportStatus::Translating)?;
                if !job.is_consistent() {
                    return Err(ApplyError::InconsistentJob(*code));
                }
                report.translation_job = Some(job.clone());
                match job.state {
                    JobState::Succeeded => {
                        let text = job.result_text.clone().unwrap_or_default();
                        transition(&mut report, &TransitionEvent::TranslationSucceeded(text))?;
                    }
                    JobState::Failed => {
                        let reason = job.failure_reason.clone().unwrap_or_default();
                        transition(&mut report, &TransitionEvent::TranslationFailed(reason))?;
                    }
                    JobState::Pending | JobState::Running => {}
                }
                report
            }
            JournalEntry::AnnotationsRecorded {
                code,
                annotations,
                dropped,
            } => {
                let mut report = self.report(*code)?.clone();
                expect_status(&report, ReportStatus::Annotating)?;
                transition(
                    &mut report,
                    &TransitionEvent::AnnotationSucceeded(annotations.clone()),
                )?;
                report.dropped_annotations = *dropped;
                report
            }
        };
        report.updated_at = record.at;
        report.revision = record.seq;
        Ok(report)
    }

    fn report(&self, code: u64) -> Result<&Report, ApplyError> {
        self.reports.get(&code).ok_or(ApplyError::UnknownReport(code))
    }
}

fn expect_status(report: &Report, expected: ReportStatus) -> Result<(), ApplyError> {
    if report.status == expected {
        Ok(())
    } else {
        Err(ApplyError::StatusMismatch {
            code: report.code,
            expected,
            actual: report.status,
        })
    }
}

/// Steps `report` through `event` and updates the fields the event carries.
fn transition(report: &mut Report, event: &TransitionEvent) -> Result<ReportStatus, ApplyError> {
    let next = step(report.status, &report.original_language, event)?;
    match event {
        TransitionEvent::Start => {}
        TransitionEvent::TranslationSucceeded(text) => report.translated_text = Some(text.clone()),
        TransitionEvent::AnnotationSucceeded(annotations) => {
            report.annotations = annotations.clone()
        }
        TransitionEvent::TranslationFailed(reason) | TransitionEvent::AnnotationFailed(reason) => {
            report.failure_reason = Some(reason.clone())
        }
        TransitionEvent::Reprocess => {
            report.translated_text = None;
            report.annotations.clear();
            report.failure_reason = None;
            report.translation_job = None;
            report.dropped_annotations = 0;
        }
    }
    report.status = next;
    Ok(next)
}
