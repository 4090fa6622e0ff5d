//! Line-delimited journal: one JSON document per line, each with a schema
//! version `v`, a strictly increasing `seq`, a timestamp, the owner that
//! wrote it, and a kind-specific payload.

use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::state::StoreState;
use crate::annotator::Annotation;
use crate::language::LanguageCode;
use crate::pipeline::{ReportStatus, TransitionEvent};
use crate::translator::TranslationJob;

pub const SCHEMA_VERSION: u32 = 1;

/// File name of the journal inside the data directory.
pub const JOURNAL_FILE: &str = "journal.ndjson";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub v: u32,
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub owner: String,
    #[serde(flatten)]
    pub entry: JournalEntry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum JournalEntry {
    ReportCreated {
        code: u64,
        category: String,
        original_language: LanguageCode,
        created_at: DateTime<Utc>,
        original_text: String,
    },
    StatusChanged {
        code: u64,
        from: ReportStatus,
        to: ReportStatus,
        event: TransitionEvent,
    },
    /// A translation job snapshot. Terminal snapshots also move the report
    /// out of `Translating`.
    TranslationRecorded { code: u64, job: TranslationJob },
    /// Final annotations; moves the report from `Annotating` to `Done`.
    AnnotationsRecorded {
        code: u64,
        annotations: Vec<Annotation>,
        dropped: usize,
    },
}

impl JournalEntry {
    pub fn code(&self) -> u64 {
        match self {
            JournalEntry::ReportCreated { code, .. }
            | JournalEntry::StatusChanged { code, .. }
            | JournalEntry::TranslationRecorded { code, .. }
            | JournalEntry::AnnotationsRecorded { code, .. } => *code,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            JournalEntry::ReportCreated { .. } => "ReportCreated",
            JournalEntry::StatusChanged { .. } => "StatusChanged",
            JournalEntry::TranslationRecorded { .. } => "TranslationRecorded",
            JournalEntry::AnnotationsRecorded { .. } => "AnnotationsRecorded",
        }
    }
}

/// Outcome of replaying a journal from scratch.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub state: StoreState,
    pub records: Vec<JournalRecord>,
    /// Lines after the longest valid prefix, including a torn final line.
    pub discarded: usize,
    /// Byte length of the valid prefix.
    pub valid_len: u64,
}

/// Replays journal bytes, keeping the longest prefix of complete lines that
/// decode and apply cleanly.
pub fn replay(bytes: &[u8]) -> Recovery {
    let mut state = StoreState::default();
    let mut records = Vec::new();
    let mut offset = 0usize;
    let mut discarded = 0;

    while offset < bytes.len() {
        let Some(nl) = bytes[offset..].iter().position(|b| *b == b'\n') else {
            // Torn write: no terminating newline.
            discarded += 1;
            break;
        };
        let line = &bytes[offset..offset + nl];
        let applied = serde_json::from_slice::<JournalRecord>(line)
            .ok()
            .filter(|r| r.v == SCHEMA_VERSION)
            .and_then(|r| state.apply(&r).ok().map(|()| r));
        match applied {
            Some(record) => {
                records.push(record);
                offset += nl + 1;
            }
            None => {
                discarded += 1 + bytes[offset + nl + 1..]
                    .split(|b| *b == b'\n')
                    .filter(|l| !l.is_empty())
                    .count();
                break;
            }
        }
    }

    Recovery {
        state,
        records,
        discarded,
        valid_len: offset as u64,
    }
}

/// Replays the journal at `path`; a missing file is an empty journal.
pub fn recover(path: &Path) -> std::io::Result<Recovery> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(replay(&bytes)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(replay(&[])),
        Err(e) => Err(e),
    }
}
