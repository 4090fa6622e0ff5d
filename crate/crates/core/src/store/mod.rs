//! Durable report store backed by an append-only journal.
//!
//! Every mutation is validated against the current state, appended to the
//! journal and written through to the OS before the in-memory state changes.
//! Mutations are serialized by a single writer lock; readers take cheap
//! clones of the current state.

pub mod journal;
mod state;

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};

use crate::annotator::AnnotationPass;
use crate::language::{LanguageCode, SupportedLanguages};
use crate::pipeline::{step, IllegalTransition, TransitionEvent};
use crate::translator::TranslationJob;

pub use journal::{recover, replay, JournalEntry, JournalRecord, Recovery, JOURNAL_FILE};
pub use state::{ApplyError, Report, ReportSummary, StoreState};

/// Upload limit used when nothing else is configured.
pub const DEFAULT_MAX_TEXT_BYTES: usize = 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown report {0}")]
    UnknownReport(u64),
    #[error("report text is empty")]
    EmptyText,
    #[error("report text is {size} bytes, limit is {max}")]
    TooLarge { size: usize, max: usize },
    #[error("unsupported language {0:?}")]
    UnsupportedLanguage(String),
    #[error(transparent)]
    IllegalTransition(#[from] IllegalTransition),
    #[error("record rejected: {0}")]
    Rejected(#[from] ApplyError),
    #[error("journal i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub max_text_bytes: usize,
    pub languages: SupportedLanguages,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            max_text_bytes: DEFAULT_MAX_TEXT_BYTES,
            languages: SupportedLanguages::default(),
        }
    }
}

struct Writer {
    file: Option<File>,
}

pub struct Store {
    config: StoreConfig,
    path: Option<PathBuf>,
    writer: Mutex<Writer>,
    state: RwLock<StoreState>,
    discarded_on_open: usize,
}

impl Store {
    /// Opens (or creates) the journal in `dir`, replays it and truncates any
    /// invalid tail so later appends extend the valid prefix.
    pub fn open(dir: impl AsRef<Path>, config: StoreConfig) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join(JOURNAL_FILE);
        let recovery = recover(&path)?;
        if recovery.discarded > 0 {
            tracing::warn!(
                discarded = recovery.discarded,
                path = %path.display(),
                "journal tail was invalid and has been truncated"
            );
        }
        let file = OpenOptions::new()
            .create(true)
            .read(true)
            .write(true)
            .truncate(false)
            .open(&path)?;
        file.set_len(recovery.valid_len)?;
        drop(file);
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(Store {
            config,
            path: Some(path),
            writer: Mutex::new(Writer { file: Some(file) }),
            state: RwLock::new(recovery.state),
            discarded_on_open: recovery.discarded,
        })
    }

    /// A store that keeps its journal only in memory.
    pub fn in_memory(config: StoreConfig) -> Self {
        Store {
            config,
            path: None,
            writer: Mutex::new(Writer { file: None }),
            state: RwLock::new(StoreState::default()),
            discarded_on_open: 0,
        }
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    /// Lines dropped from the journal tail when the store was opened.
    pub fn discarded_on_open(&self) -> usize {
        self.discarded_on_open
    }

    pub fn snapshot(&self) -> StoreState {
        self.state.read().unwrap().clone()
    }

    pub fn create_report(
        &self,
        category: &str,
        language: &str,
        text: &str,
        owner: &str,
    ) -> Result<Report, StoreError> {
        self.create_report_at(category, language, text, owner, Utc::now())
    }

    /// Like [`Store::create_report`] with an explicit creation time.
    pub fn create_report_at(
        &self,
        category: &str,
        language: &str,
        text: &str,
        owner: &str,
        created_at: DateTime<Utc>,
    ) -> Result<Report, StoreError> {
        let lang: LanguageCode = language
            .parse()
            .map_err(|_| StoreError::UnsupportedLanguage(language.to_owned()))?;
        if !self.config.languages.accepts_upload(&lang) {
            return Err(StoreError::UnsupportedLanguage(language.to_owned()));
        }
        if text.len() > self.config.max_text_bytes {
            return Err(StoreError::TooLarge {
                size: text.len(),
                max: self.config.max_text_bytes,
            });
        }
        if text.trim().is_empty() {
            return Err(StoreError::EmptyText);
        }
        let mut writer = self.writer.lock().unwrap();
        let code = self.state.read().unwrap().max_code() + 1;
        let entry = JournalEntry::ReportCreated {
            code,
            category: category.trim().to_owned(),
            original_language: lang,
            created_at,
            original_text: text.to_owned(),
        };
        self.append_locked(&mut writer, owner, entry)
    }

    /// Summaries sorted newest first (creation time, then code, descending).
    pub fn list_reports(&self) -> Vec<ReportSummary> {
        self.state.read().unwrap().summaries()
    }

    pub fn load_report(&self, code: u64) -> Result<Report, StoreError> {
        self.state
            .read()
            .unwrap()
            .get(code)
            .cloned()
            .ok_or(StoreError::UnknownReport(code))
    }

    /// Codes of every report not yet Done or Failed.
    pub fn non_terminal(&self) -> Vec<Report> {
        self.state
            .read()
            .unwrap()
            .reports()
            .filter(|r| !r.status.is_terminal())
            .cloned()
            .collect()
    }

    /// Validates `entry` against the current state, makes it durable, then
    /// applies it. Returns the updated report.
    pub fn save_transition(&self, owner: &str, entry: JournalEntry) -> Result<Report, StoreError> {
        let mut writer = self.writer.lock().unwrap();
        self.append_locked(&mut writer, owner, entry)
    }

    /// Applies `event` to the report's current status.
    pub fn transition(
        &self,
        code: u64,
        owner: &str,
        event: TransitionEvent,
    ) -> Result<Report, StoreError> {
        let mut writer = self.writer.lock().unwrap();
        let (from, to) = {
            let state = self.state.read().unwrap();
            let report = state.get(code).ok_or(StoreError::UnknownReport(code))?;
            let to = step(report.status, &report.original_language, &event)?;
            (report.status, to)
        };
        let entry = JournalEntry::StatusChanged {
            code,
            from,
            to,
            event,
        };
        self.append_locked(&mut writer, owner, entry)
    }

    pub fn record_translation(
        &self,
        code: u64,
        owner: &str,
        job: TranslationJob,
    ) -> Result<Report, StoreError> {
        self.save_transition(owner, JournalEntry::TranslationRecorded { code, job })
    }

    pub fn record_annotations(
        &self,
        code: u64,
        owner: &str,
        pass: AnnotationPass,
    ) -> Result<Report, StoreError> {
        self.save_transition(
            owner,
            JournalEntry::AnnotationsRecorded {
                code,
                annotations: pass.annotations,
                dropped: pass.dropped,
            },
        )
    }

    fn append_locked(
        &self,
        writer: &mut Writer,
        owner: &str,
        entry: JournalEntry,
    ) -> Result<Report, StoreError> {
        let code = entry.code();
        let record = {
            let state = self.state.read().unwrap();
            let record = JournalRecord {
                v: journal::SCHEMA_VERSION,
                seq: state.last_seq() + 1,
                at: Utc::now(),
                owner: owner.to_owned(),
                entry,
            };
            state.prepare(&record).map_err(|e| match e {
                ApplyError::UnknownReport(code) => StoreError::UnknownReport(code),
                ApplyError::Illegal(e) => StoreError::IllegalTransition(e),
                other => StoreError::Rejected(other),
            })?;
            record
        };

        if let Some(file) = writer.file.as_mut() {
            let mut line = serde_json::to_vec(&record).expect("journal records serialize");
            line.push(b'\n');
            file.write_all(&line)?;
            file.flush()?;
        }

        let mut state = self.state.write().unwrap();
        state.apply(&record)?;
        Ok(state.get(code).cloned().expect("record applied to this report"))
    }
}
