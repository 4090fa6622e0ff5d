use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use tokio::time::Instant;

use super::{JobState, TranslationBackend, TranslationJob, TranslationRequest, TranslatorError};
use crate::language::{LanguageCode, SupportedLanguages};

/// Ordered (source phrase, English phrase) substitutions.
pub type PhraseTable = Vec<(String, String)>;

/// Phrase tables shipped with the crate, keyed by source language.
pub const DEFAULT_PHRASE_TABLES: &str = include_str!("../../assets/phrase_tables.tsv");

/// Longest mock latency accepted by configuration.
pub const MAX_MOCK_LATENCY: Duration = Duration::from_secs(120);

/// Parses `lang<TAB>source<TAB>english` lines into per-language tables.
pub fn parse_phrase_tables(input: &str) -> Result<HashMap<LanguageCode, PhraseTable>, String> {
    let mut tables: HashMap<LanguageCode, PhraseTable> = HashMap::new();
    for (idx, line) in input.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [lang, source, english] = fields[..] else {
            return Err(format!("line {}: expected 3 tab-separated fields", idx + 1));
        };
        let lang: LanguageCode = lang.parse().map_err(|e| format!("line {}: {e}", idx + 1))?;
        if source.is_empty() || english.is_empty() {
            return Err(format!("line {}: empty phrase", idx + 1));
        }
        tables
            .entry(lang)
            .or_default()
            .push((source.to_owned(), english.to_owned()));
    }
    Ok(tables)
}

fn chars_eq_ignore_case(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

/// Case-insensitive phrase substitution. At each position the longest
/// matching source phrase wins (table order breaks ties), matches never
/// overlap, and uncovered characters pass through untouched.
pub fn mock_translate(phrase_table: &[(String, String)], text: &str) -> String {
    let mut phrases: Vec<(Vec<char>, &str)> = phrase_table
        .iter()
        .filter(|(src, _)| !src.is_empty())
        .map(|(src, en)| (src.chars().collect(), en.as_str()))
        .collect();
    phrases.sort_by_key(|p| std::cmp::Reverse(p.0.len()));

    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut at = 0;
    while at < chars.len() {
        let hit = phrases.iter().find(|(src, _)| {
            at + src.len() <= chars.len()
                && src
                    .iter()
                    .zip(&chars[at..at + src.len()])
                    .all(|(a, b)| chars_eq_ignore_case(*a, *b))
        });
        match hit {
            Some((src, en)) => {
                out.push_str(en);
                at += src.len();
            }
            None => {
                out.push(chars[at]);
                at += 1;
            }
        }
    }
    out
}

struct MockJob {
    job: TranslationJob,
    started: Instant,
}

/// Offline translator: phrase-table substitution after a fixed latency.
pub struct MockTranslator {
    tables: HashMap<LanguageCode, PhraseTable>,
    supported: SupportedLanguages,
    latency: Duration,
    failure: Option<String>,
    jobs: Mutex<HashMap<String, MockJob>>,
}

impl MockTranslator {
    pub fn new(
        tables: HashMap<LanguageCode, PhraseTable>,
        supported: SupportedLanguages,
        latency: Duration,
    ) -> Self {
        MockTranslator {
            tables,
            supported,
            latency,
            failure: None,
            jobs: Mutex::new(HashMap::new()),
        }
    }

    /// Mock backed by the bundled phrase tables.
    pub fn with_default_tables(supported: SupportedLanguages, latency: Duration) -> Self {
        let tables = parse_phrase_tables(DEFAULT_PHRASE_TABLES).expect("bundled phrase tables parse");
        Self::new(tables, supported, latency)
    }

    /// Every job fails with `reason` once its latency has elapsed.
    pub fn failing_with(mut self, reason: impl Into<String>) -> Self {
        self.failure = Some(reason.into());
        self
    }

    pub fn latency(&self) -> Duration {
        self.latency
    }
}

#[async_trait]
impl TranslationBackend for MockTranslator {
    fn name(&self) -> &'static str {
        "mock"
    }

    async fn submit(&self, request: TranslationRequest) -> Result<TranslationJob, TranslatorError> {
        if request.source_lang.is_english() || !self.supported.contains(&request.source_lang) {
            return Err(TranslatorError::UnsupportedLanguage(request.source_lang.to_string()));
        }
        if request.text.trim().is_empty() {
            return Err(TranslatorError::EmptyText);
        }
        let job = TranslationJob::pending(uuid::Uuid::new_v4().to_string(), request);
        self.jobs.lock().unwrap().insert(
            job.job_id.clone(),
            MockJob {
                job: job.clone(),
                started: Instant::now(),
            },
        );
        Ok(job)
    }

    async fn poll(&self, job_id: &str) -> Result<TranslationJob, TranslatorError> {
        let mut jobs = self.jobs.lock().unwrap();
        let entry = jobs
            .get_mut(job_id)
            .ok_or_else(|| TranslatorError::UnknownJob(job_id.to_owned()))?;
        if entry.job.state.is_terminal() {
            return Ok(entry.job.clone());
        }
        if entry.started.elapsed() >= self.latency {
            match &self.failure {
                Some(reason) => entry.job.fail(reason.clone()),
                None => {
                    let table = self
                        .tables
                        .get(&entry.job.request.source_lang)
                        .map(Vec::as_slice)
                        .unwrap_or_default();
                    let text = mock_translate(table, &entry.job.request.text);
                    entry.job.succeed(text);
                }
            }
        } else {
            entry.job.state = JobState::Running;
        }
        Ok(entry.job.clone())
    }
}
