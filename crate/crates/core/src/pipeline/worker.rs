use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::Utc;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use super::{ReportStatus, TransitionEvent};
use crate::annotator::{AnnotatorBackend, AnnotatorError};
use crate::store::{Report, Store, StoreError};
use crate::translator::{TranslationBackend, TranslationJob, TranslationRequest, TranslatorError};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub workers: usize,
    /// Delay between translation polls.
    pub poll_interval: Duration,
    /// Non-terminal reports untouched for longer than this are swept.
    pub stall_timeout: Duration,
    pub sweep_interval: Duration,
    /// Consecutive transient backend errors tolerated before failing a report.
    pub max_retries: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            workers: 4,
            poll_interval: Duration::from_secs(2),
            stall_timeout: Duration::from_secs(15 * 60),
            sweep_interval: Duration::from_secs(30),
            max_retries: 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReprocessError {
    #[error("unknown report {0}")]
    UnknownReport(u64),
    #[error("report {code} is {status}, only failed reports can be reprocessed")]
    NotFailed { code: u64, status: ReportStatus },
    #[error(transparent)]
    Store(StoreError),
}

/// What a stall sweep did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepOutcome {
    pub failed: Vec<u64>,
    pub requeued: Vec<u64>,
}

struct Shared {
    store: Arc<Store>,
    translator: Arc<dyn TranslationBackend>,
    annotator: Arc<dyn AnnotatorBackend>,
    config: PipelineConfig,
    queue: mpsc::UnboundedSender<u64>,
    receiver: tokio::sync::Mutex<mpsc::UnboundedReceiver<u64>>,
    /// Reports owned by a worker; the flag marks a request that arrived
    /// while the owner was busy.
    claims: Mutex<HashMap<u64, bool>>,
    instance: String,
    tasks: Mutex<Vec<JoinHandle<()>>>,
}

/// Worker pool driving reports from `Received` to `Done` or `Failed`.
///
/// Each report is owned by at most one worker at a time. Every state change
/// is persisted through the store before the next action is taken, so a
/// restarted pool resumes each report from its last journaled status.
#[derive(Clone)]
pub struct Pipeline {
    shared: Arc<Shared>,
}

impl Pipeline {
    /// Builds the pool without starting any task.
    pub fn new(
        store: Arc<Store>,
        translator: Arc<dyn TranslationBackend>,
        annotator: Arc<dyn AnnotatorBackend>,
        config: PipelineConfig,
    ) -> Self {
        let (queue, receiver) = mpsc::unbounded_channel();
        let instance = uuid::Uuid::new_v4().simple().to_string()[..8].to_owned();
        Pipeline {
            shared: Arc::new(Shared {
                store,
                translator,
                annotator,
                config,
                queue,
                receiver: tokio::sync::Mutex::new(receiver),
                claims: Mutex::new(HashMap::new()),
                instance,
                tasks: Mutex::new(Vec::new()),
            }),
        }
    }

    /// Builds the pool, sweeps stalled reports, re-enqueues every
    /// non-terminal report left by a previous run and spawns the workers and
    /// the janitor. Must be called inside a tokio runtime.
    pub fn start(
        store: Arc<Store>,
        translator: Arc<dyn TranslationBackend>,
        annotator: Arc<dyn AnnotatorBackend>,
        config: PipelineConfig,
    ) -> Self {
        let pipeline = Self::new(store, translator, annotator, config);
        pipeline.sweep_stalled();
        for report in pipeline.shared.store.non_terminal() {
            pipeline.enqueue(report.code);
        }

        let mut tasks = Vec::new();
        for n in 0..pipeline.shared.config.workers.max(1) {
            let worker = pipeline.clone();
            let owner = format!("worker-{}@{}", n + 1, pipeline.shared.instance);
            tasks.push(tokio::spawn(async move { worker.work(owner).await }));
        }
        let janitor = pipeline.clone();
        tasks.push(tokio::spawn(async move {
            let mut ticker = tokio::time::interval(janitor.shared.config.sweep_interval);
            ticker.tick().await;
            loop {
                ticker.tick().await;
                janitor.sweep_stalled();
            }
        }));
        *pipeline.shared.tasks.lock().unwrap() = tasks;
        pipeline
    }

    /// Stops the workers and the janitor.
    pub fn shutdown(&self) {
        for task in self.shared.tasks.lock().unwrap().drain(..) {
            task.abort();
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.shared.store
    }

    pub fn translator_name(&self) -> &'static str {
        self.shared.translator.name()
    }

    pub fn annotator_name(&self) -> &'static str {
        self.shared.annotator.name()
    }

    pub fn enqueue(&self, code: u64) {
        // Sending only fails once the receiver is gone, i.e. after shutdown.
        let _ = self.shared.queue.send(code);
    }

    /// Resets a failed report to `Received` and queues it again.
    pub fn reprocess(&self, code: u64, owner: &str) -> Result<Report, ReprocessError> {
        match self.shared.store.transition(code, owner, TransitionEvent::Reprocess) {
            Ok(report) => {
                self.enqueue(code);
                Ok(report)
            }
            Err(StoreError::UnknownReport(code)) => Err(ReprocessError::UnknownReport(code)),
            Err(StoreError::IllegalTransition(e)) => Err(ReprocessError::NotFailed {
                code,
                status: e.status,
            }),
            Err(e) => Err(ReprocessError::Store(e)),
        }
    }

    /// Fails reports stuck in `Translating` or `Annotating` past the stall
    /// timeout and re-enqueues stale `Received`/`Translated` ones.
    pub fn sweep_stalled(&self) -> SweepOutcome {
        let store = &self.shared.store;
        let timeout = chrono::Duration::from_std(self.shared.config.stall_timeout)
            .unwrap_or(chrono::Duration::MAX);
        let now = Utc::now();
        let mut outcome = SweepOutcome::default();
        for report in store.non_terminal() {
            if now.signed_duration_since(report.updated_at) <= timeout {
                continue;
            }
            let event = match report.status {
                ReportStatus::Translating => TransitionEvent::TranslationFailed("stalled".into()),
                ReportStatus::Annotating => TransitionEvent::AnnotationFailed("stalled".into()),
                _ => {
                    self.enqueue(report.code);
                    outcome.requeued.push(report.code);
                    continue;
                }
            };
            match store.transition(report.code, "janitor", event) {
                Ok(_) => {
                    tracing::warn!(code = report.code, "report stalled, marked failed");
                    outcome.failed.push(report.code);
                }
                Err(e) => tracing::debug!(code = report.code, error = %e, "stall sweep skipped report"),
            }
        }
        outcome
    }

    /// Polls the store until the report is terminal or `timeout` elapses.
    pub async fn wait_terminal(&self, code: u64, timeout: Duration) -> Option<Report> {
        let deadline = tokio::time::Instant::now() + timeout;
        loop {
            if let Ok(report) = self.shared.store.load_report(code) {
                if report.status.is_terminal() {
                    return Some(report);
                }
            }
            if tokio::time::Instant::now() >= deadline {
                return None;
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }

    async fn work(self, owner: String) {
        loop {
            let next = self.shared.receiver.lock().await.recv().await;
            let Some(code) = next else { return };
            if !self.claim(code) {
                continue;
            }
            loop {
                self.run_report(code, &owner).await;
                if !self.release(code) {
                    break;
                }
            }
        }
    }

    fn claim(&self, code: u64) -> bool {
        let mut claims = self.shared.claims.lock().unwrap();
        match claims.get_mut(&code) {
            Some(again) => {
                *again = true;
                false
            }
            None => {
                claims.insert(code, false);
                true
            }
        }
    }

    /// Drops the claim, or keeps it and returns true when another request
    /// for the report arrived meanwhile.
    fn release(&self, code: u64) -> bool {
        let mut claims = self.shared.claims.lock().unwrap();
        if claims.get(&code) == Some(&true) {
            claims.insert(code, false);
            true
        } else {
            claims.remove(&code);
            false
        }
    }

    /// Drives one report until it is terminal or a step cannot proceed.
    /// Callers must hold the report's claim.
    pub async fn run_report(&self, code: u64, owner: &str) {
        loop {
            let report = match self.shared.store.load_report(code) {
                Ok(report) => report,
                Err(e) => {
                    tracing::warn!(code, error = %e, "cannot load report");
                    return;
                }
            };
            let result = match report.status {
                ReportStatus::Done | ReportStatus::Failed => return,
                ReportStatus::Received | ReportStatus::Translated => self
                    .shared
                    .store
                    .transition(code, owner, TransitionEvent::Start)
                    .map(drop),
                ReportStatus::Translating => self.translate(&report, owner).await,
                ReportStatus::Annotating => self.annotate(&report, owner).await,
            };
            if let Err(e) = result {
                // Usually the janitor moved the report underneath us.
                tracing::warn!(code, error = %e, "pipeline step not recorded");
                return;
            }
        }
    }

    async fn translate(&self, report: &Report, owner: &str) -> Result<(), StoreError> {
        let shared = &self.shared;
        let code = report.code;
        let mut job = match &report.translation_job {
            Some(job) if !job.state.is_terminal() => job.clone(),
            _ => match self.submit(report, owner).await? {
                Some(job) => job,
                None => return Ok(()),
            },
        };

        let mut transient = 0;
        let mut resubmits = 0;
        loop {
            match shared.translator.poll(&job.job_id).await {
                Ok(snapshot) if snapshot.state.is_terminal() => {
                    shared.store.record_translation(code, owner, snapshot)?;
                    return Ok(());
                }
                Ok(_) => transient = 0,
                // The backend lost the job, e.g. across a restart.
                Err(TranslatorError::UnknownJob(_)) if resubmits < shared.config.max_retries => {
                    resubmits += 1;
                    match self.submit(report, owner).await? {
                        Some(fresh) => job = fresh,
                        None => return Ok(()),
                    }
                    continue;
                }
                Err(TranslatorError::BackendUnavailable(msg)) if transient < shared.config.max_retries => {
                    transient += 1;
                    tracing::debug!(code, attempt = transient, "translation poll failed: {msg}");
                }
                Err(e) => {
                    shared
                        .store
                        .transition(code, owner, TransitionEvent::TranslationFailed(e.to_string()))?;
                    return Ok(());
                }
            }
            tokio::time::sleep(shared.config.poll_interval).await;
            if shared.store.load_report(code)?.status != ReportStatus::Translating {
                return Ok(());
            }
        }
    }

    /// Submits a fresh translation and journals the job. `None` means the
    /// report was failed instead.
    async fn submit(&self, report: &Report, owner: &str) -> Result<Option<TranslationJob>, StoreError> {
        let shared = &self.shared;
        let code = report.code;
        let request = match TranslationRequest::to_english(
            report.original_text.clone(),
            report.original_language.clone(),
            &shared.store.config().languages,
        ) {
            Ok(request) => request,
            Err(e) => {
                shared
                    .store
                    .transition(code, owner, TransitionEvent::TranslationFailed(e.to_string()))?;
                return Ok(None);
            }
        };

        let mut attempt = 0;
        loop {
            match shared.translator.submit(request.clone()).await {
                Ok(job) => {
                    shared.store.record_translation(code, owner, job.clone())?;
                    return Ok(Some(job));
                }
                Err(TranslatorError::BackendUnavailable(msg)) if attempt < shared.config.max_retries => {
                    attempt += 1;
                    tracing::debug!(code, attempt, "translation submit failed: {msg}");
                    tokio::time::sleep(shared.config.poll_interval).await;
                }
                Err(e) => {
                    shared
                        .store
                        .transition(code, owner, TransitionEvent::TranslationFailed(e.to_string()))?;
                    return Ok(None);
                }
            }
        }
    }

    async fn annotate(&self, report: &Report, owner: &str) -> Result<(), StoreError> {
        let shared = &self.shared;
        let code = report.code;
        let Some(text) = report.english_text() else {
            shared.store.transition(
                code,
                owner,
                TransitionEvent::AnnotationFailed("no English text to annotate".into()),
            )?;
            return Ok(());
        };

        let mut attempt = 0;
        loop {
            match shared.annotator.annotate(text).await {
                Ok(pass) => {
                    shared.store.record_annotations(code, owner, pass)?;
                    return Ok(());
                }
                Err(AnnotatorError::Unavailable(msg)) if attempt < shared.config.max_retries => {
                    attempt += 1;
                    tracing::debug!(code, attempt, "annotation failed: {msg}");
                    tokio::time::sleep(shared.config.poll_interval).await;
                }
                Err(e) => {
                    shared
                        .store
                        .transition(code, owner, TransitionEvent::AnnotationFailed(e.to_string()))?;
                    return Ok(());
                }
            }
        }
    }
}
