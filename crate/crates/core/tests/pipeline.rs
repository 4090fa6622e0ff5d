mod support;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use mra_core::annotator::{AnnotatorBackend, LocalAnnotator};
use mra_core::language::SupportedLanguages;
use mra_core::lexicon::{build_match_index, parse_lexicon, Lexicon};
use mra_core::pipeline::{Pipeline, PipelineConfig, ReportStatus, ReprocessError, TransitionEvent};
use mra_core::store::{replay, JournalEntry, Store, StoreConfig};
use mra_core::translator::{MockTranslator, TranslationBackend};
use support::oracle::{oracle_annotate, spans};

const TIMEOUT: Duration = Duration::from_secs(10);

fn sample_lexicon() -> Lexicon {
    Lexicon::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/sample_lexicon.tsv")).unwrap()
}

fn fast_config() -> PipelineConfig {
    PipelineConfig {
        poll_interval: Duration::from_millis(10),
        ..PipelineConfig::default()
    }
}

fn mock(latency: Duration) -> Arc<dyn TranslationBackend> {
    Arc::new(MockTranslator::with_default_tables(SupportedLanguages::default(), latency))
}

fn local(lexicon: &Lexicon) -> Arc<dyn AnnotatorBackend> {
    Arc::new(LocalAnnotator::new(Arc::new(build_match_index(lexicon))))
}

fn start(store: Arc<Store>, translator: Arc<dyn TranslationBackend>, lexicon: &Lexicon) -> Pipeline {
    Pipeline::start(store, translator, local(lexicon), fast_config())
}

fn journal(store: &Store) -> Vec<mra_core::store::JournalRecord> {
    let bytes = std::fs::read(store.journal_path().unwrap()).unwrap();
    replay(&bytes).records
}

#[tokio::test]
async fn translated_report_is_annotated_like_the_oracle() {
    let lexicon = sample_lexicon();
    let store = Arc::new(Store::in_memory(StoreConfig::default()));
    let pipeline = start(store.clone(), mock(Duration::ZERO), &lexicon);
    let code = store
        .create_report("Ultrasound", "pt", "Derrame pleural no tórax direito.", "api")
        .unwrap()
        .code;
    pipeline.enqueue(code);
    let report = pipeline.wait_terminal(code, TIMEOUT).await.expect("terminal");
    assert_eq!(report.status, ReportStatus::Done);
    let english = report.translated_text.clone().unwrap();
    assert!(english.to_lowercase().contains("pleural effusion"), "{english}");
    assert_eq!(spans(&report.annotations), oracle_annotate(&english, &lexicon));
    assert!(!report.annotations.is_empty());
    pipeline.shutdown();
}

#[tokio::test]
async fn english_reports_skip_translation() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path(), StoreConfig::default()).unwrap());
    let empty = parse_lexicon("").unwrap();
    let pipeline = start(store.clone(), mock(Duration::from_secs(60)), &empty);
    let code = store.create_report("MRI", "en", "No acute findings.", "api").unwrap().code;
    pipeline.enqueue(code);
    let report = pipeline.wait_terminal(code, TIMEOUT).await.expect("terminal");
    assert_eq!(report.status, ReportStatus::Done);
    assert!(report.annotations.is_empty());
    assert!(report.translated_text.is_none());
    assert_eq!(report.english_text(), Some("No acute findings."));

    let records = journal(&store);
    assert!(!records
        .iter()
        .any(|r| matches!(r.entry, JournalEntry::TranslationRecorded { .. })));
    let statuses: Vec<_> = records
        .iter()
        .filter_map(|r| match &r.entry {
            JournalEntry::StatusChanged { to, .. } => Some(*to),
            _ => None,
        })
        .collect();
    assert_eq!(statuses, [ReportStatus::Annotating]);
    pipeline.shutdown();
}

#[tokio::test]
async fn translation_failure_fails_the_report_and_reprocess_retries() {
    let lexicon = sample_lexicon();
    let store = Arc::new(Store::in_memory(StoreConfig::default()));
    let failing = Arc::new(
        MockTranslator::with_default_tables(SupportedLanguages::default(), Duration::ZERO)
            .failing_with("quota exceeded"),
    );
    let pipeline = start(store.clone(), failing, &lexicon);
    let code = store.create_report("CT", "es", "derrame pleural", "api").unwrap().code;
    pipeline.enqueue(code);
    let report = pipeline.wait_terminal(code, TIMEOUT).await.expect("terminal");
    assert_eq!(report.status, ReportStatus::Failed);
    assert!(report.failure_reason.as_deref().unwrap().contains("quota exceeded"));

    let reset = pipeline.reprocess(code, "api").unwrap();
    assert_eq!(reset.status, ReportStatus::Received);
    assert!(reset.failure_reason.is_none());
    let again = pipeline.wait_terminal(code, TIMEOUT).await.expect("terminal");
    assert_eq!(again.status, ReportStatus::Failed);
    assert!(again.revision > report.revision);
    pipeline.shutdown();
}

#[tokio::test]
async fn reprocess_rejects_other_states() {
    let lexicon = sample_lexicon();
    let store = Arc::new(Store::in_memory(StoreConfig::default()));
    let pipeline = Pipeline::new(store.clone(), mock(Duration::ZERO), local(&lexicon), fast_config());
    let code = store.create_report("CT", "en", "chest", "api").unwrap().code;
    assert!(matches!(
        pipeline.reprocess(code, "api"),
        Err(ReprocessError::NotFailed { status: ReportStatus::Received, .. })
    ));
    assert!(matches!(pipeline.reprocess(42, "api"), Err(ReprocessError::UnknownReport(42))));
}

#[tokio::test]
async fn stalled_reports_are_failed_by_the_sweep() {
    let lexicon = sample_lexicon();
    let store = Arc::new(Store::in_memory(StoreConfig::default()));
    let config = PipelineConfig {
        stall_timeout: Duration::from_millis(1),
        ..fast_config()
    };
    let pipeline = Pipeline::new(store.clone(), mock(Duration::ZERO), local(&lexicon), config);
    let stuck = store.create_report("CT", "pt", "derrame", "api").unwrap().code;
    store.transition(stuck, "gone", TransitionEvent::Start).unwrap();
    let waiting = store.create_report("CT", "pt", "derrame", "api").unwrap().code;
    tokio::time::sleep(Duration::from_millis(20)).await;

    let outcome = pipeline.sweep_stalled();
    assert_eq!(outcome.failed, [stuck]);
    assert_eq!(outcome.requeued, [waiting]);
    let report = store.load_report(stuck).unwrap();
    assert_eq!(report.status, ReportStatus::Failed);
    assert_eq!(report.failure_reason.as_deref(), Some("stalled"));

    // Fresh reports are left alone.
    let relaxed = Pipeline::new(store.clone(), mock(Duration::ZERO), local(&lexicon), fast_config());
    assert_eq!(relaxed.sweep_stalled(), Default::default());
}

#[tokio::test]
async fn restart_resumes_from_the_journal() {
    let lexicon = sample_lexicon();
    let dir = tempfile::tempdir().unwrap();
    let codes = {
        let store = Arc::new(Store::open(dir.path(), StoreConfig::default()).unwrap());
        // A long latency keeps the first run from finishing.
        let pipeline = start(store.clone(), mock(Duration::from_secs(600)), &lexicon);
        let mut codes = Vec::new();
        for text in ["derrame pleural", "nódulo pulmonar", "quisto renal"] {
            let code = store.create_report("CT", "pt", text, "api").unwrap().code;
            pipeline.enqueue(code);
            codes.push(code);
        }
        codes.push(store.create_report("CT", "en", "pleural effusion", "api").unwrap().code);
        tokio::time::sleep(Duration::from_millis(100)).await;
        pipeline.shutdown();
        codes
    };

    let store = Arc::new(Store::open(dir.path(), StoreConfig::default()).unwrap());
    assert!(codes
        .iter()
        .all(|c| !store.load_report(*c).unwrap().status.is_terminal()));
    // The new translator has never seen the journaled job ids.
    let pipeline = start(store.clone(), mock(Duration::ZERO), &lexicon);
    for code in &codes {
        let report = pipeline.wait_terminal(*code, TIMEOUT).await.expect("terminal");
        assert_eq!(report.status, ReportStatus::Done, "report {code}");
    }
    pipeline.shutdown();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn each_report_has_one_owner_at_a_time() {
    let lexicon = sample_lexicon();
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path(), StoreConfig::default()).unwrap());
    let pipeline = start(store.clone(), mock(Duration::from_millis(30)), &lexicon);
    let langs = ["pt", "es", "fr", "it", "de", "en"];
    let mut codes = Vec::new();
    for i in 0..24 {
        let code = store
            .create_report("CT", langs[i % langs.len()], "derrame pleural nodule", "api")
            .unwrap()
            .code;
        // Duplicate requests must not produce a second owner.
        pipeline.enqueue(code);
        pipeline.enqueue(code);
        codes.push(code);
    }
    for code in &codes {
        let report = pipeline.wait_terminal(*code, TIMEOUT).await.expect("terminal");
        assert_eq!(report.status, ReportStatus::Done);
    }
    pipeline.shutdown();

    let mut owners: HashMap<u64, Vec<String>> = HashMap::new();
    for record in journal(&store) {
        if record.owner != "api" {
            owners.entry(record.entry.code()).or_default().push(record.owner);
        }
    }
    for code in codes {
        let list = &owners[&code];
        assert!(list.iter().all(|o| o == &list[0]), "report {code} owners {list:?}");
    }
}
