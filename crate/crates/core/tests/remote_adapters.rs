mod support;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use mra_core::annotator::{
    annotate, to_remote_records, AnnotationSource, AnnotatorBackend, AnnotatorError,
    RemoteAnnotatorClient,
};
use mra_core::http::RemoteEndpoint;
use mra_core::language::SupportedLanguages;
use mra_core::lexicon::{build_match_index, MatchIndex};
use mra_core::translator::{
    JobState, RemoteTranslator, TranslationBackend, TranslationRequest, TranslatorError,
};
use serde_json::{json, Value};
use support::oracle::{random_lexicon, random_text, seeded};

const KEY: &str = "test-key";

async fn serve(app: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

fn authorized(headers: &HeaderMap) -> bool {
    headers.get("authorization").and_then(|v| v.to_str().ok()) == Some("Bearer test-key")
}

#[derive(Default)]
struct FakeTranslations {
    /// job id -> (source text, polls seen)
    jobs: Mutex<HashMap<String, (String, u32)>>,
    fail_text: Option<String>,
}

async fn submit_translation(
    State(fake): State<Arc<FakeTranslations>>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    if !authorized(&headers) {
        return (StatusCode::UNAUTHORIZED, Json(json!({})));
    }
    assert_eq!(body["target_lang"], "en");
    let mut jobs = fake.jobs.lock().unwrap();
    let id = format!("job-{}", jobs.len() + 1);
    jobs.insert(id.clone(), (body["text"].as_str().unwrap().to_owned(), 0));
    (StatusCode::CREATED, Json(json!({ "job_id": id })))
}

async fn poll_translation(
    State(fake): State<Arc<FakeTranslations>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> (StatusCode, Json<Value>) {
    if !authorized(&headers) {
        return (StatusCode::UNAUTHORIZED, Json(json!({})));
    }
    let mut jobs = fake.jobs.lock().unwrap();
    let Some((text, polls)) = jobs.get_mut(&id) else {
        return (StatusCode::NOT_FOUND, Json(json!({})));
    };
    *polls += 1;
    let body = if *polls < 2 {
        json!({ "status": "running" })
    } else if fake.fail_text.as_deref() == Some(text.as_str()) {
        json!({ "status": "failed", "reason": "unsupported content" })
    } else {
        json!({ "status": "succeeded", "translated_text": text.to_uppercase() })
    };
    (StatusCode::OK, Json(body))
}

async fn translation_server(fake: Arc<FakeTranslations>) -> String {
    let app = Router::new()
        .route("/translations", post(submit_translation))
        .route("/translations/{id}", get(poll_translation))
        .with_state(fake);
    serve(app).await
}

fn request(text: &str) -> TranslationRequest {
    TranslationRequest::to_english(text, "pt".parse().unwrap(), &SupportedLanguages::default())
        .unwrap()
}

#[tokio::test]
async fn remote_translator_submit_then_poll() {
    let fake = Arc::new(FakeTranslations {
        fail_text: Some("falha".into()),
        ..Default::default()
    });
    let base = translation_server(fake.clone()).await;
    let translator = RemoteTranslator::new(
        RemoteEndpoint::new(base, Some(KEY.into())),
        SupportedLanguages::default(),
    );

    let job = translator.submit(request("derrame")).await.unwrap();
    assert_eq!(job.state, JobState::Pending);
    let first = translator.poll(&job.job_id).await.unwrap();
    assert_eq!(first.state, JobState::Running);
    assert!(first.is_consistent());
    let done = translator.poll(&job.job_id).await.unwrap();
    assert_eq!(done.state, JobState::Succeeded);
    assert_eq!(done.result_text.as_deref(), Some("DERRAME"));
    assert!(done.is_consistent());

    // Terminal snapshots are served locally and never change.
    fake.jobs.lock().unwrap().clear();
    assert_eq!(translator.poll(&job.job_id).await.unwrap(), done);

    let bad = translator.submit(request("falha")).await.unwrap();
    translator.poll(&bad.job_id).await.unwrap();
    let failed = translator.poll(&bad.job_id).await.unwrap();
    assert_eq!(failed.state, JobState::Failed);
    assert_eq!(failed.failure_reason.as_deref(), Some("unsupported content"));
}

#[tokio::test]
async fn remote_translator_errors() {
    let base = translation_server(Arc::default()).await;
    let no_key = RemoteTranslator::new(
        RemoteEndpoint::new(base.clone(), None),
        SupportedLanguages::default(),
    );
    assert_eq!(
        no_key.submit(request("x")).await,
        Err(TranslatorError::MissingCredentials)
    );

    let wrong_key = RemoteTranslator::new(
        RemoteEndpoint::new(base.clone(), Some("nope".into())),
        SupportedLanguages::default(),
    );
    assert!(matches!(
        wrong_key.submit(request("x")).await,
        Err(TranslatorError::BackendUnavailable(_))
    ));

    let translator = RemoteTranslator::new(
        RemoteEndpoint::new(base, Some(KEY.into())),
        SupportedLanguages::default(),
    );
    assert!(matches!(
        translator.poll("never-submitted").await,
        Err(TranslatorError::UnknownJob(_))
    ));

    let english = TranslationRequest {
        text: "chest".into(),
        source_lang: "en".parse().unwrap(),
        target_lang: "en".parse().unwrap(),
    };
    assert!(matches!(
        translator.submit(english).await,
        Err(TranslatorError::UnsupportedLanguage(_))
    ));

    let down = RemoteTranslator::new(
        RemoteEndpoint::new("http://127.0.0.1:9", Some(KEY.into())),
        SupportedLanguages::default(),
    );
    assert!(matches!(
        down.submit(request("x")).await,
        Err(TranslatorError::BackendUnavailable(_))
    ));
}

/// A fake annotator that answers with the local annotation of the text in
/// the remote wire format.
async fn annotator_server(index: Arc<MatchIndex>) -> String {
    let app = Router::new()
        .route(
            "/annotations",
            post(
                |State(index): State<Arc<MatchIndex>>, headers: HeaderMap, Json(body): Json<Value>| async move {
                    if !authorized(&headers) {
                        return (StatusCode::FORBIDDEN, Json(json!({ "error": "bad key" })));
                    }
                    let text = body["text"].as_str().unwrap();
                    let records = to_remote_records(&annotate(text, &index));
                    (StatusCode::OK, Json(json!({ "annotations": records })))
                },
            ),
        )
        .with_state(index);
    serve(app).await
}

#[tokio::test]
async fn remote_annotator_matches_local_annotation() {
    let mut rng = seeded(7);
    let mut total = 0;
    for _ in 0..30 {
        let lexicon = random_lexicon(&mut rng, 40);
        let index = Arc::new(build_match_index(&lexicon));
        let base = annotator_server(index.clone()).await;
        let client = RemoteAnnotatorClient::new(RemoteEndpoint::new(base, Some(KEY.into())));
        for _ in 0..5 {
            let text = random_text(&mut rng, 400);
            let local = annotate(&text, &index);
            let pass = client.annotate(&text).await.unwrap();
            assert_eq!(pass.dropped, 0);
            assert_eq!(pass.annotations.len(), local.len());
            for (remote, local) in pass.annotations.iter().zip(&local) {
                assert_eq!(remote.source, AnnotationSource::Remote);
                assert_eq!(
                    (&remote.term_id, remote.start, remote.end, &remote.matched_text),
                    (&local.term_id, local.start, local.end, &local.matched_text)
                );
            }
            total += local.len();
        }
    }
    assert!(total > 50, "only {total} annotations compared");
}

#[tokio::test]
async fn remote_annotator_errors() {
    let index = Arc::new(build_match_index(&Default::default()));
    let base = annotator_server(index).await;
    let no_key = RemoteAnnotatorClient::new(RemoteEndpoint::new(base.clone(), None));
    assert!(matches!(
        no_key.annotate("chest").await,
        Err(AnnotatorError::MissingCredentials)
    ));
    let wrong = RemoteAnnotatorClient::new(RemoteEndpoint::new(base, Some("nope".into())));
    assert!(matches!(
        wrong.annotate("chest").await,
        Err(AnnotatorError::Rejected { status: 403, .. })
    ));

    let garbage = serve(Router::new().route("/annotations", post(|| async { "not json" }))).await;
    let client = RemoteAnnotatorClient::new(RemoteEndpoint::new(garbage, Some(KEY.into())));
    assert!(matches!(
        client.annotate("chest").await,
        Err(AnnotatorError::MalformedPayload(_))
    ));
}
