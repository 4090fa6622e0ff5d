//! Shared helpers: in-process servers, the compiled binary, fixtures.

#![allow(dead_code)]

#[path = "../../../core/tests/support/oracle.rs"]
pub mod oracle;

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use mra::api::{router, AppState};
use mra_core::annotator::{AnnotatorBackend, LocalAnnotator};
use mra_core::language::SupportedLanguages;
use mra_core::lexicon::{build_match_index, parse_lexicon, Lexicon};
use mra_core::pipeline::{Pipeline, PipelineConfig};
use mra_core::store::{Store, StoreConfig};
use mra_core::translator::{MockTranslator, TranslationBackend};

/// Lexicon used by the annotator examples: two nested terms and "chest".
pub const FIXTURE_LEXICON: &str = "RID1\tpleural effusion\t\t\nRID2\teffusion\t\t\nRID3\tchest\t\t\n";
pub const FIXTURE_TEXT: &str = "Chest X-ray shows pleural effusion.";

pub fn sample_lexicon_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/sample_lexicon.tsv")
}

pub fn sample_lexicon() -> Lexicon {
    Lexicon::load(sample_lexicon_path()).unwrap()
}

pub fn fixture_lexicon() -> Lexicon {
    parse_lexicon(FIXTURE_LEXICON).unwrap()
}

pub fn fast_pipeline() -> PipelineConfig {
    PipelineConfig {
        poll_interval: Duration::from_millis(20),
        ..PipelineConfig::default()
    }
}

/// A router served on an ephemeral loopback port inside the test runtime.
pub struct TestServer {
    pub base: String,
    pub pipeline: Pipeline,
    pub store: Arc<Store>,
    pub lexicon: Arc<Lexicon>,
    pub client: reqwest::Client,
    _dir: Option<tempfile::TempDir>,
}

pub struct ServerBuilder {
    lexicon: Lexicon,
    translator: Option<Arc<dyn TranslationBackend>>,
    latency: Duration,
    config: PipelineConfig,
    ui_dir: Option<PathBuf>,
    durable: bool,
}

impl ServerBuilder {
    pub fn new(lexicon: Lexicon) -> Self {
        ServerBuilder {
            lexicon,
            translator: None,
            latency: Duration::ZERO,
            config: fast_pipeline(),
            ui_dir: None,
            durable: false,
        }
    }

    pub fn latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn translator(mut self, translator: Arc<dyn TranslationBackend>) -> Self {
        self.translator = Some(translator);
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.config.workers = workers;
        self
    }

    pub fn ui_dir(mut self, dir: PathBuf) -> Self {
        self.ui_dir = Some(dir);
        self
    }

    /// Keeps the journal on disk instead of in memory.
    pub fn durable(mut self) -> Self {
        self.durable = true;
        self
    }

    pub async fn start(self) -> TestServer {
        if self.durable {
            let dir = tempfile::tempdir().unwrap();
            let store = Arc::new(Store::open(dir.path(), StoreConfig::default()).unwrap());
            let mut server = self.start_with_store(store).await;
            server._dir = Some(dir);
            server
        } else {
            self.start_with_store(Arc::new(Store::in_memory(StoreConfig::default()))).await
        }
    }

    pub async fn start_with_store(self, store: Arc<Store>) -> TestServer {
        let translator = self.translator.unwrap_or_else(|| {
            Arc::new(MockTranslator::with_default_tables(
                SupportedLanguages::default(),
                self.latency,
            ))
        });
        let lexicon = Arc::new(self.lexicon);
        let annotator: Arc<dyn AnnotatorBackend> =
            Arc::new(LocalAnnotator::new(Arc::new(build_match_index(&lexicon))));
        let pipeline = Pipeline::start(store.clone(), translator, annotator, self.config);
        let app = router(
            AppState {
                pipeline: pipeline.clone(),
                lexicon: lexicon.clone(),
            },
            self.ui_dir,
        );
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        TestServer {
            base: format!("http://{addr}"),
            pipeline,
            store,
            lexicon,
            client: reqwest::Client::new(),
            _dir: None,
        }
    }
}

impl TestServer {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn upload(&self, category: &str, language: &str, text: &str) -> reqwest::Response {
        self.client
            .post(self.url("/reports"))
            .json(&serde_json::json!({ "category": category, "language": language, "text": text }))
            .send()
            .await
            .unwrap()
    }

    /// Uploads and returns the new code, panicking on any other outcome.
    pub async fn upload_ok(&self, category: &str, language: &str, text: &str) -> u64 {
        let response = self.upload(category, language, text).await;
        assert_eq!(response.status(), 201);
        let body: serde_json::Value = response.json().await.unwrap();
        body["code"].as_u64().unwrap()
    }

    pub async fn get_json(&self, path: &str) -> (u16, serde_json::Value) {
        let response = self.client.get(self.url(path)).send().await.unwrap();
        let status = response.status().as_u16();
        (status, response.json().await.unwrap())
    }

    /// Polls `GET /reports/{code}` until the report is done or failed.
    pub async fn wait_terminal(&self, code: u64, timeout: Duration) -> serde_json::Value {
        let deadline = tokio::time::Instant::now() + timeout;
        loop {
            let (_, report) = self.get_json(&format!("/reports/{code}")).await;
            if matches!(report["status"].as_str(), Some("done" | "failed")) {
                return report;
            }
            assert!(tokio::time::Instant::now() < deadline, "report {code} not terminal: {report}");
            tokio::time::sleep(Duration::from_millis(25)).await;
        }
    }

    pub fn shutdown(&self) {
        self.pipeline.shutdown();
    }
}

/// The compiled `mra` binary running `serve`.
pub struct Served {
    pub child: Child,
    pub base: String,
}

impl Served {
    /// Starts `mra serve` with `env` and waits for its readiness line.
    pub fn start(env: &[(&str, String)]) -> Served {
        let mut command = Command::new(env!("CARGO_BIN_EXE_mra"));
        command
            .arg("serve")
            .env_clear()
            .env("MRA_BIND", "127.0.0.1:0")
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped());
        for (k, v) in env {
            command.env(k, v);
        }
        let mut child = command.spawn().expect("spawn mra");
        let stderr = child.stderr.take().unwrap();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut tx = Some(tx);
            // Keep draining so the child never blocks on a full pipe.
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                if let Some(rest) = line.strip_prefix("mra listening on ") {
                    if let Some(tx) = tx.take() {
                        let _ = tx.send(rest.to_owned());
                    }
                }
            }
        });
        let base = match rx.recv_timeout(Duration::from_secs(20)) {
            Ok(base) => base,
            Err(_) => {
                let _ = child.kill();
                panic!("mra serve did not become ready");
            }
        };
        Served { child, base }
    }

    /// SIGKILL on unix: no shutdown hooks run.
    pub fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
