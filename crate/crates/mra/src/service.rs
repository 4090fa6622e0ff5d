//! Wires configuration into a running store, pipeline and HTTP server.

use std::future::Future;
use std::sync::Arc;

use mra_core::annotator::{AnnotatorBackend, LocalAnnotator, RemoteAnnotatorClient};
use mra_core::lexicon::{build_match_index, Lexicon, LexiconError};
use mra_core::pipeline::Pipeline;
use mra_core::store::{Store, StoreConfig, StoreError};
use mra_core::translator::{MockTranslator, RemoteTranslator, TranslationBackend};
use tokio::net::TcpListener;

use crate::api::{router, AppState};
use crate::config::{AnnotatorConfig, Config, TranslatorConfig};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("lexicon {path}: {source}")]
    Lexicon {
        path: String,
        #[source]
        source: LexiconError,
    },
    #[error("data directory {path}: {source}")]
    Store {
        path: String,
        #[source]
        source: StoreError,
    },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: std::net::SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Server(#[source] std::io::Error),
}

/// Backends, store and lexicon built from a configuration.
pub struct Components {
    pub lexicon: Arc<Lexicon>,
    pub store: Arc<Store>,
    pub translator: Arc<dyn TranslationBackend>,
    pub annotator: Arc<dyn AnnotatorBackend>,
}

impl Components {
    pub fn build(config: &Config) -> Result<Self, ServeError> {
        let lexicon = Lexicon::load(&config.lexicon).map_err(|source| ServeError::Lexicon {
            path: config.lexicon.display().to_string(),
            source,
        })?;
        let lexicon = Arc::new(lexicon);

        let store_config = StoreConfig {
            languages: config.languages.clone(),
            ..StoreConfig::default()
        };
        let store = Store::open(&config.data_dir, store_config).map_err(|source| ServeError::Store {
            path: config.data_dir.display().to_string(),
            source,
        })?;

        let translator: Arc<dyn TranslationBackend> = match &config.translator {
            TranslatorConfig::Mock { latency } => Arc::new(MockTranslator::with_default_tables(
                config.languages.clone(),
                *latency,
            )),
            TranslatorConfig::Remote(endpoint) => {
                Arc::new(RemoteTranslator::new(endpoint.clone(), config.languages.clone()))
            }
        };
        let annotator: Arc<dyn AnnotatorBackend> = match &config.annotator {
            AnnotatorConfig::Local => Arc::new(LocalAnnotator::new(Arc::new(build_match_index(&lexicon)))),
            AnnotatorConfig::Remote(endpoint) => Arc::new(RemoteAnnotatorClient::new(endpoint.clone())),
        };

        Ok(Components {
            lexicon,
            store: Arc::new(store),
            translator,
            annotator,
        })
    }
}

/// Builds everything, starts the pipeline and serves until `shutdown`
/// resolves.
pub async fn serve(config: Config, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
    let parts = Components::build(&config)?;
    let listener = TcpListener::bind(config.bind)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.bind,
            source,
        })?;
    let addr = listener.local_addr().map_err(ServeError::Server)?;

    let pipeline = Pipeline::start(parts.store, parts.translator, parts.annotator, config.pipeline.clone());
    let state = AppState {
        pipeline: pipeline.clone(),
        lexicon: parts.lexicon.clone(),
    };
    let app = router(state, config.ui_dir.clone());

    tracing::info!(
        terms = parts.lexicon.len(),
        translator = pipeline.translator_name(),
        annotator = pipeline.annotator_name(),
        "service ready"
    );
    // Machine-readable readiness line; tests and scripts wait for it.
    eprintln!("mra listening on http://{addr}");

    let result = axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(ServeError::Server);
    pipeline.shutdown();
    result
}
