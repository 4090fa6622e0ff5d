//! Conventions shared by the remote translation and annotation adapters:
//! JSON bodies, `Authorization: Bearer <key>`, and a base URL with no
//! trailing slash.

use std::time::Duration;

/// Remote endpoint plus its credential.
#[derive(Clone)]
pub struct RemoteEndpoint {
    base: String,
    key: Option<String>,
}

impl RemoteEndpoint {
    pub fn new(base: impl Into<String>, key: Option<String>) -> Self {
        let base = base.into().trim_end_matches('/').to_owned();
        let key = key.filter(|k| !k.trim().is_empty());
        RemoteEndpoint { base, key }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base, path.trim_start_matches('/'))
    }

    pub fn key(&self) -> Option<&str> {
        self.key.as_deref()
    }

    pub fn base(&self) -> &str {
        &self.base
    }
}

// Keys must never end up in logs.
impl std::fmt::Debug for RemoteEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEndpoint")
            .field("base", &self.base)
            .field("key", &self.key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

/// Client with bounded timeouts so a hung remote never pins a worker forever.
pub fn client() -> reqwest::Client {
    reqwest::Client::builder()
        .connect_timeout(Duration::from_secs(10))
        .timeout(Duration::from_secs(60))
        .build()
        .expect("http client configuration is static")
}
