use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Languages accepted for translation when nothing else is configured.
pub const DEFAULT_SUPPORTED: [&str; 5] = ["pt", "es", "fr", "it", "de"];

/// Two-letter lowercase ISO 639-1 code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageCode(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid language code {0:?}: expected two lowercase ASCII letters")]
pub struct InvalidLanguageCode(pub String);

impl LanguageCode {
    pub fn english() -> Self {
        LanguageCode("en".to_owned())
    }

    pub fn is_english(&self) -> bool {
        self.0 == "en"
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for LanguageCode {
    type Err = InvalidLanguageCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 2 && s.bytes().all(|b| b.is_ascii_lowercase()) {
            Ok(LanguageCode(s.to_owned()))
        } else {
            Err(InvalidLanguageCode(s.to_owned()))
        }
    }
}

impl TryFrom<String> for LanguageCode {
    type Error = InvalidLanguageCode;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<LanguageCode> for String {
    fn from(code: LanguageCode) -> Self {
        code.0
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The non-English languages a deployment accepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportedLanguages(Vec<LanguageCode>);

impl SupportedLanguages {
    /// English is dropped from the list: it never needs translation.
    pub fn new(codes: impl IntoIterator<Item = LanguageCode>) -> Self {
        let mut codes: Vec<_> = codes.into_iter().filter(|c| !c.is_english()).collect();
        codes.sort();
        codes.dedup();
        SupportedLanguages(codes)
    }

    /// Parses a comma separated list such as `pt,es,fr`.
    pub fn parse_list(list: &str) -> Result<Self, InvalidLanguageCode> {
        let codes = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<LanguageCode>, _>>()?;
        Ok(Self::new(codes))
    }

    pub fn contains(&self, code: &LanguageCode) -> bool {
        self.0.contains(code)
    }

    /// True for English or any configured translation language.
    pub fn accepts_upload(&self, code: &LanguageCode) -> bool {
        code.is_english() || self.contains(code)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LanguageCode> {
        self.0.iter()
    }
}

impl Default for SupportedLanguages {
    fn default() -> Self {
        Self::new(DEFAULT_SUPPORTED.iter().map(|c| LanguageCode(c.to_string())))
    }
}
