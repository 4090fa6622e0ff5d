//! HTTP service and command-line tools for the multilingual report annotator.

pub mod api;
pub mod cli;
pub mod config;
pub mod service;
