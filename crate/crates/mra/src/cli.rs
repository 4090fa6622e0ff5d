//! Command-line entry points.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mra_core::annotator::annotate;
use mra_core::lexicon::{build_match_index, check_lexicon, Lexicon, LexiconError};
use mra_core::Annotation;

use crate::config::Config;
use crate::service::{serve, ServeError};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_LEXICON: u8 = 3;
pub const EXIT_INPUT: u8 = 4;
const EXIT_RUNTIME: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "mra", version, about = "Multilingual radiology report annotator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service configured by MRA_* environment variables.
    Serve,
    /// Annotate a text file offline and print one record per annotation.
    Annotate {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long = "in", value_name = "TEXTFILE")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
    },
    /// Lexicon maintenance.
    Lexicon {
        #[command(subcommand)]
        command: LexiconCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum LexiconCommand {
    /// Check a lexicon file and list every problem found.
    Validate { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Ndjson,
}

pub fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Serve => run_serve(),
        Command::Annotate {
            lexicon,
            input,
            format,
        } => run_annotate(&lexicon, &input, format),
        Command::Lexicon {
            command: LexiconCommand::Validate { path },
        } => run_validate(&path),
    }
}

fn run_serve() -> ExitCode {
    let config = match Config::from_env() {
        Ok(config) => config,
        Err(e) => {
            eprintln!("mra: configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("mra: cannot start runtime: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    match runtime.block_on(serve(config, shutdown_signal())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ ServeError::Lexicon { .. }) => {
            eprintln!("mra: {e}");
            ExitCode::from(EXIT_LEXICON)
        }
        Err(e) => {
            eprintln!("mra: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut signal) => {
                signal.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}

fn report_lexicon_error(path: &Path, e: &LexiconError) {
    eprintln!("{}: {e}", path.display());
}

/// Escapes characters that would break a TSV row.
fn tsv_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn format_annotations(annotations: &[Annotation], format: Format) -> String {
    let mut out = String::new();
    for a in annotations {
        match format {
            Format::Tsv => out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                a.start,
                a.end,
                a.term_id,
                tsv_field(&a.matched_text)
            )),
            Format::Ndjson => {
                out.push_str(&serde_json::to_string(a).expect("annotations serialize"));
                out.push('\n');
            }
        }
    }
    out
}

fn run_annotate(lexicon_path: &Path, input: &Path, format: Format) -> ExitCode {
    let lexicon = match Lexicon::load(lexicon_path) {
        Ok(lexicon) => lexicon,
        Err(e) => {
            report_lexicon_error(lexicon_path, &e);
            return ExitCode::from(EXIT_LEXICON);
        }
    };
    let text = match std::fs::read(input) {
        Ok(bytes) => match String::from_utf8(bytes) {
            Ok(text) => text,
            Err(_) => {
                eprintln!("{}: not valid UTF-8", input.display());
                return ExitCode::from(EXIT_INPUT);
            }
        },
        Err(e) => {
            eprintln!("{}: {e}", input.display());
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let text = text.strip_prefix('\u{FEFF}').unwrap_or(&text);
    let annotations = annotate(text, &build_match_index(&lexicon));
    let mut stdout = std::io::stdout().lock();
    if stdout
        .write_all(format_annotations(&annotations, format).as_bytes())
        .and_then(|()| stdout.flush())
        .is_err()
    {
        return ExitCode::from(EXIT_RUNTIME);
    }
    ExitCode::SUCCESS
}

fn run_validate(path: &Path) -> ExitCode {
    let input = match std::fs::read(path) {
        Ok(bytes) => match String::from_utf8(bytes) {
            Ok(input) => input,
            Err(_) => {
                report_lexicon_error(path, &LexiconError::InvalidUtf8);
                return ExitCode::from(EXIT_LEXICON);
            }
        },
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(EXIT_LEXICON);
        }
    };
    match check_lexicon(&input) {
        Ok(lexicon) => {
            println!(
                "{} terms, {} surface forms",
                lexicon.len(),
                lexicon.surface_forms().len()
            );
            ExitCode::SUCCESS
        }
        Err(errors) => {
            for e in &errors {
                report_lexicon_error(path, e);
            }
            eprintln!("{} problem(s) found", errors.len());
            ExitCode::from(EXIT_LEXICON)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_escapes_separators() {
        assert_eq!(tsv_field("a\tb\nc\\d"), "a\\tb\\nc\\\\d");
        assert_eq!(tsv_field("pleural effusion"), "pleural effusion");
    }

    #[test]
    fn parses_commands() {
        let cli = Cli::try_parse_from(["mra", "annotate", "--lexicon", "l.tsv", "--in", "t.txt"]).unwrap();
        assert!(matches!(cli.command, Command::Annotate { format: Format::Tsv, .. }));
        let cli = Cli::try_parse_from(["mra", "lexicon", "validate", "l.tsv"]).unwrap();
        assert!(matches!(cli.command, Command::Lexicon { .. }));
        assert!(Cli::try_parse_from(["mra", "annotate", "--format", "xml"]).is_err());
    }
}
