//! Error types shared across the harness.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("outcome record for round {round_number} has {len} entries, expected 2")]
    BadOutcomeRecord { round_number: usize, len: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("letter {letter} is not part of this task instance")]
    UnknownLetter { letter: char },
    #[error("a choice prompt needs two distinct letters, got {letter} twice")]
    DuplicateLetter { letter: char },
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("API key environment variable {var} is not set")]
    MissingApiKey { var: String },
    #[error("endpoint returned HTTP {status}: {detail}")]
    Auth { status: u16, detail: String },
    #[error("request failed after {attempts} attempts: {detail}")]
    Exhausted { attempts: u32, detail: String },
    #[error("response is missing assistant content: {detail}")]
    MalformedResponse { detail: String },
    #[error("no cassette entry for request digest {digest} (model {model}); the rendered prompt no longer matches the recording")]
    CassetteMiss { digest: String, model: String },
    #[error("cassette {path}: {detail}")]
    CassetteIo { path: String, detail: String },
    #[error("cassette {path} line {line}: {detail}")]
    CassetteParse {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("replay mode requires an existing cassette, {path} not found")]
    CassetteMissing { path: String },
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {detail}")]
    Corrupt {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("{path}: missing header line")]
    MissingHeader { path: String },
    #[error("{path}: schema version {found} is not supported (current {supported}); no migration path exists for this version")]
    VersionMismatch {
        path: String,
        found: u32,
        supported: u32,
    },
    #[error("{path}: file ends after trial {completed_trials} of {expected_trials}; last valid record is {last_valid}")]
    Truncated {
        path: String,
        completed_trials: usize,
        expected_trials: usize,
        last_valid: String,
    },
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("gateway failure at {phase} trial {trial}: {source}")]
    Gateway {
        phase: String,
        trial: usize,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("checkpoint {path} does not match this configuration: {detail}")]
    CheckpointMismatch { path: String, detail: String },
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no transcripts to analyze")]
    NoTranscripts,
    #[error("transcripts mix conditions {found:?}; pass allow_mixed to pool them anyway")]
    MixedConditions { found: Vec<String> },
    #[error("i/o error writing report {path}: {source}")]
    ReportIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
