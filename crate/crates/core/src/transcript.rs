//! Session transcripts and their on-disk format: one JSON header line with
//! the config snapshot and task realization, then one JSON line per trial.
//! The line-per-trial layout is what makes single-trial checkpointing and
//! resume possible.

use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::TranscriptError;
use crate::parse::{ParsedChoice, ParsedRatings};
use crate::prompt::Condition;
use crate::task::{Letter, OutcomeEntry, TaskInstance, NUM_LEARNING_TRIALS, NUM_TRANSFER_TRIALS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Learning,
    Transfer,
}

/// Everything recorded for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub phase: Phase,
    /// 1..=20 for learning trials; absent for transfer.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub round_number: Option<usize>,
    pub first_letter: Letter,
    pub second_letter: Letter,
    pub prompt_digest: String,
    /// The full rendered user message.
    pub prompt_text: String,
    /// The agent's reply, verbatim.
    pub raw_response: String,
    /// 1 normally; 2 when an ambiguous reply was re-asked once.
    pub ask_count: u32,
    pub choice: ParsedChoice,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ratings: Option<ParsedRatings>,
    /// Set when the condition collects ratings but none could be parsed.
    pub ratings_missing: bool,
    /// Set when a simulated agent hit an undefined value and fell back to a
    /// uniform choice.
    pub value_fallback: bool,
    /// Both options' draws for learning trials, in presentation order;
    /// empty for transfer trials (no feedback after round 20).
    pub outcomes: Vec<OutcomeEntry>,
    pub elapsed_secs: f64,
}

impl TrialRecord {
    pub fn offered(&self) -> (Letter, Letter) {
        (self.first_letter, self.second_letter)
    }

    /// Short human identifier, e.g. `learning round 7` / `transfer trial 3`.
    pub fn describe(&self, index_in_phase: usize) -> String {
        match self.phase {
            Phase::Learning => format!("learning round {}", self.round_number.unwrap_or(0)),
            Phase::Transfer => format!("transfer trial {}", index_in_phase + 1),
        }
    }
}

/// Config snapshot stored in the header line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub condition: Condition,
    pub agent_label: String,
    pub master_seed: u64,
    pub run_index: u32,
    pub payoff_sd: f64,
    pub reask_ambiguous: bool,
    pub system_prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub schema_version: u32,
    pub meta: SessionMeta,
    pub task: TaskInstance,
}

/// A complete session: exactly 20 learning and 28 transfer records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTranscript {
    pub meta: SessionMeta,
    pub task: TaskInstance,
    pub learning: Vec<TrialRecord>,
    pub transfer: Vec<TrialRecord>,
}

impl RunTranscript {
    pub fn header(&self) -> TranscriptHeader {
        TranscriptHeader {
            schema_version: SCHEMA_VERSION,
            meta: self.meta.clone(),
            task: self.task.clone(),
        }
    }
}

/// Incremental writer: header on create, one flushed line per trial.
pub struct TranscriptWriter {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl TranscriptWriter {
    /// Creates (truncates) the file and writes the header line.
    pub fn create(path: &Path, header: &TranscriptHeader) -> Result<Self, TranscriptError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut writer = BufWriter::new(file);
        let line = serde_json::to_string(header).expect("header serializes");
        writeln!(writer, "{line}").map_err(|e| io_err(path, e))?;
        writer.flush().map_err(|e| io_err(path, e))?;
        Ok(TranscriptWriter {
            path: path.to_path_buf(),
            writer,
        })
    }

    /// Reopens an existing transcript for appending further trials.
    pub fn append(path: &Path) -> Result<Self, TranscriptError> {
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| io_err(path, e))?;
        Ok(TranscriptWriter {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
        })
    }

    pub fn write_trial(&mut self, record: &TrialRecord) -> Result<(), TranscriptError> {
        let line = serde_json::to_string(record).expect("trial serializes");
        writeln!(self.writer, "{line}").map_err(|e| io_err(&self.path, e))?;
        self.writer.flush().map_err(|e| io_err(&self.path, e))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> TranscriptError {
    TranscriptError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Writes a complete transcript in one go.
pub fn write_transcript(transcript: &RunTranscript, path: &Path) -> Result<(), TranscriptError> {
    let mut writer = TranscriptWriter::create(path, &transcript.header())?;
    for record in transcript.learning.iter().chain(&transcript.transfer) {
        writer.write_trial(record)?;
    }
    Ok(())
}

/// Reads header and however many trials are present. Used for resume; a
/// torn final line (crash mid-write) is dropped, anything else corrupt is an
/// error.
pub fn read_partial(path: &Path) -> Result<(TranscriptHeader, Vec<TrialRecord>), TranscriptError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header: TranscriptHeader = match lines.next() {
        Some((_, Ok(line))) if !line.trim().is_empty() => {
            serde_json::from_str(&line).map_err(|e| TranscriptError::Corrupt {
                path: path.display().to_string(),
                line: 1,
                detail: format!("bad header: {e}"),
            })?
        }
        Some((_, Err(e))) => return Err(io_err(path, e)),
        _ => {
            return Err(TranscriptError::MissingHeader {
                path: path.display().to_string(),
            })
        }
    };
    if header.schema_version != SCHEMA_VERSION {
        return Err(TranscriptError::VersionMismatch {
            path: path.display().to_string(),
            found: header.schema_version,
            supported: SCHEMA_VERSION,
        });
    }

    let mut records: Vec<TrialRecord> = Vec::new();
    let mut pending_error: Option<TranscriptError> = None;
    for (idx, line) in lines {
        if let Some(err) = pending_error.take() {
            // The bad line was not the last one; that is real corruption.
            return Err(err);
        }
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TrialRecord>(&line) {
            Ok(record) => records.push(record),
            Err(e) => {
                pending_error = Some(TranscriptError::Corrupt {
                    path: path.display().to_string(),
                    line: idx + 1,
                    detail: e.to_string(),
                });
            }
        }
    }
    if pending_error.is_some() {
        log::warn!(
            "{}: dropping torn final line; resuming from the last complete trial",
            path.display()
        );
    }
    Ok((header, records))
}

/// Reads a complete transcript, requiring exactly 20 + 28 trials.
pub fn read_transcript(path: &Path) -> Result<RunTranscript, TranscriptError> {
    let (header, records) = read_partial(path)?;
    let expected = NUM_LEARNING_TRIALS + NUM_TRANSFER_TRIALS;
    if records.len() != expected {
        let last_valid = match records.last() {
            Some(record) => {
                let idx = records.len().saturating_sub(NUM_LEARNING_TRIALS + 1);
                record.describe(idx)
            }
            None => "header only".to_string(),
        };
        return Err(TranscriptError::Truncated {
            path: path.display().to_string(),
            completed_trials: records.len(),
            expected_trials: expected,
            last_valid,
        });
    }
    let mut learning = records;
    let transfer = learning.split_off(NUM_LEARNING_TRIALS);
    for (i, record) in learning.iter().enumerate() {
        if record.phase != Phase::Learning {
            return Err(TranscriptError::Corrupt {
                path: path.display().to_string(),
                line: i + 2,
                detail: "expected a learning record".to_string(),
            });
        }
    }
    for (i, record) in transfer.iter().enumerate() {
        if record.phase != Phase::Transfer {
            return Err(TranscriptError::Corrupt {
                path: path.display().to_string(),
                line: NUM_LEARNING_TRIALS + i + 2,
                detail: "expected a transfer record".to_string(),
            });
        }
    }
    Ok(RunTranscript {
        meta: header.meta,
        task: header.task,
        learning,
        transfer,
    })
}
