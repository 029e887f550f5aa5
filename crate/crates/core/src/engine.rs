//! Session orchestration: the learning phase with complete feedback, the
//! transfer phase without, incremental transcript persistence, and
//! single-trial checkpoint/resume.
//!
//! The task realization (letters, schedules, and every outcome draw) is fully
//! determined by the seeds before any agent is consulted, so prompts can be
//! rendered ahead of time and swapping the agent never perturbs the task.

use std::path::Path;
use std::sync::mpsc;
use std::time::Instant;

use crate::agents::{decide, ObservationTable, ValuationPolicy};
use crate::error::{EngineError, GatewayError, TranscriptError};
use crate::gateway::{digest_messages, EndpointConfig, Gateway};
use crate::parse::{parse_choice, parse_ratings, ParsedRatings};
use crate::prompt::{
    render_choice_prompt, render_history, render_system_prompt, ChatMessage, Condition,
};
use crate::rng::{stream, substream, SeededRng};
use crate::task::{
    assign_letters, build_task_spec_with_sd, make_learning_schedule, make_transfer_schedule,
    sample_outcome, LearningTrial, Letter, OutcomeEntry, OutcomeRecord, TaskInstance,
    TransferTrial, NUM_LEARNING_TRIALS, NUM_TRANSFER_TRIALS,
};
use crate::transcript::{
    read_partial, Phase, RunTranscript, SessionMeta, TranscriptHeader, TranscriptWriter,
    TrialRecord, SCHEMA_VERSION,
};

/// Per-session configuration. `(master_seed, run_index)` fully determines the
/// task realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub condition: Condition,
    pub master_seed: u64,
    pub run_index: u32,
    pub payoff_sd: f64,
    /// Re-ask once with the identical prompt when a response is ambiguous.
    /// Off by default: ambiguous trials are recorded as-is and excluded at
    /// analysis time.
    pub reask_ambiguous: bool,
}

impl SessionConfig {
    pub fn new(condition: Condition, master_seed: u64, run_index: u32) -> Self {
        SessionConfig {
            condition,
            master_seed,
            run_index,
            payoff_sd: 1.0,
            reask_ambiguous: false,
        }
    }
}

/// The decision-maker for a session: a simulated valuation policy or a chat
/// endpoint behind a gateway.
pub enum Agent<'a> {
    Policy(ValuationPolicy),
    Endpoint {
        gateway: &'a Gateway,
        config: &'a EndpointConfig,
    },
}

impl Agent<'_> {
    pub fn label(&self) -> String {
        match self {
            Agent::Policy(policy) => policy.label(),
            Agent::Endpoint { config, .. } => config.model_id.clone(),
        }
    }
}

/// The agent-independent part of a session: letters, schedules, and all 20
/// rounds' outcome draws.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRealization {
    pub instance: TaskInstance,
    pub learning: Vec<LearningTrial>,
    pub transfer: Vec<TransferTrial>,
    /// One record per learning round, entries in presentation order.
    pub outcomes: Vec<OutcomeRecord>,
}

/// Derives the full task realization from the config's seeds.
pub fn realize_task(config: &SessionConfig) -> TaskRealization {
    let spec = build_task_spec_with_sd(config.payoff_sd);
    let (seed, run) = (config.master_seed, config.run_index);
    let instance = assign_letters(&spec, seed, run, &mut substream(seed, run, stream::LETTERS));
    let learning = make_learning_schedule(&mut substream(seed, run, stream::LEARNING_SCHEDULE));
    let transfer = make_transfer_schedule(&mut substream(seed, run, stream::TRANSFER_SCHEDULE));

    let mut outcome_rng = substream(seed, run, stream::OUTCOMES);
    let outcomes = learning
        .iter()
        .map(|trial| {
            let entries = [trial.presented_first, trial.presented_second]
                .iter()
                .map(|&option| OutcomeEntry {
                    letter: instance.letter(option),
                    dollars: sample_outcome(spec.option(option), &mut outcome_rng),
                })
                .collect();
            OutcomeRecord::new(trial.round_number, entries).expect("two entries per round")
        })
        .collect();

    TaskRealization {
        instance,
        learning,
        transfer,
        outcomes,
    }
}

/// A trial's rendered prompt plus its presentation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTrial {
    pub phase: Phase,
    /// 0-based index within the phase.
    pub index: usize,
    pub round_number: Option<usize>,
    pub first: Letter,
    pub second: Letter,
    pub messages: Vec<ChatMessage>,
}

impl RenderedTrial {
    pub fn user_text(&self) -> &str {
        &self.messages[1].content
    }
}

/// Renders the prompt for one trial of the realization. Learning trial `k`
/// sees rounds `0..k`; every transfer trial sees all 20 rounds.
pub fn render_trial(
    realization: &TaskRealization,
    condition: Condition,
    phase: Phase,
    index: usize,
) -> RenderedTrial {
    let (first, second, round_number, history_upto) = match phase {
        Phase::Learning => {
            let trial = &realization.learning[index];
            (
                realization.instance.letter(trial.presented_first),
                realization.instance.letter(trial.presented_second),
                Some(trial.round_number),
                index,
            )
        }
        Phase::Transfer => {
            let trial = &realization.transfer[index];
            (
                realization.instance.letter(trial.presented_first),
                realization.instance.letter(trial.presented_second),
                None,
                realization.outcomes.len(),
            )
        }
    };
    let history = render_history(&realization.outcomes[..history_upto], condition);
    let messages = render_choice_prompt(first, second, condition, &history)
        .expect("schedule letters are distinct");
    RenderedTrial {
        phase,
        index,
        round_number,
        first,
        second,
        messages,
    }
}

/// All 48 trials of a session, learning first.
pub fn render_all_trials(realization: &TaskRealization, condition: Condition) -> Vec<RenderedTrial> {
    let learning = (0..realization.learning.len())
        .map(|k| render_trial(realization, condition, Phase::Learning, k));
    let transfer = (0..realization.transfer.len())
        .map(|k| render_trial(realization, condition, Phase::Transfer, k));
    learning.chain(transfer).collect()
}

struct SessionState<'a> {
    config: &'a SessionConfig,
    realization: TaskRealization,
    obs: ObservationTable,
    agent_rng: SeededRng,
}

impl<'a> SessionState<'a> {
    fn new(config: &'a SessionConfig) -> Self {
        let realization = realize_task(config);
        let obs = ObservationTable::new(&realization.instance.spec);
        let agent_rng = substream(config.master_seed, config.run_index, stream::AGENT);
        SessionState {
            config,
            realization,
            obs,
            agent_rng,
        }
    }

    /// Feeds one learning round's feedback into the observation table.
    fn absorb_feedback(&mut self, learning_index: usize) {
        let trial = &self.realization.learning[learning_index];
        let record = &self.realization.outcomes[learning_index];
        // Entry order equals presentation order.
        for (option, entry) in [trial.presented_first, trial.presented_second]
            .into_iter()
            .zip(&record.entries)
        {
            self.obs.record(option, entry.dollars);
        }
    }

    fn pair_of(&self, rendered: &RenderedTrial) -> (usize, usize) {
        let first = self
            .realization
            .instance
            .option_of(rendered.first)
            .expect("letter belongs to instance");
        let second = self
            .realization
            .instance
            .option_of(rendered.second)
            .expect("letter belongs to instance");
        (first, second)
    }
}

fn ask_policy(
    state: &mut SessionState,
    policy: &ValuationPolicy,
    rendered: &RenderedTrial,
) -> (String, bool) {
    let pair = state.pair_of(rendered);
    let decision = decide(policy, &state.obs, pair, &mut state.agent_rng);
    let letter = state.realization.instance.letter(decision.option_index);
    (
        format!("I choose slot machine {letter}."),
        decision.undefined_value,
    )
}

fn gateway_error(phase: Phase, trial: usize, source: GatewayError) -> EngineError {
    EngineError::Gateway {
        phase: match phase {
            Phase::Learning => "learning".to_string(),
            Phase::Transfer => "transfer".to_string(),
        },
        trial: trial + 1,
        source,
    }
}

/// Runs one trial against the agent and assembles its record.
fn run_trial(
    state: &mut SessionState,
    agent: &Agent,
    rendered: &RenderedTrial,
) -> Result<TrialRecord, EngineError> {
    let started = Instant::now();
    let offered = (rendered.first, rendered.second);
    let condition = state.config.condition;

    let (raw_response, ask_count, value_fallback) = match agent {
        Agent::Policy(policy) => {
            let (response, fallback) = ask_policy(state, policy, rendered);
            (response, 1, fallback)
        }
        Agent::Endpoint { gateway, config } => {
            let exchange = gateway
                .chat_complete(config, &rendered.messages)
                .map_err(|e| gateway_error(rendered.phase, rendered.index, e))?;
            let mut response = exchange.response_text;
            let mut asks = 1;
            if state.config.reask_ambiguous && parse_choice(&response, offered).is_ambiguous() {
                let retry = gateway
                    .chat_complete(config, &rendered.messages)
                    .map_err(|e| gateway_error(rendered.phase, rendered.index, e))?;
                response = retry.response_text;
                asks = 2;
            }
            (response, asks, false)
        }
    };

    let choice = parse_choice(&raw_response, offered);
    let ratings: Option<ParsedRatings> = if condition.collects_ratings() {
        parse_ratings(&raw_response, offered, condition)
    } else {
        None
    };
    let ratings_missing = condition.collects_ratings() && ratings.is_none();

    let outcomes = match rendered.phase {
        Phase::Learning => state.realization.outcomes[rendered.index].entries.clone(),
        Phase::Transfer => Vec::new(),
    };

    Ok(TrialRecord {
        phase: rendered.phase,
        round_number: rendered.round_number,
        first_letter: rendered.first,
        second_letter: rendered.second,
        prompt_digest: digest_messages(&rendered.messages),
        prompt_text: rendered.user_text().to_string(),
        raw_response,
        ask_count,
        choice,
        ratings,
        ratings_missing,
        value_fallback,
        outcomes,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// Replays a completed trial during resume: advances the agent rng exactly as
/// the original run did (policy agents only) and cross-checks the recorded
/// choice.
fn replay_completed(
    state: &mut SessionState,
    agent: &Agent,
    rendered: &RenderedTrial,
    record: &TrialRecord,
    checkpoint: &Path,
) -> Result<(), EngineError> {
    let mismatch = |detail: String| EngineError::CheckpointMismatch {
        path: checkpoint.display().to_string(),
        detail,
    };
    if (record.first_letter, record.second_letter) != (rendered.first, rendered.second) {
        return Err(mismatch(format!(
            "trial {} offered {}{}, checkpoint has {}{}",
            rendered.index + 1,
            rendered.first,
            rendered.second,
            record.first_letter,
            record.second_letter
        )));
    }
    if rendered.phase == Phase::Learning {
        let expected = &state.realization.outcomes[rendered.index].entries;
        if &record.outcomes != expected {
            return Err(mismatch(format!(
                "outcome draws diverge at learning round {}",
                rendered.index + 1
            )));
        }
    }
    if let Agent::Policy(policy) = agent {
        let (response, _) = ask_policy(state, policy, rendered);
        if response != record.raw_response {
            return Err(mismatch(format!(
                "policy decision diverges at {} (expected {:?}, checkpoint has {:?})",
                record.describe(rendered.index),
                response,
                record.raw_response
            )));
        }
    }
    Ok(())
}

/// Runs a full session. With a checkpoint path, completed trials are loaded
/// from it (after validating the header against this config) and every new
/// trial is flushed to it as soon as it finishes; the finished file is the
/// session's transcript.
pub fn run_session(
    config: &SessionConfig,
    agent: &Agent,
    checkpoint: Option<&Path>,
) -> Result<RunTranscript, EngineError> {
    let mut state = SessionState::new(config);
    let meta = SessionMeta {
        condition: config.condition,
        agent_label: agent.label(),
        master_seed: config.master_seed,
        run_index: config.run_index,
        payoff_sd: config.payoff_sd,
        reask_ambiguous: config.reask_ambiguous,
        system_prompt: render_system_prompt().to_string(),
    };
    let header = TranscriptHeader {
        schema_version: SCHEMA_VERSION,
        meta: meta.clone(),
        task: state.realization.instance.clone(),
    };

    let mut completed: Vec<TrialRecord> = Vec::new();
    if let Some(path) = checkpoint {
        if path.exists() {
            let (existing, records) = read_partial(path)?;
            if existing != header {
                return Err(EngineError::CheckpointMismatch {
                    path: path.display().to_string(),
                    detail: "header does not match this config and seed".to_string(),
                });
            }
            if records.len() > NUM_LEARNING_TRIALS + NUM_TRANSFER_TRIALS {
                return Err(EngineError::CheckpointMismatch {
                    path: path.display().to_string(),
                    detail: format!("{} trials exceed a full session", records.len()),
                });
            }
            completed = records;
        }
    }

    let mut writer = match checkpoint {
        Some(path) if completed.is_empty() => Some(TranscriptWriter::create(path, &header)?),
        Some(path) => Some(TranscriptWriter::append(path)?),
        None => None,
    };
    let mut write = |record: &TrialRecord| -> Result<(), TranscriptError> {
        match writer.as_mut() {
            Some(w) => w.write_trial(record),
            None => Ok(()),
        }
    };

    let mut learning: Vec<TrialRecord> = Vec::with_capacity(NUM_LEARNING_TRIALS);
    let mut transfer: Vec<TrialRecord> = Vec::with_capacity(NUM_TRANSFER_TRIALS);

    for index in 0..state.realization.learning.len() {
        let rendered = render_trial(&state.realization, config.condition, Phase::Learning, index);
        if index < completed.len() {
            let record = completed[index].clone();
            replay_completed(&mut state, agent, &rendered, &record, checkpoint.unwrap())?;
            state.absorb_feedback(index);
            learning.push(record);
            continue;
        }
        let record = run_trial(&mut state, agent, &rendered)?;
        write(&record)?;
        // Feedback lands after the choice, chosen or not.
        state.absorb_feedback(index);
        learning.push(record);
    }

    for index in 0..state.realization.transfer.len() {
        let rendered = render_trial(&state.realization, config.condition, Phase::Transfer, index);
        let completed_index = NUM_LEARNING_TRIALS + index;
        if completed_index < completed.len() {
            let record = completed[completed_index].clone();
            replay_completed(&mut state, agent, &rendered, &record, checkpoint.unwrap())?;
            transfer.push(record);
            continue;
        }
        let record = run_trial(&mut state, agent, &rendered)?;
        write(&record)?;
        transfer.push(record);
    }

    Ok(RunTranscript {
        meta,
        task: state.realization.instance.clone(),
        learning,
        transfer,
    })
}

/// File name for one run's transcript: `{condition}_{agent}_{run:03}.jsonl`.
pub fn transcript_file_name(condition: Condition, agent_label: &str, run_index: u32) -> String {
    let sanitized: String = agent_label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '-' })
        .collect();
    format!("{condition}_{sanitized}_{run_index:03}.jsonl")
}

/// Outcome of a batch: transcripts sorted by run index, failures listed
/// separately so a partial batch is still usable.
pub struct BatchOutcome {
    pub transcripts: Vec<RunTranscript>,
    pub failures: Vec<(u32, EngineError)>,
}

impl BatchOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `n_runs` independent sessions with derived seeds, up to `jobs` in
/// parallel. Letter assignment re-randomizes each run via `run_index`. With
/// an output directory, every session checkpoints into its own transcript
/// file there. `on_done` fires as each run finishes (any order).
pub fn run_batch_each<F>(
    base: &SessionConfig,
    n_runs: u32,
    jobs: usize,
    agent: &Agent,
    out_dir: Option<&Path>,
    mut on_done: F,
) -> BatchOutcome
where
    F: FnMut(u32, &Result<RunTranscript, EngineError>),
{
    let jobs = jobs.max(1);
    let label = agent.label();
    let run_one = |run_index: u32| -> Result<RunTranscript, EngineError> {
        let config = SessionConfig {
            run_index,
            ..base.clone()
        };
        let path = out_dir.map(|dir| dir.join(transcript_file_name(config.condition, &label, run_index)));
        run_session(&config, agent, path.as_deref())
    };

    let mut results: Vec<(u32, Result<RunTranscript, EngineError>)> =
        Vec::with_capacity(n_runs as usize);
    if jobs == 1 {
        for run_index in 0..n_runs {
            let result = run_one(run_index);
            on_done(run_index, &result);
            results.push((run_index, result));
        }
    } else {
        let (tx, rx) = mpsc::channel();
        std::thread::scope(|scope| {
            for worker in 0..jobs {
                let tx = tx.clone();
                let run_one = &run_one;
                scope.spawn(move || {
                    let mut run_index = worker as u32;
                    while run_index < n_runs {
                        let result = run_one(run_index);
                        if tx.send((run_index, result)).is_err() {
                            return;
                        }
                        run_index += jobs as u32;
                    }
                });
            }
            drop(tx);
            while let Ok((run_index, result)) = rx.recv() {
                on_done(run_index, &result);
                results.push((run_index, result));
            }
        });
    }
    results.sort_by_key(|(run_index, _)| *run_index);

    let mut outcome = BatchOutcome {
        transcripts: Vec::new(),
        failures: Vec::new(),
    };
    for (run_index, result) in results {
        match result {
            Ok(transcript) => outcome.transcripts.push(transcript),
            Err(error) => outcome.failures.push((run_index, error)),
        }
    }
    outcome
}

/// [`run_batch_each`] without a progress callback.
pub fn run_batch(
    base: &SessionConfig,
    n_runs: u32,
    jobs: usize,
    agent: &Agent,
    out_dir: Option<&Path>,
) -> BatchOutcome {
    run_batch_each(base, n_runs, jobs, agent, out_dir, |_, _| {})
}
