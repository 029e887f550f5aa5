//! The statistical readout computed from transcripts: transfer choice rates,
//! the linear contrast diagnosing absolute vs. relative valuation, learning
//! curves, and the six diagnostic pair proportions.

use std::collections::BTreeSet;

use crate::error::AnalysisError;
use crate::stats::{one_sample_t, proportion_z_test, significance_stars, OneSampleT, ZTest};
use crate::task::{build_task_spec, NUM_CONTEXTS, NUM_OPTIONS, REPETITIONS_PER_CONTEXT};
use crate::transcript::{RunTranscript, TrialRecord};

/// Contrast coefficients over the eight options in mean order: the mean
/// choice rate of the locally suboptimal L21/L27/L33 minus the mean of the
/// locally optimal H18/H24/H30. Positive favors absolute valuation, negative
/// relative valuation.
pub const CONTRAST_COEFFICIENTS: [f64; NUM_OPTIONS] = [
    0.0,
    -1.0 / 3.0,
    1.0 / 3.0,
    -1.0 / 3.0,
    1.0 / 3.0,
    -1.0 / 3.0,
    1.0 / 3.0,
    0.0,
];

/// Dot product of the contrast coefficients with an 8-vector of rates,
/// accumulated in option order.
pub fn contrast_of_rates(rates: &[f64]) -> f64 {
    assert_eq!(rates.len(), NUM_OPTIONS);
    let mut value = 0.0;
    for (coefficient, rate) in CONTRAST_COEFFICIENTS.iter().zip(rates) {
        value += coefficient * rate;
    }
    value
}

/// The six transfer pairs that pit a locally optimal option against a
/// higher-mean locally suboptimal one, in published column order. Tuples are
/// (high-role option index, low-role option index, display name); the
/// payoff-maximizing choice is always the L option.
pub const DIAGNOSTIC_PAIRS: [(usize, usize, &str); 6] = [
    (1, 2, "H18 vs. L21"),
    (3, 4, "H24 vs. L27"),
    (5, 6, "H30 vs. L33"),
    (1, 4, "H18 vs. L27"),
    (3, 6, "H24 vs. L33"),
    (1, 6, "H18 vs. L33"),
];

#[derive(Debug, Clone, Copy, Default)]
pub struct AnalysisOptions {
    /// Pool transcripts from different conditions instead of refusing.
    pub allow_mixed: bool,
    /// Keep every option's transfer denominator at 7 even when ambiguous
    /// trials are excluded (compatibility switch; the default decrements
    /// both involved options' denominators).
    pub keep_full_denominator: bool,
}

/// One run's transfer tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRates {
    pub condition: String,
    pub agent_label: String,
    pub run_index: u32,
    pub chosen: [u32; NUM_OPTIONS],
    pub presented: [u32; NUM_OPTIONS],
}

impl RunRates {
    /// Choice rate, undefined when the option was never validly presented.
    pub fn rate(&self, option_index: usize) -> Option<f64> {
        if self.presented[option_index] == 0 {
            None
        } else {
            Some(self.chosen[option_index] as f64 / self.presented[option_index] as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledRate {
    pub option_index: usize,
    pub label: String,
    pub mean: f64,
    pub se: f64,
    /// Runs contributing a defined rate.
    pub n_runs: usize,
    pub runs_excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceRateTable {
    pub per_run: Vec<RunRates>,
    pub pooled: Vec<PooledRate>,
}

fn option_of_letter(transcript: &RunTranscript, letter: crate::task::Letter) -> usize {
    transcript
        .task
        .option_of(letter)
        .expect("recorded letters belong to the task instance")
}

fn valid_choice(record: &TrialRecord) -> Option<crate::task::Letter> {
    record.choice.chosen()
}

/// Per-run and pooled transfer choice rates. An ambiguous trial is removed
/// whole: both its options lose that presentation (unless
/// `keep_full_denominator` is set).
pub fn choice_rates(
    transcripts: &[RunTranscript],
    options: &AnalysisOptions,
) -> Result<ChoiceRateTable, AnalysisError> {
    if transcripts.is_empty() {
        return Err(AnalysisError::NoTranscripts);
    }
    let spec = build_task_spec();
    let per_run: Vec<RunRates> = transcripts
        .iter()
        .map(|transcript| {
            let mut rates = RunRates {
                condition: transcript.meta.condition.to_string(),
                agent_label: transcript.meta.agent_label.clone(),
                run_index: transcript.meta.run_index,
                chosen: [0; NUM_OPTIONS],
                presented: [0; NUM_OPTIONS],
            };
            for record in &transcript.transfer {
                let a = option_of_letter(transcript, record.first_letter);
                let b = option_of_letter(transcript, record.second_letter);
                match valid_choice(record) {
                    Some(letter) => {
                        rates.presented[a] += 1;
                        rates.presented[b] += 1;
                        rates.chosen[option_of_letter(transcript, letter)] += 1;
                    }
                    None if options.keep_full_denominator => {
                        rates.presented[a] += 1;
                        rates.presented[b] += 1;
                    }
                    None => {}
                }
            }
            rates
        })
        .collect();

    let pooled = (0..NUM_OPTIONS)
        .map(|option_index| {
            let values: Vec<f64> = per_run
                .iter()
                .filter_map(|run| run.rate(option_index))
                .collect();
            let n = values.len();
            let mean = if n == 0 {
                f64::NAN
            } else {
                values.iter().sum::<f64>() / n as f64
            };
            let se = if n >= 2 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                    / (n as f64 - 1.0);
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            PooledRate {
                option_index,
                label: spec.option(option_index).label(),
                mean,
                se,
                n_runs: n,
                runs_excluded: per_run.len() - n,
            }
        })
        .collect();

    Ok(ChoiceRateTable { per_run, pooled })
}

/// Per-run contrast values and the one-sample t-test against zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastResult {
    pub per_run: Vec<f64>,
    /// Runs dropped because one of the six contrast options had no defined
    /// rate.
    pub runs_excluded: usize,
    pub test: OneSampleT,
}

pub fn linear_contrast(table: &ChoiceRateTable) -> ContrastResult {
    let mut per_run = Vec::with_capacity(table.per_run.len());
    let mut runs_excluded = 0;
    for run in &table.per_run {
        let mut value = 0.0;
        let mut defined = true;
        for (option_index, coefficient) in CONTRAST_COEFFICIENTS.iter().enumerate() {
            if *coefficient == 0.0 {
                continue;
            }
            match run.rate(option_index) {
                Some(rate) => value += coefficient * rate,
                None => {
                    defined = false;
                    break;
                }
            }
        }
        if defined {
            per_run.push(value);
        } else {
            runs_excluded += 1;
        }
    }
    let test = if per_run.is_empty() {
        OneSampleT::Degenerate {
            n: 0,
            mean: f64::NAN,
        }
    } else {
        one_sample_t(&per_run, 0.0)
    };
    ContrastResult {
        per_run,
        runs_excluded,
        test,
    }
}

/// Accuracy at one (context, repetition) cell of the learning phase.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurvePoint {
    pub context_index: usize,
    /// 1..=5: the n-th time this context appeared in the run.
    pub repetition: usize,
    /// Proportion of valid trials choosing the locally optimal option.
    pub accuracy: f64,
    pub se: f64,
    pub n_runs: usize,
}

/// Figure-2-shaped learning curves: per context and repetition, the
/// proportion of locally optimal choices across runs (ambiguous trials
/// excluded).
pub fn learning_curves(transcripts: &[RunTranscript]) -> Vec<LearningCurvePoint> {
    let mut cells: Vec<Vec<f64>> =
        vec![Vec::new(); NUM_CONTEXTS * REPETITIONS_PER_CONTEXT];
    for transcript in transcripts {
        let mut seen = [0usize; NUM_CONTEXTS];
        for record in &transcript.learning {
            let a = option_of_letter(transcript, record.first_letter);
            let context = a / 2;
            let repetition = seen[context];
            seen[context] += 1;
            if let Some(letter) = valid_choice(record) {
                let chosen = option_of_letter(transcript, letter);
                let correct = chosen % 2 == 1;
                cells[context * REPETITIONS_PER_CONTEXT + repetition]
                    .push(if correct { 1.0 } else { 0.0 });
            }
        }
    }
    (0..NUM_CONTEXTS)
        .flat_map(|context_index| {
            (0..REPETITIONS_PER_CONTEXT).map(move |rep| (context_index, rep))
        })
        .map(|(context_index, rep)| {
            let values = &cells[context_index * REPETITIONS_PER_CONTEXT + rep];
            let n = values.len();
            let accuracy = if n == 0 {
                f64::NAN
            } else {
                values.iter().sum::<f64>() / n as f64
            };
            let se = if n >= 2 {
                let var = values.iter().map(|v| (v - accuracy).powi(2)).sum::<f64>()
                    / (n as f64 - 1.0);
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            LearningCurvePoint {
                context_index,
                repetition: rep + 1,
                accuracy,
                se,
                n_runs: n,
            }
        })
        .collect()
}

/// One diagnostic pair's payoff-maximizing choice proportion.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticPairResult {
    pub name: &'static str,
    pub high_option: usize,
    pub low_option: usize,
    /// Runs choosing the L (payoff-maximizing) option.
    pub k: usize,
    /// Runs with a valid (non-ambiguous) trial for this pair.
    pub n: usize,
    pub test: Option<ZTest>,
    pub stars: &'static str,
}

/// Payoff-maximizing choice proportions for the six diagnostic pairs, with
/// z-tests against chance. A run with an ambiguous trial for a pair drops
/// out of that pair's count.
pub fn diagnostic_pairs(transcripts: &[RunTranscript]) -> Vec<DiagnosticPairResult> {
    DIAGNOSTIC_PAIRS
        .iter()
        .map(|&(high, low, name)| {
            let mut k = 0;
            let mut n = 0;
            for transcript in transcripts {
                let record = transcript.transfer.iter().find(|record| {
                    let a = option_of_letter(transcript, record.first_letter);
                    let b = option_of_letter(transcript, record.second_letter);
                    (a.min(b), a.max(b)) == (high.min(low), high.max(low))
                });
                let Some(record) = record else { continue };
                if let Some(letter) = valid_choice(record) {
                    n += 1;
                    if option_of_letter(transcript, letter) == low {
                        k += 1;
                    }
                }
            }
            let test = (n > 0).then(|| proportion_z_test(k, n, 0.5));
            let stars = test.map_or("", |t| significance_stars(t.p));
            DiagnosticPairResult {
                name,
                high_option: high,
                low_option: low,
                k,
                n,
                test,
                stars,
            }
        })
        .collect()
}

/// The full analysis bundle.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub conditions: Vec<String>,
    pub agents: Vec<String>,
    pub n_runs: usize,
    pub rates: ChoiceRateTable,
    pub contrast: ContrastResult,
    pub diagnostics: Vec<DiagnosticPairResult>,
    pub curves: Vec<LearningCurvePoint>,
}

/// Runs the whole suite over a set of transcripts.
pub fn analyze(
    transcripts: &[RunTranscript],
    options: &AnalysisOptions,
) -> Result<AnalysisReport, AnalysisError> {
    if transcripts.is_empty() {
        return Err(AnalysisError::NoTranscripts);
    }
    let conditions: BTreeSet<String> = transcripts
        .iter()
        .map(|t| t.meta.condition.to_string())
        .collect();
    if conditions.len() > 1 && !options.allow_mixed {
        return Err(AnalysisError::MixedConditions {
            found: conditions.into_iter().collect(),
        });
    }
    let agents: BTreeSet<String> = transcripts
        .iter()
        .map(|t| t.meta.agent_label.clone())
        .collect();

    let rates = choice_rates(transcripts, options)?;
    let contrast = linear_contrast(&rates);
    let diagnostics = diagnostic_pairs(transcripts);
    let curves = learning_curves(transcripts);
    Ok(AnalysisReport {
        conditions: conditions.into_iter().collect(),
        agents: agents.into_iter().collect(),
        n_runs: transcripts.len(),
        rates,
        contrast,
        diagnostics,
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_of_theoretical_vectors_is_exact() {
        let absolute: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
        assert_eq!(contrast_of_rates(&absolute), 1.0 / 7.0);

        let relative: Vec<f64> = (0..8)
            .map(|i| if i % 2 == 0 { 3.0 / 14.0 } else { 11.0 / 14.0 })
            .collect();
        assert_eq!(contrast_of_rates(&relative), -4.0 / 7.0);
    }

    #[test]
    fn contrast_coefficients_sum_to_zero_and_are_scale_linear() {
        let sum: f64 = CONTRAST_COEFFICIENTS.iter().sum();
        assert!(sum.abs() < 1e-15);

        let rates: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
        let shifted: Vec<f64> = rates.iter().map(|r| 3.0 * r + 0.25).collect();
        let base = contrast_of_rates(&rates);
        let scaled = contrast_of_rates(&shifted);
        assert!((scaled - 3.0 * base).abs() < 1e-12);
    }
}
