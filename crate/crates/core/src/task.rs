//! Bandit task structure: eight payoff distributions in four fixed contexts,
//! randomized trial schedules, and integer dollar outcome sampling.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::TaskError;

pub const NUM_OPTIONS: usize = 8;
pub const NUM_CONTEXTS: usize = 4;
pub const REPETITIONS_PER_CONTEXT: usize = 5;
pub const NUM_LEARNING_TRIALS: usize = NUM_CONTEXTS * REPETITIONS_PER_CONTEXT;
pub const NUM_TRANSFER_TRIALS: usize = NUM_OPTIONS * (NUM_OPTIONS - 1) / 2;

const BASE_MEAN: f64 = 15.0;
const MEAN_STEP: f64 = 3.0;
const DEFAULT_SD: f64 = 1.0;

/// Whether an option is the lower- or higher-valued member of its learning
/// context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalRole {
    Low,
    High,
}

/// A slot machine name, one of `A` through `H`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Letter(char);

impl Letter {
    pub const ALL: [Letter; NUM_OPTIONS] = [
        Letter('A'),
        Letter('B'),
        Letter('C'),
        Letter('D'),
        Letter('E'),
        Letter('F'),
        Letter('G'),
        Letter('H'),
    ];

    /// Accepts `A`-`H` in either case.
    pub fn new(c: char) -> Option<Letter> {
        let up = c.to_ascii_uppercase();
        if ('A'..='H').contains(&up) {
            Some(Letter(up))
        } else {
            None
        }
    }

    pub fn as_char(self) -> char {
        self.0
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the eight payoff distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    /// 0..7, ordered by mean payoff.
    pub option_index: usize,
    pub mean_payoff: f64,
    pub payoff_sd: f64,
    /// 0..3; each context holds two adjacent options.
    pub context_index: usize,
    pub local_role: LocalRole,
}

impl OptionSpec {
    /// Conventional label: role letter plus mean, e.g. `L15` or `H36`.
    pub fn label(&self) -> String {
        let role = match self.local_role {
            LocalRole::Low => 'L',
            LocalRole::High => 'H',
        };
        format!("{role}{}", self.mean_payoff as i64)
    }
}

/// The full eight-option, four-context task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub options: Vec<OptionSpec>,
}

impl TaskSpec {
    pub fn option(&self, index: usize) -> &OptionSpec {
        &self.options[index]
    }

    /// The (low, high) option indices of a context.
    pub fn context_members(&self, context_index: usize) -> (usize, usize) {
        (2 * context_index, 2 * context_index + 1)
    }
}

/// Builds the default task: means 15..36 in steps of 3, sd 1.0, four contexts
/// of two options each with a fixed $3 within-context gap.
pub fn build_task_spec() -> TaskSpec {
    build_task_spec_with_sd(DEFAULT_SD)
}

/// Same structure with an overridden outcome standard deviation. `sd = 0`
/// yields noise-free draws, which the simulated-agent oracles rely on.
pub fn build_task_spec_with_sd(payoff_sd: f64) -> TaskSpec {
    let options = (0..NUM_OPTIONS)
        .map(|i| OptionSpec {
            option_index: i,
            mean_payoff: BASE_MEAN + MEAN_STEP * i as f64,
            payoff_sd,
            context_index: i / 2,
            local_role: if i % 2 == 0 {
                LocalRole::Low
            } else {
                LocalRole::High
            },
        })
        .collect();
    TaskSpec { options }
}

/// A task spec plus the per-run randomization: which letter names which
/// option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub spec: TaskSpec,
    /// `letter_of[option_index]` is that option's letter; a bijection.
    pub letter_of: Vec<Letter>,
    pub master_seed: u64,
    pub run_index: u32,
}

impl TaskInstance {
    pub fn letter(&self, option_index: usize) -> Letter {
        self.letter_of[option_index]
    }

    pub fn option_of(&self, letter: Letter) -> Option<usize> {
        self.letter_of.iter().position(|&l| l == letter)
    }
}

/// Draws a uniform random bijection from options to the letters A-H.
pub fn assign_letters(
    spec: &TaskSpec,
    master_seed: u64,
    run_index: u32,
    rng: &mut impl Rng,
) -> TaskInstance {
    let mut letters = Letter::ALL;
    letters.shuffle(rng);
    TaskInstance {
        spec: spec.clone(),
        letter_of: letters.to_vec(),
        master_seed,
        run_index,
    }
}

/// One learning-phase trial: a context's two options in randomized
/// presentation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningTrial {
    /// 1..=20, sequential.
    pub round_number: usize,
    pub context_index: usize,
    pub presented_first: usize,
    pub presented_second: usize,
}

/// One transfer-test trial: an unordered option pair in randomized
/// presentation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferTrial {
    pub presented_first: usize,
    pub presented_second: usize,
}

impl TransferTrial {
    /// The unordered pair as (smaller index, larger index).
    pub fn pair(&self) -> (usize, usize) {
        if self.presented_first < self.presented_second {
            (self.presented_first, self.presented_second)
        } else {
            (self.presented_second, self.presented_first)
        }
    }
}

/// Each context five times, uniformly shuffled, with per-trial presentation
/// order randomized.
pub fn make_learning_schedule(rng: &mut impl Rng) -> Vec<LearningTrial> {
    let mut contexts: Vec<usize> = (0..NUM_CONTEXTS)
        .flat_map(|c| std::iter::repeat(c).take(REPETITIONS_PER_CONTEXT))
        .collect();
    contexts.shuffle(rng);
    contexts
        .into_iter()
        .enumerate()
        .map(|(i, context_index)| {
            let (low, high) = (2 * context_index, 2 * context_index + 1);
            let (first, second) = if rng.gen_bool(0.5) {
                (low, high)
            } else {
                (high, low)
            };
            LearningTrial {
                round_number: i + 1,
                context_index,
                presented_first: first,
                presented_second: second,
            }
        })
        .collect()
}

/// All 28 unordered pairs exactly once, uniformly shuffled, presentation
/// order randomized.
pub fn make_transfer_schedule(rng: &mut impl Rng) -> Vec<TransferTrial> {
    let mut pairs: Vec<(usize, usize)> = (0..NUM_OPTIONS)
        .flat_map(|a| ((a + 1)..NUM_OPTIONS).map(move |b| (a, b)))
        .collect();
    pairs.shuffle(rng);
    pairs
        .into_iter()
        .map(|(a, b)| {
            let (first, second) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            TransferTrial {
                presented_first: first,
                presented_second: second,
            }
        })
        .collect()
}

/// One normal draw via Box-Muller. Consumes exactly two `u64` values per call
/// (the sine half of the pair is discarded) so that stream positions are
/// fixed and checkpoint resume can fast-forward deterministically.
pub fn sample_normal(mean: f64, sd: f64, rng: &mut impl RngCore) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1] so the log is finite; u2 in [0, 1).
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    let radius = (-2.0 * u1.ln()).sqrt();
    mean + sd * radius * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Rounds to the nearest integer dollar, ties away from zero.
pub fn round_to_dollars(x: f64) -> i64 {
    x.round() as i64
}

/// Draws one integer dollar outcome for an option.
pub fn sample_outcome(option: &OptionSpec, rng: &mut impl RngCore) -> i64 {
    round_to_dollars(sample_normal(option.mean_payoff, option.payoff_sd, rng))
}

/// One round's feedback: both presented options' outcomes, in the order they
/// appeared in that round's choice prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub round_number: usize,
    pub entries: Vec<OutcomeEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeEntry {
    pub letter: Letter,
    pub dollars: i64,
}

impl OutcomeRecord {
    pub fn new(round_number: usize, entries: Vec<OutcomeEntry>) -> Result<Self, TaskError> {
        if entries.len() != 2 {
            return Err(TaskError::BadOutcomeRecord {
                round_number,
                len: entries.len(),
            });
        }
        Ok(OutcomeRecord {
            round_number,
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, substream};

    #[test]
    fn spec_shape_and_means() {
        let spec = build_task_spec();
        assert_eq!(spec.options.len(), 8);
        let contexts: std::collections::HashSet<usize> =
            spec.options.iter().map(|o| o.context_index).collect();
        assert_eq!(contexts.len(), 4);

        let first = spec.option(0);
        assert_eq!(first.mean_payoff, 15.0);
        assert_eq!(first.context_index, 0);
        assert_eq!(first.local_role, LocalRole::Low);
        assert_eq!(first.label(), "L15");

        let last = spec.option(7);
        assert_eq!(last.mean_payoff, 36.0);
        assert_eq!(last.context_index, 3);
        assert_eq!(last.local_role, LocalRole::High);
        assert_eq!(last.label(), "H36");

        for o in &spec.options {
            assert_eq!(o.mean_payoff, 15.0 + 3.0 * o.option_index as f64);
            assert_eq!(o.payoff_sd, 1.0);
        }
        // High member of each context exceeds the low member by exactly $3.
        for c in 0..4 {
            let (low, high) = spec.context_members(c);
            assert_eq!(
                spec.option(high).mean_payoff - spec.option(low).mean_payoff,
                3.0
            );
            assert_eq!(spec.option(low).local_role, LocalRole::Low);
            assert_eq!(spec.option(high).local_role, LocalRole::High);
        }
    }

    #[test]
    fn letters_are_a_bijection_and_deterministic() {
        let spec = build_task_spec();
        let a = assign_letters(&spec, 7, 0, &mut substream(7, 0, stream::LETTERS));
        let b = assign_letters(&spec, 7, 0, &mut substream(7, 0, stream::LETTERS));
        assert_eq!(a.letter_of, b.letter_of);

        let mut seen: Vec<char> = a.letter_of.iter().map(|l| l.as_char()).collect();
        seen.sort_unstable();
        assert_eq!(seen, vec!['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H']);

        for i in 0..8 {
            assert_eq!(a.option_of(a.letter(i)), Some(i));
        }
    }

    #[test]
    fn letter_assignment_is_uniform() {
        let spec = build_task_spec();
        let mut counts = [0usize; 8];
        let draws = 10_000;
        for run in 0..draws {
            let inst = assign_letters(&spec, 99, run, &mut substream(99, run, stream::LETTERS));
            let c = inst.letter(0).as_char();
            counts[(c as u8 - b'A') as usize] += 1;
        }
        for &count in &counts {
            let freq = count as f64 / draws as f64;
            assert!((freq - 0.125).abs() < 0.02, "freq {freq}");
        }
    }

    #[test]
    fn learning_schedule_counts_and_determinism() {
        let mut rng = substream(1, 0, stream::LEARNING_SCHEDULE);
        let sched = make_learning_schedule(&mut rng);
        assert_eq!(sched.len(), 20);
        let mut counts = [0usize; 4];
        for (i, t) in sched.iter().enumerate() {
            assert_eq!(t.round_number, i + 1);
            counts[t.context_index] += 1;
            let (low, high) = (2 * t.context_index, 2 * t.context_index + 1);
            let mut presented = [t.presented_first, t.presented_second];
            presented.sort_unstable();
            assert_eq!(presented, [low, high]);
        }
        assert_eq!(counts, [5, 5, 5, 5]);

        let again = make_learning_schedule(&mut substream(1, 0, stream::LEARNING_SCHEDULE));
        assert_eq!(sched, again);
    }

    #[test]
    fn first_learning_trial_context_is_uniform() {
        let mut counts = [0usize; 4];
        let draws = 10_000;
        for run in 0..draws {
            let sched = make_learning_schedule(&mut substream(5, run, stream::LEARNING_SCHEDULE));
            counts[sched[0].context_index] += 1;
        }
        for &count in &counts {
            let freq = count as f64 / draws as f64;
            assert!((freq - 0.25).abs() < 0.02, "freq {freq}");
        }
    }

    #[test]
    fn transfer_schedule_covers_all_pairs_once() {
        let mut rng = substream(2, 0, stream::TRANSFER_SCHEDULE);
        let sched = make_transfer_schedule(&mut rng);
        assert_eq!(sched.len(), 28);
        let pairs: std::collections::HashSet<(usize, usize)> =
            sched.iter().map(|t| t.pair()).collect();
        assert_eq!(pairs.len(), 28);
        // H18 (index 1) vs L21 (index 2) is one of them.
        assert!(pairs.contains(&(1, 2)));

        let again = make_transfer_schedule(&mut substream(2, 0, stream::TRANSFER_SCHEDULE));
        assert_eq!(sched, again);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_to_dollars(17.5), 18);
        assert_eq!(round_to_dollars(18.4), 18);
        assert_eq!(round_to_dollars(-2.5), -3);
        assert_eq!(round_to_dollars(2.5), 3);
        assert_eq!(round_to_dollars(0.0), 0);
    }

    #[test]
    fn zero_sd_returns_the_mean() {
        let spec = build_task_spec_with_sd(0.0);
        let mut rng = substream(3, 0, stream::OUTCOMES);
        for _ in 0..100 {
            assert_eq!(sample_outcome(spec.option(1), &mut rng), 18);
        }
    }

    #[test]
    fn sample_outcome_consumes_two_words_per_call() {
        use rand::RngCore;
        let spec = build_task_spec();
        let mut a = substream(4, 0, stream::OUTCOMES);
        let mut b = substream(4, 0, stream::OUTCOMES);
        let _ = sample_outcome(spec.option(3), &mut a);
        b.next_u64();
        b.next_u64();
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn normal_sampling_moments() {
        let mut rng = substream(6, 0, stream::OUTCOMES);
        let n = 100_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        let mut rounded_sum = 0.0;
        for _ in 0..n {
            let x = sample_normal(36.0, 1.0, &mut rng);
            sum += x;
            sum_sq += x * x;
            rounded_sum += round_to_dollars(x) as f64;
        }
        let mean = sum / n as f64;
        let sd = ((sum_sq - sum * sum / n as f64) / (n as f64 - 1.0)).sqrt();
        assert!((mean - 36.0).abs() < 0.02, "mean {mean}");
        assert!((sd - 1.0).abs() < 0.02, "sd {sd}");

        // Rounding-corrected oracle: E[round(X)] = sum over k of
        // k * (Phi(k + 0.5) - Phi(k - 0.5)); by symmetry this is exactly the
        // mean here, computed independently in the statrs-backed test below.
        assert!((rounded_sum / n as f64 - rounded_mean_oracle(36.0, 1.0)).abs() < 0.05);
    }

    /// Independent expectation of the rounded draw, via the statrs normal CDF.
    fn rounded_mean_oracle(mean: f64, sd: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let normal = Normal::new(mean, sd).unwrap();
        let lo = (mean - 9.0 * sd).floor() as i64;
        let hi = (mean + 9.0 * sd).ceil() as i64;
        (lo..=hi)
            .map(|k| k as f64 * (normal.cdf(k as f64 + 0.5) - normal.cdf(k as f64 - 0.5)))
            .sum()
    }

    #[test]
    fn empirical_means_track_table_means() {
        let spec = build_task_spec();
        for option in &spec.options {
            let mut rng = substream(8, option.option_index as u32, stream::OUTCOMES);
            let n = 100_000;
            let sum: f64 = (0..n)
                .map(|_| sample_outcome(option, &mut rng) as f64)
                .sum();
            let mean = sum / n as f64;
            // Rounded draws have sd sqrt(1 + 1/12); three standard errors.
            let se = (1.0 + 1.0 / 12.0_f64).sqrt() / (n as f64).sqrt();
            assert!(
                (mean - option.mean_payoff).abs() < 3.0 * se,
                "option {} mean {mean}",
                option.label()
            );
        }
    }
}
