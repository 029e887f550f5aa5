//! Simulated decision agents embodying absolute, relative, and hybrid
//! valuation. They act as analytic oracles for the pipeline: the engine feeds
//! them the structured observation state rather than rendered text.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::task::{TaskSpec, NUM_OPTIONS};

/// Everything an agent has seen so far: per option, the dollar outcomes
/// observed during learning. Grows by exactly two entries per learning round
/// (complete feedback) and is frozen during transfer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationTable {
    observations: Vec<Vec<i64>>,
    context_of: Vec<usize>,
}

impl ObservationTable {
    pub fn new(spec: &TaskSpec) -> Self {
        ObservationTable {
            observations: vec![Vec::new(); spec.options.len()],
            context_of: spec.options.iter().map(|o| o.context_index).collect(),
        }
    }

    pub fn record(&mut self, option_index: usize, dollars: i64) {
        self.observations[option_index].push(dollars);
    }

    pub fn count(&self, option_index: usize) -> usize {
        self.observations[option_index].len()
    }

    pub fn context_of(&self, option_index: usize) -> usize {
        self.context_of[option_index]
    }

    /// Mean observed outcome, or `None` if the option was never observed.
    pub fn mean(&self, option_index: usize) -> Option<f64> {
        let obs = &self.observations[option_index];
        if obs.is_empty() {
            None
        } else {
            Some(obs.iter().sum::<i64>() as f64 / obs.len() as f64)
        }
    }
}

/// How observed outcomes map to option values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValuationKind {
    Absolute,
    Relative,
    /// Interpolates between the two poles: `w = 1` is absolute, `w = 0`
    /// relative.
    Hybrid { weight: f64 },
    Random,
}

/// How values map to a choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceRule {
    GreedyRandomTies,
    Softmax { temperature: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuationPolicy {
    pub kind: ValuationKind,
    pub choice_rule: ChoiceRule,
}

impl ValuationPolicy {
    pub fn greedy(kind: ValuationKind) -> Self {
        ValuationPolicy {
            kind,
            choice_rule: ChoiceRule::GreedyRandomTies,
        }
    }

    /// Short name used in transcript file names and reports.
    pub fn label(&self) -> String {
        let kind = match self.kind {
            ValuationKind::Absolute => "absolute".to_string(),
            ValuationKind::Relative => "relative".to_string(),
            ValuationKind::Hybrid { weight } => format!("hybrid-w{weight:.2}"),
            ValuationKind::Random => "random".to_string(),
        };
        match self.choice_rule {
            ChoiceRule::GreedyRandomTies => kind,
            ChoiceRule::Softmax { temperature } => format!("{kind}-softmax-t{temperature:.3}"),
        }
    }
}

/// Value of each option as its mean observed outcome.
pub fn absolute_values(obs: &ObservationTable) -> Vec<Option<f64>> {
    (0..NUM_OPTIONS).map(|i| obs.mean(i)).collect()
}

/// Value of each option normalized within its learning context:
/// `(m - m_min) / (m_max - m_min)` over the context's two mean outcomes.
/// A degenerate context (equal means) values both options at 0.5. An option
/// whose context partner is unobserved has no defined range and is
/// undefined.
pub fn relative_values(obs: &ObservationTable) -> Vec<Option<f64>> {
    let means: Vec<Option<f64>> = absolute_values(obs);
    (0..NUM_OPTIONS)
        .map(|i| {
            let partner = partner_in_context(i);
            match (means[i], means[partner]) {
                (Some(own), Some(other)) => {
                    let (lo, hi) = if own <= other { (own, other) } else { (other, own) };
                    if hi == lo {
                        Some(0.5)
                    } else {
                        Some((own - lo) / (hi - lo))
                    }
                }
                _ => None,
            }
        })
        .collect()
}

fn partner_in_context(option_index: usize) -> usize {
    option_index ^ 1
}

/// Weighted blend `w * A + (1 - w) * R`, where `A` is the absolute means
/// min-max normalized over all eight options and `R` is [`relative_values`].
/// With every normalization degenerate (all observed means equal), `A` is
/// 0.5 for observed options.
pub fn hybrid_values(obs: &ObservationTable, weight: f64) -> Vec<Option<f64>> {
    debug_assert!((0.0..=1.0).contains(&weight));
    let means = absolute_values(obs);
    let observed: Vec<f64> = means.iter().flatten().copied().collect();
    let relative = relative_values(obs);
    if observed.is_empty() {
        return vec![None; NUM_OPTIONS];
    }
    let lo = observed.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..NUM_OPTIONS)
        .map(|i| {
            let normalized = means[i].map(|m| if hi == lo { 0.5 } else { (m - lo) / (hi - lo) });
            match (normalized, relative[i]) {
                (Some(a), Some(r)) => Some(weight * a + (1.0 - weight) * r),
                _ => None,
            }
        })
        .collect()
}

/// Option values under a valuation kind; `Random` has no values.
pub fn policy_values(kind: ValuationKind, obs: &ObservationTable) -> Vec<Option<f64>> {
    match kind {
        ValuationKind::Absolute => absolute_values(obs),
        ValuationKind::Relative => relative_values(obs),
        ValuationKind::Hybrid { weight } => hybrid_values(obs, weight),
        ValuationKind::Random => vec![None; NUM_OPTIONS],
    }
}

/// The outcome of one simulated decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub option_index: usize,
    /// Set when a value was undefined and the choice fell back to uniform.
    pub undefined_value: bool,
}

/// Picks between `pair.0` and `pair.1` under the policy, drawing any
/// tie-breaking or sampling randomness from `rng`.
pub fn decide(
    policy: &ValuationPolicy,
    obs: &ObservationTable,
    pair: (usize, usize),
    rng: &mut impl Rng,
) -> Decision {
    let uniform = |rng: &mut dyn rand::RngCore, flagged: bool| Decision {
        option_index: if (rng.next_u64() & 1) == 0 { pair.0 } else { pair.1 },
        undefined_value: flagged,
    };

    if policy.kind == ValuationKind::Random {
        return uniform(rng, false);
    }
    let values = policy_values(policy.kind, obs);
    let (v_first, v_second) = match (values[pair.0], values[pair.1]) {
        (Some(a), Some(b)) => (a, b),
        _ => return uniform(rng, true),
    };

    let option_index = match policy.choice_rule {
        ChoiceRule::GreedyRandomTies => {
            if v_first > v_second {
                pair.0
            } else if v_second > v_first {
                pair.1
            } else {
                return uniform(rng, false);
            }
        }
        ChoiceRule::Softmax { temperature } => {
            debug_assert!(temperature > 0.0);
            // p(first) with the max shifted out for numerical stability.
            let p_first = 1.0 / (1.0 + ((v_second - v_first) / temperature).exp());
            if rng.gen::<f64>() < p_first {
                pair.0
            } else {
                pair.1
            }
        }
    };
    Decision {
        option_index,
        undefined_value: false,
    }
}

/// Closed-form expected transfer choice rates under noise-free greedy play:
/// absolute valuation yields the linear ramp `i/7`; relative valuation
/// yields the zig-zag with low options at 3/14 and high options at 11/14
/// (ties among equal-valued options credited 0.5).
pub fn theoretical_choice_rates(kind: ValuationKind) -> Vec<f64> {
    match kind {
        ValuationKind::Absolute => (0..NUM_OPTIONS).map(|i| i as f64 / 7.0).collect(),
        ValuationKind::Relative => (0..NUM_OPTIONS)
            .map(|i| if i % 2 == 0 { 3.0 / 14.0 } else { 11.0 / 14.0 })
            .collect(),
        other => panic!("no closed form for {other:?}"),
    }
}

/// Brute-force enumeration oracle: expected per-option transfer choice rates
/// for fixed option values, crediting 0.5 per exact tie, over all 28 pairs.
pub fn expected_transfer_rates(values: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), NUM_OPTIONS);
    let mut credit = vec![0.0; NUM_OPTIONS];
    for a in 0..NUM_OPTIONS {
        for b in (a + 1)..NUM_OPTIONS {
            if values[a] > values[b] {
                credit[a] += 1.0;
            } else if values[b] > values[a] {
                credit[b] += 1.0;
            } else {
                credit[a] += 0.5;
                credit[b] += 0.5;
            }
        }
    }
    credit.iter().map(|c| c / 7.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::contrast_of_rates;
    use crate::rng::{stream, substream};
    use crate::task::build_task_spec;

    /// Observation table after a noise-free learning phase: every option
    /// observed five times at exactly its mean.
    fn noise_free_obs() -> ObservationTable {
        let spec = build_task_spec();
        let mut obs = ObservationTable::new(&spec);
        for option in &spec.options {
            for _ in 0..5 {
                obs.record(option.option_index, option.mean_payoff as i64);
            }
        }
        obs
    }

    #[test]
    fn absolute_is_the_mean() {
        let spec = build_task_spec();
        let mut obs = ObservationTable::new(&spec);
        for _ in 0..5 {
            obs.record(1, 18);
        }
        obs.record(2, 20);
        obs.record(2, 22);
        let values = absolute_values(&obs);
        assert_eq!(values[1], Some(18.0));
        assert_eq!(values[2], Some(21.0));
        assert_eq!(values[0], None);
    }

    #[test]
    fn noise_free_absolute_matches_task_means() {
        let values = absolute_values(&noise_free_obs());
        let spec = build_task_spec();
        for option in &spec.options {
            assert_eq!(values[option.option_index], Some(option.mean_payoff));
        }
    }

    #[test]
    fn relative_spans_each_context() {
        let values = relative_values(&noise_free_obs());
        for i in 0..NUM_OPTIONS {
            let expected = if i % 2 == 0 { 0.0 } else { 1.0 };
            assert_eq!(values[i], Some(expected));
        }
    }

    #[test]
    fn relative_uses_observed_means_not_spec_means() {
        let spec = build_task_spec();
        let mut obs = ObservationTable::new(&spec);
        // Context 2 (options 4 and 5) with means 27.2 and 30.2.
        for d in [28, 27, 27, 27, 27] {
            obs.record(4, d);
        }
        for d in [31, 30, 30, 30, 30] {
            obs.record(5, d);
        }
        let values = relative_values(&obs);
        assert_eq!(values[4], Some(0.0));
        assert_eq!(values[5], Some(1.0));
        assert_eq!(values[0], None);
    }

    #[test]
    fn degenerate_context_is_half() {
        let spec = build_task_spec();
        let mut obs = ObservationTable::new(&spec);
        obs.record(6, 24);
        obs.record(7, 24);
        let values = relative_values(&obs);
        assert_eq!(values[6], Some(0.5));
        assert_eq!(values[7], Some(0.5));
    }

    #[test]
    fn hybrid_endpoints_match_the_poles() {
        let obs = noise_free_obs();
        let pure_absolute = hybrid_values(&obs, 1.0);
        for i in 0..NUM_OPTIONS {
            // w = 1 reproduces the absolute ordering, normalized to i/7.
            assert_eq!(pure_absolute[i], Some(i as f64 / 7.0));
        }
        assert_eq!(hybrid_values(&obs, 0.0), relative_values(&obs));
    }

    #[test]
    fn hybrid_half_prefers_h18_over_l21() {
        let obs = noise_free_obs();
        let values = hybrid_values(&obs, 0.5);
        let h18 = values[1].unwrap();
        let l21 = values[2].unwrap();
        assert!((h18 - (0.5 * (1.0 / 7.0) + 0.5)).abs() < 1e-12);
        assert!((l21 - 0.5 * (2.0 / 7.0)).abs() < 1e-12);
        assert!(h18 > l21);
        assert!((h18 - 0.571).abs() < 1e-3);
        assert!((l21 - 0.143).abs() < 1e-3);
    }

    #[test]
    fn greedy_picks_the_larger_value() {
        let obs = noise_free_obs();
        let policy = ValuationPolicy::greedy(ValuationKind::Absolute);
        let mut rng = substream(11, 0, stream::AGENT);
        let d = decide(&policy, &obs, (4, 1), &mut rng);
        assert_eq!(d.option_index, 4);
        assert!(!d.undefined_value);
    }

    #[test]
    fn greedy_ties_split_evenly() {
        let spec = build_task_spec();
        let mut obs = ObservationTable::new(&spec);
        obs.record(0, 20);
        obs.record(1, 20);
        let policy = ValuationPolicy::greedy(ValuationKind::Absolute);
        let mut rng = substream(12, 0, stream::AGENT);
        let n = 10_000;
        let firsts = (0..n)
            .filter(|_| decide(&policy, &obs, (0, 1), &mut rng).option_index == 0)
            .count();
        let freq = firsts as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "freq {freq}");
    }

    #[test]
    fn undefined_values_fall_back_to_uniform_and_flag() {
        let spec = build_task_spec();
        let obs = ObservationTable::new(&spec);
        let policy = ValuationPolicy::greedy(ValuationKind::Absolute);
        let mut rng = substream(13, 0, stream::AGENT);
        let d = decide(&policy, &obs, (0, 1), &mut rng);
        assert!(d.undefined_value);
    }

    #[test]
    fn softmax_approaches_greedy_as_temperature_vanishes() {
        let obs = noise_free_obs();
        let cold = ValuationPolicy {
            kind: ValuationKind::Absolute,
            choice_rule: ChoiceRule::Softmax {
                temperature: 1e-9,
            },
        };
        let mut rng = substream(14, 0, stream::AGENT);
        for _ in 0..1000 {
            assert_eq!(decide(&cold, &obs, (2, 5), &mut rng).option_index, 5);
        }
    }

    #[test]
    fn random_policy_is_uniform() {
        let spec = build_task_spec();
        let obs = ObservationTable::new(&spec);
        let policy = ValuationPolicy::greedy(ValuationKind::Random);
        let mut rng = substream(15, 0, stream::AGENT);
        let n = 10_000;
        let firsts = (0..n)
            .filter(|_| decide(&policy, &obs, (3, 6), &mut rng).option_index == 3)
            .count();
        let freq = firsts as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "freq {freq}");
    }

    #[test]
    fn theoretical_rates_match_brute_force_enumeration() {
        let obs = noise_free_obs();

        let absolute: Vec<f64> = absolute_values(&obs).into_iter().flatten().collect();
        assert_eq!(
            theoretical_choice_rates(ValuationKind::Absolute),
            expected_transfer_rates(&absolute)
        );

        let relative: Vec<f64> = relative_values(&obs).into_iter().flatten().collect();
        assert_eq!(
            theoretical_choice_rates(ValuationKind::Relative),
            expected_transfer_rates(&relative)
        );
    }

    #[test]
    fn theoretical_extremes_and_diagnostic_values() {
        let absolute = theoretical_choice_rates(ValuationKind::Absolute);
        assert_eq!(absolute[0], 0.0);
        assert_eq!(absolute[7], 1.0);

        let relative = theoretical_choice_rates(ValuationKind::Relative);
        assert!((relative[6] - 0.214).abs() < 1e-3); // L33
        assert!((relative[1] - 0.786).abs() < 1e-3); // H18
    }

    #[test]
    fn theoretical_contrasts_hit_the_poles_exactly() {
        let absolute = theoretical_choice_rates(ValuationKind::Absolute);
        let relative = theoretical_choice_rates(ValuationKind::Relative);
        assert_eq!(contrast_of_rates(&absolute), 1.0 / 7.0);
        assert_eq!(contrast_of_rates(&relative), -4.0 / 7.0);
    }

    #[test]
    fn absolute_rates_are_monotone_and_relative_zig_zags() {
        let obs = noise_free_obs();
        let absolute: Vec<f64> = absolute_values(&obs).into_iter().flatten().collect();
        let rates = expected_transfer_rates(&absolute);
        for w in rates.windows(2) {
            assert!(w[1] > w[0]);
        }

        let relative: Vec<f64> = relative_values(&obs).into_iter().flatten().collect();
        let rates = expected_transfer_rates(&relative);
        for high in [1, 3, 5, 7] {
            for low in [0, 2, 4, 6] {
                assert!(rates[high] > rates[low]);
            }
        }
    }

    #[test]
    fn hybrid_contrast_is_monotone_between_the_poles() {
        let obs = noise_free_obs();
        let mut previous = f64::INFINITY;
        for step in 0..=10 {
            let w = 1.0 - step as f64 / 10.0;
            let values: Vec<f64> = hybrid_values(&obs, w).into_iter().flatten().collect();
            let contrast = contrast_of_rates(&expected_transfer_rates(&values));
            assert!(
                contrast <= previous + 1e-12,
                "contrast rose from {previous} to {contrast} at w={w}"
            );
            previous = contrast;
        }
    }
}
