//! The parser must score 100% on the hand-labeled response corpus. The
//! fixtures were labeled before the parser was written and pin its behavior;
//! any rule change that shifts a label is a breaking change to exclusion
//! decisions.

use relband_core::parse::{parse_choice, parse_ratings, AmbiguityReason, ParsedChoice};
use relband_core::prompt::Condition;
use relband_core::task::Letter;
use serde::Deserialize;

#[derive(Deserialize)]
struct ChoiceCase {
    response: String,
    offered: String,
    expect: String,
}

fn offered_pair(s: &str) -> (Letter, Letter) {
    let mut chars = s.chars();
    (
        Letter::new(chars.next().unwrap()).unwrap(),
        Letter::new(chars.next().unwrap()).unwrap(),
    )
}

#[test]
fn choice_corpus_parses_at_100_percent() {
    let raw = include_str!("fixtures/choice_corpus.jsonl");
    let mut failures = Vec::new();
    let mut total = 0;
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        total += 1;
        let case: ChoiceCase = serde_json::from_str(line).unwrap();
        let got = parse_choice(&case.response, offered_pair(&case.offered));
        let expected = match case.expect.as_str() {
            "ambiguous:refusal" => ParsedChoice::Ambiguous {
                reason: AmbiguityReason::Refusal,
            },
            "ambiguous:none_mentioned" => ParsedChoice::Ambiguous {
                reason: AmbiguityReason::NoneMentioned,
            },
            "ambiguous:both_mentioned" => ParsedChoice::Ambiguous {
                reason: AmbiguityReason::BothMentioned,
            },
            letter => ParsedChoice::Chosen {
                letter: Letter::new(letter.chars().next().unwrap()).unwrap(),
            },
        };
        if got != expected {
            failures.push(format!(
                "{:?} offered {} -> {:?}, want {:?}",
                case.response, case.offered, got, expected
            ));
        }
    }
    assert!(total >= 40, "corpus shrank to {total} cases");
    assert!(
        failures.is_empty(),
        "{}/{} corpus failures:\n{}",
        failures.len(),
        total,
        failures.join("\n")
    );
}

#[derive(Deserialize)]
struct RatingsCase {
    response: String,
    offered: String,
    condition: String,
    expect: Option<std::collections::HashMap<String, f64>>,
}

#[test]
fn ratings_corpus_parses_at_100_percent() {
    let raw = include_str!("fixtures/ratings_corpus.jsonl");
    let mut failures = Vec::new();
    let mut total = 0;
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        total += 1;
        let case: RatingsCase = serde_json::from_str(line).unwrap();
        let condition = match case.condition.as_str() {
            "feelings" => Condition::Feelings,
            "expected_outcomes" => Condition::ExpectedOutcomes,
            other => panic!("bad condition {other}"),
        };
        let offered = offered_pair(&case.offered);
        let got = parse_ratings(&case.response, offered, condition);
        let ok = match (&got, &case.expect) {
            (None, None) => true,
            (Some(ratings), Some(expected)) => {
                expected.len() == 2
                    && expected.iter().all(|(letter, value)| {
                        ratings.value_for(Letter::new(letter.chars().next().unwrap()).unwrap())
                            == Some(*value)
                    })
            }
            _ => false,
        };
        if !ok {
            failures.push(format!(
                "{:?} offered {} -> {:?}, want {:?}",
                case.response, case.offered, got, case.expect
            ));
        }
    }
    assert!(total >= 20, "corpus shrank to {total} cases");
    assert!(
        failures.is_empty(),
        "{}/{} corpus failures:\n{}",
        failures.len(),
        total,
        failures.join("\n")
    );
}

/// Round-trip invariant: every synthetic "I choose slot machine X." reply
/// parses back to X for any offered pair that includes X.
#[test]
fn synthetic_choice_round_trip() {
    for first in Letter::ALL {
        for second in Letter::ALL {
            if first == second {
                continue;
            }
            let response = format!("I choose slot machine {first}.");
            let parsed = parse_choice(&response, (first, second));
            assert_eq!(parsed.chosen(), Some(first), "offered ({first},{second})");
        }
    }
}
