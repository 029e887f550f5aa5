//! Deterministic, rule-based parsing of agent responses into structured
//! choices and ratings.
//!
//! The policy is corpus-driven: a hand-labeled fixture set pins the exact
//! behavior, and the parser must score 100% on it. No model-based parsing is
//! involved, so exclusion decisions are reproducible.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::prompt::Condition;
use crate::task::Letter;

/// Outcome of scanning a response for a choice between two offered letters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParsedChoice {
    Chosen { letter: Letter },
    Ambiguous { reason: AmbiguityReason },
}

impl ParsedChoice {
    pub fn chosen(&self) -> Option<Letter> {
        match self {
            ParsedChoice::Chosen { letter } => Some(*letter),
            ParsedChoice::Ambiguous { .. } => None,
        }
    }

    pub fn is_ambiguous(&self) -> bool {
        matches!(self, ParsedChoice::Ambiguous { .. })
    }
}

/// Why no single offered option could be extracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbiguityReason {
    /// The response declined to pick (refusal wording).
    Refusal,
    /// Neither offered letter appears in the response.
    NoneMentioned,
    /// Both offered letters appear without a decisive statement.
    BothMentioned,
}

impl fmt::Display for AmbiguityReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AmbiguityReason::Refusal => "refusal",
            AmbiguityReason::NoneMentioned => "none_mentioned",
            AmbiguityReason::BothMentioned => "both_mentioned",
        };
        f.write_str(s)
    }
}

/// Per-option numeric ratings extracted from a `Feelings` or
/// `ExpectedOutcomes` response, in `(first, second)` presentation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedRatings {
    pub first: (Letter, f64),
    pub second: (Letter, f64),
}

impl ParsedRatings {
    pub fn value_for(&self, letter: Letter) -> Option<f64> {
        if self.first.0 == letter {
            Some(self.first.1)
        } else if self.second.0 == letter {
            Some(self.second.1)
        } else {
            None
        }
    }
}

macro_rules! cached_regex {
    ($name:ident, $pattern:expr) => {
        fn $name() -> &'static regex::Regex {
            static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
            RE.get_or_init(|| regex::Regex::new($pattern).unwrap())
        }
    };
}

// "slot machine E" / "machine E", any case.
cached_regex!(phrase_mention, r"(?i)\b(?:slot\s+)?machine\s+([A-Ha-h])\b");
// A lone capital letter; lowercase bare letters are skipped because of the
// article "a".
cached_regex!(bare_mention, r"\b([A-H])\b");
// Declarative verb phrases that commit to a choice.
cached_regex!(
    decisive,
    r"(?i)\bi\s+(?:would\s+|will\s+|shall\s+|am\s+)?(?:choose|chose|pick|select|play|go(?:ing)?\s+with|opt(?:ing)?\s+for)\b|\bi['\u{2019}](?:ll|d)\s+(?:choose|pick|select|play|go\s+with)\b|\bmy\s+(?:final\s+)?(?:choice|pick|selection|answer)\s*(?:is|would\s+be|:)|\b(?:final\s+)?answer\s*[:\-]|\bchoice\s*:"
);
cached_regex!(
    refusal,
    r"(?i)\b(?:cannot|can['\u{2019}]?t|won['\u{2019}]?t|will\s+not|unable\s+to|refuse|neither|don['\u{2019}]?t\s+know|no\s+preference|not\s+enough\s+information)\b"
);
cached_regex!(number, r"-?\$?\d+(?:\.\d+)?");
// Connectors allowed between a letter mention and a following number.
cached_regex!(
    after_gap,
    r"(?i)^[\s:=\-\u{2013}\u{2014}]*(?:(?:is|was|get|gets|rate|rated|rating|score|scores|scored|at|a|an|about|around|roughly|approximately)[\s:=\-\u{2013}\u{2014}]+)*$"
);
// Connectors between a number and a following letter mention. A connector
// word is mandatory: bare whitespace (e.g. a line break onto the next
// "slot machine X:" row) is not a link.
cached_regex!(
    before_gap,
    r"(?i)^[\s,]*(?:(?:dollars?|bucks|points?)[\s,]*)?(?:from|for|with|on|to)\s*(?:(?:slot\s+)?machine)?\s*$"
);

#[derive(Debug, Clone, Copy)]
struct Mention {
    letter: Letter,
    /// Byte range of the full matched phrase (or the bare letter).
    start: usize,
    end: usize,
}

/// All mentions of the offered letters, in text order, deduplicated by the
/// letter's position.
fn find_mentions(response: &str, offered: (Letter, Letter)) -> Vec<Mention> {
    let mut mentions: Vec<Mention> = Vec::new();
    let mut seen_letter_pos = std::collections::HashSet::new();
    for caps in phrase_mention().captures_iter(response) {
        let full = caps.get(0).unwrap();
        let letter_match = caps.get(1).unwrap();
        if let Some(letter) = Letter::new(letter_match.as_str().chars().next().unwrap()) {
            if letter == offered.0 || letter == offered.1 {
                seen_letter_pos.insert(letter_match.start());
                mentions.push(Mention {
                    letter,
                    start: full.start(),
                    end: full.end(),
                });
            }
        }
    }
    for caps in bare_mention().captures_iter(response) {
        let m = caps.get(1).unwrap();
        if seen_letter_pos.contains(&m.start()) {
            continue;
        }
        if let Some(letter) = Letter::new(m.as_str().chars().next().unwrap()) {
            if letter == offered.0 || letter == offered.1 {
                mentions.push(Mention {
                    letter,
                    start: m.start(),
                    end: m.end(),
                });
            }
        }
    }
    mentions.sort_by_key(|m| m.start);
    mentions
}

/// Window after a decisive verb inside which its target mention must start.
const DECLARATION_WINDOW: usize = 48;

/// Extracts the chosen letter from a response, or classifies the ambiguity.
///
/// Scan policy: mentions of the two offered letters are collected as
/// "slot machine X" / "machine X" phrases (any case) plus lone capital
/// letters. A decisive verb claims the first mention that follows it within
/// the same sentence; the last such declaration wins. Without declarations,
/// a single mentioned letter is the choice; anything else is ambiguous. A
/// response that is just one letter token counts as that letter.
pub fn parse_choice(response: &str, offered: (Letter, Letter)) -> ParsedChoice {
    let mentions = find_mentions(response, offered);

    // Bare-letter fallback: the whole response is one token.
    let stripped: &str = response.trim().trim_matches(|c: char| !c.is_ascii_alphanumeric());
    if stripped.len() == 1 {
        if let Some(letter) = Letter::new(stripped.chars().next().unwrap()) {
            if letter == offered.0 || letter == offered.1 {
                return ParsedChoice::Chosen { letter };
            }
        }
    }

    let mut declared: Option<Letter> = None;
    for verb in decisive().find_iter(response) {
        let target = mentions.iter().find(|m| {
            m.start >= verb.end()
                && m.start - verb.end() <= DECLARATION_WINDOW
                && !response[verb.end()..m.start]
                    .contains(['.', '!', '?', ';', '\n'])
        });
        if let Some(mention) = target {
            declared = Some(mention.letter);
        }
    }
    if let Some(letter) = declared {
        return ParsedChoice::Chosen { letter };
    }

    let mut distinct: Vec<Letter> = Vec::new();
    for m in &mentions {
        if !distinct.contains(&m.letter) {
            distinct.push(m.letter);
        }
    }
    let refused = refusal().is_match(response);
    match distinct.len() {
        1 if !refused => ParsedChoice::Chosen { letter: distinct[0] },
        0 => ParsedChoice::Ambiguous {
            reason: if refused {
                AmbiguityReason::Refusal
            } else {
                AmbiguityReason::NoneMentioned
            },
        },
        _ => ParsedChoice::Ambiguous {
            reason: if refused {
                AmbiguityReason::Refusal
            } else {
                AmbiguityReason::BothMentioned
            },
        },
    }
}

#[derive(Debug, Clone, Copy)]
struct NumberToken {
    value: f64,
    start: usize,
    end: usize,
}

fn find_numbers(response: &str) -> Vec<NumberToken> {
    number()
        .find_iter(response)
        .filter_map(|m| {
            let raw = m.as_str().replace('$', "");
            raw.parse::<f64>().ok().map(|value| NumberToken {
                value,
                start: m.start(),
                end: m.end(),
            })
        })
        .collect()
}

/// Association cost between a letter mention and a number token; strongly
/// linked pairs (connector text between them) sort far below plain
/// proximity.
fn pair_score(response: &str, mention: &Mention, num: &NumberToken) -> Option<i64> {
    const STRONG: i64 = -10_000;
    if num.start >= mention.end {
        let gap = &response[mention.end..num.start];
        if gap.len() > 64 {
            return None;
        }
        let dist = (num.start - mention.end) as i64;
        Some(if after_gap().is_match(gap) { dist + STRONG } else { dist })
    } else if num.end <= mention.start {
        let gap = &response[num.end..mention.start];
        if gap.len() > 64 {
            return None;
        }
        let dist = (mention.start - num.end) as i64;
        // Plain numbers-before-mentions are weaker evidence.
        Some(if before_gap().is_match(gap) { dist + STRONG } else { dist + 8 })
    } else {
        None
    }
}

/// Extracts one numeric rating per offered letter by proximity of numbers to
/// letter mentions. Returns `None` (ratings absent; the trial gets flagged)
/// when either letter lacks a usable value, or when a `Feelings` value is
/// not an integer in 1..=7.
pub fn parse_ratings(
    response: &str,
    offered: (Letter, Letter),
    condition: Condition,
) -> Option<ParsedRatings> {
    debug_assert!(condition.collects_ratings());
    let mentions = find_mentions(response, offered);
    let numbers = find_numbers(response);
    if mentions.is_empty() || numbers.is_empty() {
        return None;
    }

    // Globally greedy assignment of numbers to the two letters: best score
    // first, each number token used at most once.
    let mut candidates: Vec<(i64, Letter, usize)> = Vec::new();
    for mention in &mentions {
        for (num_idx, num) in numbers.iter().enumerate() {
            if let Some(score) = pair_score(response, mention, num) {
                candidates.push((score, mention.letter, num_idx));
            }
        }
    }
    candidates.sort_by_key(|&(score, letter, num_idx)| (score, num_idx, letter.as_char()));

    let mut value_of = std::collections::HashMap::new();
    let mut used_numbers = std::collections::HashSet::new();
    for (_, letter, num_idx) in candidates {
        if value_of.contains_key(&letter) || used_numbers.contains(&num_idx) {
            continue;
        }
        value_of.insert(letter, numbers[num_idx].value);
        used_numbers.insert(num_idx);
    }

    let first = *value_of.get(&offered.0)?;
    let second = *value_of.get(&offered.1)?;

    if condition == Condition::Feelings {
        let valid = |v: f64| v.fract() == 0.0 && (1.0..=7.0).contains(&v);
        if !valid(first) || !valid(second) {
            return None;
        }
    }

    Some(ParsedRatings {
        first: (offered.0, first),
        second: (offered.1, second),
    })
}
