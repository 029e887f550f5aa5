//! Prompt rendering for every experimental condition.
//!
//! The learning and transfer phases share one template: a fixed game preamble,
//! the outcome history so far, and a closing block naming the two offered slot
//! machines. Conditions change the history wording (`Regret`,
//! `BrokenContexts`) or append rating instructions to the closing block
//! (`Feelings`, `ExpectedOutcomes`); they never change the task itself.
//!
//! The complete `Feelings` and `ExpectedOutcomes` sentences are a
//! reconstruction around the published fragments; their exact wording is
//! frozen by golden-file tests.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::PromptError;
use crate::task::{Letter, OutcomeRecord};

/// Experimental condition. Affects prompt text only, never task structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Baseline,
    Feelings,
    ExpectedOutcomes,
    Regret,
    BrokenContexts,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Baseline,
        Condition::Feelings,
        Condition::ExpectedOutcomes,
        Condition::Regret,
        Condition::BrokenContexts,
    ];

    /// Whether responses in this condition are expected to carry per-option
    /// ratings alongside the choice.
    pub fn collects_ratings(self) -> bool {
        matches!(self, Condition::Feelings | Condition::ExpectedOutcomes)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Condition::Baseline => "baseline",
            Condition::Feelings => "feelings",
            Condition::ExpectedOutcomes => "expected-outcomes",
            Condition::Regret => "regret",
            Condition::BrokenContexts => "broken-contexts",
        };
        f.write_str(name)
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "baseline" => Ok(Condition::Baseline),
            "feelings" => Ok(Condition::Feelings),
            "expected-outcomes" => Ok(Condition::ExpectedOutcomes),
            "regret" => Ok(Condition::Regret),
            "broken-contexts" => Ok(Condition::BrokenContexts),
            other => Err(format!(
                "unknown condition '{other}' (expected baseline, feelings, \
                 expected-outcomes, regret, or broken-contexts)"
            )),
        }
    }
}

/// Message role on the chat wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
}

const SYSTEM_PROMPT: &str = "You are a helpful assistant";

const PREAMBLE: &str = "You are playing a game with the goal of winning as much money as \
possible over the course of several rounds. In each round, you will be asked which of two \
slot machines you wish to play. Some slot machines win more money than others on average. \
Your total payoff will be the cumulative sum of the money you win across all rounds of the \
game. Remember that your goal is to maximize your total payoff.";

const HISTORY_HEADER: &str = "You made the following observations in the past:";

/// The neutral system prompt used for every session.
pub fn render_system_prompt() -> &'static str {
    SYSTEM_PROMPT
}

/// Renders the outcome-history block (the bulleted lines only, no header).
/// Returns an empty string for an empty record list (the first learning
/// trial).
pub fn render_history(records: &[OutcomeRecord], condition: Condition) -> String {
    let mut lines = Vec::new();
    for record in records {
        let (a, b) = (&record.entries[0], &record.entries[1]);
        match condition {
            Condition::Baseline | Condition::Feelings | Condition::ExpectedOutcomes => {
                lines.push(format!(
                    "- In Round {}, slot machine {} delivered {} dollars and slot machine {} \
                     delivered {} dollars.",
                    record.round_number, a.letter, a.dollars, b.letter, b.dollars
                ));
            }
            Condition::Regret => {
                // Equal outcomes render as "0 dollars more".
                let word = if a.dollars >= b.dollars { "more" } else { "less" };
                lines.push(format!(
                    "- In Round {}, slot machine {} delivered {} dollars, which is {} dollars \
                     {} than slot machine {} delivered ({} dollars).",
                    record.round_number,
                    a.letter,
                    a.dollars,
                    (a.dollars - b.dollars).abs(),
                    word,
                    b.letter,
                    b.dollars
                ));
            }
            Condition::BrokenContexts => {
                lines.push(format!("- slot machine {} delivered {} dollars.", a.letter, a.dollars));
                lines.push(format!("- slot machine {} delivered {} dollars.", b.letter, b.dollars));
            }
        }
    }
    lines.join("\n")
}

fn closing_block(first: Letter, second: Letter, condition: Condition) -> String {
    let mut block = format!(
        "You now face a choice between slot machine {first} and slot machine {second}. \
         Your goal is to maximize your total payoff over the course of several rounds. "
    );
    match condition {
        Condition::Baseline | Condition::Regret | Condition::BrokenContexts => {
            block.push_str(
                "Which slot machine do you choose? Give your answer without explaining \
                 your reasoning.",
            );
        }
        Condition::Feelings => {
            block.push_str(&format!(
                "Before making your choice, think about how positive or negative you currently \
                 feel about slot machine {first} and slot machine {second}. Then rate your \
                 feelings for both slot machines using an integer from 1 to 7, where 1 = \
                 Extremely negative and 7 = Extremely positive. Report a rating for each slot \
                 machine. Which slot machine do you choose?"
            ));
        }
        Condition::ExpectedOutcomes => {
            block.push_str(&format!(
                "Before making your choice, think about how much money you would expect to win \
                 from slot machine {first} and slot machine {second}. Then estimate the amount \
                 of money (in dollars) you would expect to win if you chose each slot machine. \
                 Report an estimate for each slot machine. Which slot machine do you choose?"
            ));
        }
    }
    block
}

/// Renders the full two-message prompt for one choice trial.
///
/// `history_text` is the output of [`render_history`] for the rounds seen so
/// far; an empty string drops the history block entirely.
pub fn render_choice_prompt(
    first: Letter,
    second: Letter,
    condition: Condition,
    history_text: &str,
) -> Result<Vec<ChatMessage>, PromptError> {
    if first == second {
        return Err(PromptError::DuplicateLetter {
            letter: first.as_char(),
        });
    }
    let closing = closing_block(first, second, condition);
    let user = if history_text.is_empty() {
        format!("{PREAMBLE}\n\n{closing}")
    } else {
        format!("{PREAMBLE}\n\n{HISTORY_HEADER}\n\n{history_text}\n\n{closing}")
    };
    Ok(vec![
        ChatMessage::system(SYSTEM_PROMPT),
        ChatMessage::user(user),
    ])
}
