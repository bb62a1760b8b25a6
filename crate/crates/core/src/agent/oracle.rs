//! The comprehension oracle: an agent that answers meta-prompting questions
//! by reading the rendered prompt text itself, exactly as a remote model
//! would see it. Grading oracle answers against independently computed
//! ground truths closes the loop between prompt rendering and arithmetic.

use std::collections::HashMap;

use serde_json::json;

use crate::agent::prompt::PromptBundle;
use crate::error::{Error, Result};
use crate::game::Action;

#[derive(Debug, Default)]
struct PromptFacts {
    /// (player, own action, opponent action) -> player's payoff
    payoffs: HashMap<(char, Action, Action), i64>,
    actions: Vec<String>,
    /// round -> (action A, action B, points A, points B)
    rounds: HashMap<u32, (Action, Action, i64, i64)>,
    /// (player, action) -> count from the "In total, ... chose" line
    chose_counts: HashMap<(char, Action), i64>,
    total_points: HashMap<char, i64>,
    current_round: Option<u32>,
}

fn quoted_segments(line: &str) -> Vec<(String, String)> {
    // pairs of (quoted text, the text following the closing quote)
    let parts: Vec<&str> = line.split('"').collect();
    let mut out = Vec::new();
    let mut i = 1;
    while i < parts.len() {
        out.push((
            parts[i].to_string(),
            parts.get(i + 1).copied().unwrap_or("").to_string(),
        ));
        i += 2;
    }
    out
}

fn integers_in(text: &str) -> Vec<i64> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit()
            || (bytes[i] == b'-' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit()))
        {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if let Ok(v) = text[start..i].parse() {
                out.push(v);
            }
        } else {
            i += 1;
        }
    }
    out
}

fn parse_facts(system_text: &str, contextual_text: &str) -> PromptFacts {
    let mut facts = PromptFacts::default();

    for line in system_text.lines() {
        let line = line.trim();
        if line.starts_with("If A plays ") {
            let quoted = quoted_segments(line);
            if quoted.len() == 2 {
                let a = Action::from_word(&quoted[0].0);
                let b = Action::from_word(&quoted[1].0);
                let nums = integers_in(&quoted[1].1);
                if let (Some(a), Some(b), [pa, pb, ..]) = (a, b, nums.as_slice()) {
                    facts.payoffs.insert(('A', a, b), *pa);
                    facts.payoffs.insert(('B', b, a), *pb);
                }
            }
        } else if line.starts_with("At each turn") {
            facts.actions = quoted_segments(line).into_iter().map(|(q, _)| q).collect();
        }
    }

    for line in contextual_text.lines() {
        let line = line.trim();
        if line.starts_with("Round ") {
            let round = integers_in(line.split(':').next().unwrap_or("")).first().copied();
            let quoted = quoted_segments(line);
            if let (Some(round), [a_seg, b_seg]) = (round, quoted.as_slice()) {
                let a = Action::from_word(&a_seg.0);
                let b = Action::from_word(&b_seg.0);
                let nums = integers_in(&b_seg.1);
                if let (Some(a), Some(b), [pa, pb, ..]) = (a, b, nums.as_slice()) {
                    facts.rounds.insert(round as u32, (a, b, *pa, *pb));
                }
            }
        } else if line.starts_with("In total,") && line.contains("chose") {
            // split the sentence into a per-player half at ", B chose"
            if let Some((a_half, b_half)) = line.split_once(", B chose") {
                for (half, player) in [(a_half, 'A'), (b_half, 'B')] {
                    for (word, tail) in quoted_segments(half) {
                        if let (Some(action), [n, ..]) =
                            (Action::from_word(&word), integers_in(&tail).as_slice())
                        {
                            facts.chose_counts.insert((player, action), *n);
                        }
                    }
                }
            }
        } else if line.starts_with("In total,") && line.contains("collected") {
            let nums = integers_in(line);
            if let [pa, pb] = nums.as_slice() {
                facts.total_points.insert('A', *pa);
                facts.total_points.insert('B', *pb);
            }
        } else if let Some(rest) = line.strip_prefix("Current round: ") {
            facts.current_round = integers_in(rest).first().map(|&v| v as u32);
        }
    }

    facts
}

/// The question block of a comprehension instructing prompt is its second
/// blank-line-separated paragraph.
fn question_of(instructing_text: &str) -> Option<&str> {
    instructing_text.split("\n\n").nth(1).map(str::trim)
}

fn player_after(question: &str, marker: &str) -> Option<char> {
    question
        .split_once(marker)
        .and_then(|(_, rest)| rest.trim_start().chars().next())
        .filter(|c| *c == 'A' || *c == 'B')
}

fn reply(value: serde_json::Value) -> String {
    json!({ "answer": value }).to_string()
}

/// Answer a comprehension question from the rendered prompt alone.
/// Questions whose data is missing from the prompt get `{"answer": null}`,
/// which grades as incorrect.
pub fn answer(bundle: &PromptBundle) -> Result<String> {
    let question = question_of(&bundle.instructing_text)
        .ok_or_else(|| Error::ParseFailure("no question paragraph".into()))?;
    let facts = parse_facts(&bundle.system_text, &bundle.contextual_text);

    if question.starts_with("What is the lowest payoff player ")
        || question.starts_with("What is the highest payoff player ")
    {
        let player = player_after(question, "payoff player").unwrap_or('A');
        let values = facts
            .payoffs
            .iter()
            .filter(|((p, _, _), _)| *p == player)
            .map(|(_, v)| *v);
        let value = if question.contains("lowest") {
            values.min()
        } else {
            values.max()
        };
        return Ok(reply(value.map(|v| json!(v)).unwrap_or(json!(null))));
    }

    if question.starts_with("Which actions is player ") {
        return Ok(reply(json!(facts.actions)));
    }

    if question.starts_with("Which is player ") && question.contains("payoff in a single round") {
        let player = player_after(question, "Which is player").unwrap_or('A');
        let quoted = quoted_segments(question);
        if let [p, q] = quoted.as_slice() {
            if let (Some(p), Some(q)) = (Action::from_word(&p.0), Action::from_word(&q.0)) {
                let v = facts.payoffs.get(&(player, p, q));
                return Ok(reply(v.map(|v| json!(v)).unwrap_or(json!(null))));
            }
        }
        return Ok(reply(json!(null)));
    }

    if question.starts_with("Which is the current round") {
        return Ok(reply(
            facts.current_round.map(|r| json!(r)).unwrap_or(json!(null)),
        ));
    }

    if question.starts_with("Which action did player ") {
        let player = player_after(question, "did player").unwrap_or('A');
        let round = integers_in(question).last().map(|&v| v as u32);
        let v = round
            .and_then(|r| facts.rounds.get(&r))
            .map(|(a, b, _, _)| if player == 'A' { *a } else { *b });
        return Ok(reply(v.map(|a| json!(a.as_str())).unwrap_or(json!(null))));
    }

    if question.starts_with("How many points did player ") {
        let player = player_after(question, "did player").unwrap_or('A');
        let round = integers_in(question).last().map(|&v| v as u32);
        let v = round
            .and_then(|r| facts.rounds.get(&r))
            .map(|(_, _, pa, pb)| if player == 'A' { *pa } else { *pb });
        return Ok(reply(v.map(|p| json!(p)).unwrap_or(json!(null))));
    }

    if question.starts_with("How many times did player ") {
        let player = player_after(question, "did player").unwrap_or('A');
        let action = quoted_segments(question)
            .first()
            .and_then(|(q, _)| Action::from_word(q));
        let v = action.and_then(|a| facts.chose_counts.get(&(player, a)));
        return Ok(reply(v.map(|n| json!(n)).unwrap_or(json!(null))));
    }

    if question.starts_with("What is player ") && question.contains("current total payoff") {
        let player = player_after(question, "What is player").unwrap_or('A');
        let v = facts.total_points.get(&player);
        return Ok(reply(v.map(|n| json!(n)).unwrap_or(json!(null))));
    }

    Err(Error::ParseFailure(format!(
        "unrecognized question: {question}"
    )))
}
