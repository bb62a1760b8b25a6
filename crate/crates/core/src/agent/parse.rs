//! Extraction of structured replies from free-form model output.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::game::Action;

/// Scan the text for the first well-formed JSON object containing `key`.
/// Objects are located by attempting a parse at every `{`; nested objects
/// are reached when their parent fails the key check.
pub fn extract_object_with_key(text: &str, key: &str) -> Option<serde_json::Map<String, Value>> {
    for (idx, ch) in text.char_indices() {
        if ch != '{' {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&text[idx..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            if map.contains_key(key) {
                return Some(map);
            }
        }
    }
    None
}

/// Parse an action reply: the first object with an "action" key whose value
/// matches "cooperate"/"defect" case-insensitively. Returns the action and
/// the "reason" text (empty when absent).
pub fn parse_action(text: &str) -> Result<(Action, String)> {
    let snippet = || text.chars().take(120).collect::<String>();
    let map = extract_object_with_key(text, "action")
        .ok_or_else(|| Error::ParseFailure(snippet()))?;
    let action = map
        .get("action")
        .and_then(Value::as_str)
        .and_then(Action::from_word)
        .ok_or_else(|| Error::ParseFailure(snippet()))?;
    let reason = map
        .get("reason")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    Ok((action, reason))
}

/// Parse a comprehension reply: the value under the "answer" key of the
/// first object carrying one.
pub fn parse_answer(text: &str) -> Result<Value> {
    let mut map = extract_object_with_key(text, "answer")
        .ok_or_else(|| Error::ParseFailure(text.chars().take(120).collect()))?;
    Ok(map.remove("answer").expect("key checked"))
}

/// First signed integer token in a free-form answer value.
pub fn first_integer(value: &Value) -> Option<i64> {
    match value {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(i)
            } else {
                n.as_f64().map(|f| f.trunc() as i64)
            }
        }
        Value::String(s) => first_integer_in_str(s),
        Value::Array(items) => items.iter().find_map(first_integer),
        _ => None,
    }
}

fn first_integer_in_str(s: &str) -> Option<i64> {
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() || (bytes[i] == b'-' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            return s[start..i].parse().ok();
        }
        i += 1;
    }
    None
}
