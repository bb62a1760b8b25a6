//! Line-delimited JSON trace files: one game per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameTrace, RoundRecord};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// The exact on-disk shape of one line.
#[derive(Serialize, Deserialize)]
struct TraceLine {
    schema_version: u32,
    agent_labels: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    seed: u64,
    n_rounds: u32,
    rounds: Vec<RoundRecord>,
    failed: bool,
}

impl From<&GameTrace> for TraceLine {
    fn from(t: &GameTrace) -> Self {
        TraceLine {
            schema_version: TRACE_SCHEMA_VERSION,
            agent_labels: t.agent_labels.clone(),
            alpha: t.alpha,
            seed: t.seed,
            n_rounds: t.n_rounds,
            rounds: t.rounds.clone(),
            failed: t.failed,
        }
    }
}

impl From<TraceLine> for GameTrace {
    fn from(l: TraceLine) -> Self {
        GameTrace {
            agent_labels: l.agent_labels,
            alpha: l.alpha,
            seed: l.seed,
            n_rounds: l.n_rounds,
            rounds: l.rounds,
            failed: l.failed,
        }
    }
}

/// One trace as a single JSONL line (no trailing newline).
pub fn trace_to_jsonl(trace: &GameTrace) -> Result<String> {
    Ok(serde_json::to_string(&TraceLine::from(trace))?)
}

/// Parse one line, checking the schema version and the round invariants:
/// contiguous 1-based indices, and a full round count unless `failed`.
pub fn parse_trace_line(line: &str) -> Result<GameTrace> {
    let value: serde_json::Value = serde_json::from_str(line)?;
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Config("trace line lacks schema_version".into()))? as u32;
    if found != TRACE_SCHEMA_VERSION {
        return Err(Error::SchemaVersion { found, expected: TRACE_SCHEMA_VERSION });
    }
    let line: TraceLine = serde_json::from_value(value)?;
    let trace: GameTrace = line.into();
    for (i, round) in trace.rounds.iter().enumerate() {
        if round.round_index != i as u32 + 1 {
            return Err(Error::Config(format!(
                "round indices not contiguous: found {} at position {}",
                round.round_index,
                i + 1
            )));
        }
    }
    if !trace.failed && trace.rounds.len() as u32 != trace.n_rounds {
        return Err(Error::Config(format!(
            "completed trace has {} rounds, n_rounds says {}",
            trace.rounds.len(),
            trace.n_rounds
        )));
    }
    Ok(trace)
}

/// Write all traces, one per line, through a single writer.
pub fn write_traces(path: &Path, traces: &[GameTrace]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    for trace in traces {
        out.write_all(trace_to_jsonl(trace)?.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read a trace file; errors carry the 1-based line number.
pub fn read_traces(path: &Path) -> Result<Vec<GameTrace>> {
    let reader = BufReader::new(File::open(path)?);
    let mut traces = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trace = parse_trace_line(&line).map_err(|e| match e {
            Error::SchemaVersion { .. } => e,
            other => Error::JsonlLine { line: idx + 1, message: other.to_string() },
        })?;
        traces.push(trace);
    }
    Ok(traces)
}
