//! The agent abstraction: strategy-backed players, remote chat-completion
//! players, scripted replays, and the comprehension oracle.

pub mod client;
pub mod mock;
pub mod oracle;
pub mod parse;
pub mod prompt;

use std::sync::Arc;

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::game::{Action, SeatView};
use crate::strategy::{next_action, StrategyKind};

pub use client::{ChatClient, ChatMessage, RateLimiter, RemoteConfig};
pub use prompt::{
    build_contextual_prompt, build_instructing_prompt, build_question_prompt,
    build_system_prompt, ChatFormat, InstructingVariant, MemoryWindow, PromptBundle,
};

enum AgentInner {
    Strategy(StrategyKind),
    Remote(Arc<ChatClient>),
    Scripted { actions: Vec<Action>, next: usize },
    Oracle,
}

/// A player in an iterated game. `decide` consumes only the history visible
/// at decision time; strategy agents never touch the network.
pub struct Agent {
    label: String,
    inner: AgentInner,
}

impl Agent {
    pub fn strategy(kind: StrategyKind) -> Self {
        Agent { label: kind.id(), inner: AgentInner::Strategy(kind) }
    }

    /// A remote chat-completion player sharing `client` with other games.
    pub fn remote(client: Arc<ChatClient>) -> Self {
        Agent {
            label: client.config().label(),
            inner: AgentInner::Remote(client),
        }
    }

    /// Replays a fixed action list; runs out of moves -> agent failure.
    pub fn scripted(label: impl Into<String>, actions: Vec<Action>) -> Self {
        Agent { label: label.into(), inner: AgentInner::Scripted { actions, next: 0 } }
    }

    /// Plays random moves and answers comprehension questions by reading
    /// the rendered prompt.
    pub fn oracle() -> Self {
        Agent { label: "oracle".into(), inner: AgentInner::Oracle }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_remote(&self) -> bool {
        matches!(self.inner, AgentInner::Remote(_))
    }

    pub fn supports_questions(&self) -> bool {
        matches!(self.inner, AgentInner::Remote(_) | AgentInner::Oracle)
    }

    /// Prompt parameters for remote agents; comprehension runs must render
    /// question prompts exactly the way the agent sees its game prompts.
    pub fn prompt_params(&self) -> Option<(MemoryWindow, ChatFormat)> {
        match &self.inner {
            AgentInner::Remote(c) => {
                Some((c.config().memory_window, c.config().chat_format))
            }
            _ => None,
        }
    }

    /// Choose the next move given the game so far.
    pub fn decide(&mut self, view: &SeatView, rng: &mut ChaCha12Rng) -> Result<Action> {
        match &mut self.inner {
            AgentInner::Strategy(kind) => Ok(next_action(*kind, view, rng)),
            AgentInner::Scripted { actions, next } => {
                let action = actions.get(*next).copied().ok_or_else(|| Error::AgentFailure {
                    agent: self.label.clone(),
                    round: view.current_round(),
                    reason: format!("script exhausted after {} actions", actions.len()),
                })?;
                *next += 1;
                Ok(action)
            }
            AgentInner::Oracle => Ok(next_action(StrategyKind::Random, view, rng)),
            AgentInner::Remote(client) => {
                let cfg = client.config();
                let bundle = PromptBundle {
                    system_text: build_system_prompt(&view.matrix, view.n_rounds, cfg.chat_format),
                    contextual_text: build_contextual_prompt(
                        view.rounds,
                        cfg.memory_window,
                        view.current_round(),
                    ),
                    instructing_text: build_instructing_prompt(
                        cfg.instructing_variant,
                        cfg.chat_format,
                    ),
                };
                let messages = bundle_messages(&bundle);
                let mut last = String::new();
                for attempt in 0..cfg.max_retries {
                    match client.complete(&messages).and_then(|text| parse::parse_action(&text)) {
                        Ok((action, _reason)) => return Ok(action),
                        Err(e) => {
                            last = e.to_string();
                            if attempt + 1 < cfg.max_retries {
                                std::thread::sleep(client.backoff(attempt as usize));
                            }
                        }
                    }
                }
                Err(Error::AgentFailure {
                    agent: self.label.clone(),
                    round: view.current_round(),
                    reason: format!("retries exhausted ({}): {last}", cfg.max_retries),
                })
            }
        }
    }

    /// Answer a comprehension question; returns the raw reply text for
    /// grading. Transport errors are retried, malformed replies are not
    /// (grading records them).
    pub fn answer_question(&mut self, bundle: &PromptBundle) -> Result<String> {
        match &self.inner {
            AgentInner::Oracle => oracle::answer(bundle),
            AgentInner::Remote(client) => {
                let cfg = client.config();
                let messages = bundle_messages(bundle);
                let mut last = String::new();
                for attempt in 0..cfg.max_retries {
                    match client.complete(&messages) {
                        Ok(text) => return Ok(text),
                        Err(e) => {
                            last = e.to_string();
                            if attempt + 1 < cfg.max_retries {
                                std::thread::sleep(client.backoff(attempt as usize));
                            }
                        }
                    }
                }
                Err(Error::AgentFailure {
                    agent: self.label.clone(),
                    round: 0,
                    reason: format!("retries exhausted ({}): {last}", cfg.max_retries),
                })
            }
            _ => Err(Error::Config(format!(
                "agent {} does not answer questions",
                self.label
            ))),
        }
    }
}

/// System prompt as the system message; contextual and instructing parts
/// concatenated as the user message.
pub fn bundle_messages(bundle: &PromptBundle) -> Vec<ChatMessage> {
    vec![
        ChatMessage { role: "system", content: bundle.system_text.clone() },
        ChatMessage {
            role: "user",
            content: format!("{}\n\n{}", bundle.contextual_text, bundle.instructing_text),
        },
    ]
}
