//! A simulation laboratory for the Iterated Prisoner's Dilemma.
//!
//! The crate plays iterated games between configurable agents (hard-coded
//! strategies, scripted replays, remote chat-completion backends), checks
//! an agent's comprehension of its own prompt via meta-prompting, and
//! profiles behavior with cooperation statistics, five behavioral
//! dimensions, and strategy-frequency estimation (SFEM).
//!
//! Modules:
//! - [`game`]: actions, payoffs, traces, and the game engine
//! - [`strategy`]: the eight canonical strategies and their prescriptions
//! - [`stats`]: cooperation curves and confidence intervals
//! - [`metrics`]: the five behavioral dimensions
//! - [`sfem`]: finite-mixture strategy frequency estimation
//! - [`agent`]: the agent abstraction, prompts, HTTP client, mock server
//! - [`comprehension`]: meta-prompting question suite
//! - [`experiment`]: sweeps, persistence, summaries, and replay
//! - [`persist`]: JSONL trace files
//! - [`plot`]: SVG chart convenience output

pub mod agent;
pub mod comprehension;
pub mod error;
pub mod experiment;
pub mod game;
pub mod metrics;
pub mod persist;
pub mod plot;
pub mod sfem;
pub mod stats;
pub mod strategy;

pub use agent::{Agent, ChatFormat, InstructingVariant, MemoryWindow, PromptBundle, RemoteConfig};
pub use error::{Error, Result};
pub use game::{
    payoff, play_game, Action, GameSetup, GameTrace, PayoffMatrix, Player, RoundRecord, SeatRound,
    SeatView,
};
pub use metrics::BehavioralProfile;
pub use sfem::{SfemConfig, SfemFit};
pub use stats::{ci95, coop_prob_per_round, steady_state, CoopCurve};
pub use strategy::{next_action, prescribe, StrategyKind, StrategyState};
