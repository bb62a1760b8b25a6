//! Prisoner's Dilemma primitives: actions, payoff matrix, round records,
//! game traces, and the engine that plays an iterated game between two agents.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::error::{Error, Result};

/// One of the two moves available to a player.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Cooperate,
    Defect,
}

impl Action {
    pub fn is_cooperate(self) -> bool {
        self == Action::Cooperate
    }

    pub fn opposite(self) -> Self {
        match self {
            Action::Cooperate => Action::Defect,
            Action::Defect => Action::Cooperate,
        }
    }

    /// The exact word used in prompts and trace files.
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Cooperate => "Cooperate",
            Action::Defect => "Defect",
        }
    }

    /// Case-insensitive match against "cooperate"/"defect" after trimming.
    pub fn from_word(word: &str) -> Option<Self> {
        match word.trim().to_ascii_lowercase().as_str() {
            "cooperate" => Some(Action::Cooperate),
            "defect" => Some(Action::Defect),
            _ => None,
        }
    }

    /// Compact form used by scripted-agent specs, e.g. "CCDD".
    pub fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'C' => Some(Action::Cooperate),
            'D' => Some(Action::Defect),
            _ => None,
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Payoff structure (T, R, P, S) with the strict hierarchy T > R > P > S.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    pub t: i64,
    pub r: i64,
    pub p: i64,
    pub s: i64,
}

impl PayoffMatrix {
    pub fn new(t: i64, r: i64, p: i64, s: i64) -> Result<Self> {
        if t > r && r > p && p > s {
            Ok(PayoffMatrix { t, r, p, s })
        } else {
            Err(Error::InvalidPayoffMatrix(t, r, p, s))
        }
    }

    pub fn is_valid(&self) -> bool {
        self.t > self.r && self.r > self.p && self.p > self.s
    }

    /// Points collected by each player for one pair of simultaneous moves.
    pub fn payoff(&self, a: Action, b: Action) -> (i64, i64) {
        use Action::*;
        match (a, b) {
            (Cooperate, Cooperate) => (self.r, self.r),
            (Defect, Defect) => (self.p, self.p),
            (Defect, Cooperate) => (self.t, self.s),
            (Cooperate, Defect) => (self.s, self.t),
        }
    }
}

impl Default for PayoffMatrix {
    /// The canonical (5, 3, 1, 0) matrix.
    fn default() -> Self {
        PayoffMatrix { t: 5, r: 3, p: 1, s: 0 }
    }
}

/// Free-function form of [`PayoffMatrix::payoff`].
pub fn payoff(a: Action, b: Action, m: &PayoffMatrix) -> (i64, i64) {
    m.payoff(a, b)
}

/// Which seat of the game a computation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Player {
    A,
    B,
}

impl Player {
    pub fn other(self) -> Self {
        match self {
            Player::A => Player::B,
            Player::B => Player::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::A => 0,
            Player::B => 1,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Player::A),
            "B" => Ok(Player::B),
            other => Err(Error::Config(format!("unknown player {other:?}, expected A or B"))),
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Player::A => "A",
            Player::B => "B",
        })
    }
}

/// One completed round. Serialized field names match the trace file schema.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    #[serde(rename = "i")]
    pub round_index: u32,
    #[serde(rename = "a")]
    pub action_a: Action,
    #[serde(rename = "b")]
    pub action_b: Action,
    #[serde(rename = "pa")]
    pub payoff_a: i64,
    #[serde(rename = "pb")]
    pub payoff_b: i64,
}

impl RoundRecord {
    pub fn action_of(&self, player: Player) -> Action {
        match player {
            Player::A => self.action_a,
            Player::B => self.action_b,
        }
    }

    pub fn payoff_of(&self, player: Player) -> i64 {
        match player {
            Player::A => self.payoff_a,
            Player::B => self.payoff_b,
        }
    }
}

/// The joint action sequence of one iterated game.
///
/// `rounds` holds completed rounds only; on a completed game its length
/// equals `n_rounds`, on an aborted game it is shorter and `failed` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameTrace {
    pub agent_labels: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub seed: u64,
    pub n_rounds: u32,
    pub rounds: Vec<RoundRecord>,
    pub failed: bool,
}

impl GameTrace {
    pub fn actions(&self, player: Player) -> impl Iterator<Item = Action> + '_ {
        self.rounds.iter().map(move |r| r.action_of(player))
    }

    pub fn total_points(&self, player: Player) -> i64 {
        self.rounds.iter().map(|r| r.payoff_of(player)).sum()
    }

    pub fn label(&self, player: Player) -> &str {
        &self.agent_labels[player.index()]
    }

    /// The trace as seen from one seat: own move first.
    pub fn seat_rounds(&self, player: Player) -> Vec<SeatRound> {
        self.rounds
            .iter()
            .map(|r| SeatRound {
                own: r.action_of(player),
                opp: r.action_of(player.other()),
                own_points: r.payoff_of(player),
                opp_points: r.payoff_of(player.other()),
            })
            .collect()
    }
}

/// One round from a single player's perspective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeatRound {
    pub own: Action,
    pub opp: Action,
    pub own_points: i64,
    pub opp_points: i64,
}

impl SeatRound {
    pub fn swapped(self) -> Self {
        SeatRound {
            own: self.opp,
            opp: self.own,
            own_points: self.opp_points,
            opp_points: self.own_points,
        }
    }
}

/// Everything an agent may look at when deciding: the completed rounds from
/// its own seat, the payoff matrix, and the fixed game length.
#[derive(Clone, Copy, Debug)]
pub struct SeatView<'a> {
    pub rounds: &'a [SeatRound],
    pub matrix: PayoffMatrix,
    pub n_rounds: u32,
}

impl SeatView<'_> {
    pub fn current_round(&self) -> u32 {
        self.rounds.len() as u32 + 1
    }
}

/// Fixed parameters of one game.
#[derive(Clone, Copy, Debug)]
pub struct GameSetup {
    pub n_rounds: u32,
    pub matrix: PayoffMatrix,
    pub seed: u64,
    /// Opponent cooperation probability, recorded in the trace when the
    /// opponent is URND(alpha).
    pub alpha: Option<f64>,
}

impl GameSetup {
    pub fn new(n_rounds: u32, seed: u64) -> Self {
        GameSetup {
            n_rounds,
            matrix: PayoffMatrix::default(),
            seed,
            alpha: None,
        }
    }
}

/// A game aborted by an agent failure. Carries the partial trace (already
/// marked `failed`) so callers can persist it before reporting.
#[derive(Debug)]
pub struct GameAbort {
    pub trace: GameTrace,
    pub round: u32,
    pub agent: String,
    pub reason: String,
}

impl std::fmt::Display for GameAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "agent {} failed at round {}: {}",
            self.agent, self.round, self.reason
        )
    }
}

impl From<GameAbort> for Error {
    fn from(a: GameAbort) -> Self {
        Error::AgentFailure {
            agent: a.agent,
            round: a.round,
            reason: a.reason,
        }
    }
}

/// Derive the per-seat RNG for a game. Each seat gets its own ChaCha stream
/// off the game seed, so one agent drawing more randomness than the other
/// never shifts its opponent's draws.
pub fn seat_rng(seed: u64, player: Player) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(player.index() as u64 + 1);
    rng
}

/// Play one iterated game. Both agents must be freshly initialized.
///
/// Each round both agents are queried with the history up to the previous
/// round only, then moves are revealed simultaneously. The trace is fully
/// deterministic given the setup seed and deterministic agents.
// the abort variant carries the partial trace on purpose
#[allow(clippy::result_large_err)]
pub fn play_game(
    agent_a: &mut Agent,
    agent_b: &mut Agent,
    setup: &GameSetup,
) -> std::result::Result<GameTrace, GameAbort> {
    assert!(setup.n_rounds >= 1, "games need at least one round");
    assert!(setup.matrix.is_valid(), "payoff matrix must satisfy T > R > P > S");

    let labels = [agent_a.label().to_string(), agent_b.label().to_string()];
    let mut rng_a = seat_rng(setup.seed, Player::A);
    let mut rng_b = seat_rng(setup.seed, Player::B);

    let n = setup.n_rounds as usize;
    let mut rounds = Vec::with_capacity(n);
    let mut seat_a: Vec<SeatRound> = Vec::with_capacity(n);
    let mut seat_b: Vec<SeatRound> = Vec::with_capacity(n);

    let trace = |rounds: Vec<RoundRecord>, failed: bool| GameTrace {
        agent_labels: labels.clone(),
        alpha: setup.alpha,
        seed: setup.seed,
        n_rounds: setup.n_rounds,
        rounds,
        failed,
    };

    for i in 1..=setup.n_rounds {
        let view_a = SeatView {
            rounds: &seat_a,
            matrix: setup.matrix,
            n_rounds: setup.n_rounds,
        };
        let act_a = match agent_a.decide(&view_a, &mut rng_a) {
            Ok(a) => a,
            Err(e) => {
                return Err(GameAbort {
                    trace: trace(rounds, true),
                    round: i,
                    agent: labels[0].clone(),
                    reason: e.to_string(),
                })
            }
        };
        let view_b = SeatView {
            rounds: &seat_b,
            matrix: setup.matrix,
            n_rounds: setup.n_rounds,
        };
        let act_b = match agent_b.decide(&view_b, &mut rng_b) {
            Ok(a) => a,
            Err(e) => {
                return Err(GameAbort {
                    trace: trace(rounds, true),
                    round: i,
                    agent: labels[1].clone(),
                    reason: e.to_string(),
                })
            }
        };

        let (pa, pb) = setup.matrix.payoff(act_a, act_b);
        rounds.push(RoundRecord {
            round_index: i,
            action_a: act_a,
            action_b: act_b,
            payoff_a: pa,
            payoff_b: pb,
        });
        seat_a.push(SeatRound {
            own: act_a,
            opp: act_b,
            own_points: pa,
            opp_points: pb,
        });
        seat_b.push(seat_a.last().unwrap().swapped());
    }

    Ok(trace(rounds, false))
}
