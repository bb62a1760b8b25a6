//! The eight canonical strategies, usable both as live decision functions
//! and as prescription oracles over observed traces.

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::game::{Action, GameTrace, PayoffMatrix, Player, SeatView};

/// A strategy identity, including the URND cooperation probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StrategyKind {
    AlwaysCooperate,
    AlwaysDefect,
    Random,
    UniformRandom(f64),
    TitForTat,
    SuspiciousTitForTat,
    GrimTrigger,
    WinStayLoseShift,
}

impl StrategyKind {
    /// Random strategies have no deterministic prescriptions.
    pub fn is_deterministic(self) -> bool {
        !matches!(self, StrategyKind::Random | StrategyKind::UniformRandom(_))
    }

    /// The exact identifier used in config files and traces:
    /// AC, AD, RND, URND:<p>, TFT, STFT, GRIM, WSLS.
    pub fn id(&self) -> String {
        match self {
            StrategyKind::AlwaysCooperate => "AC".into(),
            StrategyKind::AlwaysDefect => "AD".into(),
            StrategyKind::Random => "RND".into(),
            StrategyKind::UniformRandom(p) => format!("URND:{p}"),
            StrategyKind::TitForTat => "TFT".into(),
            StrategyKind::SuspiciousTitForTat => "STFT".into(),
            StrategyKind::GrimTrigger => "GRIM".into(),
            StrategyKind::WinStayLoseShift => "WSLS".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(p) = s.strip_prefix("URND:") {
            let p: f64 = p
                .parse()
                .map_err(|_| Error::UnknownStrategy(s.to_string()))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability(p));
            }
            return Ok(StrategyKind::UniformRandom(p));
        }
        match s {
            "AC" => Ok(StrategyKind::AlwaysCooperate),
            "AD" => Ok(StrategyKind::AlwaysDefect),
            "RND" => Ok(StrategyKind::Random),
            "TFT" => Ok(StrategyKind::TitForTat),
            "STFT" => Ok(StrategyKind::SuspiciousTitForTat),
            "GRIM" => Ok(StrategyKind::GrimTrigger),
            "WSLS" => Ok(StrategyKind::WinStayLoseShift),
            other => Err(Error::UnknownStrategy(other.to_string())),
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.id())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::parse(s)
    }
}

impl Serialize for StrategyKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for StrategyKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        StrategyKind::parse(&s).map_err(D::Error::custom)
    }
}

/// The deterministic part of a strategy's decision rule; `None` for RND/URND.
fn deterministic_next(kind: StrategyKind, view: &SeatView) -> Option<Action> {
    use Action::*;
    match kind {
        StrategyKind::AlwaysCooperate => Some(Cooperate),
        StrategyKind::AlwaysDefect => Some(Defect),
        StrategyKind::Random | StrategyKind::UniformRandom(_) => None,
        StrategyKind::TitForTat => Some(view.rounds.last().map_or(Cooperate, |r| r.opp)),
        StrategyKind::SuspiciousTitForTat => Some(view.rounds.last().map_or(Defect, |r| r.opp)),
        StrategyKind::GrimTrigger => {
            Some(if view.rounds.iter().any(|r| r.opp == Defect) {
                Defect
            } else {
                Cooperate
            })
        }
        StrategyKind::WinStayLoseShift => Some(view.rounds.last().map_or(Cooperate, |r| {
            // "highest payoffs" means R or T under the configured matrix
            if r.own_points == view.matrix.r || r.own_points == view.matrix.t {
                r.own
            } else {
                r.own.opposite()
            }
        })),
    }
}

/// Decide the next move for `kind` given the history seen from its seat.
///
/// Only RND/URND consume randomness; p must be in [0, 1].
pub fn next_action<R: Rng + ?Sized>(kind: StrategyKind, view: &SeatView, rng: &mut R) -> Action {
    if let Some(a) = deterministic_next(kind, view) {
        return a;
    }
    let p = match kind {
        StrategyKind::Random => 0.5,
        StrategyKind::UniformRandom(p) => p,
        _ => unreachable!(),
    };
    debug_assert!((0.0..=1.0).contains(&p));
    if rng.gen_bool(p) {
        Action::Cooperate
    } else {
        Action::Defect
    }
}

/// Incremental per-game state. Everything in it is derivable from the full
/// observed history; [`next_action_stateful`] must agree with [`next_action`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StrategyState {
    pub opponent_defected_ever: bool,
    pub last_own_action: Option<Action>,
    pub last_opponent_action: Option<Action>,
    pub last_own_payoff: Option<i64>,
}

impl StrategyState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one completed round as seen from this player's seat.
    pub fn observe(&mut self, own: Action, opp: Action, own_payoff: i64) {
        self.opponent_defected_ever |= opp == Action::Defect;
        self.last_own_action = Some(own);
        self.last_opponent_action = Some(opp);
        self.last_own_payoff = Some(own_payoff);
    }
}

/// Stateful twin of [`next_action`].
pub fn next_action_stateful<R: Rng + ?Sized>(
    kind: StrategyKind,
    state: &StrategyState,
    matrix: &PayoffMatrix,
    rng: &mut R,
) -> Action {
    use Action::*;
    match kind {
        StrategyKind::AlwaysCooperate => Cooperate,
        StrategyKind::AlwaysDefect => Defect,
        StrategyKind::Random => {
            if rng.gen_bool(0.5) {
                Cooperate
            } else {
                Defect
            }
        }
        StrategyKind::UniformRandom(p) => {
            if rng.gen_bool(p) {
                Cooperate
            } else {
                Defect
            }
        }
        StrategyKind::TitForTat => state.last_opponent_action.unwrap_or(Cooperate),
        StrategyKind::SuspiciousTitForTat => state.last_opponent_action.unwrap_or(Defect),
        StrategyKind::GrimTrigger => {
            if state.opponent_defected_ever {
                Defect
            } else {
                Cooperate
            }
        }
        StrategyKind::WinStayLoseShift => match (state.last_own_action, state.last_own_payoff) {
            (Some(own), Some(pts)) => {
                if pts == matrix.r || pts == matrix.t {
                    own
                } else {
                    own.opposite()
                }
            }
            _ => Cooperate,
        },
    }
}

/// For every round t of an observed trace, the action the strategy would
/// prescribe given the observed joint history up to t-1.
///
/// Prescriptions condition on the player's observed own actions, not on the
/// counterfactual actions the strategy itself would have taken.
pub fn prescribe(kind: StrategyKind, trace: &GameTrace, player: Player) -> Result<Vec<Action>> {
    if !kind.is_deterministic() {
        return Err(Error::RandomStrategy(kind.id()));
    }
    let seat = trace.seat_rounds(player);
    // Infer matrix values from the recorded payoffs where possible; WSLS only
    // compares payoffs against R and T, both recoverable from the trace rows.
    let matrix = infer_matrix(trace).unwrap_or_default();
    Ok((0..seat.len())
        .map(|t| {
            let view = SeatView {
                rounds: &seat[..t],
                matrix,
                n_rounds: trace.n_rounds,
            };
            deterministic_next(kind, &view).expect("deterministic strategy")
        })
        .collect())
}

/// Reconstruct the payoff matrix from recorded round payoffs. Returns None
/// when the trace does not witness all four action pairs and the defaults
/// cannot be confirmed.
pub fn infer_matrix(trace: &GameTrace) -> Option<PayoffMatrix> {
    use Action::*;
    let mut t = None;
    let mut r = None;
    let mut p = None;
    let mut s = None;
    for rec in &trace.rounds {
        match (rec.action_a, rec.action_b) {
            (Cooperate, Cooperate) => r = Some(rec.payoff_a),
            (Defect, Defect) => p = Some(rec.payoff_a),
            (Defect, Cooperate) => {
                t = Some(rec.payoff_a);
                s = Some(rec.payoff_b);
            }
            (Cooperate, Defect) => {
                t = Some(rec.payoff_b);
                s = Some(rec.payoff_a);
            }
        }
    }
    let d = PayoffMatrix::default();
    let m = PayoffMatrix {
        t: t.unwrap_or(d.t),
        r: r.unwrap_or(d.r),
        p: p.unwrap_or(d.p),
        s: s.unwrap_or(d.s),
    };
    m.is_valid().then_some(m)
}
