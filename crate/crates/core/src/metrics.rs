//! Five behavioral dimensions computed from a single game trace, plus
//! aggregation with confidence intervals across repeated games.
//!
//! Terminology shared by all dimensions, for player X with opponent Y over
//! rounds 1..=N:
//! - an *uncalled defection* by X at round t: X_t = D and (t = 1 or Y_{t-1} = C);
//! - an *occasion for X to provoke* at round t: t = 1 or Y_{t-1} = C.
//!
//! A 0/0 dimension is undefined and propagates as `None`, never as 0.

use crate::error::{Error, Result};
use crate::game::{Action, GameTrace, Player};
use crate::stats::{ci95_proportion, mean};

fn seat_actions(trace: &GameTrace, player: Player) -> (Vec<Action>, Vec<Action>) {
    let own = trace.actions(player).collect();
    let opp = trace.actions(player.other()).collect();
    (own, opp)
}

fn first_defection(actions: &[Action]) -> Option<usize> {
    actions.iter().position(|a| *a == Action::Defect)
}

/// 1 when the player never defects, or first defects strictly after the
/// opponent's first defection. Simultaneous first defections score 0.
pub fn niceness(trace: &GameTrace, player: Player) -> bool {
    let (own, opp) = seat_actions(trace, player);
    match (first_defection(&own), first_defection(&opp)) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(fo), Some(fp)) => fo > fp,
    }
}

/// Fraction of the opponent's defections the player answered with renewed
/// cooperation, discounted by *penalties*.
///
/// - An opponent defection at round t (t <= N-1) is *forgiven* when X_{t+1} = C.
/// - A *penalty* is a round t (2 <= t <= N) where the opponent had defected
///   earlier, cooperated at t-1 to seek forgiveness, and the player, already
///   defecting at t-1, kept defecting for the remainder of the game.
///
/// Returns `None` when there is neither a countable defection nor a penalty.
pub fn forgiveness(trace: &GameTrace, player: Player) -> Option<f64> {
    let (own, opp) = seat_actions(trace, player);
    let n = own.len();
    let mut opponent_defections = 0u32;
    let mut forgiven = 0u32;
    for i in 0..n.saturating_sub(1) {
        if opp[i] == Action::Defect {
            opponent_defections += 1;
            if own[i + 1] == Action::Cooperate {
                forgiven += 1;
            }
        }
    }

    // suffix_defect[i]: the player defects at every round i+1..=N (0-based i..)
    let mut suffix_defect = vec![false; n + 1];
    suffix_defect[n] = true;
    for i in (0..n).rev() {
        suffix_defect[i] = suffix_defect[i + 1] && own[i] == Action::Defect;
    }
    let mut opp_defected_before = vec![false; n + 1];
    for i in 0..n {
        opp_defected_before[i + 1] = opp_defected_before[i] || opp[i] == Action::Defect;
    }

    let mut penalties = 0u32;
    for t in 2..=n {
        let seek = opp[t - 2] == Action::Cooperate && opp_defected_before[t - 2];
        if seek && suffix_defect[t - 2] {
            penalties += 1;
        }
    }

    let denom = opponent_defections + penalties;
    (denom > 0).then(|| forgiven as f64 / denom as f64)
}

/// Fraction of the opponent's uncalled defections (provocations, t <= N-1)
/// the player answered with an immediate defection. `None` when the
/// opponent never provoked.
pub fn retaliation(trace: &GameTrace, player: Player) -> Option<f64> {
    let (own, opp) = seat_actions(trace, player);
    let n = own.len();
    let mut provocations = 0u32;
    let mut reactions = 0u32;
    for t in 1..n {
        // uncalled defection by the opponent at round t (1-based)
        let uncalled = opp[t - 1] == Action::Defect && (t == 1 || own[t - 2] == Action::Cooperate);
        if uncalled {
            provocations += 1;
            if own[t] == Action::Defect {
                reactions += 1;
            }
        }
    }
    (provocations > 0).then(|| reactions as f64 / provocations as f64)
}

/// Fraction of the player's occasions to provoke that it used for an
/// uncalled defection. Round 1 always counts as an occasion, so the value
/// is defined for every non-empty trace.
pub fn troublemaking(trace: &GameTrace, player: Player) -> Option<f64> {
    let (own, opp) = seat_actions(trace, player);
    let n = own.len();
    let mut occasions = 0u32;
    let mut uncalled = 0u32;
    for t in 1..=n {
        if t == 1 || opp[t - 2] == Action::Cooperate {
            occasions += 1;
            if own[t - 1] == Action::Defect {
                uncalled += 1;
            }
        }
    }
    (occasions > 0).then(|| uncalled as f64 / occasions as f64)
}

/// Fraction of rounds 2..=N in which the player copied the opponent's
/// previous move. Errors on games shorter than two rounds.
pub fn emulation(trace: &GameTrace, player: Player) -> Result<f64> {
    let (own, opp) = seat_actions(trace, player);
    let n = own.len();
    if n < 2 {
        return Err(Error::ShortGame { what: "emulation", n_rounds: n as u32 });
    }
    let mimics = (1..n).filter(|&i| own[i] == opp[i - 1]).count();
    Ok(mimics as f64 / (n - 1) as f64)
}

/// The five dimensions of one game.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BehavioralProfile {
    pub nice: bool,
    pub forgiving: Option<f64>,
    pub retaliatory: Option<f64>,
    pub troublemaking: Option<f64>,
    pub emulative: f64,
}

pub fn profile(trace: &GameTrace, player: Player) -> Result<BehavioralProfile> {
    Ok(BehavioralProfile {
        nice: niceness(trace, player),
        forgiving: forgiveness(trace, player),
        retaliatory: retaliation(trace, player),
        troublemaking: troublemaking(trace, player),
        emulative: emulation(trace, player)?,
    })
}

/// External names of the five dimensions, in report order.
pub const DIMENSIONS: [&str; 5] = ["nice", "forgiving", "retaliatory", "troublemaking", "emulative"];

/// Mean and CI of one dimension over the games where it was defined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionAggregate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_defined: usize,
}

fn aggregate_dim(values: &[f64]) -> Option<DimensionAggregate> {
    if values.is_empty() {
        return None;
    }
    let (m, lo, hi) = if values.len() >= 2 {
        ci95_proportion(values).expect("len checked")
    } else {
        let m = mean(values);
        (m, m, m)
    };
    Some(DimensionAggregate { mean: m, ci_low: lo, ci_high: hi, n_defined: values.len() })
}

/// Per-dimension means and CIs across games. A dimension undefined in every
/// game is reported as `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileAggregate {
    pub n_games: usize,
    pub nice: Option<DimensionAggregate>,
    pub forgiving: Option<DimensionAggregate>,
    pub retaliatory: Option<DimensionAggregate>,
    pub troublemaking: Option<DimensionAggregate>,
    pub emulative: Option<DimensionAggregate>,
}

impl ProfileAggregate {
    /// (dimension name, aggregate or None) pairs in report order.
    pub fn rows(&self) -> [(&'static str, Option<DimensionAggregate>); 5] {
        [
            ("nice", self.nice),
            ("forgiving", self.forgiving),
            ("retaliatory", self.retaliatory),
            ("troublemaking", self.troublemaking),
            ("emulative", self.emulative),
        ]
    }
}

/// Aggregate the five dimensions over completed traces; failed traces are
/// skipped. Each dimension averages only the games where it is defined and
/// reports that count.
pub fn aggregate_profile(traces: &[GameTrace], player: Player) -> Result<ProfileAggregate> {
    let usable: Vec<&GameTrace> = traces.iter().filter(|t| !t.failed).collect();
    if usable.is_empty() {
        return Err(Error::EmptyTraces);
    }
    let mut nice = Vec::new();
    let mut forgiving = Vec::new();
    let mut retaliatory = Vec::new();
    let mut trouble = Vec::new();
    let mut emulative = Vec::new();
    for t in &usable {
        let p = profile(t, player)?;
        nice.push(if p.nice { 1.0 } else { 0.0 });
        if let Some(v) = p.forgiving {
            forgiving.push(v);
        }
        if let Some(v) = p.retaliatory {
            retaliatory.push(v);
        }
        if let Some(v) = p.troublemaking {
            trouble.push(v);
        }
        emulative.push(p.emulative);
    }
    Ok(ProfileAggregate {
        n_games: usable.len(),
        nice: aggregate_dim(&nice),
        forgiving: aggregate_dim(&forgiving),
        retaliatory: aggregate_dim(&retaliatory),
        troublemaking: aggregate_dim(&trouble),
        emulative: aggregate_dim(&emulative),
    })
}
