//! Shared fixtures for the benchmarks.

use ipd_core::game::{play_game, GameSetup, GameTrace};
use ipd_core::strategy::StrategyKind;
use ipd_core::Agent;

/// Seeded games of one strategy against URND(alpha).
pub fn strategy_traces(kind: StrategyKind, alpha: f64, k: u64, n_rounds: u32) -> Vec<GameTrace> {
    (0..k)
        .map(|g| {
            let mut a = Agent::strategy(kind);
            let mut b = Agent::strategy(StrategyKind::UniformRandom(alpha));
            let mut setup = GameSetup::new(n_rounds, 0x6a5e + g);
            setup.alpha = Some(alpha);
            play_game(&mut a, &mut b, &setup).expect("strategy games cannot fail")
        })
        .collect()
}
