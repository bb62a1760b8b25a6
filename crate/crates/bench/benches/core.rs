use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use ipd_bench::strategy_traces;
use ipd_core::agent::prompt::{
    build_contextual_prompt, build_system_prompt, ChatFormat, MemoryWindow,
};
use ipd_core::game::{play_game, GameSetup, PayoffMatrix, Player};
use ipd_core::metrics::aggregate_profile;
use ipd_core::sfem::{fit, SfemConfig};
use ipd_core::strategy::{prescribe, StrategyKind};
use ipd_core::Agent;

fn bench_play_game(c: &mut Criterion) {
    c.bench_function("play_game tft_vs_urnd 100 rounds", |b| {
        b.iter(|| {
            let mut a = Agent::strategy(StrategyKind::TitForTat);
            let mut p = Agent::strategy(StrategyKind::UniformRandom(0.5));
            black_box(play_game(&mut a, &mut p, &GameSetup::new(100, 42)).unwrap())
        })
    });
}

fn bench_prescribe(c: &mut Criterion) {
    let traces = strategy_traces(StrategyKind::WinStayLoseShift, 0.5, 1, 100);
    c.bench_function("prescribe wsls 100 rounds", |b| {
        b.iter(|| black_box(prescribe(StrategyKind::WinStayLoseShift, &traces[0], Player::A).unwrap()))
    });
}

fn bench_sfem_fit(c: &mut Criterion) {
    let traces = strategy_traces(StrategyKind::GrimTrigger, 0.5, 50, 100);
    let cfg = SfemConfig::default();
    c.bench_function("sfem_fit 50 traces x 100 rounds", |b| {
        b.iter(|| black_box(fit(&traces, Player::A, &cfg).unwrap()))
    });
}

fn bench_metrics(c: &mut Criterion) {
    let traces = strategy_traces(StrategyKind::TitForTat, 0.3, 100, 100);
    c.bench_function("aggregate_profile 100 traces", |b| {
        b.iter(|| black_box(aggregate_profile(&traces, Player::A).unwrap()))
    });
}

fn bench_prompts(c: &mut Criterion) {
    let traces = strategy_traces(StrategyKind::TitForTat, 0.5, 1, 100);
    let seat = traces[0].seat_rounds(Player::A);
    let matrix = PayoffMatrix::default();
    c.bench_function("build full prompt window 10", |b| {
        b.iter_batched(
            || seat.clone(),
            |seat| {
                let system = build_system_prompt(&matrix, 100, ChatFormat::PaperLlamaMarkers);
                let ctx = build_contextual_prompt(&seat, MemoryWindow::Rounds(10), 101);
                black_box((system, ctx))
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(
    benches,
    bench_play_game,
    bench_prescribe,
    bench_sfem_fit,
    bench_metrics,
    bench_prompts
);
criterion_main!(benches);
