//! Cooperation statistics over repeated games and small-sample helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameTrace, Player};

/// How confidence intervals are computed across game-level samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    /// mean +/- 1.96 * stdev / sqrt(n)
    #[default]
    Normal,
    /// Percentile bootstrap with a fixed resample count and seed.
    Bootstrap,
}

const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_SEED: u64 = 0x0b007;

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

pub fn sample_stdev(samples: &[f64]) -> f64 {
    let m = mean(samples);
    let var = samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (samples.len() - 1) as f64;
    var.sqrt()
}

/// Normal-approximation 95% interval: (mean, low, high). Needs >= 2 samples.
pub fn ci95(samples: &[f64]) -> Result<(f64, f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    let m = mean(samples);
    let half = 1.96 * sample_stdev(samples) / (samples.len() as f64).sqrt();
    Ok((m, m - half, m + half))
}

/// [`ci95`] with bounds clamped to [0, 1], for proportion samples.
pub fn ci95_proportion(samples: &[f64]) -> Result<(f64, f64, f64)> {
    let (m, lo, hi) = ci95(samples)?;
    Ok((m, lo.max(0.0), hi.min(1.0)))
}

/// Percentile bootstrap 95% interval with a fixed seed, clamped like
/// [`ci95_proportion`] when `proportion` is set.
pub fn bootstrap_ci95(samples: &[f64], proportion: bool) -> Result<(f64, f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(BOOTSTRAP_SEED);
    let n = samples.len();
    let mut means = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let s: f64 = (0..n).map(|_| samples[rng.gen_range(0..n)]).sum();
        means.push(s / n as f64);
    }
    means.sort_by(|a, b| a.total_cmp(b));
    let lo = means[(BOOTSTRAP_RESAMPLES as f64 * 0.025) as usize];
    let hi = means[(BOOTSTRAP_RESAMPLES as f64 * 0.975) as usize - 1];
    let m = mean(samples);
    if proportion {
        Ok((m, lo.max(0.0), hi.min(1.0)))
    } else {
        Ok((m, lo, hi))
    }
}

/// Dispatch on the configured interval method. Proportion samples are clamped.
pub fn interval(method: CiMethod, samples: &[f64], proportion: bool) -> Result<(f64, f64, f64)> {
    match method {
        CiMethod::Normal => {
            if proportion {
                ci95_proportion(samples)
            } else {
                ci95(samples)
            }
        }
        CiMethod::Bootstrap => bootstrap_ci95(samples, proportion),
    }
}

/// Per-round cooperation statistics over k repeated games.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundStat {
    pub round: u32,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// The empirical cooperation curve of one player across k games:
/// per-round cooperation probability plus the game-averaged overall value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoopCurve {
    pub per_round: Vec<RoundStat>,
    pub overall_mean: f64,
    pub overall_ci: (f64, f64),
    pub n_games: usize,
}

/// Compute the cooperation curve for `player` over completed traces.
///
/// Per-round means use the k games as 0/1 samples; the overall mean is the
/// total cooperation count divided by N*k, which equals the mean of the
/// per-round means. The overall CI treats each game's cooperation fraction
/// as one sample. Failed traces are excluded.
pub fn coop_prob_per_round(traces: &[GameTrace], player: Player) -> Result<CoopCurve> {
    coop_prob_per_round_with(traces, player, CiMethod::Normal)
}

pub fn coop_prob_per_round_with(
    traces: &[GameTrace],
    player: Player,
    method: CiMethod,
) -> Result<CoopCurve> {
    let usable: Vec<&GameTrace> = traces.iter().filter(|t| !t.failed).collect();
    if usable.is_empty() {
        return Err(Error::EmptyTraces);
    }
    let n_rounds = usable[0].n_rounds;
    for t in &usable {
        if t.n_rounds != n_rounds || t.rounds.len() as u32 != n_rounds {
            return Err(Error::RoundCountMismatch {
                first: n_rounds,
                other: t.rounds.len() as u32,
            });
        }
    }

    let k = usable.len();
    let mut per_round = Vec::with_capacity(n_rounds as usize);
    let mut total_coops = 0u64;
    for i in 0..n_rounds as usize {
        let samples: Vec<f64> = usable
            .iter()
            .map(|t| {
                if t.rounds[i].action_of(player).is_cooperate() {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        total_coops += samples.iter().filter(|&&x| x == 1.0).count() as u64;
        let (m, lo, hi) = if k >= 2 {
            interval(method, &samples, true)?
        } else {
            let m = mean(&samples);
            (m, m, m)
        };
        per_round.push(RoundStat { round: i as u32 + 1, mean: m, ci_low: lo, ci_high: hi });
    }

    let overall_mean = total_coops as f64 / (n_rounds as u64 * k as u64) as f64;
    let game_props: Vec<f64> = usable
        .iter()
        .map(|t| {
            t.actions(player).filter(|a| a.is_cooperate()).count() as f64 / n_rounds as f64
        })
        .collect();
    let overall_ci = if k >= 2 {
        let (_, lo, hi) = interval(method, &game_props, true)?;
        (lo, hi)
    } else {
        (overall_mean, overall_mean)
    };

    Ok(CoopCurve { per_round, overall_mean, overall_ci, n_games: k })
}

/// Mean of the per-round means over the final `tail` rounds.
pub fn steady_state(curve: &CoopCurve, tail: usize) -> f64 {
    assert!(
        tail >= 1 && tail <= curve.per_round.len(),
        "tail must be in 1..=n_rounds"
    );
    let start = curve.per_round.len() - tail;
    mean(
        &curve.per_round[start..]
            .iter()
            .map(|r| r.mean)
            .collect::<Vec<_>>(),
    )
}

/// Pearson correlation coefficient. Errors on fewer than two points or on
/// zero variance in either input.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: xs.len().min(ys.len()) });
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(cov / (vx * vy).sqrt())
}
