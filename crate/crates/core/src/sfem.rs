//! Strategy Frequency Estimation: finite-mixture maximum likelihood over a
//! catalog of deterministic strategies, fitted with EM.
//!
//! Each trace is explained by one latent strategy that is followed with a
//! shared tremble probability beta; mixture weights live on the simplex.
//! Because a strategy's log-likelihood on a trace depends only on how many
//! rounds matched its prescription, EM iterations run on precomputed match
//! counts.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::game::{GameTrace, Player};
use crate::strategy::{prescribe, StrategyKind};

/// The six deterministic strategies reported on.
pub fn default_catalog() -> Vec<StrategyKind> {
    vec![
        StrategyKind::AlwaysCooperate,
        StrategyKind::AlwaysDefect,
        StrategyKind::TitForTat,
        StrategyKind::SuspiciousTitForTat,
        StrategyKind::GrimTrigger,
        StrategyKind::WinStayLoseShift,
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfemConfig {
    /// Deterministic strategies only; random strategies have a beta-free
    /// likelihood and are excluded from the mixture.
    pub catalog: Vec<StrategyKind>,
    pub max_iterations: usize,
    /// Stop when the log-likelihood improves by less than this.
    pub tolerance: f64,
    pub restarts: usize,
    /// Lower clamp for beta; above 0.5 so "following" beats "anti-following".
    pub beta_floor: f64,
    /// Seeds the restart initializations.
    pub seed: u64,
}

impl Default for SfemConfig {
    fn default() -> Self {
        SfemConfig {
            catalog: default_catalog(),
            max_iterations: 500,
            tolerance: 1e-8,
            restarts: 10,
            beta_floor: 0.51,
            seed: 0x5f3a,
        }
    }
}

impl SfemConfig {
    fn validate(&self) -> Result<()> {
        if self.catalog.is_empty() {
            return Err(Error::Config("sfem catalog is empty".into()));
        }
        for k in &self.catalog {
            if !k.is_deterministic() {
                return Err(Error::RandomStrategy(k.id()));
            }
        }
        if !(self.beta_floor > 0.5 && self.beta_floor <= 1.0) {
            return Err(Error::Config(format!(
                "beta_floor {} outside (0.5, 1]",
                self.beta_floor
            )));
        }
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(Error::Config("restarts and max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of one mixture fit.
#[derive(Clone, Debug)]
pub struct SfemFit {
    /// Catalog in the order weights and responsibilities are reported.
    pub catalog: Vec<StrategyKind>,
    /// Mixture weights phi, aligned with `catalog`; sum to 1.
    pub weights: Vec<f64>,
    /// Shared probability of playing the prescribed action.
    pub beta: f64,
    pub log_likelihood: f64,
    /// responsibilities[trace][strategy]; each row sums to 1.
    pub responsibilities: Vec<Vec<f64>>,
    /// Catalog indices with identical prescriptions on every trace, groups
    /// of size >= 2 only. Weights inside a group are not identifiable.
    pub degeneracy_groups: Vec<Vec<usize>>,
    pub converged: bool,
    pub iterations: usize,
    /// Log-likelihood after every E-step of the winning restart.
    pub ll_history: Vec<f64>,
}

impl SfemFit {
    pub fn weight_of(&self, kind: StrategyKind) -> Option<f64> {
        self.catalog
            .iter()
            .position(|k| *k == kind)
            .map(|i| self.weights[i])
    }

    /// Index of the degeneracy group containing this catalog entry, if any.
    pub fn degeneracy_group_of(&self, catalog_index: usize) -> Option<usize> {
        self.degeneracy_groups
            .iter()
            .position(|g| g.contains(&catalog_index))
    }
}

/// Sum over rounds of log(beta) for matches and log(1-beta) for mismatches
/// between the observed actions and the strategy's prescriptions.
pub fn likelihood_of_strategy(
    trace: &GameTrace,
    player: Player,
    kind: StrategyKind,
    beta: f64,
) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidBeta(beta));
    }
    let pres = prescribe(kind, trace, player)?;
    let matches = pres
        .iter()
        .zip(trace.actions(player))
        .filter(|(p, a)| **p == *a)
        .count();
    let n = pres.len();
    Ok(log_likelihood_from_counts(matches as f64, n as f64, beta))
}

fn log_likelihood_from_counts(matches: f64, total: f64, beta: f64) -> f64 {
    // beta may be exactly 1.0 after clamping; evaluate just inside (0, 1)
    let b = beta.clamp(f64::MIN_POSITIVE, 1.0 - 1e-12);
    matches * b.ln() + (total - matches) * (1.0 - b).ln()
}

/// Uniform hash in [0, 1), independent of catalog order.
fn unit_hash(seed: u64, restart: u64, tag: &str) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(restart.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    let v = u64::from_le_bytes(digest[..8].try_into().unwrap());
    v as f64 / (u64::MAX as f64 + 1.0)
}

struct MatchData {
    /// match counts, matches[trace][strategy]
    matches: Vec<Vec<f64>>,
    /// rounds per trace
    totals: Vec<f64>,
}

fn match_data(
    traces: &[&GameTrace],
    player: Player,
    catalog: &[StrategyKind],
) -> Result<(MatchData, Vec<Vec<usize>>)> {
    let mut matches = Vec::with_capacity(traces.len());
    let mut totals = Vec::with_capacity(traces.len());
    // prescriptions per strategy, concatenated over traces, for degeneracy
    let mut all_pres: Vec<Vec<crate::game::Action>> = vec![Vec::new(); catalog.len()];

    for trace in traces {
        let observed: Vec<_> = trace.actions(player).collect();
        let mut row = Vec::with_capacity(catalog.len());
        for (ki, kind) in catalog.iter().enumerate() {
            let pres = prescribe(*kind, trace, player)?;
            let m = pres.iter().zip(&observed).filter(|(p, a)| *p == *a).count();
            row.push(m as f64);
            all_pres[ki].extend_from_slice(&pres);
        }
        totals.push(observed.len() as f64);
        matches.push(row);
    }

    // group catalog entries with identical prescriptions on every trace
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut grouped = vec![false; catalog.len()];
    for i in 0..catalog.len() {
        if grouped[i] {
            continue;
        }
        let mut group = vec![i];
        for j in (i + 1)..catalog.len() {
            if !grouped[j] && all_pres[i] == all_pres[j] {
                group.push(j);
                grouped[j] = true;
            }
        }
        if group.len() >= 2 {
            for &g in &group {
                grouped[g] = true;
            }
            groups.push(group);
        }
    }

    Ok((MatchData { matches, totals }, groups))
}

struct EmOutcome {
    weights: Vec<f64>,
    beta: f64,
    log_likelihood: f64,
    responsibilities: Vec<Vec<f64>>,
    converged: bool,
    iterations: usize,
    ll_history: Vec<f64>,
}

fn e_step(
    data: &MatchData,
    weights: &[f64],
    beta: f64,
) -> (f64, Vec<Vec<f64>>) {
    let k = weights.len();
    let mut ll = 0.0;
    let mut resp = Vec::with_capacity(data.matches.len());
    for (row, &total) in data.matches.iter().zip(&data.totals) {
        let logw: Vec<f64> = (0..k)
            .map(|j| weights[j].ln() + log_likelihood_from_counts(row[j], total, beta))
            .collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut r: Vec<f64> = logw.iter().map(|w| (w - max).exp()).collect();
        let sum: f64 = r.iter().sum();
        for v in &mut r {
            *v /= sum;
        }
        ll += max + sum.ln();
        resp.push(r);
    }
    (ll, resp)
}

fn m_step(data: &MatchData, resp: &[Vec<f64>], beta_floor: f64) -> (Vec<f64>, f64) {
    let t = resp.len() as f64;
    let k = resp[0].len();
    let mut weights = vec![0.0; k];
    let mut weighted_matches = 0.0;
    let mut weighted_rounds = 0.0;
    for (ti, row) in resp.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            weights[j] += r;
            weighted_matches += r * data.matches[ti][j];
            weighted_rounds += r * data.totals[ti];
        }
    }
    for w in &mut weights {
        *w /= t;
    }
    let beta = (weighted_matches / weighted_rounds).clamp(beta_floor, 1.0);
    (weights, beta)
}

fn run_em(data: &MatchData, init_weights: Vec<f64>, init_beta: f64, cfg: &SfemConfig) -> EmOutcome {
    let mut weights = init_weights;
    let mut beta = init_beta;
    let mut prev_ll = f64::NEG_INFINITY;
    let mut ll_history = Vec::new();
    let mut converged = false;
    let mut last = None;
    let mut iterations = 0;

    for it in 0..cfg.max_iterations {
        let (ll, resp) = e_step(data, &weights, beta);
        debug_assert!(
            ll >= prev_ll - 1e-9,
            "EM log-likelihood decreased: {prev_ll} -> {ll}"
        );
        ll_history.push(ll);
        iterations = it + 1;
        let done = it > 0 && (ll - prev_ll).abs() < cfg.tolerance;
        prev_ll = ll;
        last = Some((ll, resp));
        if done {
            converged = true;
            break;
        }
        let (w, b) = m_step(data, last.as_ref().map(|(_, r)| r).unwrap(), cfg.beta_floor);
        weights = w;
        beta = b;
    }

    if !converged {
        // max_iterations exhausted: re-sync the likelihood with the final
        // M-step parameters so the returned state is self-consistent
        let (ll, resp) = e_step(data, &weights, beta);
        ll_history.push(ll);
        last = Some((ll, resp));
    }

    let (log_likelihood, responsibilities) = last.expect("max_iterations >= 1");
    EmOutcome {
        weights,
        beta,
        log_likelihood,
        responsibilities,
        converged,
        iterations,
        ll_history,
    }
}

/// Fit mixture weights and the tremble parameter to observed traces by EM,
/// keeping the best of `cfg.restarts` seeded initializations. Failed traces
/// are skipped. On non-convergence the best state so far is returned with
/// `converged` unset.
pub fn fit(traces: &[GameTrace], player: Player, cfg: &SfemConfig) -> Result<SfemFit> {
    cfg.validate()?;
    let usable: Vec<&GameTrace> = traces.iter().filter(|t| !t.failed).collect();
    if usable.is_empty() {
        return Err(Error::EmptyTraces);
    }
    let (data, degeneracy_groups) = match_data(&usable, player, &cfg.catalog)?;

    let k = cfg.catalog.len();
    let mut best: Option<EmOutcome> = None;
    for restart in 0..cfg.restarts {
        let (init_weights, init_beta) = if restart == 0 {
            (vec![1.0 / k as f64; k], 0.9_f64.max(cfg.beta_floor))
        } else {
            // derive each strategy's initial weight from its id so that
            // reordering the catalog does not change the fit
            let raw: Vec<f64> = cfg
                .catalog
                .iter()
                .map(|kind| 0.25 + unit_hash(cfg.seed, restart as u64, &kind.id()))
                .collect();
            let sum: f64 = raw.iter().sum();
            let beta = (0.6 + 0.39 * unit_hash(cfg.seed, restart as u64, "beta"))
                .max(cfg.beta_floor);
            (raw.into_iter().map(|w| w / sum).collect(), beta)
        };
        let outcome = run_em(&data, init_weights, init_beta, cfg);
        if best
            .as_ref()
            .is_none_or(|b| outcome.log_likelihood > b.log_likelihood)
        {
            best = Some(outcome);
        }
    }

    let best = best.expect("restarts >= 1");
    Ok(SfemFit {
        catalog: cfg.catalog.clone(),
        weights: best.weights,
        beta: best.beta,
        log_likelihood: best.log_likelihood,
        responsibilities: best.responsibilities,
        degeneracy_groups,
        converged: best.converged,
        iterations: best.iterations,
        ll_history: best.ll_history,
    })
}

/// Auxiliary non-mixture score: per trace, each strategy's likelihood
/// normalized by the catalog maximum at the fitted beta, averaged over
/// traces. Scores need not sum to 1 across strategies.
pub fn per_strategy_score(
    traces: &[GameTrace],
    player: Player,
    cfg: &SfemConfig,
) -> Result<Vec<(StrategyKind, f64)>> {
    let fitted = fit(traces, player, cfg)?;
    scores_at_beta(traces, player, cfg, fitted.beta)
}

/// Per-strategy scores at a given beta; exposed so a caller holding a
/// [`SfemFit`] can avoid fitting twice.
pub fn scores_at_beta(
    traces: &[GameTrace],
    player: Player,
    cfg: &SfemConfig,
    beta: f64,
) -> Result<Vec<(StrategyKind, f64)>> {
    cfg.validate()?;
    let usable: Vec<&GameTrace> = traces.iter().filter(|t| !t.failed).collect();
    if usable.is_empty() {
        return Err(Error::EmptyTraces);
    }
    let (data, _) = match_data(&usable, player, &cfg.catalog)?;
    let k = cfg.catalog.len();
    let mut sums = vec![0.0; k];
    for (row, &total) in data.matches.iter().zip(&data.totals) {
        let lls: Vec<f64> = (0..k)
            .map(|j| log_likelihood_from_counts(row[j], total, beta))
            .collect();
        let max = lls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (j, ll) in lls.iter().enumerate() {
            sums[j] += (ll - max).exp();
        }
    }
    let t = usable.len() as f64;
    Ok(cfg
        .catalog
        .iter()
        .zip(sums)
        .map(|(kind, s)| (*kind, s / t))
        .collect())
}
