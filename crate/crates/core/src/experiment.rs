//! Experiment orchestration: alpha, window, and temperature sweeps,
//! comprehension runs, trace persistence, summary CSVs, manifests, and
//! deterministic replay.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{Agent, ChatClient, ChatFormat, MemoryWindow, RemoteConfig};
use crate::comprehension::{run_comprehension, ComprehensionRun, GradeReport};
use crate::error::{Error, Result};
use crate::game::{play_game, Action, GameSetup, GameTrace, PayoffMatrix, Player};
use crate::metrics;
use crate::persist;
use crate::plot::{self, Series};
use crate::sfem::{self, SfemConfig};
use crate::stats::{self, CiMethod, CoopCurve};
use crate::strategy::StrategyKind;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const STEADY_STATE_TAIL: usize = 10;

/// A full experiment description; the TOML config file deserializes into
/// this, with CLI flags overriding individual fields.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    /// Optional experiment kind; when set it must match the invoked
    /// subcommand (alpha_sweep, window_sweep, temperature_sweep,
    /// comprehension).
    pub experiment: Option<String>,
    /// Subject agent: a strategy id, "remote", "oracle",
    /// "scripted:<CD...>", or "replay:<path>:<A|B>". Plays seat A.
    pub subject: String,
    /// Opponent strategy id; alpha sweeps require "URND" (alpha comes from
    /// the grid) and window sweeps force "AD".
    pub opponent: String,
    pub alphas: Vec<f64>,
    pub windows: Vec<MemoryWindow>,
    pub temperatures: Vec<f64>,
    /// Games per cell.
    pub k: u32,
    pub n_rounds: u32,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Parallel games within a cell.
    pub workers: usize,
    pub ci: CiMethod,
    pub payoffs: PayoffMatrix,
    pub sfem: SfemConfig,
    pub comprehension_games: u32,
    /// Render SVG charts next to the CSVs.
    pub plot: bool,
    /// Cap on games per cell for remote subjects (cost control).
    pub budget: Option<u32>,
    pub remote: Option<RemoteConfig>,
    /// Raw config file text, echoed into the manifest.
    #[serde(skip)]
    pub config_text: Option<String>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            experiment: None,
            subject: "TFT".into(),
            opponent: "URND".into(),
            alphas: (0..=10).map(|i| i as f64 / 10.0).collect(),
            windows: vec![
                MemoryWindow::Rounds(1),
                MemoryWindow::Rounds(5),
                MemoryWindow::Rounds(10),
                MemoryWindow::Rounds(20),
                MemoryWindow::Full,
            ],
            temperatures: vec![0.1, 0.7, 1.0],
            k: 100,
            n_rounds: 100,
            master_seed: 0,
            output_dir: PathBuf::from("out"),
            workers: 1,
            ci: CiMethod::Normal,
            payoffs: PayoffMatrix::default(),
            sfem: SfemConfig::default(),
            comprehension_games: 3,
            plot: false,
            budget: None,
            remote: None,
            config_text: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.config_text = Some(text.to_string());
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.n_rounds == 0 {
            return Err(Error::Config("n_rounds must be >= 1".into()));
        }
        if !self.payoffs.is_valid() {
            return Err(Error::InvalidPayoffMatrix(
                self.payoffs.t,
                self.payoffs.r,
                self.payoffs.p,
                self.payoffs.s,
            ));
        }
        for &a in &self.alphas {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidProbability(a));
            }
        }
        for w in &self.windows {
            w.validate()?;
        }
        Ok(())
    }

    /// Games per cell after applying the budget cap to remote subjects.
    fn effective_k(&self, remote: bool) -> u32 {
        match (remote, self.budget) {
            (true, Some(b)) => self.k.min(b.max(1)),
            _ => self.k,
        }
    }

    fn check_kind(&self, kind: &str) -> Result<()> {
        match &self.experiment {
            Some(k) if k != kind => Err(Error::Config(format!(
                "config declares experiment {k:?} but {kind} was invoked"
            ))),
            _ => Ok(()),
        }
    }
}

/// Parsed form of the subject field.
#[derive(Clone, Debug, PartialEq)]
pub enum SubjectSpec {
    Strategy(StrategyKind),
    Remote,
    Scripted(Vec<Action>),
    ReplayFile { path: PathBuf, player: Player },
    Oracle,
}

pub fn parse_subject(s: &str) -> Result<SubjectSpec> {
    let s = s.trim();
    if s == "remote" {
        return Ok(SubjectSpec::Remote);
    }
    if s == "oracle" {
        return Ok(SubjectSpec::Oracle);
    }
    if let Some(letters) = s.strip_prefix("scripted:") {
        let actions = letters
            .chars()
            .map(|c| {
                Action::from_letter(c)
                    .ok_or_else(|| Error::Config(format!("scripted action {c:?} is not C or D")))
            })
            .collect::<Result<Vec<_>>>()?;
        if actions.is_empty() {
            return Err(Error::Config("scripted agent needs at least one action".into()));
        }
        return Ok(SubjectSpec::Scripted(actions));
    }
    if let Some(rest) = s.strip_prefix("replay:") {
        let (path, player) = rest
            .rsplit_once(':')
            .ok_or_else(|| Error::Config("replay subject wants replay:<path>:<A|B>".into()))?;
        return Ok(SubjectSpec::ReplayFile {
            path: PathBuf::from(path),
            player: Player::parse(player)?,
        });
    }
    Ok(SubjectSpec::Strategy(StrategyKind::parse(s)?))
}

enum FactoryInner {
    Strategy(StrategyKind),
    Remote(Arc<ChatClient>),
    Scripted(Vec<Action>),
    /// Per-game transcripts; game g replays line g modulo the file length.
    Replay(Vec<Vec<Action>>),
    Oracle,
}

/// Builds a fresh agent per game; remote agents share one client (and its
/// rate limiter) across all games of a cell.
pub struct AgentFactory {
    inner: FactoryInner,
}

impl AgentFactory {
    pub fn new(spec: &SubjectSpec, remote: Option<&RemoteConfig>) -> Result<Self> {
        let inner = match spec {
            SubjectSpec::Strategy(kind) => FactoryInner::Strategy(*kind),
            SubjectSpec::Scripted(actions) => FactoryInner::Scripted(actions.clone()),
            SubjectSpec::Oracle => FactoryInner::Oracle,
            SubjectSpec::Remote => {
                let cfg = remote.ok_or_else(|| {
                    Error::Config("subject is remote but the [remote] config table is missing".into())
                })?;
                FactoryInner::Remote(Arc::new(ChatClient::new(cfg.clone())?))
            }
            SubjectSpec::ReplayFile { path, player } => {
                let traces = persist::read_traces(path)?;
                if traces.is_empty() {
                    return Err(Error::EmptyTraces);
                }
                let transcripts = traces
                    .iter()
                    .map(|t| t.actions(*player).collect())
                    .collect();
                FactoryInner::Replay(transcripts)
            }
        };
        Ok(AgentFactory { inner })
    }

    pub fn is_remote(&self) -> bool {
        matches!(self.inner, FactoryInner::Remote(_))
    }

    pub fn is_strategy(&self) -> bool {
        matches!(self.inner, FactoryInner::Strategy(_))
    }

    pub fn agent_for_game(&self, game: u32) -> Agent {
        match &self.inner {
            FactoryInner::Strategy(kind) => Agent::strategy(*kind),
            FactoryInner::Remote(client) => Agent::remote(Arc::clone(client)),
            FactoryInner::Scripted(actions) => Agent::scripted("scripted", actions.clone()),
            FactoryInner::Replay(transcripts) => Agent::scripted(
                "replay",
                transcripts[game as usize % transcripts.len()].clone(),
            ),
            FactoryInner::Oracle => Agent::oracle(),
        }
    }
}

/// Game seeds derive from (master seed, cell id, game index), so changing k
/// never changes the first k traces of a cell.
pub fn derive_seed(master_seed: u64, cell_id: &str, game_index: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(cell_id.as_bytes());
    h.update(game_index.to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// One cell of a sweep as recorded in the manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellInfo {
    pub id: String,
    pub traces_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<MemoryWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub n_games: u32,
    pub n_failed: u32,
}

/// Everything needed to re-run or replay a sweep.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub experiment: String,
    pub created_unix: u64,
    pub master_seed: u64,
    pub spec: ExperimentSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_text: Option<String>,
    pub cells: Vec<CellInfo>,
    pub summaries: Vec<String>,
}

/// Paths produced by one run.
#[derive(Debug)]
pub struct RunArtifact {
    pub output_dir: PathBuf,
    pub manifest_path: PathBuf,
    pub traces_paths: Vec<PathBuf>,
    pub summary_paths: Vec<PathBuf>,
    pub n_failed: u32,
}

fn cell_file_name(cell_id: &str) -> String {
    format!("traces/{}.jsonl", cell_id.replace(['=', ','], "_"))
}

fn run_cell(
    subject: &AgentFactory,
    opponent: StrategyKind,
    spec: &ExperimentSpec,
    k: u32,
    cell_id: &str,
    alpha: Option<f64>,
) -> Result<(Vec<GameTrace>, u32)> {
    let traces: Vec<GameTrace> = (0..k)
        .into_par_iter()
        .map(|g| {
            let seed = derive_seed(spec.master_seed, cell_id, g);
            let mut a = subject.agent_for_game(g);
            let mut b = Agent::strategy(opponent);
            let setup = GameSetup {
                n_rounds: spec.n_rounds,
                matrix: spec.payoffs,
                seed,
                alpha,
            };
            match play_game(&mut a, &mut b, &setup) {
                Ok(t) => t,
                Err(abort) => {
                    eprintln!("cell {cell_id} game {g}: {abort}");
                    abort.trace
                }
            }
        })
        .collect();
    let n_failed = traces.iter().filter(|t| t.failed).count() as u32;
    if n_failed == k {
        return Err(Error::Config(format!("cell {cell_id}: all {k} games failed")));
    }
    Ok((traces, n_failed))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_manifest(
    dir: &Path,
    experiment: &str,
    spec: &ExperimentSpec,
    cells: Vec<CellInfo>,
    summaries: &[String],
) -> Result<PathBuf> {
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        experiment: experiment.to_string(),
        created_unix: now_unix(),
        master_seed: spec.master_seed,
        spec: spec.clone(),
        config_text: spec.config_text.clone(),
        cells,
        summaries: summaries.to_vec(),
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

fn ff(x: f64) -> String {
    format!("{x}")
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: Vec<String>) -> Result<PathBuf> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    std::fs::write(&path, text)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// alpha sweep

/// For each alpha: k games of the subject against URND(alpha); emits the
/// cooperation curve, SFEM fits, and behavioral profiles per alpha.
pub fn run_alpha_sweep(spec: &ExperimentSpec) -> Result<RunArtifact> {
    spec.validate()?;
    spec.check_kind("alpha_sweep")?;
    if spec.alphas.is_empty() {
        return Err(Error::Config("alpha sweep needs a non-empty alpha grid".into()));
    }
    if spec.opponent != "URND" {
        return Err(Error::Config(format!(
            "alpha sweeps play URND(alpha) opponents; got opponent {:?}",
            spec.opponent
        )));
    }
    let subject_spec = parse_subject(&spec.subject)?;
    let subject = AgentFactory::new(&subject_spec, spec.remote.as_ref())?;
    let k = spec.effective_k(subject.is_remote());

    std::fs::create_dir_all(&spec.output_dir)?;
    let pool = thread_pool(spec.workers)?;
    let mut cells = Vec::new();
    let mut traces_paths = Vec::new();

    for &alpha in &spec.alphas {
        let cell_id = format!("alpha={alpha}");
        let (traces, n_failed) = pool.install(|| {
            run_cell(
                &subject,
                StrategyKind::UniformRandom(alpha),
                spec,
                k,
                &cell_id,
                Some(alpha),
            )
        })?;
        let rel = cell_file_name(&cell_id);
        let path = spec.output_dir.join(&rel);
        persist::write_traces(&path, &traces)?;
        traces_paths.push(path);
        cells.push((
            CellInfo {
                id: cell_id,
                traces_path: rel,
                alpha: Some(alpha),
                window: None,
                temperature: None,
                n_games: k,
                n_failed,
            },
            traces,
        ));
    }

    let summaries = emit_alpha_summaries(&spec.output_dir, &cells, spec)?;
    let n_failed = cells.iter().map(|(c, _)| c.n_failed).sum();
    let manifest_path = write_manifest(
        &spec.output_dir,
        "alpha_sweep",
        spec,
        cells.into_iter().map(|(c, _)| c).collect(),
        &summaries,
    )?;
    Ok(RunArtifact {
        output_dir: spec.output_dir.clone(),
        manifest_path,
        traces_paths,
        summary_paths: summaries.iter().map(|s| spec.output_dir.join(s)).collect(),
        n_failed,
    })
}

fn emit_alpha_summaries(
    dir: &Path,
    cells: &[(CellInfo, Vec<GameTrace>)],
    spec: &ExperimentSpec,
) -> Result<Vec<String>> {
    let mut per_round_rows = Vec::new();
    let mut overall_rows = Vec::new();
    let mut sfem_rows = Vec::new();
    let mut profile_rows = Vec::new();
    let mut overall_points = Vec::new();

    for (cell, traces) in cells {
        let alpha = cell.alpha.unwrap_or(f64::NAN);
        let curve = stats::coop_prob_per_round_with(traces, Player::A, spec.ci)?;
        for r in &curve.per_round {
            per_round_rows.push(format!(
                "{},{},{},{},{}",
                ff(alpha),
                r.round,
                ff(r.mean),
                ff(r.ci_low),
                ff(r.ci_high)
            ));
        }
        let tail = STEADY_STATE_TAIL.min(curve.per_round.len());
        let steady = stats::steady_state(&curve, tail);
        overall_rows.push(format!(
            "{},{},{},{},{},{},{}",
            ff(alpha),
            ff(curve.overall_mean),
            ff(curve.overall_ci.0),
            ff(curve.overall_ci.1),
            ff(steady),
            curve.n_games,
            cell.n_failed
        ));
        overall_points.push((alpha, curve.overall_mean));

        let fit = sfem::fit(traces, Player::A, &spec.sfem)?;
        let scores = sfem::scores_at_beta(traces, Player::A, &spec.sfem, fit.beta)?;
        for (i, kind) in fit.catalog.iter().enumerate() {
            let group = fit
                .degeneracy_group_of(i)
                .map(|g| g.to_string())
                .unwrap_or_default();
            sfem_rows.push(format!(
                "{},{},{},{},{},{},{}",
                ff(alpha),
                kind.id(),
                ff(fit.weights[i]),
                ff(scores[i].1),
                ff(fit.beta),
                ff(fit.log_likelihood),
                group
            ));
        }

        let agg = metrics::aggregate_profile(traces, Player::A)?;
        for (name, dim) in agg.rows() {
            match dim {
                Some(d) => profile_rows.push(format!(
                    "{},{},{},{},{},{},{}",
                    ff(alpha),
                    name,
                    ff(d.mean),
                    ff(d.ci_low),
                    ff(d.ci_high),
                    d.n_defined,
                    agg.n_games
                )),
                None => profile_rows.push(format!(
                    "{},{},,,,0,{}",
                    ff(alpha),
                    name,
                    agg.n_games
                )),
            }
        }
    }

    let mut summaries = Vec::new();
    write_csv(dir, "coop_per_round.csv", "alpha,round,mean,ci_low,ci_high", per_round_rows)?;
    summaries.push("coop_per_round.csv".to_string());
    write_csv(
        dir,
        "coop_vs_alpha.csv",
        "alpha,p_coop,ci_low,ci_high,steady_state,n_games,n_failed",
        overall_rows,
    )?;
    summaries.push("coop_vs_alpha.csv".to_string());
    write_csv(
        dir,
        "sfem.csv",
        "alpha,strategy,weight,score,beta,log_likelihood,degeneracy_group_id",
        sfem_rows,
    )?;
    summaries.push("sfem.csv".to_string());
    write_csv(
        dir,
        "profile.csv",
        "alpha,dimension,mean,ci_low,ci_high,n_defined,n_games",
        profile_rows,
    )?;
    summaries.push("profile.csv".to_string());

    if spec.plot {
        plot::write_svg(
            &dir.join("coop_vs_alpha.svg"),
            "Cooperation probability vs opponent alpha",
            "alpha",
            "p_coop",
            &[Series { label: "p_coop".into(), points: overall_points }],
        )?;
        summaries.push("coop_vs_alpha.svg".to_string());
    }
    Ok(summaries)
}

// ---------------------------------------------------------------------------
// window sweep

/// For each memory window: k games against an AD opponent; emits per-round
/// cooperation and the steady state per window.
pub fn run_window_sweep(spec: &ExperimentSpec) -> Result<RunArtifact> {
    spec.validate()?;
    spec.check_kind("window_sweep")?;
    if spec.windows.is_empty() {
        return Err(Error::Config("window sweep needs a non-empty window grid".into()));
    }
    let subject_spec = parse_subject(&spec.subject)?;
    if matches!(subject_spec, SubjectSpec::Strategy(_) | SubjectSpec::Oracle) {
        return Err(Error::Config(
            "window sweeps need a remote or scripted subject; memory windows do not affect strategy agents"
                .into(),
        ));
    }

    std::fs::create_dir_all(&spec.output_dir)?;
    let pool = thread_pool(spec.workers)?;
    let mut cells = Vec::new();
    let mut traces_paths = Vec::new();

    for &window in &spec.windows {
        let cell_id = format!("window={window}");
        // remote subjects get the window wired into their prompt builder
        let subject = match &subject_spec {
            SubjectSpec::Remote => {
                let base = spec.remote.as_ref().ok_or_else(|| {
                    Error::Config("subject is remote but the [remote] config table is missing".into())
                })?;
                let cfg = RemoteConfig { memory_window: window, ..base.clone() };
                AgentFactory::new(&SubjectSpec::Remote, Some(&cfg))?
            }
            other => AgentFactory::new(other, spec.remote.as_ref())?,
        };
        let k = spec.effective_k(subject.is_remote());
        let (traces, n_failed) = pool.install(|| {
            run_cell(&subject, StrategyKind::AlwaysDefect, spec, k, &cell_id, None)
        })?;
        let rel = cell_file_name(&cell_id);
        let path = spec.output_dir.join(&rel);
        persist::write_traces(&path, &traces)?;
        traces_paths.push(path);
        cells.push((
            CellInfo {
                id: cell_id,
                traces_path: rel,
                alpha: None,
                window: Some(window),
                temperature: None,
                n_games: k,
                n_failed,
            },
            traces,
        ));
    }

    let summaries = emit_window_summaries(&spec.output_dir, &cells, spec)?;
    let n_failed = cells.iter().map(|(c, _)| c.n_failed).sum();
    let manifest_path = write_manifest(
        &spec.output_dir,
        "window_sweep",
        spec,
        cells.into_iter().map(|(c, _)| c).collect(),
        &summaries,
    )?;
    Ok(RunArtifact {
        output_dir: spec.output_dir.clone(),
        manifest_path,
        traces_paths,
        summary_paths: summaries.iter().map(|s| spec.output_dir.join(s)).collect(),
        n_failed,
    })
}

/// Per-game mean cooperation over the last `tail` rounds, for steady-state CIs.
fn steady_samples(traces: &[GameTrace], player: Player, tail: usize) -> Vec<f64> {
    traces
        .iter()
        .filter(|t| !t.failed)
        .map(|t| {
            let n = t.rounds.len();
            let tail = tail.min(n);
            let coops = t.rounds[n - tail..]
                .iter()
                .filter(|r| r.action_of(player).is_cooperate())
                .count();
            coops as f64 / tail as f64
        })
        .collect()
}

fn emit_window_summaries(
    dir: &Path,
    cells: &[(CellInfo, Vec<GameTrace>)],
    spec: &ExperimentSpec,
) -> Result<Vec<String>> {
    let mut per_round_rows = Vec::new();
    let mut steady_rows = Vec::new();
    let mut steady_points = Vec::new();

    for (cell, traces) in cells {
        let window = cell.window.expect("window cell");
        let curve = stats::coop_prob_per_round_with(traces, Player::A, spec.ci)?;
        for r in &curve.per_round {
            per_round_rows.push(format!(
                "{window},{},{},{},{}",
                r.round,
                ff(r.mean),
                ff(r.ci_low),
                ff(r.ci_high)
            ));
        }
        let tail = STEADY_STATE_TAIL.min(curve.per_round.len());
        let steady = stats::steady_state(&curve, tail);
        let samples = steady_samples(traces, Player::A, tail);
        let (lo, hi) = if samples.len() >= 2 {
            let (_, lo, hi) = stats::interval(spec.ci, &samples, true)?;
            (lo, hi)
        } else {
            (steady, steady)
        };
        steady_rows.push(format!(
            "{window},{},{},{},{},{}",
            ff(steady),
            ff(lo),
            ff(hi),
            curve.n_games,
            cell.n_failed
        ));
        steady_points.push(steady);
    }

    let mut summaries = Vec::new();
    write_csv(dir, "window_per_round.csv", "window,round,mean,ci_low,ci_high", per_round_rows)?;
    summaries.push("window_per_round.csv".to_string());
    write_csv(
        dir,
        "window_steady_state.csv",
        "window,steady_state,ci_low,ci_high,n_games,n_failed",
        steady_rows,
    )?;
    summaries.push("window_steady_state.csv".to_string());

    if spec.plot {
        let points = steady_points
            .iter()
            .enumerate()
            .map(|(i, &y)| (i as f64, y))
            .collect();
        plot::write_svg(
            &dir.join("window_steady_state.svg"),
            "Steady-state cooperation by memory window",
            "window index",
            "steady state",
            &[Series { label: "steady".into(), points }],
        )?;
        summaries.push("window_steady_state.svg".to_string());
    }
    Ok(summaries)
}

// ---------------------------------------------------------------------------
// temperature sweep

/// Repeat the alpha sweep per temperature; emits cooperation per (T, alpha)
/// plus pairwise Pearson correlations of the curves across temperatures.
pub fn run_temperature_sweep(spec: &ExperimentSpec) -> Result<RunArtifact> {
    spec.validate()?;
    spec.check_kind("temperature_sweep")?;
    if spec.temperatures.is_empty() || spec.alphas.is_empty() {
        return Err(Error::Config("temperature sweep needs temperature and alpha grids".into()));
    }
    let subject_spec = parse_subject(&spec.subject)?;
    if matches!(subject_spec, SubjectSpec::Strategy(_) | SubjectSpec::Oracle) {
        return Err(Error::Config(
            "temperature sweeps need a remote or scripted subject".into(),
        ));
    }

    std::fs::create_dir_all(&spec.output_dir)?;
    let pool = thread_pool(spec.workers)?;
    let mut cells = Vec::new();
    let mut traces_paths = Vec::new();

    for &temperature in &spec.temperatures {
        let subject = match &subject_spec {
            SubjectSpec::Remote => {
                let base = spec.remote.as_ref().ok_or_else(|| {
                    Error::Config("subject is remote but the [remote] config table is missing".into())
                })?;
                let cfg = RemoteConfig { temperature, ..base.clone() };
                AgentFactory::new(&SubjectSpec::Remote, Some(&cfg))?
            }
            other => AgentFactory::new(other, spec.remote.as_ref())?,
        };
        let k = spec.effective_k(subject.is_remote());
        for &alpha in &spec.alphas {
            let cell_id = format!("temp={temperature},alpha={alpha}");
            let (traces, n_failed) = pool.install(|| {
                run_cell(
                    &subject,
                    StrategyKind::UniformRandom(alpha),
                    spec,
                    k,
                    &cell_id,
                    Some(alpha),
                )
            })?;
            let rel = cell_file_name(&cell_id);
            let path = spec.output_dir.join(&rel);
            persist::write_traces(&path, &traces)?;
            traces_paths.push(path);
            cells.push((
                CellInfo {
                    id: cell_id,
                    traces_path: rel,
                    alpha: Some(alpha),
                    window: None,
                    temperature: Some(temperature),
                    n_games: k,
                    n_failed,
                },
                traces,
            ));
        }
    }

    let summaries = emit_temperature_summaries(&spec.output_dir, &cells, spec)?;
    let n_failed = cells.iter().map(|(c, _)| c.n_failed).sum();
    let manifest_path = write_manifest(
        &spec.output_dir,
        "temperature_sweep",
        spec,
        cells.into_iter().map(|(c, _)| c).collect(),
        &summaries,
    )?;
    Ok(RunArtifact {
        output_dir: spec.output_dir.clone(),
        manifest_path,
        traces_paths,
        summary_paths: summaries.iter().map(|s| spec.output_dir.join(s)).collect(),
        n_failed,
    })
}

fn emit_temperature_summaries(
    dir: &Path,
    cells: &[(CellInfo, Vec<GameTrace>)],
    spec: &ExperimentSpec,
) -> Result<Vec<String>> {
    let mut coop_rows = Vec::new();
    // curves[t] = p_coop by alpha, in grid order
    let mut curves: Vec<(f64, Vec<f64>)> = Vec::new();

    for (cell, traces) in cells {
        let temperature = cell.temperature.expect("temperature cell");
        let alpha = cell.alpha.expect("alpha cell");
        let curve = stats::coop_prob_per_round_with(traces, Player::A, spec.ci)?;
        coop_rows.push(format!(
            "{},{},{},{},{},{},{}",
            ff(temperature),
            ff(alpha),
            ff(curve.overall_mean),
            ff(curve.overall_ci.0),
            ff(curve.overall_ci.1),
            curve.n_games,
            cell.n_failed
        ));
        match curves.last_mut() {
            Some((t, points)) if *t == temperature => points.push(curve.overall_mean),
            _ => curves.push((temperature, vec![curve.overall_mean])),
        }
    }

    let mut corr_rows = Vec::new();
    for i in 0..curves.len() {
        for j in (i + 1)..curves.len() {
            // identical curves correlate perfectly even when flat, where
            // the Pearson formula itself degenerates; anything else with
            // zero variance stays blank
            let r = if curves[i].1 == curves[j].1 {
                ff(1.0)
            } else {
                stats::pearson(&curves[i].1, &curves[j].1)
                    .map(ff)
                    .unwrap_or_default()
            };
            corr_rows.push(format!("{},{},{r}", ff(curves[i].0), ff(curves[j].0)));
        }
    }

    let mut summaries = Vec::new();
    write_csv(
        dir,
        "temperature_coop.csv",
        "temperature,alpha,p_coop,ci_low,ci_high,n_games,n_failed",
        coop_rows,
    )?;
    summaries.push("temperature_coop.csv".to_string());
    write_csv(
        dir,
        "temperature_correlation.csv",
        "temperature_a,temperature_b,pearson",
        corr_rows,
    )?;
    summaries.push("temperature_correlation.csv".to_string());

    if spec.plot {
        let series: Vec<Series> = curves
            .iter()
            .map(|(t, ys)| Series {
                label: format!("T={t}"),
                points: spec
                    .alphas
                    .iter()
                    .copied()
                    .zip(ys.iter().copied())
                    .collect(),
            })
            .collect();
        plot::write_svg(
            &dir.join("temperature_coop.svg"),
            "Cooperation vs alpha by temperature",
            "alpha",
            "p_coop",
            &series,
        )?;
        summaries.push("temperature_coop.svg".to_string());
    }
    Ok(summaries)
}

// ---------------------------------------------------------------------------
// comprehension

/// Run the meta-prompting suite for a remote or oracle subject and emit the
/// per-template accuracy report.
pub fn run_comprehension_experiment(spec: &ExperimentSpec) -> Result<RunArtifact> {
    spec.validate()?;
    spec.check_kind("comprehension")?;
    let subject_spec = parse_subject(&spec.subject)?;
    let factory = AgentFactory::new(&subject_spec, spec.remote.as_ref())?;
    let mut agent = factory.agent_for_game(0);
    if !agent.supports_questions() {
        return Err(Error::Config(
            "comprehension runs need a remote or oracle subject".into(),
        ));
    }

    let (window, chat_format) = agent
        .prompt_params()
        .unwrap_or((MemoryWindow::default(), ChatFormat::default()));
    let run = ComprehensionRun {
        n_games: spec.comprehension_games,
        n_rounds: spec.n_rounds,
        matrix: spec.payoffs,
        window,
        chat_format,
        seed: spec.master_seed,
    };
    let (report, traces) = run_comprehension(&mut agent, &run)?;

    std::fs::create_dir_all(&spec.output_dir)?;
    let rel = "traces/comprehension.jsonl".to_string();
    let traces_path = spec.output_dir.join(&rel);
    persist::write_traces(&traces_path, &traces)?;

    let summaries = emit_comprehension_summary(&spec.output_dir, &report, spec)?;
    let n_failed = traces.iter().filter(|t| t.failed).count() as u32;
    let cells = vec![CellInfo {
        id: "comprehension".into(),
        traces_path: rel,
        alpha: None,
        window: Some(window),
        temperature: None,
        n_games: spec.comprehension_games,
        n_failed,
    }];
    let manifest_path =
        write_manifest(&spec.output_dir, "comprehension", spec, cells, &summaries)?;
    Ok(RunArtifact {
        output_dir: spec.output_dir.clone(),
        manifest_path,
        traces_paths: vec![traces_path],
        summary_paths: summaries.iter().map(|s| spec.output_dir.join(s)).collect(),
        n_failed,
    })
}

fn emit_comprehension_summary(
    dir: &Path,
    report: &GradeReport,
    spec: &ExperimentSpec,
) -> Result<Vec<String>> {
    let mut rows = Vec::new();
    for (template, stats) in &report.per_template {
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            template.id(),
            template.category().id(),
            stats.n_asked,
            stats.n_correct,
            ff(stats.accuracy),
            ff(stats.ci_low),
            ff(stats.ci_high)
        ));
    }
    let mut summaries = Vec::new();
    write_csv(
        dir,
        "comprehension.csv",
        "template,category,n_asked,n_correct,accuracy,ci_low,ci_high",
        rows,
    )?;
    summaries.push("comprehension.csv".to_string());

    if spec.plot {
        let points = report
            .per_template
            .iter()
            .enumerate()
            .map(|(i, (_, s))| (i as f64, s.accuracy))
            .collect();
        plot::write_svg(
            &dir.join("comprehension.svg"),
            "Comprehension accuracy by template",
            "template index",
            "accuracy",
            &[Series { label: "accuracy".into(), points }],
        )?;
        summaries.push("comprehension.svg".to_string());
    }
    Ok(summaries)
}

// ---------------------------------------------------------------------------
// replay

/// Recompute every summary CSV of a recorded sweep from its trace files,
/// without any game play or network access. Byte-identical for identical
/// traces; re-running replay is idempotent.
pub fn replay_dir(dir: &Path, out_dir: &Path) -> Result<RunArtifact> {
    let manifest_text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: manifest.schema_version,
            expected: MANIFEST_SCHEMA_VERSION,
        });
    }

    let mut cells = Vec::new();
    for cell in &manifest.cells {
        let traces = persist::read_traces(&dir.join(&cell.traces_path))?;
        cells.push((cell.clone(), traces));
    }

    std::fs::create_dir_all(out_dir)?;
    let mut spec = manifest.spec.clone();
    spec.config_text = manifest.config_text.clone();
    let summaries = match manifest.experiment.as_str() {
        "alpha_sweep" => emit_alpha_summaries(out_dir, &cells, &spec)?,
        "window_sweep" => emit_window_summaries(out_dir, &cells, &spec)?,
        "temperature_sweep" => emit_temperature_summaries(out_dir, &cells, &spec)?,
        other => {
            return Err(Error::Config(format!(
                "experiment {other:?} has no trace-only replay"
            )))
        }
    };

    // keep the replay output self-contained
    let mut traces_paths = Vec::new();
    for (cell, traces) in &cells {
        let path = out_dir.join(&cell.traces_path);
        persist::write_traces(&path, traces)?;
        traces_paths.push(path);
    }
    let n_failed = cells.iter().map(|(c, _)| c.n_failed).sum();
    let manifest_path = write_manifest(
        out_dir,
        &manifest.experiment,
        &spec,
        cells.into_iter().map(|(c, _)| c).collect(),
        &summaries,
    )?;
    Ok(RunArtifact {
        output_dir: out_dir.to_path_buf(),
        manifest_path,
        traces_paths,
        summary_paths: summaries.iter().map(|s| out_dir.join(s)).collect(),
        n_failed,
    })
}

/// Summaries of a single trace file, for ad-hoc inspection.
pub struct TraceSummaries {
    pub curve: CoopCurve,
    pub profile: metrics::ProfileAggregate,
    pub fit: sfem::SfemFit,
    pub scores: Vec<(StrategyKind, f64)>,
}

pub fn summarize_traces(
    traces: &[GameTrace],
    player: Player,
    sfem_cfg: &SfemConfig,
) -> Result<TraceSummaries> {
    let curve = stats::coop_prob_per_round(traces, player)?;
    let profile = metrics::aggregate_profile(traces, player)?;
    let fit = sfem::fit(traces, player, sfem_cfg)?;
    let scores = sfem::scores_at_beta(traces, player, sfem_cfg, fit.beta)?;
    Ok(TraceSummaries { curve, profile, fit, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_derivation_is_stable_and_cell_scoped() {
        let s1 = derive_seed(42, "alpha=0.3", 0);
        assert_eq!(s1, derive_seed(42, "alpha=0.3", 0));
        assert_ne!(s1, derive_seed(42, "alpha=0.3", 1));
        assert_ne!(s1, derive_seed(42, "alpha=0.4", 0));
        assert_ne!(s1, derive_seed(43, "alpha=0.3", 0));
    }

    #[test]
    fn subject_parsing() {
        assert_eq!(
            parse_subject("TFT").unwrap(),
            SubjectSpec::Strategy(StrategyKind::TitForTat)
        );
        assert_eq!(parse_subject("remote").unwrap(), SubjectSpec::Remote);
        assert_eq!(parse_subject("oracle").unwrap(), SubjectSpec::Oracle);
        assert_eq!(
            parse_subject("scripted:CD").unwrap(),
            SubjectSpec::Scripted(vec![Action::Cooperate, Action::Defect])
        );
        assert!(matches!(
            parse_subject("replay:/tmp/x.jsonl:A").unwrap(),
            SubjectSpec::ReplayFile { player: Player::A, .. }
        ));
        assert!(parse_subject("scripted:CX").is_err());
        assert!(parse_subject("bogus").is_err());
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let text = r#"
subject = "GRIM"
alphas = [0.0, 0.5, 1.0]
k = 7
n_rounds = 9
master_seed = 3
windows = [1, 5, "full"]
[sfem]
restarts = 4
"#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(spec.subject, "GRIM");
        assert_eq!(spec.k, 7);
        assert_eq!(spec.sfem.restarts, 4);
        assert_eq!(spec.windows[2], MemoryWindow::Full);
        assert_eq!(spec.config_text.as_deref(), Some(text));
    }

    #[test]
    fn budget_caps_only_remote_subjects() {
        let spec = ExperimentSpec { k: 100, budget: Some(10), ..Default::default() };
        assert_eq!(spec.effective_k(true), 10);
        assert_eq!(spec.effective_k(false), 100);
    }
}
