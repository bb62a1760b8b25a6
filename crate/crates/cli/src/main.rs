//! `ipd` — play iterated Prisoner's Dilemma games, run the experiment
//! sweeps, and analyze recorded traces.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ipd_core::experiment::{
    self, parse_subject, AgentFactory, ExperimentSpec, RunArtifact, SubjectSpec,
};
use ipd_core::game::{play_game, GameSetup, PayoffMatrix, Player};
use ipd_core::persist;
use ipd_core::sfem::SfemConfig;
use ipd_core::strategy::StrategyKind;

#[derive(Parser)]
#[command(name = "ipd", version, about = "Iterated Prisoner's Dilemma laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Experiment config file (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel games per cell
    #[arg(long)]
    workers: Option<usize>,
    /// Cap games per cell for remote subjects (cost control)
    #[arg(long)]
    budget: Option<u32>,
    /// Render SVG charts next to the CSVs
    #[arg(long)]
    plot: bool,
    /// Subject agent override (strategy id, "remote", "oracle",
    /// "scripted:<CD...>", "replay:<path>:<A|B>")
    #[arg(long)]
    subject: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Play one game and print its trace
    Play {
        /// Agent for seat A (strategy id, "oracle", or "scripted:<CD...>")
        #[arg(long, default_value = "TFT")]
        agent_a: String,
        /// Agent for seat B
        #[arg(long, default_value = "URND:0.5")]
        agent_b: String,
        #[arg(long, default_value_t = 100)]
        rounds: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Payoff matrix as T,R,P,S
        #[arg(long)]
        payoffs: Option<String>,
        /// Print the trace as a JSONL line instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Sweep opponent cooperation probability: cooperation curve, SFEM, profiles
    SweepAlpha(CommonArgs),
    /// Sweep the memory window against an AD opponent
    SweepWindow(CommonArgs),
    /// Repeat the alpha sweep per temperature and correlate the curves
    SweepTemperature(CommonArgs),
    /// Run the meta-prompting comprehension suite
    Comprehend(CommonArgs),
    /// Fit strategy frequencies on a recorded trace file
    Sfem {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value = "A")]
        player: String,
        /// Write the fit as CSV here
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated strategy catalog override
        #[arg(long)]
        catalog: Option<String>,
    },
    /// Behavioral profile of a recorded trace file
    Metrics {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value = "A")]
        player: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute summaries from recorded traces, without any play
    Replay {
        /// A sweep output directory (with manifest.json)
        #[arg(long)]
        dir: Option<PathBuf>,
        /// A single trace file to summarize
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "A")]
        player: String,
    },
}

fn load_spec(common: &CommonArgs) -> Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            ExperimentSpec::from_toml(&text)?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = common.seed {
        spec.master_seed = seed;
    }
    if let Some(out) = &common.out {
        spec.output_dir = out.clone();
    }
    if let Some(workers) = common.workers {
        spec.workers = workers;
    }
    if let Some(budget) = common.budget {
        spec.budget = Some(budget);
    }
    if common.plot {
        spec.plot = true;
    }
    if let Some(subject) = &common.subject {
        spec.subject = subject.clone();
    }
    Ok(spec)
}

fn report(artifact: &RunArtifact) {
    println!("output:   {}", artifact.output_dir.display());
    println!("manifest: {}", artifact.manifest_path.display());
    for path in &artifact.summary_paths {
        println!("summary:  {}", path.display());
    }
    if artifact.n_failed > 0 {
        println!("failed games (excluded from statistics): {}", artifact.n_failed);
    }
}

fn parse_payoffs(text: &str) -> Result<PayoffMatrix> {
    let parts: Vec<i64> = text
        .split(',')
        .map(|p| p.trim().parse::<i64>())
        .collect::<std::result::Result<_, _>>()
        .context("payoffs must be four integers T,R,P,S")?;
    let [t, r, p, s] = parts.as_slice() else {
        bail!("payoffs must be four integers T,R,P,S");
    };
    Ok(PayoffMatrix::new(*t, *r, *p, *s)?)
}

fn build_play_agent(spec_text: &str) -> Result<ipd_core::Agent> {
    let parsed = parse_subject(spec_text)?;
    if matches!(parsed, SubjectSpec::Remote) {
        bail!("`play` with a remote agent needs a config file; use the sweep commands");
    }
    let factory = AgentFactory::new(&parsed, None)?;
    Ok(factory.agent_for_game(0))
}

fn cmd_play(
    agent_a: &str,
    agent_b: &str,
    rounds: u32,
    seed: u64,
    payoffs: Option<&str>,
    json: bool,
) -> Result<()> {
    let matrix = payoffs.map(parse_payoffs).transpose()?.unwrap_or_default();
    let mut a = build_play_agent(agent_a)?;
    let mut b = build_play_agent(agent_b)?;
    let setup = GameSetup { n_rounds: rounds, matrix, seed, alpha: None };
    let trace = match play_game(&mut a, &mut b, &setup) {
        Ok(t) => t,
        Err(abort) => {
            eprintln!("{abort}");
            abort.trace
        }
    };
    if json {
        println!("{}", persist::trace_to_jsonl(&trace)?);
        return Ok(());
    }
    println!("{} vs {} ({} rounds, seed {seed})", trace.label(Player::A), trace.label(Player::B), rounds);
    for r in &trace.rounds {
        println!(
            "round {:>3}: A {:<9} B {:<9} points A {} B {}",
            r.round_index, r.action_a.as_str(), r.action_b.as_str(), r.payoff_a, r.payoff_b
        );
    }
    println!(
        "totals: A {}  B {}{}",
        trace.total_points(Player::A),
        trace.total_points(Player::B),
        if trace.failed { "  [failed]" } else { "" }
    );
    Ok(())
}

fn cmd_sfem(traces: &Path, player: &str, out: Option<&PathBuf>, catalog: Option<&str>) -> Result<()> {
    let player = Player::parse(player)?;
    let traces = persist::read_traces(traces)?;
    let mut cfg = SfemConfig::default();
    if let Some(list) = catalog {
        cfg.catalog = list
            .split(',')
            .map(|s| StrategyKind::parse(s.trim()))
            .collect::<ipd_core::Result<_>>()?;
    }
    let fit = ipd_core::sfem::fit(&traces, player, &cfg)?;
    let scores = ipd_core::sfem::scores_at_beta(&traces, player, &cfg, fit.beta)?;

    println!(
        "beta {:.4}  log-likelihood {:.3}  iterations {}{}",
        fit.beta,
        fit.log_likelihood,
        fit.iterations,
        if fit.converged { "" } else { "  [not converged]" }
    );
    println!("{:<10} {:>8} {:>8}  degeneracy", "strategy", "weight", "score");
    let mut rows = Vec::new();
    for (i, kind) in fit.catalog.iter().enumerate() {
        let group = fit
            .degeneracy_group_of(i)
            .map(|g| g.to_string())
            .unwrap_or_default();
        println!(
            "{:<10} {:>8.4} {:>8.4}  {}",
            kind.id(),
            fit.weights[i],
            scores[i].1,
            if group.is_empty() { "-" } else { &group }
        );
        rows.push(format!(
            "{},{},{},{},{},{}",
            kind.id(),
            fit.weights[i],
            scores[i].1,
            fit.beta,
            fit.log_likelihood,
            group
        ));
    }
    if let Some(path) = out {
        let mut text = String::from("strategy,weight,score,beta,log_likelihood,degeneracy_group_id\n");
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        std::fs::write(path, text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_metrics(traces: &Path, player: &str, out: Option<&PathBuf>) -> Result<()> {
    let player = Player::parse(player)?;
    let traces = persist::read_traces(traces)?;
    let agg = ipd_core::metrics::aggregate_profile(&traces, player)?;
    println!("games: {}", agg.n_games);
    println!("{:<14} {:>8} {:>8} {:>8} {:>9}", "dimension", "mean", "ci_low", "ci_high", "n_defined");
    let mut rows = Vec::new();
    for (name, dim) in agg.rows() {
        match dim {
            Some(d) => {
                println!(
                    "{name:<14} {:>8.4} {:>8.4} {:>8.4} {:>9}",
                    d.mean, d.ci_low, d.ci_high, d.n_defined
                );
                rows.push(format!(
                    "{name},{},{},{},{},{}",
                    d.mean, d.ci_low, d.ci_high, d.n_defined, agg.n_games
                ));
            }
            None => {
                println!("{name:<14} {:>8} {:>8} {:>8} {:>9}", "-", "-", "-", 0);
                rows.push(format!("{name},,,,0,{}", agg.n_games));
            }
        }
    }
    if let Some(path) = out {
        let mut text = String::from("dimension,mean,ci_low,ci_high,n_defined,n_games\n");
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        std::fs::write(path, text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_replay(
    dir: Option<&PathBuf>,
    traces: Option<&PathBuf>,
    out: Option<&PathBuf>,
    player: &str,
) -> Result<()> {
    match (dir, traces) {
        (Some(dir), None) => {
            let out = out.cloned().unwrap_or_else(|| dir.join("replay"));
            let artifact = experiment::replay_dir(dir, &out)?;
            report(&artifact);
            Ok(())
        }
        (None, Some(path)) => {
            let player = Player::parse(player)?;
            let traces = persist::read_traces(path)?;
            let summary =
                experiment::summarize_traces(&traces, player, &SfemConfig::default())?;
            println!(
                "games: {}  p_coop {:.4} (95% CI {:.4}..{:.4})",
                summary.curve.n_games,
                summary.curve.overall_mean,
                summary.curve.overall_ci.0,
                summary.curve.overall_ci.1
            );
            let tail = 10.min(summary.curve.per_round.len());
            println!(
                "steady state (last {tail} rounds): {:.4}",
                ipd_core::stats::steady_state(&summary.curve, tail)
            );
            for (name, dim) in summary.profile.rows() {
                match dim {
                    Some(d) => println!("{name:<14} {:.4} ({} games defined)", d.mean, d.n_defined),
                    None => println!("{name:<14} undefined"),
                }
            }
            for (i, kind) in summary.fit.catalog.iter().enumerate() {
                println!(
                    "sfem {:<10} weight {:.4} score {:.4}",
                    kind.id(),
                    summary.fit.weights[i],
                    summary.scores[i].1
                );
            }
            Ok(())
        }
        _ => bail!("replay wants exactly one of --dir or --traces"),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Play { agent_a, agent_b, rounds, seed, payoffs, json } => {
            cmd_play(agent_a, agent_b, *rounds, *seed, payoffs.as_deref(), *json)
        }
        Command::SweepAlpha(common) => {
            let spec = load_spec(common)?;
            report(&experiment::run_alpha_sweep(&spec)?);
            Ok(())
        }
        Command::SweepWindow(common) => {
            let spec = load_spec(common)?;
            report(&experiment::run_window_sweep(&spec)?);
            Ok(())
        }
        Command::SweepTemperature(common) => {
            let spec = load_spec(common)?;
            report(&experiment::run_temperature_sweep(&spec)?);
            Ok(())
        }
        Command::Comprehend(common) => {
            let mut spec = load_spec(common)?;
            if common.config.is_none() && common.subject.is_none() {
                // offline default: the built-in prompt-reading oracle
                spec.subject = "oracle".into();
            }
            report(&experiment::run_comprehension_experiment(&spec)?);
            Ok(())
        }
        Command::Sfem { traces, player, out, catalog } => {
            cmd_sfem(traces, player, out.as_ref(), catalog.as_deref())
        }
        Command::Metrics { traces, player, out } => cmd_metrics(traces, player, out.as_ref()),
        Command::Replay { dir, traces, out, player } => {
            cmd_replay(dir.as_ref(), traces.as_ref(), out.as_ref(), player)
        }
    }
}
