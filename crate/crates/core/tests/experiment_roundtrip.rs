//! End-to-end sweep behavior: reproducibility, seed independence, the
//! spec'd per-sweep outputs, and replay from stored traces.

use std::path::Path;

use ipd_core::experiment::{
    derive_seed, replay_dir, run_alpha_sweep, run_comprehension_experiment,
    run_temperature_sweep, run_window_sweep, ExperimentSpec,
};
use ipd_core::game::{Action, Player};
use ipd_core::persist;
use ipd_core::stats;
use ipd_core::strategy::StrategyKind;

fn base_spec(out: &Path) -> ExperimentSpec {
    ExperimentSpec {
        subject: "TFT".into(),
        alphas: vec![0.0, 0.5, 1.0],
        k: 40,
        n_rounds: 50,
        master_seed: 7,
        output_dir: out.to_path_buf(),
        ..Default::default()
    }
}

fn read_csv(dir: &Path, name: &str) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(dir.join(name)).unwrap();
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn alpha_sweep_matches_tft_expectations() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = base_spec(&dir.path().join("run"));
    spec.k = 100;
    spec.n_rounds = 100;
    let artifact = run_alpha_sweep(&spec).unwrap();
    assert_eq!(artifact.n_failed, 0);

    let rows = read_csv(&spec.output_dir, "coop_vs_alpha.csv");
    assert_eq!(
        rows[0],
        vec!["alpha", "p_coop", "ci_low", "ci_high", "steady_state", "n_games", "n_failed"]
    );
    let p_coop: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    // TFT copies URND(alpha): alpha=0 leaves only the first-round cooperation
    assert!((p_coop[0] - 0.01).abs() <= 0.03, "alpha 0: {}", p_coop[0]);
    assert!((p_coop[1] - 0.5).abs() <= 0.03, "alpha 0.5: {}", p_coop[1]);
    assert_eq!(p_coop[2], 1.0, "alpha 1: {}", p_coop[2]);

    // SFEM identifies TFT away from the degenerate all-cooperate corner
    let sfem_rows = read_csv(&spec.output_dir, "sfem.csv");
    let weight_of = |alpha: &str, strategy: &str| -> f64 {
        sfem_rows[1..]
            .iter()
            .find(|r| r[0] == alpha && r[1] == strategy)
            .unwrap()[2]
            .parse()
            .unwrap()
    };
    assert!(weight_of("0.5", "TFT") > 0.9);

    // profile: TFT is nice and emulative everywhere
    let profile_rows = read_csv(&spec.output_dir, "profile.csv");
    for r in &profile_rows[1..] {
        if r[1] == "nice" || r[1] == "emulative" {
            let mean: f64 = r[2].parse().unwrap();
            assert_eq!(mean, 1.0, "{} at alpha {}", r[1], r[0]);
        }
        // retaliation is undefined against an all-cooperating opponent
        if r[1] == "retaliatory" && r[0] == "1" {
            assert_eq!(r[2], "");
            assert_eq!(r[5], "0");
        }
    }
}

#[test]
fn always_defect_subject_never_cooperates() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = base_spec(&dir.path().join("run"));
    spec.subject = "AD".into();
    spec.alphas = vec![0.0, 0.5, 1.0];
    run_alpha_sweep(&spec).unwrap();
    let rows = read_csv(&spec.output_dir, "coop_vs_alpha.csv");
    for r in &rows[1..] {
        assert_eq!(r[1], "0", "AD cooperated at alpha {}", r[0]);
    }
}

#[test]
fn grim_cooperates_fully_against_pure_cooperator() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = base_spec(&dir.path().join("run"));
    spec.subject = "GRIM".into();
    spec.alphas = vec![1.0];
    run_alpha_sweep(&spec).unwrap();
    let rows = read_csv(&spec.output_dir, "coop_vs_alpha.csv");
    assert_eq!(rows[1][1], "1");
}

#[test]
fn identical_specs_produce_identical_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec_a = base_spec(&dir.path().join("one"));
    let spec_b = base_spec(&dir.path().join("two"));
    let a = run_alpha_sweep(&spec_a).unwrap();
    let b = run_alpha_sweep(&spec_b).unwrap();
    for (pa, pb) in a.traces_paths.iter().zip(&b.traces_paths) {
        assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
    }
}

#[test]
fn first_traces_are_invariant_to_k() {
    let dir = tempfile::tempdir().unwrap();
    let mut small = base_spec(&dir.path().join("small"));
    small.k = 5;
    small.alphas = vec![0.5];
    let mut large = base_spec(&dir.path().join("large"));
    large.k = 12;
    large.alphas = vec![0.5];
    run_alpha_sweep(&small).unwrap();
    run_alpha_sweep(&large).unwrap();

    let read = |spec: &ExperimentSpec| {
        persist::read_traces(&spec.output_dir.join("traces/alpha_0.5.jsonl")).unwrap()
    };
    let small_traces = read(&small);
    let large_traces = read(&large);
    assert_eq!(small_traces.len(), 5);
    assert_eq!(&large_traces[..5], &small_traces[..]);

    // game seeds come from (master seed, cell id, game index)
    assert_eq!(small_traces[0].seed, derive_seed(7, "alpha=0.5", 0));
}

#[test]
fn window_sweep_forces_ad_opponent_and_reports_steady_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = base_spec(&dir.path().join("run"));
    // a scripted subject that cooperates for 6 rounds then defects for 6
    spec.subject = format!("scripted:{}{}", "C".repeat(6), "D".repeat(6));
    spec.n_rounds = 12;
    spec.k = 8;
    spec.windows = vec![
        ipd_core::MemoryWindow::Rounds(1),
        ipd_core::MemoryWindow::Rounds(5),
        ipd_core::MemoryWindow::Full,
    ];
    let artifact = run_window_sweep(&spec).unwrap();
    assert_eq!(artifact.n_failed, 0);

    for path in &artifact.traces_paths {
        for trace in persist::read_traces(path).unwrap() {
            assert!(trace.actions(Player::B).all(|a| a == Action::Defect));
            assert_eq!(trace.label(Player::B), "AD");
        }
    }

    let rows = read_csv(&spec.output_dir, "window_steady_state.csv");
    assert_eq!(
        rows[0],
        vec!["window", "steady_state", "ci_low", "ci_high", "n_games", "n_failed"]
    );
    assert_eq!(rows.len(), 4); // three windows
    let windows: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(windows, vec!["1", "5", "full"]);

    // independent recomputation from the stored JSONL: the last 10 rounds
    // of CCCCCCDDDDDD are rounds 3-12, with 4 cooperations
    let traces = persist::read_traces(&artifact.traces_paths[0]).unwrap();
    let curve = stats::coop_prob_per_round(&traces, Player::A).unwrap();
    let expected = stats::steady_state(&curve, 10);
    let reported: f64 = rows[1][1].parse().unwrap();
    assert_eq!(reported, expected);
    assert!((expected - 0.4).abs() < 1e-12);
}

#[test]
fn replay_file_subject_replays_recorded_actions() {
    use ipd_core::experiment::{parse_subject, AgentFactory};
    use ipd_core::game::{play_game, GameSetup};

    // record a few games, then drive a new sweep from player B's actions
    let dir = tempfile::tempdir().unwrap();
    let mut spec = base_spec(&dir.path().join("record"));
    spec.k = 3;
    spec.n_rounds = 12;
    spec.alphas = vec![0.4];
    run_alpha_sweep(&spec).unwrap();
    let recorded_path = spec.output_dir.join("traces/alpha_0.4.jsonl");
    let recorded = persist::read_traces(&recorded_path).unwrap();

    let subject = parse_subject(&format!("replay:{}:B", recorded_path.display())).unwrap();
    let factory = AgentFactory::new(&subject, None).unwrap();
    for g in 0..recorded.len() as u32 {
        let mut agent = factory.agent_for_game(g);
        let mut opponent = ipd_core::Agent::strategy(StrategyKind::AlwaysCooperate);
        let trace = play_game(&mut agent, &mut opponent, &GameSetup::new(12, 5)).unwrap();
        let replayed: Vec<Action> = trace.actions(Player::A).collect();
        let original: Vec<Action> = recorded[g as usize].actions(Player::B).collect();
        assert_eq!(replayed, original, "game {g}");
    }
    // transcripts wrap around modulo the file length
    let mut agent = factory.agent_for_game(recorded.len() as u32);
    let mut opponent = ipd_core::Agent::strategy(StrategyKind::AlwaysCooperate);
    let trace = play_game(&mut agent, &mut opponent, &GameSetup::new(12, 5)).unwrap();
    let wrapped: Vec<Action> = trace.actions(Player::A).collect();
    let first: Vec<Action> = recorded[0].actions(Player::B).collect();
    assert_eq!(wrapped, first);
}

#[test]
fn window_sweep_rejects_strategy_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let spec = base_spec(&dir.path().join("run"));
    assert!(run_window_sweep(&spec).is_err());
}

#[test]
fn temperature_sweep_with_identical_scripted_agent_correlates_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = base_spec(&dir.path().join("run"));
    spec.subject = "scripted:CCDCDDCD".into();
    spec.n_rounds = 8;
    spec.k = 6;
    spec.alphas = vec![0.0, 0.5, 1.0];
    spec.temperatures = vec![0.1, 0.7, 1.0];
    let artifact = run_temperature_sweep(&spec).unwrap();
    assert_eq!(artifact.n_failed, 0);

    let rows = read_csv(&spec.output_dir, "temperature_correlation.csv");
    assert_eq!(rows[0], vec!["temperature_a", "temperature_b", "pearson"]);
    assert_eq!(rows.len(), 4); // three temperature pairs
    for r in &rows[1..] {
        assert_eq!(r[2], "1");
    }

    let coop = read_csv(&spec.output_dir, "temperature_coop.csv");
    assert_eq!(coop.len(), 1 + 9); // header + 3 temperatures x 3 alphas
}

#[test]
fn comprehension_experiment_with_oracle_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = base_spec(&dir.path().join("run"));
    spec.subject = "oracle".into();
    spec.comprehension_games = 2;
    spec.n_rounds = 15;
    let artifact = run_comprehension_experiment(&spec).unwrap();
    assert_eq!(artifact.n_failed, 0);

    let rows = read_csv(&spec.output_dir, "comprehension.csv");
    assert_eq!(
        rows[0],
        vec!["template", "category", "n_asked", "n_correct", "accuracy", "ci_low", "ci_high"]
    );
    assert_eq!(rows.len(), 9); // eight templates
    for r in &rows[1..] {
        assert_eq!(r[4], "1", "template {} below perfect accuracy", r[0]);
    }
    // traces were persisted alongside
    let traces = persist::read_traces(&artifact.traces_paths[0]).unwrap();
    assert_eq!(traces.len(), 2);
    assert_eq!(traces[0].label(Player::B), StrategyKind::Random.id());
}

#[test]
fn comprehension_rejects_strategy_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = base_spec(&dir.path().join("run"));
    spec.subject = "GRIM".into();
    assert!(run_comprehension_experiment(&spec).is_err());
}

#[test]
fn replay_recomputes_from_traces_alone() {
    let dir = tempfile::tempdir().unwrap();
    let spec = base_spec(&dir.path().join("run"));
    let artifact = run_alpha_sweep(&spec).unwrap();

    // replay into a fresh directory and compare all summary CSV bytes
    let out = dir.path().join("replayed");
    let replayed = replay_dir(&spec.output_dir, &out).unwrap();
    for path in artifact
        .summary_paths
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
    {
        let name = path.file_name().unwrap();
        assert_eq!(
            std::fs::read(path).unwrap(),
            std::fs::read(out.join(name)).unwrap(),
            "{name:?} changed under replay"
        );
    }
    assert_eq!(replayed.n_failed, 0);
}

#[test]
fn replay_of_handwritten_traces_matches_hand_computation() {
    // three rounds: A = C, D, D vs B = D, C, C under default payoffs
    let dir = tempfile::tempdir().unwrap();
    let line = r#"{"schema_version":1,"agent_labels":["X","Y"],"seed":1,"n_rounds":3,"rounds":[{"i":1,"a":"Cooperate","b":"Defect","pa":0,"pb":5},{"i":2,"a":"Defect","b":"Cooperate","pa":5,"pb":0},{"i":3,"a":"Defect","b":"Cooperate","pa":5,"pb":0}],"failed":false}"#;
    let path = dir.path().join("hand.jsonl");
    std::fs::write(&path, format!("{line}\n")).unwrap();

    let traces = persist::read_traces(&path).unwrap();
    let curve = stats::coop_prob_per_round(&traces, Player::A).unwrap();
    assert!((curve.overall_mean - 1.0 / 3.0).abs() < 1e-12);

    let profile = ipd_core::metrics::aggregate_profile(&traces, Player::A).unwrap();
    // niceness: A's first defection (round 2) comes after B's (round 1)
    assert_eq!(profile.nice.unwrap().mean, 1.0);
    // forgiveness: one countable B defection (t=1, unforgiven since A2=D)
    // plus one penalty (B cooperates at round 2 after defecting earlier and
    // A defects from round 2 to the end) -> 0/2
    assert_eq!(profile.forgiving.unwrap().mean, 0.0);
    // retaliation: B's round-1 defection is the only provocation; A reacts
    assert_eq!(profile.retaliatory.unwrap().mean, 1.0);
    // troublemaking: occasions at t=1 and t=3, uncalled defection at t=3
    assert_eq!(profile.troublemaking.unwrap().mean, 0.5);
    // emulation: A2=D copies B1=D; A3=D misses B2=C -> 1/2
    assert_eq!(profile.emulative.unwrap().mean, 0.5);
}

#[test]
fn manifest_records_config_echo_and_cells() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "subject = \"GRIM\"\nalphas = [0.5]\nk = 3\nn_rounds = 4\noutput_dir = \"{}\"\n",
        dir.path().join("run").display()
    );
    let spec = ExperimentSpec::from_toml(&text).unwrap();
    let artifact = run_alpha_sweep(&spec).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&artifact.manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "alpha_sweep");
    assert_eq!(manifest["config_text"], serde_json::json!(text));
    assert_eq!(manifest["cells"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["cells"][0]["n_games"], 3);
    assert_eq!(manifest["spec"]["subject"], "GRIM");
}
