//! Meta-prompting: instantiate the eight question templates against a live
//! game state, query the agent, grade against ground truth, and aggregate
//! per-template accuracy.

use serde_json::Value;

use crate::agent::prompt::{
    build_contextual_prompt, build_question_prompt, build_system_prompt, window_slice,
    window_start_round, ChatFormat, MemoryWindow, PromptBundle,
};
use crate::agent::{parse, Agent};
use crate::error::{Error, Result};
use crate::game::{
    seat_rng, Action, GameTrace, PayoffMatrix, Player, RoundRecord, SeatRound, SeatView,
};
use crate::stats::ci95_proportion;
use crate::strategy::{next_action, StrategyKind};

/// The eight question templates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TemplateName {
    MinMax,
    Actions,
    Payoff,
    Round,
    ActionAt,
    PointsAt,
    ActionCount,
    TotalPoints,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Rules,
    Time,
    State,
}

impl Category {
    pub fn id(self) -> &'static str {
        match self {
            Category::Rules => "Rules",
            Category::Time => "Time",
            Category::State => "State",
        }
    }
}

impl TemplateName {
    pub const ALL: [TemplateName; 8] = [
        TemplateName::MinMax,
        TemplateName::Actions,
        TemplateName::Payoff,
        TemplateName::Round,
        TemplateName::ActionAt,
        TemplateName::PointsAt,
        TemplateName::ActionCount,
        TemplateName::TotalPoints,
    ];

    pub fn id(self) -> &'static str {
        match self {
            TemplateName::MinMax => "min_max",
            TemplateName::Actions => "actions",
            TemplateName::Payoff => "payoff",
            TemplateName::Round => "round",
            TemplateName::ActionAt => "action_i",
            TemplateName::PointsAt => "points_i",
            TemplateName::ActionCount => "n_actions",
            TemplateName::TotalPoints => "n_points",
        }
    }

    pub fn category(self) -> Category {
        match self {
            TemplateName::MinMax | TemplateName::Actions | TemplateName::Payoff => Category::Rules,
            TemplateName::Round | TemplateName::ActionAt | TemplateName::PointsAt => Category::Time,
            TemplateName::ActionCount | TemplateName::TotalPoints => Category::State,
        }
    }
}

/// Canonical answer shapes.
#[derive(Clone, Debug, PartialEq)]
pub enum Answer {
    Int(i64),
    Name(String),
    NameSet(Vec<String>),
}

/// One rendered question with its ground truth, derivable purely from the
/// payoff matrix, the visible window contents, and the current round.
#[derive(Clone, Debug)]
pub struct QuestionInstance {
    pub template: TemplateName,
    pub text: String,
    pub ground_truth: Answer,
}

/// The game state questions are asked about.
#[derive(Clone, Copy, Debug)]
pub struct ComprehensionState<'a> {
    pub matrix: PayoffMatrix,
    pub prefix: &'a [SeatRound],
    pub window: MemoryWindow,
    pub current_round: u32,
}

const PLAYERS: [Player; 2] = [Player::A, Player::B];
const ACTIONS: [Action; 2] = [Action::Cooperate, Action::Defect];

fn seat_action(r: &SeatRound, player: Player) -> Action {
    match player {
        Player::A => r.own,
        Player::B => r.opp,
    }
}

fn seat_points(r: &SeatRound, player: Player) -> i64 {
    match player {
        Player::A => r.own_points,
        Player::B => r.opp_points,
    }
}

/// Expand every template over its parameter space for the given state.
///
/// Time and State questions cover only the rounds visible in the window;
/// their ground truths match the contextual prompt's "In total" lines.
pub fn instantiate(state: &ComprehensionState) -> Vec<QuestionInstance> {
    let mut out = Vec::new();
    let m = &state.matrix;
    let visible = window_slice(state.prefix, state.window);
    let start_round = window_start_round(state.prefix.len(), state.window);

    // Rules: min_max over players x {lowest, highest}
    for player in PLAYERS {
        for (word, value) in [("lowest", m.s), ("highest", m.t)] {
            out.push(QuestionInstance {
                template: TemplateName::MinMax,
                text: format!(
                    "What is the {word} payoff player {player} can get in a single round?"
                ),
                ground_truth: Answer::Int(value),
            });
        }
    }

    // Rules: allowed actions per player
    for player in PLAYERS {
        out.push(QuestionInstance {
            template: TemplateName::Actions,
            text: format!("Which actions is player {player} allowed to play?"),
            ground_truth: Answer::NameSet(vec!["Cooperate".into(), "Defect".into()]),
        });
    }

    // Rules: payoff over players x own action x opponent action
    for player in PLAYERS {
        let other = player.other();
        for p in ACTIONS {
            for q in ACTIONS {
                let value = m.payoff(p, q).0;
                out.push(QuestionInstance {
                    template: TemplateName::Payoff,
                    text: format!(
                        "Which is player {player}'s payoff in a single round if {player} plays \"{p}\" and {other} plays \"{q}\"?"
                    ),
                    ground_truth: Answer::Int(value),
                });
            }
        }
    }

    // Time: current round
    out.push(QuestionInstance {
        template: TemplateName::Round,
        text: "Which is the current round of the game?".into(),
        ground_truth: Answer::Int(state.current_round as i64),
    });

    // Time: per visible round x player
    for (offset, r) in visible.iter().enumerate() {
        let round = start_round + offset as u32;
        for player in PLAYERS {
            out.push(QuestionInstance {
                template: TemplateName::ActionAt,
                text: format!("Which action did player {player} play in round {round}?"),
                ground_truth: Answer::Name(seat_action(r, player).as_str().into()),
            });
            out.push(QuestionInstance {
                template: TemplateName::PointsAt,
                text: format!("How many points did player {player} collect in round {round}?"),
                ground_truth: Answer::Int(seat_points(r, player)),
            });
        }
    }

    // State: action counts and total payoff over the window
    for player in PLAYERS {
        for action in ACTIONS {
            let count = visible
                .iter()
                .filter(|r| seat_action(r, player) == action)
                .count() as i64;
            out.push(QuestionInstance {
                template: TemplateName::ActionCount,
                text: format!("How many times did player {player} choose \"{action}\"?"),
                ground_truth: Answer::Int(count),
            });
        }
        let total: i64 = visible.iter().map(|r| seat_points(r, player)).sum();
        out.push(QuestionInstance {
            template: TemplateName::TotalPoints,
            text: format!("What is player {player}'s current total payoff?"),
            ground_truth: Answer::Int(total),
        });
    }

    out
}

/// Grading outcome; unparseable replies count as incorrect but are tallied
/// separately from wrong answers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradeOutcome {
    Correct,
    Wrong,
    Unparseable,
}

pub fn grade_outcome(instance: &QuestionInstance, reply_text: &str) -> GradeOutcome {
    let Ok(value) = parse::parse_answer(reply_text) else {
        return GradeOutcome::Unparseable;
    };
    let correct = match &instance.ground_truth {
        Answer::Int(expected) => match parse::first_integer(&value) {
            Some(got) => got == *expected,
            None => return GradeOutcome::Unparseable,
        },
        Answer::Name(expected) => match value_text(&value) {
            Some(got) => got.trim().eq_ignore_ascii_case(expected),
            None => return GradeOutcome::Unparseable,
        },
        Answer::NameSet(expected) => match value_text(&value) {
            Some(got) => {
                let got = got.to_ascii_lowercase();
                expected.iter().all(|name| got.contains(&name.to_ascii_lowercase()))
            }
            None => return GradeOutcome::Unparseable,
        },
    };
    if correct {
        GradeOutcome::Correct
    } else {
        GradeOutcome::Wrong
    }
}

/// Spec-facing boolean form of [`grade_outcome`].
pub fn grade(instance: &QuestionInstance, reply_text: &str) -> bool {
    grade_outcome(instance, reply_text) == GradeOutcome::Correct
}

fn value_text(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => Some(
            items
                .iter()
                .filter_map(value_text)
                .collect::<Vec<_>>()
                .join(", "),
        ),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Accuracy tally for one template.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TemplateStats {
    pub n_asked: usize,
    pub n_correct: usize,
    pub n_unparseable: usize,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Per-template accuracy across games, CIs over per-game accuracies.
#[derive(Clone, Debug)]
pub struct GradeReport {
    pub per_template: Vec<(TemplateName, TemplateStats)>,
    /// Pooled accuracy by round index, across games and templates.
    pub per_round_series: Option<Vec<(u32, f64)>>,
    pub n_games: u32,
    /// Set when the agent failed mid-run and the report covers a prefix.
    pub partial: bool,
}

impl GradeReport {
    pub fn stats_for(&self, template: TemplateName) -> Option<&TemplateStats> {
        self.per_template
            .iter()
            .find(|(t, _)| *t == template)
            .map(|(_, s)| s)
    }
}

/// Settings for a comprehension run.
#[derive(Clone, Copy, Debug)]
pub struct ComprehensionRun {
    pub n_games: u32,
    pub n_rounds: u32,
    pub matrix: PayoffMatrix,
    pub window: MemoryWindow,
    pub chat_format: ChatFormat,
    pub seed: u64,
}

impl Default for ComprehensionRun {
    fn default() -> Self {
        ComprehensionRun {
            n_games: 3,
            n_rounds: 100,
            matrix: PayoffMatrix::default(),
            window: MemoryWindow::default(),
            chat_format: ChatFormat::default(),
            seed: 0,
        }
    }
}

/// Play games against an RND opponent, posing every instantiated question
/// at every round as separate requests on the same state; decisions are
/// never contaminated by questions. Returns the graded report and the
/// played traces.
pub fn run_comprehension(
    agent: &mut Agent,
    run: &ComprehensionRun,
) -> Result<(GradeReport, Vec<GameTrace>)> {
    if !agent.supports_questions() {
        return Err(Error::Config(format!(
            "agent {} does not support question answering",
            agent.label()
        )));
    }
    // remote agents see question prompts rendered exactly like their game prompts
    let (window, chat_format) = agent
        .prompt_params()
        .unwrap_or((run.window, run.chat_format));

    let mut outcomes: Vec<(u32, u32, TemplateName, GradeOutcome)> = Vec::new();
    let mut traces = Vec::new();
    let mut partial = false;

    'games: for game in 0..run.n_games {
        let seed = run.seed.wrapping_add(game as u64);
        let mut rng_subject = seat_rng(seed, Player::A);
        let mut rng_opponent = seat_rng(seed, Player::B);
        let mut prefix: Vec<SeatRound> = Vec::new();
        let mut rounds: Vec<RoundRecord> = Vec::new();
        let system_text = build_system_prompt(&run.matrix, run.n_rounds, chat_format);

        for round in 1..=run.n_rounds {
            let state = ComprehensionState {
                matrix: run.matrix,
                prefix: &prefix,
                window,
                current_round: round,
            };
            let contextual_text = build_contextual_prompt(&prefix, window, round);
            for instance in instantiate(&state) {
                let bundle = PromptBundle {
                    system_text: system_text.clone(),
                    contextual_text: contextual_text.clone(),
                    instructing_text: build_question_prompt(&instance.text, chat_format),
                };
                match agent.answer_question(&bundle) {
                    Ok(reply) => outcomes.push((
                        game,
                        round,
                        instance.template,
                        grade_outcome(&instance, &reply),
                    )),
                    Err(e) => {
                        partial = true;
                        eprintln!("comprehension run aborted: {e}");
                        traces.push(finish_trace(rounds, seed, run, agent.label(), true));
                        break 'games;
                    }
                }
            }

            // play the round: subject vs RND
            let view = SeatView { rounds: &prefix, matrix: run.matrix, n_rounds: run.n_rounds };
            let own = match agent.decide(&view, &mut rng_subject) {
                Ok(a) => a,
                Err(e) => {
                    partial = true;
                    eprintln!("comprehension run aborted: {e}");
                    traces.push(finish_trace(rounds, seed, run, agent.label(), true));
                    break 'games;
                }
            };
            // RND ignores history, so an empty view suffices
            let opp_view = SeatView { rounds: &[], matrix: run.matrix, n_rounds: run.n_rounds };
            let opp = next_action(StrategyKind::Random, &opp_view, &mut rng_opponent);
            let (pa, pb) = run.matrix.payoff(own, opp);
            rounds.push(RoundRecord {
                round_index: round,
                action_a: own,
                action_b: opp,
                payoff_a: pa,
                payoff_b: pb,
            });
            prefix.push(SeatRound { own, opp, own_points: pa, opp_points: pb });
        }
        traces.push(finish_trace(rounds, seed, run, agent.label(), false));
    }

    Ok((aggregate(outcomes, run.n_games, partial), traces))
}

fn finish_trace(
    rounds: Vec<RoundRecord>,
    seed: u64,
    run: &ComprehensionRun,
    label: &str,
    failed: bool,
) -> GameTrace {
    GameTrace {
        agent_labels: [label.to_string(), StrategyKind::Random.id()],
        alpha: None,
        seed,
        n_rounds: run.n_rounds,
        rounds,
        failed,
    }
}

fn aggregate(
    outcomes: Vec<(u32, u32, TemplateName, GradeOutcome)>,
    n_games: u32,
    partial: bool,
) -> GradeReport {
    let mut per_template = Vec::new();
    for template in TemplateName::ALL {
        let rows: Vec<_> = outcomes.iter().filter(|(_, _, t, _)| *t == template).collect();
        let n_asked = rows.len();
        let n_correct = rows
            .iter()
            .filter(|(_, _, _, o)| *o == GradeOutcome::Correct)
            .count();
        let n_unparseable = rows
            .iter()
            .filter(|(_, _, _, o)| *o == GradeOutcome::Unparseable)
            .count();
        let accuracy = if n_asked > 0 {
            n_correct as f64 / n_asked as f64
        } else {
            0.0
        };
        // CI over per-game accuracies, matching game-level confidence reporting
        let mut game_acc = Vec::new();
        for game in 0..n_games {
            let g: Vec<_> = rows.iter().filter(|(gi, _, _, _)| *gi == game).collect();
            if !g.is_empty() {
                let correct = g
                    .iter()
                    .filter(|(_, _, _, o)| *o == GradeOutcome::Correct)
                    .count();
                game_acc.push(correct as f64 / g.len() as f64);
            }
        }
        let (ci_low, ci_high) = match game_acc.len() {
            0 => (0.0, 0.0),
            1 => (game_acc[0], game_acc[0]),
            _ => {
                let (_, lo, hi) = ci95_proportion(&game_acc).expect("len checked");
                (lo, hi)
            }
        };
        per_template.push((
            template,
            TemplateStats { n_asked, n_correct, n_unparseable, accuracy, ci_low, ci_high },
        ));
    }

    let max_round = outcomes.iter().map(|(_, r, _, _)| *r).max().unwrap_or(0);
    let mut series = Vec::new();
    for round in 1..=max_round {
        let rows: Vec<_> = outcomes.iter().filter(|(_, r, _, _)| *r == round).collect();
        if !rows.is_empty() {
            let acc = rows
                .iter()
                .filter(|(_, _, _, o)| *o == GradeOutcome::Correct)
                .count() as f64
                / rows.len() as f64;
            series.push((round, acc));
        }
    }

    GradeReport {
        per_template,
        per_round_series: (!series.is_empty()).then_some(series),
        n_games,
        partial,
    }
}

/// Mean accuracy across all templates, weighted by questions asked.
pub fn overall_accuracy(report: &GradeReport) -> f64 {
    let asked: usize = report.per_template.iter().map(|(_, s)| s.n_asked).sum();
    let correct: usize = report.per_template.iter().map(|(_, s)| s.n_correct).sum();
    if asked == 0 {
        0.0
    } else {
        correct as f64 / asked as f64
    }
}
