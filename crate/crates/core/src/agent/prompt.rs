//! The three-part game prompt: a fixed system prompt with the rules and
//! payoffs, a contextual prompt listing the windowed history with running
//! totals, and an instructing prompt fixing the reply format.

use serde::{Deserialize, Serialize};

use crate::game::{Action, PayoffMatrix, SeatRound};

/// Marker decoration applied to the prompt text. Sentence content is the
/// same either way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatFormat {
    /// `<s>[INST]` / `<<SYS>>` / `[/INST]` markers embedded in the text.
    PaperLlamaMarkers,
    /// Bare sentences for message-array APIs.
    #[default]
    PlainMessages,
}

/// Which instructing prompt to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstructingVariant {
    #[default]
    Plain,
    CotKojima,
    CotZhou,
}

impl InstructingVariant {
    pub fn parse(s: &str) -> crate::error::Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "cot_kojima" => Ok(Self::CotKojima),
            "cot_zhou" => Ok(Self::CotZhou),
            other => Err(crate::error::Error::Config(format!(
                "unknown instructing variant {other:?}"
            ))),
        }
    }
}

/// How many recent rounds the contextual prompt shows. Serialized as a
/// plain integer or the string "full".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemoryWindow {
    Rounds(u32),
    Full,
}

impl Default for MemoryWindow {
    fn default() -> Self {
        MemoryWindow::Rounds(10)
    }
}

impl Serialize for MemoryWindow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MemoryWindow::Rounds(n) => s.serialize_u32(*n),
            MemoryWindow::Full => s.serialize_str("full"),
        }
    }
}

impl<'de> Deserialize<'de> for MemoryWindow {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct WindowVisitor;
        impl serde::de::Visitor<'_> for WindowVisitor {
            type Value = MemoryWindow;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a round count or \"full\"")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                u32::try_from(v)
                    .map(MemoryWindow::Rounds)
                    .map_err(|_| E::custom("window too large"))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                u32::try_from(v)
                    .map(MemoryWindow::Rounds)
                    .map_err(|_| E::custom("window must be a non-negative round count"))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                if v.eq_ignore_ascii_case("full") {
                    Ok(MemoryWindow::Full)
                } else {
                    v.parse().map(MemoryWindow::Rounds).map_err(|_| {
                        E::custom(format!("expected a round count or \"full\", got {v:?}"))
                    })
                }
            }
        }
        d.deserialize_any(WindowVisitor)
    }
}

impl MemoryWindow {
    pub fn validate(&self) -> crate::error::Result<()> {
        match self {
            MemoryWindow::Rounds(0) => Err(crate::error::Error::Config(
                "memory window must be >= 1 or \"full\"".into(),
            )),
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for MemoryWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MemoryWindow::Rounds(n) => write!(f, "{n}"),
            MemoryWindow::Full => f.write_str("full"),
        }
    }
}

/// The visible suffix of the history under a memory window.
pub fn window_slice(prefix: &[SeatRound], window: MemoryWindow) -> &[SeatRound] {
    match window {
        MemoryWindow::Full => prefix,
        MemoryWindow::Rounds(m) => {
            let m = m as usize;
            &prefix[prefix.len().saturating_sub(m)..]
        }
    }
}

/// 1-based round index of the first visible round.
pub fn window_start_round(prefix_len: usize, window: MemoryWindow) -> u32 {
    let shown = match window {
        MemoryWindow::Full => prefix_len,
        MemoryWindow::Rounds(m) => prefix_len.min(m as usize),
    };
    (prefix_len - shown) as u32 + 1
}

/// The three prompt parts for one decision or question.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptBundle {
    pub system_text: String,
    pub contextual_text: String,
    pub instructing_text: String,
}

impl PromptBundle {
    /// The full prompt as a single text, parts separated by blank lines.
    pub fn concatenated(&self) -> String {
        format!(
            "{}\n\n{}\n\n{}",
            self.system_text, self.contextual_text, self.instructing_text
        )
    }
}

/// The fixed system prompt: rules, payoff lines generated from the matrix,
/// round count, and the long-run objective.
pub fn build_system_prompt(m: &PayoffMatrix, n_rounds: u32, fmt: ChatFormat) -> String {
    let mut out = String::new();
    if fmt == ChatFormat::PaperLlamaMarkers {
        out.push_str("<s>[INST]\n<<SYS>>\n\n");
    }
    out.push_str("Context: Player A and player B are playing a multi-round game.\n");
    out.push_str(
        "At each turn player A and player B simultaneously perform one of the following actions: {\"Cooperate\", \"Defect\"}\n",
    );
    out.push('\n');
    out.push_str("The payoffs for each combination of chosen actions are the following:\n");
    out.push_str(&payoff_line(Action::Defect, Action::Defect, m));
    out.push_str(&payoff_line(Action::Defect, Action::Cooperate, m));
    out.push_str(&payoff_line(Action::Cooperate, Action::Defect, m));
    out.push_str(&payoff_line(Action::Cooperate, Action::Cooperate, m));
    out.push('\n');
    out.push_str(&format!(
        "They will play a total of {n_rounds} rounds of this game.\n"
    ));
    out.push('\n');
    out.push_str(
        "Remember that a player's objective is to get the highest possible number of points in the long run.",
    );
    if fmt == ChatFormat::PaperLlamaMarkers {
        out.push_str("\n\n<<SYS>>");
    }
    out
}

fn payoff_line(a: Action, b: Action, m: &PayoffMatrix) -> String {
    let (pa, pb) = m.payoff(a, b);
    format!(
        "If A plays \"{a}\" and B plays \"{b}\", A collects {pa} points and B collects {pb} points.\n"
    )
}

/// The contextual prompt for the given game state. History lines and the
/// "In total" counts cover only the rounds visible in the window.
pub fn build_contextual_prompt(
    prefix: &[SeatRound],
    window: MemoryWindow,
    current_round: u32,
) -> String {
    debug_assert_eq!(current_round as usize, prefix.len() + 1);
    let shown = window_slice(prefix, window);
    let start_round = window_start_round(prefix.len(), window);

    let mut out = String::new();
    if !shown.is_empty() {
        out.push_str(&format!(
            "The history of the game in the last {} rounds is the following:\n\n",
            shown.len()
        ));
        for (offset, r) in shown.iter().enumerate() {
            let round = start_round + offset as u32;
            out.push_str(&format!(
                "Round {round}: A played \"{}\" and B played \"{}\" A collected {} points and B collected {} points.\n",
                r.own, r.opp, r.own_points, r.opp_points
            ));
        }
        out.push('\n');
    }

    let coop_a = shown.iter().filter(|r| r.own.is_cooperate()).count();
    let coop_b = shown.iter().filter(|r| r.opp.is_cooperate()).count();
    let defect_a = shown.len() - coop_a;
    let defect_b = shown.len() - coop_b;
    let points_a: i64 = shown.iter().map(|r| r.own_points).sum();
    let points_b: i64 = shown.iter().map(|r| r.opp_points).sum();

    out.push_str(&format!(
        "In total, A chose \"Cooperate\" {coop_a} times and chose \"Defect\" {defect_a} times, B chose \"Cooperate\" {coop_b} times and chose \"Defect\" {defect_b} times.\n",
    ));
    out.push_str(&format!(
        "In total, A collected {points_a} points and B collected {points_b} points.\n"
    ));
    out.push('\n');
    out.push_str(&format!("Current round: {current_round}."));
    out
}

const REPLY_FORMAT: &str = "Remember to use only the following JSON format:\n{\"action\": <ACTION_of_A>, \"reason\": <YOUR_REASON>}";
const ASK_ACTION: &str = "Answer saying which action player A should play.";
const FORMAT_REMINDER: &str = "Remember to answer using the right format.";
const KOJIMA_SUFFIX: &str = "Let\u{2019}s think step by step";
const ZHOU_SUFFIX: &str =
    "Let's work this out in a step-by-step way to be sure we have the right answer";

/// The instructing prompt in the requested variant. The CoT variants pack
/// the base sentences onto adjacent lines and append their trigger sentence
/// after a blank line.
pub fn build_instructing_prompt(variant: InstructingVariant, fmt: ChatFormat) -> String {
    let close = match fmt {
        ChatFormat::PaperLlamaMarkers => "[/INST]",
        ChatFormat::PlainMessages => "",
    };
    match variant {
        InstructingVariant::Plain => {
            format!("{REPLY_FORMAT}\n\n{ASK_ACTION}\n\n{FORMAT_REMINDER}{close}")
        }
        InstructingVariant::CotKojima => {
            format!("{REPLY_FORMAT}\n{ASK_ACTION}\n{FORMAT_REMINDER}{close}\n\n{KOJIMA_SUFFIX}")
        }
        InstructingVariant::CotZhou => {
            format!("{REPLY_FORMAT}\n{ASK_ACTION}\n{FORMAT_REMINDER}{close}\n\n{ZHOU_SUFFIX}")
        }
    }
}

/// The instructing prompt used during comprehension runs: the question
/// replaces the action request and the reply key becomes "answer".
pub fn build_question_prompt(question: &str, fmt: ChatFormat) -> String {
    let close = match fmt {
        ChatFormat::PaperLlamaMarkers => "[/INST]",
        ChatFormat::PlainMessages => "",
    };
    format!(
        "Remember to use only the following JSON format:\n{{\"answer\": <YOUR_ANSWER>}}\n\n{question}\n\n{FORMAT_REMINDER}{close}"
    )
}
