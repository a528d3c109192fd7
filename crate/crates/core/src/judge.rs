//! Evaluator prompts, verdict parsing, intent-outcome consistency (C_IO)
//! and post-game debriefing, over a pluggable text-completion client.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentEndpoint, AgentError, Turn};
use crate::log::{EpisodeLog, Outcome};
use crate::protocol::{step_prompt, system_prompt, feedback as fb};
use crate::scene::SceneConfig;

pub const CONSISTENCY_TEMPLATE: &str = r#"You are a reasoning consistency evaluator for a multimodal agent benchmark. Your task is to determine whether the agent's intention (described in the "rationale") matches the actual interaction result (described in the "response").

Specifically, you are given:
- The agent's rationale for why it attempted an interaction, describing its goal or belief about the current environment.
- The response from the environment after the interaction, which includes the actual result (e.g., what item was interacted with and what was obtained).

Your goal is to determine whether the object the agent intended to interact with matches the object that was actually interacted with according to the response.

If the agent tried to interact with object A (e.g., a microwave), but the response shows interaction with object B (e.g., a box), and B was not the intended target, this is considered an inconsistent interaction (i.e., accidental success or misaligned action).

Special Case: If the response is "Escaped successfully!", you should check whether the agent's rationale explicitly or implicitly indicates the intention to escape (e.g., trying to open the door to leave). If not, treat it as inconsistent.

You must give your feedback in the following JSON-string format and DON'T say anything else:
{
    "Consistency": 1 | 0
}

Where:
- 1 means the rationale and interaction are consistent (i.e., aligned).
- 0 means the interaction appears to be accidental, mismatched, or unintended.

Respond only with Consistency: 1 or Consistency: 0.

---

Example 1:
rationale: Moving closer to the microwave to try interacting with it one last time using '1264'. If this doesn't work, I'll need to explore other areas.
response: You used the correct password to unlock the box... You did not interact with any objects in the last step.
Expected output: Consistency: 0

Example 2:
rationale: I’ll try using the key I just picked up on the door. Let’s see if I can escape now.
response: Escaped successfully!
Expected output: Consistency: 1

Example 3:
rationale: I want to check if the small box has any useful items inside.
response: You opened the box and found a screwdriver.
Expected output: Consistency: 1

Please score the following interaction:
rationale: {rationale}
response(s): {response}"#;

pub const DEBRIEF_INTRO: &str = "You have successfully escaped the room. Now, reconstruct the entire story based on the items you discovered during the game and the overall environment you observed. Follow the steps below to guide your recollection and piece together the full narrative.";

pub const DEBRIEF_STEPS: [&str; 3] = [
    "Step 1: Describe the room environment\n\"Begin by describing the room where you started. What did the room look like? What was the overall atmosphere? Were there any notable features, such as furniture, lighting, or strange objects? Include sensory details like smells, sounds, and the arrangement of the room. This will help set the scene for the story.\"",
    "Step 2: Recall the items that may contain information or clues\n\"Think back to the objects you found throughout the game. What items did you come across? Were any of them unusual or seemed important? These could include physical items like keys, notes, or devices, or even abstract clues like symbols or markings on the wall. Reflect on how each item might have connected to the next step in your escape.\"",
    "Step 3: Piece together the whole story\n\"Now, use the information from the room description and the items you've found to piece together the full story. What was the purpose of the room? Who or what might have created the escape challenge, and why? What was the sequence of events that led you to the escape? Try to connect the dots between the environment, the clues, and the items you encountered, and reconstruct the narrative from start to finish.\"",
];

pub const RUBRIC_VERSION: &str = "debrief-rubric v1";

pub const RUBRIC_TEMPLATE: &str = "[debrief-rubric v1]
You are grading how well a player reconstructed the background story of an escape room game.
Compare the recovered story with the ground-truth story and rate their similarity on a scale from 0 to 5, where 0 means the recovered story is empty or unrelated and 5 means it conveys the whole ground-truth story.
Respond only with Score: followed by a number between 0 and 5.

Ground-truth story:
{groundtruth}

Recovered story:
{recovered}";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JudgeError {
    #[error("judge unavailable: {0}")]
    Unavailable(String),
    #[error("rules line {line}: {message}")]
    Rules { line: usize, message: String },
    #[error("unusable reply: {0:?}")]
    Unusable(String),
    #[error("the log has no successful interactions; C_IO is undefined")]
    NoSuccessfulInteractions,
    #[error("debriefing needs an escaped episode, this one is {0}")]
    NotEscaped(String),
    #[error("log is for scene {log}, not {scene}")]
    SceneMismatch { log: String, scene: String },
    #[error("player failed: {0}")]
    Player(#[from] AgentError),
}

/// Text completion: one prompt in, one reply out.
pub trait JudgeClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, JudgeError>;
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The consistency prompt for one interaction. Slot values are folded
/// onto single lines.
pub fn build_consistency_prompt(rationale: &str, responses: &str) -> String {
    CONSISTENCY_TEMPLATE
        .replace("{rationale}", &one_line(rationale))
        .replace("{response}", &one_line(responses))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyVerdict {
    pub step_index: u32,
    pub verdict: u8,
    pub raw_reply: String,
}

/// Accepts `{"Consistency": 0|1}` and `Consistency: 0|1`, nothing else.
pub fn parse_consistency(reply: &str) -> Result<u8, JudgeError> {
    let t = reply.trim();
    let t = t
        .strip_prefix("```json")
        .or_else(|| t.strip_prefix("```"))
        .and_then(|s| s.strip_suffix("```"))
        .map_or(t, str::trim);
    if t.starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(t).map_err(|_| JudgeError::Unusable(reply.into()))?;
        let obj = v.as_object().filter(|o| o.len() == 1);
        return match obj.and_then(|o| o.get("Consistency")).and_then(|c| c.as_u64()) {
            Some(c @ (0 | 1)) => Ok(c as u8),
            _ => Err(JudgeError::Unusable(reply.into())),
        };
    }
    let re = Regex::new(r"^Consistency\s*:\s*([01])$").expect("static pattern");
    re.captures(t)
        .map(|c| if &c[1] == "1" { 1 } else { 0 })
        .ok_or_else(|| JudgeError::Unusable(reply.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub step_index: u32,
    pub raw_reply: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CioReport {
    pub scene_id: String,
    pub agent: String,
    /// Mean verdict over usable replies; `None` when none were usable.
    pub cio: Option<f64>,
    /// `consistent/evaluated`.
    pub exact: String,
    pub n_successful: usize,
    pub n_evaluated: usize,
    pub n_excluded: usize,
    pub verdicts: Vec<ConsistencyVerdict>,
    pub excluded: Vec<Exclusion>,
}

/// Judges every successful grab of an episode, at most `in_flight`
/// requests at a time.
pub fn compute_cio(log: &EpisodeLog, client: &dyn JudgeClient, in_flight: usize) -> Result<CioReport, JudgeError> {
    let jobs: Vec<(u32, String)> = log
        .steps
        .iter()
        .filter(|s| s.grab_succeeded)
        .map(|s| (s.index, build_consistency_prompt(&s.rationale, &s.feedback)))
        .collect();
    if jobs.is_empty() {
        return Err(JudgeError::NoSuccessfulInteractions);
    }
    let replies: Vec<Mutex<Option<Result<String, JudgeError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = in_flight.clamp(1, jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let r = client.complete(&jobs[i].1);
                *replies[i].lock().expect("reply slot") = Some(r);
            });
        }
    });

    let mut verdicts = Vec::new();
    let mut excluded = Vec::new();
    for ((step_index, _), slot) in jobs.iter().zip(replies) {
        let reply = slot.into_inner().expect("reply slot").expect("every job ran")?;
        match parse_consistency(&reply) {
            Ok(v) => verdicts.push(ConsistencyVerdict {
                step_index: *step_index,
                verdict: v,
                raw_reply: reply,
            }),
            Err(_) => excluded.push(Exclusion {
                step_index: *step_index,
                raw_reply: reply,
            }),
        }
    }
    let ones = verdicts.iter().filter(|v| v.verdict == 1).count();
    let n = verdicts.len();
    Ok(CioReport {
        scene_id: log.header.scene_id.clone(),
        agent: log.header.agent.clone(),
        cio: (n > 0).then(|| ones as f64 / n as f64),
        exact: format!("{ones}/{n}"),
        n_successful: jobs.len(),
        n_evaluated: n,
        n_excluded: excluded.len(),
        verdicts,
        excluded,
    })
}

/// The three debriefing questions, the first one carrying the introduction.
pub fn debrief_prompts() -> [String; 3] {
    [
        format!("{DEBRIEF_INTRO}\n\n{}", DEBRIEF_STEPS[0]),
        DEBRIEF_STEPS[1].to_string(),
        DEBRIEF_STEPS[2].to_string(),
    ]
}

pub fn build_rubric_prompt(groundtruth: &str, recovered: &str) -> String {
    RUBRIC_TEMPLATE
        .replace("{groundtruth}", groundtruth)
        .replace("{recovered}", recovered)
}

/// Accepts `Score: N` or `{"Score": N}` with N in [0, 5].
pub fn parse_score(reply: &str) -> Result<f64, JudgeError> {
    let t = reply.trim();
    let value = if t.starts_with('{') {
        serde_json::from_str::<serde_json::Value>(t)
            .ok()
            .and_then(|v| v.get("Score").and_then(|s| s.as_f64()))
    } else {
        let re = Regex::new(r"^Score\s*:\s*([0-9]+(?:\.[0-9]+)?)$").expect("static pattern");
        re.captures(t).and_then(|c| c[1].parse().ok())
    };
    value
        .filter(|v| (0.0..=5.0).contains(v))
        .ok_or_else(|| JudgeError::Unusable(reply.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebriefResult {
    pub scene_id: String,
    pub agent: String,
    pub recovered_story: String,
    /// `None` when the judge's reply was unusable.
    pub score: Option<f64>,
    pub raw_reply: String,
    pub rubric: String,
}

/// The conversation a debriefing player is primed with: each step prompt
/// tagged with the frame the player saw, followed by its action.
pub fn debrief_history(log: &EpisodeLog) -> Vec<Turn> {
    let mut turns = Vec::new();
    let mut feedback = fb::NO_INTERACTION.to_string();
    let mut bag = fb::EMPTY_BAG.to_string();
    let mut frame = crate::world::frame_ref(0);
    for s in log.prefix.iter().chain(&log.steps) {
        turns.push(Turn::user(format!("[frame {frame}]\n{}", step_prompt(&feedback, &bag))));
        turns.push(Turn::assistant(s.raw_action.clone()));
        feedback = s.feedback.clone();
        bag = s.bag_description.clone();
        frame = s.frame_ref.clone();
    }
    turns.push(Turn::user(format!("[frame {frame}]\n{feedback}")));
    turns
}

/// Asks the player to reconstruct the story, then has the judge score it
/// against the scene's story on a 0 to 5 scale.
pub fn run_debriefing(
    log: &EpisodeLog,
    scene: &SceneConfig,
    player: &mut dyn AgentEndpoint,
    client: &dyn JudgeClient,
) -> Result<DebriefResult, JudgeError> {
    if log.outcome != Outcome::Escaped {
        let state = serde_json::to_value(log.outcome).ok().and_then(|v| v.as_str().map(String::from));
        return Err(JudgeError::NotEscaped(state.unwrap_or_default()));
    }
    if log.header.scene_id != scene.scene_id {
        return Err(JudgeError::SceneMismatch {
            log: log.header.scene_id.clone(),
            scene: scene.scene_id.clone(),
        });
    }
    player.start_episode(&system_prompt(), &debrief_history(log))?;
    let mut parts = Vec::new();
    for q in debrief_prompts() {
        parts.push(player.ask(&q)?);
    }
    player.end_episode();
    let recovered = parts
        .iter()
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("\n\n");
    let reply = client.complete(&build_rubric_prompt(&scene.story_text, &recovered))?;
    Ok(DebriefResult {
        scene_id: scene.scene_id.clone(),
        agent: log.header.agent.clone(),
        recovered_story: recovered,
        score: parse_score(&reply).ok(),
        raw_reply: reply,
        rubric: RUBRIC_VERSION.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebriefSummary {
    pub average_score: Option<f64>,
    pub scored: usize,
    pub unusable: usize,
}

pub fn summarize_debriefs(results: &[DebriefResult]) -> DebriefSummary {
    let scores: Vec<f64> = results.iter().filter_map(|r| r.score).collect();
    DebriefSummary {
        average_score: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
        scored: scores.len(),
        unusable: results.len() - scores.len(),
    }
}

#[derive(Debug, Clone)]
enum Rule {
    ConsistencyMention,
    DebriefOverlap,
    When(Regex, String),
}

/// Deterministic judge driven by a rules file. Rules are tried in order
/// and the first one that applies answers; with no match the reply is
/// empty (and therefore unusable).
///
/// ```text
/// # comment
/// builtin consistency-mention
/// builtin debrief-overlap
/// when <regex> reply <text>
/// ```
#[derive(Debug, Clone)]
pub struct StubJudge {
    rules: Vec<Rule>,
}

impl Default for StubJudge {
    fn default() -> Self {
        Self {
            rules: vec![Rule::ConsistencyMention, Rule::DebriefOverlap],
        }
    }
}

impl StubJudge {
    pub fn from_rules(text: &str) -> Result<Self, JudgeError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| JudgeError::Rules { line: i + 1, message };
            if let Some(name) = line.strip_prefix("builtin ") {
                rules.push(match name.trim() {
                    "consistency-mention" => Rule::ConsistencyMention,
                    "debrief-overlap" => Rule::DebriefOverlap,
                    other => return Err(err(format!("unknown builtin {other:?}"))),
                });
            } else if let Some(rest) = line.strip_prefix("when ") {
                let (pattern, reply) = rest
                    .split_once(" reply ")
                    .ok_or_else(|| err("expected `when <regex> reply <text>`".into()))?;
                let re = Regex::new(pattern.trim()).map_err(|e| err(e.to_string()))?;
                rules.push(Rule::When(re, reply.trim().replace("\\n", "\n")));
            } else {
                return Err(err(format!("unrecognized rule {line:?}")));
            }
        }
        Ok(Self { rules })
    }
}

fn slot<'a>(prompt: &'a str, label: &str) -> Option<&'a str> {
    prompt.lines().rev().find_map(|l| l.strip_prefix(label))
}

fn words(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// 1 when the rationale names an object the response reports, or, for an
/// escape, mentions leaving.
fn mention_verdict(rationale: &str, response: &str) -> u8 {
    let said = words(rationale);
    if response.contains(fb::ESCAPED) {
        let intent = ["door", "exit", "escape", "leave", "out"];
        return u8::from(intent.iter().any(|w| said.contains(*w)));
    }
    let id_re = Regex::new(r"\b([a-z]+)_\d+\b").expect("static pattern");
    let named = id_re.captures_iter(response).any(|c| {
        let id = c[0].to_lowercase();
        said.contains(&id) || said.contains(&c[1].to_lowercase())
    });
    u8::from(named)
}

fn overlap_score(truth: &str, recovered: &str) -> u32 {
    if recovered.trim().is_empty() {
        return 0;
    }
    if recovered.trim() == truth.trim() {
        return 5;
    }
    let t = words(truth);
    if t.is_empty() {
        return 0;
    }
    let hit = words(recovered).intersection(&t).count();
    ((5 * hit) as f64 / t.len() as f64).round() as u32
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let a = text.find(start)? + start.len();
    let rest = &text[a..];
    Some(&rest[..rest.find(end)?])
}

impl JudgeClient for StubJudge {
    fn complete(&self, prompt: &str) -> Result<String, JudgeError> {
        for rule in &self.rules {
            match rule {
                Rule::ConsistencyMention if prompt.starts_with(&CONSISTENCY_TEMPLATE[..60]) => {
                    let rationale = slot(prompt, "rationale: ").unwrap_or("");
                    let response = slot(prompt, "response(s): ").unwrap_or("");
                    return Ok(format!("Consistency: {}", mention_verdict(rationale, response)));
                }
                Rule::DebriefOverlap if prompt.starts_with("[debrief-rubric v1]") => {
                    let truth = between(prompt, "Ground-truth story:\n", "\n\nRecovered story:\n").unwrap_or("");
                    let recovered = prompt.split_once("\n\nRecovered story:\n").map_or("", |(_, r)| r);
                    return Ok(format!("Score: {}", overlap_score(truth, recovered)));
                }
                Rule::When(re, reply) if re.is_match(prompt) => return Ok(reply.clone()),
                _ => {}
            }
        }
        Ok(String::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consistency_shapes() {
        assert_eq!(parse_consistency(r#"{"Consistency": 1}"#).unwrap(), 1);
        assert_eq!(parse_consistency("Consistency: 0").unwrap(), 0);
        assert_eq!(parse_consistency("```json\n{\"Consistency\": 0}\n```").unwrap(), 0);
        assert!(parse_consistency("The agent seems aligned.").is_err());
        assert!(parse_consistency(r#"{"Consistency": 2}"#).is_err());
        assert!(parse_consistency("Consistency: 1 because").is_err());
    }

    #[test]
    fn empty_rationale_still_fills_the_slot() {
        let p = build_consistency_prompt("", "Escaped successfully!");
        assert!(p.ends_with("rationale: \nresponse(s): Escaped successfully!"));
    }

    #[test]
    fn scores_are_bounded() {
        assert_eq!(parse_score("Score: 4").unwrap(), 4.0);
        assert_eq!(parse_score(r#"{"Score": 2.5}"#).unwrap(), 2.5);
        assert!(parse_score("Score: 7").is_err());
        assert!(parse_score("pretty good").is_err());
    }

    #[test]
    fn rules_file_parses_and_orders() {
        let judge = StubJudge::from_rules("# test\nwhen (?m)^rationale: open the microwave reply Consistency: 0\nbuiltin consistency-mention\n").unwrap();
        let p = build_consistency_prompt("open the microwave", "You picked up key_1.");
        assert_eq!(judge.complete(&p).unwrap(), "Consistency: 0");
        let p = build_consistency_prompt("grab key_1 from the shelf", "You picked up key_1.");
        assert_eq!(judge.complete(&p).unwrap(), "Consistency: 1");
        assert!(matches!(StubJudge::from_rules("builtin nope"), Err(JudgeError::Rules { line: 1, .. })));
        assert!(matches!(StubJudge::from_rules("\nwhen ( reply x"), Err(JudgeError::Rules { line: 2, .. })));
    }

    #[test]
    fn stub_scores_debriefs() {
        let judge = StubJudge::default();
        let story = "The baker hid her recipe in the oven.";
        let exact = judge.complete(&build_rubric_prompt(story, story)).unwrap();
        assert_eq!(exact, "Score: 5");
        let empty = judge.complete(&build_rubric_prompt(story, "")).unwrap();
        assert_eq!(empty, "Score: 0");
    }
}
