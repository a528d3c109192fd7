//! Agent endpoints: anything that turns observations into raw protocol text.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{oracle_from_state, OracleError};
use crate::protocol::{AgentAction, Interactions};
use crate::render::Frame;
use crate::world::WorldState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("agent transport failed: {0}")]
    Transport(String),
    #[error("agent returned an unusable reply: {0}")]
    Reply(String),
    #[error("agent does not support {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub content: String,
}

impl Turn {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// A chat transcript with an optional window on the number of turns sent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub system: String,
    pub turns: Vec<Turn>,
    /// Keep only this many trailing turns when sending; `None` sends all.
    pub max_turns: Option<usize>,
}

impl Conversation {
    pub fn new(system: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, turn: Turn) {
        self.turns.push(turn);
    }

    /// The turns to send: the trailing window, starting on a user turn.
    pub fn window(&self) -> &[Turn] {
        let Some(max) = self.max_turns else {
            return &self.turns;
        };
        let mut start = self.turns.len().saturating_sub(max);
        while start < self.turns.len() && self.turns[start].role != Role::User {
            start += 1;
        }
        &self.turns[start..]
    }
}

/// What an agent sees before each step.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    /// 1-based index of the step about to be taken.
    pub step_index: u32,
    pub feedback: &'a str,
    pub bag: &'a str,
    pub step_prompt: &'a str,
    /// Present only when the agent asked for frames.
    pub frame: Option<&'a Frame>,
}

pub trait AgentEndpoint: Send {
    fn name(&self) -> String;

    /// Begins an episode with the system prompt and any injected history.
    fn start_episode(&mut self, system: &str, history: &[Turn]) -> Result<(), AgentError>;

    fn act(&mut self, obs: &Observation<'_>) -> Result<String, AgentError>;

    fn end_episode(&mut self) {}

    fn wants_frames(&self) -> bool {
        false
    }

    /// Read-only ground truth, offered once before the first step. Only
    /// planning baselines use it.
    fn ground_truth(&mut self, _state: &WorldState) -> Result<(), AgentError> {
        Ok(())
    }

    /// A free-form question after the episode, answered with the episode
    /// transcript as context.
    fn ask(&mut self, _prompt: &str) -> Result<String, AgentError> {
        Err(AgentError::Unsupported("questions"))
    }
}

/// Replays fixed raw messages, then sends `{}` forever.
#[derive(Debug, Clone, Default)]
pub struct ScriptedAgent {
    pub name: String,
    pub actions: Vec<String>,
    pub answers: Vec<String>,
    next: usize,
    next_answer: usize,
    pub transcript: Conversation,
}

impl ScriptedAgent {
    pub fn new(actions: Vec<String>) -> Self {
        Self {
            name: "scripted".into(),
            actions,
            ..Self::default()
        }
    }

    pub fn with_answers(mut self, answers: Vec<String>) -> Self {
        self.answers = answers;
        self
    }
}

impl AgentEndpoint for ScriptedAgent {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn start_episode(&mut self, system: &str, history: &[Turn]) -> Result<(), AgentError> {
        self.transcript = Conversation::new(system);
        self.transcript.turns.extend_from_slice(history);
        self.next = 0;
        self.next_answer = 0;
        Ok(())
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<String, AgentError> {
        let raw = self.actions.get(self.next).cloned().unwrap_or_else(|| "{}".into());
        self.next += 1;
        self.transcript.push(Turn::user(obs.step_prompt));
        self.transcript.push(Turn::assistant(raw.clone()));
        Ok(raw)
    }

    fn ask(&mut self, prompt: &str) -> Result<String, AgentError> {
        let reply = self.answers.get(self.next_answer).cloned().unwrap_or_default();
        self.next_answer += 1;
        self.transcript.push(Turn::user(prompt));
        self.transcript.push(Turn::assistant(reply.clone()));
        Ok(reply)
    }
}

/// Plays the ground-truth plan; sends `{}` once the plan is exhausted.
#[derive(Debug, Clone, Default)]
pub struct OracleAgent {
    actions: Vec<String>,
    next: usize,
}

impl OracleAgent {
    pub fn new() -> Self {
        Self::default()
    }
}

impl AgentEndpoint for OracleAgent {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn start_episode(&mut self, _system: &str, _history: &[Turn]) -> Result<(), AgentError> {
        self.actions.clear();
        self.next = 0;
        Ok(())
    }

    fn ground_truth(&mut self, state: &WorldState) -> Result<(), AgentError> {
        self.actions = oracle_from_state(state)?.raw_actions();
        Ok(())
    }

    fn act(&mut self, _obs: &Observation<'_>) -> Result<String, AgentError> {
        let raw = self.actions.get(self.next).cloned().unwrap_or_else(|| "{}".into());
        self.next += 1;
        Ok(raw)
    }
}

/// Seeded baseline: random turns, pitches and short moves, grabbing with a fixed
/// probability. It reads papers it holds and tries any four-digit codes
/// it has seen.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    seed: u64,
    grab_probability: f64,
    rng: ChaCha8Rng,
    /// Pitch implied by the agent's own rotations.
    pitch: f64,
    codes: BTreeSet<String>,
    read: BTreeSet<String>,
    code_re: Regex,
}

impl RandomAgent {
    pub fn new(seed: u64, grab_probability: f64) -> Self {
        Self {
            seed,
            grab_probability: grab_probability.clamp(0.0, 1.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
            pitch: 0.0,
            codes: BTreeSet::new(),
            read: BTreeSet::new(),
            code_re: Regex::new(r"\b\d{4}\b").expect("static pattern"),
        }
    }
}

/// Item ids listed in a bag description (`- id: description` lines).
pub fn bag_ids(bag: &str) -> Vec<String> {
    bag.lines()
        .filter_map(|l| l.strip_prefix("- "))
        .filter_map(|l| l.split(':').next())
        .map(|s| s.trim().to_string())
        .collect()
}

impl AgentEndpoint for RandomAgent {
    fn name(&self) -> String {
        "random".into()
    }

    fn start_episode(&mut self, _system: &str, _history: &[Turn]) -> Result<(), AgentError> {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.pitch = 0.0;
        self.codes.clear();
        self.read.clear();
        Ok(())
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<String, AgentError> {
        for m in self.code_re.find_iter(obs.feedback) {
            self.codes.insert(m.as_str().to_string());
        }
        let held = bag_ids(obs.bag);
        let mut action = AgentAction {
            rotate_right: Some((self.rng.random_range(-90.0..=90.0f64) * 10.0).round() / 10.0),
            rotate_down: Some({
                let target = (self.rng.random_range(-10.0..=40.0f64) * 10.0).round() / 10.0;
                let delta = target - self.pitch;
                self.pitch = target;
                delta
            }),
            move_forward: Some((self.rng.random_range(0.0..=2.5f64) * 100.0).round() / 100.0),
            ..AgentAction::default()
        };
        if self.rng.random_bool(self.grab_probability) {
            action.grab = Some(true);
            let mut inter = Interactions::default();
            if !held.is_empty() && self.rng.random_bool(0.5) {
                inter.use_item_id = Some(held[self.rng.random_range(0..held.len())].clone());
            }
            if !self.codes.is_empty() && self.rng.random_bool(0.5) {
                let codes: Vec<&String> = self.codes.iter().collect();
                inter.input = Some(codes[self.rng.random_range(0..codes.len())].clone());
            }
            if inter.use_item_id.is_some() || inter.input.is_some() {
                action.interactions = Some(inter);
            }
        }
        if let Some(unread) = held.iter().find(|id| !self.read.contains(*id)) {
            self.read.insert(unread.clone());
            action.read = Some(unread.clone());
        }
        action.rationale = Some("exploring".into());
        Ok(action.to_json())
    }
}
