//! The episode loop and log replay.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentEndpoint, Observation, Turn};
use crate::log::{compute_marks, EpisodeLog, LogHeader, Outcome, StepRecord, LOG_VERSION};
use crate::oracle::oracle_policy;
use crate::protocol::{feedback as fb, step_prompt, system_prompt};
use crate::render::{render_frame, Camera, Frame, RenderError, DEFAULT_SIZE};
use crate::scene::SceneConfig;
use crate::world::{frame_ref, Status, StepOutcome, WorldError, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOptions {
    /// Step budget; defaults to the scene's own limit.
    pub step_limit: Option<u32>,
    /// Raw actions played before the agent takes over. They do not count
    /// against the budget and reach the agent as conversation history.
    pub prefix: Vec<String>,
    /// Where to write frames; nothing is written when `None`.
    pub frames_dir: Option<PathBuf>,
    pub frame_size: u32,
    /// Overrides the agent's own name in the log header.
    pub agent_name: Option<String>,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            step_limit: None,
            prefix: Vec::new(),
            frames_dir: None,
            frame_size: DEFAULT_SIZE,
            agent_name: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("history prefix step {index} ended the episode")]
    PrefixTerminal { index: usize },
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error(transparent)]
    Render(#[from] RenderError),
}

fn record(index: u32, raw: &str, out: &StepOutcome, state: &WorldState, frame: String) -> StepRecord {
    StepRecord {
        index,
        raw_action: raw.to_string(),
        parsed: out.action.clone(),
        parse_error: out.parse_error.clone(),
        rationale: out
            .action
            .as_ref()
            .and_then(|a| a.rationale.clone())
            .unwrap_or_default(),
        feedback: out.feedback.text.clone(),
        bag_description: out.feedback.inventory_description.clone(),
        granted: out.feedback.granted_items.clone(),
        grab_attempted: out.grab_attempted,
        grab_succeeded: out.grab_succeeded,
        pose_after: state.pose,
        room_after: state.current_room,
        status_after: state.status,
        frame_ref: frame,
        distance_moved: out.distance_moved,
    }
}

/// Frame path for an injected history step.
pub fn prefix_frame_ref(index: u32) -> String {
    format!("frames/prefix_{index:04}.png")
}

/// The world after the history prefix, with a fresh budget, plus its records.
pub fn apply_prefix(
    scene: &SceneConfig,
    prefix: &[String],
    step_limit: u32,
) -> Result<(WorldState, Vec<StepRecord>), EpisodeError> {
    let mut world = WorldState::new(scene.clone());
    world.step_limit = u32::MAX;
    let mut records = Vec::with_capacity(prefix.len());
    for (i, raw) in prefix.iter().enumerate() {
        let out = world
            .step_raw(raw)
            .map_err(|_| EpisodeError::PrefixTerminal { index: i + 1 })?;
        if world.status != Status::Running {
            return Err(EpisodeError::PrefixTerminal { index: i + 1 });
        }
        let idx = i as u32 + 1;
        records.push(record(idx, raw, &out, &world, prefix_frame_ref(idx)));
    }
    world.steps_used = 0;
    world.step_limit = step_limit;
    Ok((world, records))
}

/// The oracle's actions up to and including its first room change: a
/// full room-1 solution for history injection.
pub fn room_one_solution(scene: &SceneConfig) -> Option<Vec<String>> {
    let plan = oracle_policy(scene).ok()?;
    let mut world = WorldState::new(scene.clone());
    world.step_limit = u32::MAX;
    let mut out = Vec::new();
    for raw in plan.raw_actions() {
        world.step_raw(&raw).ok()?;
        out.push(raw);
        if world.current_room > 0 {
            return Some(out);
        }
    }
    None
}

fn required_from(world: &WorldState) -> u32 {
    world.scene.rooms[world.current_room..]
        .iter()
        .map(|r| r.chain.required_interaction_count().unwrap_or(0) as u32)
        .sum()
}

fn render(world: &WorldState, size: u32) -> Result<Frame, RenderError> {
    let cam = Camera::agent(world.pose).with_size(size, size)?;
    Ok(render_frame(world, &cam))
}

/// A single episode advanced one raw action at a time. Both the local
/// loop and the session service drive episodes through this type.
#[derive(Debug, Clone)]
pub struct Episode {
    world: WorldState,
    header: LogHeader,
    prefix: Vec<StepRecord>,
    history: Vec<Turn>,
    steps: Vec<StepRecord>,
    feedback: String,
    bag: String,
    abort_reason: Option<String>,
}

impl Episode {
    pub fn new(scene: &SceneConfig, opts: &EpisodeOptions, agent: &str) -> Result<Self, EpisodeError> {
        if scene.rooms.is_empty() {
            return Err(EpisodeError::Scene("scene has no rooms".into()));
        }
        let limit = opts.step_limit.unwrap_or(scene.step_limit);
        let (world, prefix) = apply_prefix(scene, &opts.prefix, limit)?;
        let header = LogHeader {
            log_version: LOG_VERSION,
            scene_id: scene.scene_id.clone(),
            seed: scene.seed,
            agent: opts.agent_name.clone().unwrap_or_else(|| agent.to_string()),
            difficulty: scene.difficulty(),
            group: scene.group(),
            step_limit: limit,
            required_interactions: required_from(&world),
            scene: scene.clone(),
        };
        let mut history = Vec::new();
        let mut feedback = fb::NO_INTERACTION.to_string();
        let mut bag = fb::EMPTY_BAG.to_string();
        for rec in &prefix {
            history.push(Turn::user(step_prompt(&feedback, &bag)));
            history.push(Turn::assistant(rec.raw_action.clone()));
            feedback = rec.feedback.clone();
            bag = rec.bag_description.clone();
        }
        Ok(Self {
            world,
            header,
            prefix,
            history,
            steps: Vec::new(),
            feedback,
            bag,
            abort_reason: None,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn header(&self) -> &LogHeader {
        &self.header
    }

    /// Injected history as conversation turns.
    pub fn history(&self) -> &[Turn] {
        &self.history
    }

    pub fn prefix(&self) -> &[StepRecord] {
        &self.prefix
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    /// The last interaction result shown to the player.
    pub fn feedback(&self) -> &str {
        &self.feedback
    }

    pub fn bag(&self) -> &str {
        &self.bag
    }

    pub fn step_prompt(&self) -> String {
        step_prompt(&self.feedback, &self.bag)
    }

    /// Reference of the frame the player currently sees.
    pub fn frame_ref(&self) -> String {
        frame_ref(self.world.steps_used)
    }

    pub fn outcome(&self) -> Option<Outcome> {
        if self.abort_reason.is_some() {
            return Some(Outcome::Aborted);
        }
        match self.world.status {
            Status::Running => None,
            Status::Escaped => Some(Outcome::Escaped),
            Status::Failed => Some(Outcome::Failed),
        }
    }

    pub fn is_over(&self) -> bool {
        self.outcome().is_some()
    }

    /// Applies one raw message and records it.
    pub fn step(&mut self, raw: &str) -> Result<&StepRecord, WorldError> {
        if self.abort_reason.is_some() {
            return Err(WorldError::Terminal(self.world.status));
        }
        let out = self.world.step_raw(raw)?;
        let rec = record(self.world.steps_used, raw, &out, &self.world, out.feedback.frame_ref.clone());
        self.feedback = out.feedback.text;
        self.bag = out.feedback.inventory_description;
        self.steps.push(rec);
        Ok(self.steps.last().expect("just pushed"))
    }

    /// Ends a running episode because the player failed.
    pub fn abort(&mut self, reason: impl Into<String>) {
        if !self.is_over() {
            self.abort_reason = Some(reason.into());
        }
    }

    pub fn render(&self, size: u32) -> Result<Frame, RenderError> {
        render(&self.world, size)
    }

    /// The finished log; `None` while the episode is still running.
    pub fn log(&self) -> Option<EpisodeLog> {
        let outcome = self.outcome()?;
        Some(EpisodeLog {
            header: self.header.clone(),
            prefix: self.prefix.clone(),
            total_steps: self.steps.len() as u32,
            steps: self.steps.clone(),
            outcome,
            marks: compute_marks(&self.header.scene, &self.steps),
            abort_reason: self.abort_reason.clone(),
        })
    }
}

fn save_frame(dir: &Path, frame: &Frame, rel: &str) -> Result<(), EpisodeError> {
    let path = dir.join(rel.trim_start_matches("frames/"));
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| RenderError::Io(e.to_string()))?;
    }
    frame.write_png(&path)?;
    Ok(())
}

/// Plays one episode to escape, budget exhaustion, or agent failure.
pub fn run_episode(
    scene: &SceneConfig,
    agent: &mut dyn AgentEndpoint,
    opts: &EpisodeOptions,
) -> Result<EpisodeLog, EpisodeError> {
    let mut ep = Episode::new(scene, opts, &agent.name())?;
    let frames_dir = opts.frames_dir.as_deref();
    if let Some(dir) = frames_dir {
        let mut replay = WorldState::new(scene.clone());
        replay.step_limit = u32::MAX;
        for rec in ep.prefix() {
            let _ = replay.step_raw(&rec.raw_action);
            save_frame(dir, &render(&replay, opts.frame_size)?, &rec.frame_ref)?;
        }
    }

    if let Err(e) = agent
        .start_episode(&system_prompt(), ep.history())
        .and_then(|_| agent.ground_truth(ep.world()))
    {
        ep.abort(e.to_string());
    }
    let needs_frames = frames_dir.is_some() || agent.wants_frames();
    let mut frame = None;
    if needs_frames && !ep.is_over() {
        let f = ep.render(opts.frame_size)?;
        if let Some(dir) = frames_dir {
            save_frame(dir, &f, &ep.frame_ref())?;
        }
        frame = Some(f);
    }

    while !ep.is_over() {
        let prompt = ep.step_prompt();
        let obs = Observation {
            step_index: ep.world().steps_used + 1,
            feedback: ep.feedback(),
            bag: ep.bag(),
            step_prompt: &prompt,
            frame: frame.as_ref().filter(|_| agent.wants_frames()),
        };
        match agent.act(&obs) {
            Ok(raw) => {
                ep.step(&raw).expect("loop runs only while the world is running");
            }
            Err(e) => {
                ep.abort(e.to_string());
                break;
            }
        }
        if needs_frames {
            let f = ep.render(opts.frame_size)?;
            if let Some(dir) = frames_dir {
                save_frame(dir, &f, &ep.frame_ref())?;
            }
            frame = Some(f);
        }
    }
    agent.end_episode();
    Ok(ep.log().expect("loop exits when the episode is over"))
}

/// One field that differs between a log and its replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayDiff {
    /// `0` for the end record; prefix steps are reported as `prefix N`.
    pub step: String,
    pub field: String,
    pub logged: String,
    pub replayed: String,
}

/// Replays every raw action through a fresh world and reports each
/// recorded field that the replay does not reproduce.
pub fn replay(log: &EpisodeLog) -> Vec<ReplayDiff> {
    let mut diffs = Vec::new();
    let mut push = |step: String, field: &str, a: String, b: String| {
        if a != b {
            diffs.push(ReplayDiff {
                step,
                field: field.into(),
                logged: a,
                replayed: b,
            });
        }
    };
    let prefix_raw: Vec<String> = log.prefix.iter().map(|r| r.raw_action.clone()).collect();
    let (mut world, prefix) = match apply_prefix(&log.header.scene, &prefix_raw, log.header.step_limit) {
        Ok(v) => v,
        Err(e) => {
            push("prefix".into(), "prefix", "applies".into(), e.to_string());
            return diffs;
        }
    };
    let compare = |push: &mut dyn FnMut(String, &str, String, String), tag: String, a: &StepRecord, b: &StepRecord| {
        push(tag.clone(), "index", a.index.to_string(), b.index.to_string());
        push(tag.clone(), "parsed", j(&a.parsed), j(&b.parsed));
        push(tag.clone(), "parse_error", j(&a.parse_error), j(&b.parse_error));
        push(tag.clone(), "rationale", a.rationale.clone(), b.rationale.clone());
        push(tag.clone(), "feedback", a.feedback.clone(), b.feedback.clone());
        push(tag.clone(), "bag_description", a.bag_description.clone(), b.bag_description.clone());
        push(tag.clone(), "granted", j(&a.granted), j(&b.granted));
        push(tag.clone(), "grab_attempted", a.grab_attempted.to_string(), b.grab_attempted.to_string());
        push(tag.clone(), "grab_succeeded", a.grab_succeeded.to_string(), b.grab_succeeded.to_string());
        push(tag.clone(), "pose_after", j(&a.pose_after), j(&b.pose_after));
        push(tag.clone(), "room_after", a.room_after.to_string(), b.room_after.to_string());
        push(tag.clone(), "status_after", a.status_after.to_string(), b.status_after.to_string());
        push(tag.clone(), "frame_ref", a.frame_ref.clone(), b.frame_ref.clone());
        push(tag, "distance_moved", j(&a.distance_moved), j(&b.distance_moved));
    };
    for (a, b) in log.prefix.iter().zip(&prefix) {
        compare(&mut push, format!("prefix {}", a.index), a, b);
    }
    let mut replayed = Vec::new();
    for rec in &log.steps {
        let Ok(out) = world.step_raw(&rec.raw_action) else {
            push(rec.index.to_string(), "status_after", rec.status_after.to_string(), world.status.to_string());
            break;
        };
        let b = record(world.steps_used, &rec.raw_action, &out, &world, out.feedback.frame_ref.clone());
        compare(&mut push, rec.index.to_string(), rec, &b);
        replayed.push(b);
    }
    let outcome = match world.status {
        Status::Escaped => Outcome::Escaped,
        Status::Failed => Outcome::Failed,
        Status::Running => Outcome::Aborted,
    };
    push("0".into(), "outcome", j(&log.outcome), j(&outcome));
    push("0".into(), "total_steps", log.total_steps.to_string(), replayed.len().to_string());
    push("0".into(), "marks", j(&log.marks), j(&compute_marks(&log.header.scene, &replayed)));
    diffs
}

fn j<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_default()
}
