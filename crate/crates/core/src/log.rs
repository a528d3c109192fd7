//! Episode logs: one JSON record per line. A header line (with the full
//! scene embedded), optional history-prefix lines, one line per step, and
//! an end line with the outcome and acquisition marks.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propchain::PropKind;
use crate::protocol::AgentAction;
use crate::scene::SceneConfig;
use crate::world::{AgentPose, Status};

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub index: u32,
    pub raw_action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed: Option<AgentAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    pub rationale: String,
    pub feedback: String,
    pub bag_description: String,
    pub granted: Vec<String>,
    pub grab_attempted: bool,
    pub grab_succeeded: bool,
    pub pose_after: AgentPose,
    pub room_after: usize,
    pub status_after: Status,
    pub frame_ref: String,
    pub distance_moved: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Escaped,
    Failed,
    /// The agent endpoint failed; excluded from aggregates.
    Aborted,
}

/// First step (1-based, within the agent's own steps) at which each kind
/// of prop was obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquisitionMarks {
    pub password_step: Option<u32>,
    pub key_step: Option<u32>,
    pub exit_step: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub log_version: u32,
    pub scene_id: String,
    pub seed: u64,
    pub agent: String,
    pub difficulty: String,
    pub group: String,
    pub step_limit: u32,
    /// Required interactions for the part of the game the agent plays.
    pub required_interactions: u32,
    pub scene: SceneConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEnd {
    pub outcome: Outcome,
    pub total_steps: u32,
    pub marks: AcquisitionMarks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Line {
    Header(Box<LogHeader>),
    Prefix(Box<StepRecord>),
    Step(Box<StepRecord>),
    End(LogEnd),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: LogHeader,
    /// Injected history played before the agent took over.
    pub prefix: Vec<StepRecord>,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    pub total_steps: u32,
    pub marks: AcquisitionMarks,
    pub abort_reason: Option<String>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("log has no header line")]
    MissingHeader,
    #[error("log has no end line")]
    MissingEnd,
    #[error("unsupported log_version {0}")]
    Version(u32),
    #[error("inconsistent log: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Marks computed from grant events: the first password, the first key,
/// and the escape step.
pub fn compute_marks(scene: &SceneConfig, steps: &[StepRecord]) -> AcquisitionMarks {
    let kind_of = |id: &str| scene.rooms.iter().find_map(|r| r.chain.node(id)).map(|n| n.kind);
    let mut marks = AcquisitionMarks::default();
    for s in steps {
        for g in &s.granted {
            match kind_of(g) {
                Some(PropKind::Password) if marks.password_step.is_none() => marks.password_step = Some(s.index),
                Some(PropKind::Key) if marks.key_step.is_none() => marks.key_step = Some(s.index),
                _ => {}
            }
        }
        if s.status_after == Status::Escaped && marks.exit_step.is_none() {
            marks.exit_step = Some(s.index);
        }
    }
    marks
}

impl EpisodeLog {
    /// Checks the record invariants: contiguous indices, flag implication,
    /// totals and marks.
    pub fn check(&self) -> Result<(), LogError> {
        for (i, s) in self.steps.iter().enumerate() {
            if s.index != i as u32 + 1 {
                return Err(LogError::Inconsistent(format!("step {} has index {}", i + 1, s.index)));
            }
            if s.grab_succeeded && !s.grab_attempted {
                return Err(LogError::Inconsistent(format!("step {} succeeded without a grab", s.index)));
            }
        }
        if self.total_steps as usize != self.steps.len() {
            return Err(LogError::Inconsistent(format!(
                "total_steps {} but {} records",
                self.total_steps,
                self.steps.len()
            )));
        }
        if self.total_steps > self.header.step_limit {
            return Err(LogError::Inconsistent("log exceeds its step limit".into()));
        }
        if self.outcome == Outcome::Escaped && self.marks.exit_step.is_none() {
            return Err(LogError::Inconsistent("escaped without an exit mark".into()));
        }
        if self.marks != compute_marks(&self.header.scene, &self.steps) {
            return Err(LogError::Inconsistent("marks disagree with grant events".into()));
        }
        Ok(())
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<(), LogError> {
        let mut put = |line: &Line| -> Result<(), LogError> {
            let text = serde_json::to_string(line).map_err(|e| LogError::Parse {
                line: 0,
                message: e.to_string(),
            })?;
            writeln!(out, "{text}")?;
            Ok(())
        };
        put(&Line::Header(Box::new(self.header.clone())))?;
        for s in &self.prefix {
            put(&Line::Prefix(Box::new(s.clone())))?;
        }
        for s in &self.steps {
            put(&Line::Step(Box::new(s.clone())))?;
        }
        put(&Line::End(LogEnd {
            outcome: self.outcome,
            total_steps: self.total_steps,
            marks: self.marks,
            abort_reason: self.abort_reason.clone(),
        }))
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<EpisodeLog, LogError> {
        let mut header = None;
        let mut prefix = Vec::new();
        let mut steps = Vec::new();
        let mut end = None;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| LogError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            match parsed {
                Line::Header(h) => {
                    if h.log_version != LOG_VERSION {
                        return Err(LogError::Version(h.log_version));
                    }
                    header = Some(*h);
                }
                Line::Prefix(s) => prefix.push(*s),
                Line::Step(s) => steps.push(*s),
                Line::End(e) => end = Some(e),
            }
        }
        let header = header.ok_or(LogError::MissingHeader)?;
        let end = end.ok_or(LogError::MissingEnd)?;
        Ok(EpisodeLog {
            header,
            prefix,
            steps,
            outcome: end.outcome,
            total_steps: end.total_steps,
            marks: end.marks,
            abort_reason: end.abort_reason,
        })
    }

    pub fn from_jsonl(text: &str) -> Result<EpisodeLog, LogError> {
        Self::read_jsonl(text.as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), LogError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<EpisodeLog, LogError> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }

    pub fn grab_attempts(&self) -> u32 {
        self.steps.iter().filter(|s| s.grab_attempted).count() as u32
    }

    pub fn grab_successes(&self) -> u32 {
        self.steps.iter().filter(|s| s.grab_succeeded).count() as u32
    }

    pub fn distance_moved(&self) -> f64 {
        self.steps.iter().map(|s| s.distance_moved).sum()
    }
}
