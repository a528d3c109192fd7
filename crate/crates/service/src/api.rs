//! Request and response bodies of the session endpoints.

use serde::{Deserialize, Serialize};

use roomescape::catalog::Style;
use roomescape::log::{Outcome, StepRecord};
use roomescape::scene::SceneConfig;
use roomescape::world::Status;

/// Header carrying the per-session token on mutating requests.
pub const TOKEN_HEADER: &str = "x-session-token";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientRole {
    #[default]
    Agent,
    Human,
}

/// Generator arguments, as accepted by the `generate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    /// `d1`, `d3-note-key`, `d2`, or `d1+d2-key` for two rooms.
    pub difficulty: String,
    pub style: Style,
    pub seed: u64,
}

/// Exactly one of `scene` and `generate` must be set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_limit: Option<u32>,
    /// Raw actions replayed before the client takes over.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prefix: Vec<String>,
    #[serde(default)]
    pub role: ClientRole,
    /// Name recorded in the log header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_name: Option<String>,
    /// Square frame side in pixels; even, defaults to 512.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_size: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub token: String,
    pub scene_id: String,
    pub step_limit: u32,
    pub system_prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePayload {
    pub width: u32,
    pub height: u32,
    pub png_base64: String,
}

/// Everything a player needs for its next action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationBody {
    pub session_id: String,
    /// Index the next action will get.
    pub step_index: u32,
    pub steps_used: u32,
    pub step_limit: u32,
    pub status: Status,
    pub outcome: Option<Outcome>,
    pub feedback: String,
    pub bag: String,
    pub step_prompt: String,
    pub frame_ref: String,
    pub frame: FramePayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionResult {
    pub record: StepRecord,
    pub status: Status,
    pub outcome: Option<Outcome>,
    pub steps_used: u32,
    pub step_limit: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub scene_id: String,
    pub role: ClientRole,
    pub status: Status,
    pub outcome: Option<Outcome>,
    pub steps_used: u32,
    pub step_limit: u32,
    pub room: usize,
    /// Seconds since the last request that touched the session.
    pub idle_seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRequest {
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// Text messages on the stream; binary messages carry frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum StreamEvent {
    Step {
        record: Box<StepRecord>,
        status: Status,
        outcome: Option<Outcome>,
        bag: String,
    },
    End {
        outcome: Outcome,
    },
}
