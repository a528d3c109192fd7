//! HTTP clients for externally hosted players and judges.
//!
//! Both speak one JSON shape:
//!
//! ```text
//! request  {"system": str, "messages": [{"role", "content", "image_png_base64"?}],
//!           "temperature": 0, "max_tokens": n}
//! response {"text": str}
//! ```

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use roomescape::agent::{AgentEndpoint, AgentError, Conversation, Observation, Role, Turn};
use roomescape::judge::{JudgeClient, JudgeError};

pub const AGENT_URL_ENV: &str = "ROOMESCAPE_AGENT_URL";
pub const JUDGE_URL_ENV: &str = "ROOMESCAPE_JUDGE_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_png_base64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system: String,
    pub messages: Vec<WireMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub url: String,
    pub timeout: Duration,
    /// Extra attempts after a transport failure or 5xx reply.
    pub retries: u32,
    pub backoff: Duration,
    pub max_tokens: u32,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout: Duration::from_secs(120),
            retries: 2,
            backoff: Duration::from_millis(500),
            max_tokens: 1024,
        }
    }

    pub fn from_env(var: &str) -> Option<Self> {
        std::env::var(var).ok().filter(|u| !u.is_empty()).map(Self::new)
    }
}

#[derive(Debug)]
struct Transport {
    config: RemoteConfig,
    http: reqwest::blocking::Client,
}

impl Transport {
    fn new(config: RemoteConfig) -> Result<Self, String> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self { config, http })
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, String> {
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff * attempt);
            }
            match self.http.post(&self.config.url).json(req).send() {
                Ok(resp) if resp.status().is_server_error() => last = format!("server replied {}", resp.status()),
                Ok(resp) if !resp.status().is_success() => return Err(format!("server replied {}", resp.status())),
                Ok(resp) => {
                    return resp
                        .json::<CompletionResponse>()
                        .map(|r| r.text)
                        .map_err(|e| format!("malformed reply: {e}"))
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(last)
    }
}

/// A player behind an HTTP completion endpoint.
#[derive(Debug)]
pub struct RemoteAgent {
    name: String,
    transport: Transport,
    frames: bool,
    pub conversation: Conversation,
}

impl RemoteAgent {
    pub fn new(name: impl Into<String>, config: RemoteConfig) -> Result<Self, AgentError> {
        Ok(Self {
            name: name.into(),
            transport: Transport::new(config).map_err(AgentError::Transport)?,
            frames: false,
            conversation: Conversation::default(),
        })
    }

    /// Attach the current frame to each step's message.
    pub fn with_frames(mut self, on: bool) -> Self {
        self.frames = on;
        self
    }

    /// Send only this many trailing turns.
    pub fn with_max_turns(mut self, max: Option<usize>) -> Self {
        self.conversation.max_turns = max;
        self
    }

    fn send(&mut self, image: Option<String>) -> Result<String, AgentError> {
        let window = self.conversation.window();
        let last = window.len().saturating_sub(1);
        let messages = window
            .iter()
            .enumerate()
            .map(|(i, t)| WireMessage {
                role: t.role,
                content: t.content.clone(),
                image_png_base64: if i == last { image.clone() } else { None },
            })
            .collect();
        let req = CompletionRequest {
            system: self.conversation.system.clone(),
            messages,
            temperature: 0.0,
            max_tokens: self.transport.config.max_tokens,
        };
        let text = self.transport.complete(&req).map_err(AgentError::Transport)?;
        self.conversation.push(Turn::assistant(text.clone()));
        Ok(text)
    }
}

impl AgentEndpoint for RemoteAgent {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn start_episode(&mut self, system: &str, history: &[Turn]) -> Result<(), AgentError> {
        let max = self.conversation.max_turns;
        self.conversation = Conversation::new(system);
        self.conversation.max_turns = max;
        self.conversation.turns.extend_from_slice(history);
        Ok(())
    }

    fn act(&mut self, obs: &Observation<'_>) -> Result<String, AgentError> {
        let image = match obs.frame.filter(|_| self.frames) {
            Some(f) => Some(
                base64::engine::general_purpose::STANDARD
                    .encode(f.encode_png().map_err(|e| AgentError::Reply(e.to_string()))?),
            ),
            None => None,
        };
        self.conversation.push(Turn::user(obs.step_prompt));
        self.send(image)
    }

    fn wants_frames(&self) -> bool {
        self.frames
    }

    fn ask(&mut self, prompt: &str) -> Result<String, AgentError> {
        self.conversation.push(Turn::user(prompt));
        self.send(None)
    }
}

/// A judge behind an HTTP completion endpoint; each prompt is a fresh
/// single-turn conversation.
#[derive(Debug)]
pub struct RemoteJudge {
    transport: Transport,
}

impl RemoteJudge {
    pub fn new(config: RemoteConfig) -> Result<Self, JudgeError> {
        Ok(Self {
            transport: Transport::new(config).map_err(JudgeError::Unavailable)?,
        })
    }
}

impl JudgeClient for RemoteJudge {
    fn complete(&self, prompt: &str) -> Result<String, JudgeError> {
        let req = CompletionRequest {
            system: String::new(),
            messages: vec![WireMessage {
                role: Role::User,
                content: prompt.to_string(),
                image_png_base64: None,
            }],
            temperature: 0.0,
            max_tokens: self.transport.config.max_tokens,
        };
        self.transport.complete(&req).map_err(JudgeError::Unavailable)
    }
}
