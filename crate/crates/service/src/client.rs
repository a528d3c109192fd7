//! Blocking client for the session endpoints, for headless players and tests.

use std::time::Duration;

use base64::Engine;
use thiserror::Error;

use roomescape::log::EpisodeLog;

use crate::api::*;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("service replied {status}: {message}")]
    Status { status: u16, message: String },
    #[error("bad payload: {0}")]
    Payload(String),
}

impl ClientError {
    /// HTTP status of a service-side rejection.
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionClient {
    base: String,
    http: reqwest::blocking::Client,
}

fn check(resp: reqwest::blocking::Response) -> Result<reqwest::blocking::Response, ClientError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    let text = resp.text().unwrap_or_default();
    let message = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
    Err(ClientError::Status {
        status: status.as_u16(),
        message,
    })
}

impl SessionClient {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()?;
        Ok(Self {
            base: base.into().trim_end_matches('/').to_string(),
            http,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub fn create(&self, req: &CreateSession) -> Result<CreatedSession, ClientError> {
        Ok(check(self.http.post(self.url("/sessions")).json(req).send()?)?.json()?)
    }

    pub fn list(&self) -> Result<Vec<SessionStatus>, ClientError> {
        Ok(check(self.http.get(self.url("/sessions")).send()?)?.json()?)
    }

    pub fn observation(&self, id: &str) -> Result<ObservationBody, ClientError> {
        Ok(check(self.http.get(self.url(&format!("/sessions/{id}/observation"))).send()?)?.json()?)
    }

    pub fn frame_png(&self, id: &str) -> Result<Vec<u8>, ClientError> {
        let resp = check(self.http.get(self.url(&format!("/sessions/{id}/frame.png"))).send()?)?;
        Ok(resp.bytes()?.to_vec())
    }

    pub fn act(&self, id: &str, token: &str, raw: &str) -> Result<ActionResult, ClientError> {
        let resp = self
            .http
            .post(self.url(&format!("/sessions/{id}/actions")))
            .header(TOKEN_HEADER, token)
            .body(raw.to_string())
            .send()?;
        Ok(check(resp)?.json()?)
    }

    pub fn status(&self, id: &str) -> Result<SessionStatus, ClientError> {
        Ok(check(self.http.get(self.url(&format!("/sessions/{id}/status"))).send()?)?.json()?)
    }

    pub fn log_text(&self, id: &str) -> Result<String, ClientError> {
        Ok(check(self.http.get(self.url(&format!("/sessions/{id}/log"))).send()?)?.text()?)
    }

    pub fn log(&self, id: &str) -> Result<EpisodeLog, ClientError> {
        let text = self.log_text(id)?;
        EpisodeLog::from_jsonl(&text).map_err(|e| ClientError::Payload(e.to_string()))
    }

    pub fn abort(&self, id: &str, token: &str, reason: &str) -> Result<SessionStatus, ClientError> {
        let resp = self
            .http
            .post(self.url(&format!("/sessions/{id}/abort")))
            .header(TOKEN_HEADER, token)
            .json(&AbortRequest { reason: reason.into() })
            .send()?;
        Ok(check(resp)?.json()?)
    }

    pub fn heartbeat(&self, id: &str, token: &str) -> Result<SessionStatus, ClientError> {
        let resp = self
            .http
            .post(self.url(&format!("/sessions/{id}/heartbeat")))
            .header(TOKEN_HEADER, token)
            .send()?;
        Ok(check(resp)?.json()?)
    }
}

/// PNG bytes of an observation's frame.
pub fn decode_frame(obs: &ObservationBody) -> Result<Vec<u8>, ClientError> {
    base64::engine::general_purpose::STANDARD
        .decode(&obs.frame.png_base64)
        .map_err(|e| ClientError::Payload(e.to_string()))
}
