//! Session service for interactive and remote play, plus HTTP clients for
//! hosted players and judges.

pub mod api;
pub mod client;
pub mod remote;
pub mod server;
pub mod stream;

pub use client::{ClientError, SessionClient};
pub use remote::{RemoteAgent, RemoteConfig, RemoteJudge};
pub use server::{router, serve, AppState, ServiceConfig, ServiceError};
