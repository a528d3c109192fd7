//! Procedurally generated escape rooms with a first-person action protocol,
//! an oracle planner, episode logging and process-level metrics.

pub mod agent;
pub mod catalog;
pub mod episode;
pub mod geometry;
pub mod harness;
pub mod judge;
pub mod log;
pub mod metrics;
pub mod oracle;
pub mod planner;
pub mod propchain;
pub mod protocol;
pub mod render;
pub mod scene;
pub mod scene_file;
pub mod scenegen;
pub mod story;
pub mod world;
