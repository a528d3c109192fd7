//! Batch execution: scene selection, agent construction per episode, a
//! worker cap, and the on-disk layout of a run.
//!
//! ```text
//! <out>/<scene_id>__<agent>__<k>.jsonl        one log per episode
//! <out>/<scene_id>__<agent>__<k>/frames/      rendered frames, when requested
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentEndpoint, AgentError};
use crate::catalog::Style;
use crate::episode::{room_one_solution, run_episode, EpisodeError, EpisodeOptions};
use crate::log::{EpisodeLog, LogError};
use crate::propchain::DifficultyLabel;
use crate::render::DEFAULT_SIZE;
use crate::scene::SceneConfig;
use crate::scenegen::{generate, SceneGenError};

/// The three two-room groups of the multi-room setting.
pub const MULTIROOM_COMBOS: [&str; 3] = ["d1+d1", "d1+d2", "d2+d2"];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scene generation failed for {level} seed {seed}: {source}")]
    Generate {
        level: String,
        seed: u64,
        source: SceneGenError,
    },
    #[error("scene {0} has no room-one solution to inject")]
    NoPrefix(String),
    #[error("could not build agent: {0}")]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    Config(Box<SceneConfig>),
    Generate { level: String, style: Style, seed: u64 },
}

impl SceneSource {
    pub fn resolve(&self) -> Result<SceneConfig, HarnessError> {
        match self {
            SceneSource::Config(c) => Ok((**c).clone()),
            SceneSource::Generate { level, style, seed } => {
                generate(level, *style, *seed).map_err(|source| HarnessError::Generate {
                    level: level.clone(),
                    seed: *seed,
                    source,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixMode {
    #[default]
    None,
    /// The oracle's room-one solution, on multi-room scenes only.
    RoomOne,
    /// The same raw actions before every episode.
    Fixed(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub scenes: Vec<SceneSource>,
    pub episodes_per_scene: u32,
    /// Overrides the per-scene default budget.
    pub step_limit: Option<u32>,
    pub prefix: PrefixMode,
    pub out_dir: Option<PathBuf>,
    pub frames: bool,
    pub frame_size: u32,
    /// Episodes run at once; 0 uses every core.
    pub workers: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            scenes: Vec::new(),
            episodes_per_scene: 1,
            step_limit: None,
            prefix: PrefixMode::None,
            out_dir: None,
            frames: false,
            frame_size: DEFAULT_SIZE,
            workers: 0,
        }
    }
}

/// Generator arguments for every level, style and seed combination.
pub fn grid(levels: &[&str], styles: &[Style], seeds: impl IntoIterator<Item = u64> + Clone) -> Vec<SceneSource> {
    let mut out = Vec::new();
    for level in levels {
        for style in styles {
            for seed in seeds.clone() {
                out.push(SceneSource::Generate {
                    level: level.to_string(),
                    style: *style,
                    seed,
                });
            }
        }
    }
    out
}

/// The standard benchmark: `per_difficulty` scenes for each standard label
/// and `per_combo` two-room games for each multi-room group, styles
/// rotating with the seed.
pub fn standard_suite(per_difficulty: u64, per_combo: u64) -> Vec<SceneSource> {
    let style = |seed: u64| Style::ALL[(seed % Style::ALL.len() as u64) as usize];
    let mut out = Vec::new();
    for label in DifficultyLabel::STANDARD {
        for seed in 0..per_difficulty {
            out.push(SceneSource::Generate {
                level: label.to_string(),
                style: style(seed),
                seed,
            });
        }
    }
    for combo in MULTIROOM_COMBOS {
        for seed in 0..per_combo {
            out.push(SceneSource::Generate {
                level: combo.to_string(),
                style: style(seed),
                seed,
            });
        }
    }
    out
}

/// File stem of one episode's outputs.
pub fn episode_stem(scene_id: &str, agent: &str, k: u32) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || "-_+.".contains(c) { c } else { '_' })
            .collect()
    };
    format!("{}__{}__{k}", clean(scene_id), clean(agent))
}

pub fn prefix_for(scene: &SceneConfig, mode: &PrefixMode) -> Result<Vec<String>, HarnessError> {
    match mode {
        PrefixMode::None => Ok(Vec::new()),
        PrefixMode::Fixed(p) => Ok(p.clone()),
        PrefixMode::RoomOne if !scene.is_multiroom() => Ok(Vec::new()),
        PrefixMode::RoomOne => room_one_solution(scene).ok_or_else(|| HarnessError::NoPrefix(scene.scene_id.clone())),
    }
}

fn run_one(
    spec: &RunSpec,
    scene: &SceneConfig,
    prefix: &[String],
    k: u32,
    make_agent: &AgentFactory<'_>,
) -> Result<EpisodeLog, HarnessError> {
    let mut agent = make_agent(scene, k)?;
    let stem = episode_stem(&scene.scene_id, &agent.name(), k);
    let opts = EpisodeOptions {
        step_limit: spec.step_limit,
        prefix: prefix.to_vec(),
        frames_dir: match (&spec.out_dir, spec.frames) {
            (Some(dir), true) => Some(dir.join(&stem).join("frames")),
            _ => None,
        },
        frame_size: spec.frame_size,
        agent_name: None,
    };
    let log = run_episode(scene, agent.as_mut(), &opts)?;
    if let Some(dir) = &spec.out_dir {
        log.save(&dir.join(format!("{stem}.jsonl")))?;
    }
    Ok(log)
}

/// Builds a fresh agent for the `k`-th episode on a scene.
pub type AgentFactory<'a> = dyn Fn(&SceneConfig, u32) -> Result<Box<dyn AgentEndpoint>, AgentError> + Sync + 'a;

/// Runs every episode of a spec; logs come back in scene, then episode order.
pub fn run_batch(spec: &RunSpec, make_agent: &AgentFactory<'_>) -> Result<Vec<EpisodeLog>, HarnessError> {
    if let Some(dir) = &spec.out_dir {
        std::fs::create_dir_all(dir).map_err(LogError::from)?;
    }
    let scenes: Vec<(SceneConfig, Vec<String>)> = spec
        .scenes
        .par_iter()
        .map(|s| {
            let scene = s.resolve()?;
            let prefix = prefix_for(&scene, &spec.prefix)?;
            Ok((scene, prefix))
        })
        .collect::<Result<_, HarnessError>>()?;
    let jobs: Vec<(usize, u32)> = (0..scenes.len())
        .flat_map(|i| (0..spec.episodes_per_scene).map(move |k| (i, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(i, k)| run_one(spec, &scenes[i].0, &scenes[i].1, k, make_agent))
            .collect()
    })
}

/// Loads every `.jsonl` log in a directory, sorted by file name.
pub fn load_logs(dir: &Path) -> Result<Vec<EpisodeLog>, LogError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| EpisodeLog::load(p)).collect()
}
