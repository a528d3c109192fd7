//! Episode and benchmark metrics: escape rate, prop gain, grab success
//! rate, grab ratio, steps, stage costs and movement correlation.
//!
//! All ratios are exact until rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num::bigint::BigInt;
use num::rational::Ratio;
use num::{BigRational, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::apply_prefix;
use crate::log::{compute_marks, EpisodeLog, Outcome};
use crate::oracle::oracle_from_state;
use crate::propchain::PropKind;
use crate::scene::SceneConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("log is for scene {log}, not {scene}")]
    SceneMismatch { log: String, scene: String },
    #[error("no episodes in group {0}")]
    EmptyGroup(String),
    #[error("no logs to aggregate")]
    NoLogs,
    #[error("acquisition marks disagree with grant events")]
    MarksInconsistent,
    #[error("correlation needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("no optimal distance for scene {0}: {1}")]
    NoOptimal(String, String),
}

/// Per-episode values, exact.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub scene_id: String,
    pub agent: String,
    pub group: String,
    pub outcome: Outcome,
    pub steps: u32,
    pub grab_attempts: u32,
    pub grab_successes: u32,
    pub required: u32,
    /// Successful grabs over required interactions, capped at 1.
    pub prop_gain: Ratio<u64>,
    /// More successful grabs than required interactions.
    pub prop_gain_surplus: bool,
    /// Successful over attempted grabs; zero when nothing was attempted.
    pub gsr: Ratio<u64>,
    pub gsr_defined: bool,
    /// Attempted grabs over steps; zero for an empty episode.
    pub grab_ratio: Ratio<u64>,
    pub distance_moved: f64,
}

fn ratio(n: u32, d: u32) -> Ratio<u64> {
    if d == 0 {
        Ratio::zero()
    } else {
        Ratio::new(n as u64, d as u64)
    }
}

/// Metrics for one log against the scene it was played on.
pub fn compute_episode_metrics(log: &EpisodeLog, scene: &SceneConfig) -> Result<EpisodeMetrics, MetricsError> {
    if log.header.scene_id != scene.scene_id || log.header.seed != scene.seed {
        return Err(MetricsError::SceneMismatch {
            log: log.header.scene_id.clone(),
            scene: scene.scene_id.clone(),
        });
    }
    let attempts = log.grab_attempts();
    let successes = log.grab_successes();
    let required = log.header.required_interactions;
    let gain = ratio(successes, required);
    let surplus = gain > Ratio::one();
    Ok(EpisodeMetrics {
        scene_id: log.header.scene_id.clone(),
        agent: log.header.agent.clone(),
        group: log.header.group.clone(),
        outcome: log.outcome,
        steps: log.total_steps,
        grab_attempts: attempts,
        grab_successes: successes,
        required,
        prop_gain: if surplus { Ratio::one() } else { gain },
        prop_gain_surplus: surplus,
        gsr: ratio(successes, attempts),
        gsr_defined: attempts > 0,
        grab_ratio: ratio(attempts, log.total_steps),
        distance_moved: log.distance_moved(),
    })
}

/// Metrics against the scene embedded in the log header.
pub fn episode_metrics(log: &EpisodeLog) -> EpisodeMetrics {
    compute_episode_metrics(log, &log.header.scene).expect("a log matches its own scene")
}

/// Renders an exact value at `decimals` places, rounding half away from zero.
pub fn fixed(value: &BigRational, decimals: u32) -> String {
    let scale = BigInt::from(10u32).pow(decimals);
    let scaled = value * BigRational::from_integer(scale.clone());
    let rounded = scaled.round().to_integer();
    let negative = rounded < BigInt::zero();
    let digits = if negative { -rounded } else { rounded }.to_string();
    let d = decimals as usize;
    let padded = format!("{digits:0>width$}", width = d + 1);
    let (int, frac) = padded.split_at(padded.len() - d);
    let sign = if negative { "-" } else { "" };
    if d == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

fn big(r: Ratio<u64>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Percentage at two decimals.
pub fn percent(value: &BigRational) -> String {
    fixed(&(value * BigRational::from_integer(BigInt::from(100))), 2)
}

fn mean<'a>(values: impl Iterator<Item = &'a BigRational>) -> BigRational {
    let mut sum = BigRational::zero();
    let mut n = 0u64;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        BigRational::zero()
    } else {
        sum / BigRational::from_integer(BigInt::from(n))
    }
}

/// A value kept exact, with its renderings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exact {
    /// Numerator/denominator, e.g. `2/3`.
    pub exact: String,
    pub value: f64,
    pub display: String,
}

impl Exact {
    fn new(r: &BigRational, display: String) -> Self {
        Self {
            exact: format!("{}/{}", r.numer(), r.denom()),
            value: r.to_f64().unwrap_or(f64::NAN),
            display,
        }
    }

    fn percent(r: &BigRational) -> Self {
        Self::new(r, percent(r))
    }

    fn places(r: &BigRational, d: u32) -> Self {
        Self::new(r, fixed(r, d))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMean {
    /// Episodes in which the stage was reached.
    pub reached: usize,
    pub mean_steps: Exact,
    pub mean_cost: Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub episodes: usize,
    pub escaped: usize,
    /// Episodes whose agent failed; excluded from every mean.
    pub aborted: usize,
    pub escape_rate: Exact,
    pub mean_steps: Exact,
    /// Absent for groups with no props to collect.
    pub prop_gain: Option<Exact>,
    pub gsr: Exact,
    /// Episodes with no grab attempts, counted as zero GSR.
    pub gsr_undefined: usize,
    pub grab_ratio: Exact,
    pub stages: BTreeMap<String, StageMean>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRow {
    pub agent: String,
    pub groups: BTreeMap<String, GroupSummary>,
    /// Mean escape rate over this agent's groups.
    pub avg_escape_rate: Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub groups: Vec<String>,
    pub rows: Vec<AgentRow>,
}

fn group_has_props(group: &str) -> bool {
    group.split('&').any(|g| g != "difficulty-1")
}

fn summarize(group: &str, logs: &[&EpisodeLog]) -> Result<GroupSummary, MetricsError> {
    let played: Vec<&EpisodeLog> = logs.iter().copied().filter(|l| l.outcome != Outcome::Aborted).collect();
    if played.is_empty() {
        return Err(MetricsError::EmptyGroup(group.to_string()));
    }
    let ms: Vec<EpisodeMetrics> = played.iter().map(|l| episode_metrics(l)).collect();
    let n = BigRational::from_integer(BigInt::from(ms.len()));
    let escaped = ms.iter().filter(|m| m.outcome == Outcome::Escaped).count();
    let er = BigRational::from_integer(BigInt::from(escaped)) / n;
    let steps: Vec<BigRational> = ms.iter().map(|m| BigRational::from_integer(BigInt::from(m.steps))).collect();
    let gains: Vec<BigRational> = ms.iter().map(|m| big(m.prop_gain)).collect();
    let gsrs: Vec<BigRational> = ms.iter().map(|m| big(m.gsr)).collect();
    let ratios: Vec<BigRational> = ms.iter().map(|m| big(m.grab_ratio)).collect();

    let mut stage_vals: BTreeMap<String, Vec<(BigRational, BigRational)>> = BTreeMap::new();
    for log in &played {
        if let Ok(stages) = stage_analysis(log) {
            for s in stages {
                let entry = stage_vals.entry(s.stage.clone()).or_default();
                if let (Some(steps), Some(cost)) = (s.steps, s.cost) {
                    entry.push((BigRational::from_integer(BigInt::from(steps)), big(cost)));
                }
            }
        }
    }
    let stages = stage_vals
        .into_iter()
        .map(|(k, v)| {
            let m = StageMean {
                reached: v.len(),
                mean_steps: Exact::places(&mean(v.iter().map(|p| &p.0)), 2),
                mean_cost: Exact::percent(&mean(v.iter().map(|p| &p.1))),
            };
            (k, m)
        })
        .collect();

    Ok(GroupSummary {
        group: group.to_string(),
        episodes: ms.len(),
        escaped,
        aborted: logs.len() - played.len(),
        escape_rate: Exact::percent(&er),
        mean_steps: Exact::places(&mean(steps.iter()), 2),
        prop_gain: group_has_props(group).then(|| Exact::percent(&mean(gains.iter()))),
        gsr: Exact::percent(&mean(gsrs.iter())),
        gsr_undefined: ms.iter().filter(|m| !m.gsr_defined).count(),
        grab_ratio: Exact::places(&mean(ratios.iter()), 3),
        stages,
    })
}

fn group_order(g: &str) -> (usize, String) {
    (g.matches('&').count(), g.to_string())
}

/// Aggregates logs by agent and reporting group.
pub fn aggregate_benchmark(logs: &[EpisodeLog]) -> Result<BenchmarkReport, MetricsError> {
    if logs.is_empty() {
        return Err(MetricsError::NoLogs);
    }
    let mut by_agent: BTreeMap<&str, BTreeMap<&str, Vec<&EpisodeLog>>> = BTreeMap::new();
    for l in logs {
        by_agent
            .entry(&l.header.agent)
            .or_default()
            .entry(&l.header.group)
            .or_default()
            .push(l);
    }
    let mut groups: Vec<String> = logs.iter().map(|l| l.header.group.clone()).collect();
    groups.sort_by_key(|g| group_order(g));
    groups.dedup();
    let mut rows = Vec::new();
    for (agent, by_group) in by_agent {
        let mut summaries = BTreeMap::new();
        let mut ers = Vec::new();
        for (g, ls) in by_group {
            let s = summarize(g, &ls)?;
            let escaped = BigRational::from_integer(BigInt::from(s.escaped));
            ers.push(escaped / BigRational::from_integer(BigInt::from(s.episodes)));
            summaries.insert(g.to_string(), s);
        }
        rows.push(AgentRow {
            agent: agent.to_string(),
            groups: summaries,
            avg_escape_rate: Exact::percent(&mean(ers.iter())),
        });
    }
    Ok(BenchmarkReport { groups, rows })
}

fn title(group: &str) -> String {
    group
        .split('&')
        .map(|g| match g.strip_prefix("difficulty-") {
            Some(n) => format!("Difficulty-{n}"),
            None => g.to_string(),
        })
        .collect::<Vec<_>>()
        .join(" & ")
}

impl BenchmarkReport {
    /// Aligned text table: one row per agent, one column block per group,
    /// then the average escape rate.
    pub fn to_table(&self) -> String {
        let mut header1 = vec!["".to_string()];
        let mut header2 = vec!["Agent".to_string()];
        let mut blocks: Vec<(usize, usize)> = Vec::new();
        for g in &self.groups {
            let mut cols = vec!["ER (%)"];
            if group_has_props(g) {
                cols.push("Prop (%)");
            }
            cols.extend(["Steps", "Grab SR (%)", "Grab Ratio"]);
            blocks.push((header2.len(), cols.len()));
            header1.push(title(g));
            header1.extend(std::iter::repeat_n(String::new(), cols.len() - 1));
            header2.extend(cols.iter().map(|c| c.to_string()));
        }
        header1.push(String::new());
        header2.push("AVG ER (%)".into());

        let mut body = Vec::new();
        for row in &self.rows {
            let mut cells = vec![row.agent.clone()];
            for g in &self.groups {
                match row.groups.get(g) {
                    Some(s) => {
                        cells.push(s.escape_rate.display.clone());
                        if let Some(p) = &s.prop_gain {
                            cells.push(p.display.clone());
                        }
                        cells.push(s.mean_steps.display.clone());
                        cells.push(s.gsr.display.clone());
                        cells.push(s.grab_ratio.display.clone());
                    }
                    None => {
                        let n = if group_has_props(g) { 5 } else { 4 };
                        cells.extend(std::iter::repeat_n("-".to_string(), n));
                    }
                }
            }
            cells.push(row.avg_escape_rate.display.clone());
            body.push(cells);
        }

        let ncols = header2.len();
        let mut width = vec![0usize; ncols];
        for r in std::iter::once(&header2).chain(&body) {
            for (i, c) in r.iter().enumerate() {
                width[i] = width[i].max(c.chars().count());
            }
        }
        for (start, len) in &blocks {
            let span: usize = width[*start..start + len].iter().sum::<usize>() + 2 * (len - 1);
            let need = header1[*start].chars().count();
            if need > span {
                width[start + len - 1] += need - span;
            }
        }
        let block_start: Vec<bool> = (0..ncols)
            .map(|i| i == ncols - 1 || blocks.iter().any(|(s, _)| *s == i))
            .collect();
        let line = |cells: &[String], spanning: bool| -> String {
            let mut out = String::new();
            let mut i = 0;
            while i < cells.len() {
                if i > 0 {
                    out.push_str(if block_start[i] { " | " } else { "  " });
                }
                if spanning {
                    if let Some((s, len)) = blocks.iter().find(|(s, _)| *s == i) {
                        let span: usize = width[*s..s + len].iter().sum::<usize>() + 2 * (len - 1);
                        let _ = write!(out, "{:<span$}", cells[i]);
                        i += len;
                        continue;
                    }
                }
                if i == 0 {
                    let _ = write!(out, "{:<w$}", cells[i], w = width[i]);
                } else {
                    let _ = write!(out, "{:>w$}", cells[i], w = width[i]);
                }
                i += 1;
            }
            out.trim_end().to_string()
        };
        let mut out = String::new();
        out.push_str(&line(&header1, true));
        out.push('\n');
        out.push_str(&line(&header2, false));
        out.push('\n');
        let total: usize = width.iter().sum::<usize>() + 3 * blocks.len() + 2 * (ncols - 1 - blocks.len());
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for r in &body {
            out.push_str(&line(r, false));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    /// `#PW`, `#Key` or `#Exit`.
    pub stage: String,
    /// `None` when the stage was never completed.
    pub steps: Option<u32>,
    pub cost: Option<Ratio<u64>>,
}

/// Steps spent in each acquisition stage of the chains the agent played.
/// Stages follow the chain's dependency order; each is measured from the
/// previous stage's mark, the exit stage from the last key prop.
pub fn stage_analysis(log: &EpisodeLog) -> Result<Vec<Stage>, MetricsError> {
    if log.marks != compute_marks(&log.header.scene, &log.steps) {
        return Err(MetricsError::MarksInconsistent);
    }
    let first_room = log.prefix.last().map_or(0, |p| p.room_after);
    let mut order: Vec<PropKind> = Vec::new();
    for room in &log.header.scene.rooms[first_room..] {
        let ids = room.chain.dependency_order().unwrap_or_default();
        for id in ids {
            if let Some(n) = room.chain.node(&id) {
                if matches!(n.kind, PropKind::Password | PropKind::Key) && !order.contains(&n.kind) {
                    order.push(n.kind);
                }
            }
        }
    }
    let total = log.total_steps;
    let cost = |s: u32| (total > 0).then(|| Ratio::new(s as u64, total as u64));
    let mut out = Vec::new();
    let mut prev = Some(0u32);
    for kind in order {
        let (name, mark) = match kind {
            PropKind::Password => ("#PW", log.marks.password_step),
            _ => ("#Key", log.marks.key_step),
        };
        let steps = match (prev, mark) {
            (Some(p), Some(m)) if m >= p => Some(m - p),
            _ => None,
        };
        out.push(Stage {
            stage: name.into(),
            steps,
            cost: steps.and_then(cost),
        });
        prev = mark;
    }
    let exit = match (prev, log.marks.exit_step) {
        (Some(p), Some(e)) if e >= p => Some(e - p),
        _ => None,
    };
    out.push(Stage {
        stage: "#Exit".into(),
        steps: exit,
        cost: exit.and_then(cost),
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub n: usize,
    /// One of the series has zero variance; `r` is reported as 0.
    pub degenerate: bool,
}

/// Pearson correlation from centered sums.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation, MetricsError> {
    let n = xs.len().min(ys.len());
    if n < 3 {
        return Err(MetricsError::TooFewPoints(n));
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (xs[i] - mx, ys[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let scale = 1e-12 * (1.0 + mx.abs().max(my.abs())).powi(2) * n as f64;
    if sxx <= scale || syy <= scale {
        return Ok(Correlation { r: 0.0, n, degenerate: true });
    }
    Ok(Correlation {
        r: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        n,
        degenerate: false,
    })
}

/// Oracle walking distance for the part of the game a log covers.
pub fn optimal_distance(log: &EpisodeLog) -> Result<f64, MetricsError> {
    let fail = |e: String| MetricsError::NoOptimal(log.header.scene_id.clone(), e);
    let raw: Vec<String> = log.prefix.iter().map(|p| p.raw_action.clone()).collect();
    let (state, _) = apply_prefix(&log.header.scene, &raw, log.header.step_limit).map_err(|e| fail(e.to_string()))?;
    let plan = oracle_from_state(&state).map_err(|e| fail(e.to_string()))?;
    if !plan.escaped {
        return Err(fail("oracle did not escape".into()));
    }
    Ok(plan.path_length)
}

/// Correlation between traveled distance and the oracle's optimal distance.
pub fn movement_correlation(logs: &[EpisodeLog]) -> Result<Correlation, MetricsError> {
    let played: Vec<&EpisodeLog> = logs.iter().filter(|l| l.outcome != Outcome::Aborted).collect();
    if played.len() < 3 {
        return Err(MetricsError::TooFewPoints(played.len()));
    }
    let mut traveled = Vec::with_capacity(played.len());
    let mut optimal = Vec::with_capacity(played.len());
    for l in played {
        traveled.push(l.distance_moved());
        optimal.push(optimal_distance(l)?);
    }
    pearson(&traveled, &optimal)
}
