//! `roomescape`: generate scenes, run agents, score and replay logs, and
//! serve interactive sessions.

use std::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use roomescape::agent::{AgentEndpoint, OracleAgent, RandomAgent, ScriptedAgent};
use roomescape::catalog::Style;
use roomescape::episode::replay;
use roomescape::harness::{grid, run_batch, standard_suite, PrefixMode, RunSpec, SceneSource};
use roomescape::judge::{compute_cio, run_debriefing, summarize_debriefs, JudgeClient, StubJudge};
use roomescape::log::EpisodeLog;
use roomescape::metrics::{aggregate_benchmark, movement_correlation, stage_analysis};
use roomescape::oracle::validate_solvable;
use roomescape::scene_file;
use roomescape::scenegen::generate;
use roomescape_service::remote::{AGENT_URL_ENV, JUDGE_URL_ENV};
use roomescape_service::{serve, AppState, RemoteAgent, RemoteConfig, RemoteJudge, ServiceConfig};

type Result<T> = std::result::Result<T, Box<dyn Error + Send + Sync>>;

#[derive(Parser)]
#[command(name = "roomescape", version, about = "Procedural escape rooms for evaluating embodied agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write generated scenes as TOML files.
    Generate(GenerateArgs),
    /// Check scene files for structural problems and solvability.
    Validate {
        #[arg(required = true)]
        scenes: Vec<PathBuf>,
    },
    /// Play episodes and write their logs.
    Run(RunArgs),
    /// Aggregate logs into a results table.
    Report(ReportArgs),
    /// Intent-outcome consistency of logged episodes.
    Judge(JudgeArgs),
    /// Post-game story reconstruction for escaped episodes.
    Debrief(DebriefArgs),
    /// Start the session service.
    Serve(ServeArgs),
    /// Re-run logged actions and report any field that differs.
    Replay {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// `d1`, `d2-key`, `d2-password`, `d3-note-key`, `d3-key-note`, `d2`, `d3`,
    /// or two levels joined with `+`.
    #[arg(long)]
    difficulty: String,
    #[arg(long, value_parser = parse_style, default_value = "kitchen")]
    style: Style,
    /// `7`, `0..10` (inclusive) or `1,4,9`.
    #[arg(long, value_parser = parse_seeds, default_value = "0")]
    seeds: Seeds,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AgentKind {
    Oracle,
    Random,
    Remote,
    /// Always sends `{}`.
    Inert,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PrefixKind {
    None,
    /// Replay the oracle's room-one solution on two-room scenes.
    RoomOne,
}

#[derive(Args)]
struct RunArgs {
    /// Scene files; when absent, scenes come from the generator flags.
    #[arg(long = "scene")]
    scenes: Vec<PathBuf>,
    /// Generator levels; repeatable.
    #[arg(long = "difficulty")]
    difficulties: Vec<String>,
    /// `all` or one style; repeatable.
    #[arg(long = "style", value_parser = parse_style_or_all)]
    styles: Vec<Vec<Style>>,
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,
    /// Scenes per standard difficulty for the full benchmark suite.
    #[arg(long, conflicts_with_all = ["scenes", "difficulties"])]
    suite: Option<u64>,
    /// Two-room games per group in the suite.
    #[arg(long, default_value_t = 20)]
    suite_multiroom: u64,
    #[arg(long, value_enum, default_value = "oracle")]
    agent: AgentKind,
    /// Remote endpoint; defaults to the agent URL environment variable.
    #[arg(long)]
    url: Option<String>,
    /// Name recorded for remote agents.
    #[arg(long, default_value = "remote")]
    name: String,
    #[arg(long, default_value_t = 0.3)]
    grab_probability: f64,
    /// Send frames to remote agents.
    #[arg(long)]
    images: bool,
    /// Trailing turns sent to remote agents; all when absent.
    #[arg(long)]
    max_turns: Option<usize>,
    #[arg(long, default_value_t = 1)]
    episodes: u32,
    #[arg(long)]
    step_limit: Option<u32>,
    #[arg(long, value_enum, default_value = "none")]
    prefix: PrefixKind,
    /// Use the raw actions of this log as the history prefix.
    #[arg(long, conflicts_with = "prefix")]
    prefix_log: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write rendered frames next to each log.
    #[arg(long)]
    frames: bool,
    #[arg(long, default_value_t = 512)]
    frame_size: u32,
    /// Parallel episodes; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Log files or directories of logs.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    json: bool,
    /// Per-episode stage steps.
    #[arg(long)]
    stages: bool,
    /// Correlation between distance moved and the optimal distance.
    #[arg(long)]
    correlation: bool,
}

#[derive(Args)]
struct JudgeSource {
    /// `stub` or an endpoint URL; defaults to the judge URL environment variable.
    #[arg(long)]
    judge: Option<String>,
    /// Rules file for the stub judge.
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Args)]
struct JudgeArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    source: JudgeSource,
    #[arg(long, default_value_t = 4)]
    in_flight: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DebriefArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    source: JudgeSource,
    /// Player endpoint; defaults to the agent URL environment variable.
    #[arg(long, conflicts_with = "answers")]
    player_url: Option<String>,
    /// JSON array of three canned answers, for offline checks.
    #[arg(long)]
    answers: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Abort sessions idle for this many seconds.
    #[arg(long)]
    idle_timeout: Option<u64>,
    #[arg(long, default_value_t = 256)]
    max_sessions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> std::result::Result<Seeds, String> {
    let bad = |_| format!("bad seed list `{s}`");
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (a.trim().parse::<u64>().map_err(bad)?, b.trim().parse::<u64>().map_err(bad)?);
        if a > b {
            return Err(format!("empty seed range `{s}`"));
        }
        return Ok(Seeds((a..=b).collect()));
    }
    s.split(',')
        .map(|x| x.trim().parse::<u64>().map_err(bad))
        .collect::<std::result::Result<_, _>>()
        .map(Seeds)
}

fn parse_style(s: &str) -> std::result::Result<Style, String> {
    s.parse::<Style>().map_err(|e| e.to_string())
}

fn parse_style_or_all(s: &str) -> std::result::Result<Vec<Style>, String> {
    if s == "all" {
        Ok(Style::ALL.to_vec())
    } else {
        parse_style(s).map(|x| vec![x])
    }
}

fn collect_logs(inputs: &[PathBuf]) -> Result<Vec<(PathBuf, EpisodeLog)>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|x| x.extension().is_some_and(|e| e == "jsonl"))
                .collect();
            paths.sort();
            for q in paths {
                let log = EpisodeLog::load(&q).map_err(|e| format!("{}: {e}", q.display()))?;
                out.push((q, log));
            }
        } else {
            let log = EpisodeLog::load(p).map_err(|e| format!("{}: {e}", p.display()))?;
            out.push((p.clone(), log));
        }
    }
    Ok(out)
}

fn judge_client(src: &JudgeSource) -> Result<Box<dyn JudgeClient>> {
    if let Some(rules) = &src.rules {
        return Ok(Box::new(StubJudge::from_rules(&std::fs::read_to_string(rules)?)?));
    }
    match src.judge.clone().or_else(|| std::env::var(JUDGE_URL_ENV).ok()) {
        Some(j) if j == "stub" => Ok(Box::new(StubJudge::default())),
        Some(url) => Ok(Box::new(RemoteJudge::new(RemoteConfig::new(url))?)),
        None => Err(format!("no judge: pass --judge stub|URL or set {JUDGE_URL_ENV}").into()),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out)?;
    for seed in &a.seeds.0 {
        let scene = generate(&a.difficulty, a.style, *seed)?;
        let path = a.out.join(format!("{}.toml", scene.scene_id));
        scene_file::save(&path, &scene)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_validate(scenes: &[PathBuf]) -> Result<bool> {
    let mut ok = true;
    for p in scenes {
        match scene_file::load(p) {
            Err(e) => {
                ok = false;
                println!("FAIL {}: {e}", p.display());
            }
            Ok(scene) => {
                let r = validate_solvable(&scene);
                if r.ok {
                    println!(
                        "ok   {} ({}): oracle {} steps, {:.2} m",
                        p.display(),
                        scene.scene_id,
                        r.oracle_steps.unwrap_or(0),
                        r.path_length.unwrap_or(0.0)
                    );
                } else {
                    ok = false;
                    println!("FAIL {}: {}", p.display(), r.reason.unwrap_or_default());
                    for v in r.violations {
                        println!("     {v}");
                    }
                }
            }
        }
    }
    Ok(ok)
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let scenes: Vec<SceneSource> = if let Some(n) = a.suite {
        standard_suite(n, a.suite_multiroom)
    } else if !a.scenes.is_empty() {
        a.scenes
            .iter()
            .map(|p| scene_file::load(p).map(|s| SceneSource::Config(Box::new(s))))
            .collect::<std::result::Result<_, _>>()?
    } else if !a.difficulties.is_empty() {
        let styles: Vec<Style> = if a.styles.is_empty() {
            vec![Style::Kitchen]
        } else {
            a.styles.concat()
        };
        let levels: Vec<&str> = a.difficulties.iter().map(String::as_str).collect();
        grid(&levels, &styles, a.seeds.clone().unwrap_or(Seeds(vec![0])).0)
    } else {
        return Err("choose scenes with --scene, --difficulty or --suite".into());
    };
    let prefix = match (&a.prefix_log, a.prefix) {
        (Some(p), _) => PrefixMode::Fixed(EpisodeLog::load(p)?.steps.iter().map(|s| s.raw_action.clone()).collect()),
        (None, PrefixKind::RoomOne) => PrefixMode::RoomOne,
        (None, PrefixKind::None) => PrefixMode::None,
    };
    let spec = RunSpec {
        scenes,
        episodes_per_scene: a.episodes,
        step_limit: a.step_limit,
        prefix,
        out_dir: Some(a.out.clone()),
        frames: a.frames,
        frame_size: a.frame_size,
        workers: a.workers,
    };
    let url = a.url.clone().or_else(|| std::env::var(AGENT_URL_ENV).ok());
    if a.agent == AgentKind::Remote && url.is_none() {
        return Err(format!("remote agent needs --url or {AGENT_URL_ENV}").into());
    }
    let factory = |scene: &roomescape::scene::SceneConfig, k: u32| -> std::result::Result<Box<dyn AgentEndpoint>, _> {
        Ok(match a.agent {
            AgentKind::Oracle => Box::new(OracleAgent::new()) as Box<dyn AgentEndpoint>,
            AgentKind::Random => Box::new(RandomAgent::new(scene.seed.wrapping_mul(1_000_003).wrapping_add(k as u64), a.grab_probability)),
            AgentKind::Inert => Box::new(ScriptedAgent::new(Vec::new())),
            AgentKind::Remote => Box::new(
                RemoteAgent::new(a.name.clone(), RemoteConfig::new(url.clone().expect("checked above")))?
                    .with_frames(a.images)
                    .with_max_turns(a.max_turns),
            ),
        })
    };
    let logs = run_batch(&spec, &factory)?;
    println!("{} episodes written to {}", logs.len(), a.out.display());
    print!("{}", aggregate_benchmark(&logs)?.to_table());
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let logs: Vec<EpisodeLog> = collect_logs(&a.inputs)?.into_iter().map(|(_, l)| l).collect();
    let report = aggregate_benchmark(&logs)?;
    if a.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_table());
    }
    if a.stages {
        for log in &logs {
            let stages = stage_analysis(log)?;
            let cells: Vec<String> = stages
                .iter()
                .map(|s| match s.steps {
                    Some(n) => format!("{} {n}", s.stage),
                    None => format!("{} -", s.stage),
                })
                .collect();
            println!("{} {}: {}", log.header.scene_id, log.header.agent, cells.join(", "));
        }
    }
    if a.correlation {
        let c = movement_correlation(&logs)?;
        if c.degenerate {
            println!("movement correlation: undefined over {} episodes (constant input)", c.n);
        } else {
            println!("movement correlation: r = {:.4} over {} episodes", c.r, c.n);
        }
    }
    Ok(())
}

fn cmd_judge(a: JudgeArgs) -> Result<()> {
    let client = judge_client(&a.source)?;
    let mut reports = Vec::new();
    for (path, log) in collect_logs(&a.inputs)? {
        match compute_cio(&log, client.as_ref(), a.in_flight) {
            Ok(r) => reports.push(r),
            Err(e) => eprintln!("skip {}: {e}", path.display()),
        }
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
        return Ok(());
    }
    for r in &reports {
        let cio = r.cio.map(|c| format!("{c:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "{} {}: C_IO {cio} ({}), {} excluded",
            r.scene_id, r.agent, r.exact, r.n_excluded
        );
    }
    let scored: Vec<f64> = reports.iter().filter_map(|r| r.cio).collect();
    if !scored.is_empty() {
        println!("mean C_IO {:.4} over {} episodes", scored.iter().sum::<f64>() / scored.len() as f64, scored.len());
    }
    Ok(())
}

fn cmd_debrief(a: DebriefArgs) -> Result<()> {
    let client = judge_client(&a.source)?;
    let answers: Option<Vec<String>> = match &a.answers {
        Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    let url = a.player_url.clone().or_else(|| std::env::var(AGENT_URL_ENV).ok());
    let mut results = Vec::new();
    for (path, log) in collect_logs(&a.inputs)? {
        let mut player: Box<dyn AgentEndpoint> = match (&answers, &url) {
            (Some(ans), _) => Box::new(ScriptedAgent::new(Vec::new()).with_answers(ans.clone())),
            (None, Some(u)) => Box::new(RemoteAgent::new(log.header.agent.clone(), RemoteConfig::new(u.clone()))?),
            (None, None) => return Err(format!("no player: pass --answers or --player-url, or set {AGENT_URL_ENV}").into()),
        };
        match run_debriefing(&log, &log.header.scene, player.as_mut(), client.as_ref()) {
            Ok(r) => results.push(r),
            Err(e) => eprintln!("skip {}: {e}", path.display()),
        }
    }
    let summary = summarize_debriefs(&results);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&(results, summary))?);
        return Ok(());
    }
    for r in &results {
        let score = r.score.map(|s| format!("{s:.1}")).unwrap_or_else(|| "unusable".into());
        println!("{} {}: {score}", r.scene_id, r.agent);
    }
    match summary.average_score {
        Some(avg) => println!("average {avg:.2} over {} scored, {} unusable", summary.scored, summary.unusable),
        None => println!("no usable scores ({} unusable)", summary.unusable),
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<()> {
    let config = ServiceConfig {
        idle_timeout: a.idle_timeout.map(Duration::from_secs),
        max_sessions: a.max_sessions,
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        serve(listener, AppState::new(config)).await
    })?;
    Ok(())
}

fn cmd_replay(inputs: &[PathBuf]) -> Result<bool> {
    let mut clean = true;
    for (path, log) in collect_logs(inputs)? {
        let diffs = replay(&log);
        if diffs.is_empty() {
            println!("ok   {} ({} steps)", path.display(), log.total_steps);
        } else {
            clean = false;
            println!("DIFF {}: {} field(s)", path.display(), diffs.len());
            for d in diffs {
                println!("     step {} {}: logged {} replayed {}", d.step, d.field, d.logged, d.replayed);
            }
        }
    }
    Ok(clean)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a).map(|_| true),
        Command::Validate { scenes } => cmd_validate(&scenes),
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Report(a) => cmd_report(a).map(|_| true),
        Command::Judge(a) => cmd_judge(a).map(|_| true),
        Command::Debrief(a) => cmd_debrief(a).map(|_| true),
        Command::Serve(a) => cmd_serve(a).map(|_| true),
        Command::Replay { logs } => cmd_replay(&logs),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..10").unwrap().0.len(), 11);
        assert_eq!(parse_seeds("4").unwrap().0, vec![4]);
        assert_eq!(parse_seeds("1, 4,9").unwrap().0, vec![1, 4, 9]);
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn styles() {
        assert_eq!(parse_style_or_all("all").unwrap().len(), 4);
        assert_eq!(parse_style_or_all("kitchen").unwrap(), vec![Style::Kitchen]);
        assert!(parse_style("garage").is_err());
    }

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
