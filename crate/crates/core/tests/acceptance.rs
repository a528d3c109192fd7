//! The acceptance suite. Each test checks one criterion and prints a single
//! `PASS`/`FAIL` line to the real stdout, so the verdicts show up even when
//! libtest captures output.

mod support;

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use num::rational::Ratio;
use rand::Rng;
use rayon::prelude::*;

use roomescape::agent::{AgentEndpoint, OracleAgent, RandomAgent, ScriptedAgent};
use roomescape::catalog::Style;
use roomescape::episode::{replay, run_episode, EpisodeOptions};
use roomescape::harness::standard_suite;
use roomescape::judge::{build_consistency_prompt, compute_cio, debrief_prompts, StubJudge};
use roomescape::log::{EpisodeLog, Outcome};
use roomescape::metrics::{aggregate_benchmark, episode_metrics, movement_correlation};
use roomescape::oracle::validate_solvable;
use roomescape::propchain::{DifficultyLabel, PropKind};
use roomescape::protocol::{feedback, step_prompt, system_prompt, AgentAction};
use roomescape::render::{cast_ray, center_ray_pick, look_at_to_angles, Camera};
use roomescape::scene::SceneConfig;
use roomescape::scene_file::to_toml;
use roomescape::scenegen::{generate, generate_scene};
use roomescape::world::{AgentPose, WorldState};

use support::{aim_at_object, crafted, free_pose, node_of, oracle_pick, rng, scene_pool, synth_log, view_dir, Synth};

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn criterion(name: &str, check: impl FnOnce() -> Verdict) {
    let verdict = check();
    let line = match &verdict {
        Ok(detail) => format!("PASS {name}: {detail}"),
        Err(why) => format!("FAIL {name}: {why}"),
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "\n{line}").unwrap();
    out.flush().unwrap();
    if let Err(why) = verdict {
        panic!("{name}: {why}");
    }
}

fn style_for(seed: u64) -> Style {
    Style::ALL[(seed % Style::ALL.len() as u64) as usize]
}

fn oracle_log(scene: &SceneConfig) -> EpisodeLog {
    run_episode(scene, &mut OracleAgent::new(), &EpisodeOptions::default()).unwrap()
}

/// The step budget each group is allowed, written out independently.
fn budget(level: &str) -> u32 {
    match level {
        _ if level.contains('+') => 80,
        "d1" => 50,
        l if l.starts_with("d2") => 75,
        l if l.starts_with("d3") => 100,
        other => panic!("no budget for {other}"),
    }
}

#[test]
fn metric_formula_fidelity() {
    criterion("metric-formula fidelity", || {
        let t = Instant::now();
        let scene = generate("d2-key", Style::Kitchen, 0).unwrap();
        let key = node_of(&scene, PropKind::Key);
        let mut steps: Vec<Synth> = (0..23).map(|_| Synth::idle()).collect();
        steps[4] = Synth::gets(&key);
        steps[10] = Synth::grab(false);
        steps[22] = Synth::escape();
        let log = synth_log(&scene, "human", steps, 75);
        let m = episode_metrics(&log);
        ensure!(m.gsr == Ratio::new(2, 3), "GSR {}", m.gsr);
        ensure!(m.prop_gain == Ratio::new(1, 1), "prop gain {}", m.prop_gain);
        ensure!(m.grab_ratio == Ratio::new(3, 23), "grab ratio {}", m.grab_ratio);
        let report = aggregate_benchmark(&[log]).unwrap();
        let g = &report.rows[0].groups["difficulty-2"];
        let shown = (
            g.gsr.display.as_str(),
            g.prop_gain.as_ref().map(|p| p.display.as_str()),
            g.grab_ratio.display.as_str(),
        );
        ensure!(shown == ("66.67", Some("100.00"), "0.130"), "rendered {shown:?}");
        let elapsed = t.elapsed();
        ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
        Ok(format!("GSR 2/3 -> 66.67, prop gain 1 -> 100.00, grab ratio 3/23 -> 0.130 in {elapsed:?}"))
    });
}

#[test]
fn solvability_and_budget() {
    criterion("solvability and budget", || {
        let t = Instant::now();
        let sources = standard_suite(100, 20);
        let failures: Vec<String> = sources
            .par_iter()
            .filter_map(|src| {
                let scene = src.resolve().unwrap();
                let level = match src {
                    roomescape::harness::SceneSource::Generate { level, .. } => level.clone(),
                    _ => unreachable!(),
                };
                let report = validate_solvable(&scene);
                let limit = budget(&level);
                match (report.ok, report.oracle_steps) {
                    (true, Some(n)) if n <= limit && scene.step_limit == limit => None,
                    _ => Some(format!("{} ({:?}, {:?} steps)", scene.scene_id, report.reason, report.oracle_steps)),
                }
            })
            .collect();
        let elapsed = t.elapsed();
        ensure!(failures.is_empty(), "{} unsolvable: {}", failures.len(), failures.join(", "));
        ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
        Ok(format!("{} scenes solvable within budget in {:.1?}", sources.len(), elapsed))
    });
}

#[test]
fn oracle_stage_ordering() {
    criterion("oracle stage ordering", || {
        let bad: Vec<String> = (0..100u64)
            .into_par_iter()
            .filter_map(|seed| {
                let scene = generate_scene(DifficultyLabel::D3NoteKey, style_for(seed), seed).unwrap();
                let log = oracle_log(&scene);
                let kind_of = |id: &str| scene.rooms[0].chain.nodes.iter().find(|n| n.id == id).map(|n| n.kind);
                let first = |kind| {
                    log.steps
                        .iter()
                        .find(|s| s.granted.iter().any(|g| kind_of(g) == Some(kind)))
                        .map(|s| s.index)
                };
                let exit = log.steps.iter().find(|s| s.status_after == roomescape::world::Status::Escaped).map(|s| s.index);
                let (pw, key) = (first(PropKind::Password), first(PropKind::Key));
                let ordered = matches!((pw, key, exit), (Some(p), Some(k), Some(e)) if p < k && k < e);
                let agrees = (log.marks.password_step, log.marks.key_step, log.marks.exit_step) == (pw, key, exit);
                (!ordered || !agrees).then(|| format!("{} ({pw:?}, {key:?}, {exit:?})", scene.scene_id))
            })
            .collect();
        ensure!(bad.is_empty(), "{}", bad.join(", "));
        Ok("100 D3 note-key scenes: password < key < exit".into())
    });
}

#[test]
fn replay_soundness() {
    criterion("replay soundness", || {
        let levels = ["d1", "d2-key", "d2-password", "d3-note-key", "d3-key-note", "d1+d1", "d1+d2", "d2+d2"];
        let mut pick = rng(2024);
        let jobs: Vec<(String, u64, bool)> = (0..50)
            .map(|i| (levels[pick.random_range(0..levels.len())].to_string(), pick.random_range(0..10_000u64), i % 2 == 0))
            .collect();
        let results: Vec<(String, usize, bool)> = jobs
            .par_iter()
            .map(|(level, seed, oracle)| {
                let scene = generate(level, style_for(*seed), *seed).unwrap();
                let mut agent: Box<dyn AgentEndpoint> = if *oracle {
                    Box::new(OracleAgent::new())
                } else {
                    Box::new(RandomAgent::new(*seed, 0.4))
                };
                let log = run_episode(&scene, agent.as_mut(), &EpisodeOptions::default()).unwrap();
                let back = EpisodeLog::from_jsonl(&log.to_jsonl()).unwrap();
                (scene.scene_id, replay(&back).len(), back == log)
            })
            .collect();
        let bad: Vec<String> = results
            .iter()
            .filter(|(_, diffs, same)| *diffs > 0 || !same)
            .map(|(id, diffs, _)| format!("{id}: {diffs} diffs"))
            .collect();
        ensure!(bad.is_empty(), "{}", bad.join(", "));
        Ok("50 logs (25 oracle, 25 random) replay with zero diffs".into())
    });
}

fn posed(pool: &[SceneConfig], seed: u64) -> WorldState {
    let mut state = WorldState::new(pool[(seed % pool.len() as u64) as usize].clone());
    state.pose = free_pose(&state, &mut rng(seed));
    state
}

#[test]
fn geometry_oracles() {
    criterion("geometry oracles", || {
        let pool = scene_pool();
        let mut draws = rng(99);

        let (mut checked, mut ties, mut hits) = (0, 0, 0);
        while checked < 1000 {
            let mut state = posed(&pool, draws.random());
            if checked % 2 == 0 {
                aim_at_object(&mut state, &mut draws);
            }
            let cam = state.camera();
            let oracle = oracle_pick(&state, support::eye_of(&state.pose), view_dir(state.pose.yaw, state.pose.pitch));
            if oracle.margin <= 1e-9 {
                ties += 1;
                continue;
            }
            let pick = center_ray_pick(&state, &cam).map(|p| p.placement);
            ensure!(pick == oracle.hit.map(|h| h.0), "pick {pick:?} vs brute force {:?}", oracle.hit);
            hits += usize::from(pick.is_some());
            checked += 1;
        }

        let (mut centered, mut clamped) = (0, 0);
        while centered < 1000 {
            let state = posed(&pool, draws.random());
            let (u, v): (f64, f64) = (draws.random(), draws.random());
            let cam = state.camera();
            let dir = cam.ray(u, v);
            let point = cam.eye() + dir * cast_ray(&state, cam.eye(), dir).distance;
            let (yaw, pitch) = look_at_to_angles(&cam, u, v).unwrap();
            if pitch.abs() > 85.0 {
                clamped += 1;
                continue;
            }
            let turned = Camera::agent(AgentPose::new(state.pose.position[0], state.pose.position[1], yaw, pitch));
            let (pu, pv) = turned.project(point).ok_or("chosen point left the view")?;
            let px = cam.width as f64;
            ensure!(((pu - 0.5) * px).abs() <= 1.0 && ((pv - 0.5) * px).abs() <= 1.0, "landed at ({pu}, {pv})");
            centered += 1;
        }

        for seed in 0..100 {
            let mut state = posed(&pool, seed);
            let before = state.pose;
            state.step(&AgentAction { look_at: Some([0.5, 0.5]), ..AgentAction::default() }).unwrap();
            ensure!(state.pose == before, "look_at(0.5, 0.5) moved {before:?} to {:?}", state.pose);
        }
        Ok(format!(
            "1000 picks exact ({hits} hits, {ties} ties redrawn), 1000 look_at within 1 px ({clamped} near clamps redrawn), center no-op"
        ))
    });
}

#[test]
fn determinism() {
    criterion("determinism", || {
        for label in DifficultyLabel::STANDARD {
            for seed in [0u64, 9, 77_777] {
                let a = to_toml(&generate_scene(label, style_for(seed), seed).unwrap()).unwrap();
                let b = to_toml(&generate_scene(label, style_for(seed), seed).unwrap()).unwrap();
                ensure!(a == b, "{label} seed {seed} differs");
            }
        }
        let scene = generate("d1+d2", Style::Bedroom, 5).unwrap();
        let script = roomescape::oracle::oracle_policy(&scene).unwrap().raw_actions();
        let run = |agent: &mut dyn AgentEndpoint| run_episode(&scene, agent, &EpisodeOptions::default()).unwrap().to_jsonl();
        ensure!(run(&mut OracleAgent::new()) == run(&mut OracleAgent::new()), "oracle episode differs");
        ensure!(run(&mut RandomAgent::new(3, 0.3)) == run(&mut RandomAgent::new(3, 0.3)), "random episode differs");
        ensure!(
            run(&mut ScriptedAgent::new(script.clone())) == run(&mut ScriptedAgent::new(script)),
            "scripted episode differs"
        );
        Ok("scene files and oracle, random and scripted logs are byte-identical".into())
    });
}

fn golden(name: &str, slots: &[(&str, &str)]) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let mut text = std::fs::read_to_string(path).unwrap();
    for (k, v) in slots {
        text = text.replace(&format!("{{{k}}}"), v);
    }
    text
}

fn same_lines(name: &str, expected: &str, actual: &str) -> Result<(), String> {
    let exp: Vec<&str> = expected.trim_end().lines().map(str::trim_end).collect();
    let act: Vec<&str> = actual.trim_end().lines().map(str::trim_end).collect();
    if let Some(i) = (0..exp.len().min(act.len())).find(|&i| exp[i] != act[i]) {
        return Err(format!("{name} line {}: {:?} vs {:?}", i + 1, exp[i], act[i]));
    }
    ensure!(exp.len() == act.len(), "{name}: {} golden lines, {} produced", exp.len(), act.len());
    Ok(())
}

#[test]
fn prompt_fidelity() {
    criterion("prompt fidelity", || {
        same_lines("system_prompt.txt", &golden("system_prompt.txt", &[]), &system_prompt())?;
        for (result, bag) in [(feedback::NO_INTERACTION, "None"), (feedback::ESCAPED, "key_1: a brass key")] {
            let slots = [("interaction_result", result), ("bag_desc", bag)];
            same_lines("step_prompt.txt", &golden("step_prompt.txt", &slots), &step_prompt(result, bag))?;
        }
        let (r, s) = ("Open the box with the code.", "You used the correct password to unlock the box_1.");
        let slots = [("rationale", r), ("response", s)];
        same_lines("consistency_prompt.txt", &golden("consistency_prompt.txt", &slots), &build_consistency_prompt(r, s))?;
        for (i, prompt) in debrief_prompts().iter().enumerate() {
            let name = format!("debrief_{}.txt", i + 1);
            same_lines(&name, &golden(&name, &[]), prompt)?;
        }
        ensure!(feedback::ESCAPED == "Escaped successfully!", "escape string {:?}", feedback::ESCAPED);
        ensure!(
            feedback::NO_INTERACTION == "You did not interact with any objects in the last step.",
            "no-interaction string {:?}",
            feedback::NO_INTERACTION
        );
        Ok("system, step, consistency and 3 debrief prompts match golden files".into())
    });
}

#[test]
fn judge_pipeline() {
    criterion("judge pipeline", || {
        let (_, log) = crafted();
        let report = compute_cio(&log, &StubJudge::default(), 4).map_err(|e| e.to_string())?;
        ensure!(report.cio == Some(0.75) && report.exact == "3/4", "C_IO {:?} ({})", report.cio, report.exact);
        let rules = "when (?m)^rationale: Type the password reply I think so, yes.\nbuiltin consistency-mention\n";
        let judge = StubJudge::from_rules(rules).map_err(|e| e.to_string())?;
        let partial = compute_cio(&log, &judge, 2).map_err(|e| e.to_string())?;
        ensure!(
            (partial.n_evaluated, partial.n_excluded) == (3, 1),
            "evaluated {}, excluded {}",
            partial.n_evaluated,
            partial.n_excluded
        );
        Ok(format!("C_IO = {} exactly; 1 non-conforming reply excluded and counted", report.exact))
    });
}

#[test]
fn aggregation_semantics() {
    criterion("aggregation semantics", || {
        let logs: Vec<EpisodeLog> = (0..11u64)
            .map(|s| {
                let scene = generate("d1", style_for(s), s).unwrap();
                synth_log(&scene, "phi", (0..50).map(|_| Synth::idle()).collect(), 50)
            })
            .collect();
        ensure!(logs.iter().all(|l| l.outcome == Outcome::Failed), "a synthetic log escaped");
        let report = aggregate_benchmark(&logs).map_err(|e| e.to_string())?;
        let g = &report.rows[0].groups["difficulty-1"];
        ensure!(g.episodes == 11, "{} episodes", g.episodes);
        ensure!(
            (g.escape_rate.display.as_str(), g.mean_steps.display.as_str()) == ("0.00", "50.00"),
            "ER {} steps {}",
            g.escape_rate.display,
            g.mean_steps.display
        );
        Ok("11 failed D1 episodes: ER 0.00, steps 50.00".into())
    });
}

#[test]
fn movement_distance_analysis() {
    criterion("movement-distance analysis", || {
        let scenes: Vec<SceneConfig> = standard_suite(20, 4).iter().map(|s| s.resolve().unwrap()).collect();
        let pairs: Vec<(EpisodeLog, f64)> = scenes
            .par_iter()
            .map(|scene| (oracle_log(scene), validate_solvable(scene).path_length.unwrap()))
            .collect();
        let logs: Vec<EpisodeLog> = pairs.iter().map(|(l, _)| l.clone()).collect();
        let corr = movement_correlation(&logs).map_err(|e| e.to_string())?;
        let moved: Vec<f64> = logs.iter().map(EpisodeLog::distance_moved).collect();
        let optimal: Vec<f64> = pairs.iter().map(|(_, d)| *d).collect();
        let reference = support::pearson(&moved, &optimal);
        ensure!(!corr.degenerate && corr.n == logs.len(), "degenerate or short series ({} of {})", corr.n, logs.len());
        ensure!((corr.r - reference).abs() < 1e-9, "library r {} vs reference {reference}", corr.r);
        ensure!(corr.r > 0.99, "r = {}", corr.r);
        Ok(format!("r = {:.6} over {} oracle logs, reference {reference:.6}", corr.r, corr.n))
    });
}
