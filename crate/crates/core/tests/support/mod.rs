//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use roomescape::catalog::Style;
use roomescape::propchain::PropKind;
use roomescape::geometry::{Aabb, Vec3};
use roomescape::scenegen::generate;
use roomescape::scene::SceneConfig;
use roomescape::world::{AgentPose, WorldState, AGENT_RADIUS, EYE_HEIGHT};

/// Entry and exit parameters of a ray against a box, by the slab method,
/// written without reference to the library's own box code.
pub fn slab(b: &Aabb, o: Vec3, d: Vec3) -> Option<(f64, f64)> {
    let (mut near, mut far) = (f64::NEG_INFINITY, f64::INFINITY);
    let axes = [(o.x, d.x, b.min.x, b.max.x), (o.y, d.y, b.min.y, b.max.y), (o.z, d.z, b.min.z, b.max.z)];
    for (oo, dd, lo, hi) in axes {
        if dd.abs() < 1e-300 {
            if oo < lo || oo > hi {
                return None;
            }
        } else {
            let t1 = (lo - oo) / dd;
            let t2 = (hi - oo) / dd;
            near = near.max(t1.min(t2));
            far = far.min(t1.max(t2));
        }
    }
    (near <= far).then_some((near, far))
}

/// Distance along the ray to the inside of the room shell.
pub fn shell_distance(width: f64, height: f64, depth: f64, o: Vec3, d: Vec3) -> f64 {
    let mut t = f64::INFINITY;
    for (oo, dd, hi) in [(o.x, d.x, width), (o.y, d.y, height), (o.z, d.z, depth)] {
        if dd > 0.0 {
            t = t.min((hi - oo) / dd);
        } else if dd < 0.0 {
            t = t.min(-oo / dd);
        }
    }
    t
}

/// Brute-force pick: index and distance of the nearest visible box in front
/// of the eye, when it is closer than the room shell. Also returns the gap
/// to the runner-up surface so callers can skip numerically ambiguous rays.
pub struct OraclePick {
    pub hit: Option<(usize, f64)>,
    pub margin: f64,
}

pub fn oracle_pick(state: &WorldState, o: Vec3, d: Vec3) -> OraclePick {
    let room = state.room();
    let shell = shell_distance(room.width, room.wall_height, room.depth, o, d);
    let mut cands: Vec<(f64, usize)> = state
        .visible()
        .filter_map(|(i, p)| {
            let (near, far) = slab(&p.aabb(), o, d)?;
            (near > 0.0 && near < far).then_some((near, i))
        })
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut surfaces: Vec<f64> = cands.iter().map(|c| c.0).collect();
    surfaces.push(shell);
    surfaces.sort_by(f64::total_cmp);
    let margin = if surfaces.len() > 1 { surfaces[1] - surfaces[0] } else { f64::INFINITY };
    let hit = cands.first().filter(|c| c.0 < shell).map(|c| (c.1, c.0));
    OraclePick { hit, margin }
}

/// Unit view direction from yaw and pitch, straight from the angle
/// convention: yaw 0 faces +z, yaw 90 faces +x, positive pitch looks down.
pub fn view_dir(yaw: f64, pitch: f64) -> Vec3 {
    let (y, p) = (yaw.to_radians(), pitch.to_radians());
    Vec3::new(y.sin() * p.cos(), -p.sin(), y.cos() * p.cos())
}

/// A fixed set of generated scenes across all levels and styles.
pub fn scene_pool() -> Vec<SceneConfig> {
    let levels = ["d1", "d2-key", "d2-password", "d3-key-note", "d3-note-key"];
    levels
        .iter()
        .enumerate()
        .flat_map(|(i, l)| {
            (0..2u64).map(move |k| {
                let style = Style::ALL[(i + k as usize) % Style::ALL.len()];
                generate(l, style, 100 + k).unwrap()
            })
        })
        .collect()
}

/// A pose whose agent disc is clear of walls and placements.
pub fn free_pose(state: &WorldState, rng: &mut ChaCha8Rng) -> AgentPose {
    let room = state.room();
    loop {
        let x = rng.random_range(AGENT_RADIUS..room.width - AGENT_RADIUS);
        let z = rng.random_range(AGENT_RADIUS..room.depth - AGENT_RADIUS);
        if room.disc_is_free(x, z, 0.0) {
            return AgentPose::new(x, z, rng.random_range(0.0..360.0), rng.random_range(-89.0..89.0));
        }
    }
}

/// Turns the agent toward a random point inside a random visible placement.
pub fn aim_at_object(state: &mut WorldState, rng: &mut ChaCha8Rng) {
    let boxes: Vec<Aabb> = state.visible().map(|(_, p)| p.aabb()).collect();
    let b = boxes[rng.random_range(0..boxes.len())];
    let mut within = |lo: f64, hi: f64| lo + (hi - lo) * rng.random_range(0.05..0.95);
    let target = Vec3::new(within(b.min.x, b.max.x), within(b.min.y, b.max.y), within(b.min.z, b.max.z));
    let eye = eye_of(&state.pose);
    let (dx, dy, dz) = (target.x - eye.x, target.y - eye.y, target.z - eye.z);
    let yaw = dx.atan2(dz).to_degrees().rem_euclid(360.0);
    let pitch = (-dy).atan2((dx * dx + dz * dz).sqrt()).to_degrees().clamp(-89.0, 89.0);
    state.pose = AgentPose::new(state.pose.position[0], state.pose.position[1], yaw, pitch);
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn eye_of(p: &AgentPose) -> Vec3 {
    Vec3::new(p.position[0], EYE_HEIGHT, p.position[1])
}

/// Textbook sample Pearson coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
    let sxx: f64 = xs.iter().map(|a| a * a).sum();
    let syy: f64 = ys.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// One hand-written step of a synthetic log.
#[derive(Debug, Clone, Default)]
pub struct Synth {
    pub grab: bool,
    pub ok: bool,
    pub granted: Vec<String>,
    pub escaped: bool,
    pub rationale: String,
    pub feedback: String,
    pub moved: f64,
}

impl Synth {
    pub fn idle() -> Self {
        Synth {
            feedback: roomescape::protocol::feedback::NO_INTERACTION.into(),
            ..Synth::default()
        }
    }

    pub fn grab(ok: bool) -> Self {
        Synth { grab: true, ok, ..Synth::idle() }
    }

    pub fn gets(id: &str) -> Self {
        Synth { granted: vec![id.into()], ..Synth::grab(true) }
    }

    pub fn escape() -> Self {
        Synth {
            escaped: true,
            feedback: roomescape::protocol::feedback::ESCAPED.into(),
            ..Synth::grab(true)
        }
    }
}

/// Assembles a log for `scene` from hand-written steps, with marks derived
/// from the grants and the outcome from the last step.
pub fn synth_log(scene: &SceneConfig, agent: &str, steps: Vec<Synth>, step_limit: u32) -> roomescape::log::EpisodeLog {
    use roomescape::log::{compute_marks, EpisodeLog, LogHeader, Outcome, StepRecord, LOG_VERSION};
    use roomescape::world::Status;
    let n = steps.len();
    let records: Vec<StepRecord> = steps
        .into_iter()
        .enumerate()
        .map(|(i, s)| StepRecord {
            index: i as u32 + 1,
            raw_action: "{}".into(),
            parsed: None,
            parse_error: None,
            rationale: s.rationale,
            feedback: s.feedback,
            bag_description: "None".into(),
            granted: s.granted,
            grab_attempted: s.grab,
            grab_succeeded: s.ok,
            pose_after: scene.agent_start,
            room_after: 0,
            status_after: if s.escaped {
                Status::Escaped
            } else if i + 1 == step_limit as usize {
                Status::Failed
            } else {
                Status::Running
            },
            frame_ref: roomescape::world::frame_ref(i as u32 + 1),
            distance_moved: s.moved,
        })
        .collect();
    let outcome = match records.last().map(|r| r.status_after) {
        Some(Status::Escaped) => Outcome::Escaped,
        _ => Outcome::Failed,
    };
    EpisodeLog {
        header: LogHeader {
            log_version: LOG_VERSION,
            scene_id: scene.scene_id.clone(),
            seed: scene.seed,
            agent: agent.into(),
            difficulty: scene.difficulty(),
            group: scene.group(),
            step_limit,
            required_interactions: scene.required_interaction_count().unwrap() as u32,
            scene: scene.clone(),
        },
        prefix: Vec::new(),
        marks: compute_marks(scene, &records),
        steps: records,
        outcome,
        total_steps: n as u32,
        abort_reason: None,
    }
}

/// Id of the first chain node of `kind` in the first room.
pub fn node_of(scene: &SceneConfig, kind: roomescape::propchain::PropKind) -> String {
    scene.rooms[0].chain.nodes.iter().find(|n| n.kind == kind).unwrap().id.clone()
}

pub fn said(mut s: Synth, rationale: &str, feedback: &str) -> Synth {
    s.rationale = rationale.into();
    s.feedback = feedback.into();
    s
}

/// A D3 key-note episode with four successful grabs, the third of which
/// hit a box the agent was not aiming at.
pub fn crafted() -> (SceneConfig, roomescape::log::EpisodeLog) {
    let scene = generate("d3-key-note", Style::Kitchen, 2).unwrap();
    let key = node_of(&scene, PropKind::Key);
    let boxed = node_of(&scene, PropKind::Box);
    let paper = node_of(&scene, PropKind::Paper);
    let pw = node_of(&scene, PropKind::Password);
    let steps = vec![
        Synth::idle(),
        said(Synth::gets(&key), &format!("Grab {key} on the shelf."), &format!("You picked up {key}.")),
        said(Synth::grab(false), "Try the fridge.", roomescape::protocol::feedback::NO_INTERACTION),
        said(
            Synth::gets(&paper),
            "Open the microwave with what I have.",
            &format!("You used {key} to unlock the box. You opened the box and found {paper}."),
        ),
        said(Synth::idle(), "", &format!("You read {paper}: the code is {pw}")),
        said(Synth::grab(true), &format!("Enter the code shown on {paper} at {boxed}... no, at the door."), &format!("You used the correct password to unlock the {boxed}.")),
        said(Synth::escape(), "Type the password into the door and leave.", roomescape::protocol::feedback::ESCAPED),
    ];
    let log = synth_log(&scene, "crafted", steps, 100);
    (scene, log)
}
