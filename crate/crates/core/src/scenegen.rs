//! Procedural room generation and multi-room composition.
//!
//! Generation is a pure function of `(difficulty, style, seed)`: every random
//! draw comes from a ChaCha8 stream seeded by mixing those three values.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::catalog::{entries_for, CatalogEntry, Mount, Style};
use crate::geometry::{Aabb, Rect};
use crate::oracle::validate_solvable;
use crate::propchain::{build_difficulty_chain, ChainError, DifficultyLabel, Level, PropChain, PropKind};
use crate::scene::{
    DoorRole, Placement, PlacementKind, RoomScene, SceneConfig, Wall, DOOR_DEPTH, DOOR_HEIGHT, DOOR_WIDTH,
    FORMAT_VERSION,
};
use crate::story::stories_for;
use crate::world::{AgentPose, AGENT_RADIUS};

pub const WALL_HEIGHT: f64 = 3.0;
pub const ROOM_MIN: f64 = 6.0;
pub const ROOM_MAX: f64 = 10.0;
pub const PLACEMENT_ATTEMPTS: usize = 200;
pub const GENERATION_ATTEMPTS: u64 = 24;
pub const WALL_BIAS: f64 = 0.7;
pub const MULTIROOM_STEP_LIMIT: u32 = 80;
/// Keep-out depth in front of every door.
const DOOR_CLEARANCE: f64 = 1.4;
/// Half side of the keep-out square around the start position.
const START_CLEARANCE: f64 = 0.8;
/// Largest share of the floor covered by floor furniture.
const FLOOR_COVER_MAX: f64 = 0.3;
/// Gap kept between furniture and the wall it backs onto.
const WALL_GAP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneGenError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("could not place every object after {0} attempts; try another seed")]
    Placement(u64),
    #[error("no solvable layout after {attempts} attempts: {reason}")]
    Unsolvable { attempts: u64, reason: String },
    #[error("compose_multiroom expects single-room scenes")]
    NotSingleRoom,
    #[error("no free span on the shared wall for the entrance door")]
    NoSharedWall,
}

/// Decoy count drawn for a difficulty: 20 for one hop, 15 otherwise, +-3.
pub fn decoy_target(label: DifficultyLabel) -> u32 {
    match label.hops() {
        Some(1) => 20,
        _ => 15,
    }
}

/// Size of a chain prop (x, z, y) at yaw 0.
pub fn prop_size(kind: PropKind) -> [f64; 3] {
    match kind {
        PropKind::Key => [0.16, 0.07, 0.03],
        PropKind::Paper => [0.21, 0.28, 0.01],
        _ => [0.4, 0.3, 0.25],
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Seed of the random stream for one generation attempt.
pub fn stream_seed(label: DifficultyLabel, style: Style, seed: u64, attempt: u64) -> u64 {
    splitmix(splitmix(seed ^ fnv(label.as_str())) ^ fnv(style.as_str()).rotate_left(17) ^ attempt)
}

fn mm(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn rotated(size: [f64; 3], yaw: f64) -> [f64; 3] {
    if (yaw / 90.0).round() as i64 % 2 == 1 {
        [size[1], size[0], size[2]]
    } else {
        size
    }
}

/// Door placement against `wall` at `offset` along it.
pub fn door_placement(wall: Wall, width: f64, depth: f64, offset: f64, object: &str, role: DoorRole) -> Placement {
    let position = wall.point(width, depth, offset, DOOR_DEPTH / 2.0);
    let size = match wall {
        Wall::South | Wall::North => [DOOR_WIDTH, DOOR_DEPTH, DOOR_HEIGHT],
        Wall::East | Wall::West => [DOOR_DEPTH, DOOR_WIDTH, DOOR_HEIGHT],
    };
    Placement {
        object: object.to_string(),
        kind: PlacementKind::Door,
        role: Some(role),
        position: [mm(position[0]), mm(position[1])],
        y: 0.0,
        yaw: wall.inward_yaw(),
        size,
    }
}

/// Floor keep-out zone in front of a door.
fn door_zone(wall: Wall, width: f64, depth: f64, offset: f64) -> Rect {
    let half = DOOR_WIDTH / 2.0 + AGENT_RADIUS;
    let (a, b) = (offset - half, offset + half);
    match wall {
        Wall::South => Rect::new(a, 0.0, b, DOOR_CLEARANCE),
        Wall::North => Rect::new(a, depth - DOOR_CLEARANCE, b, depth),
        Wall::West => Rect::new(0.0, a, DOOR_CLEARANCE, b),
        Wall::East => Rect::new(width - DOOR_CLEARANCE, a, width, b),
    }
}

struct Layout {
    width: f64,
    depth: f64,
    placements: Vec<Placement>,
    zones: Vec<Rect>,
}

impl Layout {
    fn fits(&self, p: &Placement) -> bool {
        let b = p.aabb();
        if b.min.x < 0.0 || b.min.z < 0.0 || b.max.x > self.width || b.max.z > self.depth || b.max.y > WALL_HEIGHT {
            return false;
        }
        if p.y == 0.0 && self.zones.iter().any(|z| z.overlaps(&p.footprint())) {
            return false;
        }
        self.placements.iter().all(|o| !o.aabb().overlaps(&b))
    }

    fn hosts(&self) -> Vec<usize> {
        self.placements
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                p.kind == PlacementKind::Furniture
                    && crate::catalog::lookup(&p.object).is_some_and(|e| e.surface_height.is_some())
            })
            .map(|(i, _)| i)
            .collect()
    }

    fn place_floor(&mut self, rng: &mut ChaCha8Rng, object: &str, kind: PlacementKind, size: [f64; 3]) -> bool {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let p = if kind == PlacementKind::Furniture && rng.random_bool(WALL_BIAS) {
                let wall = Wall::ALL[rng.random_range(0..4)];
                let yaw = wall.inward_yaw();
                let s = rotated(size, yaw);
                let (along, across) = match wall {
                    Wall::South | Wall::North => (s[0], s[1]),
                    Wall::East | Wall::West => (s[1], s[0]),
                };
                let len = wall.length(self.width, self.depth);
                if along >= len {
                    continue;
                }
                let offset = rng.random_range(along / 2.0..=len - along / 2.0);
                let pos = wall.point(self.width, self.depth, offset, across / 2.0 + WALL_GAP);
                Placement {
                    object: object.to_string(),
                    kind,
                    role: None,
                    position: [mm(pos[0]), mm(pos[1])],
                    y: 0.0,
                    yaw,
                    size: s,
                }
            } else {
                let yaw = 90.0 * rng.random_range(0..4) as f64;
                let s = rotated(size, yaw);
                if s[0] + 0.04 >= self.width || s[1] + 0.04 >= self.depth {
                    continue;
                }
                let x = rng.random_range(s[0] / 2.0 + 0.02..=self.width - s[0] / 2.0 - 0.02);
                let z = rng.random_range(s[1] / 2.0 + 0.02..=self.depth - s[1] / 2.0 - 0.02);
                Placement {
                    object: object.to_string(),
                    kind,
                    role: None,
                    position: [mm(x), mm(z)],
                    y: 0.0,
                    yaw,
                    size: s,
                }
            };
            if self.fits(&p) {
                self.placements.push(p);
                return true;
            }
        }
        false
    }

    /// Puts a small object on a random host surface, else on the floor.
    fn place_small(&mut self, rng: &mut ChaCha8Rng, object: &str, kind: PlacementKind, size: [f64; 3]) -> bool {
        let mut hosts = self.hosts();
        hosts.shuffle(rng);
        for h in hosts {
            let host = self.placements[h].clone();
            let hb = host.aabb();
            for _ in 0..PLACEMENT_ATTEMPTS / 10 {
                let yaw = 90.0 * rng.random_range(0..4) as f64;
                let s = rotated(size, yaw);
                let (w, d) = (hb.max.x - hb.min.x, hb.max.z - hb.min.z);
                if s[0] + 0.04 > w || s[1] + 0.04 > d {
                    break;
                }
                let x = rng.random_range(hb.min.x + s[0] / 2.0 + 0.02..=hb.max.x - s[0] / 2.0 - 0.02);
                let z = rng.random_range(hb.min.z + s[1] / 2.0 + 0.02..=hb.max.z - s[1] / 2.0 - 0.02);
                let p = Placement {
                    object: object.to_string(),
                    kind,
                    role: None,
                    position: [mm(x), mm(z)],
                    y: host.top(),
                    yaw,
                    size: s,
                };
                let inside = {
                    let f = p.footprint();
                    f.min_x >= hb.min.x && f.max_x <= hb.max.x && f.min_z >= hb.min.z && f.max_z <= hb.max.z
                };
                if inside && self.fits(&p) {
                    self.placements.push(p);
                    return true;
                }
            }
        }
        self.place_floor(rng, object, kind, size)
    }
}

/// Splices story excerpts (and password digits) into the chain's notes.
fn splice_story(chain: &mut PropChain, sentences: &[&str], text_of: impl Fn(std::ops::Range<usize>) -> String) {
    let papers: Vec<usize> = chain
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.kind == PropKind::Paper)
        .map(|(i, _)| i)
        .collect();
    let n = sentences.len();
    let k = papers.len().max(1);
    for (slot, &i) in papers.iter().enumerate() {
        let range = (slot * n / k)..((slot + 1) * n / k);
        let mut detail = text_of(range);
        let digits = chain.nodes[i]
            .contents
            .iter()
            .find_map(|c| chain.node(c).filter(|x| x.kind == PropKind::Password))
            .and_then(|pw| pw.detail.clone());
        if let Some(d) = digits {
            detail.push_str(&format!(" A number is scrawled at the bottom of the page: {d}."));
        }
        chain.nodes[i].detail = Some(detail);
    }
}

fn attempt_layout(
    label: DifficultyLabel,
    style: Style,
    chain: &PropChain,
    rng: &mut ChaCha8Rng,
) -> Option<(RoomScene, AgentPose)> {
    let width = (rng.random_range(ROOM_MIN..=ROOM_MAX) * 10.0).round() / 10.0;
    let depth = (rng.random_range(ROOM_MIN..=ROOM_MAX) * 10.0).round() / 10.0;
    let mut layout = Layout {
        width,
        depth,
        placements: Vec::new(),
        zones: Vec::new(),
    };

    let wall = Wall::ALL[rng.random_range(0..4)];
    let len = wall.length(width, depth);
    let offset = mm(rng.random_range(1.0..=len - 1.0));
    let exit = chain.tail().map(|n| n.id.clone()).unwrap_or_else(|| "exit".into());
    layout
        .placements
        .push(door_placement(wall, width, depth, offset, &exit, DoorRole::Exit));
    layout.zones.push(door_zone(wall, width, depth, offset));

    let start = loop {
        let x = mm(rng.random_range(1.0..=width - 1.0));
        let z = mm(rng.random_range(1.0..=depth - 1.0));
        if !layout.zones[0].inflate(AGENT_RADIUS).contains_open(x, z) {
            break [x, z];
        }
    };
    let yaw = rng.random_range(0..360) as f64;
    layout.zones.push(Rect::new(
        start[0] - START_CLEARANCE,
        start[1] - START_CLEARANCE,
        start[0] + START_CLEARANCE,
        start[1] + START_CLEARANCE,
    ));

    let pool: Vec<&CatalogEntry> = entries_for(style).collect();
    let smalls: Vec<&CatalogEntry> = pool.iter().copied().filter(|e| e.mount == Mount::Surface).collect();
    let target = decoy_target(label) as i64 + rng.random_range(-3..=3);
    let mut floor_area = 0.0;
    let mut floors = Vec::new();
    let mut small_draws = Vec::new();
    for _ in 0..target {
        let mut e = pool[rng.random_range(0..pool.len())];
        if e.mount == Mount::Floor && floor_area + e.footprint_area() > FLOOR_COVER_MAX * width * depth {
            e = smalls[rng.random_range(0..smalls.len())];
        }
        if e.mount == Mount::Floor {
            floor_area += e.footprint_area();
            floors.push(e);
        } else {
            small_draws.push(e);
        }
    }
    floors.sort_by(|a, b| b.footprint_area().total_cmp(&a.footprint_area()));
    for e in floors {
        if !layout.place_floor(rng, e.name, PlacementKind::Furniture, e.size) {
            return None;
        }
    }
    for n in chain.nodes.iter().filter(|n| n.show && !n.kind.is_door()) {
        if !layout.place_small(rng, &n.id, PlacementKind::Prop, prop_size(n.kind)) {
            return None;
        }
    }
    for e in small_draws {
        if !layout.place_small(rng, e.name, PlacementKind::Furniture, e.size) {
            return None;
        }
    }
    let room = RoomScene {
        width,
        depth,
        wall_height: WALL_HEIGHT,
        style,
        entry: None,
        chain: chain.clone(),
        placements: layout.placements,
    };
    Some((room, AgentPose::new(start[0], start[1], yaw, 0.0)))
}

/// Generates a solvable single-room scene. Deterministic in its arguments.
pub fn generate_scene(label: DifficultyLabel, style: Style, seed: u64) -> Result<SceneConfig, SceneGenError> {
    let mut chain = build_difficulty_chain(label, seed)?;
    let mut story_rng = ChaCha8Rng::seed_from_u64(stream_seed(label, style, seed, u64::MAX));
    let stories = stories_for(style);
    let story = stories[story_rng.random_range(0..stories.len())];
    splice_story(&mut chain, story.sentences, |r| story.excerpt(r));

    let mut last_reason = None;
    for attempt in 0..GENERATION_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(label, style, seed, attempt));
        let Some((room, start)) = attempt_layout(label, style, &chain, &mut rng) else {
            continue;
        };
        let config = SceneConfig {
            format_version: FORMAT_VERSION,
            scene_id: format!("{label}-{style}-{seed}"),
            seed,
            step_limit: label.step_limit().unwrap_or(100),
            agent_start: start,
            story_text: story.text(),
            rooms: vec![room],
        };
        let report = validate_solvable(&config);
        if report.ok {
            return Ok(config);
        }
        last_reason = report.reason;
    }
    match last_reason {
        Some(reason) => Err(SceneGenError::Unsolvable {
            attempts: GENERATION_ATTEMPTS,
            reason,
        }),
        None => Err(SceneGenError::Placement(GENERATION_ATTEMPTS)),
    }
}

/// Next free id for a colliding `id`: bumps a trailing `_N`, else appends `_2`.
fn bump_id(id: &str, taken: &BTreeSet<String>) -> String {
    let (stem, n) = match id.rsplit_once('_') {
        Some((s, num)) if num.parse::<u32>().is_ok() => (s.to_string(), num.parse::<u32>().unwrap_or(1)),
        _ => (id.to_string(), 1),
    };
    (n + 1..)
        .map(|k| format!("{stem}_{k}"))
        .find(|c| !taken.contains(c))
        .expect("unbounded search")
}

/// Joins two single-room scenes: the first room's exit leads into the
/// second, which gains an entrance door on the wall opposite its exit.
pub fn compose_multiroom(first: &SceneConfig, second: &SceneConfig) -> Result<SceneConfig, SceneGenError> {
    if first.rooms.len() != 1 || second.rooms.len() != 1 {
        return Err(SceneGenError::NotSingleRoom);
    }
    let r1 = first.rooms[0].clone();
    let mut r2 = second.rooms[0].clone();

    let mut taken: BTreeSet<String> = r1.chain.ids().chain(r2.chain.ids()).map(String::from).collect();
    let mut map = BTreeMap::new();
    for n in &r2.chain.nodes {
        if n.kind.is_door() || r1.chain.node(&n.id).is_none() {
            continue;
        }
        let fresh = bump_id(&n.id, &taken);
        taken.insert(fresh.clone());
        map.insert(n.id.clone(), fresh);
    }
    if !map.is_empty() {
        r2.chain = r2.chain.renamed(&map);
        for p in &mut r2.placements {
            if p.kind == PlacementKind::Prop {
                if let Some(new) = map.get(&p.object) {
                    p.object = new.clone();
                }
            }
        }
    }

    let exit2 = r2.exit_door().ok_or(SceneGenError::NoSharedWall)?.clone();
    let shared = r2.wall_of(&exit2).opposite();
    let len2 = shared.length(r2.width, r2.depth);
    let preferred = r1
        .exit_door()
        .map(|d| r1.wall_of(d).offset_of(d.position))
        .unwrap_or(len2 / 2.0)
        .clamp(0.8, len2 - 0.8);
    let mut offsets: Vec<f64> = (0..)
        .map(|k| 0.8 + 0.05 * k as f64)
        .take_while(|o| *o <= len2 - 0.8)
        .map(mm)
        .collect();
    offsets.sort_by(|a, b| (a - preferred).abs().total_cmp(&(b - preferred).abs()));
    let inset = DOOR_DEPTH + AGENT_RADIUS + 0.35;
    let mut placed = false;
    for o in offsets {
        let door = door_placement(shared, r2.width, r2.depth, o, "entrance", DoorRole::Entrance);
        let b: Aabb = door.aabb();
        if r2.placements.iter().any(|p| p.aabb().overlaps(&b)) {
            continue;
        }
        let entry = shared.point(r2.width, r2.depth, o, inset);
        let mut with_door = r2.clone();
        with_door.placements.push(door.clone());
        if !with_door.disc_is_free(entry[0], entry[1], 0.1) {
            continue;
        }
        r2.placements.push(door);
        r2.entry = Some(AgentPose::new(mm(entry[0]), mm(entry[1]), shared.inward_yaw(), 0.0));
        placed = true;
        break;
    }
    if !placed {
        return Err(SceneGenError::NoSharedWall);
    }

    Ok(SceneConfig {
        format_version: FORMAT_VERSION,
        scene_id: format!("{}+{}", first.scene_id, second.scene_id),
        seed: first.seed,
        step_limit: MULTIROOM_STEP_LIMIT,
        agent_start: first.agent_start,
        story_text: format!("{}\n\n{}", first.story_text, second.story_text),
        rooms: vec![r1, r2],
    })
}

/// Generates two rooms and composes them, retrying derived seeds until the
/// composed game is solvable.
pub fn generate_multiroom(
    first: DifficultyLabel,
    second: DifficultyLabel,
    style: Style,
    seed: u64,
) -> Result<SceneConfig, SceneGenError> {
    let mut last = String::from("no attempt");
    for attempt in 0..GENERATION_ATTEMPTS {
        let s1 = splitmix(seed ^ 0x0001_0000 ^ (attempt << 32));
        let s2 = splitmix(seed ^ 0x0002_0000 ^ (attempt << 32));
        let a = generate_scene(first, style, s1 >> 1)?;
        let b = generate_scene(second, style, s2 >> 1)?;
        match compose_multiroom(&a, &b) {
            Ok(mut scene) => {
                scene.scene_id = format!("{}+{}-{}-{}", first, second, style, seed);
                scene.seed = seed;
                let report = validate_solvable(&scene);
                if report.ok {
                    return Ok(scene);
                }
                last = report.reason.unwrap_or_default();
            }
            Err(e) => last = e.to_string(),
        }
    }
    Err(SceneGenError::Unsolvable {
        attempts: GENERATION_ATTEMPTS,
        reason: last,
    })
}
/// Generates from a textual level: `d1`, `d3-note-key`, a generic `d2`
/// resolved by seed, or two levels joined with `+` for a two-room game.
pub fn generate(level: &str, style: Style, seed: u64) -> Result<SceneConfig, SceneGenError> {
    match level.split_once('+') {
        Some((a, b)) => {
            let a: Level = a.parse()?;
            let b: Level = b.parse()?;
            generate_multiroom(a.resolve(seed), b.resolve(seed), style, seed)
        }
        None => {
            let l: Level = level.parse()?;
            generate_scene(l.resolve(seed), style, seed)
        }
    }
}

