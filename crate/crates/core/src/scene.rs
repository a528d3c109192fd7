//! Serialized description of a generated game: rooms, placements, chains,
//! start pose, budget and the ground-truth story.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::catalog::Style;
use crate::geometry::{Aabb, Rect, Vec3};
use crate::propchain::{PropChain, PropKind, Violation};
use crate::world::{AgentPose, AGENT_RADIUS};

pub const FORMAT_VERSION: u32 = 1;

pub const DOOR_WIDTH: f64 = 1.0;
pub const DOOR_DEPTH: f64 = 0.1;
pub const DOOR_HEIGHT: f64 = 2.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementKind {
    /// Catalog decoy furniture or small decor.
    Furniture,
    /// A chain node placed in the room (key, box, note).
    Prop,
    Door,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoorRole {
    Exit,
    Entrance,
}

/// Walls in counter-clockwise order seen from above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    /// z = 0
    South,
    /// x = width
    East,
    /// z = depth
    North,
    /// x = 0
    West,
}

impl Wall {
    pub const ALL: [Wall; 4] = [Wall::South, Wall::East, Wall::North, Wall::West];

    pub fn opposite(self) -> Wall {
        match self {
            Wall::South => Wall::North,
            Wall::North => Wall::South,
            Wall::East => Wall::West,
            Wall::West => Wall::East,
        }
    }

    /// Yaw of a viewer standing at this wall and facing into the room.
    pub fn inward_yaw(self) -> f64 {
        match self {
            Wall::South => 0.0,
            Wall::East => 270.0,
            Wall::North => 180.0,
            Wall::West => 90.0,
        }
    }

    /// Length of this wall in a `width` x `depth` room.
    pub fn length(self, width: f64, depth: f64) -> f64 {
        match self {
            Wall::South | Wall::North => width,
            Wall::East | Wall::West => depth,
        }
    }

    /// Floor point at `offset` along the wall, pushed `inset` meters inward.
    pub fn point(self, width: f64, depth: f64, offset: f64, inset: f64) -> [f64; 2] {
        match self {
            Wall::South => [offset, inset],
            Wall::North => [offset, depth - inset],
            Wall::East => [width - inset, offset],
            Wall::West => [inset, offset],
        }
    }

    /// Offset along the wall of a floor point.
    pub fn offset_of(self, p: [f64; 2]) -> f64 {
        match self {
            Wall::South | Wall::North => p[0],
            Wall::East | Wall::West => p[1],
        }
    }
}

/// One object in a room. The bounding box is axis aligned: `size` already
/// reflects the yaw (which is always a multiple of 90 degrees).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    /// Catalog name, chain node id, or `entrance`.
    pub object: String,
    pub kind: PlacementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<DoorRole>,
    /// Footprint center (x, z).
    pub position: [f64; 2],
    /// Base height.
    pub y: f64,
    pub yaw: f64,
    /// Axis-aligned extent (x, z, y) in meters.
    pub size: [f64; 3],
}

impl Placement {
    pub fn aabb(&self) -> Aabb {
        let [w, d, h] = self.size;
        let [x, z] = self.position;
        Aabb::new(
            Vec3::new(x - w / 2.0, self.y, z - d / 2.0),
            Vec3::new(x + w / 2.0, self.y + h, z + d / 2.0),
        )
    }

    pub fn footprint(&self) -> Rect {
        let [w, d, _] = self.size;
        let [x, z] = self.position;
        Rect::new(x - w / 2.0, z - d / 2.0, x + w / 2.0, z + d / 2.0)
    }

    pub fn top(&self) -> f64 {
        self.y + self.size[2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomScene {
    pub width: f64,
    pub depth: f64,
    pub wall_height: f64,
    pub style: Style,
    /// Where the agent appears when it enters this room through its
    /// entrance; only set for rooms after the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<AgentPose>,
    pub chain: PropChain,
    pub placements: Vec<Placement>,
}

impl RoomScene {
    pub fn bounds(&self) -> Aabb {
        Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(self.width, self.wall_height, self.depth))
    }

    pub fn doors(&self) -> impl Iterator<Item = &Placement> {
        self.placements.iter().filter(|p| p.kind == PlacementKind::Door)
    }

    pub fn exit_door(&self) -> Option<&Placement> {
        self.doors().find(|p| p.role == Some(DoorRole::Exit))
    }

    pub fn placement_of(&self, object: &str) -> Option<(usize, &Placement)> {
        self.placements.iter().enumerate().find(|(_, p)| p.object == object && p.kind != PlacementKind::Furniture)
    }

    /// The wall a door placement stands against.
    pub fn wall_of(&self, p: &Placement) -> Wall {
        let [x, z] = p.position;
        let dists = [
            (Wall::South, z),
            (Wall::East, self.width - x),
            (Wall::North, self.depth - z),
            (Wall::West, x),
        ];
        dists
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(w, _)| w)
            .unwrap_or(Wall::South)
    }

    /// True when a disc of the agent radius at `(x, z)` is clear of walls
    /// and every placement footprint, with an extra `margin`.
    pub fn disc_is_free(&self, x: f64, z: f64, margin: f64) -> bool {
        let r = AGENT_RADIUS + margin;
        if x < r || z < r || x > self.width - r || z > self.depth - r {
            return false;
        }
        self.placements.iter().all(|p| !p.footprint().inflate(r).contains_open(x, z))
    }

    fn violations(&self, room_index: usize, out: &mut Vec<Violation>) {
        let tag = |s: &str| format!("room {room_index}: {s}");
        let mut push = |node: &str, rule: String| {
            out.push(Violation {
                node: node.to_string(),
                rule: tag(&rule),
            })
        };
        if self.width < 4.0 || self.depth < 4.0 {
            push("-", format!("room is {}x{} m, both sides must be at least 4 m", self.width, self.depth));
        }
        for v in self.chain.validate().violations {
            push(&v.node, v.rule);
        }
        let exits = self.doors().filter(|p| p.role == Some(DoorRole::Exit)).count();
        if exits != 1 {
            push("exit", format!("expected exactly one exit door, found {exits}"));
        }
        let entrances = self.doors().filter(|p| p.role == Some(DoorRole::Entrance)).count();
        if (room_index == 0 && entrances != 0) || (room_index > 0 && entrances != 1) {
            push("entrance", format!("unexpected entrance door count {entrances}"));
        }
        if room_index > 0 && self.entry.is_none() {
            push("entrance", "room after the first needs an entry pose".into());
        }
        for n in &self.chain.nodes {
            let placed = self
                .placements
                .iter()
                .filter(|p| p.object == n.id && p.kind != PlacementKind::Furniture)
                .count();
            let wanted = usize::from(n.show || n.kind == PropKind::Exit);
            if placed != wanted {
                push(&n.id, format!("expected {wanted} placement(s), found {placed}"));
            }
        }
        let ids: BTreeSet<&str> = self.chain.ids().collect();
        for p in &self.placements {
            match p.kind {
                PlacementKind::Prop if !ids.contains(p.object.as_str()) => {
                    push(&p.object, "placement references a node missing from the chain".into());
                }
                PlacementKind::Door if p.role.is_none() => push(&p.object, "door without a role".into()),
                _ => {}
            }
            let b = p.aabb();
            let eps = 1e-9;
            if b.min.x < -eps
                || b.min.z < -eps
                || b.min.y < -eps
                || b.max.x > self.width + eps
                || b.max.z > self.depth + eps
                || b.max.y > self.wall_height + eps
            {
                push(&p.object, "placement extends outside the room".into());
            }
            if p.size.iter().any(|s| *s <= 0.0) {
                push(&p.object, "placement size must be positive".into());
            }
        }
        for (i, a) in self.placements.iter().enumerate() {
            for b in &self.placements[i + 1..] {
                if a.aabb().overlaps(&b.aabb()) {
                    push(&a.object, format!("overlaps {}", b.object));
                }
            }
        }
        if let Some(entry) = &self.entry {
            if !self.disc_is_free(entry.position[0], entry.position[1], 0.0) {
                push("entrance", "entry pose collides with the room".into());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub format_version: u32,
    pub scene_id: String,
    pub seed: u64,
    pub step_limit: u32,
    pub agent_start: AgentPose,
    pub story_text: String,
    pub rooms: Vec<RoomScene>,
}

impl SceneConfig {
    pub fn is_multiroom(&self) -> bool {
        self.rooms.len() > 1
    }

    /// Difficulty labels of the rooms joined with `+`, e.g. `d1+d2-key`.
    pub fn difficulty(&self) -> String {
        self.rooms
            .iter()
            .map(|r| r.chain.difficulty.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Reporting group: `difficulty-N` for single rooms, joined with `&`
    /// for multi-room games.
    pub fn group(&self) -> String {
        self.rooms
            .iter()
            .map(|r| match r.chain.difficulty.hops() {
                Some(h) => format!("difficulty-{h}"),
                None => "custom".to_string(),
            })
            .collect::<Vec<_>>()
            .join("&")
    }

    /// Sum of required interactions over all rooms.
    pub fn required_interaction_count(&self) -> Result<usize, crate::propchain::ChainError> {
        self.rooms.iter().map(|r| r.chain.required_interaction_count()).sum()
    }

    /// Default budget for the rooms this scene contains.
    pub fn standard_step_limit(&self) -> Option<u32> {
        if self.is_multiroom() {
            return Some(80);
        }
        self.rooms.first()?.chain.difficulty.step_limit()
    }

    /// Structural checks: chains, placements, bounds, overlaps and start pose.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.rooms.is_empty() || self.rooms.len() > 2 {
            out.push(Violation {
                node: "-".into(),
                rule: format!("a game has one or two rooms, found {}", self.rooms.len()),
            });
            return out;
        }
        for (i, room) in self.rooms.iter().enumerate() {
            room.violations(i, &mut out);
        }
        let room = &self.rooms[0];
        let [x, z] = self.agent_start.position;
        if !room.disc_is_free(x, z, 0.0) {
            out.push(Violation {
                node: "agent_start".into(),
                rule: "start position collides with a wall or placement".into(),
            });
        }
        if let Some(std) = self.standard_step_limit() {
            if self.step_limit != std {
                out.push(Violation {
                    node: "step_limit".into(),
                    rule: format!("standard games use a step limit of {std}, found {}", self.step_limit),
                });
            }
        }
        out
    }
}
