//! Episode state machine: movement with collision, view control, grabs,
//! locks, inventory, reads, room transitions and the step budget.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{heading, wrap_degrees, Vec3};
use crate::propchain::{PropKind, PropNode, UnlockMethod};
use crate::protocol::{feedback as fb, parse_action, AgentAction, Interactions};
use crate::render::{self, Camera};
use crate::scene::{DoorRole, Placement, PlacementKind, RoomScene, SceneConfig};

/// Maximum eye-to-hit distance for a grab, in meters.
pub const GRAB_RANGE: f64 = 2.5;
pub const EYE_HEIGHT: f64 = 1.5;
pub const AGENT_RADIUS: f64 = 0.3;
/// Gap left between the agent disc and an obstacle after a blocked move.
pub const CONTACT_BACKOFF: f64 = 1e-9;
/// Truncations below this are not reported.
pub const PARTIAL_MOVE_REPORT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentPose {
    /// Floor position (x, z).
    pub position: [f64; 2],
    /// Degrees in [0, 360); 0 faces +z, 90 faces +x.
    pub yaw: f64,
    /// Degrees in [-90, 90], positive looking down.
    pub pitch: f64,
}

impl AgentPose {
    pub fn new(x: f64, z: f64, yaw: f64, pitch: f64) -> Self {
        Self {
            position: [x, z],
            yaw: wrap_degrees(yaw),
            pitch: pitch.clamp(-90.0, 90.0),
        }
    }

    pub fn eye(&self) -> Vec3 {
        Vec3::new(self.position[0], EYE_HEIGHT, self.position[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryItem {
    pub id: String,
    pub kind: PropKind,
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    items: Vec<InventoryItem>,
}

impl Inventory {
    pub fn items(&self) -> &[InventoryItem] {
        &self.items
    }

    pub fn contains(&self, id: &str) -> bool {
        self.items.iter().any(|i| i.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&InventoryItem> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Adds the item unless already held. Returns whether it was added.
    pub fn add(&mut self, item: InventoryItem) -> bool {
        if self.contains(&item.id) {
            return false;
        }
        self.items.push(item);
        true
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.id.as_str())
    }

    /// Bag listing used in step prompts, one `- id: description` per line.
    pub fn describe(&self) -> String {
        if self.items.is_empty() {
            return fb::EMPTY_BAG.to_string();
        }
        self.items
            .iter()
            .map(|i| format!("- {}: {}", i.id, i.description))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Short bag description for a collectible of `kind`.
pub fn item_description(kind: PropKind) -> &'static str {
    match kind {
        PropKind::Key => "a small metal key",
        PropKind::Paper => "a paper note with writing on it",
        PropKind::Box => "a wooden box",
        PropKind::Password => "a password",
        PropKind::Exit | PropKind::Door => "a door",
    }
}

fn target_word(kind: PropKind) -> &'static str {
    match kind {
        PropKind::Key => "key",
        PropKind::Box => "box",
        PropKind::Paper => "note",
        PropKind::Password => "password",
        PropKind::Exit | PropKind::Door => "door",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LockState {
    Locked,
    Unlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Escaped,
    Failed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Running => "running",
            Status::Escaped => "escaped",
            Status::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("the episode is already {0}")]
    Terminal(Status),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub text: String,
    pub inventory_description: String,
    pub granted_items: Vec<String>,
    pub frame_ref: String,
}

/// Everything a step produced besides the new state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub feedback: Feedback,
    pub action: Option<AgentAction>,
    pub parse_error: Option<String>,
    pub grab_attempted: bool,
    pub grab_succeeded: bool,
    pub distance_moved: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Digest {
    inventory: Vec<String>,
    knowledge: BTreeSet<String>,
    locks: Vec<BTreeMap<String, LockState>>,
    room: usize,
    status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub scene: SceneConfig,
    pub current_room: usize,
    pub pose: AgentPose,
    pub inventory: Inventory,
    pub knowledge: BTreeSet<String>,
    /// Per room: lock state of every non-free node.
    pub locks: Vec<BTreeMap<String, LockState>>,
    pub steps_used: u32,
    pub step_limit: u32,
    pub status: Status,
}

/// Path of the frame rendered after `step` (0 is the initial view).
pub fn frame_ref(step: u32) -> String {
    format!("frames/step_{step:04}.png")
}

impl WorldState {
    pub fn new(scene: SceneConfig) -> Self {
        let locks = scene
            .rooms
            .iter()
            .map(|r| {
                r.chain
                    .nodes
                    .iter()
                    .filter(|n| !n.unlock.is_free())
                    .map(|n| (n.id.clone(), LockState::Locked))
                    .collect()
            })
            .collect();
        Self {
            pose: scene.agent_start,
            step_limit: scene.step_limit,
            scene,
            current_room: 0,
            inventory: Inventory::default(),
            knowledge: BTreeSet::new(),
            locks,
            steps_used: 0,
            status: Status::Running,
        }
    }

    pub fn room(&self) -> &RoomScene {
        &self.scene.rooms[self.current_room]
    }

    /// Placements of the current room that still exist (collected props vanish).
    pub fn visible(&self) -> impl Iterator<Item = (usize, &Placement)> {
        self.room()
            .placements
            .iter()
            .enumerate()
            .filter(move |(_, p)| !(p.kind == PlacementKind::Prop && self.inventory.contains(&p.object)))
    }

    pub fn is_locked(&self, id: &str) -> bool {
        self.locks[self.current_room].get(id) == Some(&LockState::Locked)
    }

    pub fn camera(&self) -> Camera {
        Camera::agent(self.pose)
    }

    fn digest(&self) -> Digest {
        Digest {
            inventory: self.inventory.ids().map(String::from).collect(),
            knowledge: self.knowledge.clone(),
            locks: self.locks.clone(),
            room: self.current_room,
            status: self.status,
        }
    }

    /// Parses and applies one raw protocol message. Parse failures still
    /// consume the step and report the diagnostic as feedback.
    pub fn step_raw(&mut self, raw: &str) -> Result<StepOutcome, WorldError> {
        match parse_action(raw) {
            Ok(a) => self.step(&a),
            Err(e) => {
                self.ensure_running()?;
                let text = fb::fill(fb::INVALID_ACTION, &[("error", &e.to_string())]);
                self.finish_step();
                Ok(StepOutcome {
                    feedback: self.feedback(text, Vec::new()),
                    action: None,
                    parse_error: Some(e.to_string()),
                    grab_attempted: false,
                    grab_succeeded: false,
                    distance_moved: 0.0,
                })
            }
        }
    }

    fn ensure_running(&self) -> Result<(), WorldError> {
        match self.status {
            Status::Running => Ok(()),
            s => Err(WorldError::Terminal(s)),
        }
    }

    fn finish_step(&mut self) {
        self.steps_used += 1;
        if self.status == Status::Running && self.steps_used >= self.step_limit {
            self.status = Status::Failed;
        }
    }

    fn feedback(&self, text: String, granted: Vec<String>) -> Feedback {
        Feedback {
            text,
            inventory_description: self.inventory.describe(),
            granted_items: granted,
            frame_ref: frame_ref(self.steps_used),
        }
    }

    /// Applies one action: view, movement, jump, grab, read.
    pub fn step(&mut self, action: &AgentAction) -> Result<StepOutcome, WorldError> {
        self.ensure_running()?;
        let before = self.digest();
        let held_before: Vec<String> = self.inventory.ids().map(String::from).collect();
        let knew_before = self.knowledge.clone();

        match action.look_at {
            Some([u, v]) => {
                if (u, v) != (0.5, 0.5) {
                    let (yaw, pitch) = render::look_at_to_angles(&self.camera(), u, v).expect("parser bounds look_at");
                    self.pose.yaw = yaw;
                    self.pose.pitch = pitch;
                }
            }
            None => {
                if let Some(r) = action.rotate_right {
                    self.pose.yaw = wrap_degrees(self.pose.yaw + r);
                }
                if let Some(d) = action.rotate_down {
                    self.pose.pitch = (self.pose.pitch + d).clamp(-90.0, 90.0);
                }
            }
        }

        let mut lines = Vec::new();
        let mut distance_moved = 0.0;
        if let Some(d) = action.move_forward {
            distance_moved = self.apply_move(d);
            if d.abs() - distance_moved > PARTIAL_MOVE_REPORT {
                lines.push(fb::fill(
                    fb::PARTIAL_MOVE,
                    &[
                        ("moved", &format!("{distance_moved:.2}")),
                        ("requested", &format!("{:.2}", d.abs())),
                    ],
                ));
            }
        }

        let mut interaction = Vec::new();
        let grab_attempted = action.grabs();
        if grab_attempted {
            let none = Interactions::default();
            self.resolve_grab(action.interactions.as_ref().unwrap_or(&none), &mut interaction);
        }
        let grab_succeeded = grab_attempted && self.digest() != before;
        if let Some(id) = &action.read {
            interaction.push(self.resolve_read(id));
        }
        if interaction.is_empty() {
            interaction.push(fb::NO_INTERACTION.to_string());
        }
        lines.extend(interaction);

        let mut granted: Vec<String> = self
            .inventory
            .ids()
            .filter(|id| !held_before.iter().any(|h| h == id))
            .map(String::from)
            .collect();
        granted.extend(self.knowledge.difference(&knew_before).cloned());

        self.finish_step();
        Ok(StepOutcome {
            feedback: self.feedback(lines.join("\n"), granted),
            action: Some(action.clone()),
            parse_error: None,
            grab_attempted,
            grab_succeeded,
            distance_moved,
        })
    }

    /// Moves along the floor heading, stopping at the first contact with a
    /// wall or placement inflated by the agent radius. Returns the distance
    /// actually traveled.
    pub fn apply_move(&mut self, distance: f64) -> f64 {
        if distance == 0.0 || !distance.is_finite() {
            return 0.0;
        }
        let (mut dx, mut dz) = heading(self.pose.yaw);
        if distance < 0.0 {
            dx = -dx;
            dz = -dz;
        }
        let len = distance.abs();
        let [x, z] = self.pose.position;
        let room = self.room();
        let r = AGENT_RADIUS;
        let mut t = len;
        for (o, d, lo, hi) in [(x, dx, r, room.width - r), (z, dz, r, room.depth - r)] {
            if d > 0.0 {
                t = t.min(((hi - o) / d).max(0.0));
            } else if d < 0.0 {
                t = t.min(((lo - o) / d).max(0.0));
            }
        }
        let mut blocked = t < len;
        for (_, p) in self.visible() {
            if let Some(hit) = p.footprint().inflate(r).segment_entry(x, z, dx, dz, len) {
                if hit < t {
                    t = hit;
                    blocked = true;
                }
            }
        }
        if blocked {
            t = (t - CONTACT_BACKOFF).max(0.0);
        }
        self.pose.position = [x + dx * t, z + dz * t];
        t
    }

    fn resolve_grab(&mut self, interactions: &Interactions, lines: &mut Vec<String>) {
        let Some(pick) = render::center_ray_pick(self, &self.camera()) else {
            return;
        };
        if pick.distance > GRAB_RANGE {
            return;
        }
        let placement = &self.room().placements[pick.placement];
        match (placement.kind, placement.role) {
            (PlacementKind::Furniture, _) => return,
            (PlacementKind::Door, Some(DoorRole::Entrance)) => {
                lines.push(fb::DOOR_LOCKED.to_string());
                return;
            }
            _ => {}
        }
        let Some(node) = self.room().chain.node(&placement.object).cloned() else {
            return;
        };
        self.interact(&node, interactions, lines);
    }

    fn interact(&mut self, node: &PropNode, interactions: &Interactions, lines: &mut Vec<String>) {
        let target = target_word(node.kind);
        let is_exit = node.kind.is_door();
        if self.is_locked(&node.id) {
            let item = interactions.item();
            let input = interactions.text();
            let unlocked_line = match &node.unlock {
                UnlockMethod::Key(key) => match item {
                    Some(u) if !self.inventory.contains(u) => {
                        lines.push(fb::fill(fb::NOT_IN_BAG, &[("item", u)]));
                        return;
                    }
                    Some(u) if u == key => fb::fill(fb::KEY_OK, &[("item", u), ("target", target)]),
                    Some(u) => {
                        lines.push(fb::fill(fb::KEY_WRONG, &[("item", u), ("target", target)]));
                        return;
                    }
                    None => {
                        lines.push(fb::fill(fb::LOCKED, &[("target", target), ("requirement", "key")]));
                        return;
                    }
                },
                UnlockMethod::Password(pw) => match (input, item) {
                    (Some(text), _) => {
                        if self.room().chain.password_text(pw) == Some(text) {
                            fb::fill(fb::PASSWORD_OK, &[("target", target)])
                        } else {
                            lines.push(fb::fill(fb::PASSWORD_WRONG, &[("target", target)]));
                            return;
                        }
                    }
                    (None, Some(u)) if !self.inventory.contains(u) => {
                        lines.push(fb::fill(fb::NOT_IN_BAG, &[("item", u)]));
                        return;
                    }
                    _ => {
                        lines.push(fb::fill(fb::LOCKED, &[("target", target), ("requirement", "password")]));
                        return;
                    }
                },
                UnlockMethod::Free => String::new(),
            };
            self.locks[self.current_room].insert(node.id.clone(), LockState::Unlocked);
            if !is_exit && !unlocked_line.is_empty() {
                lines.push(unlocked_line);
            }
        }

        match node.kind {
            PropKind::Exit | PropKind::Door => self.pass_door(lines),
            PropKind::Key | PropKind::Paper => {
                if self.inventory.contains(&node.id) {
                    return;
                }
                self.inventory.add(InventoryItem {
                    id: node.id.clone(),
                    kind: node.kind,
                    description: item_description(node.kind).to_string(),
                });
                lines.push(fb::fill(fb::PICKED_UP, &[("item", &node.id)]));
                let found: Vec<String> = self.grant_contents(node).into_iter().filter(|(_, known)| !known).map(|(id, _)| id).collect();
                if !found.is_empty() {
                    lines.push(fb::fill(fb::OPENED, &[("target", target), ("items", &found.join(", "))]));
                }
            }
            PropKind::Box | PropKind::Password => {
                let found: Vec<String> = self.grant_contents(node).into_iter().map(|(id, _)| id).collect();
                if !found.is_empty() {
                    lines.push(fb::fill(fb::OPENED, &[("target", target), ("items", &found.join(", "))]));
                } else if lines.is_empty() {
                    lines.push(fb::fill(fb::ALREADY_OPEN, &[("target", target)]));
                }
            }
        }
    }

    /// Grants a node's contents. Returns each newly obtained id, flagged
    /// `true` when it is knowledge rather than a bag item.
    fn grant_contents(&mut self, node: &PropNode) -> Vec<(String, bool)> {
        let mut found = Vec::new();
        for id in &node.contents {
            let Some(child) = self.room().chain.node(id).cloned() else {
                continue;
            };
            if child.kind == PropKind::Password {
                if self.knowledge.insert(child.id.clone()) {
                    found.push((child.id.clone(), true));
                }
            } else if self.inventory.add(InventoryItem {
                id: child.id.clone(),
                kind: child.kind,
                description: item_description(child.kind).to_string(),
            }) {
                found.push((child.id.clone(), false));
                found.extend(self.grant_contents(&child));
            }
        }
        found
    }

    fn pass_door(&mut self, lines: &mut Vec<String>) {
        lines.clear();
        if self.current_room + 1 < self.scene.rooms.len() {
            self.room_transition();
            lines.push(fb::ROOM_CHANGE.to_string());
        } else {
            self.status = Status::Escaped;
            lines.push(fb::ESCAPED.to_string());
        }
    }

    /// Moves the agent into the next room at its entry pose.
    pub fn room_transition(&mut self) {
        self.current_room += 1;
        let room = self.room();
        self.pose = room.entry.unwrap_or(self.pose);
    }

    /// Text for a read of `id`; the item stays in the bag.
    pub fn resolve_read(&self, id: &str) -> String {
        let id = id.trim();
        let Some(item) = self.inventory.get(id) else {
            return fb::fill(fb::NOT_IN_BAG, &[("item", id)]);
        };
        let detail = self
            .scene
            .rooms
            .iter()
            .find_map(|r| r.chain.node(id))
            .and_then(|n| n.detail.clone());
        match detail {
            Some(text) => fb::fill(fb::READ, &[("item", id), ("text", &text)]),
            None => fb::fill(fb::READ_BLANK, &[("item", id), ("description", &item.description)]),
        }
    }
}
