//! Ground-truth planner that plays a scene through the public protocol, and
//! the solvability check built on it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_delta, wrap_degrees, Vec3};
use crate::planner::{plan, Obstacles};
use crate::propchain::{PropKind, PropNode, UnlockMethod};
use crate::protocol::{AgentAction, Interactions};
use crate::render::{center_ray_pick, Camera};
use crate::scene::{Placement, PlacementKind, SceneConfig};
use crate::world::{AgentPose, StepOutcome, WorldState, GRAB_RANGE};

/// Aim points must be hit this much inside the grab range.
const RANGE_SLACK: f64 = 0.05;
/// Largest look_at offset used before falling back to explicit rotations.
const LOOK_AT_EDGE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("unreachable prerequisite {0}")]
    Unreachable(String),
    #[error("could not interact with {0}")]
    Stuck(String),
    #[error("chain has a dependency cycle")]
    Cycle,
}

#[derive(Debug, Clone)]
pub struct OraclePlan {
    pub actions: Vec<AgentAction>,
    pub outcomes: Vec<StepOutcome>,
    pub escaped: bool,
    /// Total distance walked, in meters.
    pub path_length: f64,
    /// Sum of the grid path costs behind each route.
    pub grid_cost: f64,
    /// Order in which chain nodes were grabbed successfully.
    pub grab_order: Vec<String>,
}

impl OraclePlan {
    pub fn steps(&self) -> u32 {
        self.actions.len() as u32
    }

    pub fn raw_actions(&self) -> Vec<String> {
        self.actions.iter().map(AgentAction::to_json).collect()
    }
}

/// Candidate aim points inside a placement box: the center first, then a
/// grid over an upper slice of the box.
fn aim_points(p: &Placement) -> Vec<Vec3> {
    let b = p.aabb();
    let c = b.center();
    let mut pts = vec![c];
    let y = b.max.y - 0.15 * (b.max.y - b.min.y);
    for fx in [0.5, 0.2, 0.8] {
        for fz in [0.5, 0.2, 0.8] {
            let q = Vec3::new(
                b.min.x + fx * (b.max.x - b.min.x),
                y,
                b.min.z + fz * (b.max.z - b.min.z),
            );
            if q != c {
                pts.push(q);
            }
        }
    }
    pts
}

/// Yaw and pitch pointing from `eye` at `target`.
pub fn angles_to(eye: Vec3, target: Vec3) -> (f64, f64) {
    let d = target - eye;
    let yaw = wrap_degrees(d.x.atan2(d.z).to_degrees());
    let horiz = (d.x * d.x + d.z * d.z).sqrt();
    let pitch = (-d.y).atan2(horiz).to_degrees();
    (yaw, pitch)
}

/// The first aim from `position` whose center ray picks placement `idx`
/// within range.
fn aim_from(state: &WorldState, idx: usize, position: [f64; 2]) -> Option<(f64, f64)> {
    let p = &state.room().placements[idx];
    let base = AgentPose::new(position[0], position[1], 0.0, 0.0);
    aim_points(p).into_iter().find_map(|target| {
        let (yaw, pitch) = angles_to(base.eye(), target);
        let cam = Camera::agent(AgentPose {
            position,
            yaw,
            pitch,
        });
        let pick = center_ray_pick(state, &cam)?;
        (pick.placement == idx && pick.distance <= GRAB_RANGE - RANGE_SLACK).then_some((yaw, pitch))
    })
}

fn aimed_at(state: &WorldState, idx: usize) -> bool {
    center_ray_pick(state, &state.camera()).is_some_and(|p| p.placement == idx && p.distance <= GRAB_RANGE)
}

struct Runner {
    world: WorldState,
    plan: OraclePlan,
}

impl Runner {
    fn act(&mut self, action: AgentAction) -> StepOutcome {
        let out = self.world.step(&action).expect("oracle world has no step budget");
        self.plan.path_length += out.distance_moved;
        self.plan.actions.push(action);
        self.plan.outcomes.push(out.clone());
        out
    }

    fn approach(&mut self, id: &str, idx: usize) -> Result<(), OracleError> {
        let obstacles = Obstacles::new(&self.world);
        let start = self.world.pose.position;
        let world = &self.world;
        let route = plan(&obstacles, start, |p| aim_from(world, idx, p).is_some())
            .ok_or_else(|| OracleError::Unreachable(id.to_string()))?;
        self.plan.grid_cost += route.grid_cost;
        for w in route.waypoints {
            let [x, z] = self.world.pose.position;
            let (dx, dz) = (w[0] - x, w[1] - z);
            let mut remaining = (dx * dx + dz * dz).sqrt();
            if remaining < 1e-9 {
                continue;
            }
            let yaw = wrap_degrees(dx.atan2(dz).to_degrees());
            let mut turn = Some(angle_delta(self.world.pose.yaw, yaw)).filter(|t| *t != 0.0);
            while remaining > 1e-9 {
                let chunk = remaining.min(10.0);
                let out = self.act(AgentAction {
                    rotate_right: turn.take(),
                    move_forward: Some(chunk),
                    rationale: Some(format!("Walking toward {id}.")),
                    ..Default::default()
                });
                if (out.distance_moved - chunk).abs() > 1e-6 {
                    return Err(OracleError::Stuck(id.to_string()));
                }
                remaining -= chunk;
            }
        }
        self.aim(id, idx)
    }

    fn aim(&mut self, id: &str, idx: usize) -> Result<(), OracleError> {
        if aimed_at(&self.world, idx) {
            return Ok(());
        }
        let (yaw, pitch) =
            aim_from(&self.world, idx, self.world.pose.position).ok_or_else(|| OracleError::Stuck(id.to_string()))?;
        let rationale = Some(format!("Centering the red dot on {id}."));
        let target = self.world.room().placements[idx].aabb().center();
        let aim_point = {
            let d = Vec3::new(
                yaw.to_radians().sin() * pitch.to_radians().cos(),
                -pitch.to_radians().sin(),
                yaw.to_radians().cos() * pitch.to_radians().cos(),
            );
            let dist = (target - self.world.pose.eye()).length();
            self.world.pose.eye() + d * dist
        };
        if let Some((u, v)) = self.world.camera().project(aim_point) {
            let lo = LOOK_AT_EDGE;
            if (lo..=1.0 - lo).contains(&u) && (lo..=1.0 - lo).contains(&v) && (u, v) != (0.5, 0.5) {
                let mut trial = self.world.clone();
                let action = AgentAction {
                    look_at: Some([u, v]),
                    rationale: rationale.clone(),
                    ..Default::default()
                };
                trial.step(&action).expect("trial world running");
                if aimed_at(&trial, idx) {
                    self.act(action);
                    return Ok(());
                }
            }
        }
        for _ in 0..3 {
            let dyaw = angle_delta(self.world.pose.yaw, yaw);
            let dpitch = (pitch - self.world.pose.pitch).clamp(-90.0, 90.0);
            self.act(AgentAction {
                rotate_right: Some(dyaw).filter(|d| *d != 0.0),
                rotate_down: Some(dpitch).filter(|d| *d != 0.0),
                rationale: rationale.clone(),
                ..Default::default()
            });
            if aimed_at(&self.world, idx) {
                return Ok(());
            }
        }
        Err(OracleError::Stuck(id.to_string()))
    }

    fn grab(&mut self, node: &PropNode) -> Result<(), OracleError> {
        let chain = &self.world.room().chain;
        let (interactions, rationale) = match &node.unlock {
            UnlockMethod::Key(k) => (
                Some(Interactions {
                    use_item_id: Some(k.clone()),
                    input: None,
                }),
                if node.kind.is_door() {
                    format!("Using {k} on the door to escape the room.")
                } else {
                    format!("Using {k} to unlock {}.", node.id)
                },
            ),
            UnlockMethod::Password(p) => (
                Some(Interactions {
                    use_item_id: None,
                    input: chain.password_text(p).map(String::from),
                }),
                if node.kind.is_door() {
                    format!("Entering the password from my note on the door to escape the room.")
                } else {
                    format!("Entering the password from my note to open {}.", node.id)
                },
            ),
            UnlockMethod::Free => (
                None,
                match node.kind {
                    PropKind::Exit | PropKind::Door => "Opening the door to escape the room.".to_string(),
                    PropKind::Box => format!("Opening {} to see what is inside.", node.id),
                    _ => format!("Picking up {}.", node.id),
                },
            ),
        };
        let read = self.note_to_read(node);
        let out = self.act(AgentAction {
            grab: Some(true),
            interactions,
            read,
            rationale: Some(rationale),
            ..Default::default()
        });
        if !out.grab_succeeded {
            return Err(OracleError::Stuck(node.id.clone()));
        }
        self.plan.grab_order.push(node.id.clone());
        Ok(())
    }

    /// A note obtained by grabbing `node` that carries a password.
    fn note_to_read(&self, node: &PropNode) -> Option<String> {
        let chain = &self.world.room().chain;
        let mut granted = Vec::new();
        if node.kind.is_collectible() {
            granted.push(node.id.clone());
        }
        let mut stack: Vec<String> = node.contents.clone();
        while let Some(id) = stack.pop() {
            if let Some(n) = chain.node(&id) {
                granted.push(id.clone());
                stack.extend(n.contents.iter().cloned());
            }
        }
        granted.into_iter().find(|id| {
            chain.node(id).is_some_and(|n| {
                n.kind == PropKind::Paper
                    && n.contents
                        .iter()
                        .any(|c| chain.node(c).is_some_and(|x| x.kind == PropKind::Password))
            })
        })
    }
}

/// Plans and simulates a full solution on a private world.
pub fn oracle_policy(scene: &SceneConfig) -> Result<OraclePlan, OracleError> {
    oracle_from_state(&WorldState::new(scene.clone()))
}

/// Plans from an arbitrary running state: the current room onward, skipping
/// anything already collected or unlocked.
pub fn oracle_from_state(state: &WorldState) -> Result<OraclePlan, OracleError> {
    let scene = &state.scene;
    let mut world = state.clone();
    world.step_limit = u32::MAX;
    let mut runner = Runner {
        world,
        plan: OraclePlan {
            actions: Vec::new(),
            outcomes: Vec::new(),
            escaped: false,
            path_length: 0.0,
            grid_cost: 0.0,
            grab_order: Vec::new(),
        },
    };
    for room_idx in state.current_room..scene.rooms.len() {
        if runner.world.current_room != room_idx {
            break;
        }
        let room = &scene.rooms[room_idx];
        let order = room.chain.dependency_order().ok_or(OracleError::Cycle)?;
        for id in order {
            let node = room.chain.node(&id).expect("ordered ids exist").clone();
            let done = runner.world.inventory.contains(&id)
                || (!node.unlock.is_free() && !runner.world.is_locked(&id) && node.kind != PropKind::Exit)
                || (node.kind == PropKind::Box
                    && !node.contents.is_empty()
                    && node.contents.iter().all(|c| {
                        runner.world.inventory.contains(c) || runner.world.knowledge.contains(c)
                    }));
            if !(node.show || node.kind == PropKind::Exit) || done {
                continue;
            }
            let (idx, _) = room
                .placements
                .iter()
                .enumerate()
                .find(|(_, p)| p.object == id && p.kind != PlacementKind::Furniture)
                .ok_or_else(|| OracleError::Unreachable(id.clone()))?;
            runner.approach(&id, idx)?;
            runner.grab(&node)?;
        }
    }
    runner.plan.escaped = runner.world.status == crate::world::Status::Escaped;
    Ok(runner.plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityReport {
    pub ok: bool,
    pub reason: Option<String>,
    pub violations: Vec<String>,
    pub oracle_steps: Option<u32>,
    /// Meters walked by the oracle: the optimal-distance figure for the scene.
    pub path_length: Option<f64>,
}

impl SolvabilityReport {
    fn fail(reason: String, violations: Vec<String>) -> Self {
        Self {
            ok: false,
            reason: Some(reason),
            violations,
            oracle_steps: None,
            path_length: None,
        }
    }
}

/// Structural checks followed by an oracle run within the step limit.
pub fn validate_solvable(scene: &SceneConfig) -> SolvabilityReport {
    for room in &scene.rooms {
        if !room.chain.validate().ok {
            break;
        }
        for n in &room.chain.nodes {
            let placed = room
                .placements
                .iter()
                .any(|p| p.object == n.id && p.kind != PlacementKind::Furniture);
            if (n.show || n.kind == PropKind::Exit) && !placed {
                return SolvabilityReport::fail(format!("unreachable prerequisite {}", n.id), Vec::new());
            }
        }
    }
    let violations: Vec<String> = scene.violations().iter().map(ToString::to_string).collect();
    if let Some(first) = violations.first() {
        return SolvabilityReport::fail(first.clone(), violations);
    }
    match oracle_policy(scene) {
        Err(e) => SolvabilityReport::fail(e.to_string(), Vec::new()),
        Ok(plan) => {
            let steps = plan.steps();
            let reason = if !plan.escaped {
                Some("oracle did not escape".to_string())
            } else if steps > scene.step_limit {
                Some(format!("oracle needed {steps} steps, limit is {}", scene.step_limit))
            } else {
                None
            };
            SolvabilityReport {
                ok: reason.is_none(),
                reason,
                violations: Vec::new(),
                oracle_steps: Some(steps),
                path_length: Some(plan.path_length),
            }
        }
    }
}
