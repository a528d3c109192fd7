//! Occupancy-grid navigation: Dijkstra over 0.25 m cells inflated by the
//! agent radius, followed by string pulling into straight segments.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::Rect;
use crate::world::{WorldState, AGENT_RADIUS};

pub const CELL: f64 = 0.25;
/// Extra clearance required of grid cells beyond the agent radius.
pub const CELL_MARGIN: f64 = 0.05;
/// Extra clearance required of planned straight segments.
pub const SEGMENT_MARGIN: f64 = 0.01;
/// Goals whose grid cost is within this many meters of the best are
/// compared after string pulling.
pub const GOAL_SLACK: f64 = 1.0;

/// Obstacle footprints of the current room, uninflated.
#[derive(Debug, Clone)]
pub struct Obstacles {
    width: f64,
    depth: f64,
    rects: Vec<Rect>,
}

impl Obstacles {
    pub fn new(state: &WorldState) -> Self {
        let room = state.room();
        Self {
            width: room.width,
            depth: room.depth,
            rects: state.visible().map(|(_, p)| p.footprint()).collect(),
        }
    }

    /// A disc of radius `r` at `(x, z)` is clear.
    pub fn point_free(&self, x: f64, z: f64, r: f64) -> bool {
        x >= r
            && z >= r
            && x <= self.width - r
            && z <= self.depth - r
            && self.rects.iter().all(|b| !b.inflate(r).contains_open(x, z))
    }

    /// A disc of radius `r` swept from `a` to `b` stays clear.
    pub fn segment_free(&self, a: [f64; 2], b: [f64; 2], r: f64) -> bool {
        let inside = |p: [f64; 2]| p[0] >= r && p[1] >= r && p[0] <= self.width - r && p[1] <= self.depth - r;
        if !inside(a) || !inside(b) {
            return false;
        }
        let (dx, dz) = (b[0] - a[0], b[1] - a[1]);
        let len = (dx * dx + dz * dz).sqrt();
        if len == 0.0 {
            return true;
        }
        let (ux, uz) = (dx / len, dz / len);
        self.rects
            .iter()
            .all(|rect| rect.inflate(r).segment_entry(a[0], a[1], ux, uz, len).is_none())
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub nx: usize,
    pub nz: usize,
    pub free: Vec<bool>,
}

impl Grid {
    pub fn new(obstacles: &Obstacles) -> Self {
        let nx = (obstacles.width / CELL).floor() as usize;
        let nz = (obstacles.depth / CELL).floor() as usize;
        let mut free = Vec::with_capacity(nx * nz);
        for k in 0..nz {
            for i in 0..nx {
                let [x, z] = Self::center_of(i, k);
                free.push(obstacles.point_free(x, z, AGENT_RADIUS + CELL_MARGIN));
            }
        }
        Self { nx, nz, free }
    }

    pub fn center_of(i: usize, k: usize) -> [f64; 2] {
        [(i as f64 + 0.5) * CELL, (k as f64 + 0.5) * CELL]
    }

    pub fn center(&self, idx: usize) -> [f64; 2] {
        Self::center_of(idx % self.nx, idx / self.nx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost.total_cmp(&self.cost).then_with(|| o.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// A planned route: straight waypoints after the start.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub waypoints: Vec<[f64; 2]>,
    /// Euclidean length of the waypoint polyline.
    pub length: f64,
    /// Cost of the underlying 8-connected grid path.
    pub grid_cost: f64,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Shortest route from `start` to any point satisfying `is_goal`.
/// The start itself is tested first and yields an empty route.
pub fn plan(obstacles: &Obstacles, start: [f64; 2], mut is_goal: impl FnMut([f64; 2]) -> bool) -> Option<Route> {
    if is_goal(start) {
        return Some(Route {
            waypoints: Vec::new(),
            length: 0.0,
            grid_cost: 0.0,
        });
    }
    let grid = Grid::new(obstacles);
    let n = grid.nx * grid.nz;
    let start_node = n;
    let seg_r = AGENT_RADIUS + SEGMENT_MARGIN;
    let start_r = if obstacles.point_free(start[0], start[1], seg_r) {
        seg_r
    } else {
        AGENT_RADIUS
    };
    let pos = |node: usize| if node == start_node { start } else { grid.center(node) };

    let mut best = vec![f64::INFINITY; n + 1];
    let mut parent = vec![usize::MAX; n + 1];
    let mut heap = BinaryHeap::new();
    best[start_node] = 0.0;
    heap.push(Entry {
        cost: 0.0,
        node: start_node,
    });
    let mut goals: Vec<(usize, f64)> = Vec::new();
    let mut goal_cost = f64::INFINITY;

    while let Some(Entry { cost, node }) = heap.pop() {
        if cost > best[node] {
            continue;
        }
        if cost > goal_cost + GOAL_SLACK {
            break;
        }
        if node != start_node && is_goal(grid.center(node)) {
            goal_cost = goal_cost.min(cost);
            goals.push((node, cost));
            continue;
        }
        let here = pos(node);
        let neighbors: Vec<usize> = if node == start_node {
            let ci = (start[0] / CELL).floor() as isize;
            let ck = (start[1] / CELL).floor() as isize;
            let mut v = Vec::new();
            for dk in -2..=2 {
                for di in -2..=2 {
                    let (i, k) = (ci + di, ck + dk);
                    if i >= 0 && k >= 0 && (i as usize) < grid.nx && (k as usize) < grid.nz {
                        v.push(k as usize * grid.nx + i as usize);
                    }
                }
            }
            v
        } else {
            let (i, k) = ((node % grid.nx) as isize, (node / grid.nx) as isize);
            let mut v = Vec::with_capacity(8);
            for dk in -1..=1 {
                for di in -1..=1 {
                    let (a, b) = (i + di, k + dk);
                    if (di, dk) != (0, 0) && a >= 0 && b >= 0 && (a as usize) < grid.nx && (b as usize) < grid.nz {
                        v.push(b as usize * grid.nx + a as usize);
                    }
                }
            }
            v
        };
        for next in neighbors {
            if !grid.free[next] {
                continue;
            }
            let there = grid.center(next);
            let r = if node == start_node { start_r } else { seg_r };
            if !obstacles.segment_free(here, there, r) {
                continue;
            }
            let c = cost + dist(here, there);
            if c < best[next] {
                best[next] = c;
                parent[next] = node;
                heap.push(Entry { cost: c, node: next });
            }
        }
    }

    let mut chosen: Option<Route> = None;
    for (goal, cost) in goals {
        let mut chain = vec![goal];
        while let Some(&last) = chain.last() {
            if last == start_node {
                break;
            }
            chain.push(parent[last]);
        }
        chain.reverse();
        let points: Vec<[f64; 2]> = chain.iter().map(|&k| pos(k)).collect();
        let waypoints = string_pull(obstacles, &points, start_r, seg_r);
        let mut length = 0.0;
        let mut prev = start;
        for w in &waypoints {
            length += dist(prev, *w);
            prev = *w;
        }
        if chosen.as_ref().is_none_or(|c| length < c.length) {
            chosen = Some(Route {
                waypoints,
                length,
                grid_cost: cost,
            });
        }
    }
    chosen
}

/// Greedy shortcutting: from each anchor jump to the farthest visible point.
fn string_pull(obstacles: &Obstacles, points: &[[f64; 2]], start_r: f64, r: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    let last = points.len() - 1;
    let mut i = 0;
    while i < last {
        let radius = if i == 0 { start_r } else { r };
        let mut j = last;
        while j > i + 1 && !obstacles.segment_free(points[i], points[j], radius) {
            j -= 1;
        }
        out.push(points[j]);
        i = j;
    }
    out
}
