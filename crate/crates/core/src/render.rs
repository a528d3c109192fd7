//! First-person software raycaster over axis-aligned boxes, the center-ray
//! pick used by grabs, and the image-coordinate to view-angle mapping.
//!
//! Pixel `(i, j)` samples the ray at `u = i / width`, `v = j / height`, so
//! the center pixel `(width / 2, height / 2)` of an even-sized frame uses
//! exactly the pick ray.

use std::io::Cursor;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog;
use crate::geometry::{wrap_degrees, Vec3};
use crate::propchain::PropKind;
use crate::scene::{Placement, PlacementKind};
use crate::world::{AgentPose, WorldState};

pub const DEFAULT_VFOV: f64 = 60.0;
pub const DEFAULT_SIZE: u32 = 512;
pub const DOT_RADIUS: f64 = 4.0;
pub const DOT_COLOR: [u8; 3] = [255, 0, 0];

const WALL_COLOR: [u8; 3] = [205, 198, 184];
const FLOOR_COLOR: [u8; 3] = [128, 104, 80];
const CEILING_COLOR: [u8; 3] = [236, 236, 232];
const DOOR_COLOR: [u8; 3] = [112, 64, 34];
const KEY_COLOR: [u8; 3] = [232, 190, 40];
const PAPER_COLOR: [u8; 3] = [250, 248, 232];
const BOX_COLOR: [u8; 3] = [156, 82, 36];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("look_at coordinates must lie in [0, 1], got ({0}, {1})")]
    OutOfRange(f64, f64),
    #[error("vertical field of view must lie in (10, 120) degrees, got {0}")]
    BadFov(f64),
    #[error("image size must be positive and even, got {0}x{1}")]
    BadSize(u32, u32),
    #[error("image encoding failed: {0}")]
    Encode(String),
    #[error("could not write frame: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub pose: AgentPose,
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn new(pose: AgentPose, vertical_fov: f64, width: u32, height: u32) -> Result<Self, RenderError> {
        if !(vertical_fov > 10.0 && vertical_fov < 120.0) {
            return Err(RenderError::BadFov(vertical_fov));
        }
        if width == 0 || height == 0 || width % 2 == 1 || height % 2 == 1 {
            return Err(RenderError::BadSize(width, height));
        }
        Ok(Self {
            pose,
            vertical_fov,
            width,
            height,
        })
    }

    /// The default agent camera: 60 degree vertical FOV, 512x512.
    pub fn agent(pose: AgentPose) -> Self {
        Self {
            pose,
            vertical_fov: DEFAULT_VFOV,
            width: DEFAULT_SIZE,
            height: DEFAULT_SIZE,
        }
    }

    pub fn with_size(mut self, width: u32, height: u32) -> Result<Self, RenderError> {
        self = Camera::new(self.pose, self.vertical_fov, width, height)?;
        Ok(self)
    }

    pub fn eye(&self) -> Vec3 {
        self.pose.eye()
    }

    /// Forward, right and up unit vectors.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let (sy, cy) = self.pose.yaw.to_radians().sin_cos();
        let (sp, cp) = self.pose.pitch.to_radians().sin_cos();
        let fwd = Vec3::new(sy * cp, -sp, cy * cp);
        let right = Vec3::new(cy, 0.0, -sy);
        let up = Vec3::new(sy * sp, cp, cy * sp);
        (fwd, right, up)
    }

    /// Tangents of the horizontal and vertical half angles.
    pub fn half_tangents(&self) -> (f64, f64) {
        let tv = (self.vertical_fov.to_radians() / 2.0).tan();
        (tv * self.width as f64 / self.height as f64, tv)
    }

    /// Unit direction of the ray through normalized image point `(u, v)`.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        let (fwd, right, up) = self.basis();
        let (th, tv) = self.half_tangents();
        (fwd + right * ((2.0 * u - 1.0) * th) + up * ((1.0 - 2.0 * v) * tv)).normalized()
    }

    /// Normalized image coordinates of a world point, `None` when behind
    /// the camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let (fwd, right, up) = self.basis();
        let (th, tv) = self.half_tangents();
        let d = p - self.eye();
        let depth = d.dot(fwd);
        if depth <= 1e-12 {
            return None;
        }
        let x = d.dot(right) / (depth * th);
        let y = d.dot(up) / (depth * tv);
        Some(((x + 1.0) / 2.0, (1.0 - y) / 2.0))
    }
}

/// What a ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Surface {
    Wall,
    Floor,
    Ceiling,
    /// Index into the current room's placements.
    Object(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub surface: Surface,
    pub distance: f64,
    /// Axis of the face normal at the hit point (0 = x, 1 = y, 2 = z).
    pub axis: usize,
}

/// Result of the center-ray pick: the nearest placement and its distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Pick {
    pub placement: usize,
    pub object: String,
    pub kind: PlacementKind,
    pub distance: f64,
}

fn box_face_axis(p: &Placement, point: Vec3) -> usize {
    let b = p.aabb();
    (0..3)
        .map(|a| {
            let d = (point.get(a) - b.min.get(a)).abs().min((point.get(a) - b.max.get(a)).abs());
            (a, d)
        })
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(a, _)| a)
        .unwrap_or(0)
}

/// Nearest surface along a unit ray from `origin` inside the current room.
/// Ties between placements go to the lower index.
pub fn cast_ray(state: &WorldState, origin: Vec3, dir: Vec3) -> Hit {
    let room = state.room();
    let bounds = room.bounds();
    let mut best_t = f64::INFINITY;
    let mut axis = 0;
    for a in 0..3 {
        let d = dir.get(a);
        if d == 0.0 {
            continue;
        }
        let plane = if d > 0.0 { bounds.max.get(a) } else { bounds.min.get(a) };
        let t = (plane - origin.get(a)) / d;
        if t < best_t {
            best_t = t;
            axis = a;
        }
    }
    let mut hit = Hit {
        surface: match (axis, dir.y < 0.0) {
            (1, true) => Surface::Floor,
            (1, false) => Surface::Ceiling,
            _ => Surface::Wall,
        },
        distance: best_t.max(0.0),
        axis,
    };
    let mut best_obj: Option<(usize, f64)> = None;
    for (i, p) in state.visible() {
        if let Some(t) = p.aabb().ray_hit(origin, dir) {
            if best_obj.is_none_or(|(_, bt)| t < bt) {
                best_obj = Some((i, t));
            }
        }
    }
    if let Some((i, t)) = best_obj {
        if t < hit.distance {
            let point = origin + dir * t;
            hit = Hit {
                surface: Surface::Object(i),
                distance: t,
                axis: box_face_axis(&room.placements[i], point),
            };
        }
    }
    hit
}

/// Casts the exact center ray and returns the nearest placement, if the
/// ray hits one before any wall, floor or ceiling.
pub fn center_ray_pick(state: &WorldState, camera: &Camera) -> Option<Pick> {
    let (fwd, _, _) = camera.basis();
    let hit = cast_ray(state, camera.eye(), fwd.normalized());
    match hit.surface {
        Surface::Object(i) => {
            let p = &state.room().placements[i];
            Some(Pick {
                placement: i,
                object: p.object.clone(),
                kind: p.kind,
                distance: hit.distance,
            })
        }
        _ => None,
    }
}

/// Yaw and pitch that center the ray through image point `(u, v)`.
pub fn look_at_to_angles(camera: &Camera, u: f64, v: f64) -> Result<(f64, f64), RenderError> {
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
        return Err(RenderError::OutOfRange(u, v));
    }
    if (u, v) == (0.5, 0.5) {
        return Ok((camera.pose.yaw, camera.pose.pitch));
    }
    let d = camera.ray(u, v);
    let yaw = wrap_degrees(d.x.atan2(d.z).to_degrees());
    let pitch = (-d.y).clamp(-1.0, 1.0).asin().to_degrees().clamp(-90.0, 90.0);
    Ok((yaw, pitch))
}

/// A labeled screen anchor for debug overlays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub label: String,
    pub x: u32,
    pub y: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB bytes.
    pub pixels: Vec<u8>,
    /// Row-major surface hit by each pixel's ray.
    pub surfaces: Vec<Surface>,
    pub center_dot: bool,
    pub annotations: Option<Vec<Annotation>>,
}

impl Frame {
    pub fn surface_at(&self, i: u32, j: u32) -> Surface {
        self.surfaces[(j * self.width + i) as usize]
    }

    pub fn pixel(&self, i: u32, j: u32) -> [u8; 3] {
        let k = ((j * self.width + i) * 3) as usize;
        [self.pixels[k], self.pixels[k + 1], self.pixels[k + 2]]
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RenderError> {
        let img = image::RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .ok_or_else(|| RenderError::Encode("pixel buffer size mismatch".into()))?;
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| RenderError::Encode(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn write_png(&self, path: &Path) -> Result<(), RenderError> {
        let bytes = self.encode_png()?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| RenderError::Io(e.to_string()))?;
        }
        std::fs::write(path, bytes).map_err(|e| RenderError::Io(e.to_string()))
    }
}

/// Flat color of a placement.
pub fn placement_color(state: &WorldState, p: &Placement) -> [u8; 3] {
    match p.kind {
        PlacementKind::Door => DOOR_COLOR,
        PlacementKind::Furniture => catalog::lookup(&p.object).map(|e| e.color).unwrap_or([150, 150, 150]),
        PlacementKind::Prop => match state.room().chain.node(&p.object).map(|n| n.kind) {
            Some(PropKind::Key) => KEY_COLOR,
            Some(PropKind::Paper) => PAPER_COLOR,
            _ => BOX_COLOR,
        },
    }
}

fn shade(color: [u8; 3], hit: &Hit) -> [u8; 3] {
    let face = match hit.axis {
        0 => 0.82,
        1 => 1.0,
        _ => 0.92,
    };
    let dist = (1.0 / (1.0 + 0.06 * hit.distance)).max(0.35);
    let k = face * dist;
    color.map(|c| (c as f64 * k).round().clamp(0.0, 255.0) as u8)
}

/// Renders the first-person view with the center red dot.
pub fn render_frame(state: &WorldState, camera: &Camera) -> Frame {
    let mut frame = render_plain(state, camera);
    let (cx, cy) = (camera.width as f64 / 2.0, camera.height as f64 / 2.0);
    let r = DOT_RADIUS;
    let (x0, x1) = ((cx - r).floor().max(0.0) as u32, ((cx + r).ceil() as u32).min(camera.width - 1));
    let (y0, y1) = ((cy - r).floor().max(0.0) as u32, ((cy + r).ceil() as u32).min(camera.height - 1));
    for j in y0..=y1 {
        for i in x0..=x1 {
            let (dx, dy) = (i as f64 - cx, j as f64 - cy);
            if dx * dx + dy * dy <= r * r {
                let k = ((j * camera.width + i) * 3) as usize;
                frame.pixels[k..k + 3].copy_from_slice(&DOT_COLOR);
            }
        }
    }
    frame.center_dot = true;
    frame
}

/// Renders without the dot overlay.
pub fn render_plain(state: &WorldState, camera: &Camera) -> Frame {
    let (w, h) = (camera.width as usize, camera.height as usize);
    let eye = camera.eye();
    let rows: Vec<(Vec<u8>, Vec<Surface>)> = (0..h)
        .into_par_iter()
        .map(|j| {
            let mut px = Vec::with_capacity(w * 3);
            let mut sf = Vec::with_capacity(w);
            for i in 0..w {
                let dir = camera.ray(i as f64 / w as f64, j as f64 / h as f64);
                let hit = cast_ray(state, eye, dir);
                let base = match hit.surface {
                    Surface::Wall => WALL_COLOR,
                    Surface::Floor => FLOOR_COLOR,
                    Surface::Ceiling => CEILING_COLOR,
                    Surface::Object(k) => placement_color(state, &state.room().placements[k]),
                };
                px.extend_from_slice(&shade(base, &hit));
                sf.push(hit.surface);
            }
            (px, sf)
        })
        .collect();
    let mut pixels = Vec::with_capacity(w * h * 3);
    let mut surfaces = Vec::with_capacity(w * h);
    for (p, s) in rows {
        pixels.extend(p);
        surfaces.extend(s);
    }
    Frame {
        width: camera.width,
        height: camera.height,
        pixels,
        surfaces,
        center_dot: false,
        annotations: None,
    }
}

/// Debug render: adds a label anchor at the projected center of every
/// visible placement that lies in view.
pub fn render_annotated(state: &WorldState, camera: &Camera) -> Frame {
    let mut frame = render_frame(state, camera);
    let anchors = state
        .visible()
        .filter_map(|(_, p)| {
            let (u, v) = camera.project(p.aabb().center())?;
            ((0.0..1.0).contains(&u) && (0.0..1.0).contains(&v)).then(|| Annotation {
                label: p.object.clone(),
                x: (u * camera.width as f64) as u32,
                y: (v * camera.height as f64) as u32,
            })
        })
        .collect();
    frame.annotations = Some(anchors);
    frame
}
