//! Small vector and axis-aligned box toolkit shared by rendering, movement
//! and planning. World axes: x to the east, y up, z to the north.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let l = self.length();
        if l == 0.0 {
            self
        } else {
            self * (1.0 / l)
        }
    }

    pub fn get(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned box given by its min and max corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// Open-interior overlap: boxes that only touch do not overlap.
    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x < o.max.x
            && o.min.x < self.max.x
            && self.min.y < o.max.y
            && o.min.y < self.max.y
            && self.min.z < o.max.z
            && o.min.z < self.max.z
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Slab test. Returns `(t_enter, t_exit)` of the ray against the box,
    /// or `None` if the ray line misses it or the box lies behind.
    pub fn ray_interval(&self, origin: Vec3, dir: Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for axis in 0..3 {
            let o = origin.get(axis);
            let d = dir.get(axis);
            let lo = self.min.get(axis);
            let hi = self.max.get(axis);
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let (mut a, mut b) = ((lo - o) * inv, (hi - o) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        (t1 >= 0.0).then_some((t0, t1))
    }

    /// Distance along the ray to the first point of the box surface in
    /// front of the origin. Origins inside the box report `None`.
    pub fn ray_hit(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let (t0, _) = self.ray_interval(origin, dir)?;
        (t0 > 0.0).then_some(t0)
    }
}

/// Rectangle on the floor plane, in (x, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub min_z: f64,
    pub max_x: f64,
    pub max_z: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_z: f64, max_x: f64, max_z: f64) -> Self {
        Self { min_x, min_z, max_x, max_z }
    }

    pub fn inflate(&self, r: f64) -> Rect {
        Rect::new(self.min_x - r, self.min_z - r, self.max_x + r, self.max_z + r)
    }

    /// Strict interior containment.
    pub fn contains_open(&self, x: f64, z: f64) -> bool {
        x > self.min_x && x < self.max_x && z > self.min_z && z < self.max_z
    }

    pub fn overlaps(&self, o: &Rect) -> bool {
        self.min_x < o.max_x && o.min_x < self.max_x && self.min_z < o.max_z && o.min_z < self.max_z
    }

    /// Euclidean distance from a point to the rectangle (0 when inside).
    pub fn distance_to(&self, x: f64, z: f64) -> f64 {
        let dx = (self.min_x - x).max(0.0).max(x - self.max_x);
        let dz = (self.min_z - z).max(0.0).max(z - self.max_z);
        (dx * dx + dz * dz).sqrt()
    }

    /// First parameter `t` in `[0, len]` at which the segment from `(x, z)`
    /// along unit `(dx, dz)` enters the open interior of the rectangle.
    pub fn segment_entry(&self, x: f64, z: f64, dx: f64, dz: f64, len: f64) -> Option<f64> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for (o, d, lo, hi) in [(x, dx, self.min_x, self.max_x), (z, dz, self.min_z, self.max_z)] {
            if d == 0.0 {
                // Moving parallel: only blocks when strictly inside the slab.
                if o <= lo || o >= hi {
                    return None;
                }
                continue;
            }
            let (mut a, mut b) = ((lo - o) / d, (hi - o) / d);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
        if t0 >= t1 || t1 <= 0.0 || t0 >= len {
            return None;
        }
        Some(t0.max(0.0))
    }
}

/// Wrap an angle in degrees to `[0, 360)`.
pub fn wrap_degrees(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Signed smallest difference `to - from` in `(-180, 180]`.
pub fn angle_delta(from: f64, to: f64) -> f64 {
    let mut d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d -= 360.0;
    }
    d
}

/// Unit floor heading for a yaw in degrees; yaw 0 faces +z, 90 faces +x.
pub fn heading(yaw_deg: f64) -> (f64, f64) {
    let y = yaw_deg.to_radians();
    (y.sin(), y.cos())
}
