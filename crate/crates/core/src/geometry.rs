//! World model: points, array orientations, obstacles, trajectories and
//! line-of-sight tests.
//!
//! World axes are x = east, y = north, z = up, in meters. Azimuths are compass
//! bearings (0° = north, positive clockwise viewed from above); elevations are
//! positive upward. An [`Orientation`] describes an array boresight by its
//! azimuth and a downtilt measured from zenith, so 90° is horizontal and 180°
//! points straight down.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector for a world compass azimuth and elevation (degrees).
    pub fn from_bearing(azimuth_deg: f64, elevation_deg: f64) -> Vec3 {
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        Vec3::new(az.sin() * el.cos(), az.cos() * el.cos(), el.sin())
    }

    /// Compass azimuth and elevation (degrees) of this direction.
    pub fn bearing(self) -> (f64, f64) {
        let horiz = self.x.hypot(self.y);
        let az = wrap_deg(self.x.atan2(self.y).to_degrees());
        let el = self.z.atan2(horiz).to_degrees();
        (az, el)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
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

/// Wraps an angle in degrees into (-180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

/// Array boresight: compass azimuth and downtilt from zenith, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub azimuth: f64,
    pub downtilt: f64,
}

impl Default for Orientation {
    fn default() -> Self {
        Orientation {
            azimuth: 0.0,
            downtilt: 90.0,
        }
    }
}

/// Orthonormal local frame of an array: boresight, right-hand side and up.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
}

impl Orientation {
    pub fn new(azimuth: f64, downtilt: f64) -> Result<Self> {
        let o = Orientation { azimuth, downtilt };
        o.validate()?;
        Ok(o)
    }

    /// Builds an orientation from an arbitrary azimuth, wrapping it into [0, 360).
    pub fn wrapped(azimuth: f64, downtilt: f64) -> Self {
        Orientation {
            azimuth: azimuth.rem_euclid(360.0),
            downtilt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..360.0).contains(&self.azimuth) {
            return Err(Error::OutOfRange {
                what: "azimuth",
                value: self.azimuth,
                min: 0.0,
                max: 360.0,
            });
        }
        if !(0.0..=180.0).contains(&self.downtilt) {
            return Err(Error::OutOfRange {
                what: "downtilt",
                value: self.downtilt,
                min: 0.0,
                max: 180.0,
            });
        }
        Ok(())
    }

    pub fn frame(&self) -> Frame {
        let az = self.azimuth.to_radians();
        let forward = Vec3::from_bearing(self.azimuth, 90.0 - self.downtilt);
        let right = Vec3::new(az.cos(), -az.sin(), 0.0);
        let up = right.cross(forward);
        Frame { forward, right, up }
    }

    /// Direction with local angles `(az, el)` expressed in world coordinates.
    pub fn to_world(&self, az_deg: f64, el_deg: f64) -> Vec3 {
        let f = self.frame();
        let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
        f.forward * (el.cos() * az.cos()) + f.right * (el.cos() * az.sin()) + f.up * el.sin()
    }

    /// Local (azimuth, elevation) of a world direction. Azimuth is positive
    /// toward the array's right.
    pub fn to_local(&self, dir: Vec3) -> Result<(f64, f64)> {
        let d = dir.normalized().ok_or(Error::CoincidentPoints)?;
        let f = self.frame();
        let (x, y, z) = (d.dot(f.forward), d.dot(f.right), d.dot(f.up));
        let az = wrap_deg(y.atan2(x).to_degrees());
        let el = z.clamp(-1.0, 1.0).asin().to_degrees();
        Ok((az, el))
    }
}

/// Angles of `to` as seen from an array at `from` with orientation `orient`.
pub fn local_angles(from: Vec3, to: Vec3, orient: &Orientation) -> Result<(f64, f64)> {
    orient.to_local(to - from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Axis-aligned box.
    Box { min: Vec3, max: Vec3 },
    /// Vertical rectangle between two ground points, extruded to the wall thickness.
    Wall {
        start: [f64; 2],
        end: [f64; 2],
        z_min: f64,
        z_max: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub shape: Shape,
    pub material: String,
    /// Nominal traversal thickness used to scale penetration loss.
    pub thickness: f64,
}

/// An axis-aligned box in some local frame plus the transform into it.
struct LocalBox {
    origin: Vec3,
    axes: [Vec3; 3],
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Obstacle {
    /// Validates and builds an obstacle. For boxes a missing thickness defaults
    /// to the smaller horizontal extent.
    pub fn new(shape: Shape, material: impl Into<String>, thickness: Option<f64>) -> Result<Self> {
        let thickness = match (&shape, thickness) {
            (Shape::Box { min, max }, t) => {
                let ext = [max.x - min.x, max.y - min.y, max.z - min.z];
                if !min.is_finite() || !max.is_finite() || ext.iter().any(|e| *e < 0.0) {
                    return Err(Error::Geometry("box max must be >= min".into()));
                }
                if ext.iter().filter(|e| **e > 0.0).count() < 2 {
                    return Err(Error::Geometry("box needs positive extent in two dimensions".into()));
                }
                t.unwrap_or_else(|| {
                    let h = ext[0].min(ext[1]);
                    if h > 0.0 {
                        h
                    } else {
                        ext[0].max(ext[1])
                    }
                })
            }
            (Shape::Wall { start, end, z_min, z_max }, t) => {
                let len = (end[0] - start[0]).hypot(end[1] - start[1]);
                if !(len > 0.0) || !(z_max > z_min) {
                    return Err(Error::Geometry("wall needs positive length and height".into()));
                }
                t.ok_or_else(|| Error::Geometry("wall thickness is required".into()))?
            }
        };
        if !(thickness > 0.0) || !thickness.is_finite() {
            return Err(Error::Geometry(format!("thickness must be > 0, got {thickness}")));
        }
        Ok(Obstacle {
            shape,
            material: material.into(),
            thickness,
        })
    }

    fn local_box(&self) -> LocalBox {
        match &self.shape {
            Shape::Box { min, max } => LocalBox {
                origin: Vec3::ZERO,
                axes: [
                    Vec3::new(1.0, 0.0, 0.0),
                    Vec3::new(0.0, 1.0, 0.0),
                    Vec3::new(0.0, 0.0, 1.0),
                ],
                lo: [min.x, min.y, min.z],
                hi: [max.x, max.y, max.z],
            },
            Shape::Wall {
                start,
                end,
                z_min,
                z_max,
            } => {
                let (dx, dy) = (end[0] - start[0], end[1] - start[1]);
                let len = dx.hypot(dy);
                let u = Vec3::new(dx / len, dy / len, 0.0);
                let n = Vec3::new(-u.y, u.x, 0.0);
                let half = self.thickness / 2.0;
                LocalBox {
                    origin: Vec3::new(start[0], start[1], 0.0),
                    axes: [u, n, Vec3::new(0.0, 0.0, 1.0)],
                    lo: [0.0, -half, *z_min],
                    hi: [len, half, *z_max],
                }
            }
        }
    }

    /// Length of the segment `a -> b` lying inside the obstacle.
    pub fn chord_length(&self, a: Vec3, b: Vec3) -> f64 {
        let lb = self.local_box();
        let pa = a - lb.origin;
        let d = b - a;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for k in 0..3 {
            let p = pa.dot(lb.axes[k]);
            let v = d.dot(lb.axes[k]);
            if v.abs() < 1e-15 {
                if p < lb.lo[k] || p > lb.hi[k] {
                    return 0.0;
                }
            } else {
                let (mut ta, mut tb) = ((lb.lo[k] - p) / v, (lb.hi[k] - p) / v);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 >= t1 {
                    return 0.0;
                }
            }
        }
        (t1 - t0) * d.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub obstacle: usize,
    pub material: String,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosResult {
    pub is_los: bool,
    pub intersections: Vec<Intersection>,
}

impl LosResult {
    pub fn clear() -> Self {
        LosResult {
            is_los: true,
            intersections: Vec::new(),
        }
    }
}

/// Tests the segment `a -> b` against every obstacle.
pub fn los_test(obstacles: &[Obstacle], a: Vec3, b: Vec3) -> LosResult {
    let intersections: Vec<Intersection> = obstacles
        .iter()
        .enumerate()
        .filter_map(|(i, o)| {
            let length = o.chord_length(a, b);
            (length > 0.0).then(|| Intersection {
                obstacle: i,
                material: o.material.clone(),
                length,
            })
        })
        .collect();
    LosResult {
        is_los: intersections.is_empty(),
        intersections,
    }
}

/// Vertical cylinder (pedestrian, vehicle) standing on the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub center: Vec3,
    pub radius: f64,
    pub height: f64,
}

impl Cylinder {
    /// True if the segment `a -> b` passes through the cylinder volume.
    pub fn intersects(&self, a: Vec3, b: Vec3) -> bool {
        let d = b - a;
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        // vertical extent
        let (z_lo, z_hi) = (self.center.z, self.center.z + self.height);
        if d.z.abs() < 1e-15 {
            if a.z < z_lo || a.z > z_hi {
                return false;
            }
        } else {
            let (mut ta, mut tb) = ((z_lo - a.z) / d.z, (z_hi - a.z) / d.z);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        if t0 > t1 {
            return false;
        }
        // horizontal disc
        let (px, py) = (a.x - self.center.x, a.y - self.center.y);
        let qa = d.x * d.x + d.y * d.y;
        let qb = 2.0 * (px * d.x + py * d.y);
        let qc = px * px + py * py - self.radius * self.radius;
        if qa < 1e-15 {
            return qc <= 0.0;
        }
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return false;
        }
        let s = disc.sqrt();
        let (ra, rb) = ((-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa));
        ra.max(t0) <= rb.min(t1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<Vec3>,
    speeds: Vec<f64>,
    /// Cumulative start time of each segment, plus the total duration at the end.
    times: Vec<f64>,
}

impl Trajectory {
    /// Trajectory at a single constant speed.
    pub fn new(waypoints: Vec<Vec3>, speed: f64) -> Result<Self> {
        let n = waypoints.len().saturating_sub(1);
        Self::with_segment_speeds(waypoints, vec![speed; n])
    }

    pub fn with_segment_speeds(waypoints: Vec<Vec3>, speeds: Vec<f64>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::Geometry("trajectory needs at least two waypoints".into()));
        }
        if speeds.len() != waypoints.len() - 1 {
            return Err(Error::Geometry(format!(
                "{} segment speeds given for {} segments",
                speeds.len(),
                waypoints.len() - 1
            )));
        }
        if let Some(s) = speeds.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::Geometry(format!("speed must be > 0, got {s}")));
        }
        if waypoints.iter().any(|w| !w.is_finite()) {
            return Err(Error::Geometry("non-finite waypoint".into()));
        }
        let mut times = Vec::with_capacity(waypoints.len());
        let mut acc = 0.0;
        times.push(0.0);
        for (w, s) in waypoints.windows(2).zip(&speeds) {
            acc += w[0].distance(w[1]) / s;
            times.push(acc);
        }
        Ok(Trajectory {
            waypoints,
            speeds,
            times,
        })
    }

    /// A UE that never moves.
    pub fn stationary(p: Vec3) -> Self {
        Trajectory {
            waypoints: vec![p, p],
            speeds: vec![1.0],
            times: vec![0.0, 0.0],
        }
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().cloned().fold(0.0, f64::max)
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn segment_at(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&s| s <= t);
        idx.clamp(1, self.waypoints.len() - 1) - 1
    }

    pub fn position_at(&self, t: f64) -> Result<Vec3> {
        let dur = self.duration();
        if !(0.0..=dur).contains(&t) {
            return Err(Error::OutOfRange {
                what: "trajectory time",
                value: t,
                min: 0.0,
                max: dur,
            });
        }
        let i = self.segment_at(t);
        let (a, b) = (self.waypoints[i], self.waypoints[i + 1]);
        let span = self.times[i + 1] - self.times[i];
        if span <= 0.0 {
            return Ok(b);
        }
        let f = ((t - self.times[i]) / span).clamp(0.0, 1.0);
        Ok(a + (b - a) * f)
    }

    /// Position with `t` clamped to the trajectory's time span.
    pub fn position_clamped(&self, t: f64) -> Vec3 {
        self.position_at(t.clamp(0.0, self.duration())).unwrap()
    }

    /// Compass heading of travel at time `t`; `None` while every segment is
    /// degenerate.
    pub fn heading_at(&self, t: f64) -> Option<f64> {
        let t = t.clamp(0.0, self.duration());
        let i = self.segment_at(t);
        let forward = (i..self.waypoints.len() - 1).chain((0..i).rev());
        for j in forward {
            let d = self.waypoints[j + 1] - self.waypoints[j];
            if d.x.hypot(d.y) > 1e-9 {
                return Some(d.bearing().0.rem_euclid(360.0));
            }
        }
        None
    }
}
