//! Turning posed 2D range scans into pseudo-point TSDF samples.
//!
//! Each pair of adjacent beam endpoints `(p1, p2)` is taken to lie on one
//! surface. A small square lattice of pseudo-points is laid over the cell of
//! `p1`, and each lattice point gets the truncated distance to the line
//! through `p1` and `p2`, signed positive on the robot's side.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;

const ON_LINE_TOL: f64 = 1e-9;
const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TsdfError {
    #[error("segment endpoints coincide")]
    DegenerateSegment,
    #[error("robot lies on the surface line; sign is undecidable")]
    RobotOnLine,
    #[error("invalid TSDF parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsdfParams {
    /// `h`, meters
    pub truncation: f64,
    /// `g`, meters
    pub grid_spacing: f64,
    /// Adjacent endpoints farther apart than this are not one surface.
    pub max_surface_gap: f64,
    /// Frame is `(2k+1) x (2k+1)` lattice points.
    #[serde(default = "default_half_extent")]
    pub frame_half_extent: u32,
}

fn default_half_extent() -> u32 {
    1
}

impl TsdfParams {
    /// `max_surface_gap` defaults to five lattice cells.
    pub fn new(truncation: f64, grid_spacing: f64) -> Self {
        Self { truncation, grid_spacing, max_surface_gap: 5.0 * grid_spacing, frame_half_extent: 1 }
    }

    pub fn validate(&self) -> Result<(), TsdfError> {
        for (name, v) in [
            ("truncation", self.truncation),
            ("grid_spacing", self.grid_spacing),
            ("max_surface_gap", self.max_surface_gap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TsdfError::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Robot pose; `theta` is the heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    /// Heading is wrapped into `[-pi, pi)`.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Sensor-frame point into the world frame.
    pub fn transform(&self, local: Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(self.x + c * local.x - s * local.y, self.y + s * local.x + c * local.y)
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = (theta + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    /// Offset from the heading, radians.
    pub angle: f64,
    /// Meters.
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub t: usize,
    pub robot_id: usize,
    pub pose: Pose2D,
    pub beams: Vec<Beam>,
    pub max_range: f64,
}

impl Scan {
    /// World-frame endpoint per beam; `None` for no-return beams at
    /// `max_range`.
    pub fn endpoints(&self) -> Vec<Option<Point2>> {
        self.beams
            .iter()
            .map(|b| {
                if b.range >= self.max_range || !(b.range > 0.0) {
                    None
                } else {
                    let (s, c) = b.angle.sin_cos();
                    Some(self.pose.transform(Point2::new(b.range * c, b.range * s)))
                }
            })
            .collect()
    }
}

/// Beam endpoints in the world frame, no-return beams dropped.
pub fn world_points(scan: &Scan) -> Vec<Point2> {
    scan.endpoints().into_iter().flatten().collect()
}

/// Integer cell on the global lattice of spacing `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridKey {
    pub ix: i64,
    pub iy: i64,
}

impl GridKey {
    pub const fn new(ix: i64, iy: i64) -> Self {
        Self { ix, iy }
    }

    /// Nearest lattice point.
    pub fn snap(p: &Point2, g: f64) -> Self {
        Self { ix: (p.x / g).round() as i64, iy: (p.y / g).round() as i64 }
    }

    pub fn location(&self, g: f64) -> Point2 {
        Point2::new(self.ix as f64 * g, self.iy as f64 * g)
    }

    pub fn offset(&self, dx: i64, dy: i64) -> Self {
        Self { ix: self.ix + dx, iy: self.iy + dy }
    }
}

/// One pseudo-point observation from a single scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoSample {
    pub key: GridKey,
    pub location: Point2,
    pub tsdf_value: f64,
    pub count: f64,
}

/// Unsigned distance from `q` to the line through `p1`, `p2`.
pub fn point_line_distance(q: &Point2, p1: &Point2, p2: &Point2) -> Result<f64, TsdfError> {
    let (x0, y0) = (q.x, q.y);
    let (x1, y1) = (p1.x, p1.y);
    let (x2, y2) = (p2.x, p2.y);
    let len = ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt();
    if len < DEGENERATE_TOL {
        return Err(TsdfError::DegenerateSegment);
    }
    Ok(((x2 - x1) * (y1 - y0) - (x1 - x0) * (y2 - y1)).abs() / len)
}

/// Signed perpendicular offset of `q` from the directed line `p1 -> p2`.
fn signed_offset(q: &Point2, p1: &Point2, p2: &Point2, len: f64) -> f64 {
    ((p2.x - p1.x) * (q.y - p1.y) - (p2.y - p1.y) * (q.x - p1.x)) / len
}

/// Truncated distance to the line through `p1`, `p2`: positive on the
/// robot's side, negative beyond the surface, zero within 1e-9 of it.
pub fn signed_truncated_distance(
    q: &Point2,
    p1: &Point2,
    p2: &Point2,
    robot: &Point2,
    h: f64,
) -> Result<f64, TsdfError> {
    let d = point_line_distance(q, p1, p2)?;
    let len = p1.distance(p2);
    let robot_side = signed_offset(robot, p1, p2, len);
    if robot_side.abs() < ON_LINE_TOL {
        return Err(TsdfError::RobotOnLine);
    }
    let q_side = signed_offset(q, p1, p2, len);
    if q_side.abs() < ON_LINE_TOL {
        return Ok(0.0);
    }
    let magnitude = d.min(h);
    Ok(if q_side.signum() == robot_side.signum() { magnitude } else { -magnitude })
}

/// Pseudo-point samples for one scan, ordered by [`GridKey`].
///
/// Lattice points covered by several frames in the same scan are averaged
/// and still count as one observation.
pub fn compute_pseudo_points(scan: &Scan, params: &TsdfParams) -> Vec<PseudoSample> {
    let g = params.grid_spacing;
    let k = params.frame_half_extent as i64;
    let robot = scan.pose.position();
    let ends = scan.endpoints();
    let mut acc: BTreeMap<GridKey, (f64, u32)> = BTreeMap::new();
    for pair in ends.windows(2) {
        let (Some(p1), Some(p2)) = (pair[0], pair[1]) else { continue };
        if p1.distance(&p2) > params.max_surface_gap {
            continue;
        }
        let center = GridKey::snap(&p1, g);
        let mut frame = Vec::with_capacity(((2 * k + 1) * (2 * k + 1)) as usize);
        let mut ok = true;
        for dy in -k..=k {
            for dx in -k..=k {
                let key = center.offset(dx, dy);
                match signed_truncated_distance(&key.location(g), &p1, &p2, &robot, params.truncation) {
                    Ok(v) => frame.push((key, v)),
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                break;
            }
        }
        if !ok {
            continue;
        }
        for (key, v) in frame {
            let e = acc.entry(key).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(key, (sum, n))| PseudoSample { key, location: key.location(g), tsdf_value: sum / n as f64, count: 1.0 })
        .collect()
}
