//! Polygon worlds, ray casting and ground-truth TSDF.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{Bounds, Point2};
use crate::tsdf::{Beam, Pose2D, Scan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldKind {
    /// 10 x 10 m room centered on the origin.
    SquareRoom,
    /// 30 x 3 m corridor centered on the origin.
    Corridor,
    /// Two 8 x 8 m rooms joined by a 1.5 m doorway at `x = 0`.
    TwoRooms,
}

/// Walls as closed polygons. Free space is the set of points inside an odd
/// number of polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub polygons: Vec<Vec<Point2>>,
}

impl World {
    pub fn builtin(kind: WorldKind) -> Self {
        let poly = |pts: &[(f64, f64)]| pts.iter().map(|&p| Point2::from(p)).collect::<Vec<_>>();
        let polygons = match kind {
            WorldKind::SquareRoom => vec![poly(&[(-5.0, -5.0), (5.0, -5.0), (5.0, 5.0), (-5.0, 5.0)])],
            WorldKind::Corridor => vec![poly(&[(-15.0, -1.5), (15.0, -1.5), (15.0, 1.5), (-15.0, 1.5)])],
            WorldKind::TwoRooms => vec![poly(&[
                (-8.0, -4.0),
                (-0.25, -4.0),
                (-0.25, -0.75),
                (0.25, -0.75),
                (0.25, -4.0),
                (8.0, -4.0),
                (8.0, 4.0),
                (0.25, 4.0),
                (0.25, 0.75),
                (-0.25, 0.75),
                (-0.25, 4.0),
                (-8.0, 4.0),
            ])],
        };
        Self { polygons }
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.polygons.iter().flat_map(|poly| (0..poly.len()).map(move |i| (poly[i], poly[(i + 1) % poly.len()])))
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::enclosing(self.polygons.iter().flatten().copied()).expect("world has vertices")
    }

    /// Distance along the ray to the nearest wall, or `max_range` if nothing
    /// is hit within it.
    pub fn ray_cast(&self, origin: &Point2, angle: f64, max_range: f64) -> f64 {
        let (dy, dx) = angle.sin_cos();
        let mut best = max_range;
        for (a, b) in self.segments() {
            let (ex, ey) = (b.x - a.x, b.y - a.y);
            let denom = dx * ey - dy * ex;
            if denom.abs() < 1e-15 {
                continue;
            }
            let (wx, wy) = (a.x - origin.x, a.y - origin.y);
            let t = (wx * ey - wy * ex) / denom;
            let u = (wx * dy - wy * dx) / denom;
            if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) && t < best {
                best = t;
            }
        }
        best
    }

    pub fn is_free(&self, p: &Point2) -> bool {
        let mut inside = false;
        for (a, b) in self.segments() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance to the nearest wall, positive in free space.
    pub fn signed_distance(&self, p: &Point2) -> f64 {
        let d = self.segments().map(|(a, b)| segment_distance(p, &a, &b)).fold(f64::INFINITY, f64::min);
        if self.is_free(p) {
            d
        } else {
            -d
        }
    }

    pub fn truncated_sdf(&self, p: &Point2, h: f64) -> f64 {
        self.signed_distance(p).clamp(-h, h)
    }
}

fn segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let len2 = ex * ex + ey * ey;
    let s = if len2 > 0.0 { (((p.x - a.x) * ex + (p.y - a.y) * ey) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.distance(&Point2::new(a.x + s * ex, a.y + s * ey))
}

/// Waypoint path followed at constant speed, holding still at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotPath {
    pub waypoints: Vec<[f64; 2]>,
}

impl RobotPath {
    /// Pose after traveling `distance` meters; the heading follows the
    /// current leg.
    pub fn pose_at(&self, distance: f64) -> Pose2D {
        let pts: Vec<Point2> = self.waypoints.iter().map(|&[x, y]| Point2::new(x, y)).collect();
        let mut left = distance.max(0.0);
        let mut heading = 0.0;
        for w in pts.windows(2) {
            let len = w[0].distance(&w[1]);
            if len == 0.0 {
                continue;
            }
            heading = (w[1].y - w[0].y).atan2(w[1].x - w[0].x);
            if left <= len {
                let s = left / len;
                return Pose2D::new(w[0].x + s * (w[1].x - w[0].x), w[0].y + s * (w[1].y - w[0].y), heading);
            }
            left -= len;
        }
        let last = pts[pts.len() - 1];
        Pose2D::new(last.x, last.y, heading)
    }
}

fn default_beams() -> usize {
    360
}

fn default_max_range() -> f64 {
    10.0
}

fn default_speed() -> f64 {
    0.25
}

/// Built-in world plus one path per robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub world: WorldKind,
    pub robots: Vec<RobotPath>,
    /// Scans per robot; steps `0..scan_steps` each produce one.
    pub scan_steps: usize,
    /// Beams per scan, evenly spread over a full turn starting behind the robot.
    #[serde(default = "default_beams")]
    pub beams: usize,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    /// Meters traveled per step.
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Standard deviation of additive range noise, meters.
    #[serde(default)]
    pub range_noise_std: f64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.robots.is_empty() {
            return bad("synth spec needs at least one robot path".into());
        }
        if self.beams < 2 {
            return bad(format!("beams must be at least 2, got {}", self.beams));
        }
        for (name, v) in [("max_range", self.max_range), ("speed", self.speed)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.range_noise_std.is_finite() && self.range_noise_std >= 0.0) {
            return bad(format!("range_noise_std must be >= 0, got {}", self.range_noise_std));
        }
        let world = World::builtin(self.world);
        for (i, path) in self.robots.iter().enumerate() {
            if path.waypoints.is_empty() {
                return bad(format!("robot {i} has no waypoints"));
            }
            for &[x, y] in &path.waypoints {
                let p = Point2::new(x, y);
                if !p.is_finite() || !world.is_free(&p) {
                    return bad(format!("robot {i} waypoint ({x}, {y}) is not in free space"));
                }
            }
        }
        Ok(())
    }
}

/// Scans for every robot, ordered by step then robot, and the world they
/// were cast against.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub world: World,
    pub scans: Vec<Scan>,
}

pub fn synth_world(spec: &SynthSpec, seed: u64) -> Result<SynthOutput, SimError> {
    spec.validate()?;
    let world = World::builtin(spec.world);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.range_noise_std).map_err(|e| SimError::Config(e.to_string()))?;
    let da = std::f64::consts::TAU / spec.beams as f64;
    let mut scans = Vec::with_capacity(spec.scan_steps * spec.robots.len());
    for t in 0..spec.scan_steps {
        for (robot_id, path) in spec.robots.iter().enumerate() {
            let pose = path.pose_at(t as f64 * spec.speed);
            let origin = pose.position();
            let beams = (0..spec.beams)
                .map(|k| {
                    let angle = -std::f64::consts::PI + k as f64 * da;
                    let mut range = world.ray_cast(&origin, pose.theta + angle, spec.max_range);
                    if spec.range_noise_std > 0.0 && range < spec.max_range {
                        range = (range + noise.sample(&mut rng)).clamp(1e-3, spec.max_range);
                    }
                    Beam { angle, range }
                })
                .collect();
            scans.push(Scan { t, robot_id, pose, beams, max_range: spec.max_range });
        }
    }
    Ok(SynthOutput { world, scans })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_beams_in_square_room() {
        let spec = SynthSpec {
            world: WorldKind::SquareRoom,
            robots: vec![RobotPath { waypoints: vec![[0.0, 0.0]] }],
            scan_steps: 1,
            beams: 360,
            max_range: 10.0,
            speed: 0.25,
            range_noise_std: 0.0,
        };
        let out = synth_world(&spec, 0).unwrap();
        let beams = &out.scans[0].beams;
        for k in [0, 90, 180, 270] {
            assert!((beams[k].range - 5.0).abs() < 1e-12, "beam {k}: {}", beams[k].range);
        }
    }

    #[test]
    fn center_tsdf_truncates() {
        let w = World::builtin(WorldKind::SquareRoom);
        assert_eq!(w.truncated_sdf(&Point2::new(0.0, 0.0), 0.5), 0.5);
        assert!((w.signed_distance(&Point2::new(4.8, 0.0)) - 0.2).abs() < 1e-12);
        assert!((w.signed_distance(&Point2::new(5.3, 0.0)) + 0.3).abs() < 1e-12);
    }

    #[test]
    fn doorway_is_open() {
        let w = World::builtin(WorldKind::TwoRooms);
        assert!(w.is_free(&Point2::new(0.0, 0.0)));
        assert!(!w.is_free(&Point2::new(0.0, 2.0)));
        let r = w.ray_cast(&Point2::new(-4.0, 0.0), 0.0, 20.0);
        assert!((r - 12.0).abs() < 1e-12);
    }

    #[test]
    fn no_hit_reports_max_range() {
        let w = World::builtin(WorldKind::Corridor);
        assert_eq!(w.ray_cast(&Point2::new(0.0, 0.0), 0.0, 5.0), 5.0);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let spec = SynthSpec {
            world: WorldKind::Corridor,
            robots: vec![RobotPath { waypoints: vec![[-10.0, 0.0], [10.0, 0.0]] }],
            scan_steps: 3,
            beams: 90,
            max_range: 6.0,
            speed: 0.5,
            range_noise_std: 0.02,
        };
        let a = synth_world(&spec, 7).unwrap().scans;
        let b = synth_world(&spec, 7).unwrap().scans;
        let c = synth_world(&spec, 8).unwrap().scans;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn waypoint_in_wall_is_rejected() {
        let spec = SynthSpec {
            world: WorldKind::TwoRooms,
            robots: vec![RobotPath { waypoints: vec![[0.0, 3.0]] }],
            scan_steps: 1,
            beams: 8,
            max_range: 5.0,
            speed: 0.1,
            range_noise_std: 0.0,
        };
        assert!(matches!(synth_world(&spec, 0), Err(SimError::Config(_))));
    }

    #[test]
    fn path_pose_follows_legs() {
        let p = RobotPath { waypoints: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]] };
        let mid = p.pose_at(1.5);
        assert!((mid.x - 1.0).abs() < 1e-12 && (mid.y - 0.5).abs() < 1e-12);
        assert!((mid.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let end = p.pose_at(10.0);
        assert_eq!((end.x, end.y), (1.0, 1.0));
    }
}
