//! Planar points and axis-aligned boxes shared by every module.

use serde::{Deserialize, Serialize};

/// A point in the world frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_squared(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        self.distance_squared(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// Closed axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Point2,
    pub max: Point2,
}

impl Bounds {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    /// Smallest box containing every point, or `None` for an empty iterator.
    pub fn enclosing<I: IntoIterator<Item = Point2>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Bounds::new(first, first);
        for p in it {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn union(&self, other: &Bounds) -> Bounds {
        Bounds::new(
            Point2::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            Point2::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        )
    }

    pub fn padded(&self, margin: f64) -> Bounds {
        Bounds::new(
            Point2::new(self.min.x - margin, self.min.y - margin),
            Point2::new(self.max.x + margin, self.max.y + margin),
        )
    }

    /// Lattice of query points covering the box at the given spacing,
    /// row-major from `min`.
    pub fn grid(&self, resolution: f64) -> Vec<Point2> {
        assert!(resolution > 0.0, "grid resolution must be positive");
        let count = |span: f64| (span / resolution + 1e-9).floor() as usize + 1;
        let (nx, ny) = (count(self.max.x - self.min.x), count(self.max.y - self.min.y));
        let mut out = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                out.push(Point2::new(self.min.x + ix as f64 * resolution, self.min.y + iy as f64 * resolution));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enclosing_box() {
        let b = Bounds::enclosing([Point2::new(1.0, -2.0), Point2::new(-3.0, 4.0)]).unwrap();
        assert_eq!(b.min, Point2::new(-3.0, -2.0));
        assert_eq!(b.max, Point2::new(1.0, 4.0));
        assert!(Bounds::enclosing(std::iter::empty()).is_none());
    }

    #[test]
    fn grid_covers_box_inclusive() {
        let b = Bounds::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.5));
        let g = b.grid(0.5);
        assert_eq!(g.len(), 3 * 2);
        assert_eq!(g[0], Point2::new(0.0, 0.0));
        assert_eq!(g[5], Point2::new(1.0, 0.5));
    }
}
