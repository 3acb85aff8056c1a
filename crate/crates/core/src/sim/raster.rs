//! Leaf-local map prediction, error metrics and map export.

use std::collections::BTreeMap;
use std::io::Write;

use crate::geometry::{Bounds, Point2};
use crate::gp::{CompressedGp, GpError, GpPosterior, GpPrior};
use crate::quadtree::{Cell, PseudoPointStats, QuadTree};

/// Mean and variance on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MapRaster {
    pub points: Vec<Point2>,
    pub posterior: GpPosterior,
}

fn cell_key(c: &Cell) -> (u64, u64, u64) {
    (c.center.x.to_bits(), c.center.y.to_bits(), c.half.to_bits())
}

/// Predicts each query point from the statistics of the leaf containing it,
/// plus those of leaves within `halo` meters of that leaf. Points outside
/// the tree or in an empty neighborhood get the prior.
pub fn predict_points(
    tree: &QuadTree,
    prior: &GpPrior,
    halo: Option<f64>,
    points: &[Point2],
) -> Result<GpPosterior, GpError> {
    let leaves = tree.leaves();
    let index: BTreeMap<_, usize> = leaves.iter().enumerate().map(|(i, (c, _))| (cell_key(c), i)).collect();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut out = GpPosterior::prior(prior, points.len());
    for (q, p) in points.iter().enumerate() {
        if let Some(cell) = tree.leaf_cell(p) {
            groups.entry(index[&cell_key(&cell)]).or_default().push(q);
        }
    }
    for (leaf, members) in groups {
        let (cell, own) = &leaves[leaf];
        let stats: Vec<PseudoPointStats> = match halo {
            None => own.clone(),
            Some(r) => leaves
                .iter()
                .filter(|(c, _)| c == cell || c.gap_to(cell) <= r)
                .flat_map(|(_, s)| s.iter().copied())
                .collect(),
        };
        if stats.is_empty() {
            continue;
        }
        let gp = CompressedGp::fit(&stats, prior)?;
        for q in members {
            let (m, v) = gp.predict_one(&points[q]);
            out.mean[q] = m;
            out.variance[q] = v;
        }
    }
    Ok(out)
}

pub fn rasterize_map(
    tree: &QuadTree,
    prior: &GpPrior,
    halo: Option<f64>,
    bounds: &Bounds,
    resolution: f64,
) -> Result<MapRaster, GpError> {
    let points = bounds.grid(resolution);
    let posterior = predict_points(tree, prior, halo, &points)?;
    Ok(MapRaster { points, posterior })
}

/// Root-mean-square error against a reference map, or `EmptyMask` when no
/// reference value lies strictly inside `(-h, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rmse {
    Value(f64),
    EmptyMask,
}

impl Rmse {
    /// `NaN` for an empty mask.
    pub fn as_f64(&self) -> f64 {
        match self {
            Rmse::Value(v) => *v,
            Rmse::EmptyMask => f64::NAN,
        }
    }
}

/// RMSE of `prediction` against `reference` over points where
/// `reference` is strictly inside `(-h, h)`.
pub fn compute_rmse(prediction: &[f64], reference: &[f64], h: f64) -> Rmse {
    assert_eq!(prediction.len(), reference.len(), "predictions must share one grid");
    let (mut sum, mut count) = (0.0, 0usize);
    for (y, z) in prediction.iter().zip(reference) {
        if z.abs() < h {
            sum += (y - z).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        Rmse::EmptyMask
    } else {
        Rmse::Value((sum / count as f64).sqrt())
    }
}

pub fn write_map_csv<W: Write>(mut w: W, map: &MapRaster) -> std::io::Result<()> {
    writeln!(w, "x,y,mean,variance")?;
    for (i, p) in map.points.iter().enumerate() {
        writeln!(w, "{:?},{:?},{:?},{:?}", p.x, p.y, map.posterior.mean[i], map.posterior.variance[i])?;
    }
    Ok(())
}

/// Binary 8-bit PGM of the mean, `-h` black and `+h` white, top row at the
/// largest `y`.
pub fn write_map_pgm<W: Write>(mut w: W, map: &MapRaster, h: f64) -> std::io::Result<()> {
    let nx = map.points.iter().take_while(|p| p.y == map.points[0].y).count().max(1);
    let ny = map.points.len() / nx;
    writeln!(w, "P5\n{nx} {ny}\n255")?;
    let mut bytes = Vec::with_capacity(nx * ny);
    for row in (0..ny).rev() {
        for col in 0..nx {
            let v = map.posterior.mean[row * nx + col].clamp(-h, h);
            bytes.push((((v + h) / (2.0 * h)) * 255.0).round() as u8);
        }
    }
    w.write_all(&bytes)
}
