//! Quadtree over pseudo-point statistics.
//!
//! The root is a square centered on the world origin. It doubles its
//! half-width whenever an insertion falls outside it, and leaves split
//! recursively once they hold more than `max_leaf_size` entries. Splits only
//! move entries, and the shape of the tree depends on nothing but the set of
//! keys it holds, so two trees with the same keys have the same leaves no
//! matter the insertion order. Cells are kept in lattice units, where every
//! center and half-width is exact, and reported in meters.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Bounds, Point2};
use crate::tsdf::GridKey;

/// Root half-width on construction, in lattice cells.
const INITIAL_HALF_CELLS: f64 = 64.0;
/// Smallest half-width, in lattice cells, that may still split.
const MIN_SPLIT_HALF: f64 = 1e-3;
/// Relative tolerance for treating a query coordinate as a lattice point.
const LATTICE_SNAP: f64 = 1e-9;

/// Aggregated TSDF evidence at one pseudo-point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoPointStats {
    pub key: GridKey,
    pub location: Point2,
    /// Weighted average TSDF, meters.
    pub zeta: f64,
    /// Accumulated observation weight.
    pub m: f64,
}

/// Square cell: center and half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: Point2,
    pub half: f64,
}

impl Cell {
    pub fn contains(&self, p: &Point2) -> bool {
        (p.x - self.center.x).abs() <= self.half && (p.y - self.center.y).abs() <= self.half
    }

    /// Quadrant index; points on a dividing line go to the lower index.
    fn child_index(&self, p: &Point2) -> usize {
        (p.x > self.center.x) as usize | (((p.y > self.center.y) as usize) << 1)
    }

    fn child(&self, i: usize) -> Cell {
        let q = self.half / 2.0;
        let dx = if i & 1 == 1 { q } else { -q };
        let dy = if i & 2 == 2 { q } else { -q };
        Cell { center: Point2::new(self.center.x + dx, self.center.y + dy), half: q }
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(
            Point2::new(self.center.x - self.half, self.center.y - self.half),
            Point2::new(self.center.x + self.half, self.center.y + self.half),
        )
    }

    /// Distance between the closest points of two cells; zero if they touch.
    pub fn gap_to(&self, other: &Cell) -> f64 {
        let dx = ((self.center.x - other.center.x).abs() - self.half - other.half).max(0.0);
        let dy = ((self.center.y - other.center.y).abs() - self.half - other.half).max(0.0);
        dx.hypot(dy)
    }

    fn distance_to(&self, p: &Point2) -> f64 {
        let dx = ((p.x - self.center.x).abs() - self.half).max(0.0);
        let dy = ((p.y - self.center.y).abs() - self.half).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }
}

type Table = BTreeMap<GridKey, PseudoPointStats>;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(Table),
    Split(Box<[Node; 4]>),
}

/// Exact totals over every leaf.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StatsSum {
    pub total_m: f64,
    /// sum of `m * zeta`
    pub total_weighted: f64,
    pub count: usize,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadTree {
    root: Node,
    cell: Cell,
    grid_spacing: f64,
    max_leaf_size: usize,
}

impl QuadTree {
    pub fn new(grid_spacing: f64, max_leaf_size: usize) -> Self {
        assert!(grid_spacing > 0.0, "grid spacing must be positive");
        assert!(max_leaf_size >= 1, "max_leaf_size must be at least 1");
        Self {
            root: Node::Leaf(Table::new()),
            cell: Cell { center: Point2::new(0.0, 0.0), half: INITIAL_HALF_CELLS },
            grid_spacing,
            max_leaf_size,
        }
    }

    pub fn grid_spacing(&self) -> f64 {
        self.grid_spacing
    }

    pub fn max_leaf_size(&self) -> usize {
        self.max_leaf_size
    }

    pub fn root_cell(&self) -> Cell {
        self.to_world(self.cell)
    }

    fn to_world(&self, c: Cell) -> Cell {
        let g = self.grid_spacing;
        Cell { center: Point2::new(c.center.x * g, c.center.y * g), half: c.half * g }
    }

    /// Coordinates within `LATTICE_SNAP` of an integer are taken as that
    /// integer, so a key's own location routes exactly like the key.
    fn to_lattice(&self, x: &Point2) -> Point2 {
        let snap = |v: f64| {
            let r = v.round();
            if (v - r).abs() <= LATTICE_SNAP * r.abs().max(1.0) {
                r
            } else {
                v
            }
        };
        Point2::new(snap(x.x / self.grid_spacing), snap(x.y / self.grid_spacing))
    }

    /// Adds `delta_m` weight and `delta_weighted_value` (weight times TSDF)
    /// to the entry at `key`, creating it if needed.
    pub fn insert_or_merge(&mut self, key: GridKey, delta_m: f64, delta_weighted_value: f64) {
        assert!(delta_m > 0.0, "merge weight must be positive, got {delta_m}");
        let location = key.location(self.grid_spacing);
        let kp = key_point(&key);
        self.grow_to(&kp);
        descend_mut(&mut self.root, self.cell, &kp, self.max_leaf_size, &mut |table| {
            table
                .entry(key)
                .and_modify(|s| {
                    let m = s.m + delta_m;
                    s.zeta = (s.m * s.zeta + delta_weighted_value) / m;
                    s.m = m;
                })
                .or_insert(PseudoPointStats { key, location, zeta: delta_weighted_value / delta_m, m: delta_m });
        });
    }

    /// Stores `stats` verbatim, replacing any entry at the same key.
    pub fn insert_stats(&mut self, stats: PseudoPointStats) {
        assert!(stats.m > 0.0, "stored weight must be positive, got {}", stats.m);
        let location = stats.key.location(self.grid_spacing);
        let kp = key_point(&stats.key);
        self.grow_to(&kp);
        descend_mut(&mut self.root, self.cell, &kp, self.max_leaf_size, &mut |table| {
            table.insert(stats.key, PseudoPointStats { location, ..stats });
        });
    }

    fn grow_to(&mut self, p: &Point2) {
        if self.cell.contains(p) {
            return;
        }
        let mut cell = self.cell;
        while !cell.contains(p) {
            cell.half *= 2.0;
        }
        let old = std::mem::replace(&mut self.root, Node::Leaf(Table::new()));
        self.cell = cell;
        let mut entries = Vec::new();
        collect(&old, &mut entries);
        for s in entries {
            self.insert_stats(s);
        }
    }

    pub fn get(&self, key: &GridKey) -> Option<&PseudoPointStats> {
        let kp = key_point(key);
        if !self.cell.contains(&kp) {
            return None;
        }
        let (_, table) = descend(&self.root, self.cell, &kp);
        table.get(key)
    }

    /// Entries of the leaf containing `x`, plus, when `halo_radius` is given,
    /// entries of other leaves within that distance of `x`. Sorted by key.
    pub fn query_leaf(&self, x: &Point2, halo_radius: Option<f64>) -> Vec<PseudoPointStats> {
        let lx = self.to_lattice(x);
        if !self.cell.contains(&lx) {
            return Vec::new();
        }
        let (leaf_cell, table) = descend(&self.root, self.cell, &lx);
        let mut out: Vec<PseudoPointStats> = table.values().copied().collect();
        if let Some(r) = halo_radius {
            let mut extra = Vec::new();
            let probe = Probe { world: *x, lattice: lx, radius: r, grid_spacing: self.grid_spacing };
            halo(&self.root, self.cell, &probe, &leaf_cell, &mut extra);
            out.extend(extra);
            out.sort_by_key(|s| s.key);
        }
        out
    }

    /// Leaf cell containing `x`, if inside the root.
    pub fn leaf_cell(&self, x: &Point2) -> Option<Cell> {
        let lx = self.to_lattice(x);
        self.cell.contains(&lx).then(|| self.to_world(descend(&self.root, self.cell, &lx).0))
    }

    pub fn leaves(&self) -> Vec<(Cell, Vec<PseudoPointStats>)> {
        let mut out = Vec::new();
        visit_leaves(&self.root, self.cell, &mut |cell, table| {
            out.push((self.to_world(cell), table.values().copied().collect()));
        });
        out
    }

    pub fn leaf_count(&self) -> usize {
        let mut n = 0;
        visit_leaves(&self.root, self.cell, &mut |_, _| n += 1);
        n
    }

    pub fn len(&self) -> usize {
        let mut n = 0;
        visit_leaves(&self.root, self.cell, &mut |_, t| n += t.len());
        n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries sorted by key.
    pub fn records(&self) -> Vec<PseudoPointStats> {
        let mut out = Vec::new();
        collect(&self.root, &mut out);
        out.sort_by_key(|s| s.key);
        out
    }

    /// Box around the stored pseudo-point locations.
    pub fn data_bounds(&self) -> Option<Bounds> {
        Bounds::enclosing(self.records().into_iter().map(|s| s.location))
    }

    pub fn global_stats_sum(&self) -> StatsSum {
        let mut sum = StatsSum::default();
        visit_leaves(&self.root, self.cell, &mut |_, t| {
            for s in t.values() {
                sum.total_m += s.m;
                sum.total_weighted += s.m * s.zeta;
                sum.count += 1;
            }
        });
        sum
    }

    /// Checks leaf capacity, containment and key uniqueness.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = std::collections::BTreeSet::new();
        let mut err = None;
        visit_leaves(&self.root, self.cell, &mut |cell, table| {
            if err.is_some() {
                return;
            }
            if table.len() > self.max_leaf_size {
                let center = self.to_world(cell).center;
                err = Some(format!("leaf at {center:?} holds {} > {}", table.len(), self.max_leaf_size));
            }
            for s in table.values() {
                if !cell.contains(&key_point(&s.key)) {
                    err = Some(format!("{:?} lies outside its leaf", s.key));
                }
                if !seen.insert(s.key) {
                    err = Some(format!("{:?} stored twice", s.key));
                }
                if !(s.m > 0.0) {
                    err = Some(format!("{:?} has weight {}", s.key, s.m));
                }
            }
        });
        err.map_or(Ok(()), Err)
    }

    /// One `ix,iy,x,y,zeta,m` line per entry, key order, with header.
    pub fn write_records<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ix,iy,x,y,zeta,m")?;
        for s in self.records() {
            writeln!(w, "{},{},{:?},{:?},{:?},{:?}", s.key.ix, s.key.iy, s.location.x, s.location.y, s.zeta, s.m)?;
        }
        Ok(())
    }

    pub fn read_records<R: BufRead>(r: R, grid_spacing: f64, max_leaf_size: usize) -> Result<Self, RecordError> {
        let mut tree = QuadTree::new(grid_spacing, max_leaf_size);
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("ix")) {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(RecordError::Parse { line: lineno, msg: format!("expected 6 fields, got {}", f.len()) });
            }
            let bad = |msg: String| RecordError::Parse { line: lineno, msg };
            let ix: i64 = f[0].parse().map_err(|e| bad(format!("ix: {e}")))?;
            let iy: i64 = f[1].parse().map_err(|e| bad(format!("iy: {e}")))?;
            let zeta: f64 = f[4].parse().map_err(|e| bad(format!("zeta: {e}")))?;
            let m: f64 = f[5].parse().map_err(|e| bad(format!("m: {e}")))?;
            if !(m > 0.0) {
                return Err(bad(format!("weight must be positive, got {m}")));
            }
            let key = GridKey::new(ix, iy);
            tree.insert_stats(PseudoPointStats { key, location: key.location(grid_spacing), zeta, m });
        }
        Ok(tree)
    }
}

fn descend<'a>(node: &'a Node, cell: Cell, p: &Point2) -> (Cell, &'a Table) {
    match node {
        Node::Leaf(t) => (cell, t),
        Node::Split(children) => {
            let i = cell.child_index(p);
            descend(&children[i], cell.child(i), p)
        }
    }
}

/// Lattice-unit position of a key; exact.
fn key_point(key: &GridKey) -> Point2 {
    Point2::new(key.ix as f64, key.iy as f64)
}

fn descend_mut(node: &mut Node, cell: Cell, p: &Point2, max: usize, f: &mut dyn FnMut(&mut Table)) {
    match node {
        Node::Leaf(t) => {
            f(t);
            if t.len() > max && cell.half > MIN_SPLIT_HALF {
                let table = std::mem::take(t);
                *node = split(table, cell, max);
            }
        }
        Node::Split(children) => {
            let i = cell.child_index(p);
            descend_mut(&mut children[i], cell.child(i), p, max, f);
        }
    }
}

fn split(table: Table, cell: Cell, max: usize) -> Node {
    let mut parts: [Table; 4] = Default::default();
    for (k, s) in table {
        parts[cell.child_index(&key_point(&k))].insert(k, s);
    }
    let mut i = 0;
    let children = parts.map(|t| {
        let c = cell.child(i);
        i += 1;
        if t.len() > max && c.half > MIN_SPLIT_HALF {
            split(t, c, max)
        } else {
            Node::Leaf(t)
        }
    });
    Node::Split(Box::new(children))
}

fn visit_leaves(node: &Node, cell: Cell, f: &mut dyn FnMut(Cell, &Table)) {
    match node {
        Node::Leaf(t) => f(cell, t),
        Node::Split(children) => {
            for (i, c) in children.iter().enumerate() {
                visit_leaves(c, cell.child(i), f);
            }
        }
    }
}

fn collect(node: &Node, out: &mut Vec<PseudoPointStats>) {
    match node {
        Node::Leaf(t) => out.extend(t.values().copied()),
        Node::Split(children) => children.iter().for_each(|c| collect(c, out)),
    }
}

/// A halo query point in both unit systems.
struct Probe {
    world: Point2,
    lattice: Point2,
    radius: f64,
    grid_spacing: f64,
}

fn halo(node: &Node, cell: Cell, probe: &Probe, own: &Cell, out: &mut Vec<PseudoPointStats>) {
    if cell.distance_to(&probe.lattice) * probe.grid_spacing > probe.radius {
        return;
    }
    match node {
        Node::Leaf(t) => {
            if cell == *own {
                return;
            }
            out.extend(t.values().filter(|s| s.location.distance(&probe.world) <= probe.radius).copied());
        }
        Node::Split(children) => {
            for (i, c) in children.iter().enumerate() {
                halo(c, cell.child(i), probe, own, out);
            }
        }
    }
}
