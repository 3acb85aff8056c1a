//! Time-varying communication graphs.
//!
//! Snapshots come either from robot proximity or from a scripted
//! `EDGE <t> <i> <j>` log. Metropolis weight matrices are built per snapshot
//! for convergence diagnostics; the mapping protocol itself only looks at
//! which edges exist.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use petgraph::unionfind::UnionFind;
use thiserror::Error;

use crate::geometry::Point2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("self edge ({0}, {0}) at t={1}")]
    SelfEdge(usize, usize),
    #[error("edge ({0}, {1}) names a robot outside 0..{2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("window length must be at least 1")]
    InvalidWindow,
    #[error("{have} snapshots do not fill one window of {window}")]
    InsufficientSnapshots { have: usize, window: usize },
    #[error("graph log line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Undirected graph over robots `0..n` at one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSnapshot {
    n: usize,
    t: usize,
    edges: BTreeSet<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl GraphSnapshot {
    /// Edges are normalized to `(min, max)`; duplicates collapse.
    pub fn new<I: IntoIterator<Item = (usize, usize)>>(n: usize, t: usize, edges: I) -> Result<Self, NetworkError> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(NetworkError::NodeOutOfRange(i, j, n));
            }
            if i == j {
                return Err(NetworkError::SelfEdge(i, t));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &set {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(Self { n, t, edges: set, neighbors })
    }

    pub fn empty(n: usize, t: usize) -> Self {
        Self::new(n, t, []).expect("empty edge set is valid")
    }

    pub fn complete(n: usize, t: usize) -> Self {
        let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)));
        Self::new(n, t, edges).expect("complete graph is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Copy stamped with a different step.
    pub fn at_step(&self, t: usize) -> Self {
        Self { t, ..self.clone() }
    }
}

/// Edge between every pair within `range` meters (inclusive).
pub fn proximity_graph(positions: &[Point2], range: f64, t: usize) -> GraphSnapshot {
    let n = positions.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if positions[i].distance(&positions[j]) <= range {
                edges.push((i, j));
            }
        }
    }
    GraphSnapshot::new(n, t, edges).expect("proximity edges are in range")
}

/// Metropolis weight matrix of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Symmetric, nonnegative, rows and columns summing to one, positive
    /// diagonal.
    pub fn check(&self, tol: f64) -> Result<(), String> {
        let w = &self.0;
        let n = w.nrows();
        for i in 0..n {
            if !(w[(i, i)] > 0.0) {
                return Err(format!("diagonal entry {i} is {}", w[(i, i)]));
            }
            let row: f64 = w.row(i).sum();
            let col: f64 = w.column(i).sum();
            if (row - 1.0).abs() > tol || (col - 1.0).abs() > tol {
                return Err(format!("row/column {i} sums to {row}/{col}"));
            }
            for j in 0..n {
                if w[(i, j)] < 0.0 {
                    return Err(format!("negative entry ({i}, {j})"));
                }
                if (w[(i, j)] - w[(j, i)]).abs() > tol {
                    return Err(format!("asymmetric at ({i}, {j})"));
                }
            }
        }
        Ok(())
    }
}

pub fn metropolis_weights(g: &GraphSnapshot) -> WeightMatrix {
    let n = g.n();
    let mut w = DMatrix::zeros(n, n);
    for &(i, j) in g.edges() {
        let v = 1.0 / (1.0 + g.degree(i).max(g.degree(j)) as f64);
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    for i in 0..n {
        let off: f64 = g.neighbors(i).iter().map(|&j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    WeightMatrix(w)
}

/// Result of checking uniform connectivity over consecutive windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityReport {
    pub window: usize,
    pub windows_checked: usize,
    /// Index `k` of the first window `[kB, (k+1)B - 1]` whose union graph is
    /// disconnected.
    pub first_violation: Option<usize>,
    /// Trailing snapshots that did not fill a window and were ignored.
    pub partial_window_skipped: bool,
}

impl ConnectivityReport {
    pub fn is_connected(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Whether all `n` nodes are joined by the given edges. A single node is
/// connected.
pub fn is_connected<'a, I: IntoIterator<Item = &'a (usize, usize)>>(n: usize, edges: I) -> bool {
    if n <= 1 {
        return true;
    }
    let mut uf = UnionFind::<usize>::new(n);
    let mut components = n;
    for &(i, j) in edges {
        if uf.union(i, j) {
            components -= 1;
        }
    }
    components == 1
}

pub fn check_b_connected(snapshots: &[GraphSnapshot], window: usize) -> Result<ConnectivityReport, NetworkError> {
    if window == 0 {
        return Err(NetworkError::InvalidWindow);
    }
    if snapshots.len() < window {
        return Err(NetworkError::InsufficientSnapshots { have: snapshots.len(), window });
    }
    let n = snapshots[0].n();
    let full = snapshots.len() / window;
    let mut report = ConnectivityReport {
        window,
        windows_checked: 0,
        first_violation: None,
        partial_window_skipped: !snapshots.len().is_multiple_of(window),
    };
    for k in 0..full {
        let union: BTreeSet<(usize, usize)> =
            snapshots[k * window..(k + 1) * window].iter().flat_map(|g| g.edges().iter().copied()).collect();
        report.windows_checked += 1;
        if !is_connected(n, &union) {
            report.first_violation = Some(k);
            break;
        }
    }
    Ok(report)
}

/// Max-norm distance of the running products `W_t ... W_0` from the uniform
/// averaging matrix, one entry per snapshot.
pub fn weight_product_convergence(snapshots: &[GraphSnapshot]) -> Vec<f64> {
    let Some(first) = snapshots.first() else { return Vec::new() };
    let n = first.n();
    let uniform = 1.0 / n as f64;
    let mut prod = DMatrix::<f64>::identity(n, n);
    snapshots
        .iter()
        .map(|g| {
            prod = metropolis_weights(g).matrix() * &prod;
            prod.iter().map(|v| (v - uniform).abs()).fold(0.0, f64::max)
        })
        .collect()
}

/// Parses `EDGE <t> <i> <j>` lines into one snapshot per step.
///
/// Blank lines and `#` comments are ignored. The sequence covers
/// `steps` snapshots when given, otherwise up to the last step mentioned.
pub fn read_graph_log<R: BufRead>(r: R, n: usize, steps: Option<usize>) -> Result<Vec<GraphSnapshot>, NetworkError> {
    let mut by_step: Vec<Vec<(usize, usize)>> = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| NetworkError::Parse { line: lineno, msg: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f[0] != "EDGE" || f.len() != 4 {
            return Err(NetworkError::Parse {
                line: lineno,
                msg: format!("expected `EDGE <t> <i> <j>`, got `{line}`"),
            });
        }
        let num = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|e| NetworkError::Parse { line: lineno, msg: format!("{what}: {e}") })
        };
        let (t, i, j) = (num(f[1], "t")?, num(f[2], "i")?, num(f[3], "j")?);
        if i >= n || j >= n {
            return Err(NetworkError::Parse { line: lineno, msg: format!("robot id out of range 0..{n}") });
        }
        if i == j {
            return Err(NetworkError::Parse { line: lineno, msg: "self edge".into() });
        }
        if by_step.len() <= t {
            by_step.resize(t + 1, Vec::new());
        }
        by_step[t].push((i, j));
    }
    let len = steps.unwrap_or(by_step.len());
    by_step.resize(len.max(by_step.len()), Vec::new());
    by_step.truncate(len);
    by_step.into_iter().enumerate().map(|(t, e)| GraphSnapshot::new(n, t, e)).collect()
}

pub fn write_graph_log<W: Write>(mut w: W, snapshots: &[GraphSnapshot]) -> std::io::Result<()> {
    for g in snapshots {
        for (i, j) in g.edges() {
            writeln!(w, "EDGE {} {} {}", g.t(), i, j)?;
        }
    }
    Ok(())
}
