//! Closed-form expansion of what each robot should hold.
//!
//! Robot `i` holds batch `(tau, j)` at the end of step `t` exactly when
//! `[W_{t-1} ... W_tau]_{ij} > 0` for the Metropolis weights of the graphs
//! used from `tau` on; the empty product is the identity. The expected
//! statistics at each key are then
//!
//! ```text
//! m(p)    = sum over held batches of m~(p) / n
//! zeta(p) = sum (m~ zeta~ / n) / m(p)
//! ```

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::network::{metropolis_weights, GraphSnapshot};
use crate::protocol::{BatchId, MiniBatch};
use crate::quadtree::QuadTree;
use crate::tsdf::GridKey;

/// Expected `(m, zeta)` per key for one robot.
pub type ExpectedStats = BTreeMap<GridKey, (f64, f64)>;

/// `reach[(i, j)]` is true when a batch released by `j` at `tau` has reached
/// `i` by the end of step `t`. `snapshots[s]` is the graph used at step `s`.
pub fn reachability(snapshots: &[GraphSnapshot], n: usize, tau: usize, t: usize) -> DMatrix<bool> {
    assert!(tau <= t, "release step {tau} after evaluation step {t}");
    assert!(t <= snapshots.len(), "need graphs up to step {}", t.saturating_sub(1));
    let mut product = DMatrix::<f64>::identity(n, n);
    for g in &snapshots[tau..t] {
        product = metropolis_weights(g).matrix() * product;
    }
    product.map(|w| w > 0.0)
}

/// Expected statistics for every robot at the end of step `t`, given every
/// batch released so far.
pub fn expected_states(
    batches: &BTreeMap<BatchId, MiniBatch>,
    snapshots: &[GraphSnapshot],
    n: usize,
    t: usize,
) -> Vec<ExpectedStats> {
    let inv_n = 1.0 / n as f64;
    let mut sums: Vec<BTreeMap<GridKey, (f64, f64)>> = vec![BTreeMap::new(); n];
    let mut reach_cache: BTreeMap<usize, DMatrix<bool>> = BTreeMap::new();
    for (id, batch) in batches.range(..=BatchId::new(t, usize::MAX)) {
        let reach = reach_cache.entry(id.t).or_insert_with(|| reachability(snapshots, n, id.t, t));
        for (i, acc) in sums.iter_mut().enumerate() {
            if !reach[(i, id.origin)] {
                continue;
            }
            for s in batch.samples() {
                let e = acc.entry(s.key).or_insert((0.0, 0.0));
                e.0 += s.count * inv_n;
                e.1 += s.count * inv_n * s.zeta;
            }
        }
    }
    sums.into_iter().map(|acc| acc.into_iter().map(|(k, (m, w))| (k, (m, w / m))).collect()).collect()
}

/// Largest deviation between a tree and its expectation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDeviation {
    /// Keys present on one side only.
    pub key_mismatches: usize,
    /// Keys whose `m` differs at all.
    pub m_mismatches: usize,
    pub max_m_error: f64,
    pub max_zeta_error: f64,
}

impl StateDeviation {
    pub fn within(&self, zeta_tol: f64) -> bool {
        self.key_mismatches == 0 && self.m_mismatches == 0 && self.max_zeta_error <= zeta_tol
    }
}

pub fn compare_tree(tree: &QuadTree, expected: &ExpectedStats) -> StateDeviation {
    let mut dev = StateDeviation::default();
    let records = tree.records();
    for r in &records {
        match expected.get(&r.key) {
            None => dev.key_mismatches += 1,
            Some(&(m, zeta)) => {
                if r.m != m {
                    dev.m_mismatches += 1;
                    dev.max_m_error = dev.max_m_error.max((r.m - m).abs());
                }
                dev.max_zeta_error = dev.max_zeta_error.max((r.zeta - zeta).abs());
            }
        }
    }
    dev.key_mismatches += expected.keys().filter(|k| tree.get(k).is_none()).count();
    dev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_product_is_identity() {
        let r = reachability(&[], 3, 0, 0);
        assert_eq!(r, DMatrix::from_fn(3, 3, |i, j| i == j));
    }

    #[test]
    fn path_reaches_one_hop_per_step() {
        let g: Vec<GraphSnapshot> = (0..3).map(|t| GraphSnapshot::new(3, t, [(0, 1), (1, 2)]).unwrap()).collect();
        let r1 = reachability(&g, 3, 0, 1);
        assert!(r1[(1, 0)] && !r1[(2, 0)]);
        let r2 = reachability(&g, 3, 0, 2);
        assert!(r2[(2, 0)]);
    }

    #[test]
    fn edge_order_matters() {
        // 0-1 then 1-2 carries 0 to 2; the reverse order does not.
        let fwd = [GraphSnapshot::new(3, 0, [(0, 1)]).unwrap(), GraphSnapshot::new(3, 1, [(1, 2)]).unwrap()];
        let rev = [GraphSnapshot::new(3, 0, [(1, 2)]).unwrap(), GraphSnapshot::new(3, 1, [(0, 1)]).unwrap()];
        assert!(reachability(&fwd, 3, 0, 2)[(2, 0)]);
        assert!(!reachability(&rev, 3, 0, 2)[(2, 0)]);
    }
}
