//! Reference agent that sees every robot's batch the moment it is sensed.

use crate::protocol::{apply_batch_to_tree, MiniBatch};
use crate::quadtree::QuadTree;

#[derive(Debug, Clone)]
pub struct CentralState {
    tree: QuadTree,
    n: usize,
    t: usize,
}

impl CentralState {
    pub fn new(n: usize, tree: QuadTree) -> Self {
        assert!(n >= 1, "team must have at least one robot");
        Self { tree, n, t: 0 }
    }

    pub fn tree(&self) -> &QuadTree {
        &self.tree
    }

    pub fn step(&self) -> usize {
        self.t
    }

    /// Applies all batches released at step `t`, in ascending id order, with
    /// the same `1/n` weighting the robots use.
    pub fn ingest(&mut self, t: usize, batches: &[MiniBatch]) {
        self.t = t;
        let mut order: Vec<&MiniBatch> = batches.iter().collect();
        order.sort_by_key(|b| b.id);
        for b in order {
            apply_batch_to_tree(&mut self.tree, b, self.n);
        }
    }
}
