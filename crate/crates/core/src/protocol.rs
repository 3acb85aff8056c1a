//! Echo-free mini-batch diffusion.
//!
//! Every robot packs the pseudo-point samples it senses at step `t` into a
//! [`MiniBatch`] identified by `(t, robot)`. Batches are retained and
//! forwarded to neighbors that are not yet on the batch's recipient list, so
//! a batch never travels back to a robot known to hold it. Each robot
//! applies each batch to its quadtree exactly once, scaling counts by the
//! team size `n`:
//!
//! ```text
//! m(p)    += m~(p) / n
//! zeta(p)  = (m_old zeta_old + m~ zeta~ / n) / m(p)
//! ```
//!
//! Recipient lists travel with each copy and are unioned when two copies of
//! the same batch meet. A sender also adds the recipient to its own copy
//! once the send is committed, since channels are lossless.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::quadtree::QuadTree;
use crate::tsdf::{GridKey, PseudoSample};

pub type RobotId = usize;

/// Origin step and robot of a batch. Ordered by step, then robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BatchId {
    pub t: usize,
    pub origin: RobotId,
}

impl BatchId {
    pub const fn new(t: usize, origin: RobotId) -> Self {
        Self { t, origin }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchSample {
    pub key: GridKey,
    pub location: Point2,
    /// `m~`, observation count in the batch.
    pub count: f64,
    /// `zeta~`, averaged TSDF in the batch.
    pub zeta: f64,
}

impl From<&PseudoSample> for BatchSample {
    fn from(s: &PseudoSample) -> Self {
        Self { key: s.key, location: s.location, count: s.count, zeta: s.tsdf_value }
    }
}

/// One robot's observation at one step, plus the robots known to hold it.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    pub id: BatchId,
    samples: Arc<[BatchSample]>,
    pub recipients: BTreeSet<RobotId>,
}

impl MiniBatch {
    /// Fresh batch whose recipient list is just the origin. Samples are
    /// sorted by key; a repeated key keeps its first occurrence.
    pub fn new(id: BatchId, mut samples: Vec<BatchSample>) -> Self {
        samples.sort_by_key(|s| s.key);
        samples.dedup_by_key(|s| s.key);
        Self { id, samples: samples.into(), recipients: BTreeSet::from([id.origin]) }
    }

    pub fn from_pseudo_samples(id: BatchId, samples: &[PseudoSample]) -> Self {
        Self::new(id, samples.iter().map(BatchSample::from).collect())
    }

    pub fn samples(&self) -> &[BatchSample] {
        &self.samples
    }

    /// Sum of sample counts.
    pub fn mass(&self) -> f64 {
        self.samples.iter().map(|s| s.count).sum()
    }

    /// Same samples, every count multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let samples: Vec<BatchSample> =
            self.samples.iter().map(|s| BatchSample { count: s.count * factor, ..*s }).collect();
        Self { id: self.id, samples: samples.into(), recipients: self.recipients.clone() }
    }
}

/// Folds one batch into a tree with the `1/n` weighting.
pub fn apply_batch_to_tree(tree: &mut QuadTree, batch: &MiniBatch, n: usize) {
    let inv_n = 1.0 / n as f64;
    for s in batch.samples() {
        let dm = s.count * inv_n;
        tree.insert_or_merge(s.key, dm, dm * s.zeta);
    }
}

/// When a robot drops a retained batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Expiration {
    /// Once the recipient list names every robot.
    #[default]
    RecipientList,
    /// At step `(ceil(tau / B) + n - 1) * B` for a batch from step `tau`.
    Timer { window: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("timer expiration needs a connectivity window B")]
    ConfigMissing,
}

/// Step at which a batch released at `tau` may be dropped under timer
/// expiration.
pub fn expiry_horizon(tau: usize, n: usize, window: usize) -> usize {
    (tau.div_ceil(window) + n - 1) * window
}

/// Protocol state owned by one robot.
#[derive(Debug, Clone)]
pub struct RobotState {
    id: RobotId,
    n: usize,
    t: usize,
    retained: BTreeMap<BatchId, MiniBatch>,
    applied: BTreeSet<BatchId>,
    queued: BTreeSet<BatchId>,
    tree: QuadTree,
}

impl RobotState {
    pub fn new(id: RobotId, n: usize, tree: QuadTree) -> Self {
        assert!(id < n, "robot {id} outside team of {n}");
        Self { id, n, t: 0, retained: BTreeMap::new(), applied: BTreeSet::new(), queued: BTreeSet::new(), tree }
    }

    pub fn id(&self) -> RobotId {
        self.id
    }

    pub fn team_size(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> usize {
        self.t
    }

    pub fn tree(&self) -> &QuadTree {
        &self.tree
    }

    pub fn retained(&self) -> &BTreeMap<BatchId, MiniBatch> {
        &self.retained
    }

    pub fn applied(&self) -> &BTreeSet<BatchId> {
        &self.applied
    }

    pub fn queued(&self) -> &BTreeSet<BatchId> {
        &self.queued
    }

    /// Starts step `t`, retaining and queueing the robot's own batch if it
    /// sensed anything.
    pub fn sense(&mut self, t: usize, own: Option<MiniBatch>) {
        self.t = t;
        if let Some(b) = own {
            debug_assert_eq!(b.id.origin, self.id);
            self.queued.insert(b.id);
            self.retained.insert(b.id, b);
        }
    }

    /// Batches to send to neighbor `k`: every retained batch whose
    /// recipient list does not contain `k`.
    pub fn make_outgoing(&self, k: RobotId) -> Vec<MiniBatch> {
        debug_assert_ne!(k, self.id);
        self.retained.values().filter(|b| !b.recipients.contains(&k)).cloned().collect()
    }

    /// Commits a send: `k` now holds these batches.
    pub fn record_sent(&mut self, k: RobotId, ids: &[BatchId]) {
        for id in ids {
            if let Some(b) = self.retained.get_mut(id) {
                b.recipients.insert(k);
            }
        }
    }

    /// Accepts incoming copies. Already-applied batches are ignored; a batch
    /// arriving from several neighbors in one step is queued once with the
    /// union of their recipient lists.
    pub fn receive(&mut self, incoming: Vec<MiniBatch>) {
        for mut b in incoming {
            if self.applied.contains(&b.id) {
                continue;
            }
            if self.queued.contains(&b.id) {
                if let Some(existing) = self.retained.get_mut(&b.id) {
                    existing.recipients.extend(b.recipients);
                }
                continue;
            }
            b.recipients.insert(self.id);
            self.queued.insert(b.id);
            self.retained.insert(b.id, b);
        }
    }

    /// Applies queued batches in ascending id order. Returns the ids applied.
    pub fn apply_batches(&mut self) -> Vec<BatchId> {
        let ids: Vec<BatchId> = std::mem::take(&mut self.queued).into_iter().collect();
        for id in &ids {
            let batch = &self.retained[id];
            apply_batch_to_tree(&mut self.tree, batch, self.n);
            let fresh = self.applied.insert(*id);
            debug_assert!(fresh, "{id:?} applied twice");
        }
        ids
    }

    /// Drops retained batches whose recipient list is full.
    pub fn expire(&mut self) {
        let n = self.n;
        self.retained.retain(|_, b| b.recipients.len() < n);
    }

    /// Drops retained batches past their timer horizon. With a single robot
    /// nothing is kept once applied.
    pub fn timer_expire(&mut self, window: Option<usize>) -> Result<(), ProtocolError> {
        let window = window.filter(|&b| b > 0).ok_or(ProtocolError::ConfigMissing)?;
        let (n, t) = (self.n, self.t);
        let queued = &self.queued;
        self.retained.retain(|id, _| queued.contains(id) || (n > 1 && t < expiry_horizon(id.t, n, window)));
        Ok(())
    }

    pub fn expire_with(&mut self, mode: Expiration) -> Result<(), ProtocolError> {
        match mode {
            Expiration::RecipientList => {
                self.expire();
                Ok(())
            }
            Expiration::Timer { window } => self.timer_expire(Some(window)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree() -> QuadTree {
        QuadTree::new(0.1, 50)
    }

    fn batch(t: usize, origin: RobotId, samples: &[(i64, f64, f64)]) -> MiniBatch {
        MiniBatch::new(
            BatchId::new(t, origin),
            samples
                .iter()
                .map(|&(ix, count, zeta)| BatchSample {
                    key: GridKey::new(ix, 0),
                    location: GridKey::new(ix, 0).location(0.1),
                    count,
                    zeta,
                })
                .collect(),
        )
    }

    #[test]
    fn batch_ids_order_by_step_then_robot() {
        assert!(BatchId::new(1, 5) < BatchId::new(2, 0));
        assert!(BatchId::new(2, 0) < BatchId::new(2, 1));
    }

    #[test]
    fn full_list_is_not_sent() {
        let mut r = RobotState::new(0, 3, tree());
        let mut b = batch(0, 1, &[(0, 1.0, 0.1)]);
        b.recipients.extend([1, 2]);
        r.receive(vec![b]);
        assert!(r.make_outgoing(1).is_empty());
        assert!(r.make_outgoing(2).is_empty());
    }

    #[test]
    fn fresh_own_batch_goes_out() {
        let mut r = RobotState::new(0, 3, tree());
        r.sense(0, Some(batch(0, 0, &[(0, 1.0, 0.1)])));
        assert_eq!(r.make_outgoing(2).len(), 1);
    }

    #[test]
    fn sends_only_to_missing_neighbor() {
        let mut r = RobotState::new(0, 4, tree());
        let mut b = batch(0, 3, &[(0, 1.0, 0.1)]);
        b.recipients.insert(1);
        r.receive(vec![b]);
        assert!(r.make_outgoing(1).is_empty());
        assert_eq!(r.make_outgoing(2).len(), 1);
        r.record_sent(2, &[BatchId::new(0, 3)]);
        assert!(r.make_outgoing(2).is_empty());
    }

    #[test]
    fn duplicate_arrivals_apply_once() {
        let mut r = RobotState::new(0, 4, tree());
        let mut a = batch(1, 3, &[(0, 1.0, 0.2)]);
        a.recipients.insert(1);
        let mut b = batch(1, 3, &[(0, 1.0, 0.2)]);
        b.recipients.insert(2);
        r.receive(vec![a, b]);
        assert_eq!(r.apply_batches(), vec![BatchId::new(1, 3)]);
        assert_eq!(r.retained()[&BatchId::new(1, 3)].recipients, BTreeSet::from([0, 1, 2, 3]));
        assert_eq!(r.tree().get(&GridKey::new(0, 0)).unwrap().m, 0.25);
    }

    #[test]
    fn applied_batches_are_ignored_later() {
        let mut r = RobotState::new(0, 2, tree());
        r.receive(vec![batch(0, 1, &[(0, 1.0, 0.2)])]);
        r.apply_batches();
        let before = r.tree().clone();
        r.receive(vec![batch(0, 1, &[(0, 1.0, 0.2)])]);
        assert!(r.queued().is_empty());
        assert!(r.apply_batches().is_empty());
        assert_eq!(r.tree(), &before);
    }

    #[test]
    fn empty_incoming_keeps_own_queue() {
        let mut r = RobotState::new(1, 2, tree());
        r.sense(3, Some(batch(3, 1, &[(0, 1.0, 0.2)])));
        r.receive(vec![]);
        assert_eq!(r.queued().iter().copied().collect::<Vec<_>>(), vec![BatchId::new(3, 1)]);
    }

    #[test]
    fn single_robot_is_local_mapping() {
        let mut r = RobotState::new(0, 1, tree());
        r.sense(0, Some(batch(0, 0, &[(0, 1.0, 0.4)])));
        r.apply_batches();
        let s = r.tree().get(&GridKey::new(0, 0)).unwrap();
        assert_eq!((s.m, s.zeta), (1.0, 0.4));
    }

    #[test]
    fn two_batches_average() {
        let mut r = RobotState::new(0, 2, tree());
        r.sense(0, Some(batch(0, 0, &[(0, 1.0, 0.2)])));
        r.receive(vec![batch(0, 1, &[(0, 1.0, 0.6)])]);
        r.apply_batches();
        let s = r.tree().get(&GridKey::new(0, 0)).unwrap();
        assert_eq!(s.m, 1.0);
        assert!((s.zeta - 0.4).abs() < 1e-15);
    }

    #[test]
    fn scaling_keeps_zeta() {
        let mut r = RobotState::new(0, 4, tree());
        r.receive(vec![batch(0, 2, &[(0, 2.0, 1.0)])]);
        r.apply_batches();
        let s = r.tree().get(&GridKey::new(0, 0)).unwrap();
        assert_eq!((s.m, s.zeta), (0.5, 1.0));
    }

    #[test]
    fn list_expiration() {
        let mut r = RobotState::new(0, 3, tree());
        let mut full = batch(0, 1, &[(0, 1.0, 0.1)]);
        full.recipients.insert(2);
        let partial = batch(0, 2, &[(1, 1.0, 0.1)]);
        r.receive(vec![full, partial]);
        r.apply_batches();
        r.expire();
        assert_eq!(r.retained().keys().copied().collect::<Vec<_>>(), vec![BatchId::new(0, 2)]);
        assert!(r.applied().contains(&BatchId::new(0, 1)));
        let mut empty = RobotState::new(0, 3, tree());
        empty.expire();
        assert!(empty.retained().is_empty());
    }

    #[test]
    fn timer_horizons() {
        assert_eq!(expiry_horizon(0, 3, 1), 2);
        assert_eq!(expiry_horizon(3, 2, 2), 6);
        let mut r = RobotState::new(0, 3, tree());
        r.sense(0, Some(batch(0, 0, &[(0, 1.0, 0.1)])));
        r.apply_batches();
        r.timer_expire(Some(1)).unwrap();
        assert_eq!(r.retained().len(), 1);
        r.sense(1, None);
        r.timer_expire(Some(1)).unwrap();
        assert_eq!(r.retained().len(), 1);
        r.sense(2, None);
        r.timer_expire(Some(1)).unwrap();
        assert!(r.retained().is_empty());
    }

    #[test]
    fn timer_single_robot_drops_immediately() {
        let mut r = RobotState::new(0, 1, tree());
        r.sense(5, Some(batch(5, 0, &[(0, 1.0, 0.1)])));
        r.apply_batches();
        r.timer_expire(Some(3)).unwrap();
        assert!(r.retained().is_empty());
    }

    #[test]
    fn timer_needs_window() {
        let mut r = RobotState::new(0, 2, tree());
        assert_eq!(r.timer_expire(None), Err(ProtocolError::ConfigMissing));
    }
}
