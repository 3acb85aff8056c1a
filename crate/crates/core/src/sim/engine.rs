use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::raster::{compute_rmse, predict_points, MapRaster, Rmse};
use super::{synth_world, SimConfig, SimError};
use crate::central::CentralState;
use crate::geometry::Point2;
use crate::gp::GpPosterior;
use crate::network::{proximity_graph, GraphSnapshot};
use crate::oracle::{compare_tree, expected_states, StateDeviation};
use crate::protocol::{BatchId, MiniBatch, RobotId, RobotState};
use crate::quadtree::QuadTree;
use crate::tsdf::{compute_pseudo_points, Scan};

/// One line of the batch trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    Send { t: usize, from: RobotId, to: RobotId, id: BatchId, samples: usize },
    Apply { t: usize, robot: RobotId, id: BatchId },
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Send { t, from, to, id, samples } => {
                write!(f, "SEND {t} {from} {to} {} {} {samples}", id.t, id.origin)
            }
            TraceEvent::Apply { t, robot, id } => write!(f, "APPLY {t} {robot} {} {}", id.t, id.origin),
        }
    }
}

/// Each robot applies each batch at most once.
pub fn audit_exactly_once(trace: &[TraceEvent]) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for e in trace {
        if let TraceEvent::Apply { t, robot, id } = e {
            if !seen.insert((*robot, *id)) {
                return Err(format!("robot {robot} applied {id:?} again at step {t}"));
            }
        }
    }
    Ok(())
}

/// No batch goes to its origin, none is sent twice along one directed link,
/// and none goes back to a robot it was received from. Two robots may still
/// swap copies within one step, since neither can know of the other's yet.
pub fn audit_no_echo(trace: &[TraceEvent]) -> Result<(), String> {
    let mut sent: BTreeMap<(BatchId, RobotId, RobotId), usize> = BTreeMap::new();
    for e in trace {
        if let TraceEvent::Send { t, from, to, id, .. } = *e {
            if to == id.origin {
                return Err(format!("step {t}: {from} sent {id:?} back to its origin"));
            }
            if let Some(&s) = sent.get(&(id, to, from)) {
                if s < t {
                    return Err(format!("step {t}: {from} echoed {id:?} to {to}, which sent it at step {s}"));
                }
            }
            if sent.insert((id, from, to), t).is_some() {
                return Err(format!("step {t}: {from} sent {id:?} to {to} twice"));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub t: usize,
    pub graph: GraphSnapshot,
    pub sends: usize,
    pub applied: usize,
}

/// Per-robot metrics after the exchange of step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub t: usize,
    pub robot: RobotId,
    /// Against the central map.
    pub rmse: Rmse,
    pub pseudo_points: usize,
    pub leaves: usize,
    pub retained_batches: usize,
}

impl MetricsRecord {
    pub const CSV_HEADER: &'static str = "t,robot,rmse,pseudo_points,leaves,retained_batches";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:?},{},{},{}",
            self.t,
            self.robot,
            self.rmse.as_f64(),
            self.pseudo_points,
            self.leaves,
            self.retained_batches
        )
    }
}

#[derive(Debug, Clone)]
enum GraphSource {
    Proximity,
    Scripted(Vec<GraphSnapshot>),
}

/// A team of robots, the central reference and the network between them.
///
/// Each call to [`step`](Self::step) runs one step:
///
/// 1. batches sent during the previous step are delivered;
/// 2. each robot senses, packing its scan into a fresh batch;
/// 3. queued batches are applied in id order, then expired;
/// 4. the step's graph is formed and every robot's outgoing batches are
///    computed before any send is committed;
/// 5. the central agent ingests the step's fresh batches.
///
/// A batch released at `t` therefore reaches a neighbor's map at `t + 1`.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    robots: Vec<RobotState>,
    central: CentralState,
    scans: Vec<BTreeMap<usize, Scan>>,
    graphs: GraphSource,
    positions: Vec<Option<Point2>>,
    inbox: Vec<Vec<MiniBatch>>,
    released: BTreeMap<BatchId, MiniBatch>,
    snapshots: Vec<GraphSnapshot>,
    trace: Vec<TraceEvent>,
    next_t: usize,
    drop_forward: bool,
}

impl Simulation {
    pub fn new(config: SimConfig, scans: Vec<Scan>) -> Result<Self, SimError> {
        config.validate()?;
        let n = config.n;
        let mut per_robot: Vec<BTreeMap<usize, Scan>> = vec![BTreeMap::new(); n];
        for s in scans {
            if s.robot_id >= n {
                return Err(SimError::Ingestion(format!("scan for robot {} but the team has {n}", s.robot_id)));
            }
            let (r, t) = (s.robot_id, s.t);
            if per_robot[r].insert(t, s).is_some() {
                return Err(SimError::Ingestion(format!("robot {r} has two scans at step {t}")));
            }
        }
        let tree = QuadTree::new(config.tsdf.grid_spacing, config.max_leaf_size);
        Ok(Self {
            robots: (0..n).map(|i| RobotState::new(i, n, tree.clone())).collect(),
            central: CentralState::new(n, tree),
            scans: per_robot,
            graphs: GraphSource::Proximity,
            positions: vec![None; n],
            inbox: vec![Vec::new(); n],
            released: BTreeMap::new(),
            snapshots: Vec::new(),
            trace: Vec::new(),
            next_t: 0,
            drop_forward: false,
            config,
        })
    }

    /// Runs on the config's built-in synthetic scenario.
    pub fn from_synth(config: SimConfig) -> Result<Self, SimError> {
        let spec = config.synth.clone().ok_or_else(|| SimError::Config("config has no synth scenario".into()))?;
        if spec.robots.len() != config.n {
            return Err(SimError::Config(format!("synth has {} robot paths for n = {}", spec.robots.len(), config.n)));
        }
        let out = synth_world(&spec, config.seed)?;
        Self::new(config, out.scans)
    }

    /// Uses the given graphs instead of proximity; steps past the end of
    /// the script have no edges.
    pub fn with_graph_script(mut self, snapshots: Vec<GraphSnapshot>) -> Result<Self, SimError> {
        if let Some(g) = snapshots.iter().find(|g| g.n() != self.config.n) {
            return Err(SimError::Config(format!("graph for {} robots, team has {}", g.n(), self.config.n)));
        }
        self.graphs = GraphSource::Scripted(snapshots);
        Ok(self)
    }

    /// Silently loses the first forwarded batch. Test hook for the oracle.
    #[doc(hidden)]
    pub fn with_dropped_forward(mut self) -> Self {
        self.drop_forward = true;
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn robots(&self) -> &[RobotState] {
        &self.robots
    }

    pub fn central(&self) -> &CentralState {
        &self.central
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Every batch released so far.
    pub fn released(&self) -> &BTreeMap<BatchId, MiniBatch> {
        &self.released
    }

    /// Graph used at each completed step.
    pub fn snapshots(&self) -> &[GraphSnapshot] {
        &self.snapshots
    }

    /// Steps completed so far.
    pub fn steps_done(&self) -> usize {
        self.next_t
    }

    /// Every `(robot, batch)` application so far.
    pub fn applications(&self) -> BTreeSet<(RobotId, BatchId)> {
        self.trace
            .iter()
            .filter_map(|e| match *e {
                TraceEvent::Apply { robot, id, .. } => Some((robot, id)),
                TraceEvent::Send { .. } => None,
            })
            .collect()
    }

    fn graph_at(&self, t: usize) -> GraphSnapshot {
        let n = self.config.n;
        match &self.graphs {
            GraphSource::Scripted(g) => g.get(t).map_or_else(|| GraphSnapshot::empty(n, t), |g| g.at_step(t)),
            GraphSource::Proximity => {
                let known: Vec<(usize, Point2)> =
                    self.positions.iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, p))).collect();
                let pts: Vec<Point2> = known.iter().map(|&(_, p)| p).collect();
                let local = proximity_graph(&pts, self.config.comm_range, t);
                GraphSnapshot::new(n, t, local.edges().iter().map(|&(a, b)| (known[a].0, known[b].0)))
                    .expect("remapped proximity edges are valid")
            }
        }
    }

    pub fn step(&mut self) -> Result<StepReport, SimError> {
        let t = self.next_t;
        let n = self.config.n;
        let mode = self.config.expiration_mode();

        for (robot, inbox) in self.robots.iter_mut().zip(&mut self.inbox) {
            robot.receive(std::mem::take(inbox));
        }

        let mut fresh = Vec::new();
        for i in 0..n {
            let own = self.scans[i].get(&t).and_then(|scan| {
                self.positions[i] = Some(scan.pose.position());
                let samples = compute_pseudo_points(scan, &self.config.tsdf);
                (!samples.is_empty()).then(|| MiniBatch::from_pseudo_samples(BatchId::new(t, i), &samples))
            });
            if let Some(b) = &own {
                fresh.push(b.clone());
                self.released.insert(b.id, b.clone());
            }
            self.robots[i].sense(t, own);
        }

        let mut applied = 0;
        for robot in &mut self.robots {
            for id in robot.apply_batches() {
                self.trace.push(TraceEvent::Apply { t, robot: robot.id(), id });
                applied += 1;
            }
            robot.expire_with(mode)?;
        }

        let graph = self.graph_at(t);
        let mut messages = Vec::new();
        for i in 0..n {
            for &k in graph.neighbors(i) {
                let batches = self.robots[i].make_outgoing(k);
                if !batches.is_empty() {
                    messages.push((i, k, batches));
                }
            }
        }
        let mut sends = 0;
        for (i, k, mut batches) in messages {
            let ids: Vec<BatchId> = batches.iter().map(|b| b.id).collect();
            self.robots[i].record_sent(k, &ids);
            for b in &batches {
                self.trace.push(TraceEvent::Send { t, from: i, to: k, id: b.id, samples: b.samples().len() });
            }
            sends += batches.len();
            if self.drop_forward {
                if let Some(pos) = batches.iter().position(|b| b.id.origin != i) {
                    batches.remove(pos);
                    self.drop_forward = false;
                }
            }
            self.inbox[k].extend(batches);
        }

        self.central.ingest(t, &fresh);
        self.snapshots.push(graph.clone());
        self.next_t += 1;
        Ok(StepReport { t, graph, sends, applied })
    }

    /// Runs until `steps` steps are done.
    pub fn run_until(&mut self, steps: usize) -> Result<(), SimError> {
        while self.next_t < steps {
            self.step()?;
        }
        Ok(())
    }

    /// Runs the configured number of steps, evaluating metrics every
    /// `eval_every` steps and after the last one.
    pub fn run(&mut self) -> Result<Vec<MetricsRecord>, SimError> {
        let mut metrics = Vec::new();
        let every = self.config.eval_every;
        while self.next_t < self.config.steps {
            let t = self.step()?.t;
            let last = self.next_t == self.config.steps;
            if last || (every > 0 && t % every == 0) {
                metrics.extend(self.evaluate()?);
            }
        }
        Ok(metrics)
    }

    /// Query grid over the central map's data at the eval resolution.
    pub fn eval_points(&self) -> Vec<Point2> {
        self.central.tree().data_bounds().map_or_else(Vec::new, |b| b.grid(self.config.eval_resolution()))
    }

    fn predict(&self, tree: &QuadTree, points: &[Point2]) -> Result<GpPosterior, SimError> {
        Ok(predict_points(tree, &self.config.prior(), self.config.halo_radius(), points)?)
    }

    pub fn robot_map(&self, i: RobotId) -> Result<MapRaster, SimError> {
        let points = self.eval_points();
        let posterior = self.predict(self.robots[i].tree(), &points)?;
        Ok(MapRaster { points, posterior })
    }

    pub fn central_map(&self) -> Result<MapRaster, SimError> {
        let points = self.eval_points();
        let posterior = self.predict(self.central.tree(), &points)?;
        Ok(MapRaster { points, posterior })
    }

    /// Metrics for every robot at the last completed step.
    pub fn evaluate(&self) -> Result<Vec<MetricsRecord>, SimError> {
        let t = self.next_t.saturating_sub(1);
        let points = self.eval_points();
        let reference = self.predict(self.central.tree(), &points)?;
        let h = self.config.tsdf.truncation;
        self.robots
            .iter()
            .map(|r| {
                let pred = self.predict(r.tree(), &points)?;
                Ok(MetricsRecord {
                    t,
                    robot: r.id(),
                    rmse: compute_rmse(&pred.mean, &reference.mean, h),
                    pseudo_points: r.tree().len(),
                    leaves: r.tree().leaf_count(),
                    retained_batches: r.retained().len(),
                })
            })
            .collect()
    }

    /// Each robot's distance from the closed-form expectation at the last
    /// completed step.
    pub fn oracle_deviations(&self) -> Vec<StateDeviation> {
        let Some(t) = self.next_t.checked_sub(1) else {
            return vec![StateDeviation::default(); self.config.n];
        };
        let expected = expected_states(&self.released, &self.snapshots, self.config.n, t);
        self.robots.iter().zip(&expected).map(|(r, e)| compare_tree(r.tree(), e)).collect()
    }
}
