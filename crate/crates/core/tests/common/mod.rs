#![allow(dead_code)]

use gpmap::network::GraphSnapshot;
use gpmap::sim::{synth_world, RobotPath, SimConfig, SynthSpec, WorldKind};
use gpmap::tsdf::Scan;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn two_rooms_paths() -> Vec<RobotPath> {
    [
        vec![[-6.0, -2.0], [-2.0, -2.0], [-2.0, 2.0]],
        vec![[-6.0, 2.0], [-6.0, -2.0]],
        vec![[6.0, 2.0], [2.0, 2.0], [2.0, -2.0]],
        vec![[6.0, -2.0], [6.0, 2.0]],
    ]
    .into_iter()
    .map(|waypoints| RobotPath { waypoints })
    .collect()
}

/// Indoor profile on the two-rooms world; robots scan at steps
/// `0..scan_steps`.
pub fn two_rooms_config(n: usize, scan_steps: usize, steps: usize) -> SimConfig {
    let mut cfg = SimConfig::radish(n, steps);
    cfg.eval_every = 0;
    cfg.synth = Some(SynthSpec {
        world: WorldKind::TwoRooms,
        robots: two_rooms_paths().into_iter().cycle().take(n).collect(),
        scan_steps,
        beams: 180,
        max_range: 10.0,
        speed: 0.25,
        range_noise_std: 0.0,
    });
    cfg
}

/// Path `0-1-2-3` revealed one edge per step, far end first, so a batch
/// needs a full window per hop when it travels toward robot 3.
pub fn adversarial_graph(steps: usize) -> Vec<GraphSnapshot> {
    (0..steps)
        .map(|t| {
            let e = match t % 3 {
                0 => (2, 3),
                1 => (1, 2),
                _ => (0, 1),
            };
            GraphSnapshot::new(4, t, [e]).unwrap()
        })
        .collect()
}

pub fn complete_graphs(n: usize, steps: usize) -> Vec<GraphSnapshot> {
    (0..steps).map(|t| GraphSnapshot::complete(n, t)).collect()
}

pub fn empty_graphs(n: usize, steps: usize) -> Vec<GraphSnapshot> {
    (0..steps).map(|t| GraphSnapshot::empty(n, t)).collect()
}

pub struct RandomFixture {
    pub config: SimConfig,
    pub scans: Vec<Scan>,
    pub graphs: Vec<GraphSnapshot>,
}

/// Small random team in the square room: random paths, some skipped
/// scans, and Bernoulli edges at each step.
pub fn random_fixture(seed: u64) -> RandomFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let steps = rng.gen_range(3..=10);
    let robots = (0..n)
        .map(|_| RobotPath {
            waypoints: (0..3).map(|_| [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)]).collect(),
        })
        .collect();
    let spec = SynthSpec {
        world: WorldKind::SquareRoom,
        robots,
        scan_steps: steps,
        beams: rng.gen_range(24..=72),
        max_range: 8.0,
        speed: 0.4,
        range_noise_std: 0.01,
    };
    let scans: Vec<Scan> = synth_world(&spec, seed).unwrap().scans.into_iter().filter(|_| rng.gen_bool(0.8)).collect();
    let p = rng.gen_range(0.1..0.6);
    let graphs = (0..steps)
        .map(|t| {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(p) {
                        edges.push((i, j));
                    }
                }
            }
            GraphSnapshot::new(n, t, edges).unwrap()
        })
        .collect();
    let mut config = SimConfig::radish(n, steps);
    config.seed = seed;
    config.eval_every = 0;
    RandomFixture { config, scans, graphs }
}

/// `b * windows` snapshots where every window of `b` steps carries a random
/// spanning tree, spread over the window, plus Bernoulli extras.
pub fn b_connected_sequence(n: usize, b: usize, windows: usize, rng: &mut ChaCha8Rng) -> Vec<GraphSnapshot> {
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); b * windows];
    for w in 0..windows {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        for k in 1..n {
            let parent = order[rng.gen_range(0..k)];
            edges[w * b + rng.gen_range(0..b)].push((order[k], parent));
        }
        for s in 0..b {
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(0.1) {
                        edges[w * b + s].push((i, j));
                    }
                }
            }
        }
    }
    edges.into_iter().enumerate().map(|(t, e)| GraphSnapshot::new(n, t, e).unwrap()).collect()
}
