// Drives three robots by hand through the batch exchange: sense, apply,
// expire, then send to current neighbors, with delivery one step later.

use std::error::Error;

use gpmap::protocol::{BatchId, BatchSample, MiniBatch, RobotState};
use gpmap::quadtree::QuadTree;
use gpmap::tsdf::GridKey;

fn observation(t: usize, robot: usize) -> MiniBatch {
    let key = GridKey::new(robot as i64, 0);
    let sample = BatchSample { key, location: key.location(0.1), count: 1.0, zeta: 0.1 * robot as f64 };
    MiniBatch::new(BatchId::new(t, robot), vec![sample])
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let n = 3;
    let mut robots: Vec<RobotState> = (0..n).map(|i| RobotState::new(i, n, QuadTree::new(0.1, 50))).collect();
    let mut inbox: Vec<Vec<MiniBatch>> = vec![Vec::new(); n];
    // Only 0-1 and 1-2 ever talk.
    let neighbors = [vec![1], vec![0, 2], vec![1]];

    for t in 0..4 {
        for (r, msgs) in robots.iter_mut().zip(&mut inbox) {
            r.receive(std::mem::take(msgs));
        }
        for (i, r) in robots.iter_mut().enumerate() {
            r.sense(t, (t == 0).then(|| observation(t, i)));
            r.apply_batches();
            r.expire();
        }
        let mut sends = Vec::new();
        for i in 0..n {
            for &k in &neighbors[i] {
                let out = robots[i].make_outgoing(k);
                if !out.is_empty() {
                    sends.push((i, k, out));
                }
            }
        }
        for (i, k, out) in sends {
            let ids: Vec<BatchId> = out.iter().map(|b| b.id).collect();
            robots[i].record_sent(k, &ids);
            inbox[k].extend(out);
        }
        let held: Vec<usize> = robots.iter().map(|r| r.applied().len()).collect();
        let kept: Vec<usize> = robots.iter().map(|r| r.retained().len()).collect();
        println!("t={t}: applied {held:?}, still forwarding {kept:?}");
    }
    // The ends never learn that 1 forwarded their batch on, so their lists
    // stay short; timer expiry is what bounds that memory.
    for r in robots.iter_mut() {
        r.timer_expire(Some(1))?;
    }
    println!("after timer expiry: {:?}", robots.iter().map(|r| r.retained().len()).collect::<Vec<_>>());
    for r in &robots {
        assert!(r.retained().is_empty());
        assert_eq!(r.applied().len(), n);
        assert!((r.tree().global_stats_sum().total_m - 1.0).abs() < 1e-12);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
