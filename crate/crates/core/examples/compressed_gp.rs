// Fits the same data three ways: every raw observation, the pseudo-input
// derivation, and the compressed per-pseudo-point statistics.

use std::error::Error;

use gpmap::geometry::Point2;
use gpmap::gp::{compressed_gp_posterior, exact_gp_posterior, spgp_posterior_reference, GpPrior, KernelParams};
use gpmap::quadtree::PseudoPointStats;
use gpmap::tsdf::GridKey;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let g = 0.1;
    let prior = GpPrior::new(0.5, KernelParams::new(1.0, 0.1, 0.1));
    // Three lattice points, each observed a few times.
    let raw: Vec<(GridKey, Vec<f64>)> = vec![
        (GridKey::new(0, 0), vec![0.02, -0.01, 0.0]),
        (GridKey::new(1, 0), vec![0.11, 0.09]),
        (GridKey::new(0, 1), vec![-0.08]),
    ];
    let train: Vec<(Point2, f64)> =
        raw.iter().flat_map(|(k, ys)| ys.iter().map(move |y| (k.location(g), *y))).collect();
    let locs: Vec<Point2> = raw.iter().map(|(k, _)| k.location(g)).collect();
    let stats: Vec<PseudoPointStats> = raw
        .iter()
        .map(|(k, ys)| PseudoPointStats {
            key: *k,
            location: k.location(g),
            zeta: ys.iter().sum::<f64>() / ys.len() as f64,
            m: ys.len() as f64,
        })
        .collect();

    let query = [Point2::new(0.05, 0.05), Point2::new(0.3, -0.2)];
    let exact = exact_gp_posterior(&train, &query, &prior)?;
    let spgp = spgp_posterior_reference(&train, &locs, &query, &prior)?;
    let compressed = compressed_gp_posterior(&stats, &query, &prior)?;

    println!("query           exact              pseudo-input       compressed");
    for (i, q) in query.iter().enumerate() {
        println!(
            "({:.2}, {:.2})  {:+.6} / {:.6}  {:+.6} / {:.6}  {:+.6} / {:.6}",
            q.x,
            q.y,
            exact.mean[i],
            exact.variance[i],
            spgp.mean[i],
            spgp.variance[i],
            compressed.mean[i],
            compressed.variance[i]
        );
        assert!((exact.mean[i] - compressed.mean[i]).abs() < 1e-9);
        assert!((exact.variance[i] - compressed.variance[i]).abs() < 1e-9);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
