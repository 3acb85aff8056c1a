// Metropolis weights on changing graphs, and how fast their products
// approach uniform averaging.

use std::error::Error;

use gpmap::network::{check_b_connected, metropolis_weights, weight_product_convergence, GraphSnapshot};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = GraphSnapshot::new(3, 0, [(0, 1), (1, 2)])?;
    let w = metropolis_weights(&path);
    println!("weights on the path 0-1-2:\n{}", w.matrix());

    // Edges alternate, so no single step is connected but every pair is.
    let alternating: Vec<GraphSnapshot> = (0..40)
        .map(|t| GraphSnapshot::new(3, t, [if t % 2 == 0 { (0, 1) } else { (1, 2) }]))
        .collect::<Result<_, _>>()?;
    for b in [1, 2] {
        let r = check_b_connected(&alternating, b)?;
        println!(
            "B = {b}: {}",
            if r.is_connected() {
                "connected".to_string()
            } else {
                format!("window {} disconnected", r.first_violation.unwrap_or(0))
            }
        );
    }
    let dev = weight_product_convergence(&alternating);
    for k in [1, 5, 10, 20, 40] {
        println!("after {k:>2} products: max |[W...W] - 1/n| = {:.2e}", dev[k - 1]);
    }
    assert!(dev[39] < dev[0]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
