// Accumulates weighted TSDF evidence in the spatial index and queries it.

use std::error::Error;

use gpmap::geometry::Point2;
use gpmap::quadtree::QuadTree;
use gpmap::tsdf::GridKey;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut tree = QuadTree::new(0.1, 4);
    for ix in -6..6 {
        for iy in -2..2 {
            let zeta = 0.05 * iy as f64;
            tree.insert_or_merge(GridKey::new(ix, iy), 1.0, zeta);
        }
    }
    // A second observation of one key is folded into its weighted average.
    tree.insert_or_merge(GridKey::new(0, 0), 3.0, 3.0 * 0.2);
    let s = tree.get(&GridKey::new(0, 0)).ok_or("key missing")?;
    println!("key (0, 0): m = {}, zeta = {:.3}", s.m, s.zeta);

    tree.check_invariants()?;
    println!("{} pseudo-points in {} leaves", tree.len(), tree.leaf_count());
    let q = Point2::new(0.23, -0.04);
    let own = tree.query_leaf(&q, None);
    let halo = tree.query_leaf(&q, Some(0.3));
    println!("query ({}, {}): {} in its leaf, {} with a 0.3 m halo", q.x, q.y, own.len(), halo.len());

    let mut records = Vec::new();
    tree.write_records(&mut records)?;
    let back = QuadTree::read_records(records.as_slice(), 0.1, 4)?;
    assert_eq!(back, tree);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
