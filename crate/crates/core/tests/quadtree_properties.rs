use std::collections::BTreeMap;

use gpmap::quadtree::{PseudoPointStats, QuadTree};
use gpmap::tsdf::GridKey;
use proptest::prelude::*;

const G: f64 = 0.1;

/// `(key, delta_m, zeta)` with dyadic weights so sums are exact in any order.
fn updates() -> impl Strategy<Value = Vec<(GridKey, f64, f64)>> {
    prop::collection::vec(
        ((-400i64..400, -400i64..400), 1u32..8, -0.5f64..0.5)
            .prop_map(|((ix, iy), q, z)| (GridKey::new(ix, iy), q as f64 * 0.25, z)),
        1..300,
    )
}

fn build(ups: &[(GridKey, f64, f64)], max: usize) -> QuadTree {
    let mut t = QuadTree::new(G, max);
    for &(k, dm, z) in ups {
        t.insert_or_merge(k, dm, dm * z);
    }
    t
}

fn leaf_keys(t: &QuadTree) -> Vec<Vec<GridKey>> {
    t.leaves().into_iter().map(|(_, ps)| ps.iter().map(|p| p.key).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shape_and_weights_do_not_depend_on_insertion_order(
        ups in updates(), max in 1usize..12, seed in any::<u64>()
    ) {
        let a = build(&ups, max);
        let mut shuffled = ups.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let b = build(&shuffled, max);
        prop_assert_eq!(leaf_keys(&a), leaf_keys(&b));
        for (ra, rb) in a.records().iter().zip(b.records()) {
            prop_assert_eq!(ra.m, rb.m);
            prop_assert!((ra.zeta - rb.zeta).abs() < 1e-12);
        }
    }

    #[test]
    fn leaves_respect_capacity_and_containment(ups in updates(), max in 1usize..12) {
        let t = build(&ups, max);
        t.check_invariants().map_err(TestCaseError::fail)?;
        for (cell, ps) in t.leaves() {
            prop_assert!(ps.len() <= max);
            for p in &ps {
                let slack = 1e-9 * cell.half.max(1.0);
                prop_assert!((p.location.x - cell.center.x).abs() <= cell.half + slack);
                prop_assert!((p.location.y - cell.center.y).abs() <= cell.half + slack);
            }
        }
    }

    // Weighted averaging against a plain map of running sums.
    #[test]
    fn merged_statistics_match_running_sums(ups in updates()) {
        let t = build(&ups, 8);
        let mut sums: BTreeMap<GridKey, (f64, f64)> = BTreeMap::new();
        for &(k, dm, z) in &ups {
            let e = sums.entry(k).or_default();
            e.0 += dm;
            e.1 += dm * z;
        }
        prop_assert_eq!(t.len(), sums.len());
        for (k, (m, w)) in &sums {
            let s = t.get(k).unwrap();
            prop_assert_eq!(s.m, *m);
            prop_assert!((s.zeta - w / m).abs() < 1e-12);
        }
        let total = t.global_stats_sum();
        prop_assert_eq!(total.total_m, ups.iter().map(|u| u.1).sum::<f64>());
        prop_assert_eq!(total.count, sums.len());
    }

    #[test]
    fn leaf_lookup_finds_every_key(ups in updates(), max in 1usize..12) {
        let t = build(&ups, max);
        for r in t.records() {
            let leaf = t.query_leaf(&r.location, None);
            prop_assert!(leaf.iter().any(|p| p.key == r.key));
        }
    }

    #[test]
    fn halo_only_adds_points(ups in updates(), max in 1usize..12, qx in -40.0f64..40.0, qy in -40.0f64..40.0) {
        let t = build(&ups, max);
        let q = gpmap::geometry::Point2::new(qx, qy);
        let plain = t.query_leaf(&q, None);
        let halo = t.query_leaf(&q, Some(0.3));
        for p in &plain {
            prop_assert!(halo.iter().any(|h| h.key == p.key));
        }
    }

    #[test]
    fn records_round_trip(ups in updates(), max in 1usize..12) {
        let t = build(&ups, max);
        let mut buf = Vec::new();
        t.write_records(&mut buf).unwrap();
        let back = QuadTree::read_records(buf.as_slice(), G, max).unwrap();
        prop_assert_eq!(back, t);
    }
}

#[test]
fn far_keys_grow_the_root() {
    let mut t = QuadTree::new(G, 4);
    let before = t.root_cell().half;
    t.insert_stats(PseudoPointStats {
        key: GridKey::new(1_000_000, -1_000_000),
        location: GridKey::new(1_000_000, -1_000_000).location(G),
        zeta: 0.1,
        m: 1.0,
    });
    assert!(t.root_cell().half > before);
    t.check_invariants().unwrap();
}
