mod common;

use gpmap::geometry::{Bounds, Point2};
use gpmap::gp::{GpPrior, KernelParams};
use gpmap::quadtree::QuadTree;
use gpmap::sim::{
    compute_rmse, rasterize_map, read_scan_log, split_stream, synth_world, write_map_csv, write_map_pgm,
    write_scan_log, LogFormat, MetricsRecord, Rmse, ScanLogError, SimConfig, SimError, Simulation, World, WorldKind,
};
use gpmap::tsdf::{GridKey, Scan};
use proptest::prelude::*;

fn small_team() -> SimConfig {
    let mut cfg = common::two_rooms_config(2, 6, 8);
    cfg.eval_every = 2;
    cfg
}

#[test]
fn identical_inputs_give_identical_runs() {
    let run = || {
        let mut sim = Simulation::from_synth(small_team()).unwrap();
        let metrics = sim.run().unwrap();
        let rows: Vec<String> = metrics.iter().map(MetricsRecord::csv_row).collect();
        let trace: Vec<String> = sim.trace().iter().map(|e| e.to_string()).collect();
        let trees: Vec<QuadTree> = sim.robots().iter().map(|r| r.tree().clone()).collect();
        (rows, trace, trees)
    };
    assert_eq!(run(), run());
}

#[test]
fn metrics_follow_the_evaluation_schedule() {
    let mut sim = Simulation::from_synth(small_team()).unwrap();
    let metrics = sim.run().unwrap();
    let steps: Vec<usize> = metrics.iter().map(|m| m.t).collect();
    assert_eq!(steps, vec![0, 0, 2, 2, 4, 4, 6, 6, 7, 7]);
    assert_eq!(MetricsRecord::CSV_HEADER.split(',').count(), metrics[0].csv_row().split(',').count());
}

#[test]
fn a_lone_robot_matches_central_at_every_evaluation() {
    let mut cfg = common::two_rooms_config(1, 6, 6);
    cfg.eval_every = 1;
    let mut sim = Simulation::from_synth(cfg).unwrap();
    let metrics = sim.run().unwrap();
    assert_eq!(metrics.len(), 6);
    for m in metrics {
        assert_eq!(m.rmse, Rmse::Value(0.0), "step {}", m.t);
        assert_eq!(m.retained_batches, 0);
    }
}

#[test]
fn empty_tree_rasterizes_to_the_prior() {
    let prior = GpPrior::new(0.5, KernelParams::new(1.0, 0.1, 0.1));
    let bounds = Bounds::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.5));
    let map = rasterize_map(&QuadTree::new(0.1, 50), &prior, None, &bounds, 0.1).unwrap();
    assert_eq!(map.points.len(), 11 * 6);
    assert!(map.posterior.mean.iter().all(|m| *m == 0.5));
    assert!(map.posterior.variance.iter().all(|v| *v == 1.0));
}

#[test]
fn rasters_fall_back_to_the_prior_away_from_data() {
    let prior = GpPrior::new(0.5, KernelParams::new(1.0, 0.1, 0.1));
    let mut tree = QuadTree::new(0.1, 50);
    tree.insert_or_merge(GridKey::new(0, 0), 1.0, -0.2);
    let near = Bounds::new(Point2::new(0.0, 0.0), Point2::new(0.0, 0.0));
    let far = Bounds::new(Point2::new(5.0, 5.0), Point2::new(5.0, 5.0));
    let at = rasterize_map(&tree, &prior, None, &near, 0.1).unwrap();
    let away = rasterize_map(&tree, &prior, None, &far, 0.1).unwrap();
    assert!(at.posterior.mean[0] < 0.0);
    assert!((away.posterior.mean[0] - 0.5).abs() < 1e-12);
}

#[test]
fn halo_smooths_leaf_seams() {
    let prior = GpPrior::new(0.5, KernelParams::new(1.0, 0.1, 0.1));
    let mut tree = QuadTree::new(0.1, 1);
    for ix in -3..=3 {
        tree.insert_or_merge(GridKey::new(ix, 0), 1.0, 0.0);
    }
    assert!(tree.leaf_count() > 1);
    let bounds = Bounds::new(Point2::new(-0.3, 0.0), Point2::new(0.3, 0.0));
    let plain = rasterize_map(&tree, &prior, None, &bounds, 0.05).unwrap();
    let halo = rasterize_map(&tree, &prior, Some(0.3), &bounds, 0.05).unwrap();
    let worst = |m: &[f64]| m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(worst(&halo.posterior.mean) <= worst(&plain.posterior.mean));
}

#[test]
fn rmse_masks_saturated_reference_cells() {
    assert_eq!(compute_rmse(&[0.1, 0.2], &[0.5, -0.5], 0.5), Rmse::EmptyMask);
    assert!(Rmse::EmptyMask.as_f64().is_nan());
    assert_eq!(compute_rmse(&[0.1, 0.2, 9.0], &[0.1, 0.2, 0.5], 0.5), Rmse::Value(0.0));
    let Rmse::Value(v) = compute_rmse(&[0.3, 0.0], &[0.0, 0.4], 0.5) else { panic!("mask is not empty") };
    assert!((v - (0.25f64 / 2.0).sqrt()).abs() < 1e-15);
}

#[test]
fn map_writers_emit_expected_shapes() {
    let prior = GpPrior::new(0.5, KernelParams::new(1.0, 0.1, 0.1));
    let bounds = Bounds::new(Point2::new(0.0, 0.0), Point2::new(0.2, 0.1));
    let map = rasterize_map(&QuadTree::new(0.1, 50), &prior, None, &bounds, 0.1).unwrap();
    let mut csv = Vec::new();
    write_map_csv(&mut csv, &map).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,mean,variance"));
    assert_eq!(csv.lines().count(), 1 + 6);
    let mut pgm = Vec::new();
    write_map_pgm(&mut pgm, &map, 0.5).unwrap();
    assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
    assert_eq!(pgm.len(), b"P5\n3 2\n255\n".len() + 6);
    assert!(pgm[pgm.len() - 6..].iter().all(|b| *b == 255));
}

#[test]
fn splitting_one_stream_gives_equal_contiguous_parts() {
    let mut cfg = common::two_rooms_config(1, 100, 100);
    cfg.synth.as_mut().unwrap().beams = 8;
    let scans = synth_world(cfg.synth.as_ref().unwrap(), 0).unwrap().scans;
    assert_eq!(scans.len(), 100);
    let split = split_stream(&scans, 5).unwrap();
    assert_eq!(split.len(), 100);
    for r in 0..5 {
        let mine: Vec<&Scan> = split.iter().filter(|s| s.robot_id == r).collect();
        assert_eq!(mine.len(), 20);
        for (t, s) in mine.iter().enumerate() {
            assert_eq!(s.t, t);
            assert_eq!(s.pose, scans[r * 20 + t].pose);
        }
    }
    assert!(matches!(split_stream(&scans[..3], 5), Err(ScanLogError::Split { scans: 3, parts: 5 })));
}

#[test]
fn scans_outside_the_team_are_rejected() {
    let scans = synth_world(common::two_rooms_config(3, 2, 2).synth.as_ref().unwrap(), 0).unwrap().scans;
    let err = Simulation::new(SimConfig::radish(2, 2), scans).unwrap_err();
    assert!(matches!(err, SimError::Ingestion(_)));
}

#[test]
fn config_json_round_trips_and_rejects_unknown_keys() {
    let cfg = small_team();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(SimConfig::from_json(&text).unwrap(), cfg);
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["bogus"] = serde_json::json!(1);
    assert!(matches!(SimConfig::from_json(&v.to_string()), Err(SimError::Config(_))));
}

#[test]
fn timer_expiry_without_a_window_is_a_config_error() {
    let mut cfg = SimConfig::radish(3, 5);
    cfg.expiration = gpmap::sim::ExpirationKind::Timer;
    assert!(matches!(cfg.validate(), Err(SimError::Protocol(_))));
    cfg.window = Some(2);
    cfg.validate().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scan_logs_round_trip(seed in any::<u64>(), beams in 2usize..90, noise in 0.0f64..0.05) {
        let mut cfg = common::two_rooms_config(2, 4, 4);
        let spec = cfg.synth.as_mut().unwrap();
        spec.beams = beams;
        spec.range_noise_std = noise;
        let scans = synth_world(spec, seed).unwrap().scans;
        let mut buf = Vec::new();
        write_scan_log(&mut buf, &scans).unwrap();
        let back = read_scan_log(buf.as_slice(), LogFormat::Scan).unwrap();
        prop_assert_eq!(back.len(), scans.len());
        for (a, b) in scans.iter().zip(&back) {
            prop_assert_eq!((a.t, a.robot_id, a.pose, a.max_range), (b.t, b.robot_id, b.pose, b.max_range));
            for (x, y) in a.beams.iter().zip(&b.beams) {
                prop_assert_eq!(x.range, y.range);
                prop_assert!((x.angle - y.angle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn synthetic_ranges_hit_the_walls(seed in any::<u64>()) {
        let mut cfg = common::two_rooms_config(2, 3, 3);
        cfg.synth.as_mut().unwrap().beams = 36;
        let out = synth_world(cfg.synth.as_ref().unwrap(), seed).unwrap();
        let world = World::builtin(WorldKind::TwoRooms);
        prop_assert_eq!(&out.world, &world);
        for s in &out.scans {
            prop_assert!(world.is_free(&s.pose.position()));
            for p in gpmap::tsdf::world_points(s) {
                prop_assert!(world.signed_distance(&p).abs() < 1e-6);
            }
        }
    }
}
