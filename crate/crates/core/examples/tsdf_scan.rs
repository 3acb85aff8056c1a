// Turns one laser scan of a straight wall into pseudo-point samples.

use std::error::Error;

use gpmap::tsdf::{compute_pseudo_points, Beam, Pose2D, Scan, TsdfParams};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    // Robot at the origin facing +y; the wall is the line y = 1.
    let pose = Pose2D::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
    let beams: Vec<Beam> = (-3..=3)
        .map(|k| {
            let angle = k as f64 * 0.05;
            Beam { angle, range: 1.0 / angle.cos() }
        })
        .collect();
    let scan = Scan { t: 0, robot_id: 0, pose, beams, max_range: 10.0 };
    let params = TsdfParams::new(0.5, 0.1);
    params.validate()?;

    let samples = compute_pseudo_points(&scan, &params);
    println!("{} pseudo-points from {} beams", samples.len(), scan.beams.len());
    for s in samples.iter().filter(|s| s.key.ix == 0) {
        println!(
            "  key ({:>3}, {:>3})  at ({:+.2}, {:+.2})  tsdf {:+.3}",
            s.key.ix, s.key.iy, s.location.x, s.location.y, s.tsdf_value
        );
    }
    // Free space in front of the wall is positive, behind it negative.
    assert!(samples.iter().all(|s| (s.location.y < 0.999) == (s.tsdf_value > 0.0) || s.tsdf_value == 0.0));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
