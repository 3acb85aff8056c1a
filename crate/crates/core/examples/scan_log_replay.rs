// Writes a synthetic scan stream in the text log format, reads it back,
// cuts it into per-robot streams and simulates them.

use std::error::Error;

use gpmap::sim::{
    read_scan_log, split_stream, synth_world, write_scan_log, LogFormat, RobotPath, SimConfig, Simulation, SynthSpec,
    WorldKind,
};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let spec = SynthSpec {
        world: WorldKind::Corridor,
        robots: vec![RobotPath { waypoints: vec![[-12.0, 0.0], [12.0, 0.0]] }],
        scan_steps: 30,
        beams: 90,
        max_range: 10.0,
        speed: 0.5,
        range_noise_std: 0.01,
    };
    let mut log = Vec::new();
    write_scan_log(&mut log, &synth_world(&spec, 3)?.scans)?;
    println!(
        "first log line: {}",
        String::from_utf8_lossy(&log).lines().next().unwrap_or("").chars().take(72).collect::<String>()
    );

    let scans = read_scan_log(log.as_slice(), LogFormat::Scan)?;
    // One long drive becomes three robots that start at the same time.
    let team = split_stream(&scans, 3)?;
    let mut config = SimConfig::radish(3, 10);
    config.eval_every = 0;
    config.comm_range = 10.0;
    let mut sim = Simulation::new(config, team)?;
    for m in sim.run()? {
        println!("robot {} rmse {:.4} with {} pseudo-points", m.robot, m.rmse.as_f64(), m.pseudo_points);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
