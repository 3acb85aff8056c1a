// Runs a scripted team and compares every robot with the closed-form
// expectation built from products of the weight matrices.

use std::error::Error;

use gpmap::network::GraphSnapshot;
use gpmap::sim::{audit_exactly_once, audit_no_echo, RobotPath, SimConfig, Simulation, SynthSpec, WorldKind};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut config = SimConfig::radish(3, 8);
    config.synth = Some(SynthSpec {
        world: WorldKind::SquareRoom,
        robots: vec![
            RobotPath { waypoints: vec![[-3.0, -3.0], [3.0, -3.0]] },
            RobotPath { waypoints: vec![[0.0, 0.0], [0.0, 3.0]] },
            RobotPath { waypoints: vec![[3.0, 3.0], [-3.0, 3.0]] },
        ],
        scan_steps: 6,
        beams: 120,
        max_range: 10.0,
        speed: 0.3,
        range_noise_std: 0.01,
    });
    // A batch needs two hops to cross the path 0-1-2.
    let graphs: Vec<GraphSnapshot> =
        (0..8).map(|t| GraphSnapshot::new(3, t, [(0, 1), (1, 2)])).collect::<Result<_, _>>()?;
    let mut sim = Simulation::from_synth(config)?.with_graph_script(graphs)?;
    for _ in 0..8 {
        let report = sim.step()?;
        let worst = sim.oracle_deviations().iter().map(|d| d.max_zeta_error).fold(0.0, f64::max);
        println!("t={} sends={:>2} applied={} worst dzeta={worst:.1e}", report.t, report.sends, report.applied);
        assert!(sim.oracle_deviations().iter().all(|d| d.within(1e-9)));
    }
    audit_exactly_once(sim.trace())?;
    audit_no_echo(sim.trace())?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
