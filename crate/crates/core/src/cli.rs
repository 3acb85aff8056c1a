//! Command-line front end. The binary only forwards its arguments here.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::geometry::{Bounds, Point2};
use crate::network::{check_b_connected, read_graph_log, GraphSnapshot};
use crate::quadtree::QuadTree;
use crate::sim::raster::{write_map_csv, write_map_pgm};
use crate::sim::{
    rasterize_map, read_scan_log, split_stream, synth_world, write_scan_log, LogFormat, MapRaster, MetricsRecord,
    SimConfig, SimError, Simulation, SynthSpec,
};
use crate::tsdf::Scan;

/// Largest team the closed-form oracle is run on.
pub const ORACLE_MAX_ROBOTS: usize = 6;
/// Largest number of steps the closed-form oracle is run on.
pub const ORACLE_MAX_STEPS: usize = 50;
const ORACLE_ZETA_TOL: f64 = 1e-9;

pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INGESTION: i32 = 3;
    pub const ORACLE_LIMITS: i32 = 4;
}

const SCAN_GRAMMAR: &str = "\
Scan logs hold one scan per line:

  SCAN <t> <robot_id> <x> <y> <theta> <max_range> <n> <a0> <da> <r1> ... <rn>

Fields are whitespace-separated, angles in radians, ranges in meters. Beam k
points at a0 + k*da from the heading; a range equal to max_range is a
no-return. Steps must strictly increase per robot. Blank lines and lines
starting with # are ignored.

Graph logs hold one undirected edge per line: EDGE <t> <i> <j>.

Exit codes: 0 success, 1 check failed, 2 config or parse error,
3 ingestion error, 4 fixture too large for the oracle.";

#[derive(Debug, Parser)]
#[command(name = "gpmap", version, about = "Distributed sparse-GP TSDF mapping simulator", after_long_help = SCAN_GRAMMAR)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a team and write metrics, maps, trees and the batch trace.
    Simulate(SimulateArgs),
    /// Check that every full window of B steps has a connected union graph.
    CheckConnectivity(CheckArgs),
    /// Compare every robot against the closed-form expectation at every step.
    OracleCompare(OracleArgs),
    /// Rasterize a saved tree into a map CSV (and optionally a PGM).
    ExportMap(ExportArgs),
    /// Write the scan log of a synthetic scenario.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ScanSource {
    /// Scan log to replay instead of the config's synthetic scenario.
    #[arg(long, conflicts_with = "synth")]
    pub scan_log: Option<PathBuf>,
    /// Read the scan log as CARMEN FLASER records with this max range.
    #[arg(long, requires = "scan_log")]
    pub carmen_max_range: Option<f64>,
    /// Synthetic scenario JSON, overriding the config's.
    #[arg(long)]
    pub synth: Option<PathBuf>,
    /// Cut the scan stream into this many equal robot streams.
    #[arg(long)]
    pub split: Option<usize>,
    /// Scripted graph (EDGE lines) used instead of proximity.
    #[arg(long)]
    pub graph_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub source: ScanSource,
    /// Also write 8-bit PGM images of every map.
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub graph_log: PathBuf,
    /// Team size.
    #[arg(long)]
    pub n: usize,
    /// Window length B.
    #[arg(long)]
    pub b: usize,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub source: ScanSource,
    #[arg(long, hide = true)]
    pub drop_forward: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Config supplying the prior, kernel and lattice.
    #[arg(long)]
    pub config: PathBuf,
    /// Tree records (`ix,iy,x,y,zeta,m`) as written by `simulate`.
    #[arg(long)]
    pub tree: PathBuf,
    /// Map CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub pgm: Option<PathBuf>,
    /// Map extent `xmin,ymin,xmax,ymax`; defaults to the tree's data.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bounds: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Scan log to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

impl Failure {
    fn new(code: i32, msg: impl Into<String>) -> Self {
        Self { code, msg: msg.into() }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match &e {
            SimError::Config(_) | SimError::Protocol(_) => exit::CONFIG,
            SimError::Ingestion(_) => exit::INGESTION,
            SimError::Gp(_) | SimError::Io(_) => exit::CHECK_FAILED,
        };
        Self::new(code, e.to_string())
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(exit::CHECK_FAILED, format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_fail(path, e))
}

fn open(path: &Path, code: i32) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::new(code, format!("cannot read {}: {e}", path.display())))
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = write!(stderr, "{e}");
            return exit::CONFIG;
        }
        Err(e) => {
            let _ = write!(stdout, "{e}");
            return exit::OK;
        }
    };
    run(cli, stdout, stderr)
}

pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, stdout),
        Command::CheckConnectivity(a) => check_connectivity(a, stdout),
        Command::OracleCompare(a) => oracle_compare(a, stdout),
        Command::ExportMap(a) => export_map(a, stdout),
        Command::Synth(a) => synth(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.msg);
            f.code
        }
    }
}

fn load_synth_spec(path: &Path) -> Result<SynthSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(exit::CONFIG, format!("cannot read {}: {e}", path.display())))?;
    let spec: SynthSpec =
        serde_json::from_str(&text).map_err(|e| Failure::new(exit::CONFIG, format!("{}: {e}", path.display())))?;
    spec.validate().map_err(|e| Failure::new(exit::CONFIG, format!("{}: {e}", path.display())))?;
    Ok(spec)
}

fn load_scans(config: &SimConfig, source: &ScanSource) -> Result<Vec<Scan>, Failure> {
    let scans = if let Some(path) = &source.scan_log {
        let format = source.carmen_max_range.map_or(LogFormat::Scan, |max_range| LogFormat::Carmen { max_range });
        read_scan_log(open(path, exit::INGESTION)?, format)
            .map_err(|e| Failure::new(exit::INGESTION, format!("{}: {e}", path.display())))?
    } else {
        let spec = match &source.synth {
            Some(path) => load_synth_spec(path)?,
            None => config.synth.clone().ok_or_else(|| {
                Failure::new(exit::CONFIG, "no scan source: give --scan-log, --synth or a synth block")
            })?,
        };
        synth_world(&spec, config.seed)?.scans
    };
    match source.split {
        None => Ok(scans),
        Some(k) => {
            if k != config.n {
                return Err(Failure::new(exit::CONFIG, format!("--split {k} does not match n = {}", config.n)));
            }
            split_stream(&scans, k).map_err(|e| Failure::new(exit::INGESTION, e.to_string()))
        }
    }
}

fn build_simulation(config: SimConfig, source: &ScanSource) -> Result<Simulation, Failure> {
    let scans = load_scans(&config, source)?;
    let (n, steps) = (config.n, config.steps);
    let mut sim = Simulation::new(config, scans)?;
    if let Some(path) = &source.graph_log {
        let graphs = read_graph_log(open(path, exit::INGESTION)?, n, Some(steps))
            .map_err(|e| Failure::new(exit::INGESTION, format!("{}: {e}", path.display())))?;
        sim = sim.with_graph_script(graphs)?;
    }
    Ok(sim)
}

fn write_map(dir: &Path, name: &str, map: &MapRaster, h: f64, pgm: bool) -> Result<(), Failure> {
    let csv = dir.join(format!("{name}.csv"));
    let mut w = create(&csv)?;
    write_map_csv(&mut w, map).and_then(|_| w.flush()).map_err(|e| io_fail(&csv, e))?;
    if pgm {
        let path = dir.join(format!("{name}.pgm"));
        let mut w = create(&path)?;
        write_map_pgm(&mut w, map, h).and_then(|_| w.flush()).map_err(|e| io_fail(&path, e))?;
    }
    Ok(())
}

fn write_tree(path: &Path, tree: &QuadTree) -> Result<(), Failure> {
    let mut w = create(path)?;
    tree.write_records(&mut w).and_then(|_| w.flush()).map_err(|e| io_fail(path, e))
}

fn simulate(args: SimulateArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let config = SimConfig::load(&args.config)?;
    let h = config.tsdf.truncation;
    let mut sim = build_simulation(config, &args.source)?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_fail(&args.out, e))?;
    let metrics = sim.run()?;

    let path = args.out.join("metrics.csv");
    let mut w = create(&path)?;
    let mut body = format!("{}\n", MetricsRecord::CSV_HEADER);
    for m in &metrics {
        body.push_str(&m.csv_row());
        body.push('\n');
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| io_fail(&path, e))?;

    write_map(&args.out, "map_central", &sim.central_map()?, h, args.pgm)?;
    write_tree(&args.out.join("tree_central.csv"), sim.central().tree())?;
    for i in 0..sim.robots().len() {
        write_map(&args.out, &format!("map_robot_{i}"), &sim.robot_map(i)?, h, args.pgm)?;
        write_tree(&args.out.join(format!("tree_robot_{i}.csv")), sim.robots()[i].tree())?;
    }

    let path = args.out.join("trace.log");
    let mut w = create(&path)?;
    for e in sim.trace() {
        writeln!(w, "{e}").map_err(|e| io_fail(&path, e))?;
    }
    w.flush().map_err(|e| io_fail(&path, e))?;

    let _ = writeln!(
        stdout,
        "simulated {} steps for {} robots; central holds {} pseudo-points",
        sim.steps_done(),
        sim.robots().len(),
        sim.central().tree().len()
    );
    Ok(exit::OK)
}

fn check_connectivity(args: CheckArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    if args.n == 0 || args.b == 0 {
        return Err(Failure::new(exit::CONFIG, "--n and --b must be at least 1"));
    }
    let mut graphs = read_graph_log(open(&args.graph_log, exit::CONFIG)?, args.n, None)
        .map_err(|e| Failure::new(exit::CONFIG, format!("{}: {e}", args.graph_log.display())))?;
    while graphs.len() < args.b {
        graphs.push(GraphSnapshot::empty(args.n, graphs.len()));
    }
    let report = check_b_connected(&graphs, args.b).map_err(|e| Failure::new(exit::CONFIG, e.to_string()))?;
    match report.first_violation {
        None => {
            let _ = writeln!(stdout, "connected: {} windows of {} steps", report.windows_checked, args.b);
            Ok(exit::OK)
        }
        Some(k) => {
            let _ = writeln!(stdout, "disconnected: window {k} (steps {}..={})", k * args.b, (k + 1) * args.b - 1);
            Ok(exit::CHECK_FAILED)
        }
    }
}

fn oracle_compare(args: OracleArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let config = SimConfig::load(&args.config)?;
    if config.n > ORACLE_MAX_ROBOTS || config.steps > ORACLE_MAX_STEPS {
        return Err(Failure::new(
            exit::ORACLE_LIMITS,
            format!(
                "oracle runs on at most {ORACLE_MAX_ROBOTS} robots and {ORACLE_MAX_STEPS} steps, got n = {} and {} steps",
                config.n, config.steps
            ),
        ));
    }
    let steps = config.steps;
    let mut sim = build_simulation(config, &args.source)?;
    if args.drop_forward {
        sim = sim.with_dropped_forward();
    }
    std::fs::create_dir_all(&args.out).map_err(|e| io_fail(&args.out, e))?;
    let path = args.out.join("oracle_report.csv");
    let mut w = create(&path)?;
    let mut report = String::from("t,robot,key_mismatches,m_mismatches,max_dm,max_dzeta\n");
    let mut worst: Option<(usize, usize)> = None;
    for _ in 0..steps {
        let t = sim.step()?.t;
        for (i, d) in sim.oracle_deviations().iter().enumerate() {
            report.push_str(&format!(
                "{t},{i},{},{},{},{}\n",
                d.key_mismatches, d.m_mismatches, d.max_m_error, d.max_zeta_error
            ));
            if worst.is_none() && !d.within(ORACLE_ZETA_TOL) {
                worst = Some((t, i));
            }
        }
    }
    w.write_all(report.as_bytes()).and_then(|_| w.flush()).map_err(|e| io_fail(&path, e))?;
    match worst {
        None => {
            let _ = writeln!(stdout, "oracle agrees at all {steps} steps");
            Ok(exit::OK)
        }
        Some((t, i)) => {
            let _ = writeln!(stdout, "oracle mismatch: robot {i} at step {t}");
            Ok(exit::CHECK_FAILED)
        }
    }
}

fn export_map(args: ExportArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let config = SimConfig::load(&args.config)?;
    let tree =
        QuadTree::read_records(open(&args.tree, exit::INGESTION)?, config.tsdf.grid_spacing, config.max_leaf_size)
            .map_err(|e| Failure::new(exit::INGESTION, format!("{}: {e}", args.tree.display())))?;
    let bounds = match args.bounds.as_deref() {
        Some(&[x0, y0, x1, y1]) if x0 <= x1 && y0 <= y1 => Bounds::new(Point2::new(x0, y0), Point2::new(x1, y1)),
        Some(_) => return Err(Failure::new(exit::CONFIG, "--bounds needs xmin,ymin,xmax,ymax with min <= max")),
        None => tree.data_bounds().ok_or_else(|| Failure::new(exit::CONFIG, "tree is empty; give --bounds"))?,
    };
    let map = rasterize_map(&tree, &config.prior(), config.halo_radius(), &bounds, config.eval_resolution())
        .map_err(SimError::from)?;
    let mut w = create(&args.out)?;
    write_map_csv(&mut w, &map).and_then(|_| w.flush()).map_err(|e| io_fail(&args.out, e))?;
    if let Some(path) = &args.pgm {
        let mut w = create(path)?;
        write_map_pgm(&mut w, &map, config.tsdf.truncation).and_then(|_| w.flush()).map_err(|e| io_fail(path, e))?;
    }
    let _ = writeln!(stdout, "wrote {} cells from {} pseudo-points", map.points.len(), tree.len());
    Ok(exit::OK)
}

fn synth(args: SynthArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let spec = load_synth_spec(&args.spec)?;
    let out = synth_world(&spec, args.seed)?;
    let mut w = create(&args.out)?;
    write_scan_log(&mut w, &out.scans).and_then(|_| w.flush()).map_err(|e| io_fail(&args.out, e))?;
    let _ = writeln!(stdout, "wrote {} scans", out.scans.len());
    Ok(exit::OK)
}
