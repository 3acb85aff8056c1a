//! Plain-text scan logs.
//!
//! The native grammar is one scan per line:
//!
//! ```text
//! SCAN <t> <robot_id> <x> <y> <theta> <max_range> <n> <a0> <da> <r1> ... <rn>
//! ```
//!
//! Fields are whitespace-separated, angles in radians, ranges in meters.
//! Beam `k` points at `a0 + k * da` relative to the heading. Blank lines and
//! lines starting with `#` are ignored. Per robot, `t` must strictly
//! increase.
//!
//! CARMEN logs are read through their `FLASER` lines: a 180 degree fan
//! starting at `-pi/2` with `pi / num_readings` spacing, one scan per line,
//! all for robot 0 with `t` counting from zero.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::tsdf::{Beam, Pose2D, Scan};

#[derive(Debug, Error)]
pub enum ScanLogError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: robot {robot} step {t} does not follow step {prev}")]
    NonMonotonicTimestamp { line: usize, robot: usize, prev: usize, t: usize },
    #[error("cannot split {scans} scans into {parts} streams")]
    Split { scans: usize, parts: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogFormat {
    Scan,
    /// CARMEN `FLASER` records; readings at or beyond `max_range` are no-returns.
    Carmen {
        max_range: f64,
    },
}

/// Scans ordered by step, then robot.
pub fn read_scan_log<R: BufRead>(r: R, format: LogFormat) -> Result<Vec<Scan>, ScanLogError> {
    let mut scans = Vec::new();
    let mut last: BTreeMap<usize, usize> = BTreeMap::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let scan = match format {
            LogFormat::Scan => parse_scan_line(text, lineno)?,
            LogFormat::Carmen { max_range } => {
                if !text.starts_with("FLASER") {
                    continue;
                }
                parse_flaser_line(text, lineno, scans.len(), max_range)?
            }
        };
        if let Some(&prev) = last.get(&scan.robot_id) {
            if scan.t <= prev {
                return Err(ScanLogError::NonMonotonicTimestamp {
                    line: lineno,
                    robot: scan.robot_id,
                    prev,
                    t: scan.t,
                });
            }
        }
        last.insert(scan.robot_id, scan.t);
        scans.push(scan);
    }
    scans.sort_by_key(|s| (s.t, s.robot_id));
    Ok(scans)
}

struct Fields<'a> {
    it: std::str::SplitWhitespace<'a>,
    line: usize,
}

impl Fields<'_> {
    fn next<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, ScanLogError>
    where
        T::Err: std::fmt::Display,
    {
        let tok =
            self.it.next().ok_or_else(|| ScanLogError::Parse { line: self.line, msg: format!("missing {what}") })?;
        tok.parse().map_err(|e| ScanLogError::Parse { line: self.line, msg: format!("{what} `{tok}`: {e}") })
    }

    fn finish(mut self) -> Result<(), ScanLogError> {
        match self.it.next() {
            None => Ok(()),
            Some(tok) => {
                Err(ScanLogError::Parse { line: self.line, msg: format!("unexpected trailing field `{tok}`") })
            }
        }
    }
}

fn parse_scan_line(text: &str, line: usize) -> Result<Scan, ScanLogError> {
    let bad = |msg: String| ScanLogError::Parse { line, msg };
    let mut f = Fields { it: text.split_whitespace(), line };
    let tag: String = f.next("record type")?;
    if tag != "SCAN" {
        return Err(bad(format!("unknown record `{tag}`")));
    }
    let t: usize = f.next("t")?;
    let robot_id: usize = f.next("robot_id")?;
    let x: f64 = f.next("x")?;
    let y: f64 = f.next("y")?;
    let theta: f64 = f.next("theta")?;
    let max_range: f64 = f.next("max_range")?;
    let n: usize = f.next("beam count")?;
    let a0: f64 = f.next("a0")?;
    let da: f64 = f.next("da")?;
    if ![x, y, theta, a0, da].iter().all(|v| v.is_finite()) {
        return Err(bad("non-finite pose or angle".into()));
    }
    if !(max_range.is_finite() && max_range > 0.0) {
        return Err(bad(format!("max_range must be > 0, got {max_range}")));
    }
    if n > 1 && !(da > 0.0) {
        return Err(bad(format!("beam angles must increase, da = {da}")));
    }
    let mut beams = Vec::with_capacity(n);
    for k in 0..n {
        let range: f64 = f.next(&format!("range {} of {n}", k + 1))?;
        if !(range > 0.0 && range <= max_range) {
            return Err(bad(format!("range {} = {range} outside (0, {max_range}]", k + 1)));
        }
        beams.push(Beam { angle: a0 + k as f64 * da, range });
    }
    f.finish().map_err(|_| bad(format!("more ranges than the declared beam count {n}")))?;
    Ok(Scan { t, robot_id, pose: Pose2D::new(x, y, theta), beams, max_range })
}

fn parse_flaser_line(text: &str, line: usize, t: usize, max_range: f64) -> Result<Scan, ScanLogError> {
    let mut f = Fields { it: text.split_whitespace(), line };
    let _tag: String = f.next("record type")?;
    let n: usize = f.next("num_readings")?;
    let da = PI / n.max(1) as f64;
    let mut beams = Vec::with_capacity(n);
    for k in 0..n {
        let r: f64 = f.next(&format!("reading {}", k + 1))?;
        let range = if r > 0.0 && r < max_range { r } else { max_range };
        beams.push(Beam { angle: -FRAC_PI_2 + k as f64 * da, range });
    }
    let x: f64 = f.next("x")?;
    let y: f64 = f.next("y")?;
    let theta: f64 = f.next("theta")?;
    Ok(Scan { t, robot_id: 0, pose: Pose2D::new(x, y, theta), beams, max_range })
}

/// Writes scans in the native grammar. Beam angles must be evenly spaced.
pub fn write_scan_log<W: Write>(mut w: W, scans: &[Scan]) -> std::io::Result<()> {
    for s in scans {
        let a0 = s.beams.first().map_or(0.0, |b| b.angle);
        let da =
            if s.beams.len() > 1 { (s.beams[s.beams.len() - 1].angle - a0) / (s.beams.len() - 1) as f64 } else { 0.0 };
        write!(
            w,
            "SCAN {} {} {} {} {} {} {} {} {}",
            s.t,
            s.robot_id,
            s.pose.x,
            s.pose.y,
            s.pose.theta,
            s.max_range,
            s.beams.len(),
            a0,
            da
        )?;
        for b in &s.beams {
            write!(w, " {}", b.range)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Cuts one time-ordered stream into `parts` contiguous equal-length robot
/// streams. Robot `i` gets the `i`-th chunk with steps renumbered from zero;
/// scans past the last full chunk are dropped.
pub fn split_stream(scans: &[Scan], parts: usize) -> Result<Vec<Scan>, ScanLogError> {
    if parts == 0 || scans.len() < parts {
        return Err(ScanLogError::Split { scans: scans.len(), parts });
    }
    let chunk = scans.len() / parts;
    let mut ordered: Vec<&Scan> = scans.iter().collect();
    ordered.sort_by_key(|s| (s.t, s.robot_id));
    let mut out: Vec<Scan> = ordered
        .chunks_exact(chunk)
        .take(parts)
        .enumerate()
        .flat_map(|(robot_id, c)| c.iter().enumerate().map(move |(t, s)| Scan { t, robot_id, ..(*s).clone() }))
        .collect();
    out.sort_by_key(|s| (s.t, s.robot_id));
    Ok(out)
}
