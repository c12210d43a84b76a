//! CSV output for traces, planner diagnostics and particle snapshots.
//!
//! The step trace carries its metadata in leading `# key=value` lines so that
//! a written trace parses back into the same [`EpisodeTrace`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::maze::Perturbation;

use super::{EpisodeTrace, Outcome, ParticleSnapshot, PlannerRow, TraceRow};

pub const TRACE_HEADER: &str = "step,x0,x1,tau,c,theta,e,cycle";
pub const PLANNER_HEADER: &str = "cycle,objective,mmd,effort,iters_used";
pub const PARTICLE_HEADER: &str = "cycle,j,x0,x1";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn split(path: &Path, text: &str) -> Result<Vec<f64>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(';')
        .map(|v| v.parse::<f64>().map_err(|e| Error::parse(path, e)))
        .collect()
}

pub fn export_trace(trace: &EpisodeTrace, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# seed={}", trace.seed).map_err(io)?;
    writeln!(w, "# success={}", trace.outcome.success).map_err(io)?;
    writeln!(w, "# steps={}", trace.outcome.steps).map_err(io)?;
    writeln!(w, "# gate_offsets_raw={}", join(&trace.perturbation.raw)).map_err(io)?;
    writeln!(w, "# gate_offsets_applied={}", join(&trace.perturbation.applied)).map_err(io)?;
    writeln!(w, "{TRACE_HEADER}").map_err(io)?;
    for r in &trace.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.step, r.position[0], r.position[1], r.tau, r.c, r.theta, r.e, r.cycle
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn parse_trace(path: &Path) -> Result<EpisodeTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seed = None;
    let mut success = None;
    let mut steps = None;
    let mut perturbation = Perturbation::default();
    for line in text.lines().filter_map(|l| l.strip_prefix("# ")) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, format!("bad metadata line `{line}`")))?;
        let bad = |e: &dyn std::fmt::Display| Error::parse(path, format!("{key}: {e}"));
        match key {
            "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(&e))?),
            "success" => success = Some(value.parse::<bool>().map_err(|e| bad(&e))?),
            "steps" => steps = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "gate_offsets_raw" => perturbation.raw = split(path, value)?,
            "gate_offsets_applied" => perturbation.applied = split(path, value)?,
            _ => return Err(Error::parse(path, format!("unknown metadata `{key}`"))),
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(path, e))?;
    if header.iter().collect::<Vec<_>>().join(",") != TRACE_HEADER {
        return Err(Error::parse(path, format!("expected header `{TRACE_HEADER}`")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::parse(path, e))?;
        let f = |i: usize| -> Result<f64> { rec[i].parse::<f64>().map_err(|e| Error::parse(path, e)) };
        let u = |i: usize| -> Result<usize> { rec[i].parse::<usize>().map_err(|e| Error::parse(path, e)) };
        rows.push(TraceRow {
            step: u(0)?,
            position: [f(1)?, f(2)?],
            tau: f(3)?,
            c: u(4)? as u32,
            theta: f(5)?,
            e: f(6)?,
            cycle: u(7)?,
        });
    }
    let missing = |k: &str| Error::parse(path, format!("missing `# {k}=` line"));
    Ok(EpisodeTrace {
        seed: seed.ok_or_else(|| missing("seed"))?,
        perturbation,
        rows,
        outcome: Outcome {
            success: success.ok_or_else(|| missing("success"))?,
            steps: steps.ok_or_else(|| missing("steps"))?,
        },
    })
}

pub fn export_planner(rows: &[PlannerRow], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{PLANNER_HEADER}").map_err(io)?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.cycle, r.objective, r.mmd, r.effort, r.iters_used).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn export_particles(snapshots: &[ParticleSnapshot], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{PARTICLE_HEADER}").map_err(io)?;
    for s in snapshots {
        for (j, q) in s.particles.iter().enumerate() {
            writeln!(w, "{},{},{},{}", s.cycle, j, q[0], q[1]).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
