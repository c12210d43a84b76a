//! Trajectories, arc length, projection and nearest-state retrieval.
//!
//! Projection is discrete throughout: a query is matched against sampled
//! states, never against points interpolated on segments. Ties go to the
//! smallest `(demo_id, time_index)` pair so that runs are reproducible.

use std::collections::HashMap;
use std::fs;
use std::ops::Deref;
use std::path::Path;

use crate::error::{Error, Result};

/// A point in the (unit-box normalized) workspace.
#[derive(Debug, Clone, PartialEq)]
pub struct State(Vec<f64>);

impl State {
    pub fn new(coords: Vec<f64>) -> Self {
        State(coords)
    }

    pub fn xy(x: f64, y: f64) -> Self {
        State(vec![x, y])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for State {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<&[f64]> for State {
    fn from(s: &[f64]) -> Self {
        State(s.to_vec())
    }
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cumulative arc length along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcLengthTable {
    pub cumulative: Vec<f64>,
}

impl ArcLengthTable {
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn at(&self, index: usize) -> f64 {
        self.cumulative[index]
    }
}

/// Time-indexed sequence of states for one demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: usize,
    dim: usize,
    timestep: f64,
    points: Vec<f64>,
    arc: ArcLengthTable,
}

impl Trajectory {
    pub fn new(id: usize, timestep: f64, states: &[State]) -> Result<Self> {
        let dim = states.first().map(State::dim).unwrap_or(0);
        let mut points = Vec::with_capacity(states.len() * dim);
        for (index, s) in states.iter().enumerate() {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.dim(),
                });
            }
            if !s.is_finite() {
                return Err(Error::NonFinite { index });
            }
            points.extend_from_slice(s);
        }
        Self::from_flat(id, timestep, dim, points)
    }

    /// Builds a trajectory from row-major coordinates.
    pub fn from_flat(id: usize, timestep: f64, dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: points.len() % dim,
            });
        }
        let len = points.len() / dim;
        if len < 2 {
            return Err(Error::TrajectoryTooShort(len));
        }
        if let Some(bad) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: bad / dim });
        }
        let arc = arc_from_points(&points, dim);
        Ok(Trajectory {
            id,
            dim,
            timestep,
            points,
            arc,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn timestep(&self) -> f64 {
        self.timestep
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn state(&self, index: usize) -> &[f64] {
        &self.points[index * self.dim..(index + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn arc(&self) -> &ArcLengthTable {
        &self.arc
    }

    /// Contiguous sub-trajectory over `[start, end]` (inclusive, clamped),
    /// keeping the id. Windows shorter than two states are widened.
    pub fn window(&self, start: usize, end: usize) -> Trajectory {
        let last = self.len() - 1;
        let mut end = end.min(last);
        let mut start = start.min(end);
        if end == start {
            if end < last {
                end += 1;
            } else {
                start -= 1;
            }
        }
        let points = self.points[start * self.dim..(end + 1) * self.dim].to_vec();
        let arc = arc_from_points(&points, self.dim);
        Trajectory {
            id: self.id,
            dim: self.dim,
            timestep: self.timestep,
            points,
            arc,
        }
    }
}

fn arc_from_points(points: &[f64], dim: usize) -> ArcLengthTable {
    let mut cumulative = Vec::with_capacity(points.len() / dim);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for pair in points.chunks_exact(dim).collect::<Vec<_>>().windows(2) {
        acc += dist(pair[0], pair[1]);
        cumulative.push(acc);
    }
    ArcLengthTable { cumulative }
}

pub fn build_arc_table(traj: &Trajectory) -> Result<ArcLengthTable> {
    if traj.len() < 2 {
        return Err(Error::TrajectoryTooShort(traj.len()));
    }
    Ok(arc_from_points(&traj.points, traj.dim))
}

/// Result of matching a query against sampled trajectory states.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub demo_id: usize,
    pub time_index: usize,
    pub point: State,
    pub distance: f64,
    pub arc_s: f64,
}

fn check_dim(q: &[f64], dim: usize) -> Result<()> {
    if q.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: q.len(),
        });
    }
    Ok(())
}

/// Index of the nearest sampled state; ties go to the smallest index.
pub fn nearest_index(q: &[f64], traj: &Trajectory) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, x) in traj.states().enumerate() {
        let d = dist_sq(q, x);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

pub fn project_to_trajectory(q: &[f64], traj: &Trajectory) -> Result<Projection> {
    check_dim(q, traj.dim)?;
    let (k, d2) = nearest_index(q, traj);
    Ok(Projection {
        demo_id: traj.id,
        time_index: k,
        point: State::from(traj.state(k)),
        distance: d2.sqrt(),
        arc_s: traj.arc.at(k),
    })
}

/// Unit tangent at `index`: central difference inside, one-sided at the ends,
/// falling back to the nearest non-degenerate segment.
pub fn tangent_at(traj: &Trajectory, index: usize) -> Result<Vec<f64>> {
    let n = traj.len();
    if n < 2 {
        return Err(Error::TrajectoryTooShort(n));
    }
    let index = index.min(n - 1);
    let (a, b) = if index == 0 {
        (0, 1)
    } else if index == n - 1 {
        (n - 2, n - 1)
    } else {
        (index - 1, index + 1)
    };
    if let Some(t) = unit_diff(traj.state(a), traj.state(b)) {
        return Ok(t);
    }
    // Segment m joins states m and m+1; its midpoint sits at m + 0.5.
    let mut segments: Vec<usize> = (0..n - 1).collect();
    segments.sort_by(|&m1, &m2| {
        let d1 = (m1 as f64 + 0.5 - index as f64).abs();
        let d2 = (m2 as f64 + 0.5 - index as f64).abs();
        d1.total_cmp(&d2).then(m1.cmp(&m2))
    });
    segments
        .into_iter()
        .find_map(|m| unit_diff(traj.state(m), traj.state(m + 1)))
        .ok_or(Error::DegenerateTrajectory)
}

fn unit_diff(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let len = norm(&d);
    (len > 0.0).then(|| d.into_iter().map(|v| v / len).collect())
}

/// One entry of the flattened state set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatEntry {
    pub demo_id: usize,
    pub time_index: usize,
}

/// Expert demonstrations plus the flattened index used for retrieval.
#[derive(Debug, Clone)]
pub struct DemoDataset {
    demos: Vec<Trajectory>,
    flat_index: Vec<FlatEntry>,
    grid: Option<GridIndex>,
}

impl DemoDataset {
    /// Demo ids are reassigned to their position in `demos`.
    pub fn new(demos: Vec<Trajectory>) -> Result<Self> {
        if demos.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = demos[0].dim;
        let mut flat_index = Vec::new();
        let mut owned = Vec::with_capacity(demos.len());
        for (demo_id, mut d) in demos.into_iter().enumerate() {
            check_dim_eq(dim, d.dim)?;
            d.id = demo_id;
            flat_index.extend((0..d.len()).map(|time_index| FlatEntry { demo_id, time_index }));
            owned.push(d);
        }
        Ok(DemoDataset {
            demos: owned,
            flat_index,
            grid: None,
        })
    }

    /// Enables the grid-bucket index; results are identical to the scan.
    pub fn with_grid(mut self, cell: f64) -> Result<Self> {
        if !(cell > 0.0) {
            return Err(Error::invalid("cell", "grid cell size must be positive"));
        }
        self.grid = Some(GridIndex::build(&self, cell));
        Ok(self)
    }

    pub fn demos(&self) -> &[Trajectory] {
        &self.demos
    }

    pub fn demo(&self, id: usize) -> &Trajectory {
        &self.demos[id]
    }

    pub fn dim(&self) -> usize {
        self.demos[0].dim
    }

    pub fn flat_index(&self) -> &[FlatEntry] {
        &self.flat_index
    }

    fn entry_state(&self, e: FlatEntry) -> &[f64] {
        self.demos[e.demo_id].state(e.time_index)
    }

    fn projection_of(&self, e: FlatEntry, d2: f64) -> Projection {
        let demo = &self.demos[e.demo_id];
        Projection {
            demo_id: e.demo_id,
            time_index: e.time_index,
            point: State::from(demo.state(e.time_index)),
            distance: d2.sqrt(),
            arc_s: demo.arc.at(e.time_index),
        }
    }

    /// Nearest state over every demonstration.
    pub fn nearest(&self, q: &[f64]) -> Result<Projection> {
        check_dim(q, self.dim())?;
        if let Some(grid) = &self.grid {
            return Ok(grid.nearest(self, q));
        }
        Ok(self.nearest_scan(q))
    }

    /// Exhaustive scan; `flat_index` is already in (demo_id, time_index) order.
    pub fn nearest_scan(&self, q: &[f64]) -> Projection {
        let mut best = (self.flat_index[0], f64::INFINITY);
        for &e in &self.flat_index {
            let d = dist_sq(q, self.entry_state(e));
            if d < best.1 {
                best = (e, d);
            }
        }
        self.projection_of(best.0, best.1)
    }

    /// Loads every `*.csv` demonstration in a directory, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut files: Vec<_> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let demos = files
            .iter()
            .enumerate()
            .map(|(i, p)| load_demo(p, i))
            .collect::<Result<Vec<_>>>()?;
        if demos.is_empty() {
            return Err(Error::parse(dir, "no demonstration files (*.csv) found"));
        }
        DemoDataset::new(demos)
    }
}

fn check_dim_eq(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub fn nearest_in_dataset(q: &[f64], ds: &DemoDataset) -> Result<Projection> {
    ds.nearest(q)
}

/// Uniform grid of buckets over the flattened states.
#[derive(Debug, Clone)]
struct GridIndex {
    cell: f64,
    buckets: HashMap<Vec<i64>, Vec<FlatEntry>>,
    /// Bounding range of occupied cells per axis.
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl GridIndex {
    fn key(cell: f64, x: &[f64]) -> Vec<i64> {
        x.iter().map(|v| (v / cell).floor() as i64).collect()
    }

    fn build(ds: &DemoDataset, cell: f64) -> Self {
        let dim = ds.dim();
        let mut buckets: HashMap<Vec<i64>, Vec<FlatEntry>> = HashMap::new();
        let mut lo = vec![i64::MAX; dim];
        let mut hi = vec![i64::MIN; dim];
        for &e in &ds.flat_index {
            let k = Self::key(cell, ds.entry_state(e));
            for a in 0..dim {
                lo[a] = lo[a].min(k[a]);
                hi[a] = hi[a].max(k[a]);
            }
            buckets.entry(k).or_default().push(e);
        }
        GridIndex { cell, buckets, lo, hi }
    }

    fn nearest(&self, ds: &DemoDataset, q: &[f64]) -> Projection {
        let center = Self::key(self.cell, q);
        let max_ring = center
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&c, (&l, &h))| (c - l).abs().max((h - c).abs()))
            .max()
            .unwrap_or(0);
        let mut best: Option<(FlatEntry, f64)> = None;
        for ring in 0..=max_ring {
            // Every point in ring r+1 or beyond is at least r*cell away.
            if let Some((_, d2)) = best {
                let bound = ring as f64 - 1.0;
                if bound > 0.0 && (bound * self.cell).powi(2) > d2 {
                    break;
                }
            }
            for_each_shell_cell(&center, ring, &mut |key| {
                if let Some(entries) = self.buckets.get(key) {
                    for &e in entries {
                        let d = dist_sq(q, ds.entry_state(e));
                        let better = match best {
                            None => true,
                            Some((b, bd)) => {
                                d < bd || (d == bd && (e.demo_id, e.time_index) < (b.demo_id, b.time_index))
                            }
                        };
                        if better {
                            best = Some((e, d));
                        }
                    }
                }
            });
        }
        let (e, d2) = best.expect("grid holds at least one state");
        ds.projection_of(e, d2)
    }
}

/// Visits all integer cells at Chebyshev distance exactly `ring` from `center`.
fn for_each_shell_cell(center: &[i64], ring: i64, f: &mut dyn FnMut(&Vec<i64>)) {
    let dim = center.len();
    let mut offset = vec![-ring; dim];
    let mut key = vec![0i64; dim];
    loop {
        if offset.iter().any(|o| o.abs() == ring) {
            for a in 0..dim {
                key[a] = center[a] + offset[a];
            }
            f(&key);
        }
        let mut a = 0;
        loop {
            if a == dim {
                return;
            }
            offset[a] += 1;
            if offset[a] > ring {
                offset[a] = -ring;
                a += 1;
            } else {
                break;
            }
        }
    }
}

/// Reads one demonstration table (`t,x0,x1[,...]`).
pub fn load_demo(path: &Path, id: usize) -> Result<Trajectory> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e))?;
    let headers = reader.headers().map_err(|e| Error::parse(path, e))?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(Error::parse(path, "header must be `t,x0,x1[,...]`"));
    }
    for (a, h) in headers.iter().skip(1).enumerate() {
        if h != format!("x{a}") {
            return Err(Error::parse(path, format!("unexpected column `{h}`")));
        }
    }
    let dim = headers.len() - 1;
    let mut times = Vec::new();
    let mut points = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e))?;
        let vals = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, format!("row {}: {e}", row + 1)))?;
        times.push(vals[0]);
        points.extend_from_slice(&vals[1..]);
    }
    let timestep = if times.len() >= 2 { times[1] - times[0] } else { 1.0 };
    Trajectory::from_flat(id, timestep, dim, points).map_err(|e| Error::parse(path, e))
}

pub fn save_demo(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    let mut header = vec!["t".to_string()];
    header.extend((0..traj.dim()).map(|a| format!("x{a}")));
    w.write_record(&header).map_err(|e| Error::parse(path, e))?;
    for (k, s) in traj.states().enumerate() {
        let mut row = vec![(k as f64 * traj.timestep()).to_string()];
        row.extend(s.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
