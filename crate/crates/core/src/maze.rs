//! Planar maze: vertical walls with gates, clutter, a goal disc.
//!
//! The agent is a point. Solids are axis-aligned rectangles; a move that
//! would enter one stops on the face and continues with the normal component
//! removed, so the agent slides along walls.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, State, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn state(&self) -> State {
        State::xy(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    fn lo(&self, axis: usize) -> f64 {
        [self.x_min, self.y_min][axis]
    }

    fn hi(&self, axis: usize) -> f64 {
        [self.x_max, self.y_max][axis]
    }

    /// Strict interior test.
    pub fn contains(&self, p: &[f64]) -> bool {
        p[0] > self.x_min && p[0] < self.x_max && p[1] > self.y_min && p[1] < self.y_max
    }

    /// Depth of `p` inside the rectangle (0 when outside or on the boundary).
    pub fn penetration(&self, p: &[f64]) -> f64 {
        if !self.contains(p) {
            return 0.0;
        }
        (p[0] - self.x_min)
            .min(self.x_max - p[0])
            .min(p[1] - self.y_min)
            .min(self.y_max - p[1])
    }

    /// Entry time in `[0, 1)` of the segment `p + t d` into the interior,
    /// with the axis of the face that is hit.
    fn entry(&self, p: &[f64], d: &[f64]) -> Option<(f64, usize)> {
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        let mut axis = 0;
        for a in 0..2 {
            let (lo, hi) = (self.lo(a), self.hi(a));
            if d[a] == 0.0 {
                if p[a] <= lo || p[a] >= hi {
                    return None;
                }
                continue;
            }
            let (mut t1, mut t2) = ((lo - p[a]) / d[a], (hi - p[a]) / d[a]);
            if t1 > t2 {
                std::mem::swap(&mut t1, &mut t2);
            }
            if t1 > t_enter {
                t_enter = t1;
                axis = a;
            }
            t_exit = t_exit.min(t2);
        }
        (t_enter < t_exit && t_exit > 0.0 && t_enter < 1.0 && t_enter >= 0.0).then_some((t_enter, axis))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub x: f64,
    pub y_min: f64,
    pub y_max: f64,
    #[serde(default = "default_thickness")]
    pub thickness: f64,
}

fn default_thickness() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub wall: usize,
    pub center: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl Goal {
    pub fn center(&self) -> State {
        State::xy(self.x, self.y)
    }
}

/// Layout of the unit-box maze.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeLayout {
    pub start: Point,
    pub goal: Goal,
    #[serde(default)]
    pub walls: Vec<Wall>,
    #[serde(default)]
    pub gates: Vec<Gate>,
    #[serde(default)]
    pub clutter: Vec<Rect>,
}

impl MazeLayout {
    /// Two gated walls and a cluttered goal region.
    pub fn nominal() -> Self {
        let wall = |x| Wall {
            x,
            y_min: 0.0,
            y_max: 1.0,
            thickness: 0.01,
        };
        MazeLayout {
            start: Point { x: 0.05, y: 0.1 },
            goal: Goal {
                x: 0.95,
                y: 0.9,
                radius: 0.05,
            },
            walls: vec![wall(0.35), wall(0.65)],
            gates: vec![
                Gate {
                    wall: 0,
                    center: 0.7,
                    half_width: 0.05,
                },
                Gate {
                    wall: 1,
                    center: 0.3,
                    half_width: 0.05,
                },
            ],
            clutter: vec![
                Rect {
                    x_min: 0.74,
                    x_max: 0.78,
                    y_min: 0.72,
                    y_max: 0.80,
                },
                Rect {
                    x_min: 0.86,
                    x_max: 0.90,
                    y_min: 0.55,
                    y_max: 0.62,
                },
                Rect {
                    x_min: 0.80,
                    x_max: 0.84,
                    y_min: 0.88,
                    y_max: 0.95,
                },
            ],
        }
    }

    pub fn empty() -> Self {
        MazeLayout {
            walls: vec![],
            gates: vec![],
            clutter: vec![],
            ..Self::nominal()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let layout: MazeLayout = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
        layout.validate().map_err(|e| Error::parse(path, e))?;
        Ok(layout)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("layout serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.gates.iter().enumerate() {
            let w = self
                .walls
                .get(g.wall)
                .ok_or_else(|| Error::invalid("gates.wall", format!("gate {i} names missing wall {}", g.wall)))?;
            if !(g.half_width > 0.0) {
                return Err(Error::invalid("gates.half_width", format!("gate {i} must be positive")));
            }
            if g.center - g.half_width < w.y_min - 1e-12 || g.center + g.half_width > w.y_max + 1e-12 {
                return Err(Error::invalid("gates.center", format!("gate {i} leaves its wall")));
            }
        }
        for (name, p) in [("start", self.start.state()), ("goal", self.goal.center())] {
            if !p.iter().all(|v| (0.0..=1.0).contains(v)) {
                return Err(Error::invalid(name, "outside the unit box"));
            }
            if self.solids().iter().any(|r| r.contains(&p)) {
                return Err(Error::invalid(name, "inside a wall"));
            }
        }
        if !(self.goal.radius > 0.0) {
            return Err(Error::invalid("goal.radius", "must be positive"));
        }
        Ok(())
    }

    /// Gates are wider than one agent step.
    pub fn check_gate_widths(&self, u_max: f64) -> Result<()> {
        match self.gates.iter().position(|g| g.half_width <= u_max) {
            Some(i) => Err(Error::invalid(
                "gates.half_width",
                format!("gate {i} is not wider than the step bound {u_max}"),
            )),
            None => Ok(()),
        }
    }

    /// Solid rectangles: walls minus their gate openings, then clutter.
    pub fn solids(&self) -> Vec<Rect> {
        let mut out = Vec::new();
        for (i, w) in self.walls.iter().enumerate() {
            let mut openings: Vec<(f64, f64)> = self
                .gates
                .iter()
                .filter(|g| g.wall == i)
                .map(|g| (g.center - g.half_width, g.center + g.half_width))
                .collect();
            openings.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut y = w.y_min;
            let half = w.thickness / 2.0;
            for (lo, hi) in openings.into_iter().chain(std::iter::once((w.y_max, w.y_max))) {
                if lo > y {
                    out.push(Rect {
                        x_min: w.x - half,
                        x_max: w.x + half,
                        y_min: y,
                        y_max: lo,
                    });
                }
                y = y.max(hi);
            }
        }
        out.extend(self.clutter.iter().copied());
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub position: State,
    pub step_count: usize,
    pub budget: usize,
    pub done: bool,
    pub success: bool,
}

impl EnvState {
    pub fn new(layout: &MazeLayout, budget: usize) -> Self {
        let position = layout.start.state();
        let success = at_goal(&position, layout);
        EnvState {
            position,
            step_count: 0,
            budget,
            done: success || budget == 0,
            success,
        }
    }
}

pub fn at_goal(pos: &[f64], layout: &MazeLayout) -> bool {
    dist(pos, &layout.goal.center()) <= layout.goal.radius
}

/// Moves a point by `u` against the solids; returns the end point and the
/// number of wall contacts resolved by sliding.
pub fn swept_move(from: &[f64], u: &[f64], solids: &[Rect]) -> ([f64; 2], usize) {
    let mut p = [from[0], from[1]];
    let mut d = [u[0], u[1]];
    let mut contacts = 0;
    for _ in 0..4 {
        let hit = solids
            .iter()
            .filter_map(|r| r.entry(&p, &d).map(|(t, axis)| (t, axis, r)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match hit {
            None => {
                p[0] += d[0];
                p[1] += d[1];
                break;
            }
            Some((t, axis, r)) => {
                contacts += 1;
                let face = if d[axis] > 0.0 { r.lo(axis) } else { r.hi(axis) };
                for a in 0..2 {
                    p[a] += t * d[a];
                    d[a] *= 1.0 - t;
                }
                p[axis] = face;
                d[axis] = 0.0;
            }
        }
    }
    for v in &mut p {
        *v = v.clamp(0.0, 1.0);
    }
    (p, contacts)
}

/// One environment step; also reports wall contacts.
pub fn step_with_contacts(env: &EnvState, u: &[f64], layout: &MazeLayout, solids: &[Rect]) -> (EnvState, usize) {
    if env.done {
        return (env.clone(), 0);
    }
    let (p, contacts) = swept_move(&env.position, u, solids);
    let position = State::xy(p[0], p[1]);
    let step_count = env.step_count + 1;
    let success = at_goal(&position, layout);
    let next = EnvState {
        position,
        step_count,
        budget: env.budget,
        done: success || step_count >= env.budget,
        success,
    };
    (next, contacts)
}

pub fn step(env: &EnvState, u: &[f64], layout: &MazeLayout) -> EnvState {
    step_with_contacts(env, u, layout, &layout.solids()).0
}

/// Gate offsets drawn for one perturbed layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Perturbation {
    /// Raw Gaussian draws, one per gate.
    pub raw: Vec<f64>,
    /// Offsets actually applied after keeping gates inside their walls.
    pub applied: Vec<f64>,
}

/// Shifts each gate centre by the given offset, clamped to its wall.
pub fn apply_gate_offsets(layout: &MazeLayout, offsets: &[f64]) -> (MazeLayout, Perturbation) {
    let mut out = layout.clone();
    let mut applied = Vec::with_capacity(out.gates.len());
    for (g, &off) in out.gates.iter_mut().zip(offsets) {
        let w = layout.walls[g.wall];
        let lo = w.y_min + g.half_width;
        let hi = w.y_max - g.half_width;
        let center = (g.center + off).clamp(lo.min(hi), hi.max(lo));
        applied.push(center - g.center);
        g.center = center;
    }
    (
        out,
        Perturbation {
            raw: offsets.to_vec(),
            applied,
        },
    )
}

pub fn perturb_gates(layout: &MazeLayout, sigma: f64, seed: u64) -> Result<(MazeLayout, Perturbation)> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", "must be finite and >= 0"));
    }
    if sigma == 0.0 {
        let zeros = vec![0.0; layout.gates.len()];
        return Ok(apply_gate_offsets(layout, &zeros));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let offsets: Vec<f64> = layout.gates.iter().map(|_| normal.sample(&mut rng)).collect();
    Ok(apply_gate_offsets(layout, &offsets))
}

/// Start, the centre of one gate per wall in x order, then the goal centre,
/// resampled at constant `speed` per timestep.
pub fn scripted_expert(layout: &MazeLayout, speed: f64) -> Result<Trajectory> {
    if !(speed > 0.0) {
        return Err(Error::invalid("speed", "must be positive"));
    }
    let start = layout.start.state();
    let goal = layout.goal.center();
    let (x_lo, x_hi) = (start[0].min(goal[0]), start[0].max(goal[0]));
    let mut walls: Vec<usize> = (0..layout.walls.len())
        .filter(|&i| layout.walls[i].x > x_lo && layout.walls[i].x < x_hi)
        .collect();
    walls.sort_by(|&a, &b| layout.walls[a].x.total_cmp(&layout.walls[b].x));
    if goal[0] < start[0] {
        walls.reverse();
    }
    let mut waypoints = vec![start.into_inner()];
    for i in walls {
        let current = waypoints.last().unwrap().clone();
        let gate = layout
            .gates
            .iter()
            .filter(|g| g.wall == i)
            .min_by(|a, b| {
                let da = dist(&current, &[layout.walls[i].x, a.center]) + dist(&[layout.walls[i].x, a.center], &goal);
                let db = dist(&current, &[layout.walls[i].x, b.center]) + dist(&[layout.walls[i].x, b.center], &goal);
                da.total_cmp(&db)
            })
            .ok_or_else(|| Error::Infeasible(format!("wall {i} has no gate")))?;
        waypoints.push(vec![layout.walls[i].x, gate.center]);
    }
    waypoints.push(goal.into_inner());
    let states = resample(&waypoints, speed);
    Trajectory::new(0, 1.0, &states)
}

fn resample(waypoints: &[Vec<f64>], speed: f64) -> Vec<State> {
    let mut cumulative = vec![0.0];
    for w in waypoints.windows(2) {
        cumulative.push(cumulative.last().unwrap() + dist(&w[0], &w[1]));
    }
    let total = *cumulative.last().unwrap();
    let n = (total / speed).floor() as usize;
    let mut out = Vec::with_capacity(n + 2);
    let mut seg = 0;
    for k in 0..=n {
        let s = k as f64 * speed;
        while seg + 1 < waypoints.len() - 1 && cumulative[seg + 1] < s {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let f = if len > 0.0 {
            ((s - cumulative[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (a, b) = (&waypoints[seg], &waypoints[seg + 1]);
        out.push(State::new(a.iter().zip(b).map(|(x, y)| x + f * (y - x)).collect()));
    }
    let last = waypoints.last().unwrap();
    if out.last().map_or(true, |p| dist(p, last) > 1e-12) {
        out.push(State::new(last.clone()));
    }
    if out.len() < 2 {
        out.push(State::new(last.clone()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_move_is_exact() {
        let layout = MazeLayout::nominal();
        let env = EnvState::new(&layout, 1000);
        let next = step(&env, &[0.01, 0.015], &layout);
        assert_eq!(next.position.coords(), &[0.05 + 0.01, 0.1 + 0.015]);
        assert_eq!(next.step_count, 1);
        assert!(!next.done);
    }

    #[test]
    fn head_on_move_slides() {
        let layout = MazeLayout::nominal();
        let mut env = EnvState::new(&layout, 1000);
        env.position = State::xy(0.34, 0.3);
        let next = step(&env, &[0.02, 0.01], &layout);
        // Face of the first wall is at x = 0.345.
        assert_eq!(next.position[0], 0.345);
        assert!((next.position[1] - 0.31).abs() < 1e-15);
        let pure = step(&env, &[0.02, 0.0], &layout);
        assert_eq!(pure.position.coords(), &[0.345, 0.3]);
        // Against the face, moving into the wall again goes nowhere.
        let again = step(&pure, &[0.02, 0.0], &layout);
        assert_eq!(again.position.coords(), &[0.345, 0.3]);
    }

    #[test]
    fn gate_passage() {
        let layout = MazeLayout::nominal();
        let mut env = EnvState::new(&layout, 1000);
        env.position = State::xy(0.34, 0.7);
        let next = step(&env, &[0.02, 0.0], &layout);
        assert!((next.position[0] - 0.36).abs() < 1e-15 && next.position[1] == 0.7);
    }

    #[test]
    fn goal_boundary_inclusive() {
        let mut layout = MazeLayout::nominal();
        // Dyadic values keep the boundary distance exact.
        layout.goal = Goal {
            x: 0.5,
            y: 0.5,
            radius: 0.25,
        };
        assert!(at_goal(&[0.5, 0.5], &layout));
        assert!(at_goal(&[0.75, 0.5], &layout));
        assert!(!at_goal(&[0.75 + 1e-6, 0.5], &layout));
    }

    #[test]
    fn budget_ends_episode() {
        let layout = MazeLayout::nominal();
        let env = EnvState::new(&layout, 2);
        let a = step(&env, &[0.0, 0.01], &layout);
        assert!(!a.done);
        let b = step(&a, &[0.0, 0.01], &layout);
        assert!(b.done && !b.success);
        assert!(EnvState::new(&layout, 0).done);
    }

    #[test]
    fn solids_split_around_gates() {
        let layout = MazeLayout::nominal();
        let solids = layout.solids();
        assert_eq!(solids.len(), 4 + 3);
        assert_eq!(solids[0].y_min, 0.0);
        assert!((solids[0].y_max - 0.65).abs() < 1e-12);
        assert!((solids[1].y_min - 0.75).abs() < 1e-12 && solids[1].y_max == 1.0);
    }

    #[test]
    fn perturbation_zero_sigma_and_determinism() {
        let layout = MazeLayout::nominal();
        let (same, p) = perturb_gates(&layout, 0.0, 3).unwrap();
        assert_eq!(same, layout);
        assert_eq!(p.applied, vec![0.0, 0.0]);
        let a = perturb_gates(&layout, 0.05, 11).unwrap();
        let b = perturb_gates(&layout, 0.05, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn offsets_clamped_to_wall() {
        let layout = MazeLayout::nominal();
        let (out, p) = apply_gate_offsets(&layout, &[0.5, -0.5]);
        assert!((out.gates[0].center - 0.95).abs() < 1e-12);
        assert!((out.gates[1].center - 0.05).abs() < 1e-12);
        assert_eq!(p.raw, vec![0.5, -0.5]);
        assert!(out.validate().is_ok());
    }

    #[test]
    fn expert_paths() {
        let straight = scripted_expert(&MazeLayout::empty(), 0.01).unwrap();
        let (s, g) = (straight.state(0), straight.state(straight.len() - 1));
        assert_eq!(s, &[0.05, 0.1]);
        assert_eq!(g, &[0.95, 0.9]);
        for x in straight.states() {
            // collinear with start and goal
            let cross = (x[0] - s[0]) * (g[1] - s[1]) - (x[1] - s[1]) * (g[0] - s[0]);
            assert!(cross.abs() < 1e-12);
        }

        let mut one = MazeLayout::empty();
        one.walls.push(Wall {
            x: 0.5,
            y_min: 0.0,
            y_max: 1.0,
            thickness: 0.01,
        });
        one.gates.push(Gate {
            wall: 0,
            center: 0.2,
            half_width: 0.05,
        });
        let t = scripted_expert(&one, 0.01).unwrap();
        let via = [0.5, 0.2];
        let closest = t.states().map(|x| dist(x, &via)).fold(f64::INFINITY, f64::min);
        assert!(closest <= 0.005 + 1e-12);
        let on_segment = |x: &[f64], a: &[f64], b: &[f64]| {
            ((x[0] - a[0]) * (b[1] - a[1]) - (x[1] - a[1]) * (b[0] - a[0])).abs() < 1e-12
        };
        for x in t.states() {
            assert!(on_segment(x, &[0.05, 0.1], &via) || on_segment(x, &via, &[0.95, 0.9]));
        }

        one.gates.clear();
        assert!(matches!(scripted_expert(&one, 0.01), Err(Error::Infeasible(_))));
    }

    #[test]
    fn layout_toml_round_trip() {
        let layout = MazeLayout::nominal();
        let back: MazeLayout = toml::from_str(&layout.to_toml()).unwrap();
        assert_eq!(back, layout);
    }
}
