//! Built-in invariant and oracle suite behind the `check` subcommand.
//!
//! Every check compares library output against an independent computation
//! (finite differences, brute force, quadrature, a direct transcription of a
//! rule) on seeded random instances.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{dist_sq, DemoDataset, Projection, State, Trajectory};
use crate::maze::{step, EnvState, MazeLayout, Rect};
use crate::phase::{update, PhaseConfig, PhaseState};
use crate::planner::{mmd_sq, objective, objective_gradient, CoverageMemory, PlannerConfig};
use crate::target::{anisotropic_increment, envelope, kernel_score, ParticleSet};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_states(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<State> {
    (0..n)
        .map(|_| State::xy(rng.gen_range(lo..hi), rng.gen_range(lo..hi)))
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

pub fn check_mmd() -> CheckResult {
    let mut r = rng(1);
    let mut worst_self = 0.0f64;
    let mut worst_neg = 0.0f64;
    for _ in 0..20 {
        let s = random_states(&mut r, 12, 0.0, 1.0);
        let ps = ParticleSet::from_states(&s, 0);
        worst_self = worst_self.max(mmd_sq(&s, &ps, 0.1).unwrap_or(f64::INFINITY).abs());
        let t = random_states(&mut r, 7, 0.0, 1.0);
        worst_neg = worst_neg.min(mmd_sq(&t, &ps, 0.1).unwrap_or(f64::NEG_INFINITY));
    }
    let single = ParticleSet::from_states(&[State::xy(0.0, 0.05)], 0);
    let hand = 2.0 - 2.0 * (-0.5f64).exp();
    let got = mmd_sq(&[State::xy(0.0, 0.0)], &single, 0.05).unwrap_or(f64::NAN);
    let passed = worst_self <= 1e-12 && worst_neg >= -1e-12 && (got - hand).abs() <= 1e-12;
    result(
        "mmd",
        passed,
        format!(
            "max |mmd(S,S)| {worst_self:.1e}, min mmd {worst_neg:.1e}, hand case error {:.1e}",
            (got - hand).abs()
        ),
    )
}

pub fn check_gradient() -> CheckResult {
    let mut r = rng(2);
    let cfg = PlannerConfig {
        horizon: 5,
        exec_steps: 1,
        memory_len: 3,
        ..PlannerConfig::default()
    };
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let x0 = [r.gen_range(0.4..0.6), r.gen_range(0.4..0.6)];
        let target = ParticleSet::from_states(&random_states(&mut r, 8, 0.35, 0.65), 0);
        let mut memory = CoverageMemory::new(cfg.memory_len, 2);
        memory.push(&random_states(&mut r, 4, 0.35, 0.65));
        let controls: Vec<f64> = (0..cfg.horizon * 2).map(|_| r.gen_range(-0.02..0.02)).collect();
        let Ok(analytic) = objective_gradient(&controls, &x0, &memory, &target, &cfg) else {
            return result("planner gradient", false, "gradient evaluation failed".into());
        };
        let f = |c: &[f64]| {
            objective(c, &x0, &memory, &target, &cfg)
                .map(|t| t.total())
                .unwrap_or(f64::NAN)
        };
        let eps = 1e-6;
        let numeric: Vec<f64> = (0..controls.len())
            .map(|i| {
                let mut up = controls.clone();
                let mut down = controls.clone();
                up[i] += eps;
                down[i] -= eps;
                (f(&up) - f(&down)) / (2.0 * eps)
            })
            .collect();
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    result(
        "planner gradient",
        worst <= 1e-5,
        format!("max relative error {worst:.1e}"),
    )
}

pub fn check_score() -> CheckResult {
    let mut r = rng(3);
    let h = 0.03;
    let states = random_states(&mut r, 30, 0.2, 0.8);
    let Ok(traj) = Trajectory::new(0, 1.0, &states) else {
        return result("kernel score", false, "trajectory construction failed".into());
    };
    let log_p = |q: &[f64]| {
        states
            .iter()
            .map(|x| (-dist_sq(q, x) / (2.0 * h * h)).exp())
            .sum::<f64>()
            .ln()
    };
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = &states[r.gen_range(0..states.len())];
        let q = [x[0] + r.gen_range(-0.05..0.05), x[1] + r.gen_range(-0.05..0.05)];
        let Ok(score) = kernel_score(&q, &traj, h) else {
            return result("kernel score", false, "score evaluation failed".into());
        };
        let eps = 1e-6;
        let numeric: Vec<f64> = (0..2)
            .map(|a| {
                let mut up = q;
                let mut down = q;
                up[a] += eps;
                down[a] -= eps;
                (log_p(&up) - log_p(&down)) / (2.0 * eps)
            })
            .collect();
        worst = worst.max(rel_err(&score, &numeric));
    }
    result("kernel score", worst <= 1e-4, format!("max relative error {worst:.1e}"))
}

pub fn check_envelope() -> CheckResult {
    let (a, b) = (1.3, 0.1);
    let peak_ok = envelope(0.0, a, b).is_ok_and(|v| v == a / (2.0 * b));
    // Composite Simpson on each half, where the integrand is smooth.
    let n = 20_000;
    let half = 20.0 * b;
    let dx = half / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * envelope(i as f64 * dx, a, b).unwrap_or(f64::NAN);
    }
    let integral = 2.0 * sum * dx / 3.0;
    let passed = peak_ok && (integral - a).abs() <= 1e-6;
    result(
        "envelope",
        passed,
        format!("peak exact: {peak_ok}, integral error {:.1e}", (integral - a).abs()),
    )
}

pub fn check_phase() -> CheckResult {
    let cfg = PhaseConfig::default();
    let mut r = rng(4);
    let mut phase = PhaseState::default();
    let (mut tau, mut c) = (0.0f64, 0u32);
    for i in 0..1000 {
        let t = r.gen_range(0..200usize);
        let proj = Projection {
            demo_id: 0,
            time_index: t,
            point: State::xy(0.0, 0.0),
            distance: 0.0,
            arc_s: 0.0,
        };
        phase = update(&phase, &proj, &cfg);
        tau = tau.max(t as f64);
        if tau - t as f64 <= cfg.epsilon {
            tau += cfg.clock_rate;
            c = 0;
        } else {
            c += 1;
        }
        if phase.tau != tau || phase.c != c {
            return result("phase rules", false, format!("diverged at step {i}"));
        }
    }
    result("phase rules", true, "1000 random steps match".into())
}

pub fn check_retrieval() -> CheckResult {
    let mut r = rng(5);
    let demos: Vec<Trajectory> = (0..3)
        .filter_map(|i| Trajectory::new(i, 1.0, &random_states(&mut r, 300, 0.0, 1.0)).ok())
        .collect();
    let Ok(ds) = DemoDataset::new(demos).and_then(|d| d.with_grid(0.05)) else {
        return result("retrieval", false, "dataset construction failed".into());
    };
    let mut mismatches = 0;
    for _ in 0..500 {
        let q = [r.gen_range(-0.2..1.2), r.gen_range(-0.2..1.2)];
        let grid = ds.nearest(&q);
        // Brute force over every state, first minimum in (demo, index) order.
        let mut best = (f64::INFINITY, 0, 0);
        for d in ds.demos() {
            for (k, x) in d.states().enumerate() {
                let d2 = dist_sq(&q, x);
                if d2 < best.0 {
                    best = (d2, d.id(), k);
                }
            }
        }
        match grid {
            Ok(p) if p.demo_id == best.1 && p.time_index == best.2 => {}
            _ => mismatches += 1,
        }
    }
    result(
        "retrieval",
        mismatches == 0,
        format!("{mismatches} mismatches in 500 queries"),
    )
}

pub fn check_collisions() -> CheckResult {
    let mut r = rng(6);
    let layout = MazeLayout::nominal();
    let solids: Vec<Rect> = layout.solids();
    let mut env = EnvState::new(&layout, usize::MAX);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let angle: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        let len = r.gen_range(0.0..0.02);
        env = step(&env, &[len * angle.cos(), len * angle.sin()], &layout);
        env.done = false;
        for s in &solids {
            worst = worst.max(s.penetration(&env.position));
        }
    }
    result("collisions", worst <= 1e-9, format!("max penetration {worst:.1e}"))
}

pub fn check_anisotropy() -> CheckResult {
    let states: Vec<State> = (0..11).map(|i| State::xy(i as f64 * 0.1, 0.5)).collect();
    let Ok(traj) = Trajectory::new(0, 1.0, &states) else {
        return result("anisotropy", false, "trajectory construction failed".into());
    };
    let mut r = rng(7);
    let (mut par, mut perp) = (0.0, 0.0);
    let n = 20_000;
    for _ in 0..n {
        let dx = anisotropic_increment(&[0.5, 0.5], &traj, 0.002, 0.02, 0.01, &mut r);
        par += dx[0] * dx[0];
        perp += dx[1] * dx[1];
    }
    let ratio = perp / par;
    result(
        "anisotropy",
        (8.0..=12.0).contains(&ratio),
        format!("variance ratio {ratio:.2}"),
    )
}

/// Runs every check in order.
pub fn run_checks() -> Vec<CheckResult> {
    vec![
        check_mmd(),
        check_gradient(),
        check_score(),
        check_envelope(),
        check_phase(),
        check_retrieval(),
        check_collisions(),
        check_anisotropy(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_checks() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
