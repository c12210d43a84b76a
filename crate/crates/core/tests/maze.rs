use std::path::Path;

use ergodic_imitation::maze::{
    apply_gate_offsets, perturb_gates, scripted_expert, step, step_with_contacts, swept_move, EnvState, Gate, Goal,
    MazeLayout, Point, Rect, Wall,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_layout(rng: &mut ChaCha8Rng) -> MazeLayout {
    let n_walls = rng.gen_range(1..4);
    let mut walls = Vec::new();
    let mut gates = Vec::new();
    for i in 0..n_walls {
        let x = 0.2 + 0.6 * (i as f64 + rng.gen_range(0.1..0.9)) / n_walls as f64;
        walls.push(Wall {
            x,
            y_min: 0.0,
            y_max: 1.0,
            thickness: rng.gen_range(0.005..0.03),
        });
        gates.push(Gate {
            wall: i,
            center: rng.gen_range(0.15..0.85),
            half_width: rng.gen_range(0.03..0.1),
        });
    }
    let clutter = (0..rng.gen_range(0..4))
        .map(|_| {
            let (x, y) = (rng.gen_range(0.05..0.9), rng.gen_range(0.05..0.9));
            Rect {
                x_min: x,
                x_max: x + rng.gen_range(0.01..0.08),
                y_min: y,
                y_max: y + rng.gen_range(0.01..0.08),
            }
        })
        .collect();
    MazeLayout {
        start: Point { x: 0.02, y: 0.02 },
        goal: Goal {
            x: 2.0,
            y: 2.0,
            radius: 0.01,
        },
        walls,
        gates,
        clutter,
    }
}

#[test]
fn random_moves_never_penetrate() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut moves = 0;
    while moves < 100_000 {
        let layout = random_layout(&mut rng);
        let solids = layout.solids();
        let mut env = EnvState::new(&layout, usize::MAX);
        if solids.iter().any(|s| s.contains(&env.position)) {
            continue;
        }
        for _ in 0..1000 {
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let len = rng.gen_range(0.0..0.03);
            env = step_with_contacts(&env, &[len * angle.cos(), len * angle.sin()], &layout, &solids).0;
            for s in &solids {
                assert!(s.penetration(&env.position) <= 1e-9, "{:?} inside {s:?}", env.position);
            }
            assert!(env.position.iter().all(|v| (0.0..=1.0).contains(v)));
            moves += 1;
        }
    }
}

#[test]
fn expert_replay_reaches_goal_without_contact() {
    let layout = MazeLayout::nominal();
    let solids = layout.solids();
    let demo = scripted_expert(&layout, 0.01).unwrap();
    let mut env = EnvState::new(&layout, 1000);
    let mut contacts = 0;
    for k in 1..demo.len() {
        let (a, b) = (demo.state(k - 1), demo.state(k));
        let (next, c) = step_with_contacts(&env, &[b[0] - a[0], b[1] - a[1]], &layout, &solids);
        env = next;
        contacts += c;
    }
    assert_eq!(contacts, 0);
    assert!(env.success);
}

fn replay(layout: &MazeLayout, demo: &ergodic_imitation::geometry::Trajectory) -> EnvState {
    let mut env = EnvState::new(layout, 1000);
    for k in 1..demo.len() {
        let (a, b) = (demo.state(k - 1), demo.state(k));
        env = step(&env, &[b[0] - a[0], b[1] - a[1]], layout);
    }
    env
}

#[test]
fn blocked_replay_never_reaches_goal() {
    let nominal = MazeLayout::nominal();
    let demo = scripted_expert(&nominal, 0.01).unwrap();
    // Shifts away from the demo's turn: the replay meets the wall on the far
    // side of the opening from where it is heading next.
    for offsets in [[0.08, 0.0], [0.0, -0.08], [0.1, -0.1], [0.06, 0.0]] {
        let (layout, _) = apply_gate_offsets(&nominal, &offsets);
        assert!(!replay(&layout, &demo).success, "offsets {offsets:?}");
    }
    // Shifts toward the turn are not blocking: the outgoing leg slides along
    // the wall face into the opening.
    for offsets in [[-0.08, 0.0], [0.0, 0.08]] {
        let (layout, _) = apply_gate_offsets(&nominal, &offsets);
        assert!(replay(&layout, &demo).success, "offsets {offsets:?}");
    }
}

#[test]
fn perturbation_spread_matches_sigma() {
    let nominal = MazeLayout::nominal();
    let mut draws = Vec::new();
    for seed in 0..5_000 {
        let (_, p) = perturb_gates(&nominal, 0.05, seed).unwrap();
        draws.extend(p.raw);
    }
    assert_eq!(draws.len(), 10_000);
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let std = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
    assert!((0.045..=0.055).contains(&std), "std {std}");

    let (same, p) = perturb_gates(&nominal, 0.0, 3).unwrap();
    assert_eq!(same, nominal);
    assert!(p.applied.iter().all(|&v| v == 0.0));
}

#[test]
fn perturbed_gates_stay_on_their_walls() {
    let nominal = MazeLayout::nominal();
    for seed in 0..500 {
        let (layout, p) = perturb_gates(&nominal, 0.5, seed).unwrap();
        for g in &layout.gates {
            let w = layout.walls[g.wall];
            assert!(g.center - g.half_width >= w.y_min - 1e-12 && g.center + g.half_width <= w.y_max + 1e-12);
        }
        assert!(layout.validate().is_ok());
        for (raw, applied) in p.raw.iter().zip(&p.applied) {
            assert!(applied.abs() <= raw.abs() + 1e-12);
        }
    }
}

/// Straight segment from `a` to `b` meets the open rectangle (sampled finely).
fn segment_hits(a: [f64; 2], b: [f64; 2], r: &Rect) -> bool {
    (0..=10_000).any(|i| {
        let t = i as f64 / 10_000.0;
        r.contains(&[a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
    })
}

#[test]
fn free_moves_are_exact_and_blocked_moves_slide() {
    let layout = MazeLayout::nominal();
    let solids = layout.solids();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20_000 {
        let a = [rng.gen_range(0.3..0.4), rng.gen_range(0.55..0.85)];
        if solids.iter().any(|s| s.contains(&a)) {
            continue;
        }
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let u = [0.02 * angle.cos(), 0.02 * angle.sin()];
        let b = [a[0] + u[0], a[1] + u[1]];
        let (end, contacts) = swept_move(&a, &u, &solids);
        let blocked = solids.iter().any(|s| segment_hits(a, b, s));
        if !blocked {
            assert_eq!(contacts, 0);
            assert_eq!(end, b);
        } else {
            assert!(contacts > 0);
            // The move never gains ground against the face it hits.
            let moved = ((end[0] - a[0]).powi(2) + (end[1] - a[1]).powi(2)).sqrt();
            assert!(moved <= 0.02 + 1e-12);
        }
    }
}

#[test]
fn head_on_slide_keeps_tangential_part() {
    let layout = MazeLayout::nominal();
    // Face of wall 0 at x = 0.345, below the gate.
    let start = EnvState {
        position: ergodic_imitation::geometry::State::xy(0.34, 0.3),
        ..EnvState::new(&layout, 100)
    };
    let env = step(&start, &[0.015, 0.01], &layout);
    assert!((env.position[0] - 0.345).abs() < 1e-12);
    assert!((env.position[1] - 0.31).abs() < 1e-12);
}

#[test]
fn shipped_layout_is_nominal() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/nominal_layout.toml");
    assert_eq!(MazeLayout::load(&path).unwrap(), MazeLayout::nominal());
}
