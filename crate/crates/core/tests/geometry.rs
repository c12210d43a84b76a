use ergodic_imitation::geometry::{
    build_arc_table, nearest_in_dataset, project_to_trajectory, tangent_at, DemoDataset, State, Trajectory,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_traj(rng: &mut ChaCha8Rng, id: usize, n: usize) -> Trajectory {
    let states: Vec<State> = (0..n).map(|_| State::xy(rng.gen(), rng.gen())).collect();
    Trajectory::new(id, 1.0, &states).unwrap()
}

#[test]
fn arc_table_matches_segment_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let states: Vec<(f64, f64)> = (0..10).map(|_| (rng.gen(), rng.gen())).collect();
    let traj = Trajectory::new(
        0,
        1.0,
        &states.iter().map(|&(x, y)| State::xy(x, y)).collect::<Vec<_>>(),
    )
    .unwrap();
    let table = build_arc_table(&traj).unwrap();
    let mut acc = 0.0;
    assert_eq!(table.at(0), 0.0);
    for k in 1..states.len() {
        let (dx, dy) = (states[k].0 - states[k - 1].0, states[k].1 - states[k - 1].1);
        acc += (dx * dx + dy * dy).sqrt();
        assert!((table.at(k) - acc).abs() < 1e-12);
    }
}

/// Brute force over (demo, index) in order, first strict minimum wins.
fn brute_nearest(q: &[f64], demos: &[Trajectory]) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for (d, traj) in demos.iter().enumerate() {
        for k in 0..traj.len() {
            let x = traj.state(k);
            let d2 = (q[0] - x[0]).powi(2) + (q[1] - x[1]).powi(2);
            if d2 < best.2 {
                best = (d, k, d2);
            }
        }
    }
    best
}

#[test]
fn retrieval_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let demos: Vec<Trajectory> = (0..4).map(|i| random_traj(&mut rng, i, 250)).collect();
    let scan = DemoDataset::new(demos.clone()).unwrap();
    let grid = DemoDataset::new(demos.clone()).unwrap().with_grid(0.07).unwrap();
    for _ in 0..100 {
        let q = [rng.gen_range(-0.1..1.1), rng.gen_range(-0.1..1.1)];
        let (d, k, d2) = brute_nearest(&q, &demos);
        for ds in [&scan, &grid] {
            let p = nearest_in_dataset(&q, ds).unwrap();
            assert_eq!((p.demo_id, p.time_index), (d, k));
            assert!((p.distance - d2.sqrt()).abs() < 1e-12);
        }
    }
}

#[test]
fn grid_keeps_tie_rule() {
    // Duplicate states across demos: the lower demo id must win.
    let states = vec![State::xy(0.2, 0.2), State::xy(0.6, 0.6), State::xy(0.2, 0.2)];
    let a = Trajectory::new(0, 1.0, &states).unwrap();
    let b = Trajectory::new(1, 1.0, &states).unwrap();
    let ds = DemoDataset::new(vec![a, b]).unwrap().with_grid(0.1).unwrap();
    let p = ds.nearest(&[0.21, 0.2]).unwrap();
    assert_eq!((p.demo_id, p.time_index), (0, 0));
}

#[test]
fn exact_match_and_symmetric_tie() {
    let ds = DemoDataset::new(vec![Trajectory::new(
        0,
        1.0,
        &[State::xy(0.0, 0.0), State::xy(1.0, 1.0)],
    )
    .unwrap()])
    .unwrap();
    let p = ds.nearest(&[0.5, 0.5]).unwrap();
    assert_eq!(p.time_index, 0);
    let p = ds.nearest(&[1.0, 1.0]).unwrap();
    assert_eq!((p.time_index, p.distance), (1, 0.0));
    assert!(ds.nearest(&[0.5]).is_err());
    assert!(DemoDataset::new(vec![]).is_err());
}

#[test]
fn eleven_state_line_projection() {
    let states: Vec<State> = (0..=10).map(|i| State::xy(i as f64 / 10.0, 0.0)).collect();
    let traj = Trajectory::new(0, 1.0, &states).unwrap();
    let p = project_to_trajectory(&[0.32, 0.2], &traj).unwrap();
    // Independent brute force over the 11 states.
    let best = (0..=10)
        .map(|i| (i, ((0.32 - i as f64 / 10.0).powi(2) + 0.04f64).sqrt()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert_eq!(p.time_index, best.0);
    assert_eq!(p.time_index, 3);
    assert!((p.distance - best.1).abs() < 1e-12);
    assert!((p.distance - 0.2010).abs() < 1e-4);
}

#[test]
fn tangent_along_negative_y() {
    let states: Vec<State> = (0..5).map(|i| State::xy(0.5, 1.0 - i as f64 * 0.1)).collect();
    let traj = Trajectory::new(0, 1.0, &states).unwrap();
    for k in 0..5 {
        let t = tangent_at(&traj, k).unwrap();
        assert!(t[0].abs() < 1e-12 && (t[1] + 1.0).abs() < 1e-12);
    }
    let same = Trajectory::new(0, 1.0, &[State::xy(0.3, 0.3), State::xy(0.3, 0.3)]).unwrap();
    assert!(tangent_at(&same, 0).is_err());
}

fn rotate(p: &[f64], angle: f64) -> State {
    let (s, c) = angle.sin_cos();
    State::xy(c * p[0] - s * p[1], s * p[0] + c * p[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arc_differences_are_pairwise_distances(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30)) {
        let states: Vec<State> = pts.iter().map(|&(x, y)| State::xy(x, y)).collect();
        let traj = Trajectory::new(0, 1.0, &states).unwrap();
        let table = build_arc_table(&traj).unwrap();
        for k in 1..pts.len() {
            let d = ((pts[k].0 - pts[k - 1].0).powi(2) + (pts[k].1 - pts[k - 1].1).powi(2)).sqrt();
            prop_assert!((table.at(k) - table.at(k - 1) - d).abs() < 1e-12);
        }
    }

    #[test]
    fn tangents_are_unit(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30), idx in 0usize..30) {
        let states: Vec<State> = pts.iter().map(|&(x, y)| State::xy(x, y)).collect();
        let traj = Trajectory::new(0, 1.0, &states).unwrap();
        if let Ok(t) = tangent_at(&traj, idx % pts.len()) {
            prop_assert!(((t[0] * t[0] + t[1] * t[1]).sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_invariant_under_rotation(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30),
        q in (0.0f64..1.0, 0.0f64..1.0),
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let states: Vec<State> = pts.iter().map(|&(x, y)| State::xy(x, y)).collect();
        let rotated: Vec<State> = states.iter().map(|s| rotate(s, angle)).collect();
        let a = DemoDataset::new(vec![Trajectory::new(0, 1.0, &states).unwrap()]).unwrap();
        let b = DemoDataset::new(vec![Trajectory::new(0, 1.0, &rotated).unwrap()]).unwrap();
        let pa = a.nearest(&[q.0, q.1]).unwrap();
        let pb = b.nearest(&rotate(&[q.0, q.1], angle)).unwrap();
        prop_assert!((pa.distance - pb.distance).abs() < 1e-9);
    }

    #[test]
    fn grid_equals_scan(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..60),
        q in (-0.5f64..1.5, -0.5f64..1.5),
        cell in 0.01f64..0.5,
    ) {
        let states: Vec<State> = pts.iter().map(|&(x, y)| State::xy(x, y)).collect();
        let traj = Trajectory::new(0, 1.0, &states).unwrap();
        let scan = DemoDataset::new(vec![traj.clone()]).unwrap();
        let grid = DemoDataset::new(vec![traj]).unwrap().with_grid(cell).unwrap();
        let a = scan.nearest(&[q.0, q.1]).unwrap();
        let b = grid.nearest(&[q.0, q.1]).unwrap();
        prop_assert_eq!((a.demo_id, a.time_index), (b.demo_id, b.time_index));
    }
}
