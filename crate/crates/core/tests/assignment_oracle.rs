mod common;

use proptest::prelude::*;

use tracklet_fuse::assignment::{assignment_cost, solve_assignment, INFEASIBLE};
use tracklet_fuse::eval::brute_force_assignment;
use tracklet_fuse::model::{PitchPos, TimeStamp};
use tracklet_fuse::tracklets::{gated_cost_matrix, TrackPoint, TrackerParams};

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (0usize..=7, 0usize..=7).prop_flat_map(|(n, m)| {
        let cell = prop_oneof![1 => Just(INFEASIBLE), 4 => (0u32..12).prop_map(f64::from)];
        prop::collection::vec(prop::collection::vec(cell, m), n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn hungarian_matches_exhaustive_search(cost in matrix(), ntc in 0u32..15) {
        let ntc = f64::from(ntc);
        let fast = solve_assignment(&cost, ntc);
        let slow = brute_force_assignment(&cost, ntc).unwrap();
        prop_assert_eq!(fast.cost, slow.cost);
        // both report the lexicographically first optimum
        prop_assert_eq!(&fast.rows, &slow.rows);
    }

    #[test]
    fn solution_is_a_feasible_matching(cost in matrix(), ntc in 0u32..15) {
        let ntc = f64::from(ntc);
        let a = solve_assignment(&cost, ntc);
        let cols = cost.first().map_or(0, Vec::len);
        let mut used = vec![false; cols];
        for (i, j) in a.pairs() {
            prop_assert!(cost[i][j].is_finite());
            prop_assert!(!used[j]);
            used[j] = true;
        }
        prop_assert_eq!(a.cost, assignment_cost(&cost, cols, &a.rows, ntc));
    }

    #[test]
    fn wider_gate_never_costs_more(
        tracks in prop::collection::vec(((0.0f64..50.0, 0.0f64..50.0), (-3.0f64..3.0, -3.0f64..3.0)), 1..6),
        obs in prop::collection::vec((0.0f64..50.0, 0.0f64..50.0), 0..6),
        speed in 0.5f64..12.0,
        extra in 0.0f64..10.0,
        ntc in 1.0f64..20.0,
    ) {
        let histories: Vec<Vec<TrackPoint>> = tracks
            .iter()
            .map(|&((x, y), (dx, dy))| vec![
                TrackPoint { t: TimeStamp(0), pos: PitchPos::new(x - dx, y - dy) },
                TrackPoint { t: TimeStamp(100), pos: PitchPos::new(x, y) },
            ])
            .collect();
        let active: Vec<&[TrackPoint]> = histories.iter().map(Vec::as_slice).collect();
        let observations: Vec<PitchPos> = obs.iter().map(|&(x, y)| PitchPos::new(x, y)).collect();
        let narrow = TrackerParams { gate_speed_mps: speed, ..TrackerParams::default() };
        let wide = TrackerParams { gate_speed_mps: speed + extra, ..TrackerParams::default() };
        let now = TimeStamp(400);
        let c_narrow = solve_assignment(&gated_cost_matrix(&active, &observations, now, &narrow), ntc).cost;
        let c_wide = solve_assignment(&gated_cost_matrix(&active, &observations, now, &wide), ntc).cost;
        prop_assert!(c_wide <= c_narrow + 1e-9);
    }
}

#[test]
fn thousand_seeded_matrices_agree_exactly() {
    let mut rng = common::rng(2024);
    for case in 0..1000 {
        use rand::Rng;
        let (n, m) = (rng.random_range(1..=7), rng.random_range(1..=7));
        let cost = common::random_costs(&mut rng, n, m);
        let ntc = rng.random_range(0..15) as f64;
        let fast = solve_assignment(&cost, ntc);
        let slow = brute_force_assignment(&cost, ntc).unwrap();
        assert_eq!(fast.cost, slow.cost, "case {case}: {cost:?} ntc {ntc}");
    }
}

#[test]
fn worked_three_by_three() {
    let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
    // permutations: 4+0+2=6, 1+2+2=5, 3+2+2=7, 4+5+2=11, 1+5+3=9, 3+0+3=6
    assert_eq!(brute_force_assignment(&cost, 100.0).unwrap().cost, 5.0);
    let a = solve_assignment(&cost, 100.0);
    assert_eq!(a.cost, 5.0);
    assert_eq!(a.rows, vec![Some(1), Some(0), Some(2)]);
}

#[test]
fn oracle_refuses_large_problems() {
    let cost = vec![vec![0.0; 9]; 2];
    assert!(brute_force_assignment(&cost, 1.0).is_err());
}
