use demospeedup::accelerate::{
    accelerate_dataset, awe_star_indices, constant_indices, path_speedup, piecewise_indices, speedup_stats,
    write_accelerated, AccelerationConfig,
};
use demospeedup::entropy::EntropySeries;
use demospeedup::segment::PrecisionLabeling;
use demospeedup::testkit::brute_force_awe;
use demospeedup::{load_dataset, Dataset, Trajectory};
use proptest::prelude::*;

fn mask_strategy(max_len: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec((any::<bool>(), 1usize..25), 1..8).prop_map(move |runs| {
        let mut mask: Vec<bool> = runs.iter().flat_map(|&(p, n)| std::iter::repeat_n(p, n)).collect();
        mask.truncate(max_len);
        mask
    })
}

fn speedup(mask: &[bool], r_low: usize, r_high: usize) -> f64 {
    let lab = PrecisionLabeling::from_mask("m", mask);
    let cfg = AccelerationConfig { r_low, r_high, k_acc: 1 };
    path_speedup("m", mask.len(), &piecewise_indices(1, mask.len(), &lab, &cfg)).ratio
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn speedup_is_bounded(mask in mask_strategy(150), r_low in 1usize..4, extra in 0usize..5) {
        let r_high = r_low + extra;
        let s = speedup(&mask, r_low, r_high);
        prop_assert!((1.0..=r_high as f64).contains(&s), "speedup {}", s);
        if r_high > r_low {
            // with equal rates every labeling steps at r_high
            let exact = mask.iter().all(|p| !p) && (mask.len() - 1) % r_high == 0 && mask.len() > 1;
            prop_assert_eq!(s == r_high as f64, exact);
        }
    }

    #[test]
    fn equal_rates_match_constant_stepping(mask in mask_strategy(120), r in 1usize..7, pick in any::<prop::sample::Index>()) {
        let lab = PrecisionLabeling::from_mask("m", &mask);
        let t = pick.index(mask.len()) + 1;
        let cfg = AccelerationConfig { r_low: r, r_high: r, k_acc: 1 };
        prop_assert_eq!(piecewise_indices(t, mask.len(), &lab, &cfg), constant_indices(t, mask.len(), r));
    }

    #[test]
    fn faster_casual_rate_never_slows_uniform_labelings(len in 1usize..300, precision in any::<bool>(), r_low in 1usize..4, r_high in 1usize..8) {
        let mask = vec![precision; len];
        let r_high = r_high.max(r_low);
        prop_assert!(speedup(&mask, r_low, r_high + 1) >= speedup(&mask, r_low, r_high));
    }

    #[test]
    fn every_frame_conditions_one_sample(mask in mask_strategy(100), k_acc in 1usize..20) {
        let len = mask.len();
        let traj = Trajectory::new("m", 1, (0..len).map(|v| v as f32).collect(), 10.0).unwrap();
        let ds = Dataset::new(vec![traj]);
        let lab = PrecisionLabeling::from_mask("m", &mask);
        let acc = accelerate_dataset(&ds, &[lab], &AccelerationConfig { r_low: 2, r_high: 4, k_acc }).unwrap();
        let frames: Vec<usize> = acc.samples().map(|s| s.t).collect();
        prop_assert_eq!(frames, (1..=len).collect::<Vec<_>>());
        for s in acc.samples() {
            prop_assert_eq!(s.indices.len(), k_acc);
            prop_assert!(s.indices.iter().all(|&i| i > s.t || i == len));
            let expected: Vec<f32> = s.indices.iter().map(|&i| (i - 1) as f32).collect();
            prop_assert_eq!(&s.actions, &expected);
        }
    }

    #[test]
    fn waypoint_dp_matches_exhaustive_search(
        len in 2usize..=12,
        dim in 1usize..=2,
        seed_actions in prop::collection::vec(-1.0f32..1.0, 24),
        entropy in prop::collection::vec(-1.0f64..1.0, 12),
        eps in 0.01f64..2.0,
    ) {
        let mut actions = Vec::with_capacity(len * dim);
        let mut pos = vec![0.0f32; dim];
        for i in 0..len {
            for (d, p) in pos.iter_mut().enumerate() {
                *p += seed_actions[(i * dim + d) % seed_actions.len()];
                actions.push(*p);
            }
        }
        let traj = Trajectory::new("w", dim, actions, 10.0).unwrap();
        let series = EntropySeries::new("w", entropy[..len].to_vec());
        let dp = awe_star_indices(&traj, &series, eps).unwrap();
        prop_assert_eq!(dp.first(), Some(&1));
        prop_assert_eq!(dp.last(), Some(&len));
        prop_assert_eq!(dp.len(), brute_force_awe(&traj, &series, eps).unwrap());
    }
}

#[test]
fn wider_casual_step_can_lose_speed() {
    // The window test for the wider step fails on a short casual run, so the
    // whole run is walked at the slow rate.
    let mask = [false, false, false, false, true, true];
    assert_eq!(speedup(&mask, 1, 3), 5.0 / 3.0);
    assert_eq!(speedup(&mask, 1, 4), 1.0);
}

#[test]
fn output_directory_layout() {
    let traj = Trajectory::new("m", 2, (0..40).map(|v| v as f32).collect(), 25.0).unwrap();
    let ds = Dataset::new(vec![traj]);
    let lab = PrecisionLabeling::from_inclusive_ranges("m", 20, [(5, 10)]);
    let cfg = AccelerationConfig::default();
    let acc = accelerate_dataset(&ds, std::slice::from_ref(&lab), &cfg).unwrap();
    let stats = speedup_stats(&ds, &[lab], &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_accelerated(dir.path(), &ds, &acc, &stats).unwrap();

    let copy = load_dataset(dir.path()).unwrap();
    assert_eq!(copy.trajectories, ds.trajectories);
    assert_eq!(copy.meta["accelerated.method"], "demospeedup");
    let lines = std::fs::read_to_string(dir.path().join("samples.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 20);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["t"], 1);
    assert_eq!(first["indices"].as_array().unwrap().len(), cfg.k_acc);
    let stats_back: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats_back["mean"].as_f64().unwrap(), stats.mean);
}
