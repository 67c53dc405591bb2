use demospeedup::{chunk_at, load_dataset, validate, write_dataset, Dataset, Trajectory};
use proptest::prelude::*;

fn trajectory_strategy(id: String, dim: usize) -> impl Strategy<Value = Trajectory> {
    (1usize..40).prop_flat_map(move |len| {
        let id = id.clone();
        (
            prop::collection::vec(-1e6f32..1e6f32, len * dim),
            prop::option::of(prop::collection::vec(any::<u64>(), len)),
        )
            .prop_map(move |(actions, refs)| {
                let t = Trajectory::new(id.clone(), dim, actions, 15.0).unwrap();
                match refs {
                    Some(r) => t.with_obs_refs(r).unwrap(),
                    None => t,
                }
            })
    })
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (1usize..4, 1usize..4).prop_flat_map(|(n, dim)| {
        let trajectories: Vec<_> = (0..n).map(|i| trajectory_strategy(format!("ep_{i}"), dim)).collect();
        (trajectories, prop::collection::btree_map("[a-z]{1,6}", "[ -~]{0,12}", 0..3)).prop_map(|(t, meta)| {
            let mut ds = Dataset::new(t);
            ds.meta = meta;
            ds
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn write_then_load_is_identity(ds in dataset_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        prop_assert_eq!(back.meta, ds.meta.clone());
        prop_assert_eq!(back.trajectories.len(), ds.trajectories.len());
        for (a, b) in back.trajectories.iter().zip(&ds.trajectories) {
            prop_assert_eq!(&a.id, &b.id);
            prop_assert_eq!(a.obs_refs(), b.obs_refs());
            let bits = |t: &Trajectory| t.actions().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn chunk_rows_follow_clamped_frames(traj in trajectory_strategy("c".into(), 2), k in 1usize..30, pick in any::<prop::sample::Index>()) {
        let t = pick.index(traj.len()) + 1;
        let chunk = chunk_at(&traj, t, k).unwrap();
        prop_assert_eq!(chunk.chunk_len(), k);
        for r in 0..k {
            prop_assert_eq!(chunk.row(r).to_vec(), traj.frame_f64((t + r).min(traj.len())));
        }
    }

    #[test]
    fn validate_leaves_input_untouched(ds in dataset_strategy()) {
        let before = ds.clone();
        let report = validate(&ds);
        prop_assert!(report.is_ok());
        prop_assert_eq!(ds, before);
    }
}
