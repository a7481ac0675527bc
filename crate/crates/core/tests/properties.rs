use danebench_core::data::{generate_synthetic, partition, sample_subset, subset_size, Dataset, SyntheticSpec};
use danebench_core::linalg::tree_mean;
use danebench_core::sim::{run, AccessMode, Problem, RunConfig};
use danebench_core::{Algorithm, RidgeLoss};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_is_an_equal_disjoint_cover(per in 1usize..30, m in 1usize..9, seed in any::<u64>()) {
        let data = Dataset::new(1, vec![0.0; per * m], vec![0.0; per * m]).unwrap();
        let shards = partition(&data, m, seed).unwrap();
        let mut seen = vec![false; per * m];
        for (i, s) in shards.iter().enumerate() {
            prop_assert_eq!(s.machine_id, i);
            prop_assert_eq!(s.len(), per);
            for &j in &s.indices {
                prop_assert!(!seen[j]);
                seen[j] = true;
            }
        }
        prop_assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn subsets_are_distinct_members_of_the_shard(n in 1usize..200, fraction in 0.01f64..=1.0, seed in any::<u64>(), round in 1usize..50) {
        let data = Dataset::new(1, vec![0.0; n], vec![0.0; n]).unwrap();
        let shard = &partition(&data, 1, seed).unwrap()[0];
        if (fraction * n as f64).floor() < 1.0 {
            prop_assert!(sample_subset(shard, fraction, seed, round).is_err());
            return Ok(());
        }
        let ix = sample_subset(shard, fraction, seed, round).unwrap();
        prop_assert_eq!(ix.len(), subset_size(n, fraction).unwrap());
        prop_assert!(!ix.is_empty() && ix.len() <= n);
        let mut sorted = ix.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), ix.len());
        prop_assert!(ix.iter().all(|j| shard.indices.contains(j)));
    }

    #[test]
    fn tree_mean_lies_between_extremes(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)) {
        let mean = tree_mean(&rows);
        for j in 0..3 {
            let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(mean[j] >= lo - 1e-9 * lo.abs() && mean[j] <= hi + 1e-9 * hi.abs());
        }
    }

    #[test]
    fn dataset_csv_round_trips(seed in any::<u64>(), d in 1usize..5, n in 1usize..20) {
        let data = generate_synthetic(&SyntheticSpec::standard(d, n, seed)).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, data);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn traces_are_well_formed(
        alg_ix in 0usize..6,
        m in prop::sample::select(vec![1usize, 2, 4]),
        rounds in 1usize..4,
        seed in any::<u64>(),
        limited in any::<bool>(),
    ) {
        let alg = Algorithm::ALL[alg_ix];
        let problem = Problem::synthetic(&SyntheticSpec::standard(3, 48, seed), RidgeLoss::default(), 500).unwrap();
        let mut c = RunConfig::new(alg, m);
        c.rounds = rounds;
        c.seed = seed;
        if limited && alg.is_dane() && alg != Algorithm::DaneExact {
            c.access = AccessMode::FixedSubset(0.5);
        }
        let out = run(&c, &problem).unwrap();
        let pts = &out.trace.points;
        prop_assert_eq!(pts.len(), rounds + 1);
        prop_assert_eq!(out.iterates.len(), rounds + 1);
        for (r, p) in pts.iter().enumerate() {
            prop_assert_eq!(p.round, r);
            prop_assert!(p.train_subopt >= 0.0);
            prop_assert!(p.log10_subopt >= -16.0);
            prop_assert!(p.pop_error.is_finite());
        }
        for w in pts.windows(2) {
            prop_assert!(w[1].max_grads_per_machine > w[0].max_grads_per_machine);
            if matches!(alg, Algorithm::Sgd | Algorithm::IdealDistSgd) {
                prop_assert_eq!(w[1].comm_rounds, 0);
            } else {
                prop_assert!(w[1].comm_rounds > w[0].comm_rounds);
                prop_assert!(w[1].floats_communicated > w[0].floats_communicated);
            }
        }
        let max = *out.ledger.grads_per_machine.iter().max().unwrap();
        if alg != Algorithm::IdealDistSgd {
            prop_assert_eq!(pts.last().unwrap().max_grads_per_machine, max as f64);
        }
    }
}
