use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use esrn::dataset::{self, Sample};
use esrn::dimensional::CandidateSet;
use esrn::evolution::random_network;
use esrn::metrics;
use esrn::models::{predict, ModelId};
use esrn::network::decode;
use esrn::split::ssmd_split;

fn sample_strategy() -> impl Strategy<Value = Sample> {
    (0.2f64..800.0, 0.05f64..20.0, 0.05f64..1.7, 0.005f64..0.5, 0.1f64..1000.0)
        .prop_map(|(w, d, u, us, dl)| Sample::new(w, d, u, us, dl))
}

fn vector_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..1000.0, n),
            prop::collection::vec(0.01f64..1000.0, n),
        )
    })
}

proptest! {
    #[test]
    fn homogeneous_models_scale_with_length_and_velocity(
        s in sample_strategy(),
        length in 0.1f64..10.0,
        velocity in 0.1f64..10.0,
    ) {
        let scaled = Sample::new(s.w * length, s.d * length, s.u * velocity, s.ustar * velocity, s.dl);
        for id in [ModelId::Elder1959, ModelId::Fischer1979, ModelId::SeoCheong1998, ModelId::EsrnFinal] {
            let a = predict(id, &s).dl * length * velocity;
            let b = predict(id, &scaled).dl;
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()), "{id}: {a} vs {b}");
        }
    }

    #[test]
    fn network_predictions_scale_like_their_output_group(
        seed in any::<u64>(),
        s in sample_strategy(),
        length in 0.1f64..10.0,
        velocity in 0.1f64..10.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&[5, 3, 1], &CandidateSet::ldc(), &mut rng);
        let scaled = Sample::new(s.w * length, s.d * length, s.u * velocity, s.ustar * velocity, s.dl);
        let a = net.predict(&s) * length * velocity;
        let b = net.predict(&scaled);
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())), "{a} vs {b}");
    }

    #[test]
    fn decoded_expression_matches_forward_pass(seed in any::<u64>(), s in sample_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&[5, 3, 1], &CandidateSet::ldc(), &mut rng);
        let f = net.forward_sample(&s);
        let e = decode(&net).eval(&s);
        prop_assert!((e - f).abs() <= 1e-9 * (1.0 + f.abs()), "{e} vs {f}");
    }

    #[test]
    fn taylor_identity((obs, pred) in vector_pair()) {
        let t = metrics::taylor(&obs, &pred).unwrap();
        let rhs = t.pred_std.powi(2) + t.obs_std.powi(2) - 2.0 * t.pred_std * t.obs_std * t.correlation;
        let scale = 1.0 + t.pred_std.powi(2) + t.obs_std.powi(2);
        prop_assert!((t.centered_rms.powi(2) - rhs).abs() <= 1e-9 * scale);
    }

    #[test]
    fn discrepancy_ratio_is_antisymmetric(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
        let x = metrics::dr(a, b).unwrap();
        let y = metrics::dr(b, a).unwrap();
        prop_assert!((x + y).abs() <= 1e-12 * (1.0 + x.abs()));
    }

    #[test]
    fn metrics_are_bounded((obs, pred) in vector_pair()) {
        let r = metrics::evaluate_pairs(&obs, &pred).unwrap();
        prop_assert!(r.rmse >= 0.0 && r.wmape >= 0.0);
        if let Some(r2) = r.r2 {
            prop_assert!(r2 <= 1.0);
        }
        prop_assert!((0.0..=100.0).contains(&r.accuracy_pct));
        prop_assert!((r.dr_bins.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(r.accuracy_pct <= r.central_bins_pct + 1e-12);
    }

    #[test]
    fn quartiles_are_ordered_and_permutation_free(mut v in prop::collection::vec(-1e3f64..1e3, 1..50), seed in any::<u64>()) {
        let (q1, q3) = dataset::quartiles(&v).unwrap();
        prop_assert!(q1 <= q3);
        use rand::seq::SliceRandom;
        v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(dataset::quartiles(&v).unwrap(), (q1, q3));
    }

    #[test]
    fn split_partitions_the_samples(samples in prop::collection::vec(sample_strategy(), 10..40), fraction in 0.3f64..0.9) {
        let split = ssmd_split(&samples, fraction, 0).unwrap();
        let mut all: Vec<usize> = split.train_indices.iter().chain(&split.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..samples.len()).collect::<Vec<_>>());
        prop_assert_eq!(split.train.len(), split.train_indices.len());
        prop_assert!(!split.test.is_empty());
    }
}
