use mdl_core::game::HedgeWeights;
use mdl_core::instances::make_random_instance;
use mdl_core::learners::{run_mdl_hedge_vc, trigger_bound, RunOptions, Scale};
use mdl_core::problem::{exact_mixture_loss, Instance, LossDist};
use mdl_core::sampling::{
    empirical_weighted_loss, grow_bank, schedule_counts, LossCoupling, Purpose, SampleBank, SamplerState,
    WeightSnapshots,
};
use proptest::prelude::*;

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn coin_instance(ps: &[f64]) -> Instance {
    let row = ps.iter().map(|&p| LossDist::two_point(-1.0, 1.0, p).unwrap()).collect();
    Instance::single_loss(vec![row], None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hedge_weights_stay_on_simplex(rewards in prop::collection::vec(prop::collection::vec(-1.0f64..=1.0, 5), 1..40)) {
        let mut w = HedgeWeights::<f64>::uniform(5, 0.3).unwrap();
        for r in &rewards {
            w.step_in_place(r).unwrap();
            let p = w.normalize();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn bank_matches_schedule_and_never_shrinks(ws in prop::collection::vec(simplex(3), 1..12), t1 in 1u64..5_000) {
        let inst = coin_instance(&[0.2, 0.5, 0.9]);
        let mut bank = SampleBank::new(&inst, LossCoupling::Independent);
        let mut sampler = SamplerState::new(0, 3);
        let mut snaps = WeightSnapshots::new(3);
        let mut prev = vec![0u64; 3];
        for w in &ws {
            if snaps.observe(w) {
                grow_bank(&mut bank, &snaps.w_hat, t1, &mut sampler).unwrap();
            }
            let counts = bank.counts();
            prop_assert_eq!(&counts, &schedule_counts(&snaps.w_hat, t1));
            prop_assert!(counts.iter().zip(&prev).all(|(a, b)| a >= b));
            prop_assert!(counts.iter().zip(w).all(|(&n, &x)| n as f64 >= t1 as f64 * x / 2.0));
            prev = counts;
        }
        prop_assert_eq!(sampler.total_draws(Purpose::Bank), prev.iter().sum::<u64>());
    }

    #[test]
    fn empirical_loss_is_bounded_and_exact_for_constants(w in simplex(3), n in 1u64..200) {
        let coins = coin_instance(&[0.1, 0.6, 0.3]);
        let mut bank = SampleBank::new(&coins, LossCoupling::Independent);
        let mut sampler = SamplerState::new(n, 3);
        for i in 0..3 {
            bank.append(i, n, &mut sampler);
        }
        let v = empirical_weighted_loss(&bank, &w, 0, 0).unwrap();
        prop_assert!((-1.0..=1.0).contains(&v));

        let row = [0.25, -0.5, 0.75].iter().map(|&c| LossDist::constant(c).unwrap()).collect();
        let consts = Instance::single_loss(vec![row], None).unwrap();
        let mut bank = SampleBank::new(&consts, LossCoupling::Independent);
        for i in 0..3 {
            bank.append(i, n, &mut sampler);
        }
        let v = empirical_weighted_loss(&bank, &w, 0, 0).unwrap();
        prop_assert!((v - exact_mixture_loss(&consts, 0, &w, 0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn prefixes_are_nested(n in 2u64..100_000, cuts in prop::collection::vec(0.0f64..1.0, 1..6)) {
        let inst = coin_instance(&[0.4]);
        let mut bank = SampleBank::new(&inst, LossCoupling::Independent);
        let mut sampler = SamplerState::new(7, 1);
        bank.append(0, n, &mut sampler);
        let full = bank.column_sums(0)[0];
        let mut ms: Vec<u64> = cuts.iter().map(|c| (c * n as f64) as u64).collect();
        ms.sort_unstable();
        let mut last: Option<(u64, f64)> = None;
        for m in ms {
            let s = bank.prefix_column_sums(0, m, &mut sampler).unwrap()[0];
            // sums of m values in {-1, 1}
            prop_assert!(s.abs() <= m as f64 && (s + m as f64) % 2.0 == 0.0);
            if let Some((m0, s0)) = last {
                prop_assert!((s - s0).abs() <= (m - m0) as f64);
            }
            prop_assert!((full - s).abs() <= (n - m) as f64);
            last = Some((m, s));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn runs_keep_accounting_and_trigger_bound(k in 1usize..6, seed in 0u64..1_000, inst_seed in 0u64..50) {
        let inst = make_random_instance(k, 8, None, 0.02, inst_seed).unwrap();
        let opts = RunOptions { record_wallclock: false, trajectory_stride: 500, ..RunOptions::default() };
        let rep = run_mdl_hedge_vc(&inst, 0.2, 0.1, Scale::new(1.0, 1e-3, 1e-2).unwrap(), seed, &opts).unwrap();
        prop_assert!(rep.samples.is_consistent());
        prop_assert!(rep.trigger_count >= 1);
        prop_assert!(rep.trigger_count <= trigger_bound(k, rep.rounds));
        prop_assert!(rep.gap >= -1e-6);
        prop_assert!(rep.final_hypothesis.weights().iter().all(|&p| p > 0.0));
    }
}
