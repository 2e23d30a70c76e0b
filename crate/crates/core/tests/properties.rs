//! Property tests for invariants that hold over whole input families.

use proptest::prelude::*;
use sskt::autodiff::{softmax_rows, Tape};
use sskt::losses::{argmax, harden, kd_loss, mean_average_precision, total_loss};
use sskt::models::{
    build_target, load_checkpoint, save_checkpoint, tm_forward, ConvBlockSpec, NetworkSpec,
    TrunkSpec,
};
use sskt::source::{center_frame, resize};
use sskt::training::{
    epoch_permutation, plateau_schedule, sgd_step, step_schedule, PlateauState, SgdState,
};
use sskt::Tensor;

fn matrix(rows: usize, cols: usize, range: f64) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-range..range, rows * cols)
        .prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
}

fn logits_pair() -> impl Strategy<Value = (Tensor, Tensor)> {
    (1usize..5, 2usize..7).prop_flat_map(|(b, k)| (matrix(b, k, 20.0), matrix(b, k, 20.0)))
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions((z, _) in logits_pair(), t in 0.1f64..10.0) {
        let p = softmax_rows(&z, t).unwrap();
        let k = z.shape()[1];
        for row in p.data().chunks(k) {
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kd_is_non_negative_and_zero_on_the_diagonal((s, z) in logits_pair(), t in 0.1f64..10.0) {
        let mut tape = Tape::new();
        let zv = tape.param(z.clone());
        let kd = kd_loss(&mut tape, &s, zv, t).unwrap();
        prop_assert!(tape.value(kd).item().unwrap() >= 0.0);
        let same = kd_loss(&mut tape, &z, zv, t).unwrap();
        prop_assert_eq!(tape.value(same).item().unwrap(), 0.0);
    }

    #[test]
    fn harden_is_one_hot_at_argmax((z, _) in logits_pair()) {
        let h = harden(&z).unwrap();
        let k = z.shape()[1];
        for (hr, zr) in h.data().chunks(k).zip(z.data().chunks(k)) {
            prop_assert_eq!(hr.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(hr[argmax(zr)], 1.0);
        }
    }

    #[test]
    fn zero_alpha_total_is_primary(p in 0.0f64..50.0, aux in prop::collection::vec(0.0f64..50.0, 0..4)) {
        let mut tape = Tape::new();
        let pv = tape.param(Tensor::scalar(p));
        let av: Vec<_> = aux.iter().map(|&a| tape.param(Tensor::scalar(a))).collect();
        let total = total_loss(&mut tape, pv, &av, 0.0).unwrap();
        prop_assert_eq!(tape.value(total).item().unwrap().to_bits(), p.to_bits());
    }

    #[test]
    fn map_is_bounded_and_scale_invariant(
        scores in prop::collection::vec(-5.0f64..5.0, 12),
        labels in prop::collection::vec(prop::bool::ANY, 12),
    ) {
        // mAP is undefined when no class has a positive
        prop_assume!(labels.iter().any(|&b| b));
        let s = Tensor::new(vec![6, 2], scores.clone()).unwrap();
        let l = Tensor::new(vec![6, 2], labels.iter().map(|&b| b as u8 as f64).collect()).unwrap();
        let a = mean_average_precision(&s, &l).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.map));
        // doubling is exact, so the ranking and its ties are untouched
        let b = mean_average_precision(&s.map(|v| 2.0 * v), &l).unwrap();
        prop_assert_eq!(a.map.to_bits(), b.map.to_bits());
    }

    #[test]
    fn tm_sum_is_order_free(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rand_t = |shape: &[usize]| {
            let n = shape.iter().product();
            Tensor::new(shape.to_vec(), (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
        };
        let shapes = [[2usize, 2, 3, 3], [2, 3, 2, 2], [2, 1, 1, 1], [2, 4, 2, 2]];
        let feats: Vec<Tensor> = shapes.iter().map(|s| rand_t(s)).collect();
        let kerns: Vec<Tensor> = shapes.iter().map(|s| rand_t(&[3, s[1], 1, 1])).collect();
        let mut tape = Tape::new();
        let f: Vec<_> = feats.into_iter().map(|t| tape.constant(t)).collect();
        let k: Vec<_> = kerns.into_iter().map(|t| tape.constant(t)).collect();
        let y = tm_forward(&mut tape, &k, &f).unwrap();
        let order = [3usize, 1, 0, 2];
        let kp: Vec<_> = order.iter().map(|&i| k[i]).collect();
        let fp: Vec<_> = order.iter().map(|&i| f[i]).collect();
        let yp = tm_forward(&mut tape, &kp, &fp).unwrap();
        prop_assert!(tape.value(y).max_abs_diff(tape.value(yp)).unwrap() < 1e-12);
    }

    #[test]
    fn permutations_are_permutations(n in 1usize..300, seed in any::<u64>(), epoch in 0usize..1000) {
        let mut p = epoch_permutation(n, seed, epoch);
        p.sort_unstable();
        prop_assert_eq!(p, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn step_schedule_never_increases(
        lr0 in 1e-4f64..1.0,
        gamma in 0.01f64..0.99,
        mut milestones in prop::collection::btree_set(1usize..500, 0..5),
    ) {
        let m: Vec<usize> = std::mem::take(&mut milestones).into_iter().collect();
        let mut prev = f64::INFINITY;
        for e in 0..600 {
            let lr = step_schedule(lr0, gamma, &m, e);
            prop_assert!(lr <= prev);
            prev = lr;
        }
        prop_assert_eq!(step_schedule(lr0, gamma, &m, 0), if m.first() == Some(&0) { lr0 * gamma } else { lr0 });
    }

    #[test]
    fn plateau_never_increases(trace in prop::collection::vec(0.0f64..1.0, 1..60), patience in 1usize..6) {
        let mut s = PlateauState::new(0.1, true);
        let mut prev = 0.1;
        for v in trace {
            let lr = plateau_schedule(&mut s, v, 0.1, patience);
            prop_assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn sgd_is_a_fixed_point_at_zero_gradient(d in prop::collection::vec(-3.0f64..3.0, 1..20), lr in 0.0f64..1.0) {
        let t = Tensor::new(vec![d.len()], d.clone()).unwrap();
        let mut params = vec![t.clone()];
        let grads = vec![Tensor::zeros(&[d.len()])];
        let mut state = SgdState::new();
        for _ in 0..3 {
            sgd_step(&mut params, &grads, &mut state, lr, 0.9, 0.0).unwrap();
        }
        prop_assert!(params[0].bitwise_eq(&t));
    }

    #[test]
    fn center_frame_index_is_floor_half(d in 1usize..20) {
        let clip = Tensor::new(vec![1, 2, d, 1, 1], (0..2 * d).map(|i| (i % d) as f64).collect()).unwrap();
        let f = center_frame(&clip).unwrap();
        prop_assert!(f.data().iter().all(|&v| v == (d / 2) as f64));
    }

    #[test]
    fn resize_to_same_size_is_identity(h in 1usize..6, w in 1usize..6, seed in 0u64..100) {
        let x = Tensor::new(vec![1, 2, h, w], (0..2 * h * w).map(|i| ((i as u64 * 31 + seed) % 17) as f64).collect()).unwrap();
        prop_assert!(resize(&x, h, w).unwrap().bitwise_eq(&x));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), c1 in 1usize..5, k in 2usize..6, sources in prop::collection::vec(2usize..9, 0..3), use_tm in any::<bool>()) {
        let trunk = TrunkSpec { input: [2, 4, 4], blocks: vec![ConvBlockSpec::new(c1, 3, 1, 1), ConvBlockSpec::new(3, 2, 2, 0)] };
        let net = build_target(NetworkSpec::new(trunk, k).with_sources(sources, use_tm), seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&net, dir.path()).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        prop_assert_eq!(back.spec(), net.spec());
        for (a, b) in back.params().tensors().iter().zip(net.params().tensors()) {
            prop_assert!(a.bitwise_eq(b));
        }
    }
}
