//! Loss algebra identities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sskt::autodiff::{log_softmax_rows, softmax_rows, Tape};
use sskt::losses::{
    ce_loss, ce_soft_loss, harden, kd_loss, mean_average_precision, total_loss, total_loss_single,
};
use sskt::Tensor;

fn logits(r: &mut ChaCha8Rng, b: usize, k: usize, scale: f64) -> Tensor {
    Tensor::new(
        vec![b, k],
        (0..b * k).map(|_| r.random_range(-scale..scale)).collect(),
    )
    .unwrap()
}

fn scalar(tape: &Tape, v: sskt::autodiff::Var) -> f64 {
    tape.value(v).item().unwrap()
}

#[test]
fn kd_of_identical_logits_is_exactly_zero() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for t in [0.5, 1.0, 2.0, 4.0, 20.0] {
        let a = logits(&mut r, 5, 7, 10.0);
        let mut tape = Tape::new();
        let z = tape.param(a.clone());
        let kd = kd_loss(&mut tape, &a, z, t).unwrap();
        assert_eq!(scalar(&tape, kd), 0.0, "T={t}");
    }
}

#[test]
fn kd_is_non_negative_on_random_pairs() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let (s, z) = (logits(&mut r, 3, 5, 6.0), logits(&mut r, 3, 5, 6.0));
        let t = r.random_range(0.5..8.0);
        let mut tape = Tape::new();
        let zv = tape.param(z);
        let kd = kd_loss(&mut tape, &s, zv, t).unwrap();
        assert!(scalar(&tape, kd) >= 0.0);
    }
}

/// H(p, q) = KL(p || q) + H(p), computed from independent row-wise formulas.
#[test]
fn kd_keeps_sign_when_both_distributions_saturate() {
    // at t = 0.1 both rows are one-hot to within 1e-89; exact KL is about 9.6e-90
    let s = Tensor::new(vec![1, 2], vec![18.19642206286186, -4.514504224306312]).unwrap();
    let z = Tensor::new(vec![1, 2], vec![2.5568154088327564, -17.94016041794262]).unwrap();
    let mut tape = Tape::new();
    let zv = tape.param(z);
    let kd = kd_loss(&mut tape, &s, zv, 0.1).unwrap();
    let v = scalar(&tape, kd);
    assert!(v > 0.0 && (v / 9.61092e-90 - 1.0).abs() < 1e-5, "{v:e}");
}

#[test]
fn cross_entropy_is_kl_plus_entropy() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let t = r.random_range(0.5..5.0);
        let (s, z) = (logits(&mut r, 4, 6, 4.0), logits(&mut r, 4, 6, 4.0));
        let p = softmax_rows(&s, t).unwrap();
        let lp = log_softmax_rows(&s, t).unwrap();
        let b = 4.0;
        let entropy: f64 = -p
            .data()
            .iter()
            .zip(lp.data())
            .map(|(p, l)| p * l)
            .sum::<f64>()
            / b;

        let mut tape = Tape::new();
        let zv = tape.param(z);
        let ce = ce_soft_loss(&mut tape, zv, &p, t).unwrap();
        let kd = kd_loss(&mut tape, &s, zv, t).unwrap();
        let lhs = scalar(&tape, ce);
        let rhs = scalar(&tape, kd) + entropy;
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }
}

#[test]
fn soft_ce_at_own_distribution_equals_entropy() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let z = logits(&mut r, 3, 5, 3.0);
    let t = 2.0;
    let p = softmax_rows(&z, t).unwrap();
    let entropy: f64 = -p.data().iter().map(|p| p * p.ln()).sum::<f64>() / 3.0;
    let mut tape = Tape::new();
    let zv = tape.param(z);
    let ce = ce_soft_loss(&mut tape, zv, &p, t).unwrap();
    assert!((scalar(&tape, ce) - entropy).abs() < 1e-12);
}

#[test]
fn one_hot_soft_ce_equals_ce_bitwise() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let z = logits(&mut r, 4, 5, 5.0);
        let y = harden(&softmax_rows(&logits(&mut r, 4, 5, 5.0), 1.0).unwrap()).unwrap();
        let mut tape = Tape::new();
        let zv = tape.param(z);
        let a = ce_loss(&mut tape, zv, &y, 1.0).unwrap();
        let b = ce_soft_loss(&mut tape, zv, &y, 1.0).unwrap();
        assert_eq!(scalar(&tape, a).to_bits(), scalar(&tape, b).to_bits());
    }
}

#[test]
fn total_loss_compositions() {
    let mut tape = Tape::new();
    let p = tape.param(Tensor::scalar(1.0));
    let a = tape.param(Tensor::scalar(0.5));
    let b = tape.param(Tensor::scalar(0.25));
    let none = total_loss(&mut tape, p, &[], 5.0).unwrap();
    let off = total_loss(&mut tape, p, &[a], 0.0).unwrap();
    let two = total_loss(&mut tape, p, &[a, b], 2.0).unwrap();
    assert_eq!(scalar(&tape, none), 1.0);
    assert_eq!(scalar(&tape, off), 1.0);
    assert_eq!(scalar(&tape, two), 2.5);

    let mut r = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let (pv, av, alpha) = (
            r.random_range(0.0..5.0),
            r.random_range(0.0..5.0),
            r.random_range(0.0..3.0),
        );
        let mut tape = Tape::new();
        let p = tape.param(Tensor::scalar(pv));
        let a = tape.param(Tensor::scalar(av));
        let list = total_loss(&mut tape, p, &[a], alpha).unwrap();
        let single = total_loss_single(&mut tape, p, a, alpha).unwrap();
        assert_eq!(
            scalar(&tape, list).to_bits(),
            scalar(&tape, single).to_bits()
        );
        let zero = total_loss(&mut tape, p, &[a], 0.0).unwrap();
        assert_eq!(scalar(&tape, zero).to_bits(), pv.to_bits());
    }
}

#[test]
fn map_hand_cases() {
    let case = |scores: &[f64], labels: &[f64]| {
        let n = scores.len();
        let s = Tensor::new(vec![n, 1], scores.to_vec()).unwrap();
        let l = Tensor::new(vec![n, 1], labels.to_vec()).unwrap();
        mean_average_precision(&s, &l).unwrap().map
    };
    // positives at ranks 1 and 3: (1/1 + 2/3) / 2
    assert!((case(&[0.9, 0.8, 0.7, 0.6], &[1.0, 0.0, 1.0, 0.0]) - 5.0 / 6.0).abs() < 1e-12);
    // single positive ranked last of N
    assert!((case(&[0.9, 0.8, 0.7, 0.1], &[0.0, 0.0, 0.0, 1.0]) - 0.25).abs() < 1e-12);
    // perfect ranking
    assert_eq!(case(&[0.3, 0.2, 0.1], &[1.0, 1.0, 0.0]), 1.0);
}
