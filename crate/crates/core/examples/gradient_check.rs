//! Finite-difference check of a conv -> relu -> linear -> soft-CE composite.

use sskt::autodiff::finite_diff_check;
use sskt::losses::ce_soft_loss;
use sskt::Tensor;

fn main() -> sskt::Result<()> {
    let x = Tensor::new(
        vec![2, 1, 4, 4],
        (0..32).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect(),
    )?;
    let kernel = Tensor::new(
        vec![2, 1, 3, 3],
        (0..18).map(|i| ((i * 5 % 7) as f64 - 3.0) / 4.0).collect(),
    )?;
    let target = Tensor::new(vec![2, 3], vec![0.2, 0.5, 0.3, 1.0, 0.0, 0.0])?;

    // Gradient w.r.t. the conv kernel, everything else held fixed.
    let err = finite_diff_check(
        |tape, k| {
            let xv = tape.constant(x.clone());
            let h = tape.conv2d(xv, k, 1, 1)?;
            let h = tape.relu(h)?;
            let h = tape.global_avgpool(h)?;
            let w = tape.constant(Tensor::new(
                vec![2, 3],
                vec![0.5, -0.3, 0.2, 0.8, -0.6, 0.1],
            )?);
            let b = tape.constant(Tensor::zeros(&[3]));
            let logits = tape.linear(h, w, b)?;
            ce_soft_loss(tape, logits, &target, 2.0)
        },
        &kernel,
        1e-6,
    )?;
    println!("max relative error: {err:.3e}");
    assert!(err < 1e-4);
    Ok(())
}
