//! The loss family on a fixed batch: CE, soft CE, KD, BCE, and the total objective.

use sskt::autodiff::{softmax_rows, Tape};
use sskt::losses::{bce_loss, ce_loss, ce_soft_loss, kd_loss, total_loss};
use sskt::Tensor;

fn main() -> sskt::Result<()> {
    let target_logits = Tensor::new(vec![2, 3], vec![1.0, 0.5, -0.5, 0.0, 2.0, 0.1])?;
    let source_logits = Tensor::new(vec![2, 3], vec![2.0, 0.0, -1.0, -0.5, 1.5, 0.5])?;
    let one_hot = Tensor::new(vec![2, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0])?;
    let multi_hot = Tensor::new(vec![2, 3], vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0])?;

    let mut tape = Tape::new();
    let z = tape.param(target_logits);
    let primary = ce_loss(&mut tape, z, &one_hot, 1.0)?;
    for t in [1.0, 2.0, 4.0] {
        let soft = softmax_rows(&source_logits, t)?;
        let ce = ce_soft_loss(&mut tape, z, &soft, t)?;
        let kd = kd_loss(&mut tape, &source_logits, z, t)?;
        println!(
            "T={t}: ce_soft={:.6} kd={:.6}",
            tape.value(ce).item()?,
            tape.value(kd).item()?
        );
    }
    let soft = softmax_rows(&source_logits, 1.0)?;
    let aux = ce_soft_loss(&mut tape, z, &soft, 1.0)?;
    let bce = bce_loss(&mut tape, z, &multi_hot)?;
    let total = total_loss(&mut tape, primary, &[aux], 0.5)?;
    println!(
        "ce={:.6} bce={:.6}",
        tape.value(primary).item()?,
        tape.value(bce).item()?
    );
    println!("primary + 0.5 * aux = {:.6}", tape.value(total).item()?);

    let grads = tape.backward(total)?;
    println!("d total / d logits = {:?}", grads.get(z).unwrap().data());
    Ok(())
}
