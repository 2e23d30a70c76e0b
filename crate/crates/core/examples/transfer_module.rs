//! Builds a target network with two auxiliary heads behind transfer modules
//! and shows which parameters each loss reaches.

use sskt::autodiff::Tape;
use sskt::models::{build_target, ConvBlockSpec, NetworkSpec, TrunkSpec};
use sskt::Tensor;

fn main() -> sskt::Result<()> {
    let trunk = TrunkSpec {
        input: [3, 8, 8],
        blocks: vec![
            ConvBlockSpec::new(8, 4, 2, 1),
            ConvBlockSpec::new(16, 3, 1, 1),
        ],
    };
    let spec = NetworkSpec::new(trunk, 10).with_sources(vec![365, 1000], true);
    let net = build_target(spec, 7)?;
    for (name, t) in net.params().iter() {
        println!("{name:<20} {:?}", t.shape());
    }

    let x = Tensor::new(
        vec![2, 3, 8, 8],
        (0..384).map(|i| (i as f64 * 0.37).sin()).collect(),
    )?;
    let mut tape = Tape::new();
    let out = net.forward(&mut tape, &x, true)?;
    for (m, a) in out.aux_logits.iter().enumerate() {
        println!("aux head {m}: {:?}", tape.value(*a).shape());
    }

    // The primary loss never touches the transfer modules.
    let loss = tape.sum(out.primary_logits)?;
    let grads = tape.backward(loss)?;
    for (name, v) in net.params().names().iter().zip(&out.param_vars) {
        let g = grads.get(*v).unwrap();
        let reached = g.data().iter().any(|&x| x != 0.0);
        println!("{name:<20} reached by primary loss: {reached}");
    }
    Ok(())
}
