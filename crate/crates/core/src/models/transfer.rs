use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Per-block 1x1 bottlenecks whose pooled outputs are summed into one vector.
///
/// Bottleneck `b` maps block `b`'s `C_b` channels to the common width, so
/// every pooled output is `[B, width]` and the sum is well defined.
#[derive(Debug, Clone)]
pub struct TransferModule {
    /// `[width, C_b, 1, 1]` weight handle for each trunk block.
    pub bottlenecks: Vec<Var>,
}

impl TransferModule {
    pub fn forward(&self, tape: &mut Tape, block_features: &[Var]) -> Result<Var> {
        tm_forward(tape, &self.bottlenecks, block_features)
    }
}

/// `sum_b global_avgpool(conv1x1(feature_b, bottleneck_b))`.
pub fn tm_forward(tape: &mut Tape, bottlenecks: &[Var], block_features: &[Var]) -> Result<Var> {
    if bottlenecks.len() != block_features.len() || bottlenecks.is_empty() {
        return Err(Error::shape(
            "tm_forward",
            format!(
                "{} bottlenecks for {} block features",
                bottlenecks.len(),
                block_features.len()
            ),
        ));
    }
    let mut acc: Option<Var> = None;
    for (&w, &f) in bottlenecks.iter().zip(block_features) {
        let reduced = tape.conv2d(f, w, 1, 0)?;
        let pooled = tape.global_avgpool(reduced)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, pooled)?,
            None => pooled,
        });
    }
    Ok(acc.expect("non-empty"))
}
