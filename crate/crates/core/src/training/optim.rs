use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Momentum buffers, one per parameter tensor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SgdState {
    velocity: Vec<Vec<f64>>,
}

impl SgdState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }
}

/// One in-place SGD update:
///
/// ```text
/// g' = grad + weight_decay * param
/// v  = momentum * v + g'
/// param -= lr * v
/// ```
pub fn sgd_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut SgdState,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::shape(
            "sgd_step",
            format!("{} parameters, {} gradients", params.len(), grads.len()),
        ));
    }
    if let Some((p, g)) = params
        .iter()
        .zip(grads)
        .find(|(p, g)| p.shape() != g.shape())
    {
        return Err(Error::shape(
            "sgd_step",
            format!("param {:?} vs grad {:?}", p.shape(), g.shape()),
        ));
    }
    if state.velocity.is_empty() {
        state.velocity = params.iter().map(|p| vec![0.0; p.numel()]).collect();
    } else if state.velocity.len() != params.len() {
        return Err(Error::shape(
            "sgd_step",
            "optimizer state belongs to a different parameter set",
        ));
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut state.velocity) {
        for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.iter_mut()) {
            let g_eff = gv + weight_decay * *pv;
            *vv = momentum * *vv + g_eff;
            *pv -= lr * *vv;
        }
        p.ensure_finite("sgd_step")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor {
        Tensor::new(vec![v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn plain_gradient_descent() {
        let mut p = [t(&[1.0, -2.0])];
        let g = [t(&[0.5, 0.25])];
        let mut s = SgdState::new();
        sgd_step(&mut p, &g, &mut s, 0.1, 0.0, 0.0).unwrap();
        assert_eq!(p[0].data(), &[1.0 - 0.1 * 0.5, -2.0 - 0.1 * 0.25]);
    }

    #[test]
    fn momentum_unrolls() {
        let (lr, g0) = (0.1, 2.0);
        let mut p = [t(&[0.0])];
        let g = [t(&[g0])];
        let mut s = SgdState::new();
        sgd_step(&mut p, &g, &mut s, lr, 0.9, 0.0).unwrap();
        assert_eq!(s.velocity()[0][0], g0);
        sgd_step(&mut p, &g, &mut s, lr, 0.9, 0.0).unwrap();
        assert!((s.velocity()[0][0] - 1.9 * g0).abs() < 1e-15);
        assert!((p[0].data()[0] - -(lr * g0 + lr * 1.9 * g0)).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_alone_shrinks() {
        let (lr, wd) = (0.1, 5e-4);
        let mut p = [t(&[3.0])];
        let g = [t(&[0.0])];
        let mut s = SgdState::new();
        sgd_step(&mut p, &g, &mut s, lr, 0.0, wd).unwrap();
        assert!((p[0].data()[0] - 3.0 * (1.0 - lr * wd)).abs() < 1e-15);
        // second step with momentum 0.9: v2 = 0.9 * v1 + wd * p1
        let mut p = [t(&[3.0])];
        let mut s = SgdState::new();
        sgd_step(&mut p, &g, &mut s, lr, 0.9, wd).unwrap();
        let p1 = 3.0 - lr * wd * 3.0;
        sgd_step(&mut p, &g, &mut s, lr, 0.9, wd).unwrap();
        let v2 = 0.9 * wd * 3.0 + wd * p1;
        assert!((p[0].data()[0] - (p1 - lr * v2)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = [t(&[1.0, 2.0])];
        let mut s = SgdState::new();
        assert!(sgd_step(&mut p, &[t(&[1.0])], &mut s, 0.1, 0.0, 0.0).is_err());
        assert!(sgd_step(&mut p, &[], &mut s, 0.1, 0.0, 0.0).is_err());
    }
}
