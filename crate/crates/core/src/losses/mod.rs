//! Primary and auxiliary losses and their combination into one objective.
//!
//! The auxiliary losses compare an auxiliary head of the target network with
//! the output of a frozen source network:
//!
//! * [`ce_soft_loss`]: cross-entropy against the source's soft label, with the
//!   temperature applied to the target logits.
//! * [`kd_loss`]: `KL(p_s || p_t)` where both distributions are softened by the
//!   same temperature. No `T^2` factor is applied.
//!
//! [`total_loss`] adds `alpha` times the sum of all auxiliary terms to the
//! primary term.

mod map;

pub use map::{mean_average_precision, MapReport};

use serde::{Deserialize, Serialize};

use crate::autodiff::{log_softmax_rows, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const ROW_SUM_TOL: f64 = 1e-6;

/// Loss applied to the primary head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrimaryLoss {
    /// Softmax cross-entropy on single-label targets.
    #[default]
    Ce,
    /// Per-class sigmoid cross-entropy on multi-hot targets.
    Bce,
}

/// Loss applied to one auxiliary head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AuxLoss {
    #[default]
    CeSoft,
    Kd,
}

fn default_one() -> f64 {
    1.0
}

/// One auxiliary term of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxSpec {
    #[serde(default)]
    pub kind: AuxLoss,
    #[serde(default = "default_one")]
    pub temperature: f64,
    /// Replace the soft label with its argmax one-hot (only for `ce_soft`).
    #[serde(default)]
    pub harden_labels: bool,
}

impl Default for AuxSpec {
    fn default() -> Self {
        Self {
            kind: AuxLoss::CeSoft,
            temperature: 1.0,
            harden_labels: false,
        }
    }
}

/// Balance parameter, primary loss, and one auxiliary spec per source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossPlan {
    #[serde(default = "default_one")]
    pub alpha: f64,
    #[serde(default)]
    pub primary: PrimaryLoss,
    #[serde(default)]
    pub aux: Vec<AuxSpec>,
}

impl Default for LossPlan {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            primary: PrimaryLoss::Ce,
            aux: Vec::new(),
        }
    }
}

impl LossPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(
                "loss.alpha",
                format!("must be >= 0, got {}", self.alpha),
            ));
        }
        for (i, a) in self.aux.iter().enumerate() {
            if !(a.temperature > 0.0 && a.temperature.is_finite()) {
                return Err(Error::config(
                    format!("loss.aux[{i}].temperature"),
                    format!("must be > 0, got {}", a.temperature),
                ));
            }
        }
        Ok(())
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "temperature must be positive, got {t}"
        )))
    }
}

fn check_pair(op: &'static str, logits: &Tensor, target: &Tensor) -> Result<usize> {
    match (logits.shape(), target.shape()) {
        ([b, k], [b2, k2]) if b == b2 && k == k2 => Ok(*k),
        (l, t) => Err(Error::shape(op, format!("logits {l:?} vs target {t:?}"))),
    }
}

/// Batch-mean `-sum_k y[k] log softmax(z / t)[k]` with one-hot `target`.
pub fn ce_loss(tape: &mut Tape, logits: Var, target: &Tensor, t: f64) -> Result<Var> {
    let k = check_pair("ce_loss", tape.value(logits), target)?;
    for (i, row) in target.data().chunks(k).enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(format!(
                "ce_loss target row {i} is not one-hot"
            )));
        }
    }
    ce_soft_loss(tape, logits, target, t)
}

/// Batch-mean cross-entropy against a soft target distribution.
///
/// `soft_target` is copied onto the tape as data and never receives a gradient.
pub fn ce_soft_loss(tape: &mut Tape, logits: Var, soft_target: &Tensor, t: f64) -> Result<Var> {
    check_temperature(t)?;
    let k = check_pair("ce_soft_loss", tape.value(logits), soft_target)?;
    for (i, row) in soft_target.data().chunks(k).enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::invalid(format!(
                "soft target row {i} is not a distribution (sum {sum})"
            )));
        }
    }
    tape.soft_cross_entropy(logits, soft_target.clone(), t)
}

/// Batch-mean `KL(softmax(source/t) || softmax(target/t))`.
///
/// The source logits are plain data, so no gradient can reach the source network.
pub fn kd_loss(tape: &mut Tape, source_logits: &Tensor, target_logits: Var, t: f64) -> Result<Var> {
    check_temperature(t)?;
    check_pair("kd_loss", tape.value(target_logits), source_logits)?;
    let source_log_probs = log_softmax_rows(source_logits, t)?;
    tape.kl_divergence(target_logits, source_log_probs, t)
}

/// Mean over batch and classes of the logistic cross-entropy.
pub fn bce_loss(tape: &mut Tape, logits: Var, multi_hot: &Tensor) -> Result<Var> {
    check_pair("bce_loss", tape.value(logits), multi_hot)?;
    if multi_hot.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("bce_loss targets must be 0 or 1"));
    }
    tape.binary_cross_entropy(logits, multi_hot.clone())
}

/// `primary + alpha * sum(aux)`; returns `primary` itself when `aux` is empty.
pub fn total_loss(tape: &mut Tape, primary: Var, aux: &[Var], alpha: f64) -> Result<Var> {
    if alpha < 0.0 {
        return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    let Some((&first, rest)) = aux.split_first() else {
        return Ok(primary);
    };
    let mut acc = first;
    for &a in rest {
        acc = tape.add(acc, a)?;
    }
    let weighted = tape.scale(acc, alpha)?;
    tape.add(primary, weighted)
}

/// Single-source objective `primary + alpha * aux`.
pub fn total_loss_single(tape: &mut Tape, primary: Var, aux: Var, alpha: f64) -> Result<Var> {
    if alpha < 0.0 {
        return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    let weighted = tape.scale(aux, alpha)?;
    tape.add(primary, weighted)
}

/// Argmax one-hot of each row, first index on ties.
pub fn harden(soft: &Tensor) -> Result<Tensor> {
    let [b, k] = soft.shape() else {
        return Err(Error::shape(
            "harden",
            format!("expected [B, K], got {:?}", soft.shape()),
        ));
    };
    let mut out = vec![0.0; b * k];
    for (row, o) in soft.data().chunks(*k).zip(out.chunks_mut(*k)) {
        o[argmax(row)] = 1.0;
    }
    Tensor::new(vec![*b, *k], out)
}

/// Index of the largest value, first index on ties.
pub fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::softmax_rows;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn scalar(tape: &Tape, v: Var) -> f64 {
        tape.value(v).item().unwrap()
    }

    #[test]
    fn ce_closed_form() {
        let mut tape = Tape::new();
        let z = tape.param(m(&[&[1.0, 0.0]]));
        let l = ce_loss(&mut tape, z, &m(&[&[1.0, 0.0]]), 1.0).unwrap();
        let e = std::f64::consts::E;
        let expected = -(e / (1.0 + e)).ln();
        assert!((scalar(&tape, l) - expected).abs() < 1e-15);
        assert!((expected - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn ce_uniform_is_log_k() {
        let mut tape = Tape::new();
        for t in [0.5, 1.0, 4.0] {
            let z = tape.param(m(&[&[3.0, 3.0, 3.0, 3.0, 3.0]]));
            let l = ce_loss(&mut tape, z, &m(&[&[0.0, 0.0, 1.0, 0.0, 0.0]]), t).unwrap();
            assert!((scalar(&tape, l) - 5f64.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn ce_softening_raises_argmax_loss() {
        let mut tape = Tape::new();
        let z = tape.param(m(&[&[2.0, 0.0]]));
        let y = m(&[&[1.0, 0.0]]);
        let l1 = ce_loss(&mut tape, z, &y, 1.0).unwrap();
        let l2 = ce_loss(&mut tape, z, &y, 2.0).unwrap();
        assert!(scalar(&tape, l2) > scalar(&tape, l1));
    }

    #[test]
    fn ce_rejects_bad_targets() {
        let mut tape = Tape::new();
        let z = tape.param(m(&[&[1.0, 0.0]]));
        assert!(ce_loss(&mut tape, z, &m(&[&[0.5, 0.5]]), 1.0).is_err());
        assert!(ce_loss(&mut tape, z, &m(&[&[1.0, 1.0]]), 1.0).is_err());
        assert!(ce_loss(&mut tape, z, &m(&[&[1.0, 0.0]]), 0.0).is_err());
        assert!(ce_loss(&mut tape, z, &m(&[&[1.0, 0.0, 0.0]]), 1.0).is_err());
    }

    #[test]
    fn ce_soft_uniform_and_entropy() {
        let mut tape = Tape::new();
        let z = tape.param(m(&[&[0.7, 0.7, 0.7]]));
        let l = ce_soft_loss(&mut tape, z, &m(&[&[1.0 / 3.0; 3]]), 1.0).unwrap();
        assert!((scalar(&tape, l) - 3f64.ln()).abs() < 1e-14);

        let logits = m(&[&[1.0, -0.5, 2.0], &[0.0, 0.3, -1.0]]);
        let t = 1.7;
        let p = softmax_rows(&logits, t).unwrap();
        let z = tape.param(logits);
        let l = ce_soft_loss(&mut tape, z, &p, t).unwrap();
        let entropy: f64 = -p.data().iter().map(|v| v * v.ln()).sum::<f64>() / 2.0;
        assert!((scalar(&tape, l) - entropy).abs() < 1e-12);
    }

    #[test]
    fn ce_soft_rejects_unnormalized() {
        let mut tape = Tape::new();
        let z = tape.param(m(&[&[1.0, 0.0]]));
        assert!(ce_soft_loss(&mut tape, z, &m(&[&[0.6, 0.6]]), 1.0).is_err());
        assert!(ce_soft_loss(&mut tape, z, &m(&[&[1.5, -0.5]]), 1.0).is_err());
    }

    #[test]
    fn ce_soft_one_hot_matches_ce_bitwise() {
        let logits = m(&[&[0.3, -1.2, 2.2], &[1.0, 1.0, -4.0]]);
        let y = m(&[&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        let mut tape = Tape::new();
        let z = tape.param(logits);
        let a = ce_loss(&mut tape, z, &y, 2.5).unwrap();
        let b = ce_soft_loss(&mut tape, z, &y, 2.5).unwrap();
        assert_eq!(scalar(&tape, a).to_bits(), scalar(&tape, b).to_bits());
    }

    #[test]
    fn kd_self_is_zero_and_source_gets_no_grad() {
        let logits = m(&[&[1.0, -2.0, 0.5]]);
        let mut tape = Tape::new();
        let z = tape.param(logits.clone());
        let l = kd_loss(&mut tape, &logits, z, 3.0).unwrap();
        assert_eq!(scalar(&tape, l), 0.0);
    }

    #[test]
    fn kd_closed_form_two_class() {
        // p_s = [a, b], p_t = [b, a] with a = e/(1+e): KL = (a - b) * (ln a - ln b) = (a - b) * 1.
        let e = std::f64::consts::E;
        let (a, b) = (e / (1.0 + e), 1.0 / (1.0 + e));
        let mut tape = Tape::new();
        let z = tape.param(m(&[&[0.0, 1.0]]));
        let l = kd_loss(&mut tape, &m(&[&[1.0, 0.0]]), z, 1.0).unwrap();
        let oracle = a * (a.ln() - b.ln()) + b * (b.ln() - a.ln());
        assert!((scalar(&tape, l) - oracle).abs() < 1e-15);
        assert!((oracle - (a - b)).abs() < 1e-15);
    }

    #[test]
    fn kd_errors() {
        let mut tape = Tape::new();
        let z = tape.param(m(&[&[0.0, 1.0]]));
        assert!(kd_loss(&mut tape, &m(&[&[1.0, 0.0, 2.0]]), z, 1.0).is_err());
        assert!(kd_loss(&mut tape, &m(&[&[1.0, 0.0]]), z, -1.0).is_err());
    }

    #[test]
    fn bce_values() {
        let mut tape = Tape::new();
        let z = tape.param(Tensor::zeros(&[2, 3]));
        let l = bce_loss(&mut tape, z, &Tensor::full(&[2, 3], 1.0)).unwrap();
        assert!((scalar(&tape, l) - 2f64.ln()).abs() < 1e-15);

        let z = tape.param(m(&[&[20.0]]));
        let l = bce_loss(&mut tape, z, &m(&[&[1.0]])).unwrap();
        assert!(scalar(&tape, l) < 1e-8);

        let z = tape.param(m(&[&[-800.0, 800.0]]));
        let l = bce_loss(&mut tape, z, &m(&[&[1.0, 0.0]])).unwrap();
        assert!(
            (scalar(&tape, l) - 800.0).abs() < 1e-9,
            "stable at large |z|"
        );

        assert!(bce_loss(&mut tape, z, &m(&[&[0.5, 0.0]])).is_err());
    }

    #[test]
    fn total_loss_arithmetic() {
        let mut tape = Tape::new();
        let p = tape.param(Tensor::scalar(1.0));
        let a = tape.param(Tensor::scalar(0.5));
        let b = tape.param(Tensor::scalar(0.25));
        let none = total_loss(&mut tape, p, &[], 5.0).unwrap();
        assert_eq!(none, p);
        let off = total_loss(&mut tape, p, &[a], 0.0).unwrap();
        assert_eq!(scalar(&tape, off), 1.0);
        let two = total_loss(&mut tape, p, &[a, b], 2.0).unwrap();
        assert_eq!(scalar(&tape, two), 2.5);
        assert!(total_loss(&mut tape, p, &[a], -1.0).is_err());
    }

    #[test]
    fn harden_picks_first_max() {
        let h = harden(&m(&[&[0.2, 0.4, 0.4], &[0.9, 0.05, 0.05]])).unwrap();
        assert_eq!(h.data(), &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    }
}
