use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::evaluate::{evaluate, MetricKind};
use super::metrics::{EpochRecord, RunMetrics};
use super::optim::{sgd_step, SgdState};
use super::schedule::LrScheduler;
use crate::autodiff::{Tape, Var};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{
    bce_loss, ce_loss, ce_soft_loss, harden, kd_loss, total_loss, AuxLoss, PrimaryLoss,
};
use crate::models::TargetNetwork;
use crate::source::SourceTask;
use crate::tensor::Tensor;

/// Visiting order for `epoch`, a pure function of `(seed, epoch)`.
pub fn epoch_permutation(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    perm
}

fn check_arity(
    net: &TargetNetwork,
    sources: &[SourceTask],
    train_data: &Dataset,
    cfg: &TrainConfig,
) -> Result<()> {
    let m = sources.len();
    if cfg.loss.aux.len() != m {
        return Err(Error::invalid(format!(
            "loss plan has {} auxiliary terms for {m} sources",
            cfg.loss.aux.len()
        )));
    }
    if net.num_aux_heads() != m {
        return Err(Error::invalid(format!(
            "network has {} auxiliary heads for {m} sources",
            net.num_aux_heads()
        )));
    }
    for (i, (s, &k)) in sources.iter().zip(&net.spec().source_classes).enumerate() {
        if s.num_classes() != k {
            return Err(Error::invalid(format!(
                "auxiliary head {i} has {k} outputs but source `{}` has {} classes",
                s.name(),
                s.num_classes()
            )));
        }
    }
    if train_data.num_classes() != net.spec().num_classes {
        return Err(Error::invalid(format!(
            "dataset has {} classes, primary head has {}",
            train_data.num_classes(),
            net.spec().num_classes
        )));
    }
    match (cfg.loss.primary, train_data.is_multi_label()) {
        (PrimaryLoss::Ce, true) => Err(Error::invalid("CE primary loss needs single-label data")),
        (PrimaryLoss::Bce, false) => Err(Error::invalid("BCE primary loss needs multi-hot labels")),
        _ => Ok(()),
    }
}

struct StepLosses {
    primary: f64,
    aux: Vec<f64>,
    total: f64,
}

fn train_step(
    net: &mut TargetNetwork,
    sources: &[SourceTask],
    x: &Tensor,
    y: &Tensor,
    cfg: &TrainConfig,
    state: &mut SgdState,
    lr: f64,
) -> Result<StepLosses> {
    let plan = &cfg.loss;
    let mut tape = Tape::new();
    let pass = net.forward(&mut tape, x, true)?;
    let primary = match plan.primary {
        PrimaryLoss::Ce => ce_loss(&mut tape, pass.primary_logits, y, 1.0)?,
        PrimaryLoss::Bce => bce_loss(&mut tape, pass.primary_logits, y)?,
    };
    let mut aux: Vec<Var> = Vec::with_capacity(sources.len());
    for ((source, spec), &head) in sources.iter().zip(&plan.aux).zip(&pass.aux_logits) {
        // Source outputs are plain tensors; they never join this tape as parameters.
        let out = source.infer(x)?;
        let term = match spec.kind {
            AuxLoss::CeSoft if spec.harden_labels => {
                ce_soft_loss(&mut tape, head, &harden(&out.soft_label)?, spec.temperature)?
            }
            AuxLoss::CeSoft => ce_soft_loss(&mut tape, head, &out.soft_label, spec.temperature)?,
            AuxLoss::Kd => kd_loss(&mut tape, &out.logits, head, spec.temperature)?,
        };
        aux.push(term);
    }
    let total = total_loss(&mut tape, primary, &aux, plan.alpha)?;
    let grads = tape.backward(total)?;
    let grads: Vec<Tensor> = pass
        .param_vars
        .iter()
        .map(|&v| grads.get(v).expect("parameters are grad-enabled").clone())
        .collect();
    sgd_step(
        net.params_mut().tensors_mut(),
        &grads,
        state,
        lr,
        cfg.momentum,
        cfg.weight_decay,
    )?;
    Ok(StepLosses {
        primary: tape.value(primary).item()?,
        aux: aux
            .iter()
            .map(|&a| tape.value(a).item())
            .collect::<Result<_>>()?,
        total: tape.value(total).item()?,
    })
}

/// Trains `net` on `train_data`, evaluating on `eval_data` after every epoch.
///
/// Each batch runs one trunk pass, queries every source on the same inputs
/// (through its transform), sums `primary + alpha * sum(aux)`, and applies one
/// SGD step. Only the per-epoch permutation consumes randomness, so attaching
/// sources never changes the batch order.
pub fn train(
    net: &mut TargetNetwork,
    sources: &[SourceTask],
    train_data: &Dataset,
    eval_data: &Dataset,
    cfg: &TrainConfig,
) -> Result<RunMetrics> {
    cfg.validate()?;
    check_arity(net, sources, train_data, cfg)?;
    if train_data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let metric = MetricKind::for_dataset(train_data);
    let mut scheduler = LrScheduler::new(cfg.lr, cfg.scheduler.clone());
    let mut state = SgdState::new();
    let mut records = Vec::with_capacity(cfg.epochs);
    let n = train_data.len();

    for epoch in 0..cfg.epochs {
        let lr = scheduler.lr(epoch);
        let mut primary = 0.0;
        let mut aux = vec![0.0; sources.len()];
        let mut total = 0.0;
        let perm = epoch_permutation(n, cfg.seed, epoch);
        for (b, batch) in perm.chunks(cfg.batch_size).enumerate() {
            let x = train_data.batch_inputs(batch);
            let y = train_data.batch_targets(batch);
            let step =
                train_step(net, sources, &x, &y, cfg, &mut state, lr).map_err(|e| match e {
                    Error::NonFinite(ctx) => {
                        Error::NonFinite(format!("{ctx} (epoch {epoch}, batch {b}, lr {lr})"))
                    }
                    other => other,
                })?;
            let w = batch.len() as f64 / n as f64;
            primary += w * step.primary;
            total += w * step.total;
            for (a, s) in aux.iter_mut().zip(&step.aux) {
                *a += w * s;
            }
        }
        let eval_metric = evaluate(net, eval_data, metric)?;
        scheduler.observe(eval_metric, total);
        records.push(EpochRecord {
            epoch,
            lr,
            loss_primary: primary,
            loss_aux: aux,
            loss_total: total,
            eval_metric,
        });
    }
    Ok(RunMetrics {
        metric,
        num_aux: sources.len(),
        records,
    })
}
