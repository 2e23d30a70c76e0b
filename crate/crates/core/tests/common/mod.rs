#![allow(dead_code)]

use sskt::data::SyntheticTaskPair;
use sskt::losses::{AuxSpec, LossPlan, PrimaryLoss};
use sskt::models::{ConvBlockSpec, TrunkSpec};
use sskt::training::{SchedulerSpec, TrainConfig};

pub fn toy_pair(seed: u64) -> SyntheticTaskPair {
    SyntheticTaskPair {
        n_latent: 6,
        k_target: 3,
        k_source: 4,
        overlap: 0.5,
        image: [1, 8, 8],
        depth: 0,
        noise: 0.1,
        n_train: 96,
        n_test: 64,
        n_source_train: Some(128),
        source_variant: 0,
        multi_label: false,
        seed,
    }
}

pub fn toy_trunk(input: [usize; 3]) -> TrunkSpec {
    TrunkSpec {
        input,
        blocks: vec![
            ConvBlockSpec::new(4, 4, 2, 1),
            ConvBlockSpec::new(6, 3, 1, 1),
        ],
    }
}

pub fn toy_train(epochs: usize, aux: usize, alpha: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        lr: 0.05,
        momentum: 0.9,
        weight_decay: 5e-4,
        scheduler: SchedulerSpec::Step {
            gamma: 0.1,
            milestones: vec![epochs.max(2) - 1],
        },
        epochs,
        batch_size: 16,
        seed,
        loss: LossPlan {
            alpha,
            primary: PrimaryLoss::Ce,
            aux: vec![AuxSpec::default(); aux],
        },
    }
}

/// A preset cut down to a few seconds of work.
pub fn tiny(name: &str) -> sskt::experiment::ExperimentConfig {
    let mut cfg = sskt::experiment::preset(name).unwrap();
    if let sskt::experiment::DataSpec::Synthetic(p) = &mut cfg.data {
        p.n_train = 64;
        p.n_test = 100;
        p.n_source_train = Some(200);
    }
    cfg.train.epochs = 3;
    cfg.train.scheduler = SchedulerSpec::Step {
        gamma: 0.1,
        milestones: vec![2],
    };
    for r in &mut cfg.pretrain {
        r.train.epochs = 3;
        r.train.scheduler = SchedulerSpec::Constant;
    }
    cfg
}
