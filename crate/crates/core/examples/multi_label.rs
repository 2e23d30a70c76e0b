//! Multi-label target trained with BCE and scored by mean average precision.
//!
//! `cargo run --release --example multi_label [out_dir]`

use std::path::PathBuf;

use sskt::experiment::{preset, pretrain_source, run_experiment, Overrides};
use sskt::losses::mean_average_precision;
use sskt::Tensor;

fn main() -> sskt::Result<()> {
    let scores = Tensor::new(vec![4, 1], vec![0.9, 0.8, 0.7, 0.6])?;
    let labels = Tensor::new(vec![4, 1], vec![1.0, 0.0, 1.0, 0.0])?;
    println!(
        "toy ranking AP = {:.4}",
        mean_average_precision(&scores, &labels)?.map
    );

    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "runs/multi_label".into()),
    );
    let mut cfg = preset("ic_to_mcic")?;
    pretrain_source(&cfg, 0, Some(&out.join("source")))?;
    let scratch = run_experiment(&cfg, Some(&out.join("scratch")))?;
    cfg.apply(&Overrides {
        sources: Some(vec![out.join("source")]),
        ..Overrides::default()
    })?;
    let sskt = run_experiment(&cfg, Some(&out.join("sskt")))?;
    println!(
        "mAP: scratch {:.4}  sskt {:.4}",
        scratch.final_metric, sskt.final_metric
    );
    Ok(())
}
