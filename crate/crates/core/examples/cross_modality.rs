//! An image source supervising a clip target through the center-frame transform.
//!
//! `cargo run --release --example cross_modality [out_dir]`

use std::path::PathBuf;

use sskt::experiment::{preset, pretrain_source, run_experiment, Overrides};
use sskt::source::center_frame;
use sskt::Tensor;

fn main() -> sskt::Result<()> {
    // [B, C, D, H, W] with frame d filled with the value d.
    let clip = Tensor::new(
        vec![1, 1, 16, 2, 2],
        (0..16).flat_map(|d| [d as f64; 4]).collect(),
    )?;
    println!(
        "center frame of a 16-frame clip: {:?}",
        center_frame(&clip)?.data()
    );

    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "runs/cross_modality".into()),
    );
    let mut cfg = preset("ic_to_ac")?;
    let src = pretrain_source(&cfg, 0, Some(&out.join("source")))?;
    println!("image source test accuracy {:.4}", src.final_metric);

    let scratch = run_experiment(&cfg, Some(&out.join("scratch")))?;
    cfg.apply(&Overrides {
        sources: Some(vec![out.join("source")]),
        ..Overrides::default()
    })?;
    let sskt = run_experiment(&cfg, Some(&out.join("sskt")))?;
    println!(
        "clip accuracy: scratch {:.4}  sskt {:.4}",
        scratch.final_metric, sskt.final_metric
    );
    Ok(())
}
