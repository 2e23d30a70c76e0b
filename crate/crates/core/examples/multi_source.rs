//! Two different sources attached to one target, each through its own
//! auxiliary head and transfer module.
//!
//! `cargo run --release --example multi_source [out_dir]`

use std::path::PathBuf;

use sskt::experiment::{preset, pretrain_source, run_experiment, Overrides};

fn main() -> sskt::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "runs/multi_source".into()),
    );
    let mut cfg = preset("multi_source")?;

    let mut sources = Vec::new();
    for i in 0..cfg.pretrain.len() {
        let dir = out.join(format!("source_{i}"));
        let s = pretrain_source(&cfg, i, Some(&dir))?;
        println!(
            "{}: {} classes, test accuracy {:.4}",
            s.group,
            cfg.pretrain[i].k_source.unwrap(),
            s.final_metric
        );
        sources.push(dir);
    }

    let scratch = run_experiment(&cfg, Some(&out.join("scratch")))?;
    cfg.apply(&Overrides {
        sources: Some(sources),
        ..Overrides::default()
    })?;
    let sskt = run_experiment(&cfg, Some(&out.join("sskt")))?;
    println!(
        "scratch {:.4}  two sources {:.4}",
        scratch.final_metric, sskt.final_metric
    );
    Ok(())
}
