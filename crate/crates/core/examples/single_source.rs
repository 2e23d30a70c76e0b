//! Pretrains a source network, then trains the target from scratch and with
//! SSKT over a few seeds and compares the two groups.
//!
//! `cargo run --release --example single_source [out_dir]`

use std::path::PathBuf;

use sskt::experiment::{compare, preset, pretrain_source, run_experiment, Overrides};

fn main() -> sskt::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "runs/single_source".into()),
    );
    let cfg = preset("ic_to_ic")?;

    let src = pretrain_source(&cfg, 0, Some(&out.join("source")))?;
    println!("source test accuracy {:.4}", src.final_metric);

    let mut runs = Vec::new();
    for seed in 0..3 {
        for sources in [vec![], vec![out.join("source")]] {
            let mut run = cfg.clone();
            run.apply(&Overrides {
                seed: Some(seed),
                sources: Some(sources),
                ..Overrides::default()
            })?;
            let dir = out.join(format!("{}_{seed}", run.group()));
            let s = run_experiment(&run, Some(&dir))?;
            println!("{:<8} seed {seed}: {:.4}", s.group, s.final_metric);
            runs.push(dir);
        }
    }
    print!("{}", compare(&runs)?.to_text());
    Ok(())
}
