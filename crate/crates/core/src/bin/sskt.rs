use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sskt::experiment::{
    compare, evaluate_checkpoint, load_splits, preset, pretrain_source, run_experiment,
    write_comparison, write_dataset, DataSpec, ExperimentConfig, Overrides, Split,
};

#[derive(Parser)]
#[command(
    name = "sskt",
    version,
    about = "Self-supervised knowledge transfer experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML or JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in config: ic_to_ic, ic_to_mcic, ic_to_ac, multi_source.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::from_path(path)
                .with_context(|| format!("loading {}", path.display())),
            (None, Some(name)) => Ok(preset(name)?),
            (None, None) => bail!("pass --config <file> or --preset <name>"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic task pair of a config to disk.
    Generate(ConfigArgs),
    /// Train one source network from the config's pretrain recipes.
    PretrainSource {
        #[command(flatten)]
        base: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        source_index: usize,
    },
    /// Train a target network, with or without sources.
    Train {
        #[command(flatten)]
        base: ConfigArgs,
        /// Source checkpoint directories, replacing those in the config.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        sources: Option<Vec<PathBuf>>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        use_tm: Option<bool>,
    },
    /// Score a checkpoint on one split of the config's data.
    Evaluate {
        #[command(flatten)]
        base: ConfigArgs,
        /// Checkpoint directory; defaults to --out.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "target-test")]
        split: SplitArg,
    },
    /// Tabulate final metrics of several run directories.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SplitArg {
    SourceTrain,
    SourceTest,
    TargetTrain,
    TargetTest,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::SourceTrain => Split::SourceTrain,
            SplitArg::SourceTest => Split::SourceTest,
            SplitArg::TargetTrain => Split::TargetTrain,
            SplitArg::TargetTest => Split::TargetTest,
        }
    }
}

fn out_dir(base: &ConfigArgs, cfg: &ExperimentConfig) -> Result<PathBuf> {
    base.out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .context("no output directory: pass --out or set out_dir")
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(base) => {
            let mut cfg = base.load()?;
            if let (Some(seed), DataSpec::Synthetic(pair)) = (base.seed, &mut cfg.data) {
                pair.seed = seed;
            }
            let out = out_dir(&base, &cfg)?;
            write_dataset(&load_splits(&cfg.data)?, &out)?;
            println!("wrote dataset to {}", out.display());
        }
        Command::PretrainSource { base, source_index } => {
            let mut cfg = base.load()?;
            if let (Some(seed), Some(r)) = (base.seed, cfg.pretrain.get_mut(source_index)) {
                r.train.seed = seed;
            }
            let out = out_dir(&base, &cfg)?;
            let s = pretrain_source(&cfg, source_index, Some(&out))?;
            println!(
                "{} {:?} {:.4} ({:.1}s) -> {}",
                s.group,
                s.metric,
                s.final_metric,
                s.wall_time_secs,
                out.display()
            );
        }
        Command::Train {
            base,
            sources,
            alpha,
            temperature,
            use_tm,
        } => {
            let mut cfg = base.load()?;
            cfg.apply(&Overrides {
                seed: base.seed,
                alpha,
                temperature,
                use_tm,
                sources,
                out_dir: base.out.clone(),
            })?;
            let out = out_dir(&base, &cfg)?;
            let s = run_experiment(&cfg, Some(&out))?;
            println!(
                "{} seed {} {:?} {:.4} ({:.1}s) -> {}",
                s.group,
                s.seed,
                s.metric,
                s.final_metric,
                s.wall_time_secs,
                out.display()
            );
        }
        Command::Evaluate {
            base,
            checkpoint,
            split,
        } => {
            let cfg = base.load()?;
            let dir = checkpoint
                .or_else(|| base.out.clone())
                .context("pass --checkpoint <dir>")?;
            let (metric, value) = evaluate_checkpoint(&cfg, &dir, split.into())?;
            println!(
                "{}",
                serde_json::json!({ "checkpoint": dir, "metric": metric, "value": value })
            );
        }
        Command::Compare { runs, out } => {
            let cmp = compare(&runs)?;
            print!("{}", cmp.to_text());
            if let Some(dir) = out.as_deref().map(Path::to_path_buf) {
                write_comparison(&cmp, &dir)?;
            }
        }
    }
    Ok(())
}
