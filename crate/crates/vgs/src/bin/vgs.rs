//! Thin command-line front end. All real work lives in `vgs::commands`;
//! this file only parses arguments, dispatches, prints results, and maps
//! errors onto exit codes: 0 success, 1 operational failure, 2 bad usage
//! or configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vgs::commands::{
    cmd_compare_aic, cmd_eval_retrieval, cmd_eval_sts, cmd_extract_features, cmd_make_subsets,
    cmd_train, RunConfig,
};
use vgs::data::Split;
use vgs::error::Error;
use vgs::train::SubsetSpec;

#[derive(Parser)]
#[command(name = "vgs", version, about = "Train and evaluate visually grounded speech models")]
struct Cli {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for feature extraction and embedding.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory that relative audio paths resolve against.
    #[arg(long, global = true, env = "VGS_DATA_ROOT", default_value = ".")]
    data_root: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract MFCC features for every caption in a dataset manifest.
    ExtractFeatures {
        /// Dataset manifest (TSV).
        manifest: PathBuf,
        /// Output directory for the feature pack.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the caption and image encoders with the contrastive loss.
    Train {
        /// Dataset manifest (TSV).
        manifest: PathBuf,
        /// Feature pack directory or .feats file from extract-features.
        #[arg(long)]
        features: PathBuf,
        /// Image feature file.
        #[arg(long)]
        images: PathBuf,
        /// Output directory for checkpoints and logs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Carve nested paraphrase subsets out of the training split.
    MakeSubsets {
        /// Dataset manifest (TSV).
        manifest: PathBuf,
        /// Caption budget shared by every subset.
        #[arg(long, default_value_t = 30_000)]
        total_captions: usize,
        /// Captions kept per image, one subset per value.
        #[arg(long, value_delimiter = ',', default_value = "5,4,3,2,1")]
        captions_per_image: Vec<usize>,
        /// Output directory for the subset manifests.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score caption/image retrieval in both directions for a checkpoint.
    EvalRetrieval {
        /// Dataset manifest (TSV).
        manifest: PathBuf,
        /// Trained model checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Feature pack directory or .feats file.
        #[arg(long)]
        features: PathBuf,
        /// Image feature file.
        #[arg(long)]
        images: PathBuf,
        /// Which split to evaluate.
        #[arg(long, default_value = "test")]
        split: String,
        /// Output directory for the report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on spoken sentence-similarity pairs.
    EvalSts {
        /// STS manifest (TSV) listing recordings per sentence.
        manifest: PathBuf,
        /// Trained model checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory for the report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank similarity sources by AIC of linear fits to human scores.
    CompareAic {
        /// Two or more CSVs with columns human,model_sim.
        sims: Vec<PathBuf>,
        /// Output directory for the report.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(Error::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    config.override_seed(cli.seed);

    match cli.command {
        Command::ExtractFeatures { manifest, out } => {
            let summary = cmd_extract_features(&manifest, &cli.data_root, &config, &out)?;
            println!(
                "wrote {} feature sets to {}",
                summary.written,
                summary.pack_path.display()
            );
            if !summary.failures.is_empty() {
                eprintln!("{} recordings failed:", summary.failures.len());
                for (path, reason) in &summary.failures {
                    eprintln!("  {}: {reason}", path.display());
                }
                return Ok(ExitCode::from(1));
            }
        }
        Command::Train {
            manifest,
            features,
            images,
            out,
        } => {
            let run = cmd_train(&manifest, &features, &images, &config, &out)?;
            for r in &run.records {
                println!(
                    "epoch {:3}  train_loss {:.4}  dev_error {:.4}",
                    r.epoch, r.train_loss, r.dev_error
                );
            }
            println!(
                "best epoch {} (dev error {:.4}), log at {}",
                run.best_epoch,
                run.records[run.best_epoch as usize - 1].dev_error,
                run.log_path.display()
            );
        }
        Command::MakeSubsets {
            manifest,
            total_captions,
            captions_per_image,
            out,
        } => {
            let specs = captions_per_image
                .iter()
                .map(|&c| SubsetSpec::new(total_captions, c))
                .collect::<Result<Vec<_>, _>>()?;
            let paths = cmd_make_subsets(&manifest, &specs, &out)?;
            for path in &paths {
                println!("wrote {}", path.display());
            }
        }
        Command::EvalRetrieval {
            manifest,
            checkpoint,
            features,
            images,
            split,
            out,
        } => {
            let split = Split::parse(&split).ok_or_else(|| {
                Error::Config(format!("unknown split '{split}', expected train, dev, or test"))
            })?;
            let report = cmd_eval_retrieval(&manifest, &checkpoint, &features, &images, split, &out)?;
            for (direction, m) in [
                ("caption -> image", &report.caption_to_image),
                ("image -> caption", &report.image_to_caption),
            ] {
                println!(
                    "{direction}: R@1 {:.1}%  R@5 {:.1}%  R@10 {:.1}%  med r {}  ({} queries)",
                    m.r_at_1, m.r_at_5, m.r_at_10, m.med_r, m.queries
                );
            }
        }
        Command::EvalSts {
            manifest,
            checkpoint,
            out,
        } => {
            let report = cmd_eval_sts(&manifest, &checkpoint, &cli.data_root, &config, &out)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for s in report.subtasks.iter().chain([&report.overall]) {
                println!(
                    "{}: r {:.4}  95% CI [{:.4}, {:.4}]  ({} pairs)",
                    s.subtask, s.r, s.ci_lo, s.ci_hi, s.pairs
                );
            }
        }
        Command::CompareAic { sims, out } => {
            let report = cmd_compare_aic(&sims, &out)?;
            println!("n = {} pairs per model", report.n);
            for row in &report.rows {
                println!(
                    "{:<24} AIC {:>10.1}  dAIC {:>8.2}  LL {:>12.2}",
                    row.label, row.aic, row.delta_aic, row.log_likelihood
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
