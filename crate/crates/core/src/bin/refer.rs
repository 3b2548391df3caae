use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use refer::envs::EnvId;
use refer::harness::evaluate::evaluate;
use refer::harness::{Checkpoint, MetricsWriter, TrainConfig, Trainer};
use refer::nncore::MlpParams;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "refer", version, about = "Train and evaluate ReF-ER agents on small control tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent, writing metrics.csv and checkpoint.bin to the output directory
    Train(TrainArgs),
    /// Run the deterministic policy of a checkpoint
    Evaluate(EvalArgs),
    /// Print a checkpoint header
    Inspect {
        checkpoint: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    algo: Option<String>,
    /// One of refer, refer1, refer2, er, per
    #[arg(long)]
    replay: Option<String>,
    #[arg(long)]
    env: Option<String>,
    /// Advantage head for vracer: none, quadratic or asym_gaussian
    #[arg(long)]
    adv: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// File of key=value lines overriding the defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value override, applied after the config file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Continue from a checkpoint; metrics are appended
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to the environment the checkpoint was trained on
    #[arg(long)]
    env: Option<String>,
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn apply_overrides(cfg: &mut TrainConfig, a: &TrainArgs) -> anyhow::Result<()> {
    if let Some(path) = &a.config {
        cfg.apply_file(path)
            .with_context(|| format!("reading {}", path.display()))?;
    }
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| refer::Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k, v)?;
    }
    let flags = [
        ("algo", a.algo.clone()),
        ("replay", a.replay.clone()),
        ("env", a.env.clone()),
        ("adv", a.adv.clone()),
        ("steps", a.steps.map(|x| x.to_string())),
        ("seed", a.seed.map(|x| x.to_string())),
        ("workers", a.workers.map(|x| x.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    cfg.validate()?;
    Ok(())
}

fn train(a: &TrainArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))?;
    let metrics_path = a.out.join("metrics.csv");
    let (mut trainer, mut writer) = match &a.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            let mut cfg = ckpt.config()?;
            apply_overrides(&mut cfg, a)?;
            (ckpt.into_trainer(Some(cfg))?, MetricsWriter::append(&metrics_path)?)
        }
        None => {
            let mut cfg = TrainConfig::default();
            apply_overrides(&mut cfg, a)?;
            (Trainer::new(cfg)?, MetricsWriter::create(&metrics_path)?)
        }
    };
    let result = trainer.run(|row| writer.write(row));
    writer.flush()?;
    result?;
    let ckpt_path = a.out.join("checkpoint.bin");
    Checkpoint::capture(&trainer).save(&ckpt_path)?;
    println!(
        "trained {} steps ({} gradient steps); wrote {} and {}",
        trainer.t,
        trainer.k,
        metrics_path.display(),
        ckpt_path.display()
    );
    Ok(())
}

fn run_evaluate(a: &EvalArgs) -> anyhow::Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let env = match &a.env {
        Some(e) => EnvId::parse(e).with_context(|| format!("unknown env '{e}'"))?,
        None => EnvId::parse(&ckpt.header.env).context("checkpoint names an unknown env")?,
    };
    let (mean, returns) = evaluate(&ckpt, env, a.episodes, a.seed)?;
    println!("mean_return {mean}");
    for (i, r) in returns.iter().enumerate() {
        println!("episode {i} {r}");
    }
    Ok(())
}

fn inspect(path: &Path) -> anyhow::Result<()> {
    let ckpt = Checkpoint::load(path)?;
    println!("{}", serde_json::to_string_pretty(&ckpt.header)?);
    let mut total = 0;
    for (name, sizes) in &ckpt.header.networks {
        let n = MlpParams::param_count(sizes);
        total += n;
        println!("network {name} layers {sizes:?} parameters {n}");
    }
    println!("parameters {}", ckpt.header.param_count);
    if total > ckpt.header.param_count {
        bail!("network sizes account for {total} parameters, header says {}", ckpt.header.param_count);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Inspect { checkpoint } => inspect(checkpoint),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<refer::Error>() {
                Some(refer::Error::Config(_)) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
