//! Command-line interface: corpus generation and validation, supervised
//! warm start, RL training, evaluation, and metrics reporting.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cclab::checkpoint;
use cclab::config::{apply_gen_config, apply_run_config, parse_kv};
use cclab::corpus::{
    generate_corpus, load_corpus, save_corpus, split_corpus, validate_instance, GenConfig,
};
use cclab::curriculum::PreparedTask;
use cclab::metrics::read_metrics;
use cclab::optim::AdamConfig;
use cclab::policy::{ModelConfig, PolicyParams};
use cclab::sft::{sft_train, SftConfig};
use cclab::trainer::{evaluate, resume, train, RunConfig};
use cclab::vocab::Vocab;

#[derive(Parser)]
#[command(
    name = "cclab",
    about = "Curriculum code-completion RL laboratory over the ML0 mini language",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic task corpus (JSONL, one task per line).
    GenCorpus(GenCorpusArgs),
    /// Run the cleaning checks on every instance of a corpus.
    Validate(ValidateArgs),
    /// Supervised warm start only; writes params.bin to the output dir.
    Sft(SftArgs),
    /// Full training run: SFT warm start, then curriculum RL with
    /// coverage-masked PPO.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a corpus split (pass@k, category
    /// histogram). Never modifies the checkpoint.
    Eval(EvalArgs),
    /// Summarize a metrics stream.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenCorpusArgs {
    /// Generator seed; the same seed always yields the same corpus.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of tasks to generate.
    #[arg(long, default_value_t = 100)]
    size: usize,
    /// Output path (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Generator config file (flat key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Minimum conditional count E of generated solutions.
    #[arg(long)]
    min_e: Option<u32>,
    /// Maximum conditional count E of generated solutions.
    #[arg(long)]
    max_e: Option<u32>,
    /// Also write a 50/25/25 train/val/test split into this directory.
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Statement-execution budget per test run.
    #[arg(long, default_value_t = ml0::DEFAULT_FUEL)]
    fuel: u64,
}

#[derive(Args)]
struct SftArgs {
    /// Training corpus (JSONL).
    #[arg(long)]
    train: PathBuf,
    /// Output directory for params.bin.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Supervised epochs.
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    /// Adam step size.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    /// Embedding width.
    #[arg(long, default_value_t = 48)]
    embed: usize,
    /// Hidden width of the recurrent trunk.
    #[arg(long, default_value_t = 96)]
    hidden: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Run config file (flat key = value); flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Resume from a checkpoint directory instead of starting fresh.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Training corpus (JSONL).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Held-out corpus for pass@k evaluation.
    #[arg(long)]
    eval: Option<PathBuf>,
    /// Output directory (metrics stream + checkpoints).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; fixes every stochastic component.
    #[arg(long)]
    seed: Option<u64>,
    /// RL updates to run.
    #[arg(long)]
    updates: Option<u64>,
    /// Tasks per update (mini-batch M, default 8).
    #[arg(long)]
    batch_tasks: Option<usize>,
    /// Completions per task per update (default 16).
    #[arg(long)]
    rollouts: Option<usize>,
    /// Sampling temperature during training (default 0.8).
    #[arg(long)]
    temperature: Option<f64>,
    /// Nucleus mass during training (default 0.9).
    #[arg(long)]
    top_p: Option<f64>,
    /// Generation budget per completion (default 64).
    #[arg(long)]
    max_new_tokens: Option<usize>,
    /// Per-token KL penalty coefficient (default 0.05).
    #[arg(long)]
    beta: Option<f64>,
    /// PPO clip radius (default 0.2; set 0.8 for the loose variant).
    #[arg(long)]
    clip: Option<f64>,
    /// Ablation: start every sample at full generation (no curriculum).
    #[arg(long)]
    disable_cccs: bool,
    /// Ablation: keep every generated token in the loss (no coverage
    /// masking).
    #[arg(long)]
    disable_fgo: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint directory (params.bin inside) or a params.bin path.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Samples per task.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// pass@k cutoff.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Decoding temperature.
    #[arg(long, default_value_t = 0.2)]
    temperature: f64,
    /// Decoding nucleus mass.
    #[arg(long, default_value_t = 0.95)]
    top_p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    max_new_tokens: usize,
    #[arg(long, default_value_t = ml0::DEFAULT_FUEL)]
    fuel: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Metrics stream written by `train`.
    #[arg(long)]
    metrics: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenCorpus(args) => {
            let mut cfg = GenConfig::default();
            if let Some(path) = &args.config {
                let map = parse_kv(&std::fs::read_to_string(path)?)?;
                apply_gen_config(&mut cfg, &map)?;
            }
            if let Some(min_e) = args.min_e {
                cfg.min_cond = min_e;
            }
            if let Some(max_e) = args.max_e {
                cfg.max_cond = max_e;
            }
            let corpus = generate_corpus(args.seed, args.size, &cfg);
            save_corpus(&corpus, &args.out)?;
            println!("wrote {} tasks to {}", corpus.len(), args.out.display());
            if let Some(dir) = &args.split {
                std::fs::create_dir_all(dir)?;
                let (train_set, val, test) = split_corpus(&corpus, args.seed);
                save_corpus(&train_set, &dir.join("train.jsonl"))?;
                save_corpus(&val, &dir.join("val.jsonl"))?;
                save_corpus(&test, &dir.join("test.jsonl"))?;
                println!(
                    "split {}/{}/{} into {}",
                    train_set.len(),
                    val.len(),
                    test.len(),
                    dir.display()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let corpus = load_corpus(&args.corpus)?;
            let mut rejected = 0usize;
            for inst in &corpus {
                let report = validate_instance(inst, args.fuel);
                if let Some(reason) = report.reject_reason() {
                    rejected += 1;
                    println!("REJECT {} ({reason})", inst.id);
                }
            }
            println!(
                "{} accepted, {} rejected of {}",
                corpus.len() - rejected,
                rejected,
                corpus.len()
            );
            if rejected > 0 {
                Ok(ExitCode::FAILURE)
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Sft(args) => {
            let corpus = load_corpus(&args.train)?;
            cclab::trainer::validate_corpus(&corpus, ml0::DEFAULT_FUEL)
                .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let vocab = Vocab::standard();
            let mut params = PolicyParams::init(
                ModelConfig {
                    vocab: vocab.len(),
                    embed: args.embed,
                    hidden: args.hidden,
                },
                args.seed,
            );
            let losses = sft_train(
                &mut params,
                &corpus,
                &vocab,
                &SftConfig {
                    epochs: args.epochs,
                    lr: args.lr,
                    batch_size: args.batch,
                    seed: args.seed,
                },
                &AdamConfig::default(),
            );
            std::fs::create_dir_all(&args.out)?;
            let path = args.out.join("params.bin");
            checkpoint::save_params(&path, &params, &vocab)?;
            println!("epoch nll: {losses:?}");
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Train(args) => {
            if let Some(dir) = &args.resume {
                let outcome = resume(dir).map_err(|e| anyhow::anyhow!(e.to_string()))?;
                print_outcome(&outcome);
                return Ok(ExitCode::SUCCESS);
            }
            let mut cfg = RunConfig::default();
            if let Some(path) = &args.config {
                let map = parse_kv(&std::fs::read_to_string(path)?)?;
                apply_run_config(&mut cfg, &map)?;
            }
            if let Some(v) = args.train {
                cfg.corpus_train = v;
            }
            if let Some(v) = args.eval {
                cfg.corpus_eval = Some(v);
            }
            if let Some(v) = args.out {
                cfg.out_dir = v;
            }
            if let Some(v) = args.seed {
                cfg.seed = v;
            }
            if let Some(v) = args.updates {
                cfg.updates = v;
            }
            if let Some(v) = args.batch_tasks {
                cfg.batch_tasks = v;
            }
            if let Some(v) = args.rollouts {
                cfg.ppo.rollouts_per_sample = v;
            }
            if let Some(v) = args.temperature {
                cfg.temperature = v;
            }
            if let Some(v) = args.top_p {
                cfg.top_p = v;
            }
            if let Some(v) = args.max_new_tokens {
                cfg.max_new_tokens = v;
            }
            if let Some(v) = args.beta {
                cfg.ppo.beta = v;
            }
            if let Some(v) = args.clip {
                cfg.ppo.clip = v;
            }
            if args.disable_cccs {
                cfg.disable_cccs = true;
            }
            if args.disable_fgo {
                cfg.disable_fgo = true;
            }
            let outcome = train(&cfg).map_err(|e| anyhow::anyhow!(e.to_string()))?;
            print_outcome(&outcome);
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval(args) => {
            let params_path = if args.checkpoint.is_dir() {
                args.checkpoint.join("params.bin")
            } else {
                args.checkpoint.clone()
            };
            let (params, _) = checkpoint::load_params(&params_path)?;
            let corpus = load_corpus(&args.corpus)?;
            let vocab = Vocab::standard();
            let tasks: Vec<PreparedTask> = corpus
                .into_iter()
                .map(|t| PreparedTask::new(&vocab, t))
                .collect();
            let run_cfg = RunConfig {
                seed: args.seed,
                eval_temperature: args.temperature,
                eval_top_p: args.top_p,
                max_new_tokens: args.max_new_tokens,
                fuel: args.fuel,
                ..Default::default()
            };
            let report = evaluate(&params, &vocab, &tasks, args.n, args.k, &run_cfg, 0);
            println!(
                "pass@{} = {:.4} over {} tasks ({} samples each)",
                report.k,
                report.pass_at_k,
                report.per_task.len(),
                report.n
            );
            println!(
                "categories: passed {} failed {} runtime-error {} compile-error {}",
                report.histogram[0], report.histogram[1], report.histogram[2], report.histogram[3]
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(args) => {
            let records = read_metrics(&args.metrics)?;
            if records.is_empty() {
                println!("metrics stream is empty");
                return Ok(ExitCode::SUCCESS);
            }
            print_report(&records);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_outcome(outcome: &cclab::trainer::TrainOutcome) {
    println!("metrics: {}", outcome.metrics_path.display());
    println!("checkpoint: {}", outcome.checkpoint_dir.display());
    if let Some(eval) = &outcome.final_eval {
        println!(
            "final eval pass@{} = {:.4} (passed {} failed {} runtime-error {} compile-error {})",
            eval.k,
            eval.pass_at_k,
            eval.histogram[0],
            eval.histogram[1],
            eval.histogram[2],
            eval.histogram[3]
        );
    }
}

fn print_report(records: &[cclab::metrics::MetricsRecord]) {
    let n = records.len();
    let windows = [(0, n / 3), (n / 3, 2 * n / 3), (2 * n / 3, n)];
    println!("updates: {n}");
    println!(
        "{:<8} {:>8} {:>8} {:>8} {:>8} | {:>7} {:>7} {:>7} {:>7}",
        "window", "reward", "pass1", "stage", "masked", "pass", "fail", "runtime", "compile"
    );
    for (i, &(lo, hi)) in windows.iter().enumerate() {
        if lo >= hi {
            continue;
        }
        let m = (hi - lo) as f64;
        let mean = |f: &dyn Fn(&cclab::metrics::MetricsRecord) -> f64| {
            records[lo..hi].iter().map(f).sum::<f64>() / m
        };
        let frac = |f: &dyn Fn(&cclab::metrics::MetricsRecord) -> u64| {
            records[lo..hi]
                .iter()
                .map(|r| f(r) as f64 / r.total_rollouts().max(1) as f64)
                .sum::<f64>()
                / m
        };
        println!(
            "third {:<2} {:>8.3} {:>8.3} {:>8.3} {:>8.3} | {:>7.3} {:>7.3} {:>7.3} {:>7.3}",
            i + 1,
            mean(&|r| r.mean_reward),
            mean(&|r| r.pass1_train),
            mean(&|r| r.mean_stage),
            mean(&|r| r.masked_fraction),
            frac(&|r| r.passed),
            frac(&|r| r.failed),
            frac(&|r| r.runtime_error),
            frac(&|r| r.compile_error),
        );
    }
    let last = records.last().unwrap();
    println!(
        "final: update {} reward {:.3} pass1(train) {:.3} mean stage {:.3}",
        last.update, last.mean_reward, last.pass1_train, last.mean_stage
    );
    if let Some(eval) = records.iter().rev().find_map(|r| r.pass1_eval) {
        println!("latest eval pass@1: {eval:.4}");
    }
}
