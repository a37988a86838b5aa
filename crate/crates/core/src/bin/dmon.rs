use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dmon::checkpoint::{load_checkpoint, save_checkpoint};
use dmon::config::RunConfig;
use dmon::corpus::{generate_synthetic_corpus, parse_corpus, write_jsonl, PlantedRule, SynthSpec};
use dmon::error::{Error, Result};
use dmon::experiment::{
    ablate, evaluate, fit, plot_sweep, sweep, write_report, write_table, Dataset, Table, Variant,
};
use dmon::fusion::PredictionMode;
use dmon::metrics::ColumnSpec;
use dmon::training::{config_hash, encode_corpus, StepRecord, Trainer};

#[derive(Parser)]
#[command(
    name = "dmon",
    version,
    about = "Dual-tower convolution network for argument relation prediction"
)]
struct Cli {
    /// TOML run configuration; desk-scale defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the run seed (the corpus seed for `synth`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for every output file.
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,
    /// Suppress progress output.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic JSONL corpus.
    Synth(SynthArgs),
    /// Train one model and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a corpus.
    Eval(EvalArgs),
    /// Train and evaluate at several window sizes.
    Sweep(SweepArgs),
    /// Train and evaluate ablation variants.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    docs: u64,
    #[arg(long, default_value = "chain")]
    rule: PlantedRule,
    #[arg(long, default_value_t = 8)]
    min_sentences: usize,
    #[arg(long, default_value_t = 8)]
    max_sentences: usize,
    /// Output file; `<out-dir>/corpus.jsonl` by default.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Training corpus (file or directory, per --format).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Validation corpus; enables best-checkpoint selection.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Test corpus scored by sweep and ablate.
    #[arg(long)]
    test: Option<PathBuf>,
    /// jsonl, abstrct_like, cdcp_like or scidtb_like.
    #[arg(long)]
    format: Option<String>,
    /// Optimizer steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Crop window size.
    #[arg(long)]
    window: Option<usize>,
    /// Report column preset: abstrct, cdcp, scidtb or per_class.
    #[arg(long)]
    columns: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Ablation variant, e.g. full, no_HT, no_T, ord_shuffle.
    #[arg(long, default_value = "full")]
    variant: Variant,
    /// Continue from this checkpoint directory.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint directory holding manifest.json and params.npz.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Corpus to evaluate; `data.test` from the config by default.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    columns: Option<String>,
    /// fused, head_only or tail_only; the checkpoint's mode by default.
    #[arg(long)]
    prediction: Option<String>,
    #[arg(long)]
    include_diagonal: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated window sizes.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated variant names.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

struct Ctx {
    out_dir: PathBuf,
    quiet: bool,
    seed: Option<u64>,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::desk_scale()),
    }
}

fn apply_data_args(cfg: &mut RunConfig, args: &DataArgs, seed: Option<u64>) -> Result<()> {
    for (slot, flag) in [
        (&mut cfg.data.train, &args.train),
        (&mut cfg.data.valid, &args.valid),
        (&mut cfg.data.test, &args.test),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(f) = &args.format {
        cfg.data.format = f.clone();
    }
    if let Some(s) = args.steps {
        cfg.train.total_steps = s;
    }
    if let Some(m) = args.window {
        cfg.train.window_size = m;
    }
    if let Some(c) = &args.columns {
        cfg.eval.columns = c.clone();
    }
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    cfg.validate()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_synth(ctx: &Ctx, args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec::new(
        args.docs as usize,
        (args.min_sentences, args.max_sentences),
        args.rule,
        ctx.seed.unwrap_or(0),
    );
    let docs = generate_synthetic_corpus(&spec)?;
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| ctx.out("corpus.jsonl"));
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_jsonl(&docs, &path)?;
    ctx.say(format!(
        "wrote {} documents to {}",
        docs.len(),
        path.display()
    ));
    Ok(())
}

fn write_log(path: &Path, log: &[StepRecord]) -> Result<()> {
    let mut text = String::new();
    for r in log {
        text.push_str(&serde_json::to_string(r).map_err(|e| Error::Serialize(e.to_string()))?);
        text.push('\n');
    }
    write_text(path, &text)
}

fn cmd_train(ctx: &Ctx, cfg_path: Option<&Path>, args: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    apply_data_args(&mut cfg, &args.data, ctx.seed)?;
    let (train_cfg, mode) = args.variant.apply(&cfg.train, cfg.eval.prediction);
    let docs = cfg.read_split("train")?;
    let space = cfg.label_space(&docs)?;
    let columns = ColumnSpec::named(&cfg.eval.columns, &space)?;
    let valid = cfg
        .data
        .valid
        .as_ref()
        .map(|_| cfg.read_split("valid"))
        .transpose()?;
    ctx.say(format!(
        "training {} on {} documents, config {}",
        args.variant,
        docs.len(),
        cfg.hash()
    ));
    write_text(&ctx.out("config.toml"), &cfg.to_toml()?)?;
    let data = Dataset::encode(&train_cfg, space.clone(), &docs, valid.as_deref(), &[])?;

    let (state, log, best) = if let Some(resume) = &args.resume {
        let ck = load_checkpoint(resume)?;
        let mut trainer = Trainer::resume(train_cfg.clone(), &data.train, ck.state)?;
        let mut log = Vec::new();
        while !trainer.is_done() {
            log.push(trainer.step()?);
            maybe_checkpoint(ctx, &trainer, &train_cfg, &space, mode)?;
        }
        (trainer.into_state(), log, None)
    } else if train_cfg.checkpoint_every > 0 {
        let mut trainer = Trainer::new(train_cfg.clone(), &data.train, space.len())?;
        let mut log = Vec::new();
        while !trainer.is_done() {
            log.push(trainer.step()?);
            maybe_checkpoint(ctx, &trainer, &train_cfg, &space, mode)?;
        }
        (trainer.into_state(), log, None)
    } else {
        let fitted = fit(&data, &train_cfg, mode, &columns)?;
        let best = fitted
            .outcome
            .best
            .as_ref()
            .map(|(step, score, _)| (*step, *score, fitted.selected.clone()));
        (fitted.outcome.state, fitted.outcome.log, best)
    };

    write_log(&ctx.out("train_log.jsonl"), &log)?;
    save_checkpoint(&ctx.out("checkpoint"), &state, &train_cfg, &space, mode)?;
    if let Some((step, score, params)) = best {
        let mut selected = state.clone();
        selected.params = params;
        save_checkpoint(&ctx.out("best"), &selected, &train_cfg, &space, mode)?;
        ctx.say(format!("best validation F1 {score:.4} at step {step}"));
    }
    if let Some(last) = log.last() {
        ctx.say(format!("step {} loss {:.4}", last.step, last.loss));
    }
    ctx.say(format!(
        "checkpoint written to {}",
        ctx.out("checkpoint").display()
    ));
    Ok(())
}

fn maybe_checkpoint(
    ctx: &Ctx,
    trainer: &Trainer,
    cfg: &dmon::TrainConfig,
    space: &dmon::LabelSpace,
    mode: PredictionMode,
) -> Result<()> {
    let step = trainer.state().step;
    if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
        let dir = ctx.out("checkpoints").join(format!("step-{step:06}"));
        save_checkpoint(&dir, trainer.state(), cfg, space, mode)?;
    }
    Ok(())
}

fn parse_mode(s: &str) -> Result<PredictionMode> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| {
        Error::Validation(format!(
            "unknown prediction mode {s:?}; expected fused, head_only or tail_only"
        ))
    })
}

fn cmd_eval(ctx: &Ctx, cfg_path: Option<&Path>, args: &EvalArgs) -> Result<()> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let mut cfg = match cfg_path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(f) = &args.format {
        cfg.data.format = f.clone();
    }
    let corpus = args
        .corpus
        .clone()
        .or(cfg.data.test.clone())
        .ok_or_else(|| Error::Validation("no corpus given (--corpus or data.test)".into()))?;
    let space = ck.manifest.label_space.clone();
    let columns_name = args
        .columns
        .clone()
        .unwrap_or_else(|| cfg.eval.columns.clone());
    let columns = ColumnSpec::named(&columns_name, &space)?;
    columns.validate(&space)?;
    let mode = match &args.prediction {
        Some(m) => parse_mode(m)?,
        None => ck.manifest.prediction,
    };
    let include_diagonal = args.include_diagonal || cfg.eval.include_diagonal;
    let docs = parse_corpus(&corpus, cfg.format()?)?;
    let train_cfg = &ck.manifest.train_config;
    let backend = train_cfg.backend()?;
    let encoded = encode_corpus(&docs, &space, &backend)?;
    let report = evaluate(
        &encoded,
        ck.params(),
        &space,
        &columns,
        train_cfg.bypass_towers,
        mode,
        include_diagonal,
    )?;
    #[derive(Serialize)]
    struct EvalIdentity<'a> {
        checkpoint_config: &'a str,
        step: usize,
        columns: &'a str,
        prediction: PredictionMode,
        include_diagonal: bool,
    }
    let hash = config_hash(&EvalIdentity {
        checkpoint_config: &ck.manifest.config_hash,
        step: ck.manifest.step,
        columns: &columns_name,
        prediction: mode,
        include_diagonal,
    });
    write_report(&report, &hash, &ctx.out_dir)?;
    if !ctx.quiet {
        let mut err = std::io::stderr().lock();
        for (name, v) in report.ordered() {
            let _ = writeln!(err, "{name:>8}  {v:.4}");
        }
    }
    Ok(())
}

fn seeds_or(cli: Option<&Vec<u64>>, seed: Option<u64>, configured: &[u64]) -> Vec<u64> {
    match (cli, seed) {
        (Some(s), _) => s.clone(),
        (None, Some(s)) => vec![s],
        (None, None) => configured.to_vec(),
    }
}

fn finish_table(ctx: &Ctx, table: &Table, stem: &str) -> Result<()> {
    write_table(table, &ctx.out_dir, stem)?;
    if !ctx.quiet {
        eprint!("{}", table.to_csv());
    }
    if table.failures.is_empty() {
        Ok(())
    } else {
        Err(Error::RunsFailed(format!(
            "{} run(s) failed, partial results kept: {}",
            table.failures.len(),
            table.failures.join("; ")
        )))
    }
}

fn cmd_sweep(ctx: &Ctx, cfg_path: Option<&Path>, args: &SweepArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    apply_data_args(&mut cfg, &args.data, None)?;
    if let Some(w) = &args.windows {
        cfg.sweep.window_sizes = w.clone();
    }
    cfg.sweep.seeds = seeds_or(args.seeds.as_ref(), ctx.seed, &cfg.sweep.seeds);
    cfg.validate()?;
    let data = Dataset::from_config(&cfg)?;
    ctx.say(format!(
        "sweeping windows {:?} over seeds {:?}, config {}",
        cfg.sweep.window_sizes,
        cfg.sweep.seeds,
        cfg.hash()
    ));
    let table = sweep(&data, &cfg, &cfg.sweep.window_sizes, &cfg.sweep.seeds)?;
    write_table(&table, &ctx.out_dir, "sweep")?;
    if !table.rows.is_empty() {
        plot_sweep(&table, &ctx.out("sweep.svg"))?;
    }
    finish_table(ctx, &table, "sweep")
}

fn cmd_ablate(ctx: &Ctx, cfg_path: Option<&Path>, args: &AblateArgs) -> Result<()> {
    let mut cfg = load_config(cfg_path)?;
    apply_data_args(&mut cfg, &args.data, None)?;
    if let Some(v) = &args.variants {
        cfg.ablate.variants = v.iter().filter(|s| !s.is_empty()).cloned().collect();
    }
    cfg.ablate.seeds = seeds_or(args.seeds.as_ref(), ctx.seed, &cfg.ablate.seeds);
    if cfg.ablate.variants.is_empty() {
        let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
        return Err(Error::Validation(format!(
            "no variants given; valid variants: {}",
            names.join(", ")
        )));
    }
    let variants = cfg
        .ablate
        .variants
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<Variant>>>()?;
    let data = Dataset::from_config(&cfg)?;
    ctx.say(format!(
        "ablating {:?} over seeds {:?}, config {}",
        cfg.ablate.variants,
        cfg.ablate.seeds,
        cfg.hash()
    ));
    let table = ablate(&data, &cfg, &variants, &cfg.ablate.seeds)?;
    finish_table(ctx, &table, "ablate")
}

fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx {
        out_dir: cli.out_dir.clone(),
        quiet: cli.quiet,
        seed: cli.seed,
    };
    let cfg = cli.config.as_deref();
    match &cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, cfg, a),
        Command::Eval(a) => cmd_eval(&ctx, cfg, a),
        Command::Sweep(a) => cmd_sweep(&ctx, cfg, a),
        Command::Ablate(a) => cmd_ablate(&ctx, cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation(_) | Error::Parse { .. } | Error::Unsupported(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}
