//! The `rgn` command line: generate, train, evaluate, gof, inspect-attention, complexity.
//!
//! Settings resolve as built-in defaults, then the `--config` file, then flags.
//! Every subcommand writes the resolved settings to `config.json` in its output
//! directory. Exit status is 0 on success, 2 on a non-finite loss, 1 otherwise.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::datagen::{load_jsonl, save_jsonl, split, EventSequence, Hawkes, Poisson, Process, SineRate};
use crate::error::{Error, Result};
use crate::evaluation::{self, DEFAULT_QUADRATURE};
use crate::model::Rgn;
use crate::training::{write_metrics_csv, Trainer};

#[derive(Debug, Parser)]
#[command(name = "rgn", version, about = "Recurrent graph network for marked temporal point processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a ground-truth process and write train/val/test JSONL files.
    Generate(GenerateArgs),
    /// Train a model; writes checkpoints and a per-epoch metrics CSV.
    Train(TrainArgs),
    /// Per-event NLL, next-type accuracy and next-time RMSE on a dataset.
    Evaluate(EvalArgs),
    /// Time-rescaling goodness of fit: KS statistic and P-P data.
    Gof(EvalArgs),
    /// Export attention weights for one sequence as CSV.
    InspectAttention(AttentionArgs),
    /// Attention-score and FLOP counts for a model configuration.
    Complexity(ComplexityArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProcessKind {
    Poisson,
    Sine,
    Hawkes,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub process: ProcessKind,
    /// Poisson rates, one per type; for `sine`, the base rate.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub rate: Vec<f64>,
    /// Sine amplitude.
    #[arg(long, default_value_t = 0.5)]
    pub amplitude: f64,
    /// Sine angular frequency.
    #[arg(long, default_value_t = 1.0)]
    pub freq: f64,
    /// Hawkes base rates, one per type.
    #[arg(long, value_delimiter = ',')]
    pub mu: Vec<f64>,
    /// Hawkes excitation matrix, rows separated by `;`: entry (y, k) is the effect of type k on type y.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub beta_decay: f64,
    #[arg(long, default_value_t = 20.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1000)]
    pub num_seq: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train/val/test fractions.
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.1,0.1")]
    pub split: Vec<f64>,
    #[arg(long, default_value = "data")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub tbptt: Option<usize>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Defaults to one more than the largest type in the data.
    #[arg(long)]
    pub num_types: Option<usize>,
    #[arg(long)]
    pub d_in: Option<usize>,
    #[arg(long)]
    pub d_e: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "data/test.jsonl")]
    pub data: PathBuf,
    /// Trapezoid subintervals per inter-event interval.
    #[arg(long, default_value_t = DEFAULT_QUADRATURE)]
    pub quadrature: usize,
    #[arg(long, default_value = "eval")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttentionArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "data/test.jsonl")]
    pub data: PathBuf,
    /// Position of the sequence in the file.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value = "attention")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    /// Take the model settings from a run config or a checkpoint.
    #[arg(long, conflicts_with = "checkpoint")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub num_types: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub d_in: Option<usize>,
    #[arg(long)]
    pub d_e: Option<usize>,
    #[arg(long)]
    pub seq_len: usize,
    #[arg(long, default_value = "complexity")]
    pub out_dir: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad matrix entry `{x}`: {e}")))
                })
                .collect()
        })
        .collect()
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let process = match a.process {
        ProcessKind::Poisson => Process::Poisson(Poisson::new(a.rate.clone())?),
        ProcessKind::Sine => {
            let s = SineRate {
                base: a.rate[0],
                amplitude: a.amplitude,
                freq: a.freq,
            };
            if !(s.base - s.amplitude.abs() >= 0.0) {
                return Err(Error::Config("sine rate must stay non-negative".into()));
            }
            Process::Sine(s)
        }
        ProcessKind::Hawkes => {
            let mu = if a.mu.is_empty() { vec![0.2, 0.2] } else { a.mu.clone() };
            let alpha = match &a.alpha {
                Some(t) => parse_matrix(t)?,
                None => vec![vec![0.5, 0.3], vec![0.3, 0.5]],
            };
            Process::Hawkes(Hawkes::new(mu, alpha, a.beta_decay)?)
        }
    };
    if !(a.horizon >= 0.0) {
        return Err(Error::Config(format!("horizon must be >= 0, got {}", a.horizon)));
    }
    let fractions: [f64; 3] = a
        .split
        .clone()
        .try_into()
        .map_err(|_| Error::Config("--split needs three fractions".into()))?;
    let seqs = process.sample_many(a.horizon, a.num_seq, a.seed)?;
    let parts = split(seqs, fractions, a.seed)?;
    create_dir(&a.out_dir)?;
    save_jsonl(a.out_dir.join("train.jsonl"), &parts.train)?;
    save_jsonl(a.out_dir.join("val.jsonl"), &parts.val)?;
    save_jsonl(a.out_dir.join("test.jsonl"), &parts.test)?;
    write_json(
        &a.out_dir.join("config.json"),
        &json!({
            "command": "generate",
            "generator": process,
            "horizon": a.horizon,
            "num_seq": a.num_seq,
            "seed": a.seed,
            "split": fractions,
        }),
    )?;
    println!(
        "wrote {} / {} / {} sequences to {}",
        parts.train.len(),
        parts.val.len(),
        parts.test.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn has_key(raw: &serde_json::Value, pointer: &str) -> bool {
    raw.pointer(pointer).is_some()
}

fn resolve_train_config(a: &TrainArgs) -> Result<(RunConfig, bool)> {
    let (mut cfg, raw) = match &a.config {
        Some(p) => {
            let cfg = RunConfig::load(p)?;
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            (cfg, serde_json::from_str::<serde_json::Value>(&text)?)
        }
        None => (RunConfig::default(), serde_json::Value::Null),
    };
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag.clone() {
                $field = v;
            }
        };
    }
    set!(a.train, cfg.data.train);
    set!(a.val, cfg.data.val);
    set!(a.out_dir, cfg.output_dir);
    set!(a.seed, cfg.train.seed);
    set!(a.epochs, cfg.train.epochs);
    set!(a.lr, cfg.train.lr);
    set!(a.batch_size, cfg.train.batch_size);
    set!(a.tbptt, cfg.train.tbptt_steps);
    set!(a.mc_samples, cfg.mc.samples);
    set!(a.threads, cfg.train.threads);
    set!(a.patience, cfg.train.patience);
    set!(a.num_types, cfg.model.num_types);
    set!(a.d_in, cfg.model.d_in);
    set!(a.d_e, cfg.model.d_e);
    set!(a.heads, cfg.model.num_heads);
    set!(a.layers, cfg.model.num_gat_layers);
    set!(a.dropout, cfg.model.dropout);
    let infer_types = a.num_types.is_none() && !has_key(&raw, "/model/num_types");
    Ok((cfg, infer_types))
}

fn train(a: &TrainArgs) -> Result<()> {
    let (mut cfg, infer_types) = resolve_train_config(a)?;
    let train = load_jsonl(&cfg.data.train, None)?;
    let val = load_jsonl(&cfg.data.val, None)?;
    if infer_types {
        let max = train.iter().chain(&val).filter_map(EventSequence::max_type).max();
        cfg.model.num_types = max.map_or(1, |m| m + 1);
    }
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    write_json(&out.join("config.json"), &cfg)?;
    println!("{}", cfg.to_json()?);

    let mut model = Rgn::new(cfg.model.clone(), cfg.train.seed)?;
    let mut trainer = Trainer::new(cfg.train.clone(), cfg.mc.clone());
    trainer.dump_dir = Some(out.clone());
    let report = trainer.train(&mut model, &train, &val)?;
    write_metrics_csv(&report.history, out.join("metrics.csv"))?;

    let mut summary = serde_json::Map::new();
    for (name, file, best) in [
        ("nll_per_event", "checkpoint.json", &report.best.nll),
        ("type_acc", "best_type_acc.json", &report.best.type_acc),
        ("time_rmse", "best_time_rmse.json", &report.best.time_rmse),
    ] {
        if let Some(b) = best {
            b.checkpoint.save(out.join(file))?;
            summary.insert(name.into(), json!({"epoch": b.epoch, "value": b.value, "file": file}));
        }
    }
    write_json(
        &out.join("summary.json"),
        &json!({
            "epochs_run": report.epochs_run,
            "optimizer_steps": report.optimizer_steps,
            "stopped_early": report.stopped_early,
            "best": summary,
        }),
    )?;
    println!(
        "trained {} epochs ({} optimizer steps); outputs in {}",
        report.epochs_run,
        report.optimizer_steps,
        out.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<Rgn> {
    Ok(Checkpoint::load(path)?.to_model()?.0)
}

fn echo_eval(command: &str, a: &EvalArgs, model: &Rgn) -> Result<()> {
    create_dir(&a.out_dir)?;
    write_json(
        &a.out_dir.join("config.json"),
        &json!({
            "command": command,
            "checkpoint": a.checkpoint,
            "data": a.data,
            "quadrature": a.quadrature,
            "model": model.config(),
        }),
    )
}

fn evaluate(a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.checkpoint)?;
    let seqs = load_jsonl(&a.data, Some(model.num_types()))?;
    echo_eval("evaluate", a, &model)?;
    let m = evaluation::metrics(&model, &seqs, a.quadrature.max(1))?;
    write_json(&a.out_dir.join("metrics.json"), &m)?;
    let path = a.out_dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["split", "nll_per_event", "type_acc", "time_rmse", "events", "sequences"])?;
    w.write_record([
        "test".to_string(),
        m.nll_per_event.to_string(),
        m.type_accuracy.to_string(),
        m.time_rmse.to_string(),
        m.events.to_string(),
        m.sequences.to_string(),
    ])?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    println!(
        "nll/event {:.6}  type acc {:.4}  time rmse {:.4}  ({} events)",
        m.nll_per_event, m.type_accuracy, m.time_rmse, m.events
    );
    Ok(())
}

fn gof(a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.checkpoint)?;
    let seqs = load_jsonl(&a.data, Some(model.num_types()))?;
    echo_eval("gof", a, &model)?;
    let r = evaluation::goodness_of_fit(&model, &seqs, a.quadrature.max(1))?;
    evaluation::write_pp_csv(&r, a.out_dir.join("pp.csv"))?;
    write_json(&a.out_dir.join("gof.json"), &r)?;
    println!(
        "KS D = {:.5} over {} intervals (5% critical {:.5}, 1% critical {:.5})",
        r.ks_statistic, r.n, r.critical_5, r.critical_1
    );
    Ok(())
}

fn inspect_attention(a: &AttentionArgs) -> Result<()> {
    let model = load_model(&a.checkpoint)?;
    let seqs = load_jsonl(&a.data, Some(model.num_types()))?;
    let seq = seqs.get(a.index).ok_or_else(|| {
        Error::Config(format!("{} has {} sequences, no index {}", a.data.display(), seqs.len(), a.index))
    })?;
    create_dir(&a.out_dir)?;
    write_json(
        &a.out_dir.join("config.json"),
        &json!({
            "command": "inspect-attention",
            "checkpoint": a.checkpoint,
            "data": a.data,
            "index": a.index,
            "sequence_id": seq.id,
            "model": model.config(),
        }),
    )?;
    let rows = evaluation::attention_dump(&model, seq, a.out_dir.join("attention.csv"))?;
    println!("wrote {rows} attention rows for sequence {}", seq.id);
    Ok(())
}

fn complexity(a: &ComplexityArgs) -> Result<()> {
    let mut cfg = match (&a.config, &a.checkpoint) {
        (Some(p), _) => RunConfig::load(p)?.model,
        (None, Some(p)) => Checkpoint::load(p)?.config,
        (None, None) => Default::default(),
    };
    if let Some(v) = a.num_types {
        cfg.num_types = v;
    }
    if let Some(v) = a.heads {
        cfg.num_heads = v;
    }
    if let Some(v) = a.layers {
        cfg.num_gat_layers = v;
    }
    if let Some(v) = a.d_in {
        cfg.d_in = v;
    }
    if let Some(v) = a.d_e {
        cfg.d_e = v;
    }
    cfg.validate()?;
    let r = evaluation::complexity_report(&cfg, a.seq_len);
    create_dir(&a.out_dir)?;
    write_json(
        &a.out_dir.join("config.json"),
        &json!({"command": "complexity", "model": cfg, "seq_len": a.seq_len}),
    )?;
    write_json(&a.out_dir.join("complexity.json"), &r)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Gof(a) => gof(a),
        Command::InspectAttention(a) => inspect_attention(a),
        Command::Complexity(a) => complexity(a),
    }
}

/// Parse `args` (including the program name) and run.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for numerical aborts, 1 for everything else.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite(_) => 2,
        _ => 1,
    }
}

pub fn main() -> ExitCode {
    run(std::env::args_os())
}
