use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pacc::pipeline::{self, PipelineError, RunConfig, SynthKind};
use pacc::trainer::{SplitMode, SweepParam, TrainConfig};
use pacc::views::{LayerId, MaskSpec};

/// Protocol-layer multiview traffic classification.
#[derive(Parser, Debug)]
#[command(name = "pacc", version, about)]
struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse captures and write per-layer view matrices.
    Encode(EncodeArgs),
    /// Redundancy and relevance report for a view directory.
    Analyze(AnalyzeArgs),
    /// Train a model and evaluate it on the test split.
    Train(TrainArgs),
    /// Train every ablation variant on the same split.
    Ablate(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Per-flow predictions as JSON.
    Predict(PredictArgs),
    /// Write per-layer latents, fusion weights and fused codes.
    ExportEmbeddings(ExportArgs),
    /// Train once per value of latent width or class-balance beta.
    Sweep(SweepArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct OutArgs {
    #[arg(long)]
    out: PathBuf,
    /// Replace an existing non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long)]
    pcap_dir: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    /// Comma-separated layer tags, e.g. L3,L4.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<LayerId>>,
    #[arg(long)]
    packets_per_flow: Option<usize>,
    #[arg(long)]
    payload_bytes: Option<usize>,
    /// Extra fields to mask, as LAYER:field or bare field names.
    #[arg(long, value_delimiter = ',')]
    mask: Vec<String>,
    /// Start from an empty mask instead of the default artifact set.
    #[arg(long)]
    no_default_mask: bool,
    /// Also mask transport ports.
    #[arg(long)]
    mask_ports: bool,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    views: PathBuf,
    /// Exported embedding directory to report on as well.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    pca_k: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    no_silhouette: bool,
}

#[derive(Args, Debug, Default)]
struct TrainOverrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Class-balance beta.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    encoder_hidden: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    decoder_hidden: Option<Vec<usize>>,
    /// 8:1:1 or 9:1.
    #[arg(long)]
    split_mode: Option<SplitMode>,
    #[arg(long)]
    no_rec: bool,
    #[arg(long)]
    no_con: bool,
    #[arg(long)]
    no_task_info: bool,
}

impl TrainOverrides {
    fn apply(&self, c: &mut TrainConfig) {
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field.clone() { c.$target = v; })*
            };
        }
        set!(seed => seed, batch_size => batch_size, lr => lr, epochs => epochs, patience => patience,
             beta => beta_cb, latent_dim => latent_dim, dropout => dropout, encoder_hidden => encoder_hidden,
             decoder_hidden => decoder_hidden, split_mode => split_mode);
        let t = &mut c.objective.terms;
        t.rec &= !self.no_rec;
        t.con &= !self.no_con;
        t.task_info &= !self.no_task_info;
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    views: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    #[command(flatten)]
    train: TrainOverrides,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    views: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    /// train, val, test or all.
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    views: PathBuf,
    /// Row indices to predict; all rows when omitted.
    #[arg(long, value_delimiter = ',')]
    rows: Vec<usize>,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    views: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    views: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    /// dim or beta.
    #[arg(long)]
    param: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[command(flatten)]
    train: TrainOverrides,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// shared-private, separable, imbalanced or captures.
    #[arg(long)]
    kind: SynthKind,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

fn base_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    match &cli.config {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn begin(out: &OutArgs) -> Result<&Path, PipelineError> {
    pipeline::prepare_output(&out.out, out.force)?;
    Ok(&out.out)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), PipelineError> {
    print_text(&serde_json::to_string_pretty(v)?)
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print_text(text: &str) -> Result<(), PipelineError> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = base_config(&cli)?;
    let none = serde_json::Value::Null;
    match &cli.command {
        Command::Encode(a) => {
            let v = &mut cfg.views;
            if let Some(l) = &a.layers {
                v.layers = l.clone();
            }
            if let Some(p) = a.packets_per_flow {
                v.packets_per_flow = p;
            }
            if let Some(p) = a.payload_bytes {
                v.payload_bytes = p;
            }
            if a.no_default_mask {
                v.mask = MaskSpec::none();
            }
            if a.mask_ports {
                v.mask = v.mask.clone().with_ports();
            }
            let schemas = pacc::views::default_schemas(v.payload_bytes);
            for m in &a.mask {
                v.mask.add(m, &schemas)?;
            }
            v.mask.validate(&schemas)?;
            if !a.manifest.is_file() {
                return Err(pacc::ingest::IngestError::ManifestNotFound(a.manifest.display().to_string()).into());
            }
            let out = begin(&a.out)?;
            let s = pipeline::encode(&a.pcap_dir, &a.manifest, out, &cfg.views)?;
            pipeline::write_effective_config(out, "encode", &cfg, none, &[("pcap_dir", &a.pcap_dir), ("manifest", &a.manifest)])?;
            print_json(&s)
        }
        Command::Analyze(a) => {
            let o = &mut cfg.analysis;
            if let Some(k) = a.pca_k {
                o.pca_k = k;
            }
            if let Some(b) = a.bins {
                o.bins = b;
            }
            o.silhouette &= !a.no_silhouette;
            if o.bins < 2 {
                return Err(pacc::info::InfoError::InvalidBins(o.bins).into());
            }
            let out = begin(&a.out)?;
            pipeline::analyze(&a.views, a.embeddings.as_deref(), out, &cfg.analysis)?;
            let mut inputs = vec![("views", a.views.as_path())];
            if let Some(e) = &a.embeddings {
                inputs.push(("embeddings", e.as_path()));
            }
            pipeline::write_effective_config(out, "analyze", &cfg, none, &inputs)
        }
        Command::Train(a) => {
            a.train.apply(&mut cfg.train);
            cfg.train.validate()?;
            let out = begin(&a.out)?;
            let m = pipeline::train_command(&a.views, out, &cfg.train)?;
            pipeline::write_effective_config(out, "train", &cfg, none, &[("views", &a.views)])?;
            print_json(&m)
        }
        Command::Ablate(a) => {
            a.train.apply(&mut cfg.train);
            cfg.train.validate()?;
            let out = begin(&a.out)?;
            let rows = pipeline::ablate_command(&a.views, out, &cfg.train)?;
            pipeline::write_effective_config(out, "ablate", &cfg, none, &[("views", &a.views)])?;
            print_json(&rows)
        }
        Command::Eval(a) => {
            let out = begin(&a.out)?;
            let m = pipeline::eval_command(&a.checkpoint, &a.views, &a.split, out)?;
            let extra = serde_json::json!({ "split": a.split });
            pipeline::write_effective_config(out, "eval", &cfg, extra, &[("checkpoint", &a.checkpoint), ("views", &a.views)])?;
            print_json(&m)
        }
        Command::Predict(a) => {
            if let Some(p) = &a.out {
                if p.exists() && !a.force {
                    return Err(PipelineError::OutputExists(p.display().to_string()));
                }
            }
            let preds = pipeline::predict_command(&a.checkpoint, &a.views, &a.rows)?;
            let text = serde_json::to_string_pretty(&preds)?;
            match &a.out {
                Some(p) => std::fs::write(p, text)?,
                None => print_text(&text)?,
            }
            Ok(())
        }
        Command::ExportEmbeddings(a) => {
            let out = begin(&a.out)?;
            pipeline::export_embeddings_command(&a.checkpoint, &a.views, out)?;
            pipeline::write_effective_config(
                out,
                "export-embeddings",
                &cfg,
                none,
                &[("checkpoint", &a.checkpoint), ("views", &a.views)],
            )
        }
        Command::Sweep(a) => {
            a.train.apply(&mut cfg.train);
            cfg.train.validate()?;
            let out = begin(&a.out)?;
            let rows = pipeline::sweep_command(&a.views, out, &cfg.train, a.param, &a.values)?;
            let extra = serde_json::json!({ "param": a.param, "values": a.values });
            pipeline::write_effective_config(out, "sweep", &cfg, extra, &[("views", &a.views)])?;
            print_json(&rows)
        }
        Command::Synth(a) => {
            let out = begin(&a.out)?;
            pipeline::synth_command(a.kind, a.n, a.seed, out)?;
            let extra = serde_json::json!({ "kind": a.kind, "n": a.n, "seed": a.seed });
            pipeline::write_effective_config(out, "synth", &cfg, extra, &[])
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("PACC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("warning: could not cap threads: {e}");
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
