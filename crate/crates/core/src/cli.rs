//! `charrnn` command line: `vocab`, `train`, `generate`, `report`.
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime error. Data goes to
//! stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{load_corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::generator::{generate, GenerationPlan, SelectionMode};
use crate::io_util::write_atomic;
use crate::layers::CellKind;
use crate::model::{read_checkpoint, rebuild_for_generation, ModelConfig, Preset};
use crate::numerics::derive_seed;
use crate::trainer::{merge_histories, read_history, train, TrainPlan};

#[derive(Debug, Parser)]
#[command(name = "charrnn", version, about = "Character-level LSTM/GRU/BiRNN text generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the vocabulary size and the index/character table of a corpus.
    Vocab(VocabArgs),
    /// Train a model and write a checkpoint plus a history CSV.
    Train(TrainArgs),
    /// Generate text from a checkpoint.
    Generate(GenerateArgs),
    /// Merge history CSVs into one long-format table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelKindArg {
    Lstm,
    Gru,
    Birnn,
}

impl From<ModelKindArg> for CellKind {
    fn from(k: ModelKindArg) -> Self {
        match k {
            ModelKindArg::Lstm => CellKind::Lstm,
            ModelKindArg::Gru => CellKind::Gru,
            ModelKindArg::Birnn => CellKind::Birnn,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Uni,
    Bi,
    Quad,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Uni => Preset::Uni,
            PresetArg::Bi => Preset::Bi,
            PresetArg::Quad => Preset::Quad,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Sample,
    Argmax,
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a finite value > 0, got {v}"))
    }
}

fn non_negative_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a finite value >= 0, got {v}"))
    }
}

fn dropout_rate(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must be in [0, 1), got {v}"))
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelKindArg,
    /// Layer widths: uni = [1024], bi = [512, 256], quad = [512, 256, 128, 64].
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub seq_len: u32,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    pub batch_size: u32,
    #[arg(long, default_value_t = 75, value_parser = clap::value_parser!(u32).range(1..))]
    pub epochs: u32,
    #[arg(long, default_value_t = 1e-3, value_parser = non_negative_f64)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.4, value_parser = dropout_rate)]
    pub dropout: f64,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(1..))]
    pub embed_dim: u32,
    /// Base seed; init, shuffle and dropout streams are derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiplies every preset width (rounded, minimum 1). For quick runs of
    /// the large presets.
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub scale: f64,
    #[arg(long, default_value_t = 5.0, value_parser = positive_f64)]
    pub clip_norm: f64,
    #[arg(long)]
    pub no_clip: bool,
    /// Initialize the LSTM forget-gate bias to 0 instead of 1.
    #[arg(long)]
    pub no_forget_bias: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub prime: String,
    #[arg(long, default_value_t = 200)]
    pub length: usize,
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64, allow_negative_numbers = true)]
    pub temperature: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Sample)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// One or more history CSVs; each run is named after its file stem.
    #[arg(long, num_args = 1.., required = true)]
    pub history: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Seeds used by `train --seed N`.
pub fn seeds_from(base: u64) -> (u64, u64, u64) {
    (base, derive_seed(base, 1), derive_seed(base, 2))
}

/// Renders a character for the vocabulary table; control characters become
/// escapes.
pub fn escape_char(c: char) -> String {
    match c {
        '\n' => "\\n".into(),
        '\t' => "\\t".into(),
        '\r' => "\\r".into(),
        '\\' => "\\\\".into(),
        ' ' => "' '".into(),
        c if c.is_control() => c.escape_unicode().to_string(),
        c => c.to_string(),
    }
}

pub fn vocab_table(vocab: &Vocabulary) -> String {
    let mut out = format!("V={}\nindex\tcodepoint\tchar\n", vocab.len());
    for (i, &c) in vocab.chars().iter().enumerate() {
        out.push_str(&format!("{i}\tU+{:04X}\t{}\n", c as u32, escape_char(c)));
    }
    out
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn io_err(path: &str) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn run_vocab(args: VocabArgs, out: &mut dyn Write) -> Result<()> {
    let text = load_corpus(&args.corpus)?;
    let vocab = Vocabulary::build(&text)?;
    out.write_all(vocab_table(&vocab).as_bytes()).map_err(io_err("<stdout>"))
}

fn run_train(args: TrainArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let preset: Preset = args
        .preset
        .ok_or_else(|| Failure::Usage("missing --preset; valid presets: uni, bi, quad".into()))?
        .into();
    let (init_seed, shuffle_seed, dropout_seed) = seeds_from(args.seed);
    let mut config = ModelConfig::new(args.model.into(), preset.scaled_widths(args.scale), 0);
    config.embed_dim = args.embed_dim as usize;
    config.dropout = args.dropout;
    config.seq_len = args.seq_len as usize;
    config.batch_size = args.batch_size as usize;
    config.init_seed = init_seed;
    config.forget_bias_one = !args.no_forget_bias;
    let plan = TrainPlan {
        epochs: args.epochs as usize,
        learning_rate: args.lr,
        clip_norm: (!args.no_clip).then_some(args.clip_norm),
        shuffle_seed,
        dropout_seed,
        ..TrainPlan::default()
    };
    let mut write_err = None;
    train(&args.corpus, config, plan, &args.out, args.history.as_deref(), |row| {
        if write_err.is_none() {
            if let Err(e) = writeln!(
                out,
                "epoch {}  loss {:.6}  ms/step {:.3}",
                row.epoch, row.mean_loss, row.ms_per_step
            ) {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(Error::io("<stdout>", e).into());
    }
    Ok(())
}

fn run_generate(args: GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let mut model = rebuild_for_generation(read_checkpoint(&args.checkpoint)?)?;
    let plan = GenerationPlan {
        prime_text: args.prime,
        length: args.length,
        temperature: args.temperature,
        mode: match args.mode {
            ModeArg::Sample => SelectionMode::Sample,
            ModeArg::Argmax => SelectionMode::Argmax,
        },
        sample_seed: args.seed,
    };
    let text = generate(&mut model, &plan)?;
    match args.out {
        Some(path) => write_atomic(&path, text.as_bytes()),
        None => out.write_all(text.as_bytes()).map_err(io_err("<stdout>")),
    }
}

fn run_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn run_report(args: ReportArgs, out: &mut dyn Write) -> Result<()> {
    let runs = args
        .history
        .iter()
        .map(|p| {
            read_history(p)
                .map(|h| (run_name(p), h))
                .map_err(|e| match e {
                    Error::History { line, message } => Error::History {
                        line,
                        message: format!("{}: {message}", p.display()),
                    },
                    e => e,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = merge_histories(&runs)?;
    match args.out {
        Some(path) => write_atomic(&path, &table),
        None => out.write_all(&table).map_err(io_err("<stdout>")),
    }
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                2
            } else {
                let _ = out.write_all(text.as_bytes());
                0
            };
        }
    };
    let result = match cli.command {
        Command::Vocab(a) => run_vocab(a, out).map_err(Failure::from),
        Command::Train(a) => run_train(a, out),
        Command::Generate(a) => run_generate(a, out).map_err(Failure::from),
        Command::Report(a) => run_report(a, out).map_err(Failure::from),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
