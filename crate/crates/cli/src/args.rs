use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "cori", version, about = "Word-aligned orthographic/romanized CJKV corpora and toy fusion experiments")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Segment plain text (one utterance per line) into word-aligned JSON lines.
    Segment(SegmentArgs),
    /// Fill the romanized stream of utterance or dataset JSON lines.
    Romanize(RomanizeArgs),
    /// Code-switch utterance or dataset JSON lines with a bilingual dictionary.
    Augment(AugmentArgs),
    /// Build per-language datasets from a raw task file.
    Build(BuildArgs),
    /// Train the toy fusion model on the synthetic bilingual corpus.
    TrainToy(TrainToyArgs),
    /// Score a prediction dataset against a gold dataset.
    Eval(EvalArgs),
    /// Linear CKA between two embedding TSV files.
    Cka(CkaArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Segment(_) => "segment",
            Command::Romanize(_) => "romanize",
            Command::Augment(_) => "augment",
            Command::Build(_) => "build",
            Command::TrainToy(_) => "train-toy",
            Command::Eval(_) => "eval",
            Command::Cka(_) => "cka",
        }
    }
}

/// Flags every subcommand takes.
#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// TOML file of `flag = value` defaults; command-line flags win.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Worker threads; 1 gives bit-reproducible output.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct SegmentArgs {
    /// Language of the input text (zh, ja, ko, vi, en).
    #[arg(long)]
    pub lang: String,
    /// Plain-text input, one utterance per line.
    #[arg(long = "in", value_name = "FILE")]
    #[serde(rename = "in")]
    pub input: PathBuf,
    /// Output JSON lines.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Lexicon TSV (surface, reading, pinyin).
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Also fill the romanized stream.
    #[arg(long)]
    pub romanize: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct RomanizeArgs {
    /// Expected language of every input line.
    #[arg(long)]
    pub lang: String,
    /// Utterance or dataset JSON lines.
    #[arg(long = "in", value_name = "FILE")]
    #[serde(rename = "in")]
    pub input: PathBuf,
    /// Output JSON lines.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Lexicon TSV with kanji readings and pinyin.
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Romanization table TSV replacing the built-in one.
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,
    /// Drop pinyin tone marks.
    #[arg(long)]
    pub strip_tones: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewArg {
    Ortho,
    Roman,
}

#[derive(Debug, Args, Serialize)]
pub struct AugmentArgs {
    /// Source language of the input and the dictionary.
    #[arg(long)]
    pub lang: String,
    /// Utterance or dataset JSON lines.
    #[arg(long = "in", value_name = "FILE")]
    #[serde(rename = "in")]
    pub input: PathBuf,
    /// Output JSON lines.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Dictionary TSV (source, target lang, target surface, target roman).
    #[arg(long, value_name = "FILE")]
    pub dict: PathBuf,
    /// Per-word replacement probability in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    /// Seed for the replacement draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Which stream to switch.
    #[arg(long, value_enum, default_value_t = ViewArg::Ortho)]
    pub view: ViewArg,
    /// Use one target language per utterance.
    #[arg(long)]
    pub single_target: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MtArg {
    Mock,
    Http,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    /// Task tag (pawsx, xnli, udpos, panx, xquad, mlqa).
    #[arg(long)]
    pub task: String,
    /// Raw task JSON lines.
    #[arg(long = "in", value_name = "FILE")]
    #[serde(rename = "in")]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Split written into the output file names.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Language of the raw input.
    #[arg(long, default_value = "en")]
    pub src: String,
    /// Comma-separated target languages.
    #[arg(long, default_value = "zh,ja,ko,vi")]
    pub targets: String,
    /// Per-language lexicon as LANG=FILE; repeatable.
    #[arg(long, value_name = "LANG=FILE")]
    pub lexicon: Vec<String>,
    /// Romanization table TSV replacing the built-in one.
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,
    /// Drop pinyin tone marks.
    #[arg(long)]
    pub strip_tones: bool,
    /// Translation backend.
    #[arg(long, value_enum, default_value_t = MtArg::Mock)]
    pub mt: MtArg,
    /// Mock fixtures: JSON map from "SRC|TGT|text" to translation.
    #[arg(long, value_name = "FILE")]
    pub fixtures: Option<PathBuf>,
    /// Fail on unfixtured mock input instead of tagged passthrough.
    #[arg(long)]
    pub strict_mock: bool,
    /// HTTP endpoint; the key is read from CORI_MT_KEY.
    #[arg(long, default_value = cori_core::pipeline::mt::DEFAULT_ENDPOINT)]
    pub endpoint: String,
    /// Translation cache directory.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Concurrent translation requests.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_concurrent: u32,
    /// Answer mask token for QA templates.
    #[arg(long, default_value = cori_core::pipeline::DEFAULT_MASK)]
    pub mask: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Ortho,
    Roman,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainToyArgs {
    /// Streams fed to the model.
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub mode: ModeArg,
    /// Contrastive term.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub cl: Switch,
    /// Seed for corpus, initialization and code-switching.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// SGD steps.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Sentences per step.
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    /// Parallel sentences in the synthetic corpus.
    #[arg(long, default_value_t = 200)]
    pub sentences: usize,
    /// Encoder width d.
    #[arg(long, default_value_t = 8)]
    pub embed_dim: usize,
    /// Transformer layers.
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    /// Attention heads.
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Code-switch ratio for the contrastive views.
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    /// Contrastive temperature.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    /// Weight of the contrastive term.
    #[arg(long, default_value_t = 1.0)]
    pub cl_weight: f64,
    /// Run ortho, roman, both and both without CL instead of one setting.
    #[arg(long)]
    pub ablation: bool,
    /// Write source/target sentence embeddings as TSV into this directory.
    #[arg(long, value_name = "DIR")]
    pub embeddings: Option<PathBuf>,
    /// Save the trained model here (single runs only).
    #[arg(long, value_name = "FILE", conflicts_with = "ablation")]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Task tag of both files.
    #[arg(long)]
    pub task: String,
    /// Gold dataset.
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    /// Predictions in dataset format, matched to gold by id.
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    /// Split of both files.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct CkaArgs {
    /// Embedding TSV (id, then values).
    #[arg(long, value_name = "FILE")]
    pub a: PathBuf,
    /// Second embedding TSV with the same number of rows.
    #[arg(long, value_name = "FILE")]
    pub b: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

/// Finds `--config FILE` after the subcommand and splices its values in as
/// flags right after the subcommand, so explicit flags come later and win.
pub fn expand_config(argv: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let Some(sub) = argv.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|i| i + 1) else {
        return Ok(argv);
    };
    let mut path = None;
    for (i, a) in argv.iter().enumerate().skip(sub + 1) {
        let a = a.to_string_lossy();
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else if a == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("{}: cannot read config", path.display()))?;
    let table: toml::Table = text.parse().map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut flags = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => flags.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                for v in items {
                    flags.push(flag.clone());
                    flags.push(scalar(&key, &v)?);
                }
            }
            v => {
                flags.push(flag);
                flags.push(scalar(&key, &v)?);
            }
        }
    }
    let mut out = argv[..=sub].to_vec();
    out.extend(flags.into_iter().map(OsString::from));
    out.extend_from_slice(&argv[sub + 1..]);
    Ok(out)
}

fn scalar(key: &str, v: &toml::Value) -> anyhow::Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        _ => bail!(ConfigError(format!("config key {key}: unsupported value {v}"))),
    })
}

/// A malformed configuration file.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);
