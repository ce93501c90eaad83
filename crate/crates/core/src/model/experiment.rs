//! Toy training runs on the synthetic corpus and the four-way ablation.

use serde::{Deserialize, Serialize};

use super::encoder::EncoderConfig;
use super::matrix::Matrix;
use super::objective::{ClConfig, TaskKind, TaskLabel};
use super::synthetic::{SyntheticConfig, SyntheticCorpus};
use super::train::{Model, ModelConfig, TrainConfig, TrainExample, Trainer};
use super::{Mode, ModelError};
use crate::corpus::Utterance;
use crate::metrics::{accuracy, cka_matrices};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub mode: Mode,
    pub use_cl: bool,
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub sentences: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub learning_rate: f64,
    pub ratio: f64,
    pub temperature: f64,
    pub cl_weight: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            mode: Mode::Both,
            use_cl: true,
            seed: 0,
            steps: 200,
            batch_size: 8,
            sentences: 200,
            embed_dim: 8,
            num_layers: 1,
            num_heads: 2,
            learning_rate: 0.05,
            ratio: 0.5,
            temperature: 0.1,
            cl_weight: 1.0,
        }
    }
}

/// Summary of one toy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub config: ToyConfig,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Linear CKA between source and target projected sentence vectors.
    pub cka: f64,
    /// The same on mean-pooled encoder outputs, before projection.
    pub cka_pooled: f64,
    pub source_accuracy: f64,
    /// Zero-shot accuracy on the target language.
    pub target_accuracy: f64,
}

/// Pooled embeddings of single-utterance inputs as an `n x p` matrix.
pub fn pooled_matrix(model: &Model, utts: &[Utterance]) -> Result<Matrix, ModelError> {
    let rows = utts
        .iter()
        .map(|u| model.pooled(std::slice::from_ref(u)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Matrix::from_rows(&rows))
}

/// Projected sentence vectors of single-utterance inputs.
pub fn projected_matrix(model: &Model, utts: &[Utterance]) -> Result<Matrix, ModelError> {
    let rows = utts
        .iter()
        .map(|u| Ok(model.represent(std::slice::from_ref(u))?.sentence_vector))
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(Matrix::from_rows(&rows))
}

fn class_accuracy(model: &Model, examples: &[TrainExample]) -> Result<f64, ModelError> {
    let mut pred = Vec::with_capacity(examples.len());
    let mut gold = Vec::with_capacity(examples.len());
    for ex in examples {
        if let (TaskLabel::Class(p), TaskLabel::Class(g)) = (model.predict(&ex.utterances)?, &ex.label) {
            pred.push(p);
            gold.push(*g);
        }
    }
    accuracy(&pred, &gold).map_err(|e| ModelError::InvalidConfig(e.to_string()))
}

pub fn run_toy(cfg: &ToyConfig) -> Result<ToyReport, ModelError> {
    train_toy(cfg).map(|(report, _, _)| report)
}

/// Like [`run_toy`], also returning the trained model and its corpus.
pub fn train_toy(cfg: &ToyConfig) -> Result<(ToyReport, Model, SyntheticCorpus), ModelError> {
    if cfg.batch_size < 2 && cfg.use_cl {
        return Err(ModelError::InvalidConfig("contrastive training needs batch_size >= 2".into()));
    }
    let corpus = SyntheticCorpus::generate(&SyntheticConfig {
        sentences: cfg.sentences,
        seed: cfg.seed,
        ..SyntheticConfig::default()
    });
    let vocab = corpus.vocab();
    let model_config = ModelConfig {
        encoder: EncoderConfig {
            vocab_size: vocab.size(),
            embed_dim: cfg.embed_dim,
            num_layers: cfg.num_layers,
            num_heads: cfg.num_heads,
            max_seq_len: 64,
            seed: cfg.seed,
        },
        cl: ClConfig {
            temperature: cfg.temperature,
            ..ClConfig::default()
        },
        mode: cfg.mode,
        task: TaskKind::SentenceClassify { classes: 2 },
    };
    let model = Model::new(model_config, vocab)?;
    let mut trainer = Trainer::new(
        model,
        TrainConfig {
            learning_rate: cfg.learning_rate,
            ratio: cfg.ratio,
            seed: cfg.seed,
            use_cl: cfg.use_cl,
            cl_weight: cfg.cl_weight,
            single_target: false,
        },
    )?;
    let source = corpus.source_examples();
    let target = corpus.target_examples();
    let initial_loss = trainer.eval_task_loss(&source)?;
    let n = source.len();
    for step in 0..cfg.steps {
        let batch: Vec<TrainExample> = (0..cfg.batch_size)
            .map(|i| source[(step * cfg.batch_size + i) % n].clone())
            .collect();
        trainer.train_step(&batch, &corpus.dictionary)?;
    }
    let final_loss = trainer.eval_task_loss(&source)?;
    let model = &trainer.model;
    let xs = pooled_matrix(model, &corpus.source)?;
    let ys = pooled_matrix(model, &corpus.target)?;
    let cka_pooled = cka_matrices(&xs, &ys).map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
    let xp = projected_matrix(model, &corpus.source)?;
    let yp = projected_matrix(model, &corpus.target)?;
    let cka = cka_matrices(&xp, &yp).map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
    let report = ToyReport {
        config: *cfg,
        initial_loss,
        final_loss,
        cka,
        cka_pooled,
        source_accuracy: class_accuracy(model, &source)?,
        target_accuracy: class_accuracy(model, &target)?,
    };
    Ok((report, trainer.model, corpus))
}

/// The four ablation settings: ortho only, roman only, both, and both without
/// the contrastive term.
pub fn ablation_configs(base: &ToyConfig) -> [ToyConfig; 4] {
    [
        ToyConfig { mode: Mode::Ortho, use_cl: true, ..*base },
        ToyConfig { mode: Mode::Roman, use_cl: true, ..*base },
        ToyConfig { mode: Mode::Both, use_cl: true, ..*base },
        ToyConfig { mode: Mode::Both, use_cl: false, ..*base },
    ]
}

pub fn ablation_name(cfg: &ToyConfig) -> String {
    match (cfg.mode, cfg.use_cl) {
        (m, true) => m.name().to_string(),
        (m, false) => format!("{}-cl", m.name()),
    }
}

pub fn run_ablation(base: &ToyConfig) -> Result<Vec<ToyReport>, ModelError> {
    ablation_configs(base).iter().map(run_toy).collect()
}
