//! Desk-scale phonemic-orthographic fusion model.
//!
//! A shared transformer encoder reads the orthographic and the romanized
//! stream of an utterance separately; subword states are mean-pooled per word
//! and the two streams are concatenated feature-wise, so the fused sequence
//! keeps one row per word. Training combines a task cross-entropy with an
//! InfoNCE-style agreement loss between two code-switched views.

pub mod checkpoint;
pub mod encoder;
pub mod experiment;
pub mod gradcheck;
pub mod matrix;
pub mod objective;
pub mod subword;
pub mod synthetic;
pub mod tape;
pub mod train;

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encoder::{Encoder, EncoderConfig};
pub use matrix::Matrix;
pub use objective::{cl_loss, ClConfig, FusedRepresentation, ProjectionHead, TaskHead, TaskKind, TaskLabel};
pub use subword::SubwordVocab;
pub use tape::{Gradients, Tape, Var};
pub use train::{Model, ModelConfig, TrainConfig, Trainer};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("word {word} has no subwords in the {stream} stream")]
    DegenerateWord { word: usize, stream: &'static str },
    #[error("sequence of {len} subwords exceeds max_seq_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("utterance has no words")]
    EmptyUtterance,
    #[error("cosine similarity undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("contrastive loss needs at least one negative")]
    NoNegatives,
    #[error("label {label} out of range for {classes} outputs")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("label does not fit the task head: {0}")]
    LabelMismatch(String),
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which streams feed the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ortho,
    Roman,
    Both,
}

impl Mode {
    /// Width of a word vector for encoder width `d`.
    pub fn repr_dim(self, d: usize) -> usize {
        match self {
            Mode::Both => 2 * d,
            Mode::Ortho | Mode::Roman => d,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Ortho => "ortho",
            Mode::Roman => "roman",
            Mode::Both => "both",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ortho" => Ok(Mode::Ortho),
            "roman" => Ok(Mode::Roman),
            "both" => Ok(Mode::Both),
            _ => Err(format!("unknown mode {s:?} (expected ortho, roman or both)")),
        }
    }
}

/// Named parameter tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> usize {
        self.names.push(name.into());
        self.tensors.push(value);
        self.tensors.len() - 1
    }

    /// Adds a tensor drawn from `N(0, std²)`.
    pub fn add_normal<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        std: f64,
        rng: &mut R,
    ) -> usize {
        let dist = Normal::new(0.0, std).expect("positive std");
        let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
        self.add(name, Matrix::from_vec(rows, cols, data))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, i: usize) -> &Matrix {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.tensors[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.data().len()).sum()
    }

    /// Puts every tensor on the tape as a leaf, in store order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.leaf(t.clone())).collect()
    }

    /// One gradient-descent step: `p -= lr * grad`.
    pub fn sgd_step(&mut self, vars: &[Var], grads: &Gradients, lr: f64) {
        for (t, v) in self.tensors.iter_mut().zip(vars) {
            if let Some(g) = grads.get(*v) {
                t.axpy(-lr, g);
            }
        }
    }
}
