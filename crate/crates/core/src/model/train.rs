//! Model bundle and the gradient-descent training loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{encode_fuse, Encoder, EncoderConfig};
use super::objective::{
    cl_loss_batch, sentence_rep, task_loss, total_loss, ClConfig, FusedRepresentation, ProjectionHead, TaskHead,
    TaskKind, TaskLabel,
};
use super::subword::SubwordVocab;
use super::tape::{Tape, Var};
use super::{Mode, ModelError, ParamStore};
use crate::augment::{multi_view_with_rng, AugmentationConfig, BilingualDictionary, View};
use crate::corpus::{Label, LabeledSample, SampleInputs, Utterance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub cl: ClConfig,
    pub mode: Mode,
    pub task: TaskKind,
}

impl ModelConfig {
    pub fn repr_dim(&self) -> usize {
        self.mode.repr_dim(self.encoder.embed_dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Code-switching ratio for both views.
    pub ratio: f64,
    pub seed: u64,
    pub use_cl: bool,
    pub cl_weight: f64,
    pub single_target: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            ratio: 0.5,
            seed: 0,
            use_cl: true,
            cl_weight: 1.0,
            single_target: false,
        }
    }
}

/// One training input: the utterances of a sample and its label.
///
/// Several utterances (a sentence pair, or QA context then question) are
/// encoded separately and their word rows stacked, so word indices of the
/// first utterance are unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub utterances: Vec<Utterance>,
    pub label: TaskLabel,
}

impl TrainExample {
    /// Converts a corpus sample; `tag_set` maps tag strings to indices.
    pub fn from_sample(s: &LabeledSample, tag_set: &[String]) -> Result<Self, ModelError> {
        let utterances = match &s.inputs {
            SampleInputs::Pair(a, b) => vec![a.clone(), b.clone()],
            SampleInputs::Single(u) => vec![u.clone()],
            SampleInputs::Qa { context, question } => vec![context.clone(), question.clone()],
        };
        let label = match &s.label {
            Label::Class(c) => TaskLabel::Class(*c),
            Label::Tags(tags) => TaskLabel::Tags(
                tags.iter()
                    .map(|t| {
                        tag_set
                            .iter()
                            .position(|x| x == t)
                            .ok_or_else(|| ModelError::LabelMismatch(format!("unknown tag {t:?}")))
                    })
                    .collect::<Result<_, _>>()?,
            ),
            Label::AnswerSpan { start_word, end_word } => TaskLabel::Span {
                start: *start_word,
                end: *end_word,
            },
        };
        Ok(TrainExample { utterances, label })
    }
}

/// Parameters plus the layout needed to run them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub encoder: Encoder,
    pub projection: ProjectionHead,
    pub head: TaskHead,
    pub vocab: SubwordVocab,
}

impl Model {
    pub fn new(config: ModelConfig, vocab: SubwordVocab) -> Result<Self, ModelError> {
        config.cl.validate()?;
        if config.encoder.vocab_size < vocab.size() {
            return Err(ModelError::InvalidConfig(format!(
                "vocab_size {} smaller than subword vocabulary {}",
                config.encoder.vocab_size,
                vocab.size()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.encoder.seed);
        let mut store = ParamStore::new();
        let encoder = Encoder::init(config.encoder, &mut store, &mut rng)?;
        let dim = config.repr_dim();
        let projection = ProjectionHead::init(&mut store, dim, config.cl.hidden_dim, config.cl.proj_dim, &mut rng);
        let head = TaskHead::init(&mut store, config.task, dim, &mut rng);
        Ok(Model {
            config,
            store,
            encoder,
            projection,
            head,
            vocab,
        })
    }

    /// Stacked fused word vectors of several utterances, on the tape.
    pub fn encode(&self, tape: &mut Tape, p: &[Var], utterances: &[Utterance]) -> Result<Var, ModelError> {
        let parts = utterances
            .iter()
            .map(|u| encode_fuse(tape, p, &self.encoder, &self.vocab, u, self.config.mode))
            .collect::<Result<Vec<_>, _>>()?;
        match parts.len() {
            0 => Err(ModelError::EmptyUtterance),
            1 => Ok(parts[0]),
            _ => Ok(tape.concat_rows(&parts)),
        }
    }

    /// Word vectors and projected sentence vector, without gradients.
    pub fn represent(&self, utterances: &[Utterance]) -> Result<FusedRepresentation, ModelError> {
        let mut tape = Tape::new();
        let p = self.store.bind(&mut tape);
        let words = self.encode(&mut tape, &p, utterances)?;
        let sent = sentence_rep(&mut tape, &p, words, &self.projection)?;
        Ok(FusedRepresentation {
            word_vectors: tape.value(words).clone(),
            sentence_vector: tape.value(sent).data().to_vec(),
        })
    }

    /// Mean of the fused word vectors (the encoder-side sentence embedding).
    pub fn pooled(&self, utterances: &[Utterance]) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let p = self.store.bind(&mut tape);
        let words = self.encode(&mut tape, &p, utterances)?;
        let mean = tape.mean_rows(words);
        Ok(tape.value(mean).data().to_vec())
    }

    /// Argmax prediction in the label space of the task head.
    pub fn predict(&self, utterances: &[Utterance]) -> Result<TaskLabel, ModelError> {
        let mut tape = Tape::new();
        let p = self.store.bind(&mut tape);
        let words = self.encode(&mut tape, &p, utterances)?;
        let logits = self.head.logits(&mut tape, &p, words);
        let l = tape.value(logits);
        let argmax = |row: &[f64]| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        };
        Ok(match self.head.kind {
            TaskKind::SentenceClassify { .. } => TaskLabel::Class(argmax(l.row(0))),
            TaskKind::WordTag { .. } => {
                let m = utterances[0].len();
                TaskLabel::Tags((0..m).map(|r| argmax(l.row(r))).collect())
            }
            TaskKind::QaSpan => {
                // best start <= end inside the first utterance
                let m = utterances[0].len();
                let mut best = (0, 0, f64::NEG_INFINITY);
                for s in 0..m {
                    for e in s..m {
                        let score = l[(s, 0)] + l[(e, 1)];
                        if score > best.2 {
                            best = (s, e, score);
                        }
                    }
                }
                TaskLabel::Span { start: best.0, end: best.1 }
            }
        })
    }

    /// Writes one `id<TAB>v1 ... vp` line per input (pooled word vectors).
    pub fn embedding_tsv<'a, I>(&self, inputs: I) -> Result<String, ModelError>
    where
        I: IntoIterator<Item = (&'a str, &'a [Utterance])>,
    {
        let mut out = String::new();
        for (id, utts) in inputs {
            let v = self.pooled(utts)?;
            out.push_str(id);
            for x in v {
                out.push('\t');
                out.push_str(&format!("{x:?}"));
            }
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub task: f64,
    pub cl: Option<f64>,
    pub total: f64,
}

/// Single-threaded SGD over a [`Model`]; reproducible from the seed.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Model,
    pub config: TrainConfig,
    rng: ChaCha8Rng,
    step: usize,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self, ModelError> {
        if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&config.ratio) {
            return Err(ModelError::InvalidConfig(format!("ratio {} outside [0, 1]", config.ratio)));
        }
        Ok(Trainer {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            model,
            config,
            step: 0,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Builds the total loss of a batch on `tape`; returns (total, task, cl).
    pub fn batch_loss(
        &mut self,
        tape: &mut Tape,
        p: &[Var],
        batch: &[TrainExample],
        dict: &BilingualDictionary,
    ) -> Result<(Var, Var, Option<Var>), ModelError> {
        let model = &self.model;
        let anchors = batch
            .iter()
            .map(|ex| model.encode(tape, p, &ex.utterances))
            .collect::<Result<Vec<_>, _>>()?;
        let labels: Vec<TaskLabel> = batch.iter().map(|ex| ex.label.clone()).collect();
        let task = task_loss(tape, p, &anchors, &model.head, &labels)?;
        if !self.config.use_cl {
            return Ok((task, task, None));
        }
        let aug = AugmentationConfig::new(self.config.ratio, self.config.seed, View::Ortho)
            .map_err(|e| ModelError::InvalidConfig(e.to_string()))?
            .with_single_target(self.config.single_target);
        let mut v1 = Vec::with_capacity(batch.len());
        let mut v2 = Vec::with_capacity(batch.len());
        for ex in batch {
            let (mut pos1, mut pos2) = (Vec::new(), Vec::new());
            for u in &ex.utterances {
                let (a, b) = multi_view_with_rng(u, dict, &aug, &mut self.rng);
                pos1.push(a.utterance);
                pos2.push(b.utterance);
            }
            let w1 = model.encode(tape, p, &pos1)?;
            let w2 = model.encode(tape, p, &pos2)?;
            v1.push(sentence_rep(tape, p, w1, &model.projection)?);
            v2.push(sentence_rep(tape, p, w2, &model.projection)?);
        }
        let cl = cl_loss_batch(tape, &v1, &v2, model.config.cl.temperature)?;
        let total = total_loss(tape, task, Some(cl), self.config.cl_weight);
        Ok((total, task, Some(cl)))
    }

    /// Forward, backward and one parameter update.
    pub fn train_step(&mut self, batch: &[TrainExample], dict: &BilingualDictionary) -> Result<LossRecord, ModelError> {
        let mut tape = Tape::new();
        let p = self.model.store.bind(&mut tape);
        let (total, task, cl) = self.batch_loss(&mut tape, &p, batch, dict)?;
        let record = LossRecord {
            step: self.step,
            task: tape.scalar(task),
            cl: cl.map(|c| tape.scalar(c)),
            total: tape.scalar(total),
        };
        if !record.total.is_finite() {
            return Err(ModelError::NonFiniteLoss);
        }
        let grads = tape.backward(total);
        self.model.store.sgd_step(&p, &grads, self.config.learning_rate);
        self.step += 1;
        Ok(record)
    }

    /// Mean task loss of `examples` under the current parameters.
    pub fn eval_task_loss(&self, examples: &[TrainExample]) -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let p = self.model.store.bind(&mut tape);
        let reps = examples
            .iter()
            .map(|ex| self.model.encode(&mut tape, &p, &ex.utterances))
            .collect::<Result<Vec<_>, _>>()?;
        let labels: Vec<TaskLabel> = examples.iter().map(|ex| ex.label.clone()).collect();
        let l = task_loss(&mut tape, &p, &reps, &self.model.head, &labels)?;
        Ok(tape.scalar(l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synthetic::{SyntheticConfig, SyntheticCorpus};

    fn small_model(corpus: &SyntheticCorpus, mode: Mode) -> Model {
        let vocab = corpus.vocab();
        let config = ModelConfig {
            encoder: EncoderConfig {
                vocab_size: vocab.size(),
                embed_dim: 8,
                num_layers: 1,
                num_heads: 2,
                max_seq_len: 32,
                seed: 3,
            },
            cl: ClConfig::default(),
            mode,
            task: TaskKind::SentenceClassify { classes: 2 },
        };
        Model::new(config, vocab).unwrap()
    }

    fn corpus() -> SyntheticCorpus {
        SyntheticCorpus::generate(&SyntheticConfig {
            sentences: 32,
            seed: 11,
            ..SyntheticConfig::default()
        })
    }

    #[test]
    fn ratio_zero_views_equal_the_anchor() {
        let c = corpus();
        let model = small_model(&c, Mode::Both);
        let mut t = Trainer::new(model, TrainConfig { ratio: 0.0, ..TrainConfig::default() }).unwrap();
        let batch = &c.source_examples()[..4];
        let mut tape = Tape::new();
        let p = t.model.store.bind(&mut tape);
        let (_, _, cl) = t.batch_loss(&mut tape, &p, batch, &c.dictionary).unwrap();
        let got = tape.scalar(cl.unwrap());

        let sents: Vec<Vec<f64>> = batch
            .iter()
            .map(|ex| t.model.represent(&ex.utterances).unwrap().sentence_vector)
            .collect();
        let mut expected = 0.0;
        for i in 0..sents.len() {
            let negs: Vec<&[f64]> = (0..sents.len()).filter(|&j| j != i).map(|j| sents[j].as_slice()).collect();
            expected += crate::model::cl_loss(&sents[i], &sents[i], &negs, 0.1).unwrap();
        }
        assert!((got - expected / sents.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let c = corpus();
        let run = || {
            let mut t = Trainer::new(small_model(&c, Mode::Both), TrainConfig::default()).unwrap();
            let ex = c.source_examples();
            (0..4).map(|i| t.train_step(&ex[i * 4..i * 4 + 4], &c.dictionary).unwrap().total.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn training_reduces_the_loss() {
        let c = corpus();
        let mut t = Trainer::new(
            small_model(&c, Mode::Both),
            TrainConfig {
                learning_rate: 0.1,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let ex = c.source_examples();
        let initial = t.eval_task_loss(&ex).unwrap();
        for s in 0..50 {
            let off = (s * 8) % ex.len();
            t.train_step(&ex[off..off + 8], &c.dictionary).unwrap();
        }
        let after = t.eval_task_loss(&ex).unwrap();
        assert!(after < initial, "{after} !< {initial}");
    }

    #[test]
    fn batch_order_does_not_change_representations() {
        let c = corpus();
        let model = small_model(&c, Mode::Both);
        let ex = c.source_examples();
        let a = model.represent(&ex[0].utterances).unwrap();
        let _ = model.represent(&ex[1].utterances).unwrap();
        let b = model.represent(&ex[0].utterances).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.word_vectors.cols(), 16);
    }
}
