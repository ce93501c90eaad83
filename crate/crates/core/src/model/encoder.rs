//! Pre-norm transformer encoder shared by both streams.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::subword::SubwordVocab;
use super::tape::{Tape, Var};
use super::{Mode, ModelError, ParamStore};
use crate::corpus::Utterance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("max_seq_len", self.max_seq_len),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return Err(ModelError::InvalidConfig(format!(
                "embed_dim {} not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        Ok(())
    }

    pub fn ffn_dim(&self) -> usize {
        2 * self.embed_dim
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layer {
    ln1_g: usize,
    ln1_b: usize,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    ln2_g: usize,
    ln2_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

/// Parameter layout of the encoder inside a [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoder {
    config: EncoderConfig,
    tok_emb: usize,
    pos_emb: usize,
    layers: Vec<Layer>,
}

impl Encoder {
    pub fn init<R: Rng + ?Sized>(
        config: EncoderConfig,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let d = config.embed_dim;
        let f = config.ffn_dim();
        let w_std = 1.0 / (d as f64).sqrt();
        let tok_emb = store.add_normal("enc.tok_emb", config.vocab_size, d, 1.0, rng);
        let pos_emb = store.add_normal("enc.pos_emb", config.max_seq_len, d, 0.1, rng);
        let layers = (0..config.num_layers)
            .map(|l| {
                let p = |s: &str| format!("enc.{l}.{s}");
                Layer {
                    ln1_g: store.add(p("ln1_g"), Matrix::filled(1, d, 1.0)),
                    ln1_b: store.add(p("ln1_b"), Matrix::zeros(1, d)),
                    wq: store.add_normal(p("wq"), d, d, w_std, rng),
                    wk: store.add_normal(p("wk"), d, d, w_std, rng),
                    wv: store.add_normal(p("wv"), d, d, w_std, rng),
                    wo: store.add_normal(p("wo"), d, d, w_std, rng),
                    ln2_g: store.add(p("ln2_g"), Matrix::filled(1, d, 1.0)),
                    ln2_b: store.add(p("ln2_b"), Matrix::zeros(1, d)),
                    w1: store.add_normal(p("w1"), d, f, w_std, rng),
                    b1: store.add(p("b1"), Matrix::zeros(1, f)),
                    w2: store.add_normal(p("w2"), f, d, 1.0 / (f as f64).sqrt(), rng),
                    b2: store.add(p("b2"), Matrix::zeros(1, d)),
                }
            })
            .collect();
        Ok(Encoder {
            config,
            tok_emb,
            pos_emb,
            layers,
        })
    }

    /// Rebuilds the layout from tensor names (used when loading checkpoints).
    pub fn from_store(config: EncoderConfig, store: &ParamStore) -> Result<Self, ModelError> {
        let find = |n: String| {
            store
                .index_of(&n)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing tensor {n}")))
        };
        let layers = (0..config.num_layers)
            .map(|l| {
                let p = |s: &str| find(format!("enc.{l}.{s}"));
                Ok(Layer {
                    ln1_g: p("ln1_g")?,
                    ln1_b: p("ln1_b")?,
                    wq: p("wq")?,
                    wk: p("wk")?,
                    wv: p("wv")?,
                    wo: p("wo")?,
                    ln2_g: p("ln2_g")?,
                    ln2_b: p("ln2_b")?,
                    w1: p("w1")?,
                    b1: p("b1")?,
                    w2: p("w2")?,
                    b2: p("b2")?,
                })
            })
            .collect::<Result<_, ModelError>>()?;
        Ok(Encoder {
            config,
            tok_emb: find("enc.tok_emb".into())?,
            pos_emb: find("enc.pos_emb".into())?,
            layers,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Zeroes the output projections of every residual branch, so each layer
    /// passes its input through unchanged.
    pub fn zero_residual_branches(&self, store: &mut ParamStore) {
        for l in &self.layers {
            for idx in [l.wo, l.w2, l.b2] {
                let m = store.get_mut(idx);
                *m = Matrix::zeros(m.rows(), m.cols());
            }
        }
    }

    fn layer_norm(tape: &mut Tape, x: Var, g: Var, b: Var) -> Var {
        let n = tape.normalize_rows(x);
        let s = tape.mul_row(n, g);
        tape.add_row(s, b)
    }

    fn attention(&self, tape: &mut Tape, p: &[Var], l: &Layer, x: Var) -> Var {
        let d = self.config.embed_dim;
        let h = self.config.num_heads;
        let dh = d / h;
        let q = tape.matmul(x, p[l.wq]);
        let k = tape.matmul(x, p[l.wk]);
        let v = tape.matmul(x, p[l.wv]);
        let heads: Vec<Var> = (0..h)
            .map(|i| {
                let qh = tape.slice_cols(q, i * dh, dh);
                let kh = tape.slice_cols(k, i * dh, dh);
                let vh = tape.slice_cols(v, i * dh, dh);
                let kt = tape.transpose(kh);
                let scores = tape.matmul(qh, kt);
                let scores = tape.scale(scores, 1.0 / (dh as f64).sqrt());
                let attn = tape.softmax_rows(scores);
                tape.matmul(attn, vh)
            })
            .collect();
        let cat = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads) };
        tape.matmul(cat, p[l.wo])
    }

    /// Encodes one stream given per-word subword ids; returns `M x d` word vectors.
    pub fn encode_words(
        &self,
        tape: &mut Tape,
        params: &[Var],
        words: &[Vec<usize>],
        stream: &'static str,
    ) -> Result<Var, ModelError> {
        if words.is_empty() {
            return Err(ModelError::EmptyUtterance);
        }
        if let Some(word) = words.iter().position(Vec::is_empty) {
            return Err(ModelError::DegenerateWord { word, stream });
        }
        let ids: Vec<usize> = words.iter().flatten().copied().collect();
        let t = ids.len();
        if t > self.config.max_seq_len {
            return Err(ModelError::SequenceTooLong {
                len: t,
                max: self.config.max_seq_len,
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.config.vocab_size) {
            return Err(ModelError::InvalidConfig(format!("token id {bad} outside vocabulary")));
        }
        let tok = tape.gather(params[self.tok_emb], &ids);
        let positions: Vec<usize> = (0..t).collect();
        let pos = tape.gather(params[self.pos_emb], &positions);
        let mut x = tape.add(tok, pos);
        for l in &self.layers {
            let n1 = Self::layer_norm(tape, x, params[l.ln1_g], params[l.ln1_b]);
            let a = self.attention(tape, params, l, n1);
            x = tape.add(x, a);
            let n2 = Self::layer_norm(tape, x, params[l.ln2_g], params[l.ln2_b]);
            let h = tape.matmul(n2, params[l.w1]);
            let h = tape.add_row(h, params[l.b1]);
            let h = tape.gelu(h);
            let h = tape.matmul(h, params[l.w2]);
            let h = tape.add_row(h, params[l.b2]);
            x = tape.add(x, h);
        }
        // word pooling: row m averages the subword states of word m
        let mut pool = Matrix::zeros(words.len(), t);
        let mut off = 0;
        for (m, w) in words.iter().enumerate() {
            for j in off..off + w.len() {
                pool[(m, j)] = 1.0 / w.len() as f64;
            }
            off += w.len();
        }
        let pool = tape.leaf(pool);
        Ok(tape.matmul(pool, x))
    }
}

/// Subword ids for each word of one stream.
pub fn tokenize_stream<'a>(vocab: &SubwordVocab, words: impl Iterator<Item = &'a str>) -> Vec<Vec<usize>> {
    words.map(|w| vocab.encode_word(w)).collect()
}

/// Encodes the requested streams of `u` and fuses them into `M x repr_dim` word vectors.
pub fn encode_fuse(
    tape: &mut Tape,
    params: &[Var],
    encoder: &Encoder,
    vocab: &SubwordVocab,
    u: &Utterance,
    mode: Mode,
) -> Result<Var, ModelError> {
    let ortho = || tokenize_stream(vocab, u.surfaces());
    let roman = || tokenize_stream(vocab, u.romans());
    match mode {
        Mode::Ortho => encoder.encode_words(tape, params, &ortho(), "ortho"),
        Mode::Roman => encoder.encode_words(tape, params, &roman(), "roman"),
        Mode::Both => {
            let x = encoder.encode_words(tape, params, &ortho(), "ortho")?;
            let z = encoder.encode_words(tape, params, &roman(), "roman")?;
            Ok(tape.concat_cols(&[x, z]))
        }
    }
}
