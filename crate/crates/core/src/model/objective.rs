//! Pooling, projection, contrastive and task objectives.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{dot, norm, Matrix};
use super::tape::{Tape, Var};
use super::{ModelError, ParamStore};

/// Per-word fused vectors and the pooled, projected sentence vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedRepresentation {
    pub word_vectors: Matrix,
    pub sentence_vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClConfig {
    pub temperature: f64,
    pub hidden_dim: usize,
    pub proj_dim: usize,
}

impl Default for ClConfig {
    fn default() -> Self {
        ClConfig {
            temperature: 0.1,
            hidden_dim: 16,
            proj_dim: 8,
        }
    }
}

impl ClConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.hidden_dim == 0 || self.proj_dim == 0 {
            return Err(ModelError::InvalidConfig("projection dims must be positive".into()));
        }
        Ok(())
    }
}

/// Two-layer feed-forward projection `tanh(x W1 + b1) W2 + b2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionHead {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl ProjectionHead {
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        ProjectionHead {
            w1: store.add_normal("proj.w1", in_dim, hidden, 1.0 / (in_dim as f64).sqrt(), rng),
            b1: store.add("proj.b1", Matrix::zeros(1, hidden)),
            w2: store.add_normal("proj.w2", hidden, out_dim, 1.0 / (hidden as f64).sqrt(), rng),
            b2: store.add("proj.b2", Matrix::zeros(1, out_dim)),
        }
    }

    pub fn from_store(store: &ParamStore) -> Result<Self, ModelError> {
        let f = |n: &str| {
            store
                .index_of(n)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing tensor {n}")))
        };
        Ok(ProjectionHead {
            w1: f("proj.w1")?,
            b1: f("proj.b1")?,
            w2: f("proj.w2")?,
            b2: f("proj.b2")?,
        })
    }

    pub fn apply(&self, tape: &mut Tape, p: &[Var], x: Var) -> Var {
        let h = tape.matmul(x, p[self.w1]);
        let h = tape.add_row(h, p[self.b1]);
        let h = tape.tanh(h);
        let o = tape.matmul(h, p[self.w2]);
        tape.add_row(o, p[self.b2])
    }
}

/// Mean over the word rows, then the projection head.
pub fn sentence_rep(
    tape: &mut Tape,
    p: &[Var],
    word_vectors: Var,
    head: &ProjectionHead,
) -> Result<Var, ModelError> {
    if tape.value(word_vectors).rows() == 0 {
        return Err(ModelError::EmptyUtterance);
    }
    let mean = tape.mean_rows(word_vectors);
    Ok(head.apply(tape, p, mean))
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64, ModelError> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(ModelError::ZeroNorm);
    }
    Ok(dot(a, b) / (na * nb))
}

/// Contrastive loss of one anchor:
/// `-log( e^{cos(v1,v2)/τ} / (e^{cos(v1,v2)/τ} + Σ_neg e^{cos(v1,neg)/τ}) )`.
///
/// Evaluated as `ln(1 + Σ e^{(cos_neg - cos_pos)/τ})` so tiny losses keep precision.
pub fn cl_loss(view1: &[f64], view2: &[f64], negatives: &[&[f64]], tau: f64) -> Result<f64, ModelError> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(ModelError::InvalidConfig(format!("temperature must be positive, got {tau}")));
    }
    if negatives.is_empty() {
        return Err(ModelError::NoNegatives);
    }
    let pos = cosine(view1, view2)? / tau;
    let negs = negatives
        .iter()
        .map(|n| Ok(cosine(view1, n)? / tau))
        .collect::<Result<Vec<f64>, ModelError>>()?;
    let max = negs.iter().copied().fold(pos, f64::max);
    // ln(1 + Σ e^{n - pos}) computed stably
    let shifted: f64 = negs.iter().map(|n| (n - max).exp()).sum();
    let loss = if max == pos {
        shifted.ln_1p()
    } else {
        (max - pos) + ((pos - max).exp() + shifted).ln()
    };
    Ok(loss)
}

/// Batch contrastive loss on the tape: anchor `i` pairs `view1[i]` with
/// `view2[i]` and uses every other `view2[j]` as a negative. Averaged over anchors.
pub fn cl_loss_batch(tape: &mut Tape, view1: &[Var], view2: &[Var], tau: f64) -> Result<Var, ModelError> {
    if view1.len() != view2.len() {
        return Err(ModelError::LabelMismatch("view batches differ in size".into()));
    }
    if view1.len() < 2 {
        return Err(ModelError::NoNegatives);
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(ModelError::InvalidConfig(format!("temperature must be positive, got {tau}")));
    }
    if view1.iter().chain(view2).any(|v| norm(tape.value(*v).data()) == 0.0) {
        return Err(ModelError::ZeroNorm);
    }
    let mut rows = Vec::with_capacity(view1.len());
    for (i, &a) in view1.iter().enumerate() {
        let mut sims = vec![tape.cosine(a, view2[i])];
        for (j, &b) in view2.iter().enumerate() {
            if j != i {
                sims.push(tape.cosine(a, b));
            }
        }
        let row = tape.concat_cols(&sims);
        rows.push(tape.scale(row, 1.0 / tau));
    }
    let logits = tape.concat_rows(&rows);
    Ok(tape.cross_entropy(logits, &vec![0; view1.len()]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    SentenceClassify { classes: usize },
    WordTag { tags: usize },
    QaSpan,
}

impl TaskKind {
    pub fn output_dim(self) -> usize {
        match self {
            TaskKind::SentenceClassify { classes } => classes,
            TaskKind::WordTag { tags } => tags,
            TaskKind::QaSpan => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskLabel {
    Class(usize),
    Tags(Vec<usize>),
    /// Inclusive word span.
    Span { start: usize, end: usize },
}

/// Linear task projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskHead {
    pub kind: TaskKind,
    w: usize,
    b: usize,
}

impl TaskHead {
    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, kind: TaskKind, in_dim: usize, rng: &mut R) -> Self {
        let out = kind.output_dim();
        TaskHead {
            kind,
            w: store.add_normal("task.w", in_dim, out, 1.0 / (in_dim as f64).sqrt(), rng),
            b: store.add("task.b", Matrix::zeros(1, out)),
        }
    }

    pub fn from_store(store: &ParamStore, kind: TaskKind) -> Result<Self, ModelError> {
        let f = |n: &str| {
            store
                .index_of(n)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing tensor {n}")))
        };
        Ok(TaskHead {
            kind,
            w: f("task.w")?,
            b: f("task.b")?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.kind.output_dim()
    }

    /// Logits for one representation: `1 x C` for sentences, `M x C` for words,
    /// `M x 2` (start, end columns) for spans.
    pub fn logits(&self, tape: &mut Tape, p: &[Var], word_vectors: Var) -> Var {
        let x = match self.kind {
            TaskKind::SentenceClassify { .. } => tape.mean_rows(word_vectors),
            TaskKind::WordTag { .. } | TaskKind::QaSpan => word_vectors,
        };
        let y = tape.matmul(x, p[self.w]);
        tape.add_row(y, p[self.b])
    }

    /// Cross-entropy for one representation.
    pub fn loss(&self, tape: &mut Tape, p: &[Var], word_vectors: Var, label: &TaskLabel) -> Result<Var, ModelError> {
        let m = tape.value(word_vectors).rows();
        if m == 0 {
            return Err(ModelError::EmptyUtterance);
        }
        let check = |l: usize, n: usize| {
            if l < n {
                Ok(())
            } else {
                Err(ModelError::LabelOutOfRange { label: l, classes: n })
            }
        };
        match (self.kind, label) {
            (TaskKind::SentenceClassify { classes }, TaskLabel::Class(c)) => {
                check(*c, classes)?;
                let logits = self.logits(tape, p, word_vectors);
                Ok(tape.cross_entropy(logits, &[*c]))
            }
            (TaskKind::WordTag { tags }, TaskLabel::Tags(t)) => {
                if t.len() != m {
                    return Err(ModelError::LabelMismatch(format!("{} tags for {m} words", t.len())));
                }
                for &x in t {
                    check(x, tags)?;
                }
                let logits = self.logits(tape, p, word_vectors);
                Ok(tape.cross_entropy(logits, t))
            }
            (TaskKind::QaSpan, TaskLabel::Span { start, end }) => {
                check(*start, m)?;
                check(*end, m)?;
                if start > end {
                    return Err(ModelError::LabelMismatch(format!("span start {start} after end {end}")));
                }
                let logits = self.logits(tape, p, word_vectors);
                let lt = tape.transpose(logits);
                let starts = tape.gather(lt, &[0]);
                let ends = tape.gather(lt, &[1]);
                let ls = tape.cross_entropy(starts, &[*start]);
                let le = tape.cross_entropy(ends, &[*end]);
                let both = tape.sum(&[ls, le]);
                Ok(tape.scale(both, 0.5))
            }
            (kind, label) => Err(ModelError::LabelMismatch(format!("{label:?} for {kind:?}"))),
        }
    }
}

/// Mean task cross-entropy over a batch of representations.
pub fn task_loss(
    tape: &mut Tape,
    p: &[Var],
    reps: &[Var],
    head: &TaskHead,
    labels: &[TaskLabel],
) -> Result<Var, ModelError> {
    if reps.len() != labels.len() || reps.is_empty() {
        return Err(ModelError::LabelMismatch(format!(
            "{} representations, {} labels",
            reps.len(),
            labels.len()
        )));
    }
    let losses = reps
        .iter()
        .zip(labels)
        .map(|(r, l)| head.loss(tape, p, *r, l))
        .collect::<Result<Vec<_>, _>>()?;
    let s = tape.sum(&losses);
    Ok(tape.scale(s, 1.0 / losses.len() as f64))
}

/// `task + weight * cl`; a missing contrastive term contributes nothing.
pub fn total_loss(tape: &mut Tape, task: Var, cl: Option<Var>, cl_weight: f64) -> Var {
    match cl {
        Some(cl) => {
            let w = if cl_weight == 1.0 { cl } else { tape.scale(cl, cl_weight) };
            tape.sum(&[task, w])
        }
        None => task,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    /// Unit vector at `angle` in the plane.
    fn at(angle: f64) -> Vec<f64> {
        vec![angle.cos(), angle.sin()]
    }

    #[test]
    fn one_equal_negative_gives_ln2() {
        let a = at(0.0);
        let l = cl_loss(&a, &at(1.0), &[&at(-1.0)], 0.1).unwrap();
        assert!((l - LN_2).abs() < 1e-12);
    }

    #[test]
    fn k_equal_negatives_give_ln_one_plus_k() {
        let a = at(0.0);
        let pos = at(0.4);
        let negs: Vec<Vec<f64>> = (0..5).map(|i| at(if i % 2 == 0 { 0.4 } else { -0.4 })).collect();
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        let l = cl_loss(&a, &pos, &refs, 0.5).unwrap();
        assert!((l - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn tiny_loss_keeps_precision() {
        let a = [1.0, 0.0];
        let l = cl_loss(&a, &[2.0, 0.0], &[&[-3.0, 0.0]], 0.1).unwrap();
        let expected = (-20f64).exp().ln_1p();
        assert!(l > 0.0);
        assert!(((l - expected) / expected).abs() < 1e-12, "{l} vs {expected}");
    }

    #[test]
    fn zero_vectors_and_missing_negatives_fail() {
        assert!(matches!(cl_loss(&[0.0, 0.0], &[1.0, 0.0], &[&[1.0, 1.0]], 0.1), Err(ModelError::ZeroNorm)));
        assert!(matches!(cl_loss(&[1.0, 0.0], &[1.0, 0.0], &[], 0.1), Err(ModelError::NoNegatives)));
        assert!(cl_loss(&[1.0, 0.0], &[1.0, 0.0], &[&[0.0, 1.0]], 0.0).is_err());
    }

    #[test]
    fn batch_loss_matches_per_anchor_formula() {
        let v1 = [vec![1.0, 0.2, -0.3], vec![0.1, 0.9, 0.4], vec![-0.5, 0.3, 0.8]];
        let v2 = [vec![0.8, 0.1, 0.0], vec![0.3, 1.0, 0.2], vec![-0.2, -0.1, 0.9]];
        let mut tape = Tape::new();
        let a: Vec<Var> = v1.iter().map(|v| tape.leaf(Matrix::row_vector(v.clone()))).collect();
        let b: Vec<Var> = v2.iter().map(|v| tape.leaf(Matrix::row_vector(v.clone()))).collect();
        let l = cl_loss_batch(&mut tape, &a, &b, 0.2).unwrap();
        let mut expected = 0.0;
        for i in 0..3 {
            let negs: Vec<&[f64]> = (0..3).filter(|&j| j != i).map(|j| v2[j].as_slice()).collect();
            expected += cl_loss(&v1[i], &v2[i], &negs, 0.2).unwrap();
        }
        assert!((tape.scalar(l) - expected / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sentence_rep_matches_manual_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let head = ProjectionHead::init(&mut store, 4, 3, 2, &mut rng);
        let x = Matrix::from_rows(&[[0.1, -0.4, 0.3, 0.9], [0.5, 0.2, -0.7, 0.0], [-0.3, 0.6, 0.1, 0.2]]);
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let xv = tape.leaf(x.clone());
        let s = sentence_rep(&mut tape, &p, xv, &head).unwrap();
        let got = tape.value(s).data().to_vec();

        let mean: Vec<f64> = (0..4).map(|c| (0..3).map(|r| x[(r, c)]).sum::<f64>() / 3.0).collect();
        let (w1, b1, w2, b2) = (store.get(0), store.get(1), store.get(2), store.get(3));
        let hidden: Vec<f64> = (0..3)
            .map(|j| ((0..4).map(|i| mean[i] * w1[(i, j)]).sum::<f64>() + b1[(0, j)]).tanh())
            .collect();
        let out: Vec<f64> = (0..2)
            .map(|k| (0..3).map(|j| hidden[j] * w2[(j, k)]).sum::<f64>() + b2[(0, k)])
            .collect();
        for (g, e) in got.iter().zip(&out) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn sentence_rep_of_single_or_repeated_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut store = ParamStore::new();
        let head = ProjectionHead::init(&mut store, 3, 4, 2, &mut rng);
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let one = tape.leaf(Matrix::from_rows(&[[0.2, -0.1, 0.5]]));
        let rep = tape.leaf(Matrix::from_rows(&[[0.2, -0.1, 0.5]; 4]));
        let a = sentence_rep(&mut tape, &p, one, &head).unwrap();
        let b = sentence_rep(&mut tape, &p, rep, &head).unwrap();
        let direct = head.apply(&mut tape, &p, one);
        assert!(tape.value(a).max_abs_diff(tape.value(direct)) < 1e-15);
        assert!(tape.value(b).max_abs_diff(tape.value(direct)) < 1e-12);
        let empty = tape.leaf(Matrix::zeros(0, 3));
        assert!(matches!(sentence_rep(&mut tape, &p, empty, &head), Err(ModelError::EmptyUtterance)));
    }

    fn head_with(store: &mut ParamStore, kind: TaskKind, w: Matrix, b: Matrix) -> TaskHead {
        let wi = store.add("task.w", w);
        let bi = store.add("task.b", b);
        TaskHead { kind, w: wi, b: bi }
    }

    #[test]
    fn uniform_logits_give_ln_classes() {
        let mut store = ParamStore::new();
        let head = head_with(&mut store, TaskKind::SentenceClassify { classes: 3 }, Matrix::zeros(2, 3), Matrix::zeros(1, 3));
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let x = tape.leaf(Matrix::from_rows(&[[0.3, 0.1], [0.2, 0.7]]));
        let l = task_loss(&mut tape, &p, &[x], &head, &[TaskLabel::Class(2)]).unwrap();
        assert!((tape.scalar(l) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_logits_approach_zero() {
        let mut store = ParamStore::new();
        let head = head_with(
            &mut store,
            TaskKind::SentenceClassify { classes: 2 },
            Matrix::zeros(1, 2),
            Matrix::row_vector(vec![0.0, 60.0]),
        );
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let x = tape.leaf(Matrix::from_rows(&[[1.0]]));
        let l = task_loss(&mut tape, &p, &[x], &head, &[TaskLabel::Class(1)]).unwrap();
        assert!(tape.scalar(l) < 1e-25);
    }

    #[test]
    fn random_batch_matches_scalar_recomputation() {
        let w = Matrix::from_rows(&[[0.3, -0.2, 0.5], [0.1, 0.4, -0.6]]);
        let b = Matrix::row_vector(vec![0.05, -0.1, 0.2]);
        let x1 = Matrix::from_rows(&[[0.2, 0.9], [-0.4, 0.1]]);
        let x2 = Matrix::from_rows(&[[1.2, -0.3], [0.5, 0.5], [0.0, 0.8]]);
        let labels = [TaskLabel::Class(0), TaskLabel::Class(2)];

        let mut store = ParamStore::new();
        let head = head_with(&mut store, TaskKind::SentenceClassify { classes: 3 }, w.clone(), b.clone());
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let a = tape.leaf(x1.clone());
        let c = tape.leaf(x2.clone());
        let l = task_loss(&mut tape, &p, &[a, c], &head, &labels).unwrap();

        let ce = |x: &Matrix, y: usize| {
            let n = x.rows() as f64;
            let mean = [(0..x.rows()).map(|r| x[(r, 0)]).sum::<f64>() / n, (0..x.rows()).map(|r| x[(r, 1)]).sum::<f64>() / n];
            let logits: Vec<f64> = (0..3).map(|k| mean[0] * w[(0, k)] + mean[1] * w[(1, k)] + b[(0, k)]).collect();
            let z: f64 = logits.iter().map(|v| v.exp()).sum();
            -(logits[y].exp() / z).ln()
        };
        let expected = (ce(&x1, 0) + ce(&x2, 2)) / 2.0;
        assert!((tape.scalar(l) - expected).abs() < 1e-12);
    }

    #[test]
    fn word_tag_and_span_losses() {
        let mut store = ParamStore::new();
        let tag_head = head_with(&mut store, TaskKind::WordTag { tags: 2 }, Matrix::zeros(2, 2), Matrix::zeros(1, 2));
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let x = tape.leaf(Matrix::from_rows(&[[0.3, 0.1], [0.2, 0.7], [0.0, 1.0]]));
        let l = tag_head.loss(&mut tape, &p, x, &TaskLabel::Tags(vec![0, 1, 1])).unwrap();
        assert!((tape.scalar(l) - LN_2).abs() < 1e-15);
        assert!(tag_head.loss(&mut tape, &p, x, &TaskLabel::Tags(vec![0, 1])).is_err());
        assert!(matches!(
            tag_head.loss(&mut tape, &p, x, &TaskLabel::Tags(vec![0, 1, 2])),
            Err(ModelError::LabelOutOfRange { label: 2, classes: 2 })
        ));

        let mut store = ParamStore::new();
        let qa = head_with(&mut store, TaskKind::QaSpan, Matrix::zeros(2, 2), Matrix::zeros(1, 2));
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let x = tape.leaf(Matrix::from_rows(&[[0.3, 0.1], [0.2, 0.7], [0.0, 1.0]]));
        let l = qa.loss(&mut tape, &p, x, &TaskLabel::Span { start: 1, end: 2 }).unwrap();
        assert!((tape.scalar(l) - 3f64.ln()).abs() < 1e-15);
        assert!(qa.loss(&mut tape, &p, x, &TaskLabel::Span { start: 1, end: 3 }).is_err());
        assert!(qa.loss(&mut tape, &p, x, &TaskLabel::Class(0)).is_err());
    }

    #[test]
    fn total_is_additive() {
        let mut tape = Tape::new();
        let t = tape.leaf(Matrix::filled(1, 1, 1.25));
        let c = tape.leaf(Matrix::filled(1, 1, LN_2));
        let sum = total_loss(&mut tape, t, Some(c), 1.0);
        assert_eq!(tape.scalar(sum), 1.25 + LN_2);
        let half = total_loss(&mut tape, t, Some(c), 0.5);
        assert_eq!(tape.scalar(half), 1.25 + 0.5 * LN_2);
        let none = total_loss(&mut tape, t, None, 1.0);
        assert_eq!(tape.scalar(none), 1.25);
    }
}
