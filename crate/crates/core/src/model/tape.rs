//! Reverse-mode differentiation over [`Matrix`] values.
//!
//! Every operation evaluates eagerly and records itself on the tape;
//! [`Tape::backward`] walks the record in reverse accumulating gradients.

use super::matrix::{dot, norm, Matrix};

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

const LAYER_NORM_EPS: f64 = 1e-5;
const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Gelu(Var),
    SoftmaxRows(Var),
    NormalizeRows(Var),
    Transpose(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Gather(Var, Vec<usize>),
    Cosine(Var, Var),
    CrossEntropy(Var, Vec<usize>),
    Sum(Vec<Var>),
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of `v`, or `None` when the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn accumulate(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => *slot = Some(g),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        assert_eq!(m.shape(), (1, 1), "not a scalar");
        m[(0, 0)]
    }

    /// A leaf: parameter or constant input.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.rows(), 1);
        let mut v = self.value(a).clone();
        for i in 0..v.rows() {
            for (x, b) in v.row_mut(i).iter_mut().zip(r.data()) {
                *x += b;
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    /// Multiplies every row of `a` elementwise by a `1 x n` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.rows(), 1);
        let mut v = self.value(a).clone();
        for i in 0..v.rows() {
            for (x, b) in v.row_mut(i).iter_mut().zip(r.data()) {
                *x *= b;
            }
        }
        self.push(v, Op::MulRow(a, row))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).scale(s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(gelu);
        self.push(v, Op::Gelu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut v = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            v.row_mut(i).copy_from_slice(&softmax_row(x.row(i)));
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Per-row standardization `(x - mean) / sqrt(var + eps)`.
    pub fn normalize_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut v = x.clone();
        let n = x.cols() as f64;
        for i in 0..x.rows() {
            let row = v.row_mut(i);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for r in row.iter_mut() {
                *r = (*r - mean) * inv;
            }
        }
        self.push(v, Op::NormalizeRows(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Var {
        let x = self.value(a);
        assert!(start + width <= x.cols());
        let mut v = Matrix::zeros(x.rows(), width);
        for i in 0..x.rows() {
            v.row_mut(i).copy_from_slice(&x.row(i)[start..start + width]);
        }
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut v = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for p in parts {
                let m = self.value(*p);
                assert_eq!(m.rows(), rows, "concat_cols row mismatch");
                v.row_mut(i)[off..off + m.cols()].copy_from_slice(m.row(i));
                off += m.cols();
            }
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let m = self.value(*p);
            assert_eq!(m.cols(), cols, "concat_rows column mismatch");
            data.extend_from_slice(m.data());
            rows += m.rows();
        }
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    /// Selects rows of `table` by index.
    pub fn gather(&mut self, table: Var, indices: &[usize]) -> Var {
        let t = self.value(table);
        let mut v = Matrix::zeros(indices.len(), t.cols());
        for (i, &idx) in indices.iter().enumerate() {
            v.row_mut(i).copy_from_slice(t.row(idx));
        }
        self.push(v, Op::Gather(table, indices.to_vec()))
    }

    /// Cosine similarity of two `1 x n` rows; both must have nonzero norm.
    pub fn cosine(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape());
        let c = dot(x.data(), y.data()) / (norm(x.data()) * norm(y.data()));
        self.push(Matrix::filled(1, 1, c), Op::Cosine(a, b))
    }

    /// Mean over rows of `-log softmax(logits)[target]`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let x = self.value(logits);
        assert_eq!(x.rows(), targets.len());
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = x.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|r| (r - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
        }
        let v = Matrix::filled(1, 1, total / targets.len() as f64);
        self.push(v, Op::CrossEntropy(logits, targets.to_vec()))
    }

    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let mut v = self.value(parts[0]).clone();
        for p in &parts[1..] {
            v.add_assign(self.value(*p));
        }
        self.push(v, Op::Sum(parts.to_vec()))
    }

    /// Mean of the rows as a `1 x n` row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let n = self.value(a).rows();
        let pool = self.leaf(Matrix::filled(1, n, 1.0 / n as f64));
        self.matmul(pool, a)
    }

    /// Gradients of a scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).shape(), (1, 1), "loss must be scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    accumulate(&mut grads[a.0], g.matmul_t(vb));
                    accumulate(&mut grads[b.0], va.t_matmul(&g));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g.clone());
                }
                Op::AddRow(a, r) => {
                    accumulate(&mut grads[r.0], g.column_sums());
                    accumulate(&mut grads[a.0], g.clone());
                }
                Op::MulRow(a, r) => {
                    let (va, vr) = (self.value(*a), self.value(*r));
                    let mut ga = g.clone();
                    for i in 0..ga.rows() {
                        for (x, b) in ga.row_mut(i).iter_mut().zip(vr.data()) {
                            *x *= b;
                        }
                    }
                    accumulate(&mut grads[r.0], g.zip_map(va, |x, y| x * y).column_sums());
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Scale(a, s) => accumulate(&mut grads[a.0], g.scale(*s)),
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, |d, y| d * (1.0 - y * y));
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Gelu(a) => {
                    let ga = g.zip_map(self.value(*a), |d, x| d * gelu_grad(x));
                    accumulate(&mut grads[a.0], ga);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut ga = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let s = dot(g.row(i), y.row(i));
                        for ((o, &d), &p) in ga.row_mut(i).iter_mut().zip(g.row(i)).zip(y.row(i)) {
                            *o = p * (d - s);
                        }
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::NormalizeRows(a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let n = x.cols() as f64;
                    let mut ga = Matrix::zeros(x.rows(), x.cols());
                    for i in 0..x.rows() {
                        let row = x.row(i);
                        let mean = row.iter().sum::<f64>() / n;
                        let var = row.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
                        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                        let mean_g = g.row(i).iter().sum::<f64>() / n;
                        let mean_gy = dot(g.row(i), y.row(i)) / n;
                        for ((o, &d), &yy) in ga.row_mut(i).iter_mut().zip(g.row(i)).zip(y.row(i)) {
                            *o = inv * (d - mean_g - yy * mean_gy);
                        }
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::Transpose(a) => accumulate(&mut grads[a.0], g.transpose()),
                Op::SliceCols(a, start) => {
                    let x = self.value(*a);
                    let mut ga = Matrix::zeros(x.rows(), x.cols());
                    for i in 0..x.rows() {
                        ga.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads[a.0], ga);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        let mut gp = Matrix::zeros(g.rows(), w);
                        for i in 0..g.rows() {
                            gp.row_mut(i).copy_from_slice(&g.row(i)[off..off + w]);
                        }
                        off += w;
                        accumulate(&mut grads[p.0], gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let (r, c) = self.value(*p).shape();
                        let gp = Matrix::from_vec(r, c, g.data()[off * c..(off + r) * c].to_vec());
                        off += r;
                        accumulate(&mut grads[p.0], gp);
                    }
                }
                Op::Gather(table, indices) => {
                    let t = self.value(*table);
                    let mut gt = Matrix::zeros(t.rows(), t.cols());
                    for (i, &idx) in indices.iter().enumerate() {
                        for (o, &d) in gt.row_mut(idx).iter_mut().zip(g.row(i)) {
                            *o += d;
                        }
                    }
                    accumulate(&mut grads[table.0], gt);
                }
                Op::Cosine(a, b) => {
                    let (x, y) = (self.value(*a).data(), self.value(*b).data());
                    let (nx, ny) = (norm(x), norm(y));
                    let c = node.value[(0, 0)];
                    let up = g[(0, 0)];
                    let gx: Vec<f64> = x
                        .iter()
                        .zip(y)
                        .map(|(xi, yi)| up * (yi / (nx * ny) - c * xi / (nx * nx)))
                        .collect();
                    let gy: Vec<f64> = x
                        .iter()
                        .zip(y)
                        .map(|(xi, yi)| up * (xi / (nx * ny) - c * yi / (ny * ny)))
                        .collect();
                    accumulate(&mut grads[a.0], Matrix::row_vector(gx));
                    accumulate(&mut grads[b.0], Matrix::row_vector(gy));
                }
                Op::CrossEntropy(logits, targets) => {
                    let x = self.value(*logits);
                    let scale = g[(0, 0)] / targets.len() as f64;
                    let mut gl = Matrix::zeros(x.rows(), x.cols());
                    for (i, &t) in targets.iter().enumerate() {
                        let p = softmax_row(x.row(i));
                        for (j, (o, pj)) in gl.row_mut(i).iter_mut().zip(p).enumerate() {
                            *o = scale * (pj - if j == t { 1.0 } else { 0.0 });
                        }
                    }
                    accumulate(&mut grads[logits.0], gl);
                }
                Op::Sum(parts) => {
                    for p in parts {
                        accumulate(&mut grads[p.0], g.clone());
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }
}
