//! Tape of recorded operations and the reverse sweep over it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{gemm, Tensor};
use super::AutogradError;

/// Lower bound applied inside `log` so that `log(0)` stays finite.
pub const LOG_FLOOR: f64 = 1e-12;

/// Row norms below this are treated as zero by normalisation and cosine ops.
pub const NORM_EPS: f64 = 1e-12;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    /// Row-broadcast addition of a `1 x n` bias.
    AddBias(Var, Var),
    Mul(Var, Var),
    /// Scales row `i` of the first input by element `i` of an `n x 1` column.
    MulCol(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    Concat(Vec<Var>),
    Col(Var, usize),
    RowL2Normalize(Var, Vec<f64>),
    Softmax(Var, f64),
    LogSoftmax(Var, f64),
    Dropout(Var, Vec<f64>),
    CosineRows(Var, Var),
    Gather(Var, Vec<usize>),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Whether stochastic ops are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A single-use computation tape.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction and `backward` is a single reverse sweep.
pub struct Graph {
    nodes: Vec<Node>,
    mode: Mode,
    seed: u64,
    step: u64,
    degenerate_rows: usize,
}

impl Graph {
    pub fn new(mode: Mode) -> Self {
        Self::with_seed(mode, 0, 0)
    }

    /// Dropout masks derive from `(seed, step, node index)`.
    pub fn with_seed(mode: Mode, seed: u64, step: u64) -> Self {
        Self { nodes: Vec::new(), mode, seed, step, degenerate_rows: 0 }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of zero rows met by `row_l2_normalize` and `cosine_rows` so far.
    pub fn degenerate_rows(&self) -> usize {
        self.degenerate_rows
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Inserts a leaf (parameter or constant input).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AutogradError> {
        let (l, r) = (self.shape(a), self.shape(b));
        if l != r {
            return Err(AutogradError::ShapeMismatch { op, left: l, right: r });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        let (l, r) = (self.shape(a), self.shape(b));
        if l[1] != r[0] {
            return Err(AutogradError::ShapeMismatch { op: "matmul", left: l, right: r });
        }
        let out = gemm(self.value(a), false, self.value(b), false);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `a * b^T`, e.g. all pairwise row dot products.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        let (l, r) = (self.shape(a), self.shape(b));
        if l[1] != r[1] {
            return Err(AutogradError::ShapeMismatch { op: "matmul_t", left: l, right: r });
        }
        let out = gemm(self.value(a), false, self.value(b), true);
        Ok(self.push(out, Op::MatMulT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        self.same_shape("add", a, b)?;
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        self.same_shape("sub", a, b)?;
        let vb = self.value(b).data().to_vec();
        let mut out = self.value(a).clone();
        for (o, y) in out.data_mut().iter_mut().zip(vb) {
            *o -= y;
        }
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var, AutogradError> {
        let (l, r) = (self.shape(a), self.shape(bias));
        if r[0] != 1 || r[1] != l[1] {
            return Err(AutogradError::ShapeMismatch { op: "add_bias", left: l, right: r });
        }
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(a).clone();
        for i in 0..l[0] {
            for (o, bv) in out.row_mut(i).iter_mut().zip(&b) {
                *o += bv;
            }
        }
        Ok(self.push(out, Op::AddBias(a, bias)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        self.same_shape("mul", a, b)?;
        let vb = self.value(b).data().to_vec();
        let mut out = self.value(a).clone();
        for (o, y) in out.data_mut().iter_mut().zip(vb) {
            *o *= y;
        }
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var, AutogradError> {
        let (l, r) = (self.shape(a), self.shape(col));
        if r != [l[0], 1] {
            return Err(AutogradError::ShapeMismatch { op: "mul_col", left: l, right: r });
        }
        let w = self.value(col).data().to_vec();
        let mut out = self.value(a).clone();
        for (i, wi) in w.iter().enumerate() {
            for o in out.row_mut(i) {
                *o *= wi;
            }
        }
        Ok(self.push(out, Op::MulCol(a, col)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|v| v * factor);
        self.push(out, Op::Scale(a, factor))
    }

    pub fn add_scalar(&mut self, a: Var, shift: f64) -> Var {
        let out = self.value(a).map(|v| v + shift);
        self.push(out, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a))
    }

    /// Natural log of `max(x, LOG_FLOOR)`.
    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.max(LOG_FLOOR).ln());
        self.push(out, Op::Log(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = if t.is_empty() { 0.0 } else { t.data().iter().sum::<f64>() / t.len() as f64 };
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Per-row sum, giving an `n x 1` column.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let sums: Vec<f64> = (0..t.rows()).map(|r| t.row(r).iter().sum()).collect();
        self.push(Tensor::column(&sums), Op::SumRows(a))
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, AutogradError> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Tensor::hcat(&tensors)?;
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    /// Column `j` as an `n x 1` tensor.
    pub fn col(&mut self, a: Var, j: usize) -> Result<Var, AutogradError> {
        let t = self.value(a);
        if j >= t.cols() {
            return Err(AutogradError::ShapeMismatch { op: "col", left: t.shape(), right: [1, j] });
        }
        let vals: Vec<f64> = (0..t.rows()).map(|r| t.get(r, j)).collect();
        Ok(self.push(Tensor::column(&vals), Op::Col(a, j)))
    }

    /// Scales each row to unit L2 norm. Rows with norm below [`NORM_EPS`]
    /// are returned as zero rows and counted in [`Graph::degenerate_rows`].
    pub fn row_l2_normalize(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let mut out = t.clone();
        let mut norms = Vec::with_capacity(t.rows());
        let mut degenerate = 0;
        for r in 0..t.rows() {
            let n = t.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            if n < NORM_EPS {
                out.row_mut(r).fill(0.0);
                norms.push(0.0);
                degenerate += 1;
            } else {
                out.row_mut(r).iter_mut().for_each(|v| *v /= n);
                norms.push(n);
            }
        }
        self.degenerate_rows += degenerate;
        self.push(out, Op::RowL2Normalize(a, norms))
    }

    /// Row-wise `softmax(x / tau)`.
    pub fn softmax(&mut self, a: Var, tau: f64) -> Result<Var, AutogradError> {
        check_tau(tau)?;
        let out = softmax_rows(self.value(a), tau);
        Ok(self.push(out, Op::Softmax(a, tau)))
    }

    /// Row-wise `log_softmax(x / tau)` with max subtraction.
    pub fn log_softmax(&mut self, a: Var, tau: f64) -> Result<Var, AutogradError> {
        check_tau(tau)?;
        let t = self.value(a);
        let mut out = t.clone();
        for r in 0..t.rows() {
            let row = out.row_mut(r);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v / tau));
            let lse = row.iter().map(|&v| (v / tau - max).exp()).sum::<f64>().ln() + max;
            row.iter_mut().for_each(|v| *v = *v / tau - lse);
        }
        Ok(self.push(out, Op::LogSoftmax(a, tau)))
    }

    /// Inverted dropout. Identity in [`Mode::Eval`] or when `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64) -> Result<Var, AutogradError> {
        if !(0.0..1.0).contains(&p) {
            return Err(AutogradError::InvalidDropout(p));
        }
        if self.mode == Mode::Eval || p == 0.0 {
            return Ok(a);
        }
        let id = self.nodes.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, self.step, id));
        let keep = 1.0 / (1.0 - p);
        let t = self.value(a);
        let mask: Vec<f64> =
            (0..t.len()).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
        let mut out = t.clone();
        for (o, m) in out.data_mut().iter_mut().zip(&mask) {
            *o *= m;
        }
        Ok(self.push(out, Op::Dropout(a, mask)))
    }

    /// Cosine similarity of corresponding rows, as an `n x 1` column.
    /// A pair involving a zero row has similarity 0.
    pub fn cosine_rows(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        self.same_shape("cosine_rows", a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let mut sims = Vec::with_capacity(ta.rows());
        let mut degenerate = 0;
        for r in 0..ta.rows() {
            let (x, y) = (ta.row(r), tb.row(r));
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nx < NORM_EPS || ny < NORM_EPS {
                sims.push(0.0);
                degenerate += 1;
            } else {
                let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
                sims.push(dot / (nx * ny));
            }
        }
        self.degenerate_rows += degenerate;
        Ok(self.push(Tensor::column(&sims), Op::CosineRows(a, b)))
    }

    /// Picks `a[i, index[i]]` for every row, as an `n x 1` column.
    pub fn gather(&mut self, a: Var, index: &[usize]) -> Result<Var, AutogradError> {
        let t = self.value(a);
        if index.len() != t.rows() {
            return Err(AutogradError::ShapeMismatch {
                op: "gather",
                left: t.shape(),
                right: [index.len(), 1],
            });
        }
        if let Some(&bad) = index.iter().find(|&&j| j >= t.cols()) {
            return Err(AutogradError::IndexOutOfRange { index: bad, bound: t.cols() });
        }
        let vals: Vec<f64> = index.iter().enumerate().map(|(r, &j)| t.get(r, j)).collect();
        Ok(self.push(Tensor::column(&vals), Op::Gather(a, index.to_vec())))
    }

    /// Reverse sweep from a scalar objective.
    pub fn backward(&self, objective: Var) -> Result<Gradients, AutogradError> {
        let shape = self.shape(objective);
        if shape != [1, 1] {
            return Err(AutogradError::NonScalarObjective(shape));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[objective.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=objective.0).rev() {
            let Some(grad) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(grad);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = gemm(&grad, false, self.value(*b), true);
                    let db = gemm(self.value(*a), true, &grad, false);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulT(a, b) => {
                    let da = gemm(&grad, false, self.value(*b), false);
                    let db = gemm(&grad, true, self.value(*a), false);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, grad.clone());
                    accumulate(&mut grads, *b, grad);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, grad.map(|v| -v));
                    accumulate(&mut grads, *a, grad);
                }
                Op::AddBias(a, bias) => {
                    let mut db = Tensor::zeros(1, grad.cols());
                    for r in 0..grad.rows() {
                        for (d, g) in db.data_mut().iter_mut().zip(grad.row(r)) {
                            *d += g;
                        }
                    }
                    accumulate(&mut grads, *bias, db);
                    accumulate(&mut grads, *a, grad);
                }
                Op::Mul(a, b) => {
                    let da = zip_map(&grad, self.value(*b), |g, v| g * v);
                    let db = zip_map(&grad, self.value(*a), |g, v| g * v);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MulCol(a, col) => {
                    let w = self.value(*col);
                    let x = self.value(*a);
                    let mut da = grad.clone();
                    let mut dw = Tensor::zeros(w.rows(), 1);
                    for r in 0..grad.rows() {
                        let wr = w.get(r, 0);
                        let mut acc = 0.0;
                        for (d, xv) in da.row_mut(r).iter_mut().zip(x.row(r)) {
                            acc += *d * xv;
                            *d *= wr;
                        }
                        dw.set(r, 0, acc);
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *col, dw);
                }
                Op::Scale(a, f) => accumulate(&mut grads, *a, grad.map(|v| v * f)),
                Op::AddScalar(a) => accumulate(&mut grads, *a, grad),
                Op::Tanh(a) => accumulate(&mut grads, *a, zip_map(&grad, y, |g, t| g * (1.0 - t * t))),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    accumulate(&mut grads, *a, zip_map(&grad, x, |g, v| if v > 0.0 { g } else { 0.0 }));
                }
                Op::Exp(a) => accumulate(&mut grads, *a, zip_map(&grad, y, |g, e| g * e)),
                Op::Log(a) => {
                    let x = self.value(*a);
                    let dx = zip_map(&grad, x, |g, v| if v > LOG_FLOOR { g / v } else { 0.0 });
                    accumulate(&mut grads, *a, dx);
                }
                Op::Sum(a) => {
                    let [r, c] = self.shape(*a);
                    accumulate(&mut grads, *a, Tensor::filled(r, c, grad.item()));
                }
                Op::Mean(a) => {
                    let [r, c] = self.shape(*a);
                    let n = (r * c).max(1) as f64;
                    accumulate(&mut grads, *a, Tensor::filled(r, c, grad.item() / n));
                }
                Op::SumRows(a) => {
                    let [r, c] = self.shape(*a);
                    let mut dx = Tensor::zeros(r, c);
                    for i in 0..r {
                        dx.row_mut(i).fill(grad.get(i, 0));
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let [r, c] = self.shape(*p);
                        let mut dp = Tensor::zeros(r, c);
                        for i in 0..r {
                            dp.row_mut(i).copy_from_slice(&grad.row(i)[offset..offset + c]);
                        }
                        offset += c;
                        accumulate(&mut grads, *p, dp);
                    }
                }
                Op::Col(a, j) => {
                    let [r, c] = self.shape(*a);
                    let mut dx = Tensor::zeros(r, c);
                    for i in 0..r {
                        dx.set(i, *j, grad.get(i, 0));
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::RowL2Normalize(a, norms) => {
                    let mut dx = Tensor::zeros(y.rows(), y.cols());
                    for (r, &n) in norms.iter().enumerate() {
                        if n == 0.0 {
                            continue;
                        }
                        let yr = y.row(r);
                        let gr = grad.row(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((d, yv), gv) in dx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *d = (gv - yv * dot) / n;
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::Softmax(a, tau) => {
                    let mut dx = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), grad.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((d, yv), gv) in dx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *d = yv * (gv - dot) / tau;
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::LogSoftmax(a, tau) => {
                    let mut dx = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), grad.row(r));
                        let gsum: f64 = gr.iter().sum();
                        for ((d, yv), gv) in dx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *d = (gv - yv.exp() * gsum) / tau;
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::Dropout(a, mask) => {
                    let dx = Tensor::from_vec(
                        grad.rows(),
                        grad.cols(),
                        grad.data().iter().zip(mask).map(|(g, m)| g * m).collect(),
                    )?;
                    accumulate(&mut grads, *a, dx);
                }
                Op::CosineRows(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    let mut db = Tensor::zeros(tb.rows(), tb.cols());
                    for r in 0..ta.rows() {
                        let (x, z) = (ta.row(r), tb.row(r));
                        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if nx < NORM_EPS || nz < NORM_EPS {
                            continue;
                        }
                        let c = y.get(r, 0);
                        let g = grad.get(r, 0);
                        let inv = 1.0 / (nx * nz);
                        for (j, d) in da.row_mut(r).iter_mut().enumerate() {
                            *d = g * (z[j] * inv - c * x[j] / (nx * nx));
                        }
                        for (j, d) in db.row_mut(r).iter_mut().enumerate() {
                            *d = g * (x[j] * inv - c * z[j] / (nz * nz));
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Gather(a, index) => {
                    let [r, c] = self.shape(*a);
                    let mut dx = Tensor::zeros(r, c);
                    for (i, &j) in index.iter().enumerate() {
                        dx.set(i, j, grad.get(i, 0));
                    }
                    accumulate(&mut grads, *a, dx);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Gradients of one objective with respect to every node that reaches it.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for the leaf `v`, or zeros of the right shape when `v` does
    /// not reach the objective. Gradients of interior nodes are not retained.
    pub fn wrt(&self, graph: &Graph, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let [r, c] = graph.shape(v);
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn reached(&self, v: Var) -> bool {
        self.grads[v.0].is_some()
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("shapes checked at op construction")
}

fn check_tau(tau: f64) -> Result<(), AutogradError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(AutogradError::NonPositiveTemperature(tau))
    }
}

/// Row-wise `softmax(x / tau)` outside of any graph.
pub fn softmax_rows(t: &Tensor, tau: f64) -> Tensor {
    let mut out = t.clone();
    for r in 0..t.rows() {
        let row = out.row_mut(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v / tau));
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v / tau - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// splitmix64-style mixing of the dropout stream coordinates.
fn mix(seed: u64, step: u64, id: u64) -> u64 {
    let mut z = seed
        .wrapping_add(step.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(id.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
