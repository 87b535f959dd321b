//! Define-by-run reverse-mode differentiation.
//!
//! Every primitive appends one node holding its forward value. Nodes can
//! only reference earlier nodes, so record order is a topological order and
//! [`Tape::backward`] is a single reverse sweep.

use super::{log_sum_exp, softplus, ComputeError, Tensor, LOG_FLOOR};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// `a` is `[m, k]` (or `[k]`, treated as one row), `b` is `[k, n]`.
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    /// `b` is either the same shape as `a` or a vector repeated over the leading axis.
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    /// `a / max(b, LOG_FLOOR)`.
    Div { a: Var, b: Var },
    Scale { a: Var, c: f64 },
    AddScalar { a: Var },
    /// Elementwise map with its local derivative captured at forward time.
    Unary { a: Var, deriv: Vec<f64> },
    Concat { parts: Vec<Var> },
    Slice { a: Var, start: usize },
    Sum { a: Var },
    LogSumExp { a: Var },
    /// Sum of selected rows of a `[r, c]` matrix (a product with a sparse 0/1 row vector).
    GatherRows { w: Var, rows: Vec<usize>, cols: usize },
    /// Bernoulli log-likelihood of a binary target; `deriv` is d/dlogit.
    BernoulliLogLik { logits: Var, deriv: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    trainable: bool,
    /// Depends on at least one trainable leaf.
    needs_grad: bool,
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul { a, b, .. } | Op::Add { a, b } | Op::Sub { a, b } | Op::Mul { a, b } | Op::Div { a, b } => {
                vec![*a, *b]
            }
            Op::Scale { a, .. }
            | Op::AddScalar { a }
            | Op::Unary { a, .. }
            | Op::Slice { a, .. }
            | Op::Sum { a }
            | Op::LogSumExp { a } => vec![*a],
            Op::Concat { parts } => parts.clone(),
            Op::GatherRows { w, .. } => vec![*w],
            Op::BernoulliLogLik { logits, .. } => vec![*logits],
        }
    }
}

/// Probability clamp used by the Bernoulli likelihood.
pub const PROB_CLAMP: f64 = 1e-6;

/// Operation record for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(msg: String) -> ComputeError {
    ComputeError::Shape(msg)
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let needs_grad = op.inputs().iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value, op, trainable: false, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf; `backward` reports its gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, trainable: true, needs_grad: true });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, ComputeError> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k, vector_lhs) = match sa.as_slice() {
            [k] => (1, *k, true),
            [m, k] => (*m, *k, false),
            _ => return Err(shape_err(format!("matmul lhs must be 1-D or 2-D, got {sa:?}"))),
        };
        let n = match sb.as_slice() {
            [kb, n] if *kb == k => *n,
            _ => return Err(shape_err(format!("matmul {sa:?} x {sb:?}"))),
        };
        let (ad, bd) = (self.data(a), self.data(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let x = ad[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &w) in row.iter_mut().zip(brow) {
                    *o += x * w;
                }
            }
        }
        let shape = if vector_lhs { vec![n] } else { vec![m, n] };
        Ok(self.push(Tensor::new(shape, out)?, Op::MatMul { a, b, m, k, n }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, ComputeError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let n = sb.iter().product::<usize>();
        let ok = sa == sb || (sb.len() == 1 && sa.last() == Some(&n));
        if !ok {
            return Err(shape_err(format!("add {sa:?} + {sb:?}")));
        }
        let shape = sa.to_vec();
        let bd = self.data(b);
        let out: Vec<f64> = self.data(a).iter().enumerate().map(|(i, &x)| x + bd[i % n]).collect();
        Ok(self.push(Tensor::new(shape, out)?, Op::Add { a, b }))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(), ComputeError> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(format!("{what} {:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let out = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(self.shape(a).to_vec(), out).expect("shape preserved")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, ComputeError> {
        self.same_shape(a, b, "sub")?;
        let t = self.zip_map(a, b, |x, y| x - y);
        Ok(self.push(t, Op::Sub { a, b }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, ComputeError> {
        self.same_shape(a, b, "mul")?;
        let t = self.zip_map(a, b, |x, y| x * y);
        Ok(self.push(t, Op::Mul { a, b }))
    }

    /// Division with the denominator floored at `1e-12`.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, ComputeError> {
        self.same_shape(a, b, "div")?;
        let t = self.zip_map(a, b, |x, y| x / y.max(LOG_FLOOR));
        Ok(self.push(t, Op::Div { a, b }))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.map_value(a, |x| x * c);
        self.push(t, Op::Scale { a, c })
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let t = self.map_value(a, |x| x + c);
        self.push(t, Op::AddScalar { a })
    }

    fn map_value(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let out = self.data(a).iter().map(|&x| f(x)).collect();
        Tensor::new(self.shape(a).to_vec(), out).expect("shape preserved")
    }

    /// Elementwise `f`, where `f(x)` returns `(value, derivative)`.
    pub fn elementwise(&mut self, a: Var, f: impl Fn(f64) -> (f64, f64)) -> Var {
        let src = self.data(a);
        let mut val = Vec::with_capacity(src.len());
        let mut deriv = Vec::with_capacity(src.len());
        for &x in src {
            let (v, d) = f(x);
            val.push(v);
            deriv.push(d);
        }
        let t = Tensor::new(self.shape(a).to_vec(), val).expect("shape preserved");
        self.push(t, Op::Unary { a, deriv })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.elementwise(a, |x| {
            let t = x.tanh();
            (t, 1.0 - t * t)
        })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.elementwise(a, |x| {
            let s = sigmoid(x);
            (s, s * (1.0 - s))
        })
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.elementwise(a, |x| {
            let e = x.exp();
            (e, e)
        })
    }

    /// `ln(max(x, 1e-12))`.
    pub fn log(&mut self, a: Var) -> Var {
        self.elementwise(a, |x| if x > LOG_FLOOR { (x.ln(), 1.0 / x) } else { (LOG_FLOOR.ln(), 0.0) })
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.elementwise(a, |x| (softplus(x), sigmoid(x)))
    }

    /// Concatenates 1-D tensors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, ComputeError> {
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(shape_err(format!("concat expects 1-D parts, got {:?}", self.shape(p))));
            }
            out.extend_from_slice(self.data(p));
        }
        Ok(self.push(Tensor::vector(out), Op::Concat { parts: parts.to_vec() }))
    }

    /// `a[start..start + len]` of a 1-D tensor.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var, ComputeError> {
        match self.shape(a) {
            [n] if start + len <= *n => {
                let t = Tensor::vector(self.data(a)[start..start + len].to_vec());
                Ok(self.push(t, Op::Slice { a, start }))
            }
            s => Err(shape_err(format!("slice {start}..{} of {s:?}", start + len))),
        }
    }

    /// Sum of all elements, left to right.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.data(a).iter().fold(0.0, |acc, &x| acc + x);
        self.push(Tensor::scalar(s), Op::Sum { a })
    }

    pub fn log_sum_exp(&mut self, a: Var) -> Var {
        let v = log_sum_exp(self.data(a));
        self.push(Tensor::scalar(v), Op::LogSumExp { a })
    }

    /// Sum of rows `rows` of the matrix `w`; equals `x @ w` for a 0/1 row vector `x`.
    pub fn gather_rows(&mut self, w: Var, rows: &[usize]) -> Result<Var, ComputeError> {
        let (r, c) = match self.shape(w) {
            [r, c] => (*r, *c),
            s => return Err(shape_err(format!("gather_rows needs a matrix, got {s:?}"))),
        };
        if let Some(&bad) = rows.iter().find(|&&i| i >= r) {
            return Err(shape_err(format!("row {bad} out of range {r}")));
        }
        let wd = self.data(w);
        let mut out = vec![0.0; c];
        for &i in rows {
            for (o, &x) in out.iter_mut().zip(&wd[i * c..(i + 1) * c]) {
                *o += x;
            }
        }
        Ok(self.push(Tensor::vector(out), Op::GatherRows { w, rows: rows.to_vec(), cols: c }))
    }

    /// `sum_d x_d ln θ_d + (1 - x_d) ln(1 - θ_d)` with `θ = clamp(sigmoid(logits), 1e-6, 1 - 1e-6)`
    /// and `x` the indicator of `active`.
    pub fn bernoulli_log_likelihood(&mut self, logits: Var, active: &[usize]) -> Result<Var, ComputeError> {
        let d = match self.shape(logits) {
            [d] => *d,
            s => return Err(shape_err(format!("bernoulli logits must be 1-D, got {s:?}"))),
        };
        if let Some(&bad) = active.iter().find(|&&i| i >= d) {
            return Err(shape_err(format!("active index {bad} out of range {d}")));
        }
        let lg = self.data(logits);
        let mut is_on = vec![false; d];
        for &i in active {
            is_on[i] = true;
        }
        let (lo, hi) = (PROB_CLAMP, 1.0 - PROB_CLAMP);
        let mut total = 0.0;
        let mut deriv = vec![0.0; d];
        for i in 0..d {
            let a = lg[i];
            let theta = sigmoid(a);
            let on = is_on[i];
            if theta < lo || theta > hi {
                let t = theta.clamp(lo, hi);
                total += if on { t.ln() } else { (1.0 - t).ln() };
            } else {
                // ln σ(a) = -softplus(-a), ln(1 - σ(a)) = -softplus(a)
                total += if on { -softplus(-a) } else { -softplus(a) };
                deriv[i] = if on { 1.0 - theta } else { -theta };
            }
        }
        Ok(self.push(Tensor::scalar(total), Op::BernoulliLogLik { logits, deriv }))
    }

    /// Reverse sweep from a scalar `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients, ComputeError> {
        if output.0 >= self.nodes.len() {
            return Err(ComputeError::Grad(format!("unknown node {}", output.0)));
        }
        if self.nodes[output.0].value.len() != 1 {
            return Err(ComputeError::Grad(format!(
                "output must be scalar, got shape {:?}",
                self.nodes[output.0].value.shape()
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        adj[output.0] = Some(vec![1.0]);
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];

        for i in (0..=output.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    if node.trainable {
                        grads[i] = Some(Tensor::new(node.value.shape().to_vec(), g)?);
                    }
                }
                Op::MatMul { a, b, m, k, n } => {
                    let (m, k, n) = (*m, *k, *n);
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    self.accumulate(&mut adj, *a, |da| {
                        for i in 0..m {
                            let gi = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let brow = &bd[p * n..(p + 1) * n];
                                da[i * k + p] += dot(gi, brow);
                            }
                        }
                    });
                    self.accumulate(&mut adj, *b, |db| {
                        for i in 0..m {
                            let gi = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let x = ad[i * k + p];
                                if x == 0.0 {
                                    continue;
                                }
                                for (d, &gv) in db[p * n..(p + 1) * n].iter_mut().zip(gi) {
                                    *d += x * gv;
                                }
                            }
                        }
                    });
                }
                Op::Add { a, b } => {
                    self.accumulate(&mut adj, *a, |da| axpy(da, 1.0, &g));
                    let nb = self.nodes[b.0].value.len();
                    self.accumulate(&mut adj, *b, |db| {
                        for (j, &gv) in g.iter().enumerate() {
                            db[j % nb] += gv;
                        }
                    });
                }
                Op::Sub { a, b } => {
                    self.accumulate(&mut adj, *a, |da| axpy(da, 1.0, &g));
                    self.accumulate(&mut adj, *b, |db| axpy(db, -1.0, &g));
                }
                Op::Mul { a, b } => {
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    self.accumulate(&mut adj, *a, |da| {
                        for j in 0..g.len() {
                            da[j] += g[j] * bd[j];
                        }
                    });
                    self.accumulate(&mut adj, *b, |db| {
                        for j in 0..g.len() {
                            db[j] += g[j] * ad[j];
                        }
                    });
                }
                Op::Div { a, b } => {
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    self.accumulate(&mut adj, *a, |da| {
                        for j in 0..g.len() {
                            da[j] += g[j] / bd[j].max(LOG_FLOOR);
                        }
                    });
                    self.accumulate(&mut adj, *b, |db| {
                        for j in 0..g.len() {
                            if bd[j] > LOG_FLOOR {
                                db[j] -= g[j] * ad[j] / (bd[j] * bd[j]);
                            }
                        }
                    });
                }
                Op::Scale { a, c } => self.accumulate(&mut adj, *a, |da| axpy(da, *c, &g)),
                Op::AddScalar { a } => self.accumulate(&mut adj, *a, |da| axpy(da, 1.0, &g)),
                Op::Unary { a, deriv } => self.accumulate(&mut adj, *a, |da| {
                    for j in 0..g.len() {
                        da[j] += g[j] * deriv[j];
                    }
                }),
                Op::Concat { parts } => {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.nodes[p.0].value.len();
                        self.accumulate(&mut adj, p, |dp| axpy(dp, 1.0, &g[off..off + len]));
                        off += len;
                    }
                }
                Op::Slice { a, start } => {
                    self.accumulate(&mut adj, *a, |da| axpy(&mut da[*start..*start + g.len()], 1.0, &g))
                }
                Op::Sum { a } => self.accumulate(&mut adj, *a, |da| da.iter_mut().for_each(|d| *d += g[0])),
                Op::LogSumExp { a } => {
                    let lse = node.value.data()[0];
                    let ad = self.data(*a);
                    self.accumulate(&mut adj, *a, |da| {
                        for j in 0..da.len() {
                            da[j] += g[0] * (ad[j] - lse).exp();
                        }
                    });
                }
                Op::GatherRows { w, rows, cols } => self.accumulate(&mut adj, *w, |dw| {
                    for &r in rows {
                        axpy(&mut dw[r * cols..(r + 1) * cols], 1.0, &g);
                    }
                }),
                Op::BernoulliLogLik { logits, deriv } => {
                    self.accumulate(&mut adj, *logits, |dl| axpy(dl, g[0], deriv))
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, adj: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        let slot = adj[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
        f(slot);
    }
}

/// Gradients of a scalar output with respect to trainable leaves.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when `v` is not a trainable leaf or does not influence the output.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient for each of `vars`, zero-filled where the output does not depend on it.
    pub fn collect(mut self, tape: &Tape, vars: &[Var]) -> Vec<Tensor> {
        vars.iter()
            .map(|v| self.grads[v.0].take().unwrap_or_else(|| Tensor::zeros(tape.value(*v).shape())))
            .collect()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_of_zero() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::scalar(0.0));
        let y = t.sigmoid(x);
        assert_eq!(t.value(y).item(), Some(0.5));
    }

    #[test]
    fn log_sum_exp_does_not_overflow() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![1000.0, 1000.0]));
        let y = t.log_sum_exp(x);
        assert!((t.value(y).item().unwrap() - (1000.0 + 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn matmul_shape_rule() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[3, 4]));
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.value(c).shape(), &[2, 4]);
        assert!(matches!(t.matmul(b, a), Err(ComputeError::Shape(_))));
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(3.0));
        let y = t.mul(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item(), Some(6.0));
    }

    #[test]
    fn constant_output_has_zero_gradient() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(3.0));
        let c = t.constant(Tensor::scalar(2.0));
        let y = t.exp(c);
        let grads = t.backward(y).unwrap().collect(&t, &[x]);
        assert_eq!(grads[0].item(), Some(0.0));
    }

    #[test]
    fn non_scalar_output_rejected() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0, 2.0]));
        let y = t.tanh(x);
        assert!(matches!(t.backward(y), Err(ComputeError::Grad(_))));
    }

    #[test]
    fn guarded_log_and_div() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![0.0, -1.0]));
        let y = t.log(x);
        assert!(t.value(y).is_finite());
        let one = t.constant(Tensor::vector(vec![1.0, 1.0]));
        let q = t.div(one, x).unwrap();
        assert!(t.value(q).is_finite());
        let s = t.sum(q);
        let g = t.backward(s).unwrap();
        assert!(g.get(x).unwrap().is_finite());
    }

    #[test]
    fn gather_rows_matches_dense_product() {
        let mut t = Tape::new();
        let w = t.param(Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let g = t.gather_rows(w, &[0, 2]).unwrap();
        let x = t.constant(Tensor::vector(vec![1.0, 0.0, 1.0]));
        let d = t.matmul(x, w).unwrap();
        assert_eq!(t.value(g), t.value(d));
    }

    #[test]
    fn bernoulli_at_half_probability() {
        let mut t = Tape::new();
        let logits = t.param(Tensor::vector(vec![0.0; 602]));
        let ll = t.bernoulli_log_likelihood(logits, &[0, 300, 510, 600]).unwrap();
        let v = t.value(ll).item().unwrap();
        assert!((v - 602.0 * 0.5f64.ln()).abs() < 1e-9);
        assert!((v + 417.27).abs() < 0.01);
    }

    #[test]
    fn bernoulli_saturation_is_clamped() {
        let mut t = Tape::new();
        let logits = t.param(Tensor::vector(vec![-100.0, 100.0]));
        let ll = t.bernoulli_log_likelihood(logits, &[0]).unwrap();
        let v = t.value(ll).item().unwrap();
        assert!((v - 2.0 * PROB_CLAMP.ln()).abs() < 1e-9);
        let g = t.backward(ll).unwrap();
        assert_eq!(g.get(logits).unwrap().data(), &[0.0, 0.0]);
    }
}
