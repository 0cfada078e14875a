use super::{matmul, matmul_t, t_matmul, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    /// x · Wᵀ
    Linear(Var, Var),
    Add(Var, Var),
    /// a plus a `1 × n` row broadcast over every row
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// mul · a + constant
    Affine(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    /// output row r = sum of source rows in group r
    Gather(Var, Vec<Vec<usize>>),
    SumRows(Var),
    MeanRows(Var),
    SumAll(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Softmax(Var),
    LogSumExp(Var, Option<Vec<bool>>),
    Element(Var, usize),
    BceLogits(Var, f64),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    /// None for parameters, which are read from the store.
    value: Option<Tensor>,
}

/// One forward pass worth of recorded operations.
pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
}

/// Result of [`Tape::backward`]: gradients of the loss for every parameter
/// and every recorded node that the loss depends on.
#[derive(Debug, Clone)]
pub struct Gradients {
    params: Vec<Option<Tensor>>,
    nodes: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn params(&self) -> &[Option<Tensor>] {
        &self.params
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params[id.0].as_ref()
    }

    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].as_ref()
    }
}

fn mismatch(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::ShapeMismatch {
        op,
        detail: format!("{}x{} vs {}x{}", a.0, a.1, b.0, b.1),
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor {
        rows: t.rows,
        cols: t.cols,
        data: t.data.iter().map(|&x| f(x)).collect(),
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Tape<'s> {
        Tape {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.value(*id),
            _ => unreachable!("only parameters are stored by reference"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data[0]
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Input, t)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.input(Tensor::zeros(rows, cols))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Parameter by name; panics when absent.
    pub fn p(&mut self, name: &str) -> Var {
        let id = self
            .store
            .id(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        self.param(id)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols != tb.rows {
            return Err(mismatch("matmul", ta.shape(), tb.shape()));
        }
        let out = matmul(ta, tb);
        Ok(self.push(Op::MatMul(a, b), out))
    }

    /// `x · Wᵀ` for a weight stored `out × in`.
    pub fn linear(&mut self, x: Var, w: Var) -> Result<Var> {
        let (tx, tw) = (self.value(x), self.value(w));
        if tx.cols != tw.cols {
            return Err(mismatch("linear", tx.shape(), tw.shape()));
        }
        let out = matmul_t(tx, tw);
        Ok(self.push(Op::Linear(x, w), out))
    }

    /// `x · Wᵀ + b` with `b` a `1 × out` row.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.linear(x, w)?;
        self.add_row(y, b)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = zip(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(Op::Add(a, b), out))
    }

    /// Sum of equally shaped values; `None` for an empty list.
    pub fn add_all(&mut self, vs: &[Var]) -> Result<Option<Var>> {
        let mut it = vs.iter();
        let Some(&first) = it.next() else {
            return Ok(None);
        };
        let mut acc = first;
        for &v in it {
            acc = self.add(acc, v)?;
        }
        Ok(Some(acc))
    }

    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if tb.rows != 1 || tb.cols != ta.cols {
            return Err(mismatch("add_row", ta.shape(), tb.shape()));
        }
        let mut out = ta.clone();
        for r in 0..out.rows {
            for (x, y) in out.data[r * out.cols..(r + 1) * out.cols]
                .iter_mut()
                .zip(&tb.data)
            {
                *x += y;
            }
        }
        Ok(self.push(Op::AddRow(a, b), out))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = zip(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), out))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = zip(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), out))
    }

    /// `mul · a + add`, elementwise.
    pub fn affine_scalar(&mut self, a: Var, mul: f64, add: f64) -> Var {
        let out = map(self.value(a), |x| mul * x + add);
        self.push(Op::Affine(a, mul), out)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.affine_scalar(a, s, 0.0)
    }

    /// `1 − a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        self.affine_scalar(a, -1.0, 1.0)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = map(self.value(a), |x| x.max(0.0));
        self.push(Op::Relu(a), out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = map(self.value(a), sigmoid);
        self.push(Op::Sigmoid(a), out)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = map(self.value(a), f64::tanh);
        self.push(Op::Tanh(a), out)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = map(self.value(a), f64::exp);
        self.push(Op::Exp(a), out)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = map(self.value(a), |x| x * x);
        self.push(Op::Square(a), out)
    }

    /// Clamps into `[lo, hi]`; gradient is zero outside.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let out = map(self.value(a), |x| x.clamp(lo, hi));
        self.push(Op::Clamp(a, lo, hi), out)
    }

    /// Row r of the output is the sum of the source rows listed in
    /// `groups[r]` (a zero row for an empty group).
    pub fn gather_sum(&mut self, src: Var, groups: Vec<Vec<usize>>) -> Result<Var> {
        let t = self.value(src);
        let c = t.cols;
        let mut out = Tensor::zeros(groups.len(), c);
        for (r, g) in groups.iter().enumerate() {
            for &i in g {
                if i >= t.rows {
                    return Err(Error::ShapeMismatch {
                        op: "gather_sum",
                        detail: format!("row {i} of {}", t.rows),
                    });
                }
                for (o, x) in out.data[r * c..(r + 1) * c].iter_mut().zip(t.row_slice(i)) {
                    *o += x;
                }
            }
        }
        Ok(self.push(Op::Gather(src, groups), out))
    }

    /// Selects rows by index (embedding lookup).
    pub fn gather_rows(&mut self, src: Var, idx: &[usize]) -> Result<Var> {
        self.gather_sum(src, idx.iter().map(|&i| vec![i]).collect())
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let mut out = Tensor::zeros(1, t.cols);
        for r in 0..t.rows {
            for (o, x) in out.data.iter_mut().zip(t.row_slice(r)) {
                *o += x;
            }
        }
        self.push(Op::SumRows(a), out)
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = t.rows.max(1) as f64;
        let mut out = Tensor::zeros(1, t.cols);
        for r in 0..t.rows {
            for (o, x) in out.data.iter_mut().zip(t.row_slice(r)) {
                *o += x / n;
            }
        }
        self.push(Op::MeanRows(a), out)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Op::SumAll(a), Tensor::scalar(s))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let m = self.mul(a, b)?;
        Ok(self.sum_all(m))
    }

    pub fn concat_rows(&mut self, vs: &[Var]) -> Result<Var> {
        let cols = vs.first().map_or(0, |&v| self.shape(v).1);
        let mut data = Vec::new();
        let mut rows = 0;
        for &v in vs {
            let t = self.value(v);
            if t.cols != cols {
                return Err(mismatch("concat_rows", (rows, cols), t.shape()));
            }
            rows += t.rows;
            data.extend_from_slice(&t.data);
        }
        Ok(self.push(Op::ConcatRows(vs.to_vec()), Tensor { rows, cols, data }))
    }

    pub fn concat_cols(&mut self, vs: &[Var]) -> Result<Var> {
        let rows = vs.first().map_or(0, |&v| self.shape(v).0);
        let mut cols = 0;
        for &v in vs {
            let t = self.value(v);
            if t.rows != rows {
                return Err(mismatch("concat_cols", (rows, cols), t.shape()));
            }
            cols += t.cols;
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &v in vs {
            let t = self.value(v);
            for r in 0..rows {
                out.data[r * cols + offset..r * cols + offset + t.cols]
                    .copy_from_slice(t.row_slice(r));
            }
            offset += t.cols;
        }
        Ok(self.push(Op::ConcatCols(vs.to_vec()), out))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let mut out = t.clone();
        for r in 0..t.rows {
            let row = &mut out.data[r * t.cols..(r + 1) * t.cols];
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for x in row.iter_mut() {
                *x = (*x - m).exp();
                s += *x;
            }
            row.iter_mut().for_each(|x| *x /= s);
        }
        self.push(Op::Softmax(a), out)
    }

    /// log Σ exp over all entries, restricted to `mask` when given.
    pub fn logsumexp(&mut self, a: Var, mask: Option<Vec<bool>>) -> Result<Var> {
        let t = self.value(a);
        if let Some(m) = &mask {
            if m.len() != t.len() {
                return Err(Error::ShapeMismatch {
                    op: "logsumexp",
                    detail: format!("mask of {} for {} values", m.len(), t.len()),
                });
            }
        }
        let keep = |i: usize| mask.as_ref().is_none_or(|m| m[i]);
        let mx = (0..t.len())
            .filter(|&i| keep(i))
            .map(|i| t.data[i])
            .fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            return Err(Error::ShapeMismatch {
                op: "logsumexp",
                detail: "no entries selected".into(),
            });
        }
        let s: f64 = (0..t.len())
            .filter(|&i| keep(i))
            .map(|i| (t.data[i] - mx).exp())
            .sum();
        Ok(self.push(Op::LogSumExp(a, mask), Tensor::scalar(mx + s.ln())))
    }

    /// Single entry (flat row-major index) as a `1 × 1` value.
    pub fn element(&mut self, a: Var, idx: usize) -> Result<Var> {
        let t = self.value(a);
        if idx >= t.len() {
            return Err(Error::ShapeMismatch {
                op: "element",
                detail: format!("index {idx} of {}", t.len()),
            });
        }
        let x = t.data[idx];
        Ok(self.push(Op::Element(a, idx), Tensor::scalar(x)))
    }

    /// Elementwise binary cross-entropy of logits against a fixed target.
    pub fn bce_with_logits(&mut self, logits: Var, target: f64) -> Var {
        let out = map(self.value(logits), |x| {
            x.max(0.0) - x * target + (-x.abs()).exp().ln_1p()
        });
        self.push(Op::BceLogits(logits, target), out)
    }

    /// `−log softmax(logits)[target]` over the entries allowed by `mask`.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        target: usize,
        mask: Option<Vec<bool>>,
    ) -> Result<Var> {
        let lse = self.logsumexp(logits, mask)?;
        let picked = self.element(logits, target)?;
        self.sub(lse, picked)
    }

    /// Reverse pass from a `1 × 1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::NotScalar(vec![shape.0, shape.1]));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let mut pgrads: Vec<Option<Tensor>> = vec![None; self.store.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, shape: (usize, usize)) -> &mut Tensor {
            grads[v.0].get_or_insert_with(|| Tensor::zeros(shape.0, shape.1))
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            let y = self.value(Var(i));
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(id) => match &mut pgrads[id.0] {
                    Some(p) => p.add_assign(&g),
                    slot => *slot = Some(g.clone()),
                },
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, ta.shape()).add_assign(&matmul_t(&g, tb));
                    acc(&mut grads, *b, tb.shape()).add_assign(&t_matmul(ta, &g));
                }
                Op::Linear(x, w) => {
                    let (tx, tw) = (self.value(*x), self.value(*w));
                    acc(&mut grads, *x, tx.shape()).add_assign(&matmul(&g, tw));
                    acc(&mut grads, *w, tw.shape()).add_assign(&t_matmul(&g, tx));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.shape()).add_assign(&g);
                    acc(&mut grads, *b, g.shape()).add_assign(&g);
                }
                Op::AddRow(a, b) => {
                    acc(&mut grads, *a, g.shape()).add_assign(&g);
                    let gb = acc(&mut grads, *b, (1, g.cols));
                    for r in 0..g.rows {
                        for (o, x) in gb.data.iter_mut().zip(g.row_slice(r)) {
                            *o += x;
                        }
                    }
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.shape()).add_assign(&g);
                    acc(&mut grads, *b, g.shape()).add_assign(&map(&g, |x| -x));
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, g.shape()).add_assign(&zip(&g, tb, |x, y| x * y));
                    acc(&mut grads, *b, g.shape()).add_assign(&zip(&g, ta, |x, y| x * y));
                }
                Op::Affine(a, m) => {
                    acc(&mut grads, *a, g.shape()).add_assign(&map(&g, |x| x * m));
                }
                Op::Relu(a) => {
                    let d = zip(&g, y, |x, o| if o > 0.0 { x } else { 0.0 });
                    acc(&mut grads, *a, g.shape()).add_assign(&d);
                }
                Op::Sigmoid(a) => {
                    let d = zip(&g, y, |x, o| x * o * (1.0 - o));
                    acc(&mut grads, *a, g.shape()).add_assign(&d);
                }
                Op::Tanh(a) => {
                    let d = zip(&g, y, |x, o| x * (1.0 - o * o));
                    acc(&mut grads, *a, g.shape()).add_assign(&d);
                }
                Op::Exp(a) => {
                    let d = zip(&g, y, |x, o| x * o);
                    acc(&mut grads, *a, g.shape()).add_assign(&d);
                }
                Op::Square(a) => {
                    let d = zip(&g, self.value(*a), |x, v| 2.0 * x * v);
                    acc(&mut grads, *a, g.shape()).add_assign(&d);
                }
                Op::Clamp(a, lo, hi) => {
                    let d = zip(&g, self.value(*a), |x, v| {
                        if v >= *lo && v <= *hi {
                            x
                        } else {
                            0.0
                        }
                    });
                    acc(&mut grads, *a, g.shape()).add_assign(&d);
                }
                Op::Gather(src, groups) => {
                    let ts = self.value(*src);
                    let c = ts.cols;
                    let gs = acc(&mut grads, *src, ts.shape());
                    for (r, grp) in groups.iter().enumerate() {
                        for &k in grp {
                            for (o, x) in gs.data[k * c..(k + 1) * c].iter_mut().zip(g.row_slice(r))
                            {
                                *o += x;
                            }
                        }
                    }
                }
                Op::SumRows(a) | Op::MeanRows(a) => {
                    let ta = self.value(*a);
                    let f = if matches!(self.nodes[i].op, Op::MeanRows(_)) {
                        1.0 / ta.rows.max(1) as f64
                    } else {
                        1.0
                    };
                    let ga = acc(&mut grads, *a, ta.shape());
                    for r in 0..ta.rows {
                        for (o, x) in ga.data[r * ta.cols..(r + 1) * ta.cols]
                            .iter_mut()
                            .zip(&g.data)
                        {
                            *o += f * x;
                        }
                    }
                }
                Op::SumAll(a) => {
                    let ga = acc(&mut grads, *a, self.shape(*a));
                    ga.data.iter_mut().for_each(|o| *o += g.data[0]);
                }
                Op::ConcatRows(vs) => {
                    let mut offset = 0;
                    for v in vs {
                        let s = self.shape(*v);
                        let part = &g.data[offset..offset + s.0 * s.1];
                        let gv = acc(&mut grads, *v, s);
                        for (o, x) in gv.data.iter_mut().zip(part) {
                            *o += x;
                        }
                        offset += s.0 * s.1;
                    }
                }
                Op::ConcatCols(vs) => {
                    let mut offset = 0;
                    for v in vs {
                        let s = self.shape(*v);
                        let gv = acc(&mut grads, *v, s);
                        for r in 0..s.0 {
                            let src = &g.data[r * g.cols + offset..r * g.cols + offset + s.1];
                            for (o, x) in gv.data[r * s.1..(r + 1) * s.1].iter_mut().zip(src) {
                                *o += x;
                            }
                        }
                        offset += s.1;
                    }
                }
                Op::Softmax(a) => {
                    let mut d = Tensor::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let yr = y.row_slice(r);
                        let gr = g.row_slice(r);
                        let s: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for c in 0..y.cols {
                            d.data[r * y.cols + c] = yr[c] * (gr[c] - s);
                        }
                    }
                    acc(&mut grads, *a, y.shape()).add_assign(&d);
                }
                Op::LogSumExp(a, mask) => {
                    let ta = self.value(*a);
                    let lse = y.data[0];
                    let ga = acc(&mut grads, *a, ta.shape());
                    for (k, o) in ga.data.iter_mut().enumerate() {
                        if mask.as_ref().is_none_or(|m| m[k]) {
                            *o += g.data[0] * (ta.data[k] - lse).exp();
                        }
                    }
                }
                Op::Element(a, idx) => {
                    let ga = acc(&mut grads, *a, self.shape(*a));
                    ga.data[*idx] += g.data[0];
                }
                Op::BceLogits(a, target) => {
                    let d = zip(&g, self.value(*a), |x, v| x * (sigmoid(v) - target));
                    acc(&mut grads, *a, g.shape()).add_assign(&d);
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            params: pgrads,
            nodes: grads,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn elementary_values() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let z = t.input(Tensor::scalar(0.0));
        let s = t.sigmoid(z);
        assert!(close(t.scalar(s), 0.5));
        let m = t.input(Tensor::scalar(-3.0));
        let r = t.relu(m);
        assert_eq!(t.scalar(r), 0.0);
        let a = t.input(Tensor::row(vec![2.0, 2.0, 2.0]));
        let s = t.softmax(a);
        assert!(t.value(s).data.iter().all(|&x| close(x, 1.0 / 3.0)));
    }

    #[test]
    fn linear_sum_gradient_is_broadcast_input() {
        let mut store = ParamStore::new();
        let w = store.add(
            "W",
            Tensor::from_vec(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap(),
        );
        let mut t = Tape::new(&store);
        let x = t.input(Tensor::row(vec![0.5, -1.0, 2.0]));
        let wv = t.param(w);
        let y = t.linear(x, wv).unwrap();
        let loss = t.sum_all(y);
        let g = t.backward(loss).unwrap();
        assert_eq!(
            g.param(w).unwrap().data,
            vec![0.5, -1.0, 2.0, 0.5, -1.0, 2.0]
        );
    }

    #[test]
    fn accumulation_doubles() {
        let mut store = ParamStore::new();
        let w = store.add("W", Tensor::row(vec![1.0, -2.0]));
        let grads = {
            let mut t = Tape::new(&store);
            let wv = t.param(w);
            let sq = t.square(wv);
            let loss = t.sum_all(sq);
            t.backward(loss).unwrap()
        };
        store.accumulate(&grads);
        let once = store.get(w).grad.clone();
        store.accumulate(&grads);
        let twice = &store.get(w).grad;
        assert!(once
            .data
            .iter()
            .zip(&twice.data)
            .all(|(a, b)| close(2.0 * a, *b)));
    }

    #[test]
    fn backward_requires_scalar() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let x = t.input(Tensor::row(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(Error::NotScalar(_))));
    }

    #[test]
    fn shape_mismatch_reported() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let a = t.input(Tensor::row(vec![1.0, 2.0]));
        let b = t.input(Tensor::row(vec![1.0, 2.0, 3.0]));
        assert!(matches!(t.add(a, b), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(t.matmul(a, b), Err(Error::ShapeMismatch { .. })));
    }
}
