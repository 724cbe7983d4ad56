//! Reverse-mode tape over dense tensors.
//!
//! Nodes are appended in evaluation order, so every parent index is smaller
//! than its child. `backward` walks the list once from the root down.
//! Constants (and everything computed only from constants) are marked as not
//! requiring gradients and are skipped during the reverse sweep.

use super::tensor::{gemm_into, Tensor};

/// Handle to a node on a [`Tape`].
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
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Max(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    ScaleBy(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Sin(Var),
    Cos(Var),
    Exp(Var),
    Abs(Var),
    Relu(Var),
    Sqrt(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    RepeatRows(Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Reshape(Var),
}

struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only computation record.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Adjoint of `v`, or `None` when the root does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Differentiable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, false)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(&[a, b]);
        self.push(Op::Add(a, b), v, rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(&[a, b]);
        self.push(Op::Sub(a, b), v, rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(&[a, b]);
        self.push(Op::Mul(a, b), v, rg)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x / y);
        let rg = self.rg(&[a, b]);
        self.push(Op::Div(a, b), v, rg)
    }

    /// Elementwise maximum; ties go to `a`.
    pub fn max(&mut self, a: Var, b: Var) -> Var {
        let v = self
            .value(a)
            .zip_map(self.value(b), |x, y| if x >= y { x } else { y });
        let rg = self.rg(&[a, b]);
        self.push(Op::Max(a, b), v, rg)
    }

    /// `a (n×m) + row (1×m)` broadcast over rows.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (av, rv) = (self.value(a), self.value(row));
        assert_eq!(rv.rows(), 1, "add_row expects a row vector");
        assert_eq!(av.cols(), rv.cols(), "add_row width mismatch");
        let mut v = av.clone();
        let r = rv.data().to_vec();
        for i in 0..v.rows() {
            for (x, y) in v.row_mut(i).iter_mut().zip(&r) {
                *x += y;
            }
        }
        let rg = self.rg(&[a, row]);
        self.push(Op::AddRow(a, row), v, rg)
    }

    /// `a (n×m) ⊙ col (n×1)` broadcast over columns.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (av, cv) = (self.value(a), self.value(col));
        assert_eq!(cv.cols(), 1, "mul_col expects a column vector");
        assert_eq!(av.rows(), cv.rows(), "mul_col height mismatch");
        let mut v = av.clone();
        let c = cv.data().to_vec();
        for (i, ci) in c.iter().enumerate() {
            for x in v.row_mut(i) {
                *x *= ci;
            }
        }
        let rg = self.rg(&[a, col]);
        self.push(Op::MulCol(a, col), v, rg)
    }

    /// `a · s` for a 1×1 node `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Var {
        let sv = self.value(s).item();
        let v = self.value(a).map(|x| x * sv);
        let rg = self.rg(&[a, s]);
        self.push(Op::ScaleBy(a, s), v, rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x * c);
        let rg = self.rg(&[a]);
        self.push(Op::Scale(a, c), v, rg)
    }

    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        let rg = self.rg(&[a]);
        self.push(Op::Offset(a), v, rg)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    /// `op(a) · op(b)` with optional transposes.
    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Var {
        let v = self.value(a).matmul(ta, self.value(b), tb);
        let rg = self.rg(&[a, b]);
        self.push(Op::MatMul { a, b, ta, tb }, v, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, false, b, false)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::sin);
        let rg = self.rg(&[a]);
        self.push(Op::Sin(a), v, rg)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::cos);
        let rg = self.rg(&[a]);
        self.push(Op::Cos(a), v, rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        let rg = self.rg(&[a]);
        self.push(Op::Exp(a), v, rg)
    }

    /// Subgradient at 0 is 0.
    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::abs);
        let rg = self.rg(&[a]);
        self.push(Op::Abs(a), v, rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(&[a]);
        self.push(Op::Relu(a), v, rg)
    }

    /// Derivative at 0 is taken as 0.
    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::sqrt);
        let rg = self.rg(&[a]);
        self.push(Op::Sqrt(a), v, rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        let rg = self.rg(&[a]);
        self.push(Op::Square(a), v, rg)
    }

    /// Sum of all entries, as a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(Op::Sum(a), v, rg)
    }

    /// Mean of all entries, as a 1×1 node. An empty input yields 0.
    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let m = if t.is_empty() { 0.0 } else { t.sum() / t.len() as f64 };
        let rg = self.rg(&[a]);
        self.push(Op::Mean(a), Tensor::scalar(m), rg)
    }

    /// Per-row sums, n×1.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let data = (0..t.rows()).map(|r| t.row(r).iter().sum()).collect();
        let v = Tensor::from_vec(t.rows(), 1, data);
        let rg = self.rg(&[a]);
        self.push(Op::RowSum(a), v, rg)
    }

    /// Row-wise inner product of two n×m nodes, n×1.
    pub fn dot_rows(&mut self, a: Var, b: Var) -> Var {
        let p = self.mul(a, b);
        self.row_sum(p)
    }

    /// Row-wise Euclidean norm, n×1.
    pub fn norm_rows(&mut self, a: Var) -> Var {
        let sq = self.square(a);
        let s = self.row_sum(sq);
        self.sqrt(s)
    }

    /// Stack `n` copies of a 1×m row.
    pub fn repeat_rows(&mut self, a: Var, n: usize) -> Var {
        let t = self.value(a);
        assert_eq!(t.rows(), 1, "repeat_rows expects a row vector");
        let mut data = Vec::with_capacity(n * t.cols());
        for _ in 0..n {
            data.extend_from_slice(t.data());
        }
        let v = Tensor::from_vec(n, t.cols(), data);
        let rg = self.rg(&[a]);
        self.push(Op::RepeatRows(a), v, rg)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice_rows(start, len);
        let rg = self.rg(&[a]);
        self.push(Op::SliceRows(a, start), v, rg)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice_cols(start, len);
        let rg = self.rg(&[a]);
        self.push(Op::SliceCols(a, start), v, rg)
    }

    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let v = self.value(a).gather_rows(&idx);
        let rg = self.rg(&[a]);
        self.push(Op::GatherRows(a, idx), v, rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let ts: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Tensor::concat_cols(&ts);
        let rg = self.rg(parts);
        self.push(Op::ConcatCols(parts.to_vec()), v, rg)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let ts: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Tensor::concat_rows(&ts);
        let rg = self.rg(parts);
        self.push(Op::ConcatRows(parts.to_vec()), v, rg)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let v = self.value(a).reshape(rows, cols);
        let rg = self.rg(&[a]);
        self.push(Op::Reshape(a), v, rg)
    }

    /// Reverse sweep from a 1×1 root.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.value(root).len(), 1, "backward root must be scalar");
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(root.0 + 1);
        grads.resize_with(root.0 + 1, || None);
        grads[root.0] = Some(Tensor::scalar(1.0));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, t: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&t),
            slot @ None => *slot = Some(t),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                if self.wants(*b) {
                    self.accumulate(grads, *b, g.map(|x| -x));
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    self.accumulate(grads, *a, g.zip_map(self.value(*b), |x, y| x * y));
                }
                if self.wants(*b) {
                    self.accumulate(grads, *b, g.zip_map(self.value(*a), |x, y| x * y));
                }
            }
            Op::Div(a, b) => {
                let bv = self.value(*b);
                if self.wants(*a) {
                    self.accumulate(grads, *a, g.zip_map(bv, |x, y| x / y));
                }
                if self.wants(*b) {
                    // d(a/b)/db = -(a/b)/b
                    let t = g.zip_map(out, |x, q| x * q).zip_map(bv, |x, y| -x / y);
                    self.accumulate(grads, *b, t);
                }
            }
            Op::Max(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let mut t = g.clone();
                    for ((x, &p), &q) in t.data_mut().iter_mut().zip(av.data()).zip(bv.data()) {
                        if p < q {
                            *x = 0.0;
                        }
                    }
                    self.accumulate(grads, *a, t);
                }
                if self.wants(*b) {
                    let mut t = g.clone();
                    for ((x, &p), &q) in t.data_mut().iter_mut().zip(av.data()).zip(bv.data()) {
                        if p >= q {
                            *x = 0.0;
                        }
                    }
                    self.accumulate(grads, *b, t);
                }
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, g.clone());
                if self.wants(*row) {
                    let mut s = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (acc, x) in s.data_mut().iter_mut().zip(g.row(r)) {
                            *acc += x;
                        }
                    }
                    self.accumulate(grads, *row, s);
                }
            }
            Op::MulCol(a, col) => {
                let cv = self.value(*col);
                if self.wants(*a) {
                    let mut t = g.clone();
                    for r in 0..t.rows() {
                        let c = cv.data()[r];
                        for x in t.row_mut(r) {
                            *x *= c;
                        }
                    }
                    self.accumulate(grads, *a, t);
                }
                if self.wants(*col) {
                    let av = self.value(*a);
                    let data = (0..g.rows())
                        .map(|r| g.row(r).iter().zip(av.row(r)).map(|(x, y)| x * y).sum())
                        .collect();
                    self.accumulate(grads, *col, Tensor::from_vec(g.rows(), 1, data));
                }
            }
            Op::ScaleBy(a, s) => {
                let sv = self.value(*s).item();
                if self.wants(*a) {
                    self.accumulate(grads, *a, g.map(|x| x * sv));
                }
                if self.wants(*s) {
                    let av = self.value(*a);
                    let d: f64 = g.data().iter().zip(av.data()).map(|(x, y)| x * y).sum();
                    self.accumulate(grads, *s, Tensor::scalar(d));
                }
            }
            Op::Scale(a, c) => {
                let c = *c;
                self.accumulate(grads, *a, g.map(|x| x * c));
            }
            Op::Offset(a) => self.accumulate(grads, *a, g.clone()),
            Op::MatMul { a, b, ta, tb } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                // C = op(A) op(B)
                if self.wants(*a) {
                    let mut ga = Tensor::zeros(av.rows(), av.cols());
                    if *ta {
                        // A^T = dC op(B)^T  =>  dA = op(B) dC^T
                        gemm_into(1.0, bv, *tb, g, true, 0.0, &mut ga);
                    } else {
                        gemm_into(1.0, g, false, bv, !*tb, 0.0, &mut ga);
                    }
                    self.accumulate(grads, *a, ga);
                }
                if self.wants(*b) {
                    let mut gb = Tensor::zeros(bv.rows(), bv.cols());
                    if *tb {
                        // dB = dC^T op(A)
                        gemm_into(1.0, g, true, av, *ta, 0.0, &mut gb);
                    } else {
                        gemm_into(1.0, av, !*ta, g, false, 0.0, &mut gb);
                    }
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Sin(a) => {
                let t = g.zip_map(self.value(*a), |x, y| x * y.cos());
                self.accumulate(grads, *a, t);
            }
            Op::Cos(a) => {
                let t = g.zip_map(self.value(*a), |x, y| -x * y.sin());
                self.accumulate(grads, *a, t);
            }
            Op::Exp(a) => self.accumulate(grads, *a, g.zip_map(out, |x, y| x * y)),
            Op::Abs(a) => {
                let t = g.zip_map(self.value(*a), |x, y| {
                    if y > 0.0 {
                        x
                    } else if y < 0.0 {
                        -x
                    } else {
                        0.0
                    }
                });
                self.accumulate(grads, *a, t);
            }
            Op::Relu(a) => {
                let t = g.zip_map(self.value(*a), |x, y| if y > 0.0 { x } else { 0.0 });
                self.accumulate(grads, *a, t);
            }
            Op::Sqrt(a) => {
                let t = g.zip_map(out, |x, s| if s > 0.0 { 0.5 * x / s } else { 0.0 });
                self.accumulate(grads, *a, t);
            }
            Op::Square(a) => {
                let t = g.zip_map(self.value(*a), |x, y| 2.0 * x * y);
                self.accumulate(grads, *a, t);
            }
            Op::Sum(a) => {
                let (r, c) = self.value(*a).shape();
                self.accumulate(grads, *a, Tensor::filled(r, c, g.item()));
            }
            Op::Mean(a) => {
                let (r, c) = self.value(*a).shape();
                if r * c > 0 {
                    self.accumulate(grads, *a, Tensor::filled(r, c, g.item() / (r * c) as f64));
                }
            }
            Op::RowSum(a) => {
                let (r, c) = self.value(*a).shape();
                let mut t = Tensor::zeros(r, c);
                for i in 0..r {
                    let gi = g.data()[i];
                    t.row_mut(i).fill(gi);
                }
                self.accumulate(grads, *a, t);
            }
            Op::RepeatRows(a) => {
                let mut s = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (acc, x) in s.data_mut().iter_mut().zip(g.row(r)) {
                        *acc += x;
                    }
                }
                self.accumulate(grads, *a, s);
            }
            Op::SliceRows(a, start) => {
                let (r, c) = self.value(*a).shape();
                let mut t = Tensor::zeros(r, c);
                t.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                self.accumulate(grads, *a, t);
            }
            Op::SliceCols(a, start) => {
                let (r, c) = self.value(*a).shape();
                let mut t = Tensor::zeros(r, c);
                for i in 0..r {
                    t.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                }
                self.accumulate(grads, *a, t);
            }
            Op::GatherRows(a, idx) => {
                let (r, c) = self.value(*a).shape();
                let mut t = Tensor::zeros(r, c);
                for (k, &src) in idx.iter().enumerate() {
                    for (acc, x) in t.row_mut(src).iter_mut().zip(g.row(k)) {
                        *acc += x;
                    }
                }
                self.accumulate(grads, *a, t);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.wants(p) {
                        self.accumulate(grads, p, g.slice_cols(start, w));
                    }
                    start += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let h = self.value(p).rows();
                    if self.wants(p) {
                        self.accumulate(grads, p, g.slice_rows(start, h));
                    }
                    start += h;
                }
            }
            Op::Reshape(a) => {
                let (r, c) = self.value(*a).shape();
                self.accumulate(grads, *a, g.reshape(r, c));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient_is_twice_theta() {
        let mut t = Tape::new();
        let theta = t.param(Tensor::row_vector(vec![1.0, -2.0, 0.5]));
        let sq = t.square(theta);
        let loss = t.sum(sq);
        let g = t.backward(loss);
        assert_eq!(g.get(theta).unwrap().data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let c = t.constant(Tensor::scalar(3.0));
        let p = t.param(Tensor::scalar(2.0));
        let m = t.mul(c, p);
        let g = t.backward(m);
        assert!(g.get(c).is_none());
        assert_eq!(g.get(p).unwrap().item(), 3.0);
    }

    #[test]
    fn abs_subgradient_at_zero_is_zero_and_max_tie_goes_first() {
        let mut t = Tape::new();
        let a = t.param(Tensor::scalar(0.0));
        let b = t.param(Tensor::scalar(0.0));
        let ab = t.abs(a);
        let m = t.max(a, b);
        let s = t.add(ab, m);
        let g = t.backward(s);
        assert_eq!(g.get(a).unwrap().item(), 1.0);
        assert_eq!(g.get(b).unwrap().item(), 0.0);
    }

    #[test]
    fn shared_node_accumulates() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(3.0));
        let y = t.mul(x, x);
        let z = t.add(y, x);
        let g = t.backward(z);
        assert_eq!(g.get(x).unwrap().item(), 7.0);
    }
}
