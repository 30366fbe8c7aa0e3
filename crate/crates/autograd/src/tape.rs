//! Reverse-mode tape. Operations compute forward values eagerly and record
//! enough structure to propagate adjoints in reverse insertion order. A tape
//! instance is single-threaded and lives for one forward/backward pass.

use crate::error::Error;
use crate::params::{Gradients, ParamId, ParamSet};
use crate::tensor::{matmul_a_bt_acc, matmul_acc, matmul_at_b_acc, Tensor};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    /// (r x c) + broadcast (1 x c)
    AddRow(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// k * x + c
    Affine(usize, f64),
    Relu(usize),
    Transpose(usize),
    SelectRow(usize, usize),
    ConcatCols(Vec<usize>),
    StackRows(Vec<usize>),
    /// Row-wise softmax over unmasked columns; masked outputs are exactly 0.
    MaskedSoftmax(usize, Vec<bool>),
    SumAll(usize),
    MeanAll(usize),
    /// Forward emits a stored constant; backward passes the adjoint to the
    /// soft argument unchanged.
    StraightThrough(usize),
}

struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    grad: Vec<f64>,
    op: Op,
}

pub struct Tape {
    nodes: Vec<Node>,
    bindings: Vec<(u64, ParamId, Var)>,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            bindings: Vec::new(),
        }
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            value,
            grad: vec![0.0; rows * cols],
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn rows(&self, v: Var) -> usize {
        self.nodes[v.0].rows
    }

    pub fn cols(&self, v: Var) -> usize {
        self.nodes[v.0].cols
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn value_tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(n.rows, n.cols, n.value.clone())
    }

    pub fn grad(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].grad
    }

    fn shape_err(&self, op: &'static str, expected: String, got: String) -> Error {
        Error::ShapeMismatch { op, expected, got }
    }

    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.rows, t.cols, t.data.clone(), Op::Leaf)
    }

    pub fn leaf_row(&mut self, data: &[f64]) -> Var {
        self.push(1, data.len(), data.to_vec(), Op::Leaf)
    }

    /// Binds a parameter as a leaf. Each parameter binds at most once per
    /// tape; repeated calls return the existing leaf so adjoints accumulate.
    /// Parameters from different sets stay distinct even when their ids
    /// coincide, so one graph can join several sets (actor plus critic).
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        let uid = params.uid();
        if let Some(&(_, _, v)) = self
            .bindings
            .iter()
            .find(|(u, pid, _)| *u == uid && *pid == id)
        {
            return v;
        }
        let v = self.leaf(params.tensor(id));
        self.bindings.push((uid, id, v));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = (self.rows(a), self.cols(a));
        let (k2, n) = (self.rows(b), self.cols(b));
        if k != k2 {
            return Err(self.shape_err(
                "matmul",
                format!("{}x{} * {}x_", m, k, k),
                format!("{}x{} * {}x{}", m, k, k2, n),
            ));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(m, k, n, &self.nodes[a.0].value, &self.nodes[b.0].value, &mut out);
        Ok(self.push(m, n, out, Op::MatMul(a.0, b.0)))
    }

    fn binary_same_shape(&mut self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let (r, c) = (self.rows(a), self.cols(a));
        if (self.rows(b), self.cols(b)) != (r, c) {
            return Err(self.shape_err(
                op,
                format!("{}x{}", r, c),
                format!("{}x{}", self.rows(b), self.cols(b)),
            ));
        }
        Ok((r, c))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.binary_same_shape("add", a, b)?;
        let value: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(r, c, value, Op::Add(a.0, b.0)))
    }

    /// (r x c) plus a (1 x c) row broadcast over every row.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (r, c) = (self.rows(a), self.cols(a));
        if (self.rows(bias), self.cols(bias)) != (1, c) {
            return Err(self.shape_err(
                "add_row",
                format!("1x{}", c),
                format!("{}x{}", self.rows(bias), self.cols(bias)),
            ));
        }
        let mut value = self.nodes[a.0].value.clone();
        for row in value.chunks_exact_mut(c) {
            for (x, b) in row.iter_mut().zip(&self.nodes[bias.0].value) {
                *x += b;
            }
        }
        Ok(self.push(r, c, value, Op::AddRow(a.0, bias.0)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.binary_same_shape("sub", a, b)?;
        let value: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(r, c, value, Op::Sub(a.0, b.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.binary_same_shape("mul", a, b)?;
        let value: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(r, c, value, Op::Mul(a.0, b.0)))
    }

    /// k * a + c, elementwise.
    pub fn affine(&mut self, a: Var, k: f64, c: f64) -> Var {
        let (r, cl) = (self.rows(a), self.cols(a));
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|x| k * x + c).collect();
        self.push(r, cl, value, Op::Affine(a.0, k))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let (r, c) = (self.rows(a), self.cols(a));
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x.max(0.0)).collect();
        self.push(r, c, value, Op::Relu(a.0))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (r, c) = (self.rows(a), self.cols(a));
        let src = &self.nodes[a.0].value;
        let mut value = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                value[j * r + i] = src[i * c + j];
            }
        }
        self.push(c, r, value, Op::Transpose(a.0))
    }

    pub fn select_row(&mut self, a: Var, row: usize) -> Result<Var> {
        let (r, c) = (self.rows(a), self.cols(a));
        if row >= r {
            return Err(self.shape_err("select_row", format!("row < {}", r), format!("row {}", row)));
        }
        let value = self.nodes[a.0].value[row * c..(row + 1) * c].to_vec();
        Ok(self.push(1, c, value, Op::SelectRow(a.0, row)))
    }

    /// Concatenates parts along columns; every part must share the row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        assert!(!parts.is_empty());
        let r = self.rows(parts[0]);
        let mut total = 0;
        for &p in parts {
            if self.rows(p) != r {
                return Err(self.shape_err(
                    "concat_cols",
                    format!("{} rows", r),
                    format!("{} rows", self.rows(p)),
                ));
            }
            total += self.cols(p);
        }
        let mut value = Vec::with_capacity(r * total);
        for i in 0..r {
            for &p in parts {
                let c = self.cols(p);
                value.extend_from_slice(&self.nodes[p.0].value[i * c..(i + 1) * c]);
            }
        }
        let ids = parts.iter().map(|p| p.0).collect();
        Ok(self.push(r, total, value, Op::ConcatCols(ids)))
    }

    /// Stacks parts vertically; every part must share the column count.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        assert!(!parts.is_empty());
        let c = self.cols(parts[0]);
        let mut total = 0;
        for &p in parts {
            if self.cols(p) != c {
                return Err(self.shape_err(
                    "stack_rows",
                    format!("{} cols", c),
                    format!("{} cols", self.cols(p)),
                ));
            }
            total += self.rows(p);
        }
        let mut value = Vec::with_capacity(total * c);
        for &p in parts {
            value.extend_from_slice(&self.nodes[p.0].value);
        }
        let ids = parts.iter().map(|p| p.0).collect();
        Ok(self.push(total, c, value, Op::StackRows(ids)))
    }

    /// Row-wise softmax over the unmasked columns. Masked columns produce
    /// exactly 0 and receive no gradient, so masked inputs are inert.
    pub fn masked_softmax(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let (r, c) = (self.rows(a), self.cols(a));
        if mask.len() != c {
            return Err(self.shape_err(
                "masked_softmax",
                format!("mask of {}", c),
                format!("mask of {}", mask.len()),
            ));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::AllMasked);
        }
        let mut value = vec![0.0; r * c];
        for i in 0..r {
            let zrow = &self.nodes[a.0].value[i * c..(i + 1) * c];
            let mut maxv = f64::NEG_INFINITY;
            for (j, &z) in zrow.iter().enumerate() {
                if mask[j] && z > maxv {
                    maxv = z;
                }
            }
            let mut sum = 0.0;
            let orow = &mut value[i * c..(i + 1) * c];
            for (j, &z) in zrow.iter().enumerate() {
                if mask[j] {
                    let e = (z - maxv).exp();
                    orow[j] = e;
                    sum += e;
                }
            }
            for x in orow.iter_mut() {
                *x /= sum;
            }
        }
        Ok(self.push(r, c, value, Op::MaskedSoftmax(a.0, mask.to_vec())))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let mask = vec![true; self.cols(a)];
        self.masked_softmax(a, &mask)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s: f64 = self.nodes[a.0].value.iter().sum();
        self.push(1, 1, vec![s], Op::SumAll(a.0))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].value.len() as f64;
        let s: f64 = self.nodes[a.0].value.iter().sum();
        self.push(1, 1, vec![s / n], Op::MeanAll(a.0))
    }

    /// Forward takes the given hard values; backward routes the adjoint to
    /// `soft` with an identity Jacobian.
    pub fn straight_through(&mut self, soft: Var, hard: &[f64]) -> Result<Var> {
        let (r, c) = (self.rows(soft), self.cols(soft));
        if hard.len() != r * c {
            return Err(self.shape_err(
                "straight_through",
                format!("{} values", r * c),
                format!("{} values", hard.len()),
            ));
        }
        Ok(self.push(r, c, hard.to_vec(), Op::StraightThrough(soft.0)))
    }

    /// Seeds the loss adjoint with 1 and sweeps the tape in reverse.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let n = &self.nodes[loss.0];
        if n.rows != 1 || n.cols != 1 {
            return Err(Error::NonScalarLoss {
                rows: n.rows,
                cols: n.cols,
            });
        }
        self.nodes[loss.0].grad[0] = 1.0;
        for idx in (0..=loss.0).rev() {
            self.step_backward(idx);
        }
        Ok(())
    }

    fn step_backward(&mut self, idx: usize) {
        // Split off the node being processed so its parents can be borrowed
        // mutably from the prefix.
        let (head, tail) = self.nodes.split_at_mut(idx);
        let node = &tail[0];
        if node.grad.iter().all(|&g| g == 0.0) {
            return;
        }
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (head[*a].rows, head[*a].cols);
                let n = head[*b].cols;
                // dA += dC * B^T ; dB += A^T * dC
                let aval = head[*a].value.clone();
                let bval = head[*b].value.clone();
                matmul_a_bt_acc(m, n, k, &node.grad, &bval, &mut head[*a].grad);
                matmul_at_b_acc(m, k, n, &aval, &node.grad, &mut head[*b].grad);
            }
            Op::Add(a, b) => {
                for (g, &d) in head[*a].grad.iter_mut().zip(&node.grad) {
                    *g += d;
                }
                for (g, &d) in head[*b].grad.iter_mut().zip(&node.grad) {
                    *g += d;
                }
            }
            Op::AddRow(a, bias) => {
                for (g, &d) in head[*a].grad.iter_mut().zip(&node.grad) {
                    *g += d;
                }
                let c = head[*bias].cols;
                for row in node.grad.chunks_exact(c) {
                    for (g, &d) in head[*bias].grad.iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
            Op::Sub(a, b) => {
                for (g, &d) in head[*a].grad.iter_mut().zip(&node.grad) {
                    *g += d;
                }
                for (g, &d) in head[*b].grad.iter_mut().zip(&node.grad) {
                    *g -= d;
                }
            }
            Op::Mul(a, b) => {
                let (ai, bi) = (*a, *b);
                if ai == bi {
                    // d(x*x) = 2x dx
                    for i in 0..node.grad.len() {
                        let x = head[ai].value[i];
                        head[ai].grad[i] += 2.0 * x * node.grad[i];
                    }
                } else {
                    let (lo, hi) = if ai < bi { (ai, bi) } else { (bi, ai) };
                    let (first, second) = head.split_at_mut(hi);
                    let (na, nb) = if ai < bi {
                        (&mut first[lo], &mut second[0])
                    } else {
                        (&mut second[0], &mut first[lo])
                    };
                    for i in 0..node.grad.len() {
                        na.grad[i] += nb.value[i] * node.grad[i];
                        nb.grad[i] += na.value[i] * node.grad[i];
                    }
                }
            }
            Op::Affine(a, k) => {
                for (g, &d) in head[*a].grad.iter_mut().zip(&node.grad) {
                    *g += k * d;
                }
            }
            Op::Relu(a) => {
                for i in 0..node.grad.len() {
                    if head[*a].value[i] > 0.0 {
                        head[*a].grad[i] += node.grad[i];
                    }
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (head[*a].rows, head[*a].cols);
                for i in 0..r {
                    for j in 0..c {
                        head[*a].grad[i * c + j] += node.grad[j * r + i];
                    }
                }
            }
            Op::SelectRow(a, row) => {
                let c = head[*a].cols;
                for (g, &d) in head[*a].grad[row * c..(row + 1) * c]
                    .iter_mut()
                    .zip(&node.grad)
                {
                    *g += d;
                }
            }
            Op::ConcatCols(parts) => {
                let parts = parts.clone();
                let r = node.rows;
                let total = node.cols;
                for i in 0..r {
                    let drow = &node.grad[i * total..(i + 1) * total];
                    let mut off = 0;
                    for &p in &parts {
                        let c = head[p].cols;
                        for (g, &d) in head[p].grad[i * c..(i + 1) * c]
                            .iter_mut()
                            .zip(&drow[off..off + c])
                        {
                            *g += d;
                        }
                        off += c;
                    }
                }
            }
            Op::StackRows(parts) => {
                let parts = parts.clone();
                let c = node.cols;
                let mut off = 0;
                for &p in &parts {
                    let len = head[p].rows * c;
                    for (g, &d) in head[p].grad.iter_mut().zip(&node.grad[off..off + len]) {
                        *g += d;
                    }
                    off += len;
                }
            }
            Op::MaskedSoftmax(a, mask) => {
                let c = node.cols;
                for i in 0..node.rows {
                    let y = &node.value[i * c..(i + 1) * c];
                    let dy = &node.grad[i * c..(i + 1) * c];
                    let mut dot = 0.0;
                    for j in 0..c {
                        if mask[j] {
                            dot += dy[j] * y[j];
                        }
                    }
                    let gz = &mut head[*a].grad[i * c..(i + 1) * c];
                    for j in 0..c {
                        if mask[j] {
                            gz[j] += y[j] * (dy[j] - dot);
                        }
                    }
                }
            }
            Op::SumAll(a) => {
                let d = node.grad[0];
                for g in head[*a].grad.iter_mut() {
                    *g += d;
                }
            }
            Op::MeanAll(a) => {
                let d = node.grad[0] / head[*a].value.len() as f64;
                for g in head[*a].grad.iter_mut() {
                    *g += d;
                }
            }
            Op::StraightThrough(a) => {
                for (g, &d) in head[*a].grad.iter_mut().zip(&node.grad) {
                    *g += d;
                }
            }
        }
    }

    /// Collects gradients for the given set's parameters bound on this tape,
    /// with a finiteness check that names the offending parameter. Bindings
    /// belonging to other sets in the same graph are left out.
    pub fn param_grads(&self, params: &ParamSet) -> Result<Gradients> {
        let mut grads = Gradients::empty(params);
        for &(uid, pid, var) in &self.bindings {
            if uid != params.uid() {
                continue;
            }
            let g = self.grad(var);
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NanGradient(params.name(pid).to_string()));
            }
            grads.accumulate(pid, g);
        }
        Ok(grads)
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}
