//! Network building blocks. Every block exposes two forward paths that must
//! agree to machine precision: `forward` builds tape nodes for training, and
//! `infer` runs the same arithmetic without a tape for the hot execution
//! paths (rollouts, target networks).

use crate::params::{ParamId, ParamSet};
use crate::tape::{Tape, Var};
use crate::tensor::{matmul_acc, Tensor};
use crate::{Error, Result};
use rand::Rng;

/// Fully connected stack with ReLU between layers and a linear output layer.
#[derive(Debug, Clone)]
pub struct Perceptron {
    pub dims: Vec<usize>,
    pub weights: Vec<ParamId>,
    pub biases: Vec<ParamId>,
}

impl Perceptron {
    pub fn new<R: Rng>(ps: &mut ParamSet, rng: &mut R, prefix: &str, dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "perceptron needs at least one layer");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for i in 0..dims.len() - 1 {
            weights.push(ps.add_xavier(&format!("{prefix}.w{i}"), dims[i], dims[i + 1], rng));
            biases.push(ps.add_zeros(&format!("{prefix}.b{i}"), 1, dims[i + 1]));
        }
        Perceptron {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    fn check_input(&self, op: &'static str, cols: usize) -> Result<()> {
        if cols != self.in_dim() {
            return Err(Error::ShapeMismatch {
                op,
                expected: format!("_x{}", self.in_dim()),
                got: format!("_x{cols}"),
            });
        }
        Ok(())
    }

    /// Tape forward over a batch of rows.
    pub fn forward(&self, tape: &mut Tape, ps: &ParamSet, input: Var) -> Result<Var> {
        self.check_input("perceptron", tape.cols(input))?;
        let mut x = input;
        let last = self.weights.len() - 1;
        for i in 0..self.weights.len() {
            let w = tape.param(ps, self.weights[i]);
            let b = tape.param(ps, self.biases[i]);
            let lin = tape.matmul(x, w)?;
            x = tape.add_row(lin, b)?;
            if i != last {
                x = tape.relu(x);
            }
        }
        Ok(x)
    }

    /// Tape-free forward, same arithmetic as `forward`.
    pub fn infer(&self, ps: &ParamSet, input: &Tensor) -> Result<Tensor> {
        self.check_input("perceptron", input.cols)?;
        let rows = input.rows;
        let mut x = input.data.clone();
        let last = self.weights.len() - 1;
        for i in 0..self.weights.len() {
            let w = ps.tensor(self.weights[i]);
            let b = ps.tensor(self.biases[i]);
            let mut out = vec![0.0; rows * w.cols];
            matmul_acc(rows, w.rows, w.cols, &x, &w.data, &mut out);
            for row in out.chunks_exact_mut(w.cols) {
                for (o, &bj) in row.iter_mut().zip(&b.data) {
                    *o += bj;
                }
            }
            if i != last {
                for o in out.iter_mut() {
                    *o = o.max(0.0);
                }
            }
            x = out;
        }
        Ok(Tensor::new(rows, self.out_dim(), x))
    }
}

/// Scaled dot-product attention with one query row, per-head projection
/// matrices, head outputs combined by summation and a linear output layer.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub d_model: usize,
    pub n_heads: usize,
    pub wq: Vec<ParamId>,
    pub wk: Vec<ParamId>,
    pub wv: Vec<ParamId>,
    pub wo: ParamId,
    pub bo: ParamId,
}

pub struct AttentionOut {
    /// 1 x d_model context row.
    pub context: Var,
    /// Softmax row per head, length = kv rows; masked entries are 0.
    pub head_weights: Vec<Vec<f64>>,
    /// Mean of the head weights; sums to 1 over unmasked entries.
    pub combined: Vec<f64>,
}

/// Tape-free attention output: `(context, head_weights, combined)` with the
/// same meaning as the corresponding [`AttentionOut`] fields.
pub type InferOut = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

impl MultiHeadAttention {
    pub fn new<R: Rng>(
        ps: &mut ParamSet,
        rng: &mut R,
        prefix: &str,
        d_model: usize,
        n_heads: usize,
    ) -> Self {
        let mut wq = Vec::new();
        let mut wk = Vec::new();
        let mut wv = Vec::new();
        for h in 0..n_heads {
            wq.push(ps.add_xavier(&format!("{prefix}.wq{h}"), d_model, d_model, rng));
            wk.push(ps.add_xavier(&format!("{prefix}.wk{h}"), d_model, d_model, rng));
            wv.push(ps.add_xavier(&format!("{prefix}.wv{h}"), d_model, d_model, rng));
        }
        // Identity output projection keeps the initial context equal to the
        // summed head outputs.
        let wo = ps.add_identity(&format!("{prefix}.wo"), d_model);
        let bo = ps.add_zeros(&format!("{prefix}.bo"), 1, d_model);
        MultiHeadAttention {
            d_model,
            n_heads,
            wq,
            wk,
            wv,
            wo,
            bo,
        }
    }

    fn check(&self, q_cols: usize, kv_cols: usize, kv_rows: usize, mask: &[bool]) -> Result<()> {
        if q_cols != self.d_model || kv_cols != self.d_model {
            return Err(Error::ShapeMismatch {
                op: "attention",
                expected: format!("query 1x{d} and kv _x{d}", d = self.d_model),
                got: format!("query 1x{q_cols} and kv _x{kv_cols}"),
            });
        }
        if mask.len() != kv_rows {
            return Err(Error::ShapeMismatch {
                op: "attention",
                expected: format!("mask of {kv_rows}"),
                got: format!("mask of {}", mask.len()),
            });
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::AllMasked);
        }
        Ok(())
    }

    /// Tape forward: query 1 x d, kv N x d, boolean keep-mask over kv rows.
    pub fn forward(
        &self,
        tape: &mut Tape,
        ps: &ParamSet,
        query: Var,
        kv: Var,
        mask: &[bool],
    ) -> Result<AttentionOut> {
        self.check(tape.cols(query), tape.cols(kv), tape.rows(kv), mask)?;
        let scale = 1.0 / (self.d_model as f64).sqrt();
        let mut head_weights = Vec::with_capacity(self.n_heads);
        let mut ctx_sum: Option<Var> = None;
        for h in 0..self.n_heads {
            let wq = tape.param(ps, self.wq[h]);
            let wk = tape.param(ps, self.wk[h]);
            let wv = tape.param(ps, self.wv[h]);
            let q = tape.matmul(query, wq)?;
            let k = tape.matmul(kv, wk)?;
            let v = tape.matmul(kv, wv)?;
            let kt = tape.transpose(k);
            let raw = tape.matmul(q, kt)?;
            let scores = tape.affine(raw, scale, 0.0);
            let att = tape.masked_softmax(scores, mask)?;
            head_weights.push(tape.value(att).to_vec());
            let ctx_h = tape.matmul(att, v)?;
            ctx_sum = Some(match ctx_sum {
                None => ctx_h,
                Some(acc) => tape.add(acc, ctx_h)?,
            });
        }
        let wo = tape.param(ps, self.wo);
        let bo = tape.param(ps, self.bo);
        let proj = tape.matmul(ctx_sum.unwrap(), wo)?;
        let context = tape.add_row(proj, bo)?;
        let combined = mean_rows(&head_weights);
        Ok(AttentionOut {
            context,
            head_weights,
            combined,
        })
    }

    /// Tape-free forward, same arithmetic as `forward`.
    pub fn infer(
        &self,
        ps: &ParamSet,
        query: &[f64],
        kv: &Tensor,
        mask: &[bool],
    ) -> Result<InferOut> {
        self.check(query.len(), kv.cols, kv.rows, mask)?;
        let d = self.d_model;
        let n = kv.rows;
        let scale = 1.0 / (d as f64).sqrt();
        let mut head_weights = Vec::with_capacity(self.n_heads);
        let mut ctx_sum = vec![0.0; d];
        for h in 0..self.n_heads {
            let wq = ps.tensor(self.wq[h]);
            let wk = ps.tensor(self.wk[h]);
            let wv = ps.tensor(self.wv[h]);
            let mut q = vec![0.0; d];
            matmul_acc(1, d, d, query, &wq.data, &mut q);
            // Scores only for unmasked rows; masked rows never contribute.
            let mut scores = vec![f64::NEG_INFINITY; n];
            let mut maxv = f64::NEG_INFINITY;
            for j in 0..n {
                if !mask[j] {
                    continue;
                }
                let row = kv.row_slice(j);
                let mut kj = vec![0.0; d];
                matmul_acc(1, d, d, row, &wk.data, &mut kj);
                let mut s = 0.0;
                for (a, b) in q.iter().zip(&kj) {
                    s += a * b;
                }
                let s = s * scale;
                scores[j] = s;
                if s > maxv {
                    maxv = s;
                }
            }
            let mut att = vec![0.0; n];
            let mut sum = 0.0;
            for j in 0..n {
                if mask[j] {
                    let e = (scores[j] - maxv).exp();
                    att[j] = e;
                    sum += e;
                }
            }
            for a in att.iter_mut() {
                *a /= sum;
            }
            // Per-head context in its own buffer, heads summed afterwards —
            // the same association order as the tape path.
            let mut ctx_h = vec![0.0; d];
            for j in 0..n {
                if !mask[j] {
                    continue;
                }
                let row = kv.row_slice(j);
                let mut vj = vec![0.0; d];
                matmul_acc(1, d, d, row, &wv.data, &mut vj);
                for (c, &x) in ctx_h.iter_mut().zip(&vj) {
                    *c += att[j] * x;
                }
            }
            if h == 0 {
                ctx_sum = ctx_h;
            } else {
                for (c, &x) in ctx_sum.iter_mut().zip(&ctx_h) {
                    *c += x;
                }
            }
            head_weights.push(att);
        }
        let wo = ps.tensor(self.wo);
        let bo = ps.tensor(self.bo);
        let mut out = vec![0.0; d];
        matmul_acc(1, d, d, &ctx_sum, &wo.data, &mut out);
        for (o, &b) in out.iter_mut().zip(&bo.data) {
            *o += b;
        }
        let combined = mean_rows(&head_weights);
        Ok((out, head_weights, combined))
    }
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows[0].len();
    let mut out = vec![0.0; n];
    for r in rows {
        for (o, &x) in out.iter_mut().zip(r) {
            *o += x;
        }
    }
    let k = rows.len() as f64;
    for o in out.iter_mut() {
        *o /= k;
    }
    out
}
