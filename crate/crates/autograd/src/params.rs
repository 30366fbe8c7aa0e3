//! Named parameter storage with per-parameter Adam state.

use crate::error::Error;
use crate::tensor::Tensor;
use crate::Result;
use rand::Rng;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    value: Tensor,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
}

/// A set of named tensors updated together by one optimizer.
#[derive(Debug)]
pub struct ParamSet {
    entries: Vec<Entry>,
    /// Distinguishes sets on a tape, so equal `ParamId`s from different
    /// sets (e.g. an actor and a critic joined in one graph) never alias.
    uid: u64,
    /// Shared Adam timestep, incremented once per `adam_step`.
    pub step: u64,
}

fn next_uid() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static NEXT: AtomicU64 = AtomicU64::new(1);
    NEXT.fetch_add(1, Ordering::Relaxed)
}

impl Clone for ParamSet {
    /// A clone is a new independent set and therefore gets its own identity.
    fn clone(&self) -> Self {
        ParamSet {
            entries: self.entries.clone(),
            uid: next_uid(),
            step: self.step,
        }
    }
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            entries: Vec::new(),
            uid: next_uid(),
            step: 0,
        }
    }

    pub(crate) fn uid(&self) -> u64 {
        self.uid
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> ParamId {
        assert!(
            !self.entries.iter().any(|e| e.name == name),
            "duplicate parameter name {name}"
        );
        let n = value.numel();
        self.entries.push(Entry {
            name: name.to_string(),
            value,
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
        });
        ParamId(self.entries.len() - 1)
    }

    /// Xavier-uniform initialized matrix: U(-sqrt(6/(fi+fo)), +sqrt(6/(fi+fo))).
    pub fn add_xavier<R: Rng>(&mut self, name: &str, rows: usize, cols: usize, rng: &mut R) -> ParamId {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        self.add(name, Tensor::new(rows, cols, data))
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::zeros(rows, cols))
    }

    pub fn add_identity(&mut self, name: &str, n: usize) -> ParamId {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.set(i, i, 1.0);
        }
        self.add(name, t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .map(ParamId)
    }

    /// One Adam step over every parameter that has a gradient.
    pub fn adam_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        for (idx, g) in grads.by_param.iter().enumerate() {
            let Some(g) = g else { continue };
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NanGradient(self.entries[idx].name.clone()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for (idx, g) in grads.by_param.iter().enumerate() {
            let Some(g) = g else { continue };
            let e = &mut self.entries[idx];
            for (i, &gi) in g.iter().enumerate() {
                e.adam_m[i] = ADAM_BETA1 * e.adam_m[i] + (1.0 - ADAM_BETA1) * gi;
                e.adam_v[i] = ADAM_BETA2 * e.adam_v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                let m_hat = e.adam_m[i] / bc1;
                let v_hat = e.adam_v[i] / bc2;
                e.value.data[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }

    /// Polyak blend toward `src`: self <- tau * src + (1 - tau) * self.
    /// Both sets must have been built by the same construction sequence.
    pub fn blend_from(&mut self, src: &ParamSet, tau: f64) {
        assert_eq!(self.entries.len(), src.entries.len(), "parameter set mismatch");
        for (dst, s) in self.entries.iter_mut().zip(&src.entries) {
            debug_assert_eq!(dst.name, s.name);
            for (d, &x) in dst.value.data.iter_mut().zip(&s.value.data) {
                *d = tau * x + (1.0 - tau) * *d;
            }
        }
    }

    /// Flat (name, tensor) view of values plus optimizer moments, for
    /// checkpointing. Moment tensors reuse the value shape.
    pub fn export_named(&self, prefix: &str) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for e in &self.entries {
            let (r, c) = (e.value.rows, e.value.cols);
            out.push((format!("{prefix}{}", e.name), e.value.clone()));
            out.push((
                format!("{prefix}{}#m", e.name),
                Tensor::new(r, c, e.adam_m.clone()),
            ));
            out.push((
                format!("{prefix}{}#v", e.name),
                Tensor::new(r, c, e.adam_v.clone()),
            ));
        }
        out
    }

    /// Restores values and moments from tensors exported by `export_named`.
    pub fn import_named(
        &mut self,
        prefix: &str,
        lookup: &dyn Fn(&str) -> Option<Tensor>,
    ) -> Result<()> {
        for e in &mut self.entries {
            let want = |suffix: &str| -> Result<Tensor> {
                let key = format!("{prefix}{}{suffix}", e.name);
                lookup(&key).ok_or_else(|| Error::BadCheckpoint(format!("missing tensor `{key}`")))
            };
            let v = want("")?;
            if (v.rows, v.cols) != (e.value.rows, e.value.cols) {
                return Err(Error::BadCheckpoint(format!(
                    "tensor `{prefix}{}` has shape {}, expected {}",
                    e.name,
                    v.shape_str(),
                    e.value.shape_str()
                )));
            }
            e.value = v;
            e.adam_m = want("#m")?.data;
            e.adam_v = want("#v")?.data;
        }
        Ok(())
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        ParamSet::new()
    }
}

/// Per-parameter gradient accumulator aligned with a ParamSet.
pub struct Gradients {
    pub(crate) by_param: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn empty(params: &ParamSet) -> Self {
        Gradients {
            by_param: vec![None; params.len()],
        }
    }

    pub fn accumulate(&mut self, id: ParamId, grad: &[f64]) {
        match &mut self.by_param[id.0] {
            Some(g) => {
                for (a, &b) in g.iter_mut().zip(grad) {
                    *a += b;
                }
            }
            slot => *slot = Some(grad.to_vec()),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.by_param[id.0].as_deref()
    }

    pub fn scale(&mut self, k: f64) {
        for g in self.by_param.iter_mut().flatten() {
            for x in g.iter_mut() {
                *x *= k;
            }
        }
    }
}
