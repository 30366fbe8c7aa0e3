//! Gumbel-softmax sampling over a logit row, with a straight-through hard
//! sample for discrete execution while gradients flow through the relaxed
//! (soft) sample.

use crate::tape::{Tape, Var};
use crate::Result;
use rand::Rng;

pub struct GumbelSample {
    /// Relaxed sample: softmax((logits + g) / temperature).
    pub soft: Var,
    /// One-hot forward value with soft gradients.
    pub hard: Var,
    pub hard_index: usize,
}

/// Standard Gumbel(0, 1) noise, one draw per logit.
pub fn gumbel_noise<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            -(-u.ln()).ln()
        })
        .collect()
}

/// Perturbs a 1 x k logit row with the given Gumbel noise, tempers, and
/// builds both the relaxed sample and its straight-through hard version.
pub fn gumbel_softmax(
    tape: &mut Tape,
    logits: Var,
    noise: &[f64],
    temperature: f64,
) -> Result<GumbelSample> {
    assert!(temperature > 0.0, "temperature must be positive");
    let k = tape.cols(logits);
    assert_eq!(noise.len(), k, "noise length != logit count");
    let noise_leaf = tape.leaf_row(noise);
    let perturbed = tape.add(logits, noise_leaf)?;
    let tempered = tape.affine(perturbed, 1.0 / temperature, 0.0);
    let soft = tape.softmax_rows(tempered)?;
    let y = tape.value(soft);
    let hard_index = argmax(y);
    let mut hard_row = vec![0.0; k];
    hard_row[hard_index] = 1.0;
    let hard = tape.straight_through(soft, &hard_row)?;
    Ok(GumbelSample {
        soft,
        hard,
        hard_index,
    })
}

/// Greedy relaxed action: softmax(logits / temperature), no noise. Raw path.
pub fn softmax_tempered(logits: &[f64], temperature: f64) -> Vec<f64> {
    assert!(temperature > 0.0);
    let maxv = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .map(|&z| ((z - maxv) / temperature).exp())
        .collect();
    let sum: f64 = out.iter().sum();
    for x in out.iter_mut() {
        *x /= sum;
    }
    out
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
