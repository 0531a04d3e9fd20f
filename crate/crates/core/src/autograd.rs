//! Reverse-mode gradients of the propagation and the training loss.
//!
//! For one step with output `o`, normalizer `D = S' + epsilon` and
//! `o - h0 = (N + pi_0 h - S h0) / D`, the partials are
//!
//! ```text
//! d o / d nb_s  = pi_s w_s / D
//! d o / d h     = pi_0 / D
//! d o / d h0    = 1 - S / D
//! d o / d w_s   = pi_s [(nb_s - h0) - sign(w_s)(o - h0)] / D
//! d o / d pi_s  = [w_s (nb_s - h0) - |w_s| (o - h0)] / D
//! d o / d pi_0  = (h - o) / D
//! ```
//!
//! Everything is read from the tape: states give `h`, `o` and the neighbor
//! samples, the recorded normalizers give `S` and `D`. `sign(0)` is `0`.
//! Attention cotangents are with respect to post-activation values.

use rayon::prelude::*;

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::grid::{DepthGrid, Grid};
use crate::propagation::PropagationTape;
use crate::sampling::slot_taps;

const ROWS_PER_TASK: usize = 8;

/// Cotangents of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCotangents {
    /// With respect to the step input `h[t]`.
    pub state: Vec<f64>,
    /// With respect to `h[0]` through the replacement term only.
    pub initial: Vec<f64>,
    /// `[K, H, W]`.
    pub affinity: Vec<f64>,
    /// `[R+1, H, W]` for this step.
    pub attention: Vec<f64>,
}

/// Gradients with the shapes of the forward inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle {
    pub initial: Vec<f64>,
    /// `[K, H, W]`.
    pub affinity: Vec<f64>,
    /// `[T, R+1, H, W]`.
    pub attention: Vec<f64>,
}

impl GradientBundle {
    pub fn scale(&self, c: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| x * c).collect();
        Self {
            initial: s(&self.initial),
            affinity: s(&self.affinity),
            attention: s(&self.attention),
        }
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct BlockCotangents {
    row0: usize,
    rows: usize,
    self_state: Vec<f64>,
    initial: Vec<f64>,
    /// `[K, rows, W]`
    affinity: Vec<f64>,
    /// `[R+1, rows, W]`
    attention: Vec<f64>,
    /// `(pixel, value)` contributions to `d h[t]` through neighbor samples.
    scatter: Vec<(usize, f64)>,
}

/// Cotangents of step `t` given the cotangent of its output `h[t+1]`.
pub fn backward_step(
    bundle: &Bundle<'_>,
    tape: &PropagationTape,
    t: usize,
    upstream: &[f64],
) -> Result<StepCotangents> {
    if bundle.config.is_reference() {
        return Err(Error::ReferenceModeBackward);
    }
    let norms = match tape.normalizers(t) {
        Some(n) if t < tape.steps() => n,
        _ => {
            return Err(Error::TapeMissing {
                available: tape.recorded_normalizers(),
                needed: t + 1,
            })
        }
    };
    let spec = bundle.spec;
    let (height, width) = spec.dims();
    let plane = height * width;
    if tape.initial().dims() != (height, width) {
        return Err(Error::shape(
            "tape dims",
            format!("{height}x{width}"),
            format!("{:?}", tape.initial().dims()),
        ));
    }
    if upstream.len() != plane {
        return Err(Error::shape("upstream cotangent", plane, upstream.len()));
    }
    let k = spec.neighbor_count();
    let channels = spec.ring_count() + 1;
    let state = tape.states()[t].values();
    let out = tape.states()[t + 1].values();
    let h0 = tape.initial().values();
    let attn = bundle.attention.step_slice(t);
    let suppression = bundle.config.suppression;

    let blocks: Vec<BlockCotangents> = (0..height.div_ceil(ROWS_PER_TASK))
        .into_par_iter()
        .map(|block| {
            let row0 = block * ROWS_PER_TASK;
            let rows = ROWS_PER_TASK.min(height - row0);
            let local = rows * width;
            let mut b = BlockCotangents {
                row0,
                rows,
                self_state: vec![0.0; local],
                initial: vec![0.0; local],
                affinity: vec![0.0; k * local],
                attention: vec![0.0; channels * local],
                scatter: Vec::new(),
            };
            for lp in 0..local {
                let p = row0 * width + lp;
                let g = upstream[p];
                if g == 0.0 {
                    continue;
                }
                let (i, j) = (p / width, p % width);
                let denom = norms.denom[p];
                let gd = g / denom;
                let resid = out[p] - h0[p];
                let pi0 = if suppression { attn[p] } else { 0.0 };
                b.self_state[lp] = gd * pi0;
                b.initial[lp] = g * (1.0 - norms.signed[p] / denom);
                if suppression {
                    b.attention[lp] = gd * (state[p] - out[p]);
                }
                for slot in 0..k {
                    let Some(taps) = slot_taps(spec, slot, i, j) else {
                        continue;
                    };
                    let ring = spec.slot_ring(slot);
                    let pi = attn[ring * plane + p];
                    let w = bundle.affinity.weight(slot, p);
                    let nb = taps.sample(state);
                    b.affinity[slot * local + lp] = gd * pi * ((nb - h0[p]) - sign(w) * resid);
                    b.attention[ring * local + lp] += gd * (w * (nb - h0[p]) - w.abs() * resid);
                    let coef = gd * pi * w;
                    for (q, tw) in taps.iter() {
                        b.scatter.push((q, coef * tw));
                    }
                }
            }
            b
        })
        .collect();

    let mut cot = StepCotangents {
        state: vec![0.0; plane],
        initial: vec![0.0; plane],
        affinity: vec![0.0; k * plane],
        attention: vec![0.0; channels * plane],
    };
    for b in &blocks {
        let off = b.row0 * width;
        let local = b.rows * width;
        cot.state[off..off + local].copy_from_slice(&b.self_state);
        cot.initial[off..off + local].copy_from_slice(&b.initial);
        for s in 0..k {
            cot.affinity[s * plane + off..s * plane + off + local]
                .copy_from_slice(&b.affinity[s * local..(s + 1) * local]);
        }
        for c in 0..channels {
            cot.attention[c * plane + off..c * plane + off + local]
                .copy_from_slice(&b.attention[c * local..(c + 1) * local]);
        }
    }
    for b in &blocks {
        for &(q, v) in &b.scatter {
            cot.state[q] += v;
        }
    }
    Ok(cot)
}

/// Reverse accumulation over all recorded steps, from `d loss / d h[N]`.
pub fn backward(bundle: &Bundle<'_>, tape: &PropagationTape, upstream: &[f64]) -> Result<GradientBundle> {
    let n = tape.steps();
    if n > bundle.attention.steps() {
        return Err(Error::shape(
            "attention steps T",
            format!(">= {n} tape steps"),
            bundle.attention.steps(),
        ));
    }
    let (h, w) = bundle.spec.dims();
    let plane = h * w;
    let channels = bundle.spec.ring_count() + 1;
    let mut grads = GradientBundle {
        initial: vec![0.0; plane],
        affinity: vec![0.0; bundle.spec.neighbor_count() * plane],
        attention: vec![0.0; bundle.attention.steps() * channels * plane],
    };
    let mut carry = upstream.to_vec();
    for t in (0..n).rev() {
        let cot = backward_step(bundle, tape, t, &carry)?;
        for (a, c) in grads.affinity.iter_mut().zip(&cot.affinity) {
            *a += c;
        }
        for (a, c) in grads.initial.iter_mut().zip(&cot.initial) {
            *a += c;
        }
        grads.attention[t * channels * plane..(t + 1) * channels * plane].copy_from_slice(&cot.attention);
        carry = cot.state;
    }
    // h[0] is also the input of the first step
    for (a, c) in grads.initial.iter_mut().zip(&carry) {
        *a += c;
    }
    Ok(grads)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub l1: f64,
    pub l2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { l1: 1.0, l2: 1.0 }
    }
}

/// `alpha * mean|r| + beta * mean r^2` over pixels with valid ground truth,
/// returning the loss and `d loss / d prediction`.
pub fn loss_and_grad(prediction: &Grid, gt: &DepthGrid, weights: LossWeights) -> Result<(f64, Grid)> {
    if prediction.dims() != gt.dims() {
        return Err(Error::shape(
            "prediction vs ground truth",
            format!("{:?}", gt.dims()),
            format!("{:?}", prediction.dims()),
        ));
    }
    let valid = gt.valid_count();
    if valid == 0 {
        return Err(Error::NoValidPixels);
    }
    let inv = 1.0 / valid as f64;
    let (mut l1, mut l2) = (0.0, 0.0);
    let mut grad = vec![0.0; gt.len()];
    for (p, (&pred, &truth)) in prediction.values().iter().zip(gt.values()).enumerate() {
        if truth <= 0.0 {
            continue;
        }
        let r = pred - truth;
        l1 += r.abs();
        l2 += r * r;
        grad[p] = inv * (weights.l1 * sign(r) + 2.0 * weights.l2 * r);
    }
    let loss = weights.l1 * l1 * inv + weights.l2 * l2 * inv;
    Ok((loss, Grid::new(gt.height(), gt.width(), grad)?))
}
