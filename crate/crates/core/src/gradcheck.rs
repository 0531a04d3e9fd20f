//! Central finite-difference certification of the analytic gradients.
//!
//! The numeric side only ever calls the forward pass and the loss value, so
//! it is independent of the backward code it checks.

use crate::autograd::{backward, loss_and_grad, LossWeights};
use crate::config::PropagationConfig;
use crate::error::Result;
use crate::grid::{DepthGrid, Grid};
use crate::neighborhood::Variant;
use crate::propagation::propagate;
use crate::synth::{random_bundle, rng, OwnedBundle, RandomBundleOptions};
use crate::volume::{AffinityVolume, AttentionStack};

use rand::Rng;

/// Distance kept from the `|w| = 0` kink and from the attention bounds.
pub const KINK_MARGIN: f64 = 1e-3;

/// A seed-fixed bundle with kink-avoiding margins and a dense positive
/// ground truth to drive the loss.
pub fn random_problem(variant: Variant, size: usize, steps: usize, seed: u64) -> (OwnedBundle, DepthGrid) {
    let mut opts = RandomBundleOptions::new(variant, size, size, steps);
    opts.margin = KINK_MARGIN;
    let bundle = random_bundle(&opts, seed);
    let mut r = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let gt = DepthGrid::new(size, size, (0..size * size).map(|_| r.gen_range(0.5..6.0)).collect()).unwrap();
    (bundle, gt)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckOptions {
    /// Relative FD step: `h = step * max(1, |x|)`.
    pub step: f64,
    /// Lower bound on the denominator of the relative error.
    pub floor: f64,
    pub tolerance: f64,
    pub loss: LossWeights,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-6,
            floor: 1e-3,
            tolerance: 1e-5,
            loss: LossWeights::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassReport {
    pub name: &'static str,
    pub checked: usize,
    /// Entries skipped because the FD stencil would leave `[0, 1]`.
    pub skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub classes: Vec<ClassReport>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.classes.iter().all(|c| c.max_rel_error <= self.tolerance)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.classes.iter().map(|c| c.max_rel_error).fold(0.0, f64::max)
    }
}

/// `|a - f| / max(|a|, |f|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn loss_of(b: &OwnedBundle, cfg: &PropagationConfig, gt: &DepthGrid, weights: LossWeights) -> Result<f64> {
    let (out, _) = propagate(&b.initial, &b.affinity, &b.attention, &b.spec, cfg)?;
    Ok(loss_and_grad(&out, gt, weights)?.0)
}

/// Checks `d loss / d h0`, `d loss / d w` and `d loss / d pi` of `bundle`
/// against central differences, entry by entry.
pub fn check_gradients(
    bundle: &OwnedBundle,
    gt: &DepthGrid,
    cfg: &PropagationConfig,
    opts: &GradcheckOptions,
) -> Result<GradcheckReport> {
    let view = bundle.bundle(cfg)?;
    let (out, tape) = propagate(&bundle.initial, &bundle.affinity, &bundle.attention, &bundle.spec, cfg)?;
    let (_, upstream) = loss_and_grad(&out, gt, opts.loss)?;
    let grads = backward(&view, &tape, upstream.values())?;
    let (h, w) = bundle.initial.dims();

    let mut work = bundle.clone();
    let fd = |work: &mut OwnedBundle, set: &dyn Fn(&mut OwnedBundle, f64), x: f64| -> Result<f64> {
        let step = opts.step * x.abs().max(1.0);
        set(work, x + step);
        let plus = loss_of(work, cfg, gt, opts.loss)?;
        set(work, x - step);
        let minus = loss_of(work, cfg, gt, opts.loss)?;
        set(work, x);
        Ok((plus - minus) / (2.0 * step))
    };

    let mut initial = ClassReport {
        name: "h0",
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
    };
    for p in 0..h * w {
        let x = work.initial.values()[p];
        let set = |b: &mut OwnedBundle, v: f64| {
            let mut vals = b.initial.values().to_vec();
            vals[p] = v;
            b.initial = Grid::new(h, w, vals).unwrap();
        };
        let num = fd(&mut work, &set, x)?;
        initial.max_rel_error = initial
            .max_rel_error
            .max(relative_error(grads.initial[p], num, opts.floor));
        initial.checked += 1;
    }

    let k = bundle.affinity.neighbors();
    let mut affinity = ClassReport {
        name: "affinity",
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
    };
    for n in 0..k * h * w {
        let x = work.affinity.weights()[n];
        let set = |b: &mut OwnedBundle, v: f64| {
            let mut vals = b.affinity.weights().to_vec();
            vals[n] = v;
            b.affinity = AffinityVolume::new(k, h, w, vals).unwrap();
        };
        let num = fd(&mut work, &set, x)?;
        affinity.max_rel_error = affinity
            .max_rel_error
            .max(relative_error(grads.affinity[n], num, opts.floor));
        affinity.checked += 1;
    }

    let (steps, rings) = (bundle.attention.steps(), bundle.attention.rings());
    let mut attention = ClassReport {
        name: "attention",
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
    };
    // only the first cfg.steps slices influence the output
    for n in 0..cfg.steps * rings * h * w {
        let x = work.attention.values()[n];
        let step = opts.step * x.abs().max(1.0);
        if x - step < 0.0 || x + step > 1.0 {
            attention.skipped += 1;
            continue;
        }
        let set = |b: &mut OwnedBundle, v: f64| {
            let mut vals = b.attention.values().to_vec();
            vals[n] = v;
            b.attention = AttentionStack::new(steps, rings, h, w, vals).unwrap();
        };
        let num = fd(&mut work, &set, x)?;
        attention.max_rel_error = attention
            .max_rel_error
            .max(relative_error(grads.attention[n], num, opts.floor));
        attention.checked += 1;
    }

    Ok(GradcheckReport {
        classes: vec![initial, affinity, attention],
        tolerance: opts.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0, 1e-3), 0.0);
        assert!((relative_error(2.0, 1.0, 1e-3) - 0.5).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-6, 1e-3) - 1e-3).abs() < 1e-15);
    }
}
