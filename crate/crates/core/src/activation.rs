//! Attention activations: elementwise sigmoid or softmax across the `R + 1`
//! channels of each pixel. The propagation kernel consumes activated values
//! only; these helpers turn raw logits into an [`AttentionStack`] and pull
//! cotangents back through the activation.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::volume::AttentionStack;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "softmax" => Ok(Activation::Softmax),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
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

fn check_len(what: &str, len: usize, steps: usize, rings: usize, h: usize, w: usize) -> Result<()> {
    let expected = steps * rings * h * w;
    if len != expected {
        return Err(Error::shape(
            what,
            format!("{steps}x{rings}x{h}x{w}"),
            format!("{len} values"),
        ));
    }
    Ok(())
}

/// Activates raw logits laid out `[T, R + 1, H, W]`.
pub fn activate(
    kind: Activation,
    logits: &[f64],
    steps: usize,
    rings: usize,
    height: usize,
    width: usize,
) -> Result<AttentionStack> {
    check_len("attention logits", logits.len(), steps, rings, height, width)?;
    if let Some(bad) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "attention logits",
            format!("non-finite value at index {bad}"),
        ));
    }
    let hw = height * width;
    let values = match kind {
        Activation::Sigmoid => logits.iter().map(|&x| sigmoid(x)).collect(),
        Activation::Softmax => {
            let mut out = vec![0.0; logits.len()];
            for t in 0..steps {
                let base = t * rings * hw;
                for p in 0..hw {
                    let at = |r: usize| base + r * hw + p;
                    let m = (0..rings).map(|r| logits[at(r)]).fold(f64::NEG_INFINITY, f64::max);
                    let mut z = 0.0;
                    for r in 0..rings {
                        let e = (logits[at(r)] - m).exp();
                        out[at(r)] = e;
                        z += e;
                    }
                    for r in 0..rings {
                        out[at(r)] /= z;
                    }
                }
            }
            out
        }
    };
    AttentionStack::new(steps, rings, height, width, values)
}

/// Vector-Jacobian product: maps `d loss / d pi` to `d loss / d logits`,
/// given the activated stack.
pub fn activation_vjp(kind: Activation, activated: &AttentionStack, upstream: &[f64]) -> Result<Vec<f64>> {
    let (h, w) = activated.dims();
    let (steps, rings) = (activated.steps(), activated.rings());
    check_len("attention cotangent", upstream.len(), steps, rings, h, w)?;
    let s = activated.values();
    match kind {
        Activation::Sigmoid => Ok(s.iter().zip(upstream).map(|(&s, &g)| g * s * (1.0 - s)).collect()),
        Activation::Softmax => {
            let hw = h * w;
            let mut out = vec![0.0; s.len()];
            for t in 0..steps {
                let base = t * rings * hw;
                for p in 0..hw {
                    let at = |r: usize| base + r * hw + p;
                    let dot: f64 = (0..rings).map(|r| s[at(r)] * upstream[at(r)]).sum();
                    for r in 0..rings {
                        out[at(r)] = s[at(r)] * (upstream[at(r)] - dot);
                    }
                }
            }
            Ok(out)
        }
    }
}
