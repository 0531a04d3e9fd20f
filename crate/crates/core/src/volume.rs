//! Affinity and attention volumes.

use crate::error::{Error, Result};

/// Raw per-neighbor affinity, layout `[K, H, W]`. Weights may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityVolume {
    neighbors: usize,
    height: usize,
    width: usize,
    weights: Vec<f64>,
}

impl AffinityVolume {
    pub fn new(neighbors: usize, height: usize, width: usize, weights: Vec<f64>) -> Result<Self> {
        let expected = neighbors * height * width;
        if neighbors == 0 || height == 0 || width == 0 || weights.len() != expected {
            return Err(Error::shape(
                "affinity volume",
                format!("[{neighbors}, {height}, {width}] = {expected} values"),
                weights.len(),
            ));
        }
        if let Some(i) = weights.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "affinity volume",
                format!("non-finite weight at index {i}"),
            ));
        }
        Ok(Self {
            neighbors,
            height,
            width,
            weights,
        })
    }

    pub fn filled(neighbors: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(neighbors, height, width, vec![value; neighbors * height * width])
    }

    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, slot: usize, pixel: usize) -> f64 {
        self.weights[slot * self.height * self.width + pixel]
    }
}

/// Post-activation attention, layout `[T, R+1, H, W]`, values in `[0, 1]`.
/// Ring 0 is the self (suppression) channel.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionStack {
    steps: usize,
    rings: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl AttentionStack {
    /// `rings` counts all channels including the self channel.
    pub fn new(steps: usize, rings: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let expected = steps * rings * height * width;
        if steps == 0 || rings < 2 || height == 0 || width == 0 || values.len() != expected {
            return Err(Error::shape(
                "attention stack",
                format!("[{steps}, {rings}, {height}, {width}] = {expected} values with rings >= 2"),
                values.len(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
            return Err(Error::AttentionRange {
                index: i,
                value: values[i],
            });
        }
        Ok(Self {
            steps,
            rings,
            height,
            width,
            values,
        })
    }

    pub fn filled(steps: usize, rings: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(steps, rings, height, width, vec![value; steps * rings * height * width])
    }

    /// Build from a per-`(step, ring, pixel)` function; values are clamped to `[0, 1]`.
    pub fn from_fn(
        steps: usize,
        rings: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let plane = height * width;
        let mut values = Vec::with_capacity(steps * rings * plane);
        for t in 0..steps {
            for k in 0..rings {
                for p in 0..plane {
                    values.push(f(t, k, p).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(steps, rings, height, width, values)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Channels including the self channel, `R + 1`.
    pub fn rings(&self) -> usize {
        self.rings
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `[R+1, H, W]` slice for one step.
    pub fn step_slice(&self, t: usize) -> &[f64] {
        let n = self.rings * self.height * self.width;
        &self.values[t * n..(t + 1) * n]
    }

    #[inline]
    pub fn get(&self, t: usize, ring: usize, pixel: usize) -> f64 {
        let plane = self.height * self.width;
        self.values[(t * self.rings + ring) * plane + pixel]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attention_range_enforced() {
        let mut v = vec![0.5; 2 * 4];
        v[3] = 1.5;
        assert!(matches!(
            AttentionStack::new(1, 2, 2, 2, v),
            Err(Error::AttentionRange { index: 3, .. })
        ));
        // closed interval
        assert!(AttentionStack::new(1, 2, 1, 1, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn attention_layout() {
        let a = AttentionStack::from_fn(2, 3, 1, 2, |t, k, p| (t * 100 + k * 10 + p) as f64 / 1000.0).unwrap();
        assert_eq!(a.get(1, 2, 1), 0.121);
        assert_eq!(a.step_slice(1)[2 * 2 + 1], 0.121);
    }

    #[test]
    fn affinity_shape_and_negative_weights() {
        assert!(AffinityVolume::new(2, 2, 2, vec![-0.3; 8]).is_ok());
        assert!(AffinityVolume::new(2, 2, 2, vec![0.0; 7]).is_err());
        assert!(AffinityVolume::new(1, 1, 1, vec![f64::NAN]).is_err());
        let a = AffinityVolume::new(2, 1, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.weight(1, 0), 3.0);
    }
}
