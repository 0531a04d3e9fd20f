//! Dense-matrix propagation on the vectorized grid.
//!
//! The grid is flattened column-first, `v[j * m + i] = h[i][j]`, and one step
//! becomes `v[t+1] = G[t] v[t] + r[t] .* v[0]`. `G[t]` carries the normalized
//! adaptive affinity off the diagonal and the self mass on it; `r[t]` is the
//! per-pixel replacement coefficient `1 - S / D`.
//!
//! This module is a test fixture: storage is dense and the grid is capped at
//! [`MAX_PIXELS`]. It shares no code with the stencil kernel.

use nalgebra::{DMatrix, DVector};

use crate::bundle::validate_bundle;
use crate::config::PropagationConfig;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::neighborhood::{NeighborhoodSpec, SlotGeometry};
use crate::volume::{AffinityVolume, AttentionStack};

pub const MAX_PIXELS: usize = 4096;

#[derive(Clone, Debug)]
pub struct TransformMatrix {
    height: usize,
    width: usize,
    pub matrix: DMatrix<f64>,
    pub replacement: DVector<f64>,
}

impl TransformMatrix {
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// The suppression diagonal `I - D`: the self mass of every pixel.
    pub fn suppression_diagonal(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.matrix.diagonal())
    }

    /// Row sums of `G` plus the replacement coefficient.
    pub fn affine_row_sums(&self) -> DVector<f64> {
        let ones = DVector::from_element(self.matrix.ncols(), 1.0);
        &self.matrix * ones + &self.replacement
    }

    pub fn apply(&self, state: &DVector<f64>, initial: &DVector<f64>) -> DVector<f64> {
        &self.matrix * state + self.replacement.component_mul(initial)
    }
}

#[inline]
pub fn vec_index(height: usize, row: usize, col: usize) -> usize {
    col * height + row
}

pub fn vectorize(grid: &Grid) -> DVector<f64> {
    let (m, n) = grid.dims();
    DVector::from_fn(m * n, |v, _| grid.get(v % m, v / m))
}

pub fn unvectorize(v: &DVector<f64>, height: usize, width: usize) -> Result<Grid> {
    Grid::from_fn(height, width, |i, j| v[vec_index(height, i, j)])
}

fn check_size(height: usize, width: usize) -> Result<()> {
    let pixels = height * width;
    if pixels > MAX_PIXELS {
        return Err(Error::OracleSizeLimit {
            pixels,
            limit: MAX_PIXELS,
        });
    }
    Ok(())
}

/// Integer neighbor position of `slot` seen from `(row, col)`, or `None` if it
/// falls outside the grid.
fn neighbor_position(spec: &NeighborhoodSpec, slot: usize, row: usize, col: usize) -> Result<Option<(usize, usize)>> {
    let (m, n) = spec.dims();
    let (dy, dx) = match spec.slots()[slot] {
        SlotGeometry::Fixed { dy, dx } => (dy as f64, dx as f64),
        SlotGeometry::Deformable { .. } => spec.slot_offset(slot, row * n + col),
    };
    if dy.fract() != 0.0 || dx.fract() != 0.0 {
        return Err(Error::FractionalOffset { row, col, dy, dx });
    }
    let (r, c) = (row as f64 + dy, col as f64 + dx);
    if r < 0.0 || c < 0.0 || r >= m as f64 || c >= n as f64 {
        return Ok(None);
    }
    Ok(Some((r as usize, c as usize)))
}

/// Assemble `G[t]` and `r[t]` from one `[R+1, H, W]` attention slice.
///
/// With `suppression == false` the self channel is dropped and the diagonal
/// carries no self mass.
pub fn build_transform(
    dims: (usize, usize),
    affinity: &AffinityVolume,
    attention_step: &[f64],
    spec: &NeighborhoodSpec,
    epsilon: f64,
    suppression: bool,
) -> Result<TransformMatrix> {
    let (m, n) = dims;
    check_size(m, n)?;
    if spec.dims() != dims || affinity.dims() != dims {
        return Err(Error::shape(
            "transform dims",
            format!("{m}x{n}"),
            format!("{:?}", spec.dims()),
        ));
    }
    let plane = m * n;
    if attention_step.len() != (spec.ring_count() + 1) * plane {
        return Err(Error::shape(
            "attention slice",
            (spec.ring_count() + 1) * plane,
            attention_step.len(),
        ));
    }
    let mut matrix = DMatrix::zeros(plane, plane);
    let mut replacement = DVector::zeros(plane);
    for j in 0..n {
        for i in 0..m {
            let pixel = i * n + j;
            let row = vec_index(m, i, j);
            let pi0 = if suppression { attention_step[pixel] } else { 0.0 };
            let mut signed = pi0;
            let mut absolute = pi0;
            let mut entries = Vec::new();
            for slot in 0..spec.neighbor_count() {
                let Some((a, b)) = neighbor_position(spec, slot, i, j)? else {
                    continue;
                };
                let pi = attention_step[spec.slot_ring(slot) * plane + pixel];
                let w = affinity.weight(slot, pixel);
                signed += pi * w;
                absolute += pi * w.abs();
                entries.push((vec_index(m, a, b), pi * w));
            }
            let denom = absolute + epsilon;
            if denom == 0.0 {
                replacement[row] = 1.0;
                continue;
            }
            for (col, adaptive) in entries {
                matrix[(row, col)] += adaptive / denom;
            }
            matrix[(row, row)] += pi0 / denom;
            replacement[row] = 1.0 - signed / denom;
        }
    }
    Ok(TransformMatrix {
        height: m,
        width: n,
        matrix,
        replacement,
    })
}

/// Global attention matrix `K[t]`: the ring attention at every sampled
/// neighbor position, zero on the diagonal.
pub fn attention_matrix(attention_step: &[f64], spec: &NeighborhoodSpec) -> Result<DMatrix<f64>> {
    let (m, n) = spec.dims();
    check_size(m, n)?;
    let plane = m * n;
    let mut k = DMatrix::zeros(plane, plane);
    for i in 0..m {
        for j in 0..n {
            let row = vec_index(m, i, j);
            for slot in 0..spec.neighbor_count() {
                let Some((a, b)) = neighbor_position(spec, slot, i, j)? else {
                    continue;
                };
                let col = vec_index(m, a, b);
                if col != row {
                    k[(row, col)] = attention_step[spec.slot_ring(slot) * plane + i * n + j];
                }
            }
        }
    }
    Ok(k)
}

/// Raw affinity matrix `A`: `w` at every sampled neighbor position.
pub fn affinity_matrix(affinity: &AffinityVolume, spec: &NeighborhoodSpec) -> Result<DMatrix<f64>> {
    let (m, n) = spec.dims();
    check_size(m, n)?;
    let plane = m * n;
    let mut a = DMatrix::zeros(plane, plane);
    for i in 0..m {
        for j in 0..n {
            let row = vec_index(m, i, j);
            for slot in 0..spec.neighbor_count() {
                let Some((r, c)) = neighbor_position(spec, slot, i, j)? else {
                    continue;
                };
                let col = vec_index(m, r, c);
                if col != row {
                    a[(row, col)] += affinity.weight(slot, i * n + j);
                }
            }
        }
    }
    Ok(a)
}

pub fn oracle_propagate(
    initial: &Grid,
    affinity: &AffinityVolume,
    attention: &AttentionStack,
    spec: &NeighborhoodSpec,
    config: &PropagationConfig,
) -> Result<Grid> {
    let (m, n) = initial.dims();
    check_size(m, n)?;
    let check_cfg = PropagationConfig {
        steps: config.steps.max(1),
        ..*config
    };
    validate_bundle(initial, affinity, attention, spec, &check_cfg)?;
    let v0 = vectorize(initial);
    let mut v = v0.clone();
    for t in 0..config.steps {
        let g = build_transform(
            (m, n),
            affinity,
            attention.step_slice(t),
            spec,
            config.epsilon,
            config.suppression,
        )?;
        v = g.apply(&v, &v0);
    }
    unvectorize(&v, m, n)
}

/// `L[t] = I - G[t]`, so that `v[t+1] - v[t] = -L[t] v[t] + r[t] .* v[0]`.
#[derive(Clone, Debug)]
pub struct Laplacian {
    pub matrix: DMatrix<f64>,
    pub replacement: DVector<f64>,
}

pub fn laplacian_of(transform: &TransformMatrix) -> Laplacian {
    let size = transform.matrix.nrows();
    Laplacian {
        matrix: DMatrix::identity(size, size) - &transform.matrix,
        replacement: transform.replacement.clone(),
    }
}

impl Laplacian {
    /// Row sums of `L` minus the replacement coefficient; zero whenever the
    /// step is an affine combination.
    pub fn folded_row_sums(&self) -> DVector<f64> {
        let ones = DVector::from_element(self.matrix.ncols(), 1.0);
        &self.matrix * ones - &self.replacement
    }

    /// Smallest left edge of the Gershgorin discs. Nonnegative implies every
    /// eigenvalue has nonnegative real part.
    pub fn gershgorin_min_real(&self) -> f64 {
        self.matrix
            .row_iter()
            .enumerate()
            .map(|(p, row)| {
                let radius: f64 = row
                    .iter()
                    .enumerate()
                    .filter(|(q, _)| *q != p)
                    .map(|(_, v)| v.abs())
                    .sum();
                row[p] - radius
            })
            .fold(f64::INFINITY, f64::min)
    }
}
