//! The decoupled propagation kernel.
//!
//! One step updates every pixel as
//!
//! ```text
//! h[t+1] = sum_slots(pi_k * w * h_nb) / D + (pi_0 / D) * h[t] + (1 - S / D) * h[0]
//! S  = pi_0 + sum_slots(pi_k * w)
//! S' = pi_0 + sum_slots(pi_k * |w|)
//! D  = S' + epsilon
//! ```
//!
//! where the sums run over in-bounds slots only. In reference mode
//! (`epsilon == 0`) a pixel with `S' == 0` returns `h[0]`.
//!
//! Rows are processed in parallel. Each pixel is reduced in a fixed slot
//! order, so results do not depend on the thread count.

use std::borrow::Cow;

use num_traits::Float;
use rayon::prelude::*;

use crate::bundle::{validate_bundle, Bundle};
use crate::config::{Precision, PropagationConfig};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::neighborhood::{NeighborhoodSpec, SlotGeometry};
use crate::sampling::{blend, locate, slot_taps, Taps};
use crate::volume::{AffinityVolume, AttentionStack};

/// Rows per rayon task.
const ROWS_PER_TASK: usize = 8;

pub(crate) trait Real: Float + Send + Sync + 'static {
    /// Borrowed when `Self` is f64, so f64 runs never copy their inputs.
    fn narrow(values: &[f64]) -> Cow<'_, [Self]>;
    fn widen(values: Vec<Self>) -> Vec<f64>;
}

impl Real for f32 {
    fn narrow(values: &[f64]) -> Cow<'_, [Self]> {
        Cow::Owned(values.iter().map(|&v| v as f32).collect())
    }

    fn widen(values: Vec<Self>) -> Vec<f64> {
        values.into_iter().map(f64::from).collect()
    }
}

impl Real for f64 {
    fn narrow(values: &[f64]) -> Cow<'_, [Self]> {
        Cow::Borrowed(values)
    }

    fn widen(values: Vec<Self>) -> Vec<f64> {
        values
    }
}

/// Per-pixel normalizers of one recorded step: `S` and `D = S' + epsilon`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepNormalizers {
    pub signed: Vec<f64>,
    pub denom: Vec<f64>,
}

/// Recorded states `h[0] ..= h[N]` of one propagation run, plus the
/// normalizers of every step so the backward pass never re-runs a step.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationTape {
    states: Vec<Grid>,
    normalizers: Vec<StepNormalizers>,
    precision: Precision,
}

impl PropagationTape {
    /// A states-only tape (e.g. reloaded from a dump). It supports metric
    /// curves but not the backward pass.
    pub fn from_states(states: Vec<Grid>, precision: Precision) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(Error::invalid("tape", "at least one state required"));
        };
        if let Some(bad) = states.iter().find(|g| g.dims() != first.dims()) {
            return Err(Error::shape(
                "tape state dims",
                format!("{:?}", first.dims()),
                format!("{:?}", bad.dims()),
            ));
        }
        Ok(Self {
            states,
            normalizers: Vec::new(),
            precision,
        })
    }

    pub fn states(&self) -> &[Grid] {
        &self.states
    }

    /// Number of recorded steps `N` (states minus one).
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn initial(&self) -> &Grid {
        &self.states[0]
    }

    pub fn last(&self) -> &Grid {
        self.states.last().unwrap()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn recorded_normalizers(&self) -> usize {
        self.normalizers.len()
    }

    /// Normalizers of step `t`, if recorded.
    pub fn normalizers(&self, t: usize) -> Option<&StepNormalizers> {
        self.normalizers.get(t)
    }
}

/// Neighbor values sampled from one state, layout `[K, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborSamples {
    pub values: Vec<f64>,
    pub in_bounds: Vec<bool>,
}

pub fn gather_neighbors(state: &Grid, spec: &NeighborhoodSpec) -> Result<NeighborSamples> {
    if state.dims() != spec.dims() {
        return Err(Error::shape(
            "state dims",
            format!("{:?}", spec.dims()),
            format!("{:?}", state.dims()),
        ));
    }
    let (height, width) = state.dims();
    let plane = height * width;
    let k = spec.neighbor_count();
    let mut values = vec![0.0; k * plane];
    let mut in_bounds = vec![false; k * plane];
    for slot in 0..k {
        for i in 0..height {
            for j in 0..width {
                if let Some(taps) = slot_taps(spec, slot, i, j) {
                    let idx = slot * plane + i * width + j;
                    values[idx] = taps.sample(state.values());
                    in_bounds[idx] = true;
                }
            }
        }
    }
    Ok(NeighborSamples { values, in_bounds })
}

/// Per-pixel coefficients of one step: the output is
/// `sum(coef * sample) + self_coef * h[t] + replacement * h[0]`.
#[derive(Clone, Debug)]
pub struct PixelCoefficients {
    pub neighbors: Vec<(Taps, f64)>,
    pub self_coef: f64,
    pub replacement: f64,
}

impl PixelCoefficients {
    /// Total mass over neighbor taps, the self term and the replacement term.
    pub fn total(&self) -> f64 {
        let nb: f64 = self
            .neighbors
            .iter()
            .map(|(taps, c)| c * taps.iter().map(|(_, w)| w).sum::<f64>())
            .sum();
        nb + self.self_coef + self.replacement
    }
}

/// Coefficients of step `t` at `pixel`, in f64.
pub fn pixel_coefficients(bundle: &Bundle<'_>, t: usize, pixel: usize) -> PixelCoefficients {
    let spec = bundle.spec;
    let (height, width) = spec.dims();
    let plane = height * width;
    let (i, j) = (pixel / width, pixel % width);
    let attn = bundle.attention.step_slice(t);
    let pi0 = if bundle.config.suppression { attn[pixel] } else { 0.0 };
    let mut s = pi0;
    let mut s_abs = pi0;
    let mut raw = Vec::new();
    for slot in 0..spec.neighbor_count() {
        let Some(taps) = slot_taps(spec, slot, i, j) else {
            continue;
        };
        let pi = attn[spec.slot_ring(slot) * plane + pixel];
        let w = bundle.affinity.weight(slot, pixel);
        s += pi * w;
        s_abs += pi * w.abs();
        raw.push((taps, pi * w));
    }
    let denom = s_abs + bundle.config.epsilon;
    if denom == 0.0 {
        return PixelCoefficients {
            neighbors: raw.into_iter().map(|(t, _)| (t, 0.0)).collect(),
            self_coef: 0.0,
            replacement: 1.0,
        };
    }
    PixelCoefficients {
        neighbors: raw.into_iter().map(|(t, c)| (t, c / denom)).collect(),
        self_coef: pi0 / denom,
        replacement: 1.0 - s / denom,
    }
}

/// Where a slot's neighbor comes from. Geometry is fixed across steps, so
/// deformable samples are located once per run.
enum Source {
    Fixed {
        dy: isize,
        dx: isize,
    },
    /// Per pixel: top-left support index (`u32::MAX` when out of bounds)
    /// and the bilinear fractions.
    Located {
        index: Vec<u32>,
        fy: Vec<f64>,
        fx: Vec<f64>,
    },
}

struct SlotPlan {
    ring: usize,
    source: Source,
}

fn locate_slot(spec: &NeighborhoodSpec, ring: usize, slot: usize) -> Source {
    let (h, w) = spec.dims();
    let field = spec.offset_field().expect("deformable spec carries offsets");
    let (dys, dxs) = field.planes(ring, slot);
    assert!(h * w < u32::MAX as usize, "grid too large for 32-bit sample indices");
    let mut index = vec![u32::MAX; h * w];
    let (mut fy, mut fx) = (vec![0.0; h * w], vec![0.0; h * w]);
    for p in 0..h * w {
        let (row, col) = ((p / w) as f64, (p % w) as f64);
        if let Some((q, a, b)) = locate(row + dys[p], col + dxs[p], h, w) {
            index[p] = q as u32;
            fy[p] = a;
            fx[p] = b;
        }
    }
    Source::Located { index, fy, fx }
}

struct Kernel<'a, T: Real> {
    height: usize,
    width: usize,
    slots: Vec<SlotPlan>,
    affinity: Cow<'a, [T]>,
    epsilon: T,
    suppression: bool,
}

impl<'a, T: Real> Kernel<'a, T> {
    fn new(spec: &NeighborhoodSpec, affinity: &'a AffinityVolume, config: &PropagationConfig) -> Self {
        let (height, width) = spec.dims();
        let slots = spec
            .slots()
            .iter()
            .enumerate()
            .map(|(slot, geometry)| SlotPlan {
                ring: spec.slot_ring(slot),
                source: match *geometry {
                    SlotGeometry::Fixed { dy, dx } => Source::Fixed {
                        dy: dy as isize,
                        dx: dx as isize,
                    },
                    SlotGeometry::Deformable { ring, slot } => locate_slot(spec, ring, slot),
                },
            })
            .collect();
        Self {
            height,
            width,
            slots,
            affinity: T::narrow(affinity.weights()),
            epsilon: T::from(config.epsilon).unwrap(),
            suppression: config.suppression,
        }
    }

    /// Returns `(h[t+1], S, D)`.
    ///
    /// Each row block accumulates slot by slot; every pixel still sees its
    /// slots in the fixed order, so blocking does not change any sum.
    fn step(&self, state: &[T], initial: &[T], attn: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let (h, w) = (self.height, self.width);
        let plane = h * w;
        let (mut out, mut signed, mut denom) = (vec![T::zero(); plane], vec![T::zero(); plane], vec![T::zero(); plane]);
        let chunk = w * ROWS_PER_TASK;
        out.par_chunks_mut(chunk)
            .zip(signed.par_chunks_mut(chunk))
            .zip(denom.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(block, ((out, s), s_abs))| {
                let base = block * chunk;
                let len = out.len();
                let row0 = block * ROWS_PER_TASK;
                let mut num = vec![T::zero(); len];
                for local in 0..len {
                    let pi0 = if self.suppression {
                        attn[base + local]
                    } else {
                        T::zero()
                    };
                    s[local] = pi0;
                    s_abs[local] = pi0;
                }
                for (slot, plan) in self.slots.iter().enumerate() {
                    let pis = &attn[plan.ring * plane..(plan.ring + 1) * plane];
                    let ws = &self.affinity[slot * plane..(slot + 1) * plane];
                    match &plan.source {
                        &Source::Fixed { dy, dx } => {
                            let lo = (-dx).max(0) as usize;
                            let hi = (w as isize - dx).clamp(0, w as isize) as usize;
                            if lo >= hi {
                                continue;
                            }
                            for r in 0..len / w {
                                let nr = (row0 + r) as isize + dy;
                                if nr < 0 || nr >= h as isize {
                                    continue;
                                }
                                let (l0, p0) = (r * w + lo, base + r * w + lo);
                                let n = hi - lo;
                                let q0 = (nr as usize * w + lo) as isize + dx;
                                let nb = &state[q0 as usize..q0 as usize + n];
                                let (pi, wt) = (&pis[p0..p0 + n], &ws[p0..p0 + n]);
                                let acc = num[l0..l0 + n]
                                    .iter_mut()
                                    .zip(&mut s[l0..l0 + n])
                                    .zip(&mut s_abs[l0..l0 + n]);
                                for (k, ((nm, sk), ak)) in acc.enumerate() {
                                    let pw = pi[k] * wt[k];
                                    *nm = *nm + pw * nb[k];
                                    *sk = *sk + pw;
                                    *ak = *ak + pi[k] * wt[k].abs();
                                }
                            }
                        }
                        Source::Located { index, fy, fx } => {
                            for local in 0..len {
                                let p = base + local;
                                let q = index[p];
                                if q == u32::MAX {
                                    continue;
                                }
                                let nb = blend(state, q as usize, fy[p], fx[p], w);
                                let pw = pis[p] * ws[p];
                                num[local] = num[local] + pw * nb;
                                s[local] = s[local] + pw;
                                s_abs[local] = s_abs[local] + pis[p] * ws[p].abs();
                            }
                        }
                    }
                }
                for local in 0..len {
                    let p = base + local;
                    let pi0 = if self.suppression { attn[p] } else { T::zero() };
                    let d = s_abs[local] + self.epsilon;
                    s_abs[local] = d;
                    out[local] = if d == T::zero() {
                        initial[p]
                    } else {
                        num[local] / d + (pi0 / d) * state[p] + (T::one() - s[local] / d) * initial[p]
                    };
                }
            });
        (out, signed, denom)
    }
}

fn run<T: Real>(bundle: &Bundle<'_>) -> PropagationTape {
    let kernel = Kernel::<T>::new(bundle.spec, bundle.affinity, bundle.config);
    let (h, w) = bundle.initial.dims();
    let initial = T::narrow(bundle.initial.values());
    let mut states = Vec::with_capacity(bundle.config.steps + 1);
    let mut normalizers = Vec::with_capacity(bundle.config.steps);
    states.push(bundle.initial.clone());
    let mut state = initial.to_vec();
    for t in 0..bundle.config.steps {
        let attn = T::narrow(bundle.attention.step_slice(t));
        let (next, signed, denom) = kernel.step(&state, &initial, &attn);
        states.push(Grid::from_kernel(h, w, T::widen(next.clone())));
        state = next;
        normalizers.push(StepNormalizers {
            signed: T::widen(signed),
            denom: T::widen(denom),
        });
    }
    PropagationTape {
        states,
        normalizers,
        precision: bundle.config.precision,
    }
}

/// N-step propagation of a validated bundle.
pub fn propagate_bundle(bundle: &Bundle<'_>) -> (Grid, PropagationTape) {
    let tape = match bundle.config.precision {
        Precision::F64 => run::<f64>(bundle),
        Precision::F32 => run::<f32>(bundle),
    };
    (tape.last().clone(), tape)
}

pub fn propagate(
    initial: &Grid,
    affinity: &AffinityVolume,
    attention: &AttentionStack,
    spec: &NeighborhoodSpec,
    config: &PropagationConfig,
) -> Result<(Grid, PropagationTape)> {
    let bundle = validate_bundle(initial, affinity, attention, spec, config)?;
    Ok(propagate_bundle(&bundle))
}

/// A single update from `state` using the `[R+1, H, W]` attention slice.
pub fn step(
    state: &Grid,
    initial: &Grid,
    affinity: &AffinityVolume,
    attention_step: &[f64],
    spec: &NeighborhoodSpec,
    config: &PropagationConfig,
) -> Result<Grid> {
    let (h, w) = initial.dims();
    if state.dims() != initial.dims() {
        return Err(Error::shape(
            "state dims",
            format!("{h}x{w}"),
            format!("{:?}", state.dims()),
        ));
    }
    let attention = AttentionStack::new(1, spec.ring_count() + 1, h, w, attention_step.to_vec())?;
    let cfg = PropagationConfig { steps: 1, ..*config };
    let bundle = validate_bundle(initial, affinity, &attention, spec, &cfg)?;
    let out = match config.precision {
        Precision::F64 => {
            let k = Kernel::<f64>::new(spec, affinity, &cfg);
            k.step(state.values(), bundle.initial.values(), attention.values()).0
        }
        Precision::F32 => {
            let k = Kernel::<f32>::new(spec, affinity, &cfg);
            let narrow = f32::narrow;
            f32::widen(
                k.step(
                    &narrow(state.values()),
                    &narrow(initial.values()),
                    &narrow(attention.values()),
                )
                .0,
            )
        }
    };
    Ok(Grid::from_kernel(h, w, out))
}

/// Fixed-affinity baseline: every attention value set to one.
pub fn emulate_cspn(
    initial: &Grid,
    affinity: &AffinityVolume,
    spec: &NeighborhoodSpec,
    config: &PropagationConfig,
) -> Result<Grid> {
    let (h, w) = initial.dims();
    let ones = AttentionStack::filled(config.steps.max(1), spec.ring_count() + 1, h, w, 1.0)?;
    propagate(initial, affinity, &ones, spec, config).map(|(out, _)| out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighborhood::{build_neighborhood, OffsetField, Variant};

    /// 1x2 grid where pixel 0 sees pixel 1 through ring-1 slot (0, +1) only.
    fn one_neighbor(w: f64, h_t: [f64; 2], h0: [f64; 2]) -> Grid {
        let spec = build_neighborhood(Variant::Ring7x7, 1, 2, None).unwrap();
        let slot = spec
            .slots()
            .iter()
            .position(|s| *s == crate::neighborhood::SlotGeometry::Fixed { dy: 0, dx: 1 })
            .unwrap();
        let mut weights = vec![0.0; 48 * 2];
        weights[slot * 2] = w;
        let aff = AffinityVolume::new(48, 1, 2, weights).unwrap();
        let attn = vec![1.0; 4 * 2];
        let state = Grid::new(1, 2, h_t.to_vec()).unwrap();
        let initial = Grid::new(1, 2, h0.to_vec()).unwrap();
        step(&state, &initial, &aff, &attn, &spec, &PropagationConfig::reference(1)).unwrap()
    }

    #[test]
    fn single_positive_neighbor() {
        let out = one_neighbor(0.5, [1.0, 2.0], [1.0, 1.0]);
        assert!((out.get(0, 0) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_negative_neighbor() {
        let out = one_neighbor(-0.5, [1.0, 2.0], [3.0, 3.0]);
        assert!((out.get(0, 0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gather_center_and_corner() {
        let spec = build_neighborhood(Variant::Ring7x7, 3, 3, None).unwrap();
        let g = Grid::from_fn(3, 3, |i, j| (i * 3 + j) as f64).unwrap();
        let nb = gather_neighbors(&g, &spec).unwrap();
        let plane = 9;
        let center = 4;
        let mut ring1: Vec<f64> = (0..8).map(|s| nb.values[s * plane + center]).collect();
        ring1.sort_by(f64::total_cmp);
        assert_eq!(ring1, vec![0.0, 1.0, 2.0, 3.0, 5.0, 6.0, 7.0, 8.0]);
        assert!((0..8).all(|s| nb.in_bounds[s * plane + center]));
        let corner_in: usize = (0..8).filter(|&s| nb.in_bounds[s * plane]).count();
        assert_eq!(corner_in, 3);
        // masked samples contribute zero
        assert!((0..8)
            .filter(|&s| !nb.in_bounds[s * plane])
            .all(|s| nb.values[s * plane] == 0.0));
    }

    #[test]
    fn deformable_half_offset_interpolates() {
        // 2x1 grid with values [1, 3]; every deformable slot at pixel 0 looks half a row down
        let mut field = vec![0.0; OffsetField::component_count() * 2];
        for ring in 0..2 {
            for slot in 0..8 {
                let base = ((ring * 8 + slot) * 2) * 2;
                field[base] = 0.5;
                field[base + 1] = 0.5;
            }
        }
        let spec = build_neighborhood(Variant::Deformable, 2, 1, Some(OffsetField::new(2, 1, field).unwrap())).unwrap();
        let g = Grid::new(2, 1, vec![1.0, 3.0]).unwrap();
        let nb = gather_neighbors(&g, &spec).unwrap();
        for slot in 8..24 {
            assert!(nb.in_bounds[slot * 2]);
            assert_eq!(nb.values[slot * 2], 2.0);
            // pixel 1 shifted half a row past the last row is out of bounds
            assert!(!nb.in_bounds[slot * 2 + 1]);
        }
    }

    #[test]
    fn suppression_only_is_identity_up_to_epsilon() {
        let spec = build_neighborhood(Variant::Dilated, 4, 4, None).unwrap();
        let h0 = Grid::from_fn(4, 4, |i, j| 1.0 + (i + 2 * j) as f64).unwrap();
        let state = Grid::from_fn(4, 4, |i, j| 2.0 + (i * j) as f64 * 0.25).unwrap();
        let aff = AffinityVolume::filled(16, 4, 4, 0.7).unwrap();
        let mut attn = vec![0.0; 3 * 16];
        attn[..16].fill(1.0);
        let out = step(&state, &h0, &aff, &attn, &spec, &PropagationConfig::reference(1)).unwrap();
        assert_eq!(out, state);
        let eps = 1e-8;
        let cfg = PropagationConfig {
            epsilon: eps,
            ..PropagationConfig::reference(1)
        };
        let out = step(&state, &h0, &aff, &attn, &spec, &cfg).unwrap();
        for p in 0..16 {
            let drift = eps * (h0.values()[p] - state.values()[p]) / (1.0 + eps);
            assert!((out.values()[p] - state.values()[p] - drift).abs() < 1e-14);
        }
    }

    #[test]
    fn all_zero_attention_returns_initial() {
        let spec = build_neighborhood(Variant::Ring7x7, 3, 4, None).unwrap();
        let h0 = Grid::from_fn(3, 4, |i, j| 1.0 + (i + j) as f64).unwrap();
        let aff = AffinityVolume::filled(48, 3, 4, -0.4).unwrap();
        let attn = AttentionStack::filled(6, 4, 3, 4, 0.0).unwrap();
        for cfg in [PropagationConfig::reference(6), PropagationConfig::with_steps(6)] {
            let (out, tape) = propagate(&h0, &aff, &attn, &spec, &cfg).unwrap();
            assert_eq!(out, h0);
            assert_eq!(tape.steps(), 6);
        }
    }

    #[test]
    fn cspn_with_zero_affinity_is_identity() {
        let spec = build_neighborhood(Variant::Ring7x7, 5, 5, None).unwrap();
        let h0 = Grid::from_fn(5, 5, |i, j| 1.0 + (i * 5 + j) as f64 * 0.1).unwrap();
        let aff = AffinityVolume::filled(48, 5, 5, 0.0).unwrap();
        let out = emulate_cspn(&h0, &aff, &spec, &PropagationConfig::with_steps(9)).unwrap();
        assert_eq!(out, h0);
    }

    #[test]
    fn one_step_propagate_equals_step() {
        let spec = build_neighborhood(Variant::Ring7x7, 4, 4, None).unwrap();
        let h0 = Grid::from_fn(4, 4, |i, j| 1.0 + ((i * 7 + j * 3) % 5) as f64).unwrap();
        let aff =
            AffinityVolume::new(48, 4, 4, (0..48 * 16).map(|n| ((n % 11) as f64 - 4.0) / 10.0).collect()).unwrap();
        let attn = AttentionStack::from_fn(1, 4, 4, 4, |_, k, p| ((k + p) % 4) as f64 / 3.0).unwrap();
        let cfg = PropagationConfig::with_steps(1);
        let (out, _) = propagate(&h0, &aff, &attn, &spec, &cfg).unwrap();
        let single = step(&h0, &h0, &aff, attn.step_slice(0), &spec, &cfg).unwrap();
        assert_eq!(out, single);
    }

    #[test]
    fn f32_tracks_f64() {
        let spec = build_neighborhood(Variant::Ring7x7, 6, 6, None).unwrap();
        let h0 = Grid::from_fn(6, 6, |i, j| 1.0 + ((i * 7 + j * 3) % 5) as f64).unwrap();
        let aff = AffinityVolume::new(48, 6, 6, (0..48 * 36).map(|n| ((n % 13) as f64) / 13.0).collect()).unwrap();
        let attn = AttentionStack::from_fn(6, 4, 6, 6, |t, k, p| ((t + k + p) % 5) as f64 / 4.0).unwrap();
        let c64 = PropagationConfig::with_steps(6);
        let c32 = PropagationConfig {
            precision: Precision::F32,
            ..c64
        };
        let (a, _) = propagate(&h0, &aff, &attn, &spec, &c64).unwrap();
        let (b, t) = propagate(&h0, &aff, &attn, &spec, &c32).unwrap();
        assert_eq!(t.precision(), Precision::F32);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-4 * x.abs());
        }
    }

    #[test]
    fn coefficients_reproduce_step() {
        let spec = build_neighborhood(Variant::Dilated, 5, 5, None).unwrap();
        let h0 = Grid::from_fn(5, 5, |i, j| 1.0 + ((i * 3 + j) % 4) as f64).unwrap();
        let aff = AffinityVolume::new(16, 5, 5, (0..16 * 25).map(|n| ((n % 9) as f64 - 3.0) / 5.0).collect()).unwrap();
        let attn = AttentionStack::from_fn(1, 3, 5, 5, |_, k, p| ((k * 2 + p) % 3) as f64 / 2.0).unwrap();
        let cfg = PropagationConfig::reference(1);
        let bundle = validate_bundle(&h0, &aff, &attn, &spec, &cfg).unwrap();
        let (out, _) = propagate_bundle(&bundle);
        for p in 0..25 {
            let c = pixel_coefficients(&bundle, 0, p);
            let v: f64 = c
                .neighbors
                .iter()
                .map(|(taps, k)| k * taps.sample(h0.values()))
                .sum::<f64>()
                + c.self_coef * h0.values()[p]
                + c.replacement * h0.values()[p];
            assert!((v - out.values()[p]).abs() < 1e-12);
        }
    }
}
