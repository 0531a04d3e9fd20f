//! Synthetic scenes, sparsification and handcrafted affinity/attention.
//!
//! Everything here is deterministic given its seed. Scenes come with a
//! guidance intensity image whose discontinuities coincide with the depth
//! discontinuities, on top of a smooth shading ramp and a little seeded noise.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::{validate_bundle, Bundle};
use crate::config::PropagationConfig;
use crate::error::{Error, Result};
use crate::grid::{DepthGrid, Grid};
use crate::neighborhood::{
    build_neighborhood, NeighborhoodSpec, OffsetField, Variant, DEFORMABLE_RINGS, DEFORMABLE_SLOTS,
};
use crate::sampling::slot_taps;
use crate::volume::{AffinityVolume, AttentionStack};

/// Vertical shading span of the guidance image.
const SHADING_SPAN: f64 = 0.6;
/// Guidance albedo step across an object boundary.
const BOUNDARY_CONTRAST: f64 = 0.12;
/// Peak-to-peak amplitude of guidance noise.
const GUIDANCE_NOISE: f64 = 0.01;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SceneKind {
    StepEdge,
    SlantedPlanes,
    SphereOnPlane,
}

impl SceneKind {
    pub fn name(self) -> &'static str {
        match self {
            SceneKind::StepEdge => "step-edge",
            SceneKind::SlantedPlanes => "slanted-planes",
            SceneKind::SphereOnPlane => "sphere-on-plane",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step-edge" => Ok(SceneKind::StepEdge),
            "slanted-planes" => Ok(SceneKind::SlantedPlanes),
            "sphere-on-plane" => Ok(SceneKind::SphereOnPlane),
            _ => Err(Error::Config(format!(
                "unknown scene `{s}` (expected step-edge, slanted-planes or sphere-on-plane)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub height: usize,
    pub width: usize,
    /// Depth range in meters, `0 < near < far`.
    pub near: f64,
    pub far: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(kind: SceneKind, height: usize, width: usize, seed: u64) -> Self {
        Self {
            kind,
            height,
            width,
            near: 2.0,
            far: 5.0,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub ground_truth: DepthGrid,
    /// Intensity in `[0, 1]`.
    pub guidance: Grid,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    let (h, w) = (spec.height, spec.width);
    if h < 2 || w < 2 {
        return Err(Error::shape("scene dims", "at least 2x2", format!("{h}x{w}")));
    }
    if !(spec.near > 0.0 && spec.far > spec.near && spec.far.is_finite()) {
        return Err(Error::invalid(
            "scene depth range",
            format!("need 0 < near < far, got {}..{}", spec.near, spec.far),
        ));
    }
    let span = spec.far - spec.near;
    let ry = |i: usize| i as f64 / (h - 1) as f64;
    let rx = |j: usize| j as f64 / (w - 1) as f64;
    let split = w / 2;

    // (depth, region albedo) per pixel
    let sample: Box<dyn Fn(usize, usize) -> (f64, f64)> = match spec.kind {
        SceneKind::StepEdge => Box::new(move |_, j| {
            if j < split {
                (spec.near, 0.0)
            } else {
                (spec.far, BOUNDARY_CONTRAST)
            }
        }),
        SceneKind::SlantedPlanes => Box::new(move |i, j| {
            if j < split {
                (spec.near + 0.4 * span * ry(i), 0.0)
            } else {
                (spec.near + span * (0.5 + 0.5 * rx(j)), BOUNDARY_CONTRAST)
            }
        }),
        SceneKind::SphereOnPlane => {
            let (cy, cx) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
            let radius = 0.3 * h.min(w) as f64;
            Box::new(move |i, j| {
                // floor tilts toward the viewer at the bottom
                let floor = spec.far - 0.3 * span * ry(i);
                let d2 = (i as f64 - cy).powi(2) + (j as f64 - cx).powi(2);
                if d2 < radius * radius {
                    let bulge = (1.0 - d2 / (radius * radius)).sqrt();
                    (
                        spec.near + 0.3 * span * (1.0 - bulge),
                        BOUNDARY_CONTRAST * (0.5 + 0.5 * bulge),
                    )
                } else {
                    (floor, 0.0)
                }
            })
        }
    };

    let mut noise = rng(spec.seed);
    let mut depth = Vec::with_capacity(h * w);
    let mut guidance = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let (d, albedo) = sample(i, j);
            depth.push(d);
            let n = GUIDANCE_NOISE * (noise.gen::<f64>() - 0.5);
            guidance.push((0.1 + SHADING_SPAN * ry(i) + albedo + n).clamp(0.0, 1.0));
        }
    }
    Ok(Scene {
        ground_truth: DepthGrid::new(h, w, depth)?,
        guidance: Grid::new(h, w, guidance)?,
    })
}

/// Number of pixels kept by [`sparsify`] for `rate` over `pixels`.
pub fn sample_count(rate: f64, pixels: usize) -> usize {
    // absorbs representation error of rates written as count / pixels
    (rate * pixels as f64 + 1e-9).floor() as usize
}

/// Keep `floor(rate * H * W)` uniformly chosen valid pixels, zero the rest.
pub fn sparsify(gt: &DepthGrid, rate: f64, seed: u64) -> Result<DepthGrid> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::invalid(
            "sparsity rate",
            format!("must be in (0, 1], got {rate}"),
        ));
    }
    let valid: Vec<usize> = (0..gt.len()).filter(|&p| gt.is_valid(p)).collect();
    let count = sample_count(rate, gt.len()).min(valid.len());
    let mut out = vec![0.0; gt.len()];
    for n in rand::seq::index::sample(&mut rng(seed), valid.len(), count) {
        let p = valid[n];
        out[p] = gt.values()[p];
    }
    DepthGrid::new(gt.height(), gt.width(), out)
}

/// Dense fill from the nearest valid pixel (Euclidean; ties broken by the
/// lower row, then the lower column).
pub fn nearest_fill(sparse: &DepthGrid) -> Result<DepthGrid> {
    let (h, w) = sparse.dims();
    if sparse.valid_count() == 0 {
        return Err(Error::NoValidPixels);
    }
    let values = sparse.values();
    let mut out = Vec::with_capacity(h * w);
    let max_radius = h.max(w) as i64;
    for i in 0..h as i64 {
        for j in 0..w as i64 {
            let mut best: Option<(i64, i64, i64)> = None;
            for r in 0..=max_radius {
                if let Some((d2, _, _)) = best {
                    if r * r > d2 {
                        break;
                    }
                }
                for y in (i - r).max(0)..=(i + r).min(h as i64 - 1) {
                    let edge_row = (y - i).abs() == r;
                    let mut visit = |x: i64| {
                        if x < 0 || x >= w as i64 || values[(y * w as i64 + x) as usize] <= 0.0 {
                            return;
                        }
                        let key = ((y - i).pow(2) + (x - j).pow(2), y, x);
                        if best.is_none_or(|b| key < b) {
                            best = Some(key);
                        }
                    };
                    if edge_row {
                        for x in (j - r)..=(j + r) {
                            visit(x);
                        }
                    } else {
                        visit(j - r);
                        if r > 0 {
                            visit(j + r);
                        }
                    }
                }
            }
            let (_, y, x) = best.expect("at least one valid pixel");
            out.push(values[(y * w as i64 + x) as usize]);
        }
    }
    DepthGrid::new(h, w, out)
}

/// `w = exp(-|I_nb - I_p| / sigma)` for every in-bounds slot, zero elsewhere.
pub fn edge_affinity(guidance: &Grid, spec: &NeighborhoodSpec, sigma: f64) -> Result<AffinityVolume> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::invalid("sigma", format!("must be > 0, got {sigma}")));
    }
    if guidance.dims() != spec.dims() {
        return Err(Error::shape(
            "guidance dims",
            format!("{:?}", spec.dims()),
            format!("{:?}", guidance.dims()),
        ));
    }
    let (h, w) = guidance.dims();
    let k = spec.neighbor_count();
    let mut weights = vec![0.0; k * h * w];
    for slot in 0..k {
        for i in 0..h {
            for j in 0..w {
                if let Some(taps) = slot_taps(spec, slot, i, j) {
                    let p = i * w + j;
                    let diff = (taps.sample(guidance.values()) - guidance.values()[p]).abs();
                    weights[slot * h * w + p] = (-diff / sigma).exp();
                }
            }
        }
    }
    AffinityVolume::new(k, h, w, weights)
}

/// Default affinity bandwidth: a tenth of the guidance dynamic range.
pub fn default_sigma(guidance: &Grid) -> f64 {
    let range = guidance.max() - guidance.min();
    if range > 0.0 {
        0.1 * range
    } else {
        0.1
    }
}

/// Local contrast in `[0, 1]`: the largest absolute difference to any
/// 8-neighbor, normalized by the image maximum.
pub fn edge_strength(guidance: &Grid) -> Grid {
    let (h, w) = guidance.dims();
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let c = guidance.get(i, j);
            let mut m: f64 = 0.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (y, x) = (i as i64 + dy, j as i64 + dx);
                    if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                        m = m.max((guidance.get(y as usize, x as usize) - c).abs());
                    }
                }
            }
            out[i * w + j] = m;
        }
    }
    let peak = out.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    Grid::from_kernel(h, w, out)
}

/// Exponential approach from `start` to `target`: `target + (start - target) * rate^t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Curve {
    pub start: f64,
    pub target: f64,
    pub rate: f64,
}

impl Curve {
    pub fn constant(value: f64) -> Self {
        Self {
            start: value,
            target: value,
            rate: 0.0,
        }
    }

    pub fn at(&self, t: usize) -> f64 {
        self.target + (self.start - self.target) * self.rate.powi(t as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeModulation {
    /// Per-pixel edge strength in `[0, 1]`.
    pub strength_map: Grid,
    /// How strongly edges shrink the far rings and raise the self channel.
    pub gain: f64,
}

/// Scalar attention curves per channel. `channels[0]` is the self channel.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionSchedule {
    pub channels: Vec<Curve>,
    pub edges: Option<EdgeModulation>,
}

impl AttentionSchedule {
    pub fn constant(value: f64, rings: usize) -> Self {
        Self {
            channels: vec![Curve::constant(value); rings + 1],
            edges: None,
        }
    }

    /// Self channel grows while every neighbor ring fades, the farther rings
    /// faster, so ring 1 gains weight relative to the far rings and the
    /// self channel takes over once the map has settled.
    ///
    /// Affinities here are O(1) per neighbor, so suppression only wins once
    /// the neighbor rings themselves have faded.
    pub fn far_decay(rings: usize) -> Self {
        let mut channels = vec![
            Curve {
                start: 0.1,
                target: 1.0,
                rate: 0.6,
            },
            Curve {
                start: 1.0,
                target: 0.0,
                rate: 0.5,
            },
        ];
        for k in 2..=rings {
            channels.push(Curve {
                start: 1.0,
                target: 0.0,
                rate: 0.8 / k as f64,
            });
        }
        Self { channels, edges: None }
    }

    pub fn with_edges(mut self, strength_map: Grid, gain: f64) -> Self {
        self.edges = Some(EdgeModulation { strength_map, gain });
        self
    }

    pub fn rings(&self) -> usize {
        self.channels.len() - 1
    }
}

pub fn schedule_by_name(name: &str, rings: usize) -> Result<AttentionSchedule> {
    match name {
        "far-decay" => Ok(AttentionSchedule::far_decay(rings)),
        "constant" | "ones" => Ok(AttentionSchedule::constant(1.0, rings)),
        _ => Err(Error::Config(format!(
            "unknown schedule `{name}` (expected far-decay or constant)"
        ))),
    }
}

pub fn schedule_attention(
    schedule: &AttentionSchedule,
    steps: usize,
    spec: &NeighborhoodSpec,
) -> Result<AttentionStack> {
    if schedule.rings() != spec.ring_count() {
        return Err(Error::RingCount {
            attention: schedule.rings(),
            neighborhood: spec.ring_count(),
        });
    }
    let (h, w) = spec.dims();
    if let Some(e) = &schedule.edges {
        if e.strength_map.dims() != (h, w) {
            return Err(Error::shape(
                "edge map dims",
                format!("{h}x{w}"),
                format!("{:?}", e.strength_map.dims()),
            ));
        }
    }
    AttentionStack::from_fn(steps, schedule.channels.len(), h, w, |t, k, p| {
        let base = schedule.channels[k].at(t);
        match &schedule.edges {
            None => base,
            Some(e) => {
                let s = (e.gain * e.strength_map.values()[p]).clamp(0.0, 1.0);
                match k {
                    0 => base + s * (1.0 - base),
                    1 => base,
                    _ => base * (1.0 - s),
                }
            }
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightSign {
    Signed,
    NonNegative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomBundleOptions {
    pub variant: Variant,
    pub height: usize,
    pub width: usize,
    pub steps: usize,
    pub weights: WeightSign,
    /// Lower bound on `|w|` and distance of attention from 0 and 1.
    pub margin: f64,
    /// Deformable offsets restricted to integers.
    pub integer_offsets: bool,
    /// Largest deformable offset magnitude, in pixels.
    pub max_offset: f64,
}

impl RandomBundleOptions {
    pub fn new(variant: Variant, height: usize, width: usize, steps: usize) -> Self {
        Self {
            variant,
            height,
            width,
            steps,
            weights: WeightSign::Signed,
            margin: 0.0,
            integer_offsets: false,
            max_offset: 3.0,
        }
    }
}

/// Owned inputs of one propagation problem.
#[derive(Clone, Debug, PartialEq)]
pub struct OwnedBundle {
    pub initial: Grid,
    pub affinity: AffinityVolume,
    pub attention: AttentionStack,
    pub spec: NeighborhoodSpec,
}

impl OwnedBundle {
    pub fn bundle<'a>(&'a self, config: &'a PropagationConfig) -> Result<Bundle<'a>> {
        validate_bundle(&self.initial, &self.affinity, &self.attention, &self.spec, config)
    }
}

pub fn random_offsets(height: usize, width: usize, max_offset: f64, integer: bool, rng: &mut impl Rng) -> OffsetField {
    let n = OffsetField::component_count() * height * width;
    let values = (0..n)
        .map(|_| {
            if integer {
                let m = max_offset.floor() as i64;
                rng.gen_range(-m..=m) as f64
            } else {
                rng.gen_range(-max_offset..=max_offset)
            }
        })
        .collect();
    OffsetField::new(height, width, values).expect("offset field shape")
}

/// Deformable rings sampled on circles of radius 2 and 3 around the pixel,
/// one slot per 45 degrees, each offset jittered by up to `jitter` pixels.
pub fn radial_offsets(height: usize, width: usize, jitter: f64, seed: u64) -> OffsetField {
    let mut r = rng(seed);
    let plane = height * width;
    let mut values = vec![0.0; OffsetField::component_count() * plane];
    for ring in 0..DEFORMABLE_RINGS {
        let radius = (ring + 2) as f64;
        for slot in 0..DEFORMABLE_SLOTS {
            let angle = slot as f64 * std::f64::consts::FRAC_PI_4;
            let base = (ring * DEFORMABLE_SLOTS + slot) * 2 * plane;
            for p in 0..plane {
                let mut j = || {
                    if jitter > 0.0 {
                        r.gen_range(-jitter..=jitter)
                    } else {
                        0.0
                    }
                };
                values[base + p] = radius * angle.sin() + j();
                values[base + plane + p] = radius * angle.cos() + j();
            }
        }
    }
    OffsetField::new(height, width, values).expect("offset field shape")
}

pub fn random_bundle(opts: &RandomBundleOptions, seed: u64) -> OwnedBundle {
    let mut rng = rng(seed);
    let (h, w) = (opts.height, opts.width);
    let field = (opts.variant == Variant::Deformable)
        .then(|| random_offsets(h, w, opts.max_offset, opts.integer_offsets, &mut rng));
    let spec = build_neighborhood(opts.variant, h, w, field).expect("neighborhood");
    let initial = Grid::new(h, w, (0..h * w).map(|_| rng.gen_range(1.0..5.0)).collect()).unwrap();
    let k = spec.neighbor_count();
    let margin = opts.margin;
    let weights = (0..k * h * w)
        .map(|_| {
            let mag = margin + (1.0 - margin) * rng.gen::<f64>();
            match opts.weights {
                WeightSign::NonNegative => mag,
                WeightSign::Signed => {
                    if rng.gen::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                }
            }
        })
        .collect();
    let affinity = AffinityVolume::new(k, h, w, weights).unwrap();
    let rings = spec.ring_count() + 1;
    let attention = AttentionStack::new(
        opts.steps,
        rings,
        h,
        w,
        (0..opts.steps * rings * h * w)
            .map(|_| margin + (1.0 - 2.0 * margin) * rng.gen::<f64>())
            .collect(),
    )
    .unwrap();
    OwnedBundle {
        initial,
        affinity,
        attention,
        spec,
    }
}
