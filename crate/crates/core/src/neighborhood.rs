//! Neighborhood decoupling: the layout of sampled neighbors as distance rings.
//!
//! Each ring shares one attention channel. Slots are numbered globally across
//! rings in ring order, and that numbering is the slot axis of an
//! [`AffinityVolume`](crate::AffinityVolume).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Deformable rings beyond the fixed 3x3 ring.
pub const DEFORMABLE_RINGS: usize = 2;
/// Offsets per deformable ring.
pub const DEFORMABLE_SLOTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Ring7x7,
    Dilated,
    Deformable,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ring7x7, Variant::Dilated, Variant::Deformable];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ring7x7 => "ring7x7",
            Variant::Dilated => "dilated",
            Variant::Deformable => "deformable",
        }
    }

    pub fn ring_count(self) -> usize {
        match self {
            Variant::Ring7x7 | Variant::Deformable => 3,
            Variant::Dilated => 2,
        }
    }

    pub fn neighbor_count(self) -> usize {
        match self {
            Variant::Ring7x7 => 48,
            Variant::Dilated => 16,
            Variant::Deformable => 24,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ring7x7" | "7x7" => Ok(Variant::Ring7x7),
            "dilated" => Ok(Variant::Dilated),
            "deformable" => Ok(Variant::Deformable),
            _ => Err(Error::UnknownVariant(s.to_string())),
        }
    }
}

/// Per-pixel fractional `(dy, dx)` offsets for the deformable rings, layout
/// `[ring, slot, 2, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OffsetField {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl OffsetField {
    pub const fn component_count() -> usize {
        DEFORMABLE_RINGS * DEFORMABLE_SLOTS * 2
    }

    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let expected = Self::component_count() * height * width;
        if height == 0 || width == 0 || values.len() != expected {
            return Err(Error::shape(
                "offset field",
                format!("[{DEFORMABLE_RINGS}, {DEFORMABLE_SLOTS}, 2, {height}, {width}] = {expected} values"),
                values.len(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "offset field",
                format!("non-finite offset at index {i}"),
            ));
        }
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; Self::component_count() * height * width],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `dy` and `dx` planes of one deformable slot, each `H * W` long.
    pub fn planes(&self, ring: usize, slot: usize) -> (&[f64], &[f64]) {
        let plane = self.height * self.width;
        let base = (ring * DEFORMABLE_SLOTS + slot) * 2 * plane;
        (
            &self.values[base..base + plane],
            &self.values[base + plane..base + 2 * plane],
        )
    }

    /// `(dy, dx)` for deformable ring `ring` (0-based among deformable rings).
    #[inline]
    pub fn offset(&self, ring: usize, slot: usize, pixel: usize) -> (f64, f64) {
        let plane = self.height * self.width;
        let base = (ring * DEFORMABLE_SLOTS + slot) * 2 * plane;
        (self.values[base + pixel], self.values[base + plane + pixel])
    }
}

/// Geometry of a single neighbor slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlotGeometry {
    Fixed {
        dy: i32,
        dx: i32,
    },
    /// Index into the offset field: `ring * DEFORMABLE_SLOTS + slot`.
    Deformable {
        ring: usize,
        slot: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ring {
    Fixed(Vec<(i32, i32)>),
    Deformable { field_ring: usize },
}

impl Ring {
    pub fn len(&self) -> usize {
        match self {
            Ring::Fixed(offsets) => offsets.len(),
            Ring::Deformable { .. } => DEFORMABLE_SLOTS,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborhoodSpec {
    variant: Variant,
    height: usize,
    width: usize,
    rings: Vec<Ring>,
    offset_field: Option<OffsetField>,
    slots: Vec<SlotGeometry>,
    /// 1-based ring index per slot (ring 0 is the self channel).
    slot_ring: Vec<usize>,
}

/// Offsets at Chebyshev distance exactly `k`, in row-major order.
fn square_ring(k: i32) -> Vec<(i32, i32)> {
    let mut out = Vec::with_capacity(8 * k as usize);
    for dy in -k..=k {
        for dx in -k..=k {
            if dy.abs().max(dx.abs()) == k {
                out.push((dy, dx));
            }
        }
    }
    out
}

/// `{-d, 0, d}^2 \ {(0, 0)}`.
fn dilated_ring(d: i32) -> Vec<(i32, i32)> {
    let mut out = Vec::with_capacity(8);
    for dy in [-d, 0, d] {
        for dx in [-d, 0, d] {
            if (dy, dx) != (0, 0) {
                out.push((dy, dx));
            }
        }
    }
    out
}

pub fn build_neighborhood(
    variant: Variant,
    height: usize,
    width: usize,
    offset_field: Option<OffsetField>,
) -> Result<NeighborhoodSpec> {
    if height == 0 || width == 0 {
        return Err(Error::shape(
            "neighborhood dims",
            "height >= 1 and width >= 1",
            format!("{height}x{width}"),
        ));
    }
    let rings = match variant {
        Variant::Ring7x7 => (1..=3).map(|k| Ring::Fixed(square_ring(k))).collect::<Vec<_>>(),
        Variant::Dilated => (1..=2).map(|k| Ring::Fixed(dilated_ring(2 * k - 1))).collect(),
        Variant::Deformable => {
            let mut rings = vec![Ring::Fixed(square_ring(1))];
            rings.extend((0..DEFORMABLE_RINGS).map(|field_ring| Ring::Deformable { field_ring }));
            rings
        }
    };
    match (variant, &offset_field) {
        (Variant::Deformable, None) => {
            return Err(Error::shape("offset field", "present for deformable variant", "absent"));
        }
        (Variant::Deformable, Some(field)) if field.dims() != (height, width) => {
            return Err(Error::shape(
                "offset field dims",
                format!("{height}x{width}"),
                format!("{}x{}", field.height, field.width),
            ));
        }
        (Variant::Ring7x7 | Variant::Dilated, Some(_)) => {
            return Err(Error::shape(
                "offset field",
                format!("absent for {variant} variant"),
                "present",
            ));
        }
        _ => {}
    }

    let mut slots = Vec::new();
    let mut slot_ring = Vec::new();
    for (k, ring) in rings.iter().enumerate() {
        match ring {
            Ring::Fixed(offsets) => {
                for &(dy, dx) in offsets {
                    slots.push(SlotGeometry::Fixed { dy, dx });
                    slot_ring.push(k + 1);
                }
            }
            Ring::Deformable { field_ring } => {
                for slot in 0..DEFORMABLE_SLOTS {
                    slots.push(SlotGeometry::Deformable {
                        ring: *field_ring,
                        slot,
                    });
                    slot_ring.push(k + 1);
                }
            }
        }
    }
    debug_assert_eq!(slots.len(), variant.neighbor_count());

    Ok(NeighborhoodSpec {
        variant,
        height,
        width,
        rings,
        offset_field,
        slots,
        slot_ring,
    })
}

impl NeighborhoodSpec {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    /// Neighbor rings, excluding the self channel.
    pub fn ring_count(&self) -> usize {
        self.rings.len()
    }

    pub fn ring_sizes(&self) -> Vec<usize> {
        self.rings.iter().map(Ring::len).collect()
    }

    /// Total sampled neighbors per pixel, `K`.
    pub fn neighbor_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[SlotGeometry] {
        &self.slots
    }

    /// 1-based ring of a slot.
    #[inline]
    pub fn slot_ring(&self, slot: usize) -> usize {
        self.slot_ring[slot]
    }

    pub fn offset_field(&self) -> Option<&OffsetField> {
        self.offset_field.as_ref()
    }

    /// Offset of `slot` as seen from `pixel` (row-major index).
    #[inline]
    pub fn slot_offset(&self, slot: usize, pixel: usize) -> (f64, f64) {
        match self.slots[slot] {
            SlotGeometry::Fixed { dy, dx } => (dy as f64, dx as f64),
            SlotGeometry::Deformable { ring, slot } => self
                .offset_field
                .as_ref()
                .expect("deformable slot without offset field")
                .offset(ring, slot, pixel),
        }
    }

    /// True when every offset, including deformable ones, is integral.
    pub fn has_integer_offsets(&self) -> bool {
        self.offset_field
            .as_ref()
            .is_none_or(|f| f.values.iter().all(|v| v.fract() == 0.0))
    }
}
