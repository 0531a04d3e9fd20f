//! Neighbor sampling with bilinear taps.
//!
//! A sample at `(i + dy, j + dx)` is described by up to four `(pixel, weight)`
//! taps. Only pixels with nonzero bilinear weight belong to the support, so an
//! integral offset is a single tap of weight one and reads the pixel exactly.
//! If any pixel of the support lies outside the grid the whole sample is
//! out of bounds.

use crate::neighborhood::{NeighborhoodSpec, SlotGeometry};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taps {
    len: usize,
    index: [usize; 4],
    weight: [f64; 4],
}

impl Taps {
    fn single(index: usize) -> Self {
        Self {
            len: 1,
            index: [index, 0, 0, 0],
            weight: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |n| (self.index[n], self.weight[n]))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn sample<T: num_traits::Float>(&self, values: &[T]) -> T {
        if self.len == 1 {
            return values[self.index[0]];
        }
        let mut acc = T::zero();
        for n in 0..self.len {
            acc = acc + T::from(self.weight[n]).unwrap() * values[self.index[n]];
        }
        acc
    }
}

/// `x.floor()` as an integer, without the libm call baseline x86-64 would
/// emit and branch-free (the sign of random offsets defeats prediction).
/// Out-of-range values saturate, which is off the grid either way.
#[inline]
fn floor(x: f64) -> i64 {
    let t = x as i64;
    t.saturating_sub(i64::from(t as f64 > x))
}

/// Axis support for a coordinate: `(first, second, frac)` where `second` is
/// absent when the coordinate is integral.
#[inline]
fn axis_support(coord: f64, extent: usize) -> Option<(usize, Option<usize>, f64)> {
    let base = floor(coord);
    if base < 0 || base >= extent as i64 {
        return None;
    }
    let frac = coord - base as f64;
    let first = base as usize;
    if frac == 0.0 {
        Some((first, None, 0.0))
    } else if first + 1 < extent {
        Some((first, Some(first + 1), frac))
    } else {
        None
    }
}

/// Bilinear taps of the sample at fractional position `(y, x)`.
pub fn bilinear_taps(y: f64, x: f64, height: usize, width: usize) -> Option<Taps> {
    let (r0, r1, fy) = axis_support(y, height)?;
    let (c0, c1, fx) = axis_support(x, width)?;
    let mut taps = Taps {
        len: 0,
        index: [0; 4],
        weight: [0.0; 4],
    };
    let rows = [(r0, 1.0 - fy), (r1.unwrap_or(usize::MAX), fy)];
    let cols = [(c0, 1.0 - fx), (c1.unwrap_or(usize::MAX), fx)];
    for &(r, wy) in rows.iter().take(if r1.is_some() { 2 } else { 1 }) {
        for &(c, wx) in cols.iter().take(if c1.is_some() { 2 } else { 1 }) {
            taps.index[taps.len] = r * width + c;
            taps.weight[taps.len] = wy * wx;
            taps.len += 1;
        }
    }
    Some(taps)
}

/// Top-left support index and fractions of the sample at `(y, x)`, or
/// `None` when any support pixel is outside the grid.
#[inline]
pub fn locate(y: f64, x: f64, height: usize, width: usize) -> Option<(usize, f64, f64)> {
    let (yb, xb) = (floor(y), floor(x));
    let (fy, fx) = (y - yb as f64, x - xb as f64);
    let last_row = height as i64 - i64::from(fy != 0.0);
    let last_col = width as i64 - i64::from(fx != 0.0);
    if (yb < 0) | (xb < 0) | (yb >= last_row) | (xb >= last_col) {
        return None;
    }
    Some((yb as usize * width + xb as usize, fy, fx))
}

/// Blends the support found by [`locate`], bit-identical to sampling the
/// corresponding [`Taps`].
#[inline]
pub fn blend<T: num_traits::Float>(values: &[T], q: usize, fy: f64, fx: f64, width: usize) -> T {
    let t = |w: f64| T::from(w).unwrap();
    match (fy != 0.0, fx != 0.0) {
        (false, false) => values[q],
        (false, true) => T::zero() + t(1.0 * (1.0 - fx)) * values[q] + t(1.0 * fx) * values[q + 1],
        (true, false) => T::zero() + t((1.0 - fy) * 1.0) * values[q] + t(fy * 1.0) * values[q + width],
        (true, true) => {
            T::zero()
                + t((1.0 - fy) * (1.0 - fx)) * values[q]
                + t((1.0 - fy) * fx) * values[q + 1]
                + t(fy * (1.0 - fx)) * values[q + width]
                + t(fy * fx) * values[q + width + 1]
        }
    }
}

/// The bilinear sample at `(y, x)`, equal to
/// `bilinear_taps(y, x, ..).map(|t| t.sample(values))`.
#[inline]
pub fn sample_at<T: num_traits::Float>(values: &[T], y: f64, x: f64, height: usize, width: usize) -> Option<T> {
    locate(y, x, height, width).map(|(q, fy, fx)| blend(values, q, fy, fx, width))
}

/// Taps for `slot` seen from pixel `(row, col)`, or `None` when out of bounds.
#[inline]
pub fn slot_taps(spec: &NeighborhoodSpec, slot: usize, row: usize, col: usize) -> Option<Taps> {
    let (height, width) = spec.dims();
    match spec.slots()[slot] {
        SlotGeometry::Fixed { dy, dx } => {
            let r = row as i64 + dy as i64;
            let c = col as i64 + dx as i64;
            if r < 0 || c < 0 || r >= height as i64 || c >= width as i64 {
                None
            } else {
                Some(Taps::single(r as usize * width + c as usize))
            }
        }
        SlotGeometry::Deformable { .. } => {
            let (dy, dx) = spec.slot_offset(slot, row * width + col);
            bilinear_taps(row as f64 + dy, col as f64 + dx, height, width)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_at_matches_taps_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (h, w) = (5, 7);
        let values: Vec<f64> = (0..h * w).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let narrow: Vec<f32> = values.iter().map(|&v| v as f32).collect();
        for n in 0..5000 {
            // mix integral, half-integral and arbitrary coordinates, some outside
            let coord = |rng: &mut rand_chacha::ChaCha8Rng, extent: usize| match n % 3 {
                0 => rng.gen_range(-2..extent as i64 + 2) as f64,
                1 => rng.gen_range(-2..extent as i64 + 2) as f64 + 0.5,
                _ => rng.gen_range(-1.5..extent as f64 + 1.5),
            };
            let (y, x) = (coord(&mut rng, h), coord(&mut rng, w));
            let taps = bilinear_taps(y, x, h, w);
            let a = taps.map(|t| t.sample(&values));
            assert_eq!(
                a.map(f64::to_bits),
                sample_at(&values, y, x, h, w).map(f64::to_bits),
                "({y}, {x})"
            );
            let b = taps.map(|t| t.sample(&narrow));
            assert_eq!(b.map(f32::to_bits), sample_at(&narrow, y, x, h, w).map(f32::to_bits));
        }
    }

    #[test]
    fn floor_matches_std() {
        for x in [
            0.0,
            -0.0,
            0.5,
            -0.5,
            1.0,
            -1.0,
            2.999,
            -2.999,
            1e9 + 0.5,
            -1e9 - 0.5,
            f64::EPSILON,
            -f64::EPSILON,
        ] {
            assert_eq!(floor(x) as f64, x.floor(), "{x}");
        }
        assert_eq!(floor(1e300), i64::MAX);
        assert_eq!(floor(-1e300), i64::MIN);
        assert!(bilinear_taps(1e300, 0.0, 2, 2).is_none());
        assert!(bilinear_taps(-1e300, 0.0, 2, 2).is_none());
    }

    #[test]
    fn half_pixel_between_rows() {
        // column grid with values [1, 3]
        let values = [1.0, 3.0];
        let taps = bilinear_taps(0.5, 0.0, 2, 1).unwrap();
        assert_eq!(taps.len(), 2);
        assert_eq!(taps.sample(&values), 2.0);
    }

    #[test]
    fn integral_position_is_single_tap() {
        let taps = bilinear_taps(1.0, 2.0, 2, 3).unwrap();
        assert_eq!(taps.iter().collect::<Vec<_>>(), vec![(5, 1.0)]);
    }

    #[test]
    fn partial_support_out_of_bounds() {
        // last row plus a fractional step leaves the grid
        assert!(bilinear_taps(1.25, 0.0, 2, 2).is_none());
        assert!(bilinear_taps(-0.25, 0.0, 2, 2).is_none());
        assert!(bilinear_taps(0.0, 1.5, 2, 2).is_none());
        assert!(bilinear_taps(0.75, 0.5, 2, 2).is_some());
    }

    #[test]
    fn weights_sum_to_one() {
        let taps = bilinear_taps(0.3, 1.7, 4, 4).unwrap();
        let total: f64 = taps.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(taps.len(), 4);
    }
}
