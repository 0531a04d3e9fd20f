//! 16-bit binary PGM depth maps: `P5`, maxval 65535, big-endian samples,
//! `depth_m = sample / 256`, sample 0 = missing.

use crate::error::{Error, Result};
use crate::grid::DepthGrid;

pub const MAXVAL: u32 = 65535;
pub const SCALE: f64 = 256.0;
pub const MAX_DEPTH: f64 = MAXVAL as f64 / SCALE;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PgmImage {
    pub height: usize,
    pub width: usize,
    pub samples: Vec<u16>,
}

impl PgmImage {
    pub fn new(height: usize, width: usize, samples: Vec<u16>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape("pgm image", "nonzero dims", format!("{height}x{width}")));
        }
        if samples.len() != height * width {
            return Err(Error::shape("pgm image", height * width, samples.len()));
        }
        Ok(Self { height, width, samples })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, MAXVAL).into_bytes();
        out.reserve(2 * self.samples.len());
        for s in &self.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 2 || &bytes[..2] != b"P5" {
            return Err(Error::Format("not a binary PGM (expected P5 magic)".into()));
        }
        let mut pos = 2;
        let mut field = |name: &str| -> Result<u32> {
            // whitespace and `#` comments may separate header fields
            loop {
                match bytes.get(pos) {
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    _ => break,
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format(format!("truncated or malformed PGM header at {name}")));
            }
            std::str::from_utf8(&bytes[start..pos])
                .unwrap()
                .parse()
                .map_err(|_| Error::Format(format!("PGM {name} out of range")))
        };
        let width = field("width")? as usize;
        let height = field("height")? as usize;
        let maxval = field("maxval")?;
        if maxval != MAXVAL {
            return Err(Error::Format(format!("PGM maxval must be {MAXVAL}, found {maxval}")));
        }
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(Error::Format("truncated PGM header after maxval".into())),
        }
        let need = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(2))
            .ok_or_else(|| Error::Format("PGM dims overflow".into()))?;
        let payload = &bytes[pos..];
        if payload.len() < need {
            return Err(Error::Format(format!(
                "truncated PGM payload: {width}x{height} needs {need} bytes, {} present",
                payload.len()
            )));
        }
        if payload.len() > need {
            return Err(Error::Format(format!(
                "{} trailing bytes after PGM payload",
                payload.len() - need
            )));
        }
        let samples = payload
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        Self::new(height, width, samples)
    }

    pub fn to_depth(&self) -> DepthGrid {
        let values = self.samples.iter().map(|&s| f64::from(s) / SCALE).collect();
        DepthGrid::new(self.height, self.width, values).expect("samples are finite and nonnegative")
    }

    /// Quantizes to the nearest 1/256 m.
    pub fn from_depth(depth: &DepthGrid) -> Result<Self> {
        let mut samples = Vec::with_capacity(depth.len());
        for (i, &d) in depth.values().iter().enumerate() {
            if d > MAX_DEPTH {
                return Err(Error::invalid(
                    "pgm depth",
                    format!("{d} m at pixel {i} exceeds the 16-bit limit of {MAX_DEPTH} m"),
                ));
            }
            samples.push((d * SCALE).round() as u16);
        }
        Self::new(depth.height(), depth.width(), samples)
    }
}

pub fn encode_depth(depth: &DepthGrid) -> Result<Vec<u8>> {
    Ok(PgmImage::from_depth(depth)?.encode())
}

pub fn decode_depth(bytes: &[u8]) -> Result<DepthGrid> {
    Ok(PgmImage::decode(bytes)?.to_depth())
}
