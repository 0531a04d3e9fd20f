use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(Error::Config(format!("unknown precision `{s}` (expected f32 or f64)"))),
        }
    }
}

/// Out-of-bounds neighbors are dropped from the numerator and both normalizers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    ExcludeOutOfBounds,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationConfig {
    pub steps: usize,
    /// Denominator guard. `0.0` selects the exact reference mode, where a
    /// pixel with `S' = 0` returns its initial value.
    pub epsilon: f64,
    pub boundary: Boundary,
    pub precision: Precision,
    /// When false the self channel is dropped (treated as `pi_0 = 0`),
    /// which removes diffusion suppression.
    pub suppression: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            steps: 6,
            epsilon: 1e-8,
            boundary: Boundary::ExcludeOutOfBounds,
            precision: Precision::F64,
            suppression: true,
        }
    }
}

impl PropagationConfig {
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }

    /// Exact mode used by the algebraic property checks.
    pub fn reference(steps: usize) -> Self {
        Self {
            steps,
            epsilon: 0.0,
            ..Self::default()
        }
    }

    pub fn is_reference(&self) -> bool {
        self.epsilon == 0.0
    }

    /// Steps must be at least one; epsilon positive, or exactly zero for
    /// reference mode.
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}
