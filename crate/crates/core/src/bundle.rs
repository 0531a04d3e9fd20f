use crate::config::PropagationConfig;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::neighborhood::NeighborhoodSpec;
use crate::volume::{AffinityVolume, AttentionStack};

/// Inputs whose cross-shape constraints have been checked together.
#[derive(Clone, Copy, Debug)]
pub struct Bundle<'a> {
    pub initial: &'a Grid,
    pub affinity: &'a AffinityVolume,
    pub attention: &'a AttentionStack,
    pub spec: &'a NeighborhoodSpec,
    pub config: &'a PropagationConfig,
}

fn check_dims(what: &str, expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(Error::shape(
            format!("{what} height x width"),
            format!("{}x{}", expected.0, expected.1),
            format!("{}x{}", found.0, found.1),
        ));
    }
    Ok(())
}

pub fn validate_bundle<'a>(
    initial: &'a Grid,
    affinity: &'a AffinityVolume,
    attention: &'a AttentionStack,
    spec: &'a NeighborhoodSpec,
    config: &'a PropagationConfig,
) -> Result<Bundle<'a>> {
    config.validate()?;
    let dims = initial.dims();
    check_dims("affinity", dims, affinity.dims())?;
    check_dims("attention", dims, attention.dims())?;
    check_dims("neighborhood", dims, spec.dims())?;
    if affinity.neighbors() != spec.neighbor_count() {
        return Err(Error::shape(
            "affinity neighbor slots K",
            format!("{} (sum of ring sizes {:?})", spec.neighbor_count(), spec.ring_sizes()),
            affinity.neighbors(),
        ));
    }
    if attention.rings() != spec.ring_count() + 1 {
        return Err(Error::RingCount {
            attention: attention.rings() - 1,
            neighborhood: spec.ring_count(),
        });
    }
    if attention.steps() < config.steps {
        return Err(Error::shape(
            "attention steps T",
            format!(">= {} configured steps", config.steps),
            attention.steps(),
        ));
    }
    // constructor already enforces this; kept so a bundle is self-certifying
    if let Some(i) = attention.values().iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::AttentionRange {
            index: i,
            value: attention.values()[i],
        });
    }
    Ok(Bundle {
        initial,
        affinity,
        attention,
        spec,
        config,
    })
}
