//! Attention-modulated, ring-decoupled spatial propagation for depth
//! completion, with a dense-matrix reference, reverse-mode gradients and the
//! standard depth-completion metrics.

pub mod activation;
pub mod autograd;
pub mod bench;
mod bundle;
mod config;
mod error;
pub mod gradcheck;
mod grid;
pub mod io;
pub mod metrics;
mod neighborhood;
pub mod oracle;
pub mod propagation;
pub mod sampling;
pub mod synth;
mod volume;

pub use bundle::{validate_bundle, Bundle};
pub use config::{Boundary, Precision, PropagationConfig};
pub use error::{Error, Result};
pub use grid::{DepthGrid, Grid};
pub use neighborhood::{
    build_neighborhood, NeighborhoodSpec, OffsetField, Ring, SlotGeometry, Variant, DEFORMABLE_RINGS, DEFORMABLE_SLOTS,
};
pub use propagation::{emulate_cspn, propagate, propagate_bundle, step, PropagationTape};
pub use volume::{AffinityVolume, AttentionStack};
