//! Loading run inputs named by a config.

use std::path::{Path, PathBuf};

use dyspn::activation::activate;
use dyspn::io::{self, RawTensor, RunConfig};
use dyspn::synth::OwnedBundle;
use dyspn::{build_neighborhood, Error, Grid, Result, Variant};

/// Paths in a config are relative to the config's directory.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("config key `{key}` is required for this command")))
}

/// An [H, W] grid from a `.dyt` tensor, otherwise a depth PGM.
pub fn read_grid(path: &Path) -> Result<Grid> {
    if path.extension().is_some_and(|e| e == "dyt") {
        io::read_as(path, RawTensor::to_grid)
    } else {
        Ok(io::read_depth(path)?.into_grid())
    }
}

pub fn load_bundle(cfg: &RunConfig, base: &Path) -> Result<OwnedBundle> {
    let initial = read_grid(&resolve(base, required(&cfg.depth, "depth")?))?;
    let (h, w) = initial.dims();
    let affinity_path = resolve(base, required(&cfg.affinity, "affinity")?);
    let affinity = io::read_as(&affinity_path, RawTensor::to_affinity)?;
    let attention_path = resolve(base, required(&cfg.attention, "attention")?);
    let attention = match cfg.activation {
        None => io::read_as(&attention_path, RawTensor::to_attention)?,
        Some(kind) => io::read_as(&attention_path, |t| {
            let ([steps, rings, ah, aw], logits) = t.to_attention_logits()?;
            activate(kind, &logits, steps, rings, ah, aw)
        })?,
    };
    let offsets = match (cfg.variant, &cfg.offsets) {
        (Variant::Deformable, Some(p)) => Some(io::read_as(&resolve(base, p), RawTensor::to_offsets)?),
        (Variant::Deformable, None) => return Err(Error::Config("deformable runs need the `offsets` key".into())),
        (_, Some(_)) => {
            return Err(Error::Config(format!(
                "`offsets` is only valid for the deformable variant, not {}",
                cfg.variant
            )))
        }
        (_, None) => None,
    };
    let spec = build_neighborhood(cfg.variant, h, w, offsets)?;
    let bundle = OwnedBundle {
        initial,
        affinity,
        attention,
        spec,
    };
    bundle.bundle(&cfg.propagation())?;
    Ok(bundle)
}

/// The directory a config's relative paths are resolved against.
pub fn config_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}
