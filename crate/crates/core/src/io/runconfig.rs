//! Flat `key = value` run configuration. `#` starts a comment, unknown keys
//! are rejected, and serialization writes every key in a fixed order so a
//! resolved config is a stable, diff-able record of a run.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::activation::Activation;
use crate::config::{Precision, PropagationConfig};
use crate::error::{Error, Result};
use crate::neighborhood::Variant;
use crate::synth::SceneKind;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub steps: usize,
    pub epsilon: f64,
    pub precision: Precision,
    pub suppression: bool,
    /// `None`: the attention file already holds values in `[0, 1]`.
    pub activation: Option<Activation>,
    pub depth: Option<PathBuf>,
    pub affinity: Option<PathBuf>,
    pub attention: Option<PathBuf>,
    pub offsets: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub tape: bool,
    pub seed: u64,
    pub scene: SceneKind,
    pub height: usize,
    pub width: usize,
    pub sparsity: f64,
    /// `None`: a tenth of the guidance range.
    pub sigma: Option<f64>,
    pub schedule: String,
    pub edge_gain: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PropagationConfig::default();
        Self {
            variant: Variant::Ring7x7,
            steps: p.steps,
            epsilon: p.epsilon,
            precision: p.precision,
            suppression: p.suppression,
            activation: None,
            depth: None,
            affinity: None,
            attention: None,
            offsets: None,
            gt: None,
            tape: false,
            seed: 0,
            scene: SceneKind::StepEdge,
            height: 128,
            width: 128,
            sparsity: 0.05,
            sigma: None,
            schedule: "far-decay".into(),
            edge_gain: 0.0,
        }
    }
}

pub const KEYS: [&str; 21] = [
    "variant",
    "steps",
    "epsilon",
    "precision",
    "suppression",
    "activation",
    "depth",
    "affinity",
    "attention",
    "offsets",
    "gt",
    "tape",
    "seed",
    "scene",
    "height",
    "width",
    "sparsity",
    "sigma",
    "schedule",
    "edge_gain",
    "threads",
];

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value `{value}` for `{key}`")))
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "line {line}: `{key}` expects true or false, found `{value}`"
        ))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected `key = value`, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {line}: duplicate key `{key}`")));
            }
            let err = |e: Error| Error::Config(format!("line {line}: {e}"));
            match key {
                "variant" => cfg.variant = value.parse().map_err(err)?,
                "steps" => cfg.steps = parse(line, key, value)?,
                "epsilon" => cfg.epsilon = parse(line, key, value)?,
                "precision" => cfg.precision = value.parse().map_err(err)?,
                "suppression" => cfg.suppression = parse_bool(line, key, value)?,
                "activation" => {
                    cfg.activation = match value {
                        "none" => None,
                        v => Some(v.parse().map_err(err)?),
                    }
                }
                "depth" => cfg.depth = opt_path(value),
                "affinity" => cfg.affinity = opt_path(value),
                "attention" => cfg.attention = opt_path(value),
                "offsets" => cfg.offsets = opt_path(value),
                "gt" => cfg.gt = opt_path(value),
                "tape" => cfg.tape = parse_bool(line, key, value)?,
                "seed" => cfg.seed = parse(line, key, value)?,
                "scene" => cfg.scene = value.parse().map_err(err)?,
                "height" => cfg.height = parse(line, key, value)?,
                "width" => cfg.width = parse(line, key, value)?,
                "sparsity" => cfg.sparsity = parse(line, key, value)?,
                "sigma" => {
                    cfg.sigma = match value {
                        "auto" => None,
                        v => Some(parse(line, key, v)?),
                    }
                }
                "schedule" => cfg.schedule = value.to_string(),
                "edge_gain" => cfg.edge_gain = parse(line, key, value)?,
                // execution detail only: results never depend on it, so it is not recorded
                "threads" => {
                    parse::<usize>(line, key, value)?;
                }
                other => return Err(Error::Config(format!("line {line}: unknown key `{other}`"))),
            }
        }
        cfg.propagation().validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn propagation(&self) -> PropagationConfig {
        PropagationConfig {
            steps: self.steps,
            epsilon: self.epsilon,
            precision: self.precision,
            suppression: self.suppression,
            ..PropagationConfig::default()
        }
    }

    /// Threads requested by the config text, if any (not part of the record).
    pub fn threads(text: &str) -> Option<usize> {
        text.lines()
            .filter_map(|l| l.split('#').next().unwrap().split_once('='))
            .find(|(k, _)| k.trim() == "threads")
            .and_then(|(_, v)| v.trim().parse().ok())
    }

    pub fn serialize(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("variant", self.variant.to_string());
        put("steps", self.steps.to_string());
        put("epsilon", self.epsilon.to_string());
        put("precision", self.precision.to_string());
        put("suppression", self.suppression.to_string());
        put("activation", self.activation.map_or("none".into(), |a| a.to_string()));
        put("depth", path(&self.depth));
        put("affinity", path(&self.affinity));
        put("attention", path(&self.attention));
        put("offsets", path(&self.offsets));
        put("gt", path(&self.gt));
        put("tape", self.tape.to_string());
        put("seed", self.seed.to_string());
        put("scene", self.scene.to_string());
        put("height", self.height.to_string());
        put("width", self.width.to_string());
        put("sparsity", self.sparsity.to_string());
        put("sigma", self.sigma.map_or("auto".into(), |s| s.to_string()));
        put("schedule", self.schedule.clone());
        put("edge_gain", self.edge_gain.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.serialize()).unwrap(), cfg);
    }

    #[test]
    fn full_round_trip() {
        let cfg = RunConfig {
            variant: Variant::Deformable,
            steps: 12,
            epsilon: 1e-6,
            precision: Precision::F32,
            suppression: false,
            activation: Some(Activation::Softmax),
            depth: Some("init.pgm".into()),
            affinity: Some("a/affinity.dyt".into()),
            attention: Some("attention.dyt".into()),
            offsets: Some("offsets.dyt".into()),
            gt: Some("gt.pgm".into()),
            tape: true,
            seed: u64::MAX,
            scene: SceneKind::SphereOnPlane,
            height: 7,
            width: 9,
            sparsity: 0.123456789,
            sigma: Some(0.3),
            schedule: "constant".into(),
            edge_gain: 0.5,
        };
        let text = cfg.serialize();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        assert_eq!(RunConfig::parse(&text).unwrap().serialize(), text);
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = RunConfig::parse("# run\n\nvariant = dilated  # fewer neighbors\nsteps=3\n").unwrap();
        assert_eq!(cfg.variant, Variant::Dilated);
        assert_eq!(cfg.steps, 3);
    }

    #[test]
    fn rejects_bad_input() {
        for (text, needle) in [
            ("colour = red", "unknown key"),
            ("steps = many", "steps"),
            ("steps = 0", "steps"),
            ("epsilon = -1", "epsilon"),
            ("variant = 9x9", "9x9"),
            ("just words", "key = value"),
            ("steps = 1\nsteps = 2", "duplicate"),
            ("tape = maybe", "tape"),
        ] {
            let e = RunConfig::parse(text).unwrap_err().to_string();
            assert!(e.contains(needle), "{text:?}: {e}");
        }
    }

    #[test]
    fn threads_is_accepted_but_not_recorded() {
        let cfg = RunConfig::parse("threads = 8\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!(!cfg.serialize().contains("threads"));
        assert_eq!(RunConfig::threads("threads = 8\n"), Some(8));
    }

    #[test]
    fn keys_cover_serialization() {
        let text = RunConfig::default().serialize();
        let written: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        assert_eq!(written, &KEYS[..KEYS.len() - 1]);
    }
}
