//! Per-variant propagation throughput on seed-fixed random bundles.

use std::time::Instant;

use crate::config::PropagationConfig;
use crate::error::Result;
use crate::neighborhood::Variant;
use crate::propagation::propagate;
use crate::synth::{random_bundle, RandomBundleOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub variant: Variant,
    pub height: usize,
    pub width: usize,
    pub neighbors: usize,
    pub steps: usize,
    /// Best (smallest) wall time per step over all repetitions.
    pub seconds_per_step: f64,
}

impl BenchResult {
    pub fn steps_per_sec(&self) -> f64 {
        1.0 / self.seconds_per_step
    }
}

pub fn bench_variant(
    variant: Variant,
    height: usize,
    width: usize,
    cfg: &PropagationConfig,
    reps: usize,
    seed: u64,
) -> Result<BenchResult> {
    let b = random_bundle(&RandomBundleOptions::new(variant, height, width, cfg.steps), seed);
    b.bundle(cfg)?;
    let mut best = f64::INFINITY;
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let out = propagate(&b.initial, &b.affinity, &b.attention, &b.spec, cfg)?;
        let elapsed = start.elapsed().as_secs_f64();
        std::hint::black_box(out);
        best = best.min(elapsed / cfg.steps as f64);
    }
    Ok(BenchResult {
        variant,
        height,
        width,
        neighbors: variant.neighbor_count(),
        steps: cfg.steps,
        // guard against a zero reading from a coarse clock
        seconds_per_step: best.max(1e-12),
    })
}

pub fn bench_all(
    height: usize,
    width: usize,
    cfg: &PropagationConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<BenchResult>> {
    Variant::ALL
        .iter()
        .map(|&v| bench_variant(v, height, width, cfg, reps, seed))
        .collect()
}

pub fn render(results: &[BenchResult]) -> String {
    let mut out = format!(
        "{:<11} {:>9} {:>12} {:>14}\n",
        "variant", "neighbors", "ms/step", "steps/sec"
    );
    for r in results {
        out.push_str(&format!(
            "{:<11} {:>9} {:>12.4} {:>14.2}\n",
            r.variant.name(),
            r.neighbors,
            r.seconds_per_step * 1e3,
            r.steps_per_sec()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_every_variant() {
        let results = bench_all(8, 8, &PropagationConfig::with_steps(2), 1, 3).unwrap();
        assert_eq!(
            results.iter().map(|r| r.neighbors).collect::<Vec<_>>(),
            vec![48, 16, 24]
        );
        assert!(results
            .iter()
            .all(|r| r.steps_per_sec().is_finite() && r.steps_per_sec() > 0.0));
        assert_eq!(render(&results).lines().count(), 4);
    }
}
