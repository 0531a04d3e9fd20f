//! Depth-completion metrics over pixels with valid ground truth (`gt > 0`).
//!
//! Inputs are in meters. RMSE and MAE are reported in millimeters, the inverse
//! metrics in 1/km, δ as a percentage of evaluated pixels.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{DepthGrid, Grid};
use crate::propagation::PropagationTape;

pub const DELTA_THRESHOLDS: [f64; 3] = [1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25];

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub rmse_mm: f64,
    pub mae_mm: f64,
    pub irmse: f64,
    pub imae: f64,
    pub rel: f64,
    /// Percentages for τ = 1.25, 1.25², 1.25³.
    pub delta: [f64; 3],
    pub valid_count: usize,
}

/// Pairwise summation; the split points depend only on the length, so the
/// result is independent of how callers parallelize around it.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn evaluate(prediction: &Grid, gt: &DepthGrid) -> Result<MetricsReport> {
    if prediction.dims() != gt.dims() {
        return Err(Error::shape(
            "prediction vs ground truth",
            format!("{}x{}", gt.height(), gt.width()),
            format!("{}x{}", prediction.height(), prediction.width()),
        ));
    }
    let pairs: Vec<(f64, f64)> = prediction
        .values()
        .iter()
        .zip(gt.values())
        .filter(|(_, &g)| g > 0.0)
        .map(|(&p, &g)| (p, g))
        .collect();
    let v = pairs.len();
    if v == 0 {
        return Err(Error::NoValidPixels);
    }
    let nonpositive = pairs.iter().filter(|(p, _)| *p <= 0.0).count();
    if nonpositive > 0 {
        return Err(Error::NonPositivePrediction {
            count: nonpositive,
            valid: v,
        });
    }

    let n = v as f64;
    let mean = |f: &dyn Fn(f64, f64) -> f64| pairwise_sum(&pairs.iter().map(|&(p, g)| f(p, g)).collect::<Vec<_>>()) / n;
    let mse_mm = mean(&|p, g| {
        let d = (p - g) * 1000.0;
        d * d
    });
    let mae_mm = mean(&|p, g| ((p - g) * 1000.0).abs());
    let imse = mean(&|p, g| {
        let d = 1000.0 / p - 1000.0 / g;
        d * d
    });
    let imae = mean(&|p, g| (1000.0 / p - 1000.0 / g).abs());
    let rel = mean(&|p, g| (p - g).abs() / g);
    let delta = DELTA_THRESHOLDS.map(|tau| {
        let hits = pairs.iter().filter(|&&(p, g)| (p / g).max(g / p) < tau).count();
        100.0 * hits as f64 / n
    });

    Ok(MetricsReport {
        rmse_mm: mse_mm.sqrt(),
        mae_mm,
        irmse: imse.sqrt(),
        imae,
        rel,
        delta,
        valid_count: v,
    })
}

/// RMSE (mm) of every recorded state `h_0 .. h_N`.
pub fn rmse_curve(tape: &PropagationTape, gt: &DepthGrid) -> Result<Vec<f64>> {
    tape.states()
        .iter()
        .map(|s| evaluate(s, gt).map(|r| r.rmse_mm))
        .collect()
}

impl MetricsReport {
    pub fn to_text(&self) -> String {
        let rows: [(&str, String); 9] = [
            ("RMSE (mm)", format!("{:.4}", self.rmse_mm)),
            ("MAE (mm)", format!("{:.4}", self.mae_mm)),
            ("iRMSE (1/km)", format!("{:.4}", self.irmse)),
            ("iMAE (1/km)", format!("{:.4}", self.imae)),
            ("REL", format!("{:.6}", self.rel)),
            ("delta<1.25 (%)", format!("{:.4}", self.delta[0])),
            ("delta<1.25^2 (%)", format!("{:.4}", self.delta[1])),
            ("delta<1.25^3 (%)", format!("{:.4}", self.delta[2])),
            ("valid pixels", self.valid_count.to_string()),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v:>14}");
        }
        out
    }

    pub const CSV_HEADER: &'static str = "rmse_mm,mae_mm,irmse,imae,rel,delta1,delta2,delta3,valid_count";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.rmse_mm,
            self.mae_mm,
            self.irmse,
            self.imae,
            self.rel,
            self.delta[0],
            self.delta[1],
            self.delta[2],
            self.valid_count
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::CSV_HEADER, self.to_csv_row())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(values: &[f64]) -> Grid {
        Grid::new(1, values.len(), values.to_vec()).unwrap()
    }

    fn depth(values: &[f64]) -> DepthGrid {
        DepthGrid::new(1, values.len(), values.to_vec()).unwrap()
    }

    #[test]
    fn hand_fixture() {
        let r = evaluate(&grid(&[2.0, 2.0]), &depth(&[1.0, 3.0])).unwrap();
        assert!((r.rmse_mm - 1000.0).abs() < 1e-9);
        assert!((r.mae_mm - 1000.0).abs() < 1e-9);
        assert!((r.rel - 2.0 / 3.0).abs() < 1e-12);
        // ratios 2 and 1.5: neither under 1.25, 1.5 under 1.5625
        assert_eq!(r.delta, [0.0, 50.0, 50.0]);
        // inverse errors 500 and 166.67 per km
        let i1 = 500.0;
        let i2 = 1000.0 / 2.0 - 1000.0 / 3.0;
        assert!((r.imae - (i1 + i2) / 2.0).abs() < 1e-9);
        assert!((r.irmse - ((i1 * i1 + i2 * i2) / 2.0).sqrt()).abs() < 1e-9);
        assert_eq!(r.valid_count, 2);
    }

    #[test]
    fn identity_fixture() {
        let r = evaluate(&grid(&[1.5, 4.0, 0.3]), &depth(&[1.5, 4.0, 0.3])).unwrap();
        assert_eq!((r.rmse_mm, r.mae_mm, r.irmse, r.imae, r.rel), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.delta, [100.0; 3]);
    }

    #[test]
    fn invalid_gt_excluded() {
        assert!(matches!(
            evaluate(&grid(&[5.0]), &depth(&[0.0])),
            Err(Error::NoValidPixels)
        ));
        let r = evaluate(&grid(&[5.0, 2.0]), &depth(&[0.0, 2.0])).unwrap();
        assert_eq!(r.valid_count, 1);
        assert_eq!(r.rmse_mm, 0.0);
    }

    #[test]
    fn nonpositive_prediction_reported() {
        // the invalid pixel's nonpositive prediction does not count
        let err = evaluate(&grid(&[0.0, -1.0, 0.0]), &depth(&[1.0, 2.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NonPositivePrediction { count: 2, valid: 2 }));
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(
            evaluate(&grid(&[1.0]), &depth(&[1.0, 2.0])),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn pairwise_matches_naive_on_exact_values() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn renders() {
        let r = evaluate(&grid(&[2.0, 2.0]), &depth(&[1.0, 3.0])).unwrap();
        assert!(r.to_text().contains("RMSE (mm)"));
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], MetricsReport::CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), 9);
        assert!(lines[1].starts_with("1000,1000,"));
    }

    #[test]
    fn curve_has_one_entry_per_state() {
        let g = grid(&[2.0, 2.0]);
        let tape = PropagationTape::from_states(vec![g.clone(), g.clone(), g], crate::Precision::F64).unwrap();
        let curve = rmse_curve(&tape, &depth(&[1.0, 3.0])).unwrap();
        assert_eq!(curve.len(), 3);
        assert!(curve.iter().all(|&c| (c - 1000.0).abs() < 1e-9));
    }
}
