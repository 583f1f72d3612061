//! Least-squares power-law fits in log-log coordinates.

use serde::Serialize;

use crate::error::{CshError, Result};

/// Result of fitting `value ≈ exp(intercept)·λ^slope`.
#[derive(Debug, Clone, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in natural-log units.
    pub residual_rms: f64,
    /// Standard error of the slope (zero for an exact fit or two points).
    pub slope_stderr: f64,
    pub points_used: usize,
    /// Points discarded because the value was not strictly positive and finite.
    pub excluded: usize,
}

impl LogLogFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

/// Fits a power law through `(x, value)` pairs. Needs at least 4 usable points
/// spanning `min_decades` decades in x.
pub fn loglog_fit(points: &[(f64, f64)], min_decades: f64) -> Result<LogLogFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let excluded = points.len() - usable.len();
    if usable.len() < 4 {
        return Err(CshError::InvalidParameter(format!(
            "power-law fit needs at least 4 positive points, got {} ({excluded} excluded)",
            usable.len()
        )));
    }
    let (lo, hi) = usable.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| (lo.min(*x), hi.max(*x)));
    let decades = (hi - lo) / std::f64::consts::LN_10;
    if decades + 1e-9 < min_decades {
        return Err(CshError::InvalidParameter(format!(
            "power-law fit spans {decades:.2} decades, need {min_decades}"
        )));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = usable.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_stderr = if usable.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LogLogFit {
        slope,
        intercept,
        residual_rms: (sse / n).sqrt(),
        slope_stderr,
        points_used: usable.len(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Vec<f64> {
        (0..9).map(|i| 10f64.powf(2.0 + 0.5 * i as f64)).collect()
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = grid().into_iter().map(|l| (l, 3.0 * l.powf(2.5))).collect();
        let fit = loglog_fit(&pts, 2.0).unwrap();
        assert!((fit.slope - 2.5).abs() < 1e-6);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn noisy_linear_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<_> = grid().into_iter().map(|l| (l, 0.7 * l * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))).collect();
        assert!((loglog_fit(&pts, 2.0).unwrap().slope - 1.0).abs() < 0.02);
    }

    #[test]
    fn constant_and_exclusions() {
        let mut pts: Vec<_> = grid().into_iter().map(|l| (l, 5.0)).collect();
        pts.push((1e3, 0.0));
        pts.push((1e3, -1.0));
        let fit = loglog_fit(&pts, 2.0).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert_eq!(fit.excluded, 2);
    }

    #[test]
    fn rejects_short_ranges() {
        let pts: Vec<_> = (1..6).map(|i| (i as f64, i as f64)).collect();
        assert!(loglog_fit(&pts, 2.0).is_err());
        assert!(loglog_fit(&pts[..3], 0.0).is_err());
    }
}
