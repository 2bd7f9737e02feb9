use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit::JumpEstimate;
use crate::spectral::StabilityTimes;

/// One `(ε, t_ε)` pair entering the fit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DelayPoint {
    pub eps: f64,
    pub t_eps: f64,
    /// Regressor `ε·ln(1/ε)`.
    pub x: f64,
}

/// Least-squares fit `t_ε ≈ a + c·ε·ln(1/ε)` and the resulting delay verdict.
#[derive(Debug, Clone, Serialize)]
pub struct DelayReport {
    /// Intercept `a`, the extrapolated limit of `t_ε`.
    pub extrapolated: f64,
    /// Slope `c`; `None` when the fit is underdetermined.
    pub slope: Option<f64>,
    /// Root-mean-square fit residual.
    pub residual: f64,
    pub gap_to_tstar: Option<f64>,
    pub gap_to_tc: Option<f64>,
    /// `extrapolated − t_c > 5·residual`.
    pub delayed: bool,
    /// Fewer than three points, so the residual says nothing about the fit.
    pub low_confidence: bool,
    pub points: Vec<DelayPoint>,
}

pub fn verify_delay(estimates: &[JumpEstimate], times: &StabilityTimes) -> Result<DelayReport> {
    let points: Vec<DelayPoint> = estimates
        .iter()
        .filter_map(|e| {
            e.t_eps.map(|t| DelayPoint {
                eps: e.eps,
                t_eps: t,
                x: e.eps * (1.0 / e.eps).ln(),
            })
        })
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyReport);
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.x).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.t_eps).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.x - mean_x).powi(2)).sum();
    let (extrapolated, slope) = if points.len() < 2 || sxx <= f64::EPSILON * mean_x.abs().max(1e-300) {
        (mean_y, None)
    } else {
        let sxy: f64 = points
            .iter()
            .map(|p| (p.x - mean_x) * (p.t_eps - mean_y))
            .sum();
        let c = sxy / sxx;
        (mean_y - c * mean_x, Some(c))
    };
    let c = slope.unwrap_or(0.0);
    let residual = (points
        .iter()
        .map(|p| (p.t_eps - extrapolated - c * p.x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let gap_to_tc = times.t_c.map(|tc| extrapolated - tc);
    Ok(DelayReport {
        extrapolated,
        slope,
        residual,
        gap_to_tstar: times.t_star.map(|ts| extrapolated - ts),
        gap_to_tc,
        delayed: gap_to_tc.is_some_and(|g| g > 5.0 * residual),
        low_confidence: points.len() < 3,
        points,
    })
}
