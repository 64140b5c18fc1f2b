use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::TraceRecord;

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Smallest `‖p_rel‖ − r` over all steps and obstacles (m); `None` without
    /// obstacles.
    pub min_separation: Option<f64>,
    /// Some step had `‖p_rel‖ ≤ r`.
    pub collision: bool,
    /// Smallest collision-cone barrier value over steps where the obstacle
    /// was visible to the filter; `None` if nothing was ever visible.
    pub min_h: Option<f64>,
    /// RMS of `‖x − x_des‖` over the trailing steps with no visible obstacle
    /// (m); `None` if the last step still saw an obstacle.
    pub tracking_rmse: Option<f64>,
    /// `∫‖u_safe − u_nom‖ dt` by the trapezoidal rule (m/s).
    pub effort_deviation: f64,
    /// Fraction of steps where the filter changed the command.
    pub active_fraction: f64,
}

pub fn compute_metrics(trace: &[TraceRecord]) -> Result<RunMetrics> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let min_separation = trace
        .iter()
        .flat_map(|r| r.obstacles.iter().map(|o| o.separation))
        .reduce(f64::min);
    let min_h = trace
        .iter()
        .flat_map(|r| r.obstacles.iter().filter(|o| o.visible).map(|o| o.h))
        .reduce(f64::min);

    let tail_start = trace
        .iter()
        .rposition(|r| r.obstacles.iter().any(|o| o.visible))
        .map_or(0, |i| i + 1);
    let tail = &trace[tail_start..];
    let tracking_rmse = (!tail.is_empty()).then(|| {
        let sum: f64 = tail.iter().map(|r| (r.p_ee - r.x_des).norm_squared()).sum();
        (sum / tail.len() as f64).sqrt()
    });

    let deviation = |r: &TraceRecord| (r.u_safe - r.u_nom).norm();
    let effort_deviation = trace
        .windows(2)
        .map(|w| 0.5 * (deviation(&w[0]) + deviation(&w[1])) * (w[1].t - w[0].t))
        .sum();
    let active = trace.iter().filter(|r| r.filter_modified).count();

    Ok(RunMetrics {
        min_separation,
        collision: min_separation.is_some_and(|s| s <= 0.0),
        min_h,
        tracking_rmse,
        effort_deviation,
        active_fraction: active as f64 / trace.len() as f64,
    })
}
