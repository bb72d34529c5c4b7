//! Run-level metrics computed from event logs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{init_belief, BeliefKind};
use crate::log::{EventLogRecord, LogEvent};

pub const DEFAULT_T0: f64 = 0.2;
pub const DEFAULT_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSummary {
    pub value: f64,
    /// Too few samples (or a singular fit): trapezoid over the raw samples.
    pub fallback: bool,
    pub samples: usize,
    /// Fitted coefficients, constant term first.
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("no samples")]
    Empty,
    #[error("t0 must lie in [0, 1), got {0}")]
    BadT0(f64),
    #[error("sample time {0} outside [0, 1]")]
    BadTime(f64),
}

/// Least-squares polynomial fit; `None` when the design matrix is rank
/// deficient.
pub fn fit_polynomial(samples: &[(f64, f64)], degree: usize) -> Option<Vec<f64>> {
    let n = samples.len();
    let m = degree + 1;
    if n < m {
        return None;
    }
    let a = DMatrix::from_fn(n, m, |i, j| samples[i].0.powi(j as i32));
    let b = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= smax * 1e-10 {
        return None;
    }
    let x = svd.solve(&b, smax * 1e-12).ok()?;
    Some(x.iter().copied().collect())
}

fn integrate_polynomial(coeffs: &[f64], lo: f64, hi: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let k = (j + 1) as f64;
            c * (hi.powf(k) - lo.powf(k)) / k
        })
        .sum()
}

/// Integral of the piecewise linear interpolation of `samples` over
/// `[lo, hi]`, held constant beyond the first and last sample.
pub fn trapezoid(samples: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = samples.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let value_at = |t: f64| -> f64 {
        if t <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((t1, y1), (t2, y2)) = (w[0], w[1]);
            if t <= t2 {
                return if t2 > t1 {
                    y1 + (y2 - y1) * (t - t1) / (t2 - t1)
                } else {
                    y2
                };
            }
        }
        pts[pts.len() - 1].1
    };
    let mut knots = vec![lo];
    knots.extend(pts.iter().map(|p| p.0).filter(|&t| t > lo && t < hi));
    knots.push(hi);
    knots
        .windows(2)
        .map(|w| (w[1] - w[0]) * (value_at(w[0]) + value_at(w[1])) / 2.0)
        .sum()
}

/// Area under a degree-`degree` fit of `(t, E[α_f])` samples, `t` already
/// normalized to [0, 1], over `[t0, 1]`. `required` is the minimum sample
/// count for a fit.
pub fn overall_preference(
    samples: &[(f64, f64)],
    t0: f64,
    degree: usize,
    required: usize,
) -> Result<PreferenceSummary, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::Empty);
    }
    if !(0.0..1.0).contains(&t0) {
        return Err(MetricError::BadT0(t0));
    }
    if let Some(&(t, _)) = samples.iter().find(|(t, _)| !(0.0..=1.0).contains(t)) {
        return Err(MetricError::BadTime(t));
    }
    let fit = if samples.len() >= required {
        fit_polynomial(samples, degree)
    } else {
        None
    };
    Ok(match fit {
        Some(c) => PreferenceSummary {
            value: integrate_polynomial(&c, t0, 1.0),
            fallback: false,
            samples: samples.len(),
            coefficients: Some(c),
        },
        None => PreferenceSummary {
            value: trapezoid(samples, t0, 1.0),
            fallback: true,
            samples: samples.len(),
            coefficients: None,
        },
    })
}

pub const DEFAULT_GRID: usize = 101;

/// `(normalized time, E[α_f])` at every update: the prior at 0, then every
/// following-belief snapshot.
pub fn preference_series(records: &[EventLogRecord]) -> Vec<(f64, f64)> {
    let end = records.last().map_or(0.0, |r| r.sim_time);
    let norm = |t: f64| {
        if end > 0.0 {
            (t / end).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    let mut out = Vec::new();
    for r in records {
        match &r.event {
            LogEvent::RunMeta(meta) => {
                let prior = init_belief(BeliefKind::Following, &meta.planner.estimator);
                out.push((norm(r.sim_time), prior.expected_value()));
            }
            LogEvent::BeliefF(b) => out.push((norm(r.sim_time), b.mean)),
            _ => {}
        }
    }
    out
}

/// The estimate held between updates, read off at `points` evenly spaced
/// times in [0, 1]. Later updates at the same instant win.
pub fn sample_held(series: &[(f64, f64)], points: usize) -> Vec<(f64, f64)> {
    let Some(&(_, first)) = series.first() else {
        return Vec::new();
    };
    let steps = points.max(2) - 1;
    let mut out = Vec::with_capacity(steps + 1);
    let mut k = 0;
    let mut value = first;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        while k < series.len() && series[k].0 <= t {
            value = series[k].1;
            k += 1;
        }
        out.push((t, value));
    }
    out
}

/// [`overall_preference`] of the held estimate on an even grid, with the
/// default window and degree. Fewer than `degree + 1` belief updates fall
/// back to the trapezoid over the raw series.
pub fn overall_preference_from_log(records: &[EventLogRecord]) -> Option<PreferenceSummary> {
    let series = preference_series(records);
    let updates = records
        .iter()
        .filter(|r| matches!(r.event, LogEvent::BeliefF(_)))
        .count();
    if updates < DEFAULT_DEGREE + 1 {
        return overall_preference(&series, DEFAULT_T0, DEFAULT_DEGREE, usize::MAX).ok();
    }
    let mut summary = overall_preference(
        &sample_held(&series, DEFAULT_GRID),
        DEFAULT_T0,
        DEFAULT_DEGREE,
        DEFAULT_DEGREE + 1,
    )
    .ok()?;
    summary.samples = series.len();
    Some(summary)
}
