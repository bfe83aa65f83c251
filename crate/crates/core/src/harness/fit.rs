//! Log-log growth exponent of a cumulative regret curve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum series length accepted by [`fit_regret_exponent`].
pub const MIN_EPISODES: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {MIN_EPISODES} episodes, got {0}")]
    TooShort(usize),
    #[error("window fraction must lie in (0, 1], got {0}")]
    Window(f64),
    #[error("cumulative regret is non-positive at episode {0} inside a nonzero window")]
    NonPositive(usize),
    #[error("window has fewer than two distinct episodes")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RegretFit {
    /// Least-squares line `log(cum) = intercept + slope * log(k)`.
    Slope { slope: f64, intercept: f64, points: usize },
    /// Zero regret over the whole window: no exponent to report.
    ExactOptimal,
}

impl RegretFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            RegretFit::Slope { slope, .. } => Some(*slope),
            RegretFit::ExactOptimal => None,
        }
    }
}

/// Fits `log(cum[k])` against `log(k)` over the last `window_fraction` of the
/// series, where entry `i` is episode `k = i + 1`.
pub fn fit_regret_exponent(cumulative: &[f64], window_fraction: f64) -> Result<RegretFit, FitError> {
    if cumulative.len() < MIN_EPISODES {
        return Err(FitError::TooShort(cumulative.len()));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(FitError::Window(window_fraction));
    }
    let len = cumulative.len();
    let start = len - ((len as f64 * window_fraction).ceil() as usize).min(len);
    let window = &cumulative[start..];
    if window.iter().all(|&c| c == 0.0) {
        return Ok(RegretFit::ExactOptimal);
    }
    if let Some(i) = window.iter().position(|&c| c <= 0.0) {
        return Err(FitError::NonPositive(start + i));
    }
    if window.len() < 2 {
        return Err(FitError::Degenerate);
    }

    let points = window.len();
    let xs = (start..len).map(|i| ((i + 1) as f64).ln());
    let ys = window.iter().map(|c| c.ln());
    let nf = points as f64;
    let (sx, sy) = xs.clone().zip(ys.clone()).fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (mx, my) = (sx / nf, sy / nf);
    let (sxy, sxx) = xs.zip(ys).fold((0.0, 0.0), |(sxy, sxx), (x, y)| {
        (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
    });
    let slope = sxy / sxx;
    Ok(RegretFit::Slope {
        slope,
        intercept: my - slope * mx,
        points,
    })
}
