//! The linearly rescaled learning rate `eta_n = (H+1)/(H+n)` and the
//! aggregate weights `eta_n^N = eta_n * prod_{i=n+1}^{N} (1 - eta_i)`.
//!
//! Agents only ever use `eta`; the weight sequences exist for the numerical
//! property suite and for replaying the unrolled form of an update.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RateError {
    #[error("visit count n must be at least 1")]
    ZeroVisit,
    #[error("horizon H must be at least 1")]
    ZeroHorizon,
}

/// Horizon-parameterized schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateParams {
    horizon: usize,
}

impl RateParams {
    pub fn new(horizon: usize) -> Result<Self, RateError> {
        if horizon == 0 {
            return Err(RateError::ZeroHorizon);
        }
        Ok(Self { horizon })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn eta(&self, n: u64) -> Result<f64, RateError> {
        eta(n, self.horizon)
    }
}

/// `eta_n = (H+1)/(H+n)` for the `n`-th visit.
pub fn eta(n: u64, horizon: usize) -> Result<f64, RateError> {
    if n == 0 {
        return Err(RateError::ZeroVisit);
    }
    Ok(eta_unchecked(n, horizon))
}

#[inline]
pub(crate) fn eta_unchecked(n: u64, horizon: usize) -> f64 {
    let h = horizon as f64;
    (h + 1.0) / (h + n as f64)
}

/// `eta_n^N`, including the `n = 0` convention (`1` iff `N = 0`).
///
/// Evaluated as a direct product; `O(N - n)`.
pub fn eta_seq(n: u64, big_n: u64, horizon: usize) -> f64 {
    if n == 0 {
        return if big_n == 0 { 1.0 } else { 0.0 };
    }
    if big_n < n {
        return 0.0;
    }
    let mut w = eta_unchecked(n, horizon);
    for i in (n + 1)..=big_n {
        w *= 1.0 - eta_unchecked(i, horizon);
    }
    w
}

/// `[eta_1^N, ..., eta_N^N]` in `O(N)`, sweeping the tail product backwards
/// from `eta_N^N = eta_N`.
pub fn eta_seq_row(big_n: u64, horizon: usize) -> Vec<f64> {
    let len = big_n as usize;
    let mut row = vec![0.0; len];
    let mut tail = 1.0;
    for n in (1..=big_n).rev() {
        row[(n - 1) as usize] = eta_unchecked(n, horizon) * tail;
        tail *= 1.0 - eta_unchecked(n, horizon);
    }
    row
}

/// One checked property of the weight sequences.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub checked: u64,
    pub failures: u64,
    /// Largest amount by which a bound was exceeded (0 when all hold).
    pub worst_excess: f64,
}

impl PropertyCheck {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            checked: 0,
            failures: 0,
            worst_excess: 0.0,
        }
    }

    /// Records `lhs <= rhs + tol`.
    fn le(&mut self, lhs: f64, rhs: f64, tol: f64) {
        self.checked += 1;
        let excess = lhs - rhs;
        if excess > tol {
            self.failures += 1;
        }
        self.worst_excess = self.worst_excess.max(excess.max(0.0));
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSuiteReport {
    pub horizons: Vec<usize>,
    pub n_max: u64,
    pub tail_n_max: u64,
    pub tolerance: f64,
    pub checks: Vec<PropertyCheck>,
}

impl RateSuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(PropertyCheck::passed)
    }
}

pub const SUITE_HORIZONS: [usize; 4] = [1, 2, 5, 10];
pub const SUITE_EXPONENTS: [f64; 3] = [0.5, 0.75, 1.0];
pub const SUITE_TAIL_STARTS: [u64; 3] = [1, 2, 10];

/// Numerically checks the weight-sequence bounds for every `H` in `horizons`
/// and `N = 1..=n_max`:
///
/// * `sum_n eta_n^N = 1`
/// * `N^-a <= sum_n eta_n^N / n^a <= 2 N^-a` for `a` in `{1/2, 3/4, 1}`
/// * `max_n eta_n^N <= 2H/N` and `sum_n (eta_n^N)^2 <= 2H/N`
/// * `sum_{N=n}^{tail_n_max} eta_n^N <= 1 + 1/H` for `n` in `{1, 2, 10}`
pub fn rate_property_suite(horizons: &[usize], n_max: u64, tail_n_max: u64, tol: f64) -> RateSuiteReport {
    let mut sum_one = PropertyCheck::new("sum of weights equals 1");
    let mut power_lower = PropertyCheck::new("power-weighted sum lower bound N^-a");
    let mut power_upper = PropertyCheck::new("power-weighted sum upper bound 2N^-a");
    let mut max_bound = PropertyCheck::new("max weight <= 2H/N");
    let mut sq_bound = PropertyCheck::new("sum of squared weights <= 2H/N");
    let mut tail_bound = PropertyCheck::new("column sum <= 1 + 1/H");

    for &h in horizons {
        let hf = h as f64;
        for big_n in 1..=n_max {
            let row = eta_seq_row(big_n, h);
            let nf = big_n as f64;
            let total: f64 = row.iter().sum();
            sum_one.le((total - 1.0).abs(), 0.0, tol);
            for &a in &SUITE_EXPONENTS {
                let weighted: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w / ((i + 1) as f64).powf(a))
                    .sum();
                power_lower.le(1.0 / nf.powf(a), weighted, tol);
                power_upper.le(weighted, 2.0 / nf.powf(a), tol);
            }
            let max = row.iter().copied().fold(0.0, f64::max);
            max_bound.le(max, 2.0 * hf / nf, tol);
            let sq: f64 = row.iter().map(|w| w * w).sum();
            sq_bound.le(sq, 2.0 * hf / nf, tol);
        }
        for &n in &SUITE_TAIL_STARTS {
            // running eta_n^N for N = n, n+1, ...
            let mut w = eta_unchecked(n, h);
            let mut col = 0.0;
            for big_n in n..=tail_n_max {
                if big_n > n {
                    w *= 1.0 - eta_unchecked(big_n, h);
                }
                col += w;
            }
            tail_bound.le(col, 1.0 + 1.0 / hf, tol);
        }
    }

    RateSuiteReport {
        horizons: horizons.to_vec(),
        n_max,
        tail_n_max,
        tolerance: tol,
        checks: vec![sum_one, power_lower, power_upper, max_bound, sq_bound, tail_bound],
    }
}
