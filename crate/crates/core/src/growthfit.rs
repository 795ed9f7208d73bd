//! Logistic growth fits with bootstrap bounds on the carrying capacity.
//!
//! The closed form of `du/dt = r u (1 - u/K)` with `u(0) = u0` is
//! `K u0 e^{rt} / (K - u0 + u0 e^{rt})`. Fits run in log-parameter space
//! (`ln K`, `ln r`, `ln u0`), which keeps every parameter positive and makes
//! the fit equivariant under rescaling of the data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{self, LmOptions, LmOutcome};
use crate::stats;

/// Minimum bootstrap resamples accepted by [`k_upper_confidence`].
pub const MIN_RESAMPLES: usize = 200;
pub const DEFAULT_RESAMPLES: usize = 1000;
/// Largest tolerated share of failed bootstrap refits.
pub const MAX_FAILED_REFITS: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub t: f64,
    pub y: f64,
}

impl Point {
    pub fn new(t: f64, y: f64) -> Self {
        Self { t, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    k: f64,
    r: f64,
    u0: f64,
    rss: f64,
    iterations: usize,
}

impl LogisticParams {
    pub fn new(k: f64, r: f64, u0: f64) -> Result<Self> {
        let p = Self {
            k,
            r,
            u0,
            rss: 0.0,
            iterations: 0,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let finite = self.k.is_finite() && self.r.is_finite() && self.u0.is_finite();
        if !(finite && self.k > 0.0 && self.r > 0.0 && self.u0 > 0.0 && self.u0 < self.k) {
            return Err(Error::Validation(format!(
                "logistic parameters need K > 0, r > 0, 0 < u0 < K (got K={}, r={}, u0={})",
                self.k, self.r, self.u0
            )));
        }
        Ok(())
    }

    /// Carrying capacity.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Growth rate per day.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Value at the time origin.
    pub fn u0(&self) -> f64 {
        self.u0
    }

    /// Residual sum of squares of the fit that produced these parameters.
    pub fn rss(&self) -> f64 {
        self.rss
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Same curve shape with a different carrying capacity.
    pub fn with_k(&self, k: f64) -> Result<Self> {
        Self::new(k, self.r, self.u0)
    }

    pub fn value(&self, t: f64) -> f64 {
        logistic_value(self, t)
    }

    /// Time at which the curve reaches `K / 2`.
    pub fn midpoint(&self) -> f64 {
        ((self.k - self.u0) / self.u0).ln() / self.r
    }
}

pub fn logistic_value(params: &LogisticParams, t: f64) -> f64 {
    let LogisticParams { k, r, u0, .. } = *params;
    let decay = (-r * t).exp();
    if decay.is_infinite() {
        return 0.0;
    }
    k * u0 / (u0 + (k - u0) * decay)
}

/// Value and gradient with respect to `(ln K, ln r, ln u0)`.
fn model_log_params(theta: &[f64; 3], t: f64) -> (f64, [f64; 3]) {
    let (k, r, u0) = (theta[0].exp(), theta[1].exp(), theta[2].exp());
    let e = (-r * t).exp();
    let d = u0 + (k - u0) * e;
    let f = k * u0 / d;
    let d2 = d * d;
    let df_dk = u0 * u0 * (1.0 - e) / d2;
    let df_dr = k * u0 * (k - u0) * t * e / d2;
    let df_du0 = k * k * e / d2;
    (f, [df_dk * k, df_dr * r, df_du0 * u0])
}

fn validate_points(points: &[Point]) -> Result<()> {
    if points.len() < 4 {
        return Err(Error::Argument(format!(
            "logistic fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.t.is_finite() && p.y.is_finite() && p.y > 0.0))
    {
        return Err(Error::Argument(format!(
            "logistic fit needs finite t and positive y, got ({}, {})",
            p.t, p.y
        )));
    }
    let mut ts: Vec<f64> = points.iter().map(|p| p.t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < 3 {
        return Err(Error::Argument(
            "logistic fit needs at least 3 distinct time points".into(),
        ));
    }
    Ok(())
}

fn sorted_by_t(points: &[Point]) -> Vec<Point> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    sorted
}

/// Slope of `logit(y / k)` against `t`, or `None` when not positive.
fn logit_slope(points: &[Point], k: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.y < k)
        .map(|p| {
            let q = p.y / k;
            (p.t, (q / (1.0 - q)).ln())
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mz = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mz)).sum();
    let slope = sxy / sxx;
    (slope.is_finite() && slope > 0.0).then_some(slope)
}

fn initial_rate(points: &[Point], k: f64) -> f64 {
    logit_slope(points, k).unwrap_or_else(|| {
        let span = points.last().unwrap().t - points[0].t;
        1.0 / span
    })
}

fn finish(outcome: LmOutcome<3>) -> Result<LogisticParams> {
    let [ln_k, ln_r, ln_u0] = outcome.params;
    let params = LogisticParams {
        k: ln_k.exp(),
        r: ln_r.exp(),
        u0: ln_u0.exp(),
        rss: outcome.rss,
        iterations: outcome.iterations,
    };
    let failure = |message: String| Error::FitFailure {
        message,
        iterations: outcome.iterations,
        best: Box::new(params),
    };
    if !outcome.converged {
        return Err(failure(outcome.message.to_string()));
    }
    params
        .check()
        .map_err(|e| failure(format!("converged outside the admissible region: {e}")))?;
    Ok(params)
}

fn ensure_not_flat(points: &[Point]) -> Result<()> {
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    if hi - lo <= 1e-12 * hi {
        return Err(Error::FitFailure {
            message: "flat data, logistic parameters are not identifiable".into(),
            iterations: 0,
            best: Box::new(LogisticParams {
                k: hi,
                r: 0.0,
                u0: hi,
                rss: 0.0,
                iterations: 0,
            }),
        });
    }
    Ok(())
}

/// Unconstrained least-squares logistic fit.
pub fn fit_logistic(points: &[Point]) -> Result<LogisticParams> {
    validate_points(points)?;
    ensure_not_flat(points)?;
    let points = sorted_by_t(points);
    let y_max = points.iter().map(|p| p.y).fold(0.0, f64::max);
    let k0 = 1.05 * y_max;
    let r0 = initial_rate(&points, k0);
    let u00 = points[0].y;

    let ts: Vec<f64> = points.iter().map(|p| p.t).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let outcome = lm::minimize(
        [k0.ln(), r0.ln(), u00.ln()],
        &ts,
        &ys,
        model_log_params,
        LmOptions::default(),
    );
    finish(outcome)
}

/// Least-squares fit of `(r, u0)` with the carrying capacity pinned.
pub fn fit_logistic_fixed_k(points: &[Point], k_fixed: f64) -> Result<LogisticParams> {
    validate_points(points)?;
    let y_max = points.iter().map(|p| p.y).fold(0.0, f64::max);
    if !(k_fixed.is_finite() && k_fixed > y_max) {
        return Err(Error::Argument(format!(
            "fixed carrying capacity {k_fixed} must exceed the largest observation {y_max}"
        )));
    }
    fit_fixed_k_inner(points, k_fixed)
}

/// As [`fit_logistic_fixed_k`] but only requires `k_fixed > 0`.
pub(crate) fn fit_fixed_k_inner(points: &[Point], k_fixed: f64) -> Result<LogisticParams> {
    validate_points(points)?;
    ensure_not_flat(points)?;
    if !(k_fixed.is_finite() && k_fixed > 0.0) {
        return Err(Error::Argument(format!(
            "fixed carrying capacity {k_fixed} must be positive"
        )));
    }
    let points = sorted_by_t(points);
    let ln_k = k_fixed.ln();
    let r0 = initial_rate(&points, k_fixed);
    let u00 = points[0].y.min(0.99 * k_fixed);

    let ts: Vec<f64> = points.iter().map(|p| p.t).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let outcome = lm::minimize(
        [r0.ln(), u00.ln()],
        &ts,
        &ys,
        |theta: &[f64; 2], t| {
            let (f, g) = model_log_params(&[ln_k, theta[0], theta[1]], t);
            (f, [g[1], g[2]])
        },
        LmOptions::default(),
    );
    let mut params = finish(LmOutcome {
        params: [ln_k, outcome.params[0], outcome.params[1]],
        rss: outcome.rss,
        iterations: outcome.iterations,
        converged: outcome.converged,
        message: outcome.message,
    })?;
    params.k = k_fixed;
    Ok(params)
}

/// Carrying capacities refitted on residual-bootstrap resamples, ascending.
///
/// Resample `b` draws from its own ChaCha stream `(seed, b)`, so the result
/// does not depend on how the refits are scheduled.
pub fn bootstrap_k(
    points: &[Point],
    fit: &LogisticParams,
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_resamples < MIN_RESAMPLES {
        return Err(Error::Argument(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {n_resamples}"
        )));
    }
    fit.check()?;
    validate_points(points)?;
    let fitted: Vec<f64> = points.iter().map(|p| fit.value(p.t)).collect();
    let residuals: Vec<f64> = points.iter().zip(&fitted).map(|(p, f)| p.y - f).collect();

    let estimates: Vec<Option<f64>> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let resample: Vec<Point> = points
                .iter()
                .zip(&fitted)
                .map(|(p, f)| Point::new(p.t, f + residuals[rng.random_range(0..residuals.len())]))
                .collect();
            fit_logistic(&resample).ok().map(|p| p.k())
        })
        .collect();

    let failed = estimates.iter().filter(|e| e.is_none()).count();
    if failed as f64 > MAX_FAILED_REFITS * n_resamples as f64 {
        return Err(Error::ConfidenceFailure {
            failed,
            total: n_resamples,
        });
    }
    let mut ks: Vec<f64> = estimates.into_iter().flatten().collect();
    ks.sort_by(f64::total_cmp);
    Ok(ks)
}

/// One-sided upper confidence value of K at `level`.
pub fn k_upper_confidence(
    points: &[Point],
    fit: &LogisticParams,
    level: f64,
    n_resamples: usize,
    seed: u64,
) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Argument(format!("confidence level {level} outside (0, 1)")));
    }
    let ks = bootstrap_k(points, fit, n_resamples, seed)?;
    Ok(stats::percentile_sorted(&ks, level))
}
