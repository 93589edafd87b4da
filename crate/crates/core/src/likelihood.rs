//! Censored-data log likelihood, maximum likelihood fitting, relative
//! likelihood grids, and profile likelihood confidence intervals.
//!
//! The likelihood is count-weighted: each observation contributes its
//! term times its multiplicity. Interval terms are evaluated on whichever
//! of the cdf/survival scales keeps the difference well conditioned, so
//! deep-tail intervals do not cancel to zero prematurely.

use crate::data::{kaplan_meier, pav_npmle, Dataset, Observation};
use crate::distribution::{ls_to_reparam, reparam_to_ls};
use crate::optimize::{
    gradient_central, hessian_central, invert_spd_2x2, nelder_mead_max, newton_polish_max,
};
use crate::{normal, Error, Family, LsParams, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// ln(1 - exp(delta)) for delta <= 0, switching forms at -ln 2 to stay
/// accurate at both ends.
fn ln_one_minus_exp(delta: f64) -> f64 {
    if delta > -std::f64::consts::LN_2 {
        (-delta.exp_m1()).ln()
    } else {
        (-delta.exp()).ln_1p()
    }
}

/// ln[F(z_u) - F(z_l)] for z_l < z_u, picking the tail that avoids
/// catastrophic cancellation.
fn ln_cdf_difference(family: Family, z_l: f64, z_u: f64) -> f64 {
    if z_l >= 0.0 {
        // Both in the upper tail: work with survival functions.
        let a = family.ln_sf(z_l);
        if a == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let delta = (family.ln_sf(z_u) - a).min(0.0);
        a + ln_one_minus_exp(delta)
    } else if z_u <= 0.0 {
        // Both in the lower tail: work with cdfs.
        let a = family.ln_cdf(z_u);
        if a == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let delta = (family.ln_cdf(z_l) - a).min(0.0);
        a + ln_one_minus_exp(delta)
    } else {
        // Straddles the center: both cdf values are moderate.
        (family.cdf(z_u) - family.cdf(z_l)).ln()
    }
}

/// Log likelihood of a dataset under a log-location-scale model.
///
/// Returns `-inf` when any observed configuration has zero probability
/// (for example a degenerate interval); never panics for valid
/// parameters.
pub fn loglik(d: &Dataset, p: &LsParams, family: Family) -> f64 {
    let ln_sigma = p.sigma.ln();
    let mut total = 0.0;
    for obs in d.observations() {
        let count = obs.count() as f64;
        let term = match *obs {
            Observation::Exact { t, .. } => {
                let z = (t.ln() - p.mu) / p.sigma;
                family.ln_pdf(z) - ln_sigma - t.ln()
            }
            Observation::Right { t, .. } => family.ln_sf((t.ln() - p.mu) / p.sigma),
            Observation::Left { t_upper, .. } => {
                family.ln_cdf((t_upper.ln() - p.mu) / p.sigma)
            }
            Observation::Interval { t_lower, t_upper, .. } => {
                let z_l = (t_lower.ln() - p.mu) / p.sigma;
                let z_u = (t_upper.ln() - p.mu) / p.sigma;
                ln_cdf_difference(family, z_l, z_u)
            }
        };
        total += count * term;
    }
    total
}

/// Result of a two-parameter maximum likelihood fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params_hat: LsParams,
    pub loglik_max: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Observed-information inverse in (mu, sigma); absent when the
    /// finite-difference information matrix is not positive definite.
    pub approx_cov: Option<[[f64; 2]; 2]>,
}

impl FitResult {
    /// Estimate of the `p` quantile of lifetime.
    pub fn quantile(&self, family: Family, p: f64) -> Result<f64> {
        crate::distribution::lls_quantile(p, &self.params_hat, family)
    }

    /// Estimate of the failure probability by time `t`; `t` must be
    /// positive.
    pub fn cdf_at(&self, family: Family, t: f64) -> f64 {
        family.cdf((t.ln() - self.params_hat.mu) / self.params_hat.sigma)
    }

    /// Serializable report with the estimate expressed in location-scale,
    /// scale/shape (eta = exp(mu), beta = 1/sigma), and quantile-anchored
    /// forms.
    pub fn report(&self, family: Family, p_r: f64) -> Result<FitReport> {
        let rp = ls_to_reparam(self.params_hat, p_r, family)?;
        Ok(FitReport {
            family,
            mu: self.params_hat.mu,
            sigma: self.params_hat.sigma,
            eta: self.params_hat.mu.exp(),
            beta: 1.0 / self.params_hat.sigma,
            p_r,
            t_pr: rp.t_pr,
            loglik: self.loglik_max,
            converged: self.converged,
            iterations: self.iterations,
            approx_cov: self.approx_cov,
        })
    }
}

/// JSON-friendly summary of a fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub family: Family,
    pub mu: f64,
    pub sigma: f64,
    pub eta: f64,
    pub beta: f64,
    pub p_r: f64,
    pub t_pr: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub approx_cov: Option<[[f64; 2]; 2]>,
}

/// Starting values from a linear fit of log time against the standard
/// quantiles of the nonparametric plot points; falls back to the center
/// and spread of representative log failure times when fewer than two
/// usable points exist.
pub(crate) fn starting_values(d: &Dataset, family: Family) -> (f64, f64) {
    let points = if d.is_exact_right() {
        kaplan_meier(d).map(|e| e.plot_points).unwrap_or_default()
    } else if d.is_current_status() {
        pav_npmle(d).map(|e| e.plot_points).unwrap_or_default()
    } else {
        Vec::new()
    };
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, p)| *p > 0.0 && *p < 1.0)
        .map(|&(t, p)| (family.quantile(p), t.ln()))
        .collect();
    if usable.len() >= 2 {
        let n = usable.len() as f64;
        let mean_w: f64 = usable.iter().map(|u| u.0).sum::<f64>() / n;
        let mean_y: f64 = usable.iter().map(|u| u.1).sum::<f64>() / n;
        let sww: f64 = usable.iter().map(|u| (u.0 - mean_w).powi(2)).sum();
        let swy: f64 = usable.iter().map(|u| (u.0 - mean_w) * (u.1 - mean_y)).sum();
        if sww > 0.0 {
            let slope = swy / sww;
            if slope.is_finite() && slope > 1e-3 {
                return (mean_y - slope * mean_w, slope);
            }
        }
    }
    // Fallback: representative log times of the failure observations.
    let mut logs = Vec::new();
    for obs in d.observations() {
        let rep = match *obs {
            Observation::Exact { t, .. } => t.ln(),
            Observation::Left { t_upper, .. } => t_upper.ln() - 0.5,
            Observation::Interval { t_lower, t_upper, .. } => 0.5 * (t_lower.ln() + t_upper.ln()),
            Observation::Right { .. } => continue,
        };
        for _ in 0..obs.count() {
            logs.push(rep);
        }
    }
    if logs.is_empty() {
        return (0.0, 1.0); // no failures: caller rejects such datasets anyway
    }
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt().max(0.25))
}

const FIT_ITER_CAP: usize = 500;
const FIT_TOL: f64 = 1e-10;

fn require_failures(d: &Dataset) -> Result<()> {
    if d.failure_units() == 0 {
        return Err(Error::Guard(
            "every unit is right-censored; the likelihood increases without bound \
             in the location, so no maximum exists"
                .into(),
        ));
    }
    Ok(())
}

/// Maximum likelihood fit over (mu, log sigma) with a simplex search
/// followed by a damped Newton polish on central differences.
///
/// Datasets whose every unit is right-censored are rejected: their
/// likelihood has no internal maximum. `converged` requires both the
/// optimizer to have settled and the finite-difference gradient norm at
/// the solution to be below 1e-6.
pub fn ml_fit(d: &Dataset, family: Family, start: Option<LsParams>) -> Result<FitResult> {
    require_failures(d)?;
    let (mu0, sigma0) = match start {
        Some(p) => (p.mu, p.sigma),
        None => starting_values(d, family),
    };
    let obj = |x: &[f64]| {
        loglik(d, &LsParams { mu: x[0], sigma: x[1].exp() }, family)
    };
    let nm = nelder_mead_max(
        &obj,
        &[mu0, sigma0.ln()],
        &[0.5 * sigma0.max(0.2), 0.3],
        FIT_TOL,
        FIT_ITER_CAP,
    );
    let (x, value, polish_steps) = newton_polish_max(&obj, &nm.x, 25);
    let grad = gradient_central(&obj, &x, 1e-6);
    let grad_norm = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
    let params_hat = LsParams::new(x[0], x[1].exp())?;
    let obj_ms = |y: &[f64]| {
        if y[1] <= 0.0 {
            f64::NEG_INFINITY
        } else {
            loglik(d, &LsParams { mu: y[0], sigma: y[1] }, family)
        }
    };
    let h = hessian_central(&obj_ms, &[params_hat.mu, params_hat.sigma], 1e-4);
    let info = [[-h[0][0], -h[0][1]], [-h[1][0], -h[1][1]]];
    Ok(FitResult {
        params_hat,
        loglik_max: value,
        converged: value.is_finite() && grad_norm < 1e-6,
        iterations: nm.iterations + polish_steps,
        approx_cov: invert_spd_2x2(&info),
    })
}

/// One-parameter fit with the scale held fixed, used mostly for
/// exponential-type analyses where sigma is pinned at 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedSigmaFit {
    pub mu_hat: f64,
    pub sigma: f64,
    pub loglik_max: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub fn ml_fit_fixed_sigma(d: &Dataset, family: Family, sigma: f64) -> Result<FixedSigmaFit> {
    require_failures(d)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("sigma must be positive and finite, got {sigma}")));
    }
    let (mu0, _) = starting_values(d, family);
    let obj = |x: &[f64]| loglik(d, &LsParams { mu: x[0], sigma }, family);
    let nm = nelder_mead_max(&obj, &[mu0], &[0.5], FIT_TOL, FIT_ITER_CAP);
    let (x, value, polish_steps) = newton_polish_max(&obj, &nm.x, 25);
    let grad = gradient_central(&obj, &x, 1e-6);
    Ok(FixedSigmaFit {
        mu_hat: x[0],
        sigma,
        loglik_max: value,
        converged: value.is_finite() && grad[0].abs() < 1e-6,
        iterations: nm.iterations + polish_steps,
    })
}

/// Relative likelihood R = exp(loglik - max) evaluated on a grid in the
/// quantile-anchored parameterization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LikelihoodGrid {
    pub p_r: f64,
    pub t_pr: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `values[i][j]` corresponds to `(t_pr[i], sigma[j])`.
    pub values: Vec<Vec<f64>>,
    /// True when the ML estimate lies inside the grid's bounding box; when
    /// false the grid maximum sits on a boundary and is below 1.
    pub contains_max: bool,
    pub fit: FitResult,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::Config(format!("{name} axis is empty")));
    }
    for w in axis.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Config(format!("{name} axis must be strictly increasing")));
        }
    }
    if axis.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Config(format!("{name} axis values must be positive and finite")));
    }
    Ok(())
}

/// Evaluates the relative likelihood over `t_pr x sigma`. Rows are
/// computed in parallel; the normalizer is the larger of the fitted
/// maximum and the best grid cell, so values always stay in (0, 1].
pub fn relative_likelihood_grid(
    d: &Dataset,
    family: Family,
    p_r: f64,
    t_pr_axis: &[f64],
    sigma_axis: &[f64],
) -> Result<LikelihoodGrid> {
    if !(p_r > 0.0 && p_r < 1.0) {
        return Err(Error::Config(format!("p_r must be in (0,1), got {p_r}")));
    }
    check_axis("t_pr", t_pr_axis)?;
    check_axis("sigma", sigma_axis)?;
    let fit = ml_fit(d, family, None)?;
    let loglik_rows: Vec<Vec<f64>> = t_pr_axis
        .par_iter()
        .map(|&t_pr| {
            sigma_axis
                .iter()
                .map(|&sigma| {
                    let rp = crate::ReparamPoint { t_pr, sigma, p_r };
                    loglik(d, &reparam_to_ls(rp, family), family)
                })
                .collect()
        })
        .collect();
    let cell_max = loglik_rows
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let normalizer = fit.loglik_max.max(cell_max);
    let values = loglik_rows
        .into_iter()
        .map(|row| row.into_iter().map(|ll| (ll - normalizer).exp()).collect())
        .collect();
    let rp_hat = ls_to_reparam(fit.params_hat, p_r, family)?;
    let inside = |v: f64, axis: &[f64]| v >= axis[0] && v <= *axis.last().unwrap();
    let contains_max =
        inside(rp_hat.t_pr, t_pr_axis) && inside(rp_hat.sigma, sigma_axis);
    Ok(LikelihoodGrid {
        p_r,
        t_pr: t_pr_axis.to_vec(),
        sigma: sigma_axis.to_vec(),
        values,
        contains_max,
        fit,
    })
}

/// Scalar summaries a profile interval can target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Failure probability F(t) at a fixed time.
    FailureProbAt { t: f64 },
    /// The `p` quantile of lifetime.
    Quantile { p: f64 },
}

/// A profile likelihood interval. Open endpoints mean the deviance never
/// reached the threshold before the search bound; the bound itself is
/// reported.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
    pub level: f64,
}

/// Profiles the likelihood over the scale with the target pinned,
/// maximizing over log sigma.
fn profile_at<C: Fn(f64, f64) -> f64>(
    d: &Dataset,
    family: Family,
    mu_of: &C,
    x: f64,
    ln_sigma_start: f64,
) -> f64 {
    let obj = |s: &[f64]| {
        let sigma = s[0].exp();
        loglik(d, &LsParams { mu: mu_of(x, sigma), sigma }, family)
    };
    let nm = nelder_mead_max(&obj, &[ln_sigma_start], &[0.3], 1e-11, 400);
    let (_, value, _) = newton_polish_max(&obj, &nm.x, 10);
    value
}

/// Profile likelihood confidence interval for a quantile or a failure
/// probability. Probabilities are searched on the logit scale and
/// quantiles on the log scale, so endpoints always stay in range; the
/// crossing is bracketed by doubling steps and then bisected to 1e-6 on
/// the search scale (relative for times, absolute logit for
/// probabilities).
pub fn profile_ci(d: &Dataset, family: Family, target: Target, level: f64) -> Result<ProfileInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level must be in (0,1), got {level}")));
    }
    let fit = ml_fit(d, family, None)?;
    let (mu_hat, sigma_hat) = (fit.params_hat.mu, fit.params_hat.sigma);
    // Deviance threshold: the chi-square(1) quantile at `level`.
    let threshold = normal::quantile(0.5 * (1.0 + level)).powi(2);

    // Search coordinate x, the constraint mu(x, sigma), the estimate, the
    // back-transform, and the search bounds.
    enum Map {
        Logit { ln_t: f64 },
        LogQuantile { w_p: f64 },
    }
    let (map, x_hat, bounds) = match target {
        Target::FailureProbAt { t } => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("time must be positive and finite, got {t}")));
            }
            let z = (t.ln() - mu_hat) / sigma_hat;
            // logit of the fitted cdf, computed on the log scale so that
            // extreme fits stay finite.
            let x_hat = family.ln_cdf(z) - family.ln_sf(z);
            (Map::Logit { ln_t: t.ln() }, x_hat, (-700.0, 700.0))
        }
        Target::Quantile { p } => {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("p must be in (0,1), got {p}")));
            }
            let w_p = family.quantile(p);
            let x_hat = mu_hat + w_p * sigma_hat;
            (Map::LogQuantile { w_p }, x_hat, (x_hat - 200.0, x_hat + 200.0))
        }
    };
    let mu_of = |x: f64, sigma: f64| -> f64 {
        match map {
            Map::Logit { ln_t } => {
                let f = 1.0 / (1.0 + (-x).exp());
                ln_t - family.quantile(f) * sigma
            }
            Map::LogQuantile { w_p } => x - w_p * sigma,
        }
    };
    let back = |x: f64| -> f64 {
        match map {
            Map::Logit { .. } => 1.0 / (1.0 + (-x).exp()),
            Map::LogQuantile { .. } => x.exp(),
        }
    };
    let ln_sigma_hat = sigma_hat.ln();
    // Optimizer noise can make the constrained maximum at x_hat fractionally
    // exceed the free maximum; rebase so the deviance is never negative.
    let base = fit.loglik_max.max(profile_at(d, family, &mu_of, x_hat, ln_sigma_hat));
    let deviance = |x: f64| -> f64 {
        let prof = profile_at(d, family, &mu_of, x, ln_sigma_hat);
        if prof == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            2.0 * (base - prof)
        }
    };

    // One-sided endpoint search: double the step until the deviance
    // crosses the threshold or the bound is hit, then bisect.
    let solve_side = |direction: f64| -> (f64, bool) {
        let bound = if direction < 0.0 { bounds.0 } else { bounds.1 };
        let mut step = 0.25;
        let mut inside = x_hat;
        loop {
            let cand = x_hat + direction * step;
            let reached_bound = if direction < 0.0 { cand <= bound } else { cand >= bound };
            let probe = if reached_bound { bound } else { cand };
            if deviance(probe) >= threshold {
                // Bisect between the last sub-threshold point and probe.
                let (mut lo, mut hi) = (inside, probe);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if (hi - lo).abs() <= 1e-6 * (1.0 + mid.abs()) {
                        break;
                    }
                    if deviance(mid) >= threshold {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return (0.5 * (lo + hi), false);
            }
            if reached_bound {
                return (bound, true);
            }
            inside = probe;
            step *= 2.0;
        }
    };
    let (x_lo, lower_open) = solve_side(-1.0);
    let (x_hi, upper_open) = solve_side(1.0);
    Ok(ProfileInterval {
        estimate: back(x_hat),
        lower: back(x_lo),
        upper: back(x_hi),
        lower_open,
        upper_open,
        level,
    })
}
