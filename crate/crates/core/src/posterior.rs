//! Posterior sampling and summaries.
//!
//! The workhorse is an adaptive Gaussian random-walk Metropolis sampler in
//! the unconstrained coordinates (log t_pr, log sigma): the proposal
//! covariance and global step size adapt during warmup (step size by a
//! Robbins-Monro recursion targeting a fixed acceptance rate) and are
//! frozen afterward, so the retained draws come from a fixed reversible
//! kernel. Around it sit convergence diagnostics, equal-tail credible
//! intervals, functional mapping of draws, and two slower but independent
//! samplers used as cross-checks: accept/reject posterior sampling against
//! prior draws, and bounded prior sampling by envelope rejection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::max_nonparametric_p;
use crate::family::Family;
use crate::fim::{build_fim_table, FimTable, FIM_TABLE_DEFAULT_SIZE};
use crate::likelihood::{loglik, ml_fit, starting_values, FitResult};
use crate::normal;
use crate::prior::{
    joint_log_prior, FimSource, JointPriorSpec, MarginalComponent, MarginalShape,
    MarginalTarget, PreparedMarginal,
};
use crate::student_t;
use crate::{Dataset, Error, LsParams, Result};

/// Axis-aligned box in the sampling coordinates (log t_pr, log sigma).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub lo_log_tpr: f64,
    pub hi_log_tpr: f64,
    pub lo_log_sigma: f64,
    pub hi_log_sigma: f64,
}

impl Rect {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lo_log_tpr.is_finite()
            && self.hi_log_tpr.is_finite()
            && self.lo_log_sigma.is_finite()
            && self.hi_log_sigma.is_finite()
            && self.lo_log_tpr < self.hi_log_tpr
            && self.lo_log_sigma < self.hi_log_sigma;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("degenerate bounding rectangle: {self:?}")))
        }
    }

    pub fn contains(&self, w: (f64, f64)) -> bool {
        w.0 >= self.lo_log_tpr
            && w.0 <= self.hi_log_tpr
            && w.1 >= self.lo_log_sigma
            && w.1 <= self.hi_log_sigma
    }
}

/// Sampler settings. The defaults give 10,000 retained draws across four
/// chains after a 2,000-iteration warmup each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub draws_per_chain: usize,
    pub warmup: usize,
    pub thin: usize,
    pub seed: u64,
    pub target_accept: f64,
    /// Hard support restriction in sampling coordinates. Required when
    /// sampling an improper prior with no likelihood attached.
    pub bounding_rect: Option<Rect>,
    /// Evaluate censored-information elements by direct quadrature instead
    /// of table interpolation. Much slower; meant for validation runs.
    pub fim_by_quadrature: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            draws_per_chain: 2_500,
            warmup: 2_000,
            thin: 1,
            seed: 0,
            target_accept: 0.35,
            bounding_rect: None,
            fim_by_quadrature: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.draws_per_chain == 0 || self.warmup == 0 || self.thin == 0 {
            return Err(Error::Config(
                "chains, draws_per_chain, warmup, and thin must all be positive".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if let Some(r) = &self.bounding_rect {
            r.validate()?;
        }
        Ok(())
    }
}

/// One retained state of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub chain: u32,
    pub iter: u32,
    pub log_tpr: f64,
    pub log_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinate {
    LogTpr,
    LogSigma,
}

/// Draws plus the metadata needed to map any draw back to (mu, sigma),
/// Weibull (eta, beta), quantiles, or failure probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawSet {
    pub draws: Vec<Draw>,
    pub family: Family,
    pub p_r: f64,
    pub t_c: Option<f64>,
    /// Post-warmup acceptance rate per chain, in chain order.
    pub acceptance: Vec<f64>,
    /// Split-chain diagnostics for (log_tpr, log_sigma); absent for
    /// single-chain or non-Markov-chain outputs.
    pub r_hat: Option<[f64; 2]>,
    pub warnings: Vec<String>,
}

impl DrawSet {
    /// One coordinate of every draw, in stored order.
    pub fn coordinate(&self, c: Coordinate) -> Vec<f64> {
        self.draws
            .iter()
            .map(|d| match c {
                Coordinate::LogTpr => d.log_tpr,
                Coordinate::LogSigma => d.log_sigma,
            })
            .collect()
    }

    /// Location-scale parameters a draw corresponds to.
    pub fn params_of(&self, d: &Draw) -> LsParams {
        let sigma = d.log_sigma.exp();
        LsParams {
            mu: d.log_tpr - self.family.quantile(self.p_r) * sigma,
            sigma,
        }
    }

    /// CSV export with the schema `chain,iter,log_tpr,log_sigma`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("chain,iter,log_tpr,log_sigma\n");
        for d in &self.draws {
            out.push_str(&format!(
                "{},{},{:.17e},{:.17e}\n",
                d.chain, d.iter, d.log_tpr, d.log_sigma
            ));
        }
        out
    }

    fn per_chain(&self, c: Coordinate) -> Vec<Vec<f64>> {
        let mut ids: Vec<u32> = self.draws.iter().map(|d| d.chain).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.iter()
            .map(|&id| {
                self.draws
                    .iter()
                    .filter(|d| d.chain == id)
                    .map(|d| match c {
                        Coordinate::LogTpr => d.log_tpr,
                        Coordinate::LogSigma => d.log_sigma,
                    })
                    .collect()
            })
            .collect()
    }
}

/// Equal-tail interval by the order-statistic interpolation rule
/// h = (n-1)p + 1: the sample {1,...,100} at level 0.90 gives
/// approximately (5.95, 95.05).
pub fn equal_tail_ci(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Data("cannot form an interval from an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("sample contains non-finite values".into()));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Config(format!("level must lie in (0, 1], got {level}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = interpolated_quantile(&sorted, (1.0 - level) / 2.0);
    let hi = interpolated_quantile(&sorted, (1.0 + level) / 2.0);
    Ok((lo, hi))
}

// pre: sorted nonempty, p in [0, 1]
fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let i = (h.floor() as usize).min(n - 2);
    let frac = h - i as f64;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

/// Split-chain potential-scale-reduction diagnostic for one coordinate.
///
/// Each chain is halved, and the statistic is
/// sqrt(1 + Vm / W) with Vm the sample variance of the half means and W
/// the mean of the half variances, so it is at least 1 by construction
/// and equals 1 exactly when every half has the same mean.
pub fn gelman_rubin(draws: &DrawSet, coordinate: Coordinate) -> Result<f64> {
    let chains = draws.per_chain(coordinate);
    if chains.len() < 2 {
        return Err(Error::Config("the diagnostic needs at least two chains".into()));
    }
    let shortest = chains.iter().map(Vec::len).min().unwrap();
    if shortest < 10 {
        return Err(Error::Config(format!(
            "the diagnostic needs at least 10 draws per chain, shortest has {shortest}"
        )));
    }
    for (k, c) in chains.iter().enumerate() {
        let (_, var) = mean_var(&c[..shortest]);
        if var == 0.0 {
            return Err(Error::Numerical(format!(
                "chain {k} has zero variance; the sampler is stuck"
            )));
        }
    }
    let half = shortest / 2;
    let mut means = Vec::with_capacity(2 * chains.len());
    let mut vars = Vec::with_capacity(2 * chains.len());
    for c in &chains {
        // First and last `half` draws; an odd middle element is dropped.
        for part in [&c[..half], &c[c.len() - half..]] {
            let (m, v) = mean_var(part);
            means.push(m);
            vars.push(v);
        }
    }
    let w: f64 = vars.iter().sum::<f64>() / vars.len() as f64;
    if w == 0.0 {
        return Err(Error::Numerical("all split halves are constant".into()));
    }
    let (_, vm) = mean_var(&means);
    Ok((1.0 + vm / w).sqrt())
}

// sample mean and (n-1)-denominator variance
fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

const Z_995: f64 = 2.575829303548900761; // standard normal 0.995 quantile

// ML point and Wald covariance pushed into (log t_pr, log sigma).
fn sampling_center(fit: &FitResult, family: Family, p_r: f64) -> (f64, f64) {
    let w = family.quantile(p_r);
    (
        fit.params_hat.mu + w * fit.params_hat.sigma,
        fit.params_hat.sigma.ln(),
    )
}

fn sampling_cov(fit: &FitResult, family: Family, p_r: f64) -> Option<[[f64; 2]; 2]> {
    let c = fit.approx_cov?;
    let w = family.quantile(p_r);
    let s = fit.params_hat.sigma;
    // Jacobian of (mu, sigma) -> (mu + w sigma, log sigma)
    let c11 = c[0][0] + 2.0 * w * c[0][1] + w * w * c[1][1];
    let c12 = (c[0][1] + w * c[1][1]) / s;
    let c22 = c[1][1] / (s * s);
    if c11.is_finite() && c12.is_finite() && c22.is_finite() && c11 >= 0.0 && c22 >= 0.0 {
        Some([[c11, c12], [c12, c22]])
    } else {
        None
    }
}

/// Per-chain starting points: uniform over the Wald 99% box around the ML
/// estimate in sampling coordinates, falling back to a jittered
/// probability-plot start when no converged fit is available. Chain k's
/// point depends only on (seed, k).
pub fn init_from_ml(
    d: &Dataset,
    fit: Option<&FitResult>,
    family: Family,
    p_r: f64,
    cfg: &SamplerConfig,
) -> Vec<(f64, f64)> {
    let good = fit.filter(|f| f.converged);
    let (center, half) = match good {
        Some(f) => {
            let c = sampling_center(f, family, p_r);
            let h = match sampling_cov(f, family, p_r) {
                Some(cov) => (Z_995 * cov[0][0].sqrt(), Z_995 * cov[1][1].sqrt()),
                None => (0.0, 0.0),
            };
            (c, h)
        }
        None => {
            let (mu0, sigma0) = starting_values(d, family);
            ((mu0 + family.quantile(p_r) * sigma0, sigma0.ln()), (0.5, 0.5))
        }
    };
    (0..cfg.chains)
        .map(|k| {
            let mut rng = crate::rng::CounterRng::new(cfg.seed, k as u64).substream(0);
            let mut w = (
                rng.uniform_range(center.0 - half.0, center.0 + half.0),
                rng.uniform_range(center.1 - half.1, center.1 + half.1),
            );
            if let Some(r) = &cfg.bounding_rect {
                w.0 = w.0.clamp(r.lo_log_tpr, r.hi_log_tpr);
                w.1 = w.1.clamp(r.lo_log_sigma, r.hi_log_sigma);
            }
            w
        })
        .collect()
}

/// Scalar functionals of the posterior a draw can be mapped to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorTarget {
    /// Failure probability by the given time.
    FailureProbAt(f64),
    /// Lifetime quantile at the given probability.
    Quantile(f64),
    Beta,
    Sigma,
}

impl PosteriorTarget {
    pub fn label(&self) -> String {
        match self {
            PosteriorTarget::FailureProbAt(t) => format!("F({t})"),
            PosteriorTarget::Quantile(p) => format!("t_{p}"),
            PosteriorTarget::Beta => "beta".into(),
            PosteriorTarget::Sigma => "sigma".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PosteriorTarget::FailureProbAt(t) if !(t.is_finite() && t > 0.0) => Err(
                Error::Config(format!("target time must be positive and finite, got {t}")),
            ),
            PosteriorTarget::Quantile(p) if !(p > 0.0 && p < 1.0) => Err(Error::Config(
                format!("target probability must lie in (0, 1), got {p}"),
            )),
            _ => Ok(()),
        }
    }

    fn apply(&self, params: &LsParams, family: Family) -> f64 {
        match *self {
            PosteriorTarget::FailureProbAt(t) => {
                family.cdf((t.ln() - params.mu) / params.sigma)
            }
            PosteriorTarget::Quantile(p) => (params.mu + family.quantile(p) * params.sigma).exp(),
            PosteriorTarget::Beta => 1.0 / params.sigma,
            PosteriorTarget::Sigma => params.sigma,
        }
    }
}

/// Posterior sample of one functional plus its equal-tail summary.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalSummary {
    pub target: PosteriorTarget,
    pub samples: Vec<f64>,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

/// Maps every draw through the requested functionals. Output sample
/// lengths equal the input draw count; nothing is dropped.
pub fn posterior_functionals(
    draws: &DrawSet,
    targets: &[PosteriorTarget],
    level: f64,
) -> Result<Vec<FunctionalSummary>> {
    for t in targets {
        t.validate()?;
    }
    targets
        .iter()
        .map(|&target| {
            let samples: Vec<f64> = draws
                .draws
                .iter()
                .map(|d| target.apply(&draws.params_of(d), draws.family))
                .collect();
            let mut sorted = samples.clone();
            sorted.sort_by(f64::total_cmp);
            let median = interpolated_quantile(&sorted, 0.5);
            let (lower, upper) = equal_tail_ci(&samples, level)?;
            Ok(FunctionalSummary {
                target,
                samples,
                median,
                lower,
                upper,
                level,
            })
        })
        .collect()
}

/// JSON-ready summary of a sampling run: interval estimates, diagnostics,
/// and any warnings, without the raw samples.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorSummary {
    pub family: Family,
    pub p_r: f64,
    pub t_c: Option<f64>,
    pub n_draws: usize,
    pub acceptance: Vec<f64>,
    pub r_hat: Option<[f64; 2]>,
    pub estimates: Vec<EstimateLine>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateLine {
    pub target: String,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

pub fn summarize(
    draws: &DrawSet,
    targets: &[PosteriorTarget],
    level: f64,
) -> Result<PosteriorSummary> {
    let fs = posterior_functionals(draws, targets, level)?;
    Ok(PosteriorSummary {
        family: draws.family,
        p_r: draws.p_r,
        t_c: draws.t_c,
        n_draws: draws.draws.len(),
        acceptance: draws.acceptance.clone(),
        r_hat: draws.r_hat,
        estimates: fs
            .iter()
            .map(|f| EstimateLine {
                target: f.target.label(),
                median: f.median,
                lower: f.lower,
                upper: f.upper,
                level: f.level,
            })
            .collect(),
        warnings: draws.warnings.clone(),
    })
}

// Does evaluating this prior consult the censored-information elements?
fn prior_consults_information(spec: &JointPriorSpec) -> bool {
    match spec {
        JointPriorSpec::Noninf(ns) => {
            ns.kind != crate::prior::NoninfKind::Flat
                && matches!(ns.censoring, crate::prior::CensoringSpec::Type1(_))
        }
        JointPriorSpec::Product { location, scale } => {
            matches!(location, MarginalComponent::Cj { .. })
                || matches!(scale, MarginalComponent::Cj { .. })
        }
    }
}

fn prior_t_c(spec: &JointPriorSpec) -> Option<f64> {
    match spec {
        JointPriorSpec::Noninf(ns) => match ns.censoring {
            crate::prior::CensoringSpec::Type1(t) => Some(t),
            crate::prior::CensoringSpec::Type2 => None,
        },
        JointPriorSpec::Product { location, scale } => [location, scale]
            .iter()
            .find_map(|c| match c {
                MarginalComponent::Cj { t_c, .. } => Some(*t_c),
                _ => None,
            }),
    }
}

fn prior_p_r(spec: &JointPriorSpec) -> Option<f64> {
    match spec {
        JointPriorSpec::Noninf(ns) => ns.p_r,
        JointPriorSpec::Product { location, scale } => [location, scale]
            .iter()
            .find_map(|c| match c {
                MarginalComponent::Cj { p_r, .. } => Some(*p_r),
                _ => None,
            }),
    }
}

// Resolves the reparameterizing probability: an explicit value must agree
// with one the prior already carries; with neither, fall back to half the
// maximum nonparametric cdf estimate from the data.
fn resolve_p_r(
    prior: &JointPriorSpec,
    explicit: Option<f64>,
    d: Option<&Dataset>,
) -> Result<(f64, Option<String>)> {
    if let Some(p) = explicit {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!("p_r must lie in (0, 1), got {p}")));
        }
    }
    let implied = prior_p_r(prior);
    match (explicit, implied) {
        (Some(e), Some(i)) if e != i => Err(Error::Config(format!(
            "p_r given as {e} but the prior is built around {i}"
        ))),
        (Some(e), _) => Ok((e, None)),
        (None, Some(i)) => Ok((i, None)),
        (None, None) => {
            let d = d.ok_or_else(|| {
                Error::Config("p_r is required when no dataset is attached".into())
            })?;
            let p = max_nonparametric_p(d)? / 2.0;
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(
                    "cannot default p_r: the data show no failures; pass p_r explicitly".into(),
                ));
            }
            Ok((p, Some(format!("note: p_r defaulted to {p} (half the maximum nonparametric cdf estimate)"))))
        }
    }
}

// Log posterior kernel over sampling coordinates, shared by all chains.
// Holds only read-only state, so chains can evaluate it concurrently.
struct LogPosterior<'a> {
    data: Option<&'a Dataset>,
    family: Family,
    prior: &'a JointPriorSpec,
    w_pr: f64,
    table: Option<&'a FimTable>,
    rect: Option<Rect>,
}

impl LogPosterior<'_> {
    fn source(&self) -> FimSource<'_> {
        match self.table {
            Some(t) => FimSource::Table(t),
            None => FimSource::Direct(self.family),
        }
    }

    fn eval(&self, w: (f64, f64)) -> f64 {
        if !(w.0.is_finite() && w.1.is_finite()) {
            return f64::NEG_INFINITY;
        }
        if let Some(r) = &self.rect {
            if !r.contains(w) {
                return f64::NEG_INFINITY;
            }
        }
        let prior_ld = match joint_log_prior(self.prior, w, &self.source()) {
            Ok(v) if !v.is_nan() => v,
            _ => return f64::NEG_INFINITY,
        };
        let ll = match self.data {
            Some(d) => {
                let sigma = w.1.exp();
                let mu = w.0 - self.w_pr * sigma;
                if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
                    return f64::NEG_INFINITY;
                }
                loglik(d, &LsParams { mu, sigma }, self.family)
            }
            None => 0.0,
        };
        let v = prior_ld + ll;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

// Lower Cholesky factor of a symmetric positive 2x2 matrix, with a
// diagonal fallback when the matrix is numerically indefinite.
fn chol2(c: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let a = c[0][0];
    if a > 0.0 {
        let l11 = a.sqrt();
        let l21 = c[0][1] / l11;
        let rest = c[1][1] - l21 * l21;
        if rest > 0.0 {
            return [[l11, 0.0], [l21, rest.sqrt()]];
        }
    }
    [
        [c[0][0].max(1e-12).sqrt(), 0.0],
        [0.0, c[1][1].max(1e-12).sqrt()],
    ]
}

// Optimal isotropic scaling for a 2-dimensional Gaussian random walk.
const RW_BASE_SCALE: f64 = 2.38 / std::f64::consts::SQRT_2;

struct ChainOutput {
    states: Vec<(f64, f64)>,
    accepted: usize,
    proposals: usize,
}

fn run_chain(
    lp: &LogPosterior,
    x0: (f64, f64),
    init_cov: [[f64; 2]; 2],
    cfg: &SamplerConfig,
    mut rng: crate::rng::CounterRng,
) -> Result<ChainOutput> {
    let mut x = x0;
    let mut fx = lp.eval(x);
    if fx == f64::NEG_INFINITY {
        return Err(Error::Numerical(format!(
            "chain started at a point of zero posterior density: {x:?}"
        )));
    }
    let mut chol = chol2(init_cov);
    let mut ln_scale = 0.0_f64;
    // Running moments of the warmup trajectory for covariance adaptation.
    let mut count = 0.0_f64;
    let mut mean = [0.0_f64; 2];
    let mut m2 = [0.0_f64; 3]; // upper triangle: (0,0), (0,1), (1,1)
    for t in 0..cfg.warmup {
        let step = ln_scale.exp() * RW_BASE_SCALE;
        let (z1, z2) = (rng.normal(), rng.normal());
        let y = (
            x.0 + step * chol[0][0] * z1,
            x.1 + step * (chol[1][0] * z1 + chol[1][1] * z2),
        );
        let fy = lp.eval(y);
        let alpha = if fy == f64::NEG_INFINITY {
            0.0
        } else {
            (fy - fx).exp().min(1.0)
        };
        if rng.uniform() < alpha {
            x = y;
            fx = fy;
        }
        // Robbins-Monro on the log step size, decaying as t^-0.7.
        ln_scale += (alpha - cfg.target_accept) / ((t + 1) as f64).powf(0.7);
        ln_scale = ln_scale.clamp(-10.0, 10.0);
        count += 1.0;
        let d0 = x.0 - mean[0];
        let d1 = x.1 - mean[1];
        mean[0] += d0 / count;
        mean[1] += d1 / count;
        m2[0] += d0 * (x.0 - mean[0]);
        m2[1] += d0 * (x.1 - mean[1]);
        m2[2] += d1 * (x.1 - mean[1]);
        if t >= 199 && (t + 1) % 100 == 0 {
            let denom = count - 1.0;
            let emp = [
                [m2[0] / denom + 1e-9, m2[1] / denom],
                [m2[1] / denom, m2[2] / denom + 1e-9],
            ];
            chol = chol2(emp);
        }
    }
    // Adaptation is frozen from here on: a fixed reversible kernel.
    let step = ln_scale.exp() * RW_BASE_SCALE;
    let total = cfg
        .draws_per_chain
        .checked_mul(cfg.thin)
        .ok_or_else(|| Error::Config("draws_per_chain * thin overflows".into()))?;
    let mut states = Vec::with_capacity(cfg.draws_per_chain);
    let mut accepted = 0;
    for i in 1..=total {
        let (z1, z2) = (rng.normal(), rng.normal());
        let y = (
            x.0 + step * chol[0][0] * z1,
            x.1 + step * (chol[1][0] * z1 + chol[1][1] * z2),
        );
        let fy = lp.eval(y);
        let alpha = if fy == f64::NEG_INFINITY {
            0.0
        } else {
            (fy - fx).exp().min(1.0)
        };
        if rng.uniform() < alpha {
            x = y;
            fx = fy;
            accepted += 1;
        }
        if i % cfg.thin == 0 {
            states.push(x);
        }
    }
    Ok(ChainOutput {
        states,
        accepted,
        proposals: total,
    })
}

const R_HAT_WARN: f64 = 1.05;

/// Draws from the posterior of (log t_pr, log sigma) by adaptive
/// random-walk Metropolis.
///
/// `p_r` may be omitted when the prior pins it down or when the data can
/// supply the default (half the maximum nonparametric cdf estimate).
/// Improper priors require at least three failures; exactly three earns a
/// warning. Identical inputs (including the seed) give bitwise-identical
/// output regardless of thread count.
pub fn sample_posterior(
    d: &Dataset,
    family: Family,
    prior: &JointPriorSpec,
    p_r: Option<f64>,
    cfg: &SamplerConfig,
) -> Result<DrawSet> {
    let owned = if prior_consults_information(prior) && !cfg.fim_by_quadrature {
        Some(build_fim_table(family, FIM_TABLE_DEFAULT_SIZE)?)
    } else {
        None
    };
    sample_posterior_prepared(d, family, prior, p_r, cfg, owned.as_ref())
}

/// Same as [`sample_posterior`] but reuses a caller-built information
/// table, so repeated fits of the same family (simulation replicates)
/// skip the table construction. The table is consulted only when the
/// prior needs censored-information elements and `fim_by_quadrature` is
/// off; passing `None` in that situation falls back to direct quadrature.
pub fn sample_posterior_prepared(
    d: &Dataset,
    family: Family,
    prior: &JointPriorSpec,
    p_r: Option<f64>,
    cfg: &SamplerConfig,
    table: Option<&FimTable>,
) -> Result<DrawSet> {
    cfg.validate()?;
    prior.validate()?;
    if let Some(t) = table {
        if t.family != family {
            return Err(Error::Config(format!(
                "information table was built for {:?}, data are {:?}",
                t.family, family
            )));
        }
    }
    let mut warnings = Vec::new();
    let (p_r, note) = resolve_p_r(prior, p_r, Some(d))?;
    if let Some(n) = note {
        warnings.push(n);
    }
    if !prior.is_proper() {
        let nf = d.failure_units();
        if nf < 3 {
            return Err(Error::Guard(format!(
                "an improper prior needs at least three failures; the data have {nf}"
            )));
        }
        if nf == 3 {
            warnings.push(
                "exactly three failures under an improper prior: posterior tails may be \
                 heavy and interval endpoints unstable"
                    .into(),
            );
        }
        let any_direct_failure = d.observations().iter().any(|o| {
            matches!(
                o,
                crate::data::Observation::Exact { .. } | crate::data::Observation::Interval { .. }
            )
        });
        if !any_direct_failure {
            warnings.push(
                "every failure is left-censored; under an improper prior the posterior \
                 may itself be improper"
                    .into(),
            );
        }
    }
    let table = if prior_consults_information(prior) && !cfg.fim_by_quadrature {
        if table.is_some() {
            warnings.push(
                "note: censored-information elements come from table interpolation; set \
                 fim_by_quadrature to integrate directly"
                    .into(),
            );
        }
        table
    } else {
        None
    };
    let lp = LogPosterior {
        data: Some(d),
        family,
        prior,
        w_pr: family.quantile(p_r),
        table,
        rect: cfg.bounding_rect.clone(),
    };
    let fit = ml_fit(d, family, None).ok();
    let starts = init_from_ml(d, fit.as_ref(), family, p_r, cfg);
    let init_cov = fit
        .as_ref()
        .filter(|f| f.converged)
        .and_then(|f| sampling_cov(f, family, p_r))
        .map(|c| [[c[0][0].max(1e-8), c[0][1]], [c[0][1], c[1][1].max(1e-8)]])
        .unwrap_or([[0.04, 0.0], [0.0, 0.04]]);
    let outputs: Result<Vec<ChainOutput>> = (0..cfg.chains)
        .into_par_iter()
        .map(|k| {
            let rng = crate::rng::CounterRng::new(cfg.seed, k as u64).substream(1);
            run_chain(&lp, starts[k], init_cov, cfg, rng)
        })
        .collect();
    let outputs = outputs?;
    let mut draws = Vec::with_capacity(cfg.chains * cfg.draws_per_chain);
    let mut acceptance = Vec::with_capacity(cfg.chains);
    for (k, out) in outputs.iter().enumerate() {
        for (i, &(w1, w2)) in out.states.iter().enumerate() {
            draws.push(Draw {
                chain: k as u32,
                iter: i as u32,
                log_tpr: w1,
                log_sigma: w2,
            });
        }
        acceptance.push(out.accepted as f64 / out.proposals as f64);
    }
    for (k, &a) in acceptance.iter().enumerate() {
        if !(0.15..=0.6).contains(&a) {
            warnings.push(format!(
                "chain {k} post-warmup acceptance {a:.3} is outside [0.15, 0.60]"
            ));
        }
    }
    let mut set = DrawSet {
        draws,
        family,
        p_r,
        t_c: prior_t_c(prior).or_else(|| d.max_censoring_time()),
        acceptance,
        r_hat: None,
        warnings,
    };
    if cfg.chains >= 2 && cfg.draws_per_chain >= 10 {
        match (
            gelman_rubin(&set, Coordinate::LogTpr),
            gelman_rubin(&set, Coordinate::LogSigma),
        ) {
            (Ok(r1), Ok(r2)) => {
                if r1.max(r2) > R_HAT_WARN {
                    set.warnings.push(format!(
                        "convergence diagnostic above {R_HAT_WARN}: r_hat = ({r1:.4}, {r2:.4})"
                    ));
                }
                set.r_hat = Some([r1, r2]);
            }
            (a, b) => {
                for e in [a.err(), b.err()].into_iter().flatten() {
                    set.warnings.push(format!("diagnostic unavailable: {e}"));
                }
            }
        }
    }
    Ok(set)
}

// Draws one value of the sampling coordinate covered by an informative
// marginal, by inverse-cdf (truncated shapes sample the parent conditioned
// on positivity, exactly).
fn sample_marginal_coordinate(
    m: &PreparedMarginal,
    shape: MarginalShape,
    rng: &mut crate::rng::CounterRng,
) -> f64 {
    let p = m.params();
    let u = match shape {
        MarginalShape::Lognormal => p.mu_star + p.sigma_star * rng.normal(),
        MarginalShape::LogLst => {
            p.mu_star + p.sigma_star * student_t::quantile(rng.uniform(), p.df.expect("validated"))
        }
        MarginalShape::TruncatedNormal => {
            let t0 = normal::cdf(-p.mu_star / p.sigma_star);
            let v = t0 + rng.uniform() * (1.0 - t0);
            (p.mu_star + p.sigma_star * normal::quantile(v)).ln()
        }
        MarginalShape::TruncatedLst => {
            let df = p.df.expect("validated");
            let t0 = student_t::cdf(-p.mu_star / p.sigma_star, df);
            let v = t0 + rng.uniform() * (1.0 - t0);
            (p.mu_star + p.sigma_star * student_t::quantile(v, df)).ln()
        }
    };
    // u is the coordinate the parent acts on; beta marginals sit on the
    // reciprocal of sigma.
    match m.target() {
        MarginalTarget::Beta => -u,
        MarginalTarget::TPr | MarginalTarget::Sigma => u,
    }
}

enum PriorSampler<'a> {
    Proper {
        location: (PreparedMarginal, MarginalShape),
        scale: (PreparedMarginal, MarginalShape),
    },
    Bounded {
        lp: &'a LogPosterior<'a>,
        rect: Rect,
        ld_max: f64,
    },
}

impl PriorSampler<'_> {
    // One prior draw in sampling coordinates. The bounded variant runs
    // envelope rejection against the scanned maximum.
    fn draw(&self, rng: &mut crate::rng::CounterRng) -> (f64, f64) {
        match self {
            PriorSampler::Proper { location, scale } => (
                sample_marginal_coordinate(&location.0, location.1, rng),
                sample_marginal_coordinate(&scale.0, scale.1, rng),
            ),
            PriorSampler::Bounded { lp, rect, ld_max } => loop {
                let w = (
                    rng.uniform_range(rect.lo_log_tpr, rect.hi_log_tpr),
                    rng.uniform_range(rect.lo_log_sigma, rect.hi_log_sigma),
                );
                let ld = lp.eval(w);
                if ld == f64::NEG_INFINITY {
                    continue;
                }
                if rng.uniform().ln() < ld - ld_max {
                    return w;
                }
            },
        }
    }
}

// Maximum of the log density over the rectangle: coarse scan plus three
// shrinking local refinements around the best cell. The densities this
// serves are smooth away from their cliff edges, so the scanned maximum
// is within interpolation error of the true one.
fn scan_log_density_max(lp: &LogPosterior, rect: &Rect) -> Result<f64> {
    let eval_grid = |lo: (f64, f64), hi: (f64, f64), n: usize| -> (f64, (f64, f64)) {
        let mut best = (f64::NEG_INFINITY, (lo.0, lo.1));
        for i in 0..n {
            let w1 = lo.0 + (hi.0 - lo.0) * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let w2 = lo.1 + (hi.1 - lo.1) * j as f64 / (n - 1) as f64;
                let ld = lp.eval((w1, w2));
                if ld > best.0 {
                    best = (ld, (w1, w2));
                }
            }
        }
        best
    };
    let mut lo = (rect.lo_log_tpr, rect.lo_log_sigma);
    let mut hi = (rect.hi_log_tpr, rect.hi_log_sigma);
    let (mut best_ld, mut best_at) = eval_grid(lo, hi, 101);
    if best_ld == f64::NEG_INFINITY {
        return Err(Error::Numerical(
            "prior density is zero everywhere on the bounding rectangle".into(),
        ));
    }
    let mut span = ((hi.0 - lo.0) / 100.0, (hi.1 - lo.1) / 100.0);
    for _ in 0..3 {
        lo = (
            (best_at.0 - span.0).max(rect.lo_log_tpr),
            (best_at.1 - span.1).max(rect.lo_log_sigma),
        );
        hi = (
            (best_at.0 + span.0).min(rect.hi_log_tpr),
            (best_at.1 + span.1).min(rect.hi_log_sigma),
        );
        let (ld, at) = eval_grid(lo, hi, 21);
        if ld > best_ld {
            best_ld = ld;
            best_at = at;
        }
        span = (span.0 / 10.0, span.1 / 10.0);
    }
    Ok(best_ld)
}

fn build_prior_sampler<'a>(
    prior: &JointPriorSpec,
    lp: &'a LogPosterior<'a>,
    rect: Option<&Rect>,
) -> Result<PriorSampler<'a>> {
    if let JointPriorSpec::Product {
        location: MarginalComponent::Informative(lm),
        scale: MarginalComponent::Informative(sm),
    } = prior
    {
        return Ok(PriorSampler::Proper {
            location: (PreparedMarginal::prepare(lm)?, lm.shape),
            scale: (PreparedMarginal::prepare(sm)?, sm.shape),
        });
    }
    let rect = rect
        .ok_or_else(|| {
            Error::Config("an improper prior can only be sampled inside a bounding rectangle".into())
        })?
        .clone();
    rect.validate()?;
    let ld_max = scan_log_density_max(lp, &rect)?;
    Ok(PriorSampler::Bounded { lp, rect, ld_max })
}

const MIN_ACCEPT_RATE: f64 = 1e-6;
const ACCEPT_CHECK_EVERY: u64 = 1_000_000;

/// Accept/reject posterior sampling: prior draws are kept with probability
/// equal to the relative likelihood, giving independent posterior draws
/// (exact up to the bounding-rectangle truncation for improper priors).
///
/// With `d = None` the likelihood is identically 1 and the output is the
/// (possibly rectangle-restricted) prior itself.
pub fn smith_gelfand(
    d: Option<&Dataset>,
    family: Family,
    prior: &JointPriorSpec,
    p_r: Option<f64>,
    n_target: usize,
    cfg: &SamplerConfig,
) -> Result<DrawSet> {
    cfg.validate()?;
    prior.validate()?;
    if n_target == 0 {
        return Err(Error::Config("n_target must be positive".into()));
    }
    let mut warnings = Vec::new();
    let (p_r, note) = resolve_p_r(prior, p_r, d)?;
    if let Some(n) = note {
        warnings.push(n);
    }
    let owned = if prior_consults_information(prior) && !cfg.fim_by_quadrature {
        Some(build_fim_table(family, FIM_TABLE_DEFAULT_SIZE)?)
    } else {
        None
    };
    // No rect here: the prior sampler owns the restriction; the density
    // itself is evaluated unrestricted.
    let lp = LogPosterior {
        data: None,
        family,
        prior,
        w_pr: family.quantile(p_r),
        table: owned.as_ref(),
        rect: None,
    };
    let sampler = build_prior_sampler(prior, &lp, cfg.bounding_rect.as_ref())?;
    if matches!(sampler, PriorSampler::Bounded { .. }) {
        warnings.push(
            "improper prior restricted to the bounding rectangle; draws are exact for \
             the truncated prior"
                .into(),
        );
    }
    let loglik_max = match d {
        Some(data) => ml_fit(data, family, None)?.loglik_max,
        None => 0.0,
    };
    let w_pr = family.quantile(p_r);
    let mut rng = crate::rng::CounterRng::new(cfg.seed, 0).substream(2);
    let mut draws = Vec::with_capacity(n_target);
    let mut attempts: u64 = 0;
    while draws.len() < n_target {
        attempts += 1;
        let w = sampler.draw(&mut rng);
        let ll = match d {
            Some(data) => {
                let sigma = w.1.exp();
                let mu = w.0 - w_pr * sigma;
                if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
                    continue;
                }
                loglik(data, &LsParams { mu, sigma }, family)
            }
            None => 0.0,
        };
        // loglik_max is the supremum, so the ratio is a probability; tiny
        // polish slack is clamped away.
        if rng.uniform().ln() < (ll - loglik_max).min(0.0) {
            draws.push(Draw {
                chain: 0,
                iter: draws.len() as u32,
                log_tpr: w.0,
                log_sigma: w.1,
            });
        }
        if attempts % ACCEPT_CHECK_EVERY == 0 {
            let rate = draws.len() as f64 / attempts as f64;
            if rate < MIN_ACCEPT_RATE {
                return Err(Error::Numerical(format!(
                    "rejection sampling stalled: {} of {attempts} prior draws accepted \
                     (rate {rate:.2e}); the prior barely overlaps the likelihood",
                    draws.len()
                )));
            }
        }
    }
    let rate = n_target as f64 / attempts as f64;
    Ok(DrawSet {
        draws,
        family,
        p_r,
        t_c: prior_t_c(prior).or_else(|| d.and_then(|d| d.max_censoring_time())),
        acceptance: vec![rate],
        r_hat: None,
        warnings,
    })
}

/// Draws from a prior restricted to a rectangle, by uniform-envelope
/// rejection against the scanned density maximum. Proper product priors
/// are sampled directly and then filtered to the rectangle.
pub fn sample_prior_bounded(
    prior: &JointPriorSpec,
    rect: &Rect,
    n: usize,
    family: Family,
    p_r: Option<f64>,
    cfg: &SamplerConfig,
) -> Result<DrawSet> {
    prior.validate()?;
    rect.validate()?;
    if n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    let (p_r, _) = resolve_p_r(prior, p_r, None)?;
    let owned = if prior_consults_information(prior) && !cfg.fim_by_quadrature {
        Some(build_fim_table(family, FIM_TABLE_DEFAULT_SIZE)?)
    } else {
        None
    };
    let lp = LogPosterior {
        data: None,
        family,
        prior,
        w_pr: family.quantile(p_r),
        table: owned.as_ref(),
        rect: None,
    };
    let mut rng = crate::rng::CounterRng::new(cfg.seed, 0).substream(3);
    let mut draws = Vec::with_capacity(n);
    let mut attempts: u64 = 0;
    if prior.is_proper() {
        let sampler = build_prior_sampler(prior, &lp, None)?;
        while draws.len() < n {
            attempts += 1;
            let w = sampler.draw(&mut rng);
            if rect.contains(w) {
                draws.push(Draw {
                    chain: 0,
                    iter: draws.len() as u32,
                    log_tpr: w.0,
                    log_sigma: w.1,
                });
            }
            if attempts % ACCEPT_CHECK_EVERY == 0
                && (draws.len() as f64 / attempts as f64) < MIN_ACCEPT_RATE
            {
                return Err(Error::Numerical(
                    "the proper prior places almost no mass on the rectangle".into(),
                ));
            }
        }
    } else {
        let ld_max = scan_log_density_max(&lp, rect)?;
        while draws.len() < n {
            attempts += 1;
            let w = (
                rng.uniform_range(rect.lo_log_tpr, rect.hi_log_tpr),
                rng.uniform_range(rect.lo_log_sigma, rect.hi_log_sigma),
            );
            let ld = lp.eval(w);
            if ld != f64::NEG_INFINITY && rng.uniform().ln() < ld - ld_max {
                draws.push(Draw {
                    chain: 0,
                    iter: draws.len() as u32,
                    log_tpr: w.0,
                    log_sigma: w.1,
                });
            }
            if attempts % ACCEPT_CHECK_EVERY == 0
                && (draws.len() as f64 / attempts as f64) < MIN_ACCEPT_RATE
            {
                return Err(Error::Numerical(
                    "envelope rejection stalled; the density mass is far below its peak \
                     almost everywhere on the rectangle"
                        .into(),
                ));
            }
        }
    }
    Ok(DrawSet {
        draws,
        family,
        p_r,
        t_c: prior_t_c(prior),
        acceptance: vec![n as f64 / attempts as f64],
        r_hat: None,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;
    use crate::prior::{
        CensoringSpec, InformativeMarginalSpec, NoninfKind, NoninfPriorSpec, Parameterization,
        RefOrder,
    };
    use crate::rng::CounterRng;

    fn flat_prior() -> JointPriorSpec {
        JointPriorSpec::Noninf(NoninfPriorSpec {
            kind: NoninfKind::Flat,
            parameterization: Parameterization::LogTprLogSigma,
            censoring: CensoringSpec::Type2,
            type2_fraction: None,
            p_r: None,
            t_e: None,
            order: RefOrder::Unordered,
        })
    }

    fn ij_t1_prior(t_c: f64, p_r: f64) -> JointPriorSpec {
        JointPriorSpec::Noninf(NoninfPriorSpec {
            kind: NoninfKind::Ij,
            parameterization: Parameterization::LogTprLogSigma,
            censoring: CensoringSpec::Type1(t_c),
            type2_fraction: None,
            p_r: Some(p_r),
            t_e: None,
            order: RefOrder::Unordered,
        })
    }

    fn lognormal_dataset(n: usize, mu: f64, sigma: f64, seed: u64) -> Dataset {
        let mut rng = CounterRng::new(seed, 900);
        let obs: Vec<Observation> = (0..n)
            .map(|_| Observation::Exact {
                t: (mu + sigma * rng.normal()).exp(),
                count: 1,
            })
            .collect();
        Dataset::new(obs, "hours").unwrap()
    }

    fn toy_draws(chains: Vec<Vec<(f64, f64)>>) -> DrawSet {
        let mut draws = Vec::new();
        for (k, c) in chains.iter().enumerate() {
            for (i, &(a, b)) in c.iter().enumerate() {
                draws.push(Draw {
                    chain: k as u32,
                    iter: i as u32,
                    log_tpr: a,
                    log_sigma: b,
                });
            }
        }
        DrawSet {
            draws,
            family: Family::Normal,
            p_r: 0.1,
            t_c: None,
            acceptance: vec![],
            r_hat: None,
            warnings: vec![],
        }
    }

    #[test]
    fn equal_tail_interval_follows_the_interpolation_rule() {
        let sample: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = equal_tail_ci(&sample, 0.90).unwrap();
        assert!((lo - 5.95).abs() < 1e-12, "{lo}");
        assert!((hi - 95.05).abs() < 1e-12, "{hi}");
        let (lo, hi) = equal_tail_ci(&sample, 1.0).unwrap();
        assert_eq!((lo, hi), (1.0, 100.0));
        let (lo, hi) = equal_tail_ci(&[7.0; 25], 0.95).unwrap();
        assert_eq!((lo, hi), (7.0, 7.0));
        assert!(equal_tail_ci(&[], 0.9).is_err());
        assert!(equal_tail_ci(&[1.0, f64::NAN], 0.9).is_err());
        assert!(equal_tail_ci(&[1.0], 1.5).is_err());
        // Unsorted input gives the same answer.
        let (a, b) = equal_tail_ci(&[3.0, 1.0, 2.0, 5.0, 4.0], 0.5).unwrap();
        assert_eq!((a, b), (2.0, 4.0));
    }

    #[test]
    fn scale_reduction_hits_its_reference_cases() {
        // Mirror-symmetric halves make every half mean equal, so the
        // diagnostic is exactly 1 even for identical chains.
        let seq: Vec<f64> = (0..50)
            .map(|i| (i as f64 * 0.7).sin())
            .chain((0..50).map(|i| ((49 - i) as f64 * 0.7).sin()))
            .collect();
        let chains = vec![
            seq.iter().map(|&v| (v, -v)).collect::<Vec<_>>(),
            seq.iter().map(|&v| (v, -v)).collect(),
        ];
        let ds = toy_draws(chains);
        let r = gelman_rubin(&ds, Coordinate::LogTpr).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "{r}");

        // Two chains ten standard deviations apart.
        let mut rng = CounterRng::new(5, 0);
        let a: Vec<(f64, f64)> = (0..400).map(|_| (rng.normal(), 0.5 * rng.normal())).collect();
        let b: Vec<(f64, f64)> = (0..400)
            .map(|_| (10.0 + rng.normal(), 0.5 * rng.normal()))
            .collect();
        let ds = toy_draws(vec![a, b]);
        assert!(gelman_rubin(&ds, Coordinate::LogTpr).unwrap() > 2.0);

        // Independent stationary chains sit just above 1.
        let chains: Vec<Vec<(f64, f64)>> = (0..4)
            .map(|k| {
                let mut r = CounterRng::new(99, k);
                (0..10_000).map(|_| (r.normal(), r.normal())).collect()
            })
            .collect();
        let ds = toy_draws(chains);
        let r = gelman_rubin(&ds, Coordinate::LogSigma).unwrap();
        assert!(r >= 1.0 && r < 1.01, "{r}");

        // Degenerate chains are an error, not a silent 1.0.
        let ds = toy_draws(vec![vec![(1.0, 1.0); 40], vec![(2.0, 2.0); 40]]);
        assert!(matches!(
            gelman_rubin(&ds, Coordinate::LogTpr),
            Err(Error::Numerical(_))
        ));
        let one = toy_draws(vec![vec![(1.0, 1.0); 40]]);
        assert!(gelman_rubin(&one, Coordinate::LogTpr).is_err());
    }

    #[test]
    fn initial_points_fill_the_wald_box_and_collapse_when_it_does() {
        let d = lognormal_dataset(60, 2.0, 0.7, 11);
        let fit = ml_fit(&d, Family::Normal, None).unwrap();
        assert!(fit.converged);
        let cfg = SamplerConfig { chains: 64, ..SamplerConfig::default() };
        let starts = init_from_ml(&d, Some(&fit), Family::Normal, 0.1, &cfg);
        assert_eq!(starts.len(), 64);
        let center = sampling_center(&fit, Family::Normal, 0.1);
        let cov = sampling_cov(&fit, Family::Normal, 0.1).unwrap();
        let half = (Z_995 * cov[0][0].sqrt(), Z_995 * cov[1][1].sqrt());
        for &(a, b) in &starts {
            assert!((a - center.0).abs() <= half.0 + 1e-12);
            assert!((b - center.1).abs() <= half.1 + 1e-12);
        }
        // Distinct chains get distinct points.
        let mut uniq = starts.clone();
        uniq.sort_by(|x, y| x.partial_cmp(y).unwrap());
        uniq.dedup();
        assert_eq!(uniq.len(), starts.len());
        // Different seeds move every point.
        let other = init_from_ml(
            &d,
            Some(&fit),
            Family::Normal,
            0.1,
            &SamplerConfig { chains: 64, seed: 1, ..SamplerConfig::default() },
        );
        assert!(starts.iter().zip(&other).all(|(a, b)| a != b));
        // A zero-width box puts every chain at the ML point.
        let mut exact = fit.clone();
        exact.approx_cov = Some([[0.0, 0.0], [0.0, 0.0]]);
        let starts = init_from_ml(&d, Some(&exact), Family::Normal, 0.1, &cfg);
        for &(a, b) in &starts {
            assert_eq!((a, b), center);
        }
        // A non-converged fit falls back to a jittered plot start.
        let mut broken = fit.clone();
        broken.converged = false;
        let starts = init_from_ml(&d, Some(&broken), Family::Normal, 0.1, &cfg);
        let (mu0, s0) = starting_values(&d, Family::Normal);
        let c = (mu0 + Family::Normal.quantile(0.1) * s0, s0.ln());
        for &(a, b) in &starts {
            assert!((a - c.0).abs() <= 0.5 && (b - c.1).abs() <= 0.5);
        }
    }

    #[test]
    fn functionals_preserve_lengths_and_per_draw_identities() {
        let mut rng = CounterRng::new(3, 1);
        let chains: Vec<Vec<(f64, f64)>> = (0..2)
            .map(|_| {
                (0..200)
                    .map(|_| (4.0 + 0.3 * rng.normal(), -0.5 + 0.2 * rng.normal()))
                    .collect()
            })
            .collect();
        let ds = toy_draws(chains);
        let t1 = 30.0;
        let t2 = 80.0;
        let fs = posterior_functionals(
            &ds,
            &[
                PosteriorTarget::FailureProbAt(t1),
                PosteriorTarget::FailureProbAt(t2),
                PosteriorTarget::Quantile(0.1),
                PosteriorTarget::Beta,
                PosteriorTarget::Sigma,
            ],
            0.95,
        )
        .unwrap();
        for f in &fs {
            assert_eq!(f.samples.len(), ds.draws.len());
            assert!(f.lower <= f.median && f.median <= f.upper);
        }
        // Per draw: F is increasing in t, the p_r quantile recovers
        // exp(log_tpr) up to roundoff, beta is the reciprocal of sigma.
        for i in 0..ds.draws.len() {
            assert!(fs[0].samples[i] < fs[1].samples[i]);
            let q = ds.draws[i].log_tpr.exp();
            assert!((fs[2].samples[i] - q).abs() < 1e-12 * q);
            assert!((fs[3].samples[i] * fs[4].samples[i] - 1.0).abs() < 1e-12);
        }
        // The median of F at the posterior-median time is one half, draw
        // by draw: map each draw's own median time.
        for d in ds.draws.iter().take(25) {
            let p = ds.params_of(d);
            let v = PosteriorTarget::FailureProbAt(p.mu.exp()).apply(&p, Family::Normal);
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!(posterior_functionals(&ds, &[PosteriorTarget::FailureProbAt(-1.0)], 0.9).is_err());
        assert!(posterior_functionals(&ds, &[PosteriorTarget::Quantile(1.0)], 0.9).is_err());
    }

    #[test]
    fn posterior_matches_ml_asymptotics_on_a_large_sample() {
        let d = lognormal_dataset(500, 1.0, 0.8, 21);
        let cfg = SamplerConfig {
            chains: 2,
            draws_per_chain: 800,
            warmup: 600,
            seed: 7,
            ..SamplerConfig::default()
        };
        let ds = sample_posterior(&d, Family::Normal, &flat_prior(), Some(0.1), &cfg).unwrap();
        assert_eq!(ds.draws.len(), 1600);
        for &a in &ds.acceptance {
            assert!((0.15..=0.6).contains(&a), "acceptance {a}");
        }
        let rh = ds.r_hat.unwrap();
        assert!(rh[0] < R_HAT_WARN && rh[1] < R_HAT_WARN, "{rh:?}");
        let fit = ml_fit(&d, Family::Normal, None).unwrap();
        let mus: Vec<f64> = ds.draws.iter().map(|d0| ds.params_of(d0).mu).collect();
        let (mean, var) = mean_var(&mus);
        assert!(
            (mean - fit.params_hat.mu).abs() < 3.0 * var.sqrt(),
            "posterior mean {mean} vs ML {}",
            fit.params_hat.mu
        );
    }

    #[test]
    fn dominating_prior_pins_the_posterior_at_its_median() {
        let d = lognormal_dataset(5, 1.0, 0.5, 31);
        // Scale prior essentially a point mass at beta = 3.
        let prior = JointPriorSpec::Product {
            location: MarginalComponent::Flat,
            scale: MarginalComponent::Informative(InformativeMarginalSpec {
                target: MarginalTarget::Beta,
                shape: MarginalShape::Lognormal,
                range99: (2.9999, 3.0001),
                df: None,
            }),
        };
        let cfg = SamplerConfig {
            chains: 2,
            draws_per_chain: 600,
            warmup: 600,
            seed: 3,
            ..SamplerConfig::default()
        };
        let ds = sample_posterior(&d, Family::Normal, &prior, Some(0.1), &cfg).unwrap();
        let fs = posterior_functionals(&ds, &[PosteriorTarget::Beta], 0.95).unwrap();
        assert!((fs[0].median - 3.0).abs() < 1e-3, "{}", fs[0].median);
    }

    #[test]
    fn improper_priors_demand_three_failures() {
        let two = Dataset::new(
            vec![
                Observation::Exact { t: 10.0, count: 2 },
                Observation::Right { t: 50.0, count: 8 },
            ],
            "hours",
        )
        .unwrap();
        let cfg = SamplerConfig {
            chains: 1,
            draws_per_chain: 50,
            warmup: 50,
            ..SamplerConfig::default()
        };
        let err = sample_posterior(&two, Family::Sev, &flat_prior(), Some(0.1), &cfg).unwrap_err();
        assert!(matches!(err, Error::Guard(_)), "{err}");
        let three = Dataset::new(
            vec![
                Observation::Exact { t: 10.0, count: 1 },
                Observation::Exact { t: 20.0, count: 1 },
                Observation::Exact { t: 30.0, count: 1 },
                Observation::Right { t: 50.0, count: 7 },
            ],
            "hours",
        )
        .unwrap();
        let ds = sample_posterior(&three, Family::Sev, &flat_prior(), Some(0.1), &cfg).unwrap();
        assert!(ds.warnings.iter().any(|w| w.contains("three failures")), "{:?}", ds.warnings);
        // Left-censored-only failure information earns its own warning.
        let current_status = Dataset::new(
            vec![
                Observation::Left { t_upper: 15.0, count: 4 },
                Observation::Right { t: 40.0, count: 6 },
            ],
            "hours",
        )
        .unwrap();
        let ds = sample_posterior(
            &current_status,
            Family::Sev,
            &flat_prior(),
            Some(0.1),
            &cfg,
        )
        .unwrap();
        assert!(
            ds.warnings.iter().any(|w| w.contains("left-censored")),
            "{:?}",
            ds.warnings
        );
        // A proper prior is exempt from the failure guard.
        let proper = JointPriorSpec::Product {
            location: MarginalComponent::Informative(InformativeMarginalSpec {
                target: MarginalTarget::TPr,
                shape: MarginalShape::Lognormal,
                range99: (2.0, 40.0),
                df: None,
            }),
            scale: MarginalComponent::Informative(InformativeMarginalSpec {
                target: MarginalTarget::Beta,
                shape: MarginalShape::Lognormal,
                range99: (0.5, 5.0),
                df: None,
            }),
        };
        sample_posterior(&two, Family::Sev, &proper, Some(0.1), &cfg).unwrap();
    }

    #[test]
    fn identical_configurations_reproduce_bitwise() {
        let d = lognormal_dataset(20, 1.5, 0.6, 41);
        let cfg = SamplerConfig {
            chains: 3,
            draws_per_chain: 120,
            warmup: 200,
            seed: 12345,
            ..SamplerConfig::default()
        };
        let a = sample_posterior(&d, Family::Normal, &flat_prior(), Some(0.2), &cfg).unwrap();
        let b = sample_posterior(&d, Family::Normal, &flat_prior(), Some(0.2), &cfg).unwrap();
        assert_eq!(a, b);
        let csv = a.to_csv();
        assert!(csv.starts_with("chain,iter,log_tpr,log_sigma\n"));
        assert_eq!(csv.lines().count(), 1 + 3 * 120);
        // A different seed changes the draws.
        let c = sample_posterior(
            &d,
            Family::Normal,
            &flat_prior(),
            Some(0.2),
            &SamplerConfig { seed: 54321, ..cfg },
        )
        .unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn reparameterizing_probability_resolves_with_the_documented_priority() {
        let d = lognormal_dataset(10, 1.0, 0.5, 51);
        let cfg = SamplerConfig {
            chains: 1,
            draws_per_chain: 30,
            warmup: 60,
            ..SamplerConfig::default()
        };
        // Conflicting explicit and prior-implied values are an error.
        let prior = ij_t1_prior(40.0, 0.1);
        let err =
            sample_posterior(&d, Family::Normal, &prior, Some(0.2), &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        // The prior's own value wins when no explicit one is given.
        let ds = sample_posterior(&d, Family::Normal, &prior, None, &cfg).unwrap();
        assert_eq!(ds.p_r, 0.1);
        assert_eq!(ds.t_c, Some(40.0));
        // With neither, the data default applies: half the max cdf
        // estimate, which is below one half on fully exact data.
        let ds = sample_posterior(&d, Family::Normal, &flat_prior(), None, &cfg).unwrap();
        assert!(ds.p_r > 0.0 && ds.p_r <= 0.5);
        assert!(ds.warnings.iter().any(|w| w.contains("p_r defaulted")));
    }

    // Asymptotic Kolmogorov-Smirnov p-value for a one-sample comparison
    // against a continuous cdf.
    fn ks_p_value(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        let mut d_stat = 0.0_f64;
        for (i, &x) in samples.iter().enumerate() {
            let f = cdf(x);
            d_stat = d_stat
                .max(((i + 1) as f64 / n - f).abs())
                .max((f - i as f64 / n).abs());
        }
        let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d_stat;
        let mut p = 0.0;
        for k in 1..=100 {
            let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
            p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        }
        p.clamp(0.0, 1.0)
    }

    #[test]
    fn bounded_flat_prior_sampling_is_uniform() {
        let rect = Rect {
            lo_log_tpr: 1.0,
            hi_log_tpr: 3.0,
            lo_log_sigma: -2.0,
            hi_log_sigma: 0.0,
        };
        let ds = sample_prior_bounded(
            &flat_prior(),
            &rect,
            100_000,
            Family::Normal,
            Some(0.1),
            &SamplerConfig::default(),
        )
        .unwrap();
        assert_eq!(ds.draws.len(), 100_000);
        assert!((ds.acceptance[0] - 1.0).abs() < 1e-12); // flat: accept everything
        let mut counts = [[0u32; 10]; 10];
        for d in &ds.draws {
            let i = (((d.log_tpr - 1.0) / 2.0 * 10.0) as usize).min(9);
            let j = (((d.log_sigma + 2.0) / 2.0 * 10.0) as usize).min(9);
            counts[i][j] += 1;
        }
        let expected = 1000.0;
        let chi2: f64 = counts
            .iter()
            .flatten()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 0.99 quantile of chi-square with 99 degrees of freedom
        assert!(chi2 < 134.64, "chi2 = {chi2}");
    }

    #[test]
    fn bounded_censored_ij_prior_respects_its_own_cliff() {
        let t_c = 135.0;
        let rect = Rect {
            lo_log_tpr: (5.0_f64).ln(),
            hi_log_tpr: (300.0_f64).ln(),
            lo_log_sigma: (0.02_f64).ln(),
            hi_log_sigma: (2.0_f64).ln(),
        };
        let ds = sample_prior_bounded(
            &ij_t1_prior(t_c, 0.1),
            &rect,
            20_000,
            Family::Normal,
            None,
            &SamplerConfig::default(),
        )
        .unwrap();
        let beyond = ds
            .draws
            .iter()
            .filter(|d| d.log_tpr > t_c.ln() && d.log_sigma < (0.05_f64).ln())
            .count();
        assert!(
            (beyond as f64) < 1e-3 * ds.draws.len() as f64,
            "{beyond} draws beyond the censoring cliff"
        );
        // Draws concentrate where the density plateau sits.
        let plateau = ds.draws.iter().filter(|d| d.log_tpr < t_c.ln()).count();
        assert!(plateau > ds.draws.len() / 2);
    }

    #[test]
    fn bounded_product_prior_marginals_match_their_analytic_forms() {
        let loc = InformativeMarginalSpec {
            target: MarginalTarget::TPr,
            shape: MarginalShape::Lognormal,
            range99: (20.0, 200.0),
            df: None,
        };
        let sc = InformativeMarginalSpec {
            target: MarginalTarget::Beta,
            shape: MarginalShape::Lognormal,
            range99: (1.0, 4.0),
            df: None,
        };
        let prior = JointPriorSpec::Product {
            location: MarginalComponent::Informative(loc.clone()),
            scale: MarginalComponent::Informative(sc.clone()),
        };
        let rect = Rect {
            lo_log_tpr: -20.0,
            hi_log_tpr: 20.0,
            lo_log_sigma: -20.0,
            hi_log_sigma: 20.0,
        };
        let ds = sample_prior_bounded(
            &prior,
            &rect,
            4_000,
            Family::Sev,
            Some(0.632),
            &SamplerConfig::default(),
        )
        .unwrap();
        let lp = crate::prior::range99_to_shape_params(&loc).unwrap();
        let mut w1: Vec<f64> = ds.draws.iter().map(|d| d.log_tpr).collect();
        let p1 = ks_p_value(&mut w1, |x| normal::cdf((x - lp.mu_star) / lp.sigma_star));
        assert!(p1 > 0.01, "location KS p = {p1}");
        let sp = crate::prior::range99_to_shape_params(&sc).unwrap();
        // log sigma = -log beta, a normal with the mean negated.
        let mut w2: Vec<f64> = ds.draws.iter().map(|d| d.log_sigma).collect();
        let p2 = ks_p_value(&mut w2, |x| normal::cdf((x + sp.mu_star) / sp.sigma_star));
        assert!(p2 > 0.01, "scale KS p = {p2}");
    }

    #[test]
    fn rejection_sampler_reduces_to_the_prior_without_data() {
        let rect = Rect {
            lo_log_tpr: 0.0,
            hi_log_tpr: 2.0,
            lo_log_sigma: -1.0,
            hi_log_sigma: 1.0,
        };
        let cfg = SamplerConfig {
            bounding_rect: Some(rect),
            ..SamplerConfig::default()
        };
        let ds = smith_gelfand(None, Family::Normal, &flat_prior(), Some(0.1), 10_000, &cfg)
            .unwrap();
        assert_eq!(ds.draws.len(), 10_000);
        assert!((ds.acceptance[0] - 1.0).abs() < 1e-12);
        let mut w1: Vec<f64> = ds.draws.iter().map(|d| d.log_tpr).collect();
        let p = ks_p_value(&mut w1, |x| (x / 2.0).clamp(0.0, 1.0));
        assert!(p > 0.01, "uniform KS p = {p}");
        // Improper prior without a rectangle cannot be sampled.
        let err = smith_gelfand(
            None,
            Family::Normal,
            &flat_prior(),
            Some(0.1),
            10,
            &SamplerConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn rejection_sampler_reproduces_the_conjugate_posterior() {
        // Near-known sigma: the scale prior is a spike at sigma = 1, and
        // p_r = 0.5 makes log t_pr equal mu, so the location coordinate
        // has a conjugate normal posterior.
        let sigma0 = 1.0;
        let n = 10;
        let mut rng = CounterRng::new(17, 0);
        let logs: Vec<f64> = (0..n).map(|_| 0.3 + sigma0 * rng.normal()).collect();
        let d = Dataset::new(
            logs.iter().map(|&l| Observation::Exact { t: l.exp(), count: 1 }).collect(),
            "hours",
        )
        .unwrap();
        let mu_star = 0.0;
        let sigma_star = 2.0 / Z_995; // range99 (e^-2, e^2)
        let prior = JointPriorSpec::Product {
            location: MarginalComponent::Informative(InformativeMarginalSpec {
                target: MarginalTarget::TPr,
                shape: MarginalShape::Lognormal,
                range99: ((-2.0_f64).exp(), 2.0_f64.exp()),
                df: None,
            }),
            scale: MarginalComponent::Informative(InformativeMarginalSpec {
                target: MarginalTarget::Sigma,
                shape: MarginalShape::Lognormal,
                range99: (0.99995, 1.00005),
                df: None,
            }),
        };
        let ds = smith_gelfand(
            Some(&d),
            Family::Normal,
            &prior,
            Some(0.5),
            1_500,
            &SamplerConfig { seed: 8, ..SamplerConfig::default() },
        )
        .unwrap();
        let prec = 1.0 / (sigma_star * sigma_star) + n as f64 / (sigma0 * sigma0);
        let post_mean =
            (mu_star / (sigma_star * sigma_star) + logs.iter().sum::<f64>() / (sigma0 * sigma0))
                / prec;
        let post_sd = (1.0 / prec).sqrt();
        let mut w1: Vec<f64> = ds.draws.iter().map(|d| d.log_tpr).collect();
        let p = ks_p_value(&mut w1, |x| normal::cdf((x - post_mean) / post_sd));
        assert!(p > 0.01, "conjugate KS p = {p}");
    }

    #[test]
    fn chain_and_rejection_samplers_agree_on_a_small_dataset() {
        let d = lognormal_dataset(5, 1.2, 0.5, 61);
        let rect = Rect {
            lo_log_tpr: -4.0,
            hi_log_tpr: 6.0,
            lo_log_sigma: -4.0,
            hi_log_sigma: 2.5,
        };
        let mcmc_cfg = SamplerConfig {
            chains: 2,
            draws_per_chain: 2_000,
            warmup: 1_000,
            seed: 4,
            ..SamplerConfig::default()
        };
        let mcmc =
            sample_posterior(&d, Family::Normal, &flat_prior(), Some(0.1), &mcmc_cfg).unwrap();
        let sg_cfg = SamplerConfig {
            seed: 5,
            bounding_rect: Some(rect),
            ..SamplerConfig::default()
        };
        let sg = smith_gelfand(Some(&d), Family::Normal, &flat_prior(), Some(0.1), 4_000, &sg_cfg)
            .unwrap();
        let q = [PosteriorTarget::Quantile(0.5)];
        let fm = posterior_functionals(&mcmc, &q, 0.95).unwrap();
        let fr = posterior_functionals(&sg, &q, 0.95).unwrap();
        // Compare endpoints on the probability scale: each rejection
        // endpoint should sit at nearly the same ecdf position in the
        // chain sample.
        let mut sorted = fm[0].samples.clone();
        sorted.sort_by(f64::total_cmp);
        let ecdf = |x: f64| {
            sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
        };
        assert!((ecdf(fr[0].lower) - 0.025).abs() < 0.02, "{}", ecdf(fr[0].lower));
        assert!((ecdf(fr[0].upper) - 0.975).abs() < 0.02, "{}", ecdf(fr[0].upper));
    }

    #[test]
    fn summaries_serialize_with_estimates_and_diagnostics() {
        let d = lognormal_dataset(15, 1.0, 0.4, 71);
        let cfg = SamplerConfig {
            chains: 2,
            draws_per_chain: 150,
            warmup: 150,
            seed: 9,
            ..SamplerConfig::default()
        };
        let ds = sample_posterior(&d, Family::Normal, &flat_prior(), Some(0.1), &cfg).unwrap();
        let s = summarize(
            &ds,
            &[PosteriorTarget::Quantile(0.1), PosteriorTarget::FailureProbAt(3.0)],
            0.95,
        )
        .unwrap();
        assert_eq!(s.n_draws, 300);
        assert_eq!(s.estimates.len(), 2);
        assert_eq!(s.estimates[0].target, "t_0.1");
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"acceptance\""));
        assert!(json.contains("\"r_hat\""));
    }
}
