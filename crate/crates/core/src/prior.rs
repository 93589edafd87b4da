//! Prior densities over the two-parameter lifetime models.
//!
//! Three layers live here:
//!
//! * objective (noninformative) joint priors: flat, Jeffreys, the two
//!   conditional factors, their independence product, and reference
//!   orderings, each available in six parameterizations and under both
//!   failure-count and time censoring,
//! * informative or weakly informative marginals specified by a 0.99
//!   probability range on an interpretable positive parameter,
//! * the transformed densities those marginals induce on the unconstrained
//!   log coordinates the sampler works in.
//!
//! All densities are unnormalized and returned on the log scale unless a
//! function says otherwise.

use serde::{Deserialize, Serialize};

use crate::distribution::{reparam_to_ls, ReparamPoint};
use crate::family::Family;
use crate::fim::{scaled_fim, FimTable, ScaledFim};
use crate::{normal, student_t, Error, Result};

/// Coordinate system a noninformative prior is expressed in.
///
/// `t_pr` is the lifetime quantile at probability `p_r`; `zeta` is the
/// standardized log time `(log t_e - mu)/sigma` at a fixed time `t_e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    MuSigma,
    LogTprSigma,
    TprSigma,
    LogTprLogSigma,
    ZetaSigma,
    ZetaLogSigma,
}

impl Parameterization {
    fn uses_tpr(self) -> bool {
        matches!(
            self,
            Parameterization::LogTprSigma
                | Parameterization::TprSigma
                | Parameterization::LogTprLogSigma
        )
    }

    fn uses_zeta(self) -> bool {
        matches!(self, Parameterization::ZetaSigma | Parameterization::ZetaLogSigma)
    }

    fn log_scale_coordinate(self) -> bool {
        matches!(self, Parameterization::LogTprLogSigma | Parameterization::ZetaLogSigma)
    }
}

/// How the data collection ends, as far as the prior is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringSpec {
    /// Stop after a fixed number of failures. The information elements
    /// are then parameter-free constants.
    Type2,
    /// Stop at a fixed time (the payload). The information elements vary
    /// over the parameter space through the standardized censoring point.
    Type1(f64),
}

impl Default for CensoringSpec {
    fn default() -> Self {
        CensoringSpec::Type2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoninfKind {
    Flat,
    Jeffreys,
    /// Conditional factor for the location-like coordinate given scale.
    CjLocation,
    /// Conditional factor for the scale coordinate given location.
    CjScale,
    /// Product of the two conditional factors.
    Ij,
    /// Reference prior; the ordering is carried in [`NoninfPriorSpec::order`].
    Reference,
}

/// Parameter-importance ordering for reference priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RefOrder {
    #[default]
    Unordered,
    LocationFirst,
    ScaleFirst,
}

fn default_parameterization() -> Parameterization {
    Parameterization::LogTprLogSigma
}

/// A fully specified noninformative joint prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoninfPriorSpec {
    pub kind: NoninfKind,
    #[serde(default = "default_parameterization")]
    pub parameterization: Parameterization,
    #[serde(default)]
    pub censoring: CensoringSpec,
    /// Expected failure fraction r/n under failure-count stopping; feeds
    /// the information constants in the ordered zeta reference rows.
    /// Absent means complete data.
    #[serde(default)]
    pub type2_fraction: Option<f64>,
    /// Probability attached to the reparameterizing quantile; required by
    /// the t_pr parameterizations (except for the flat prior).
    #[serde(default)]
    pub p_r: Option<f64>,
    /// Fixed time defining the zeta coordinate; required by the zeta
    /// parameterizations (except for the flat prior).
    #[serde(default)]
    pub t_e: Option<f64>,
    #[serde(default)]
    pub order: RefOrder,
}

impl NoninfPriorSpec {
    pub fn validate(&self) -> Result<()> {
        if let CensoringSpec::Type1(t_c) = self.censoring {
            if !(t_c.is_finite() && t_c > 0.0) {
                return Err(Error::Config(format!(
                    "censoring time must be positive and finite, got {t_c}"
                )));
            }
            if self.kind == NoninfKind::Reference {
                return Err(Error::Config(
                    "reference priors are not available under time censoring \
                     (no tractable closed form); use failure-count censoring"
                        .into(),
                ));
            }
        }
        if self.order != RefOrder::Unordered && self.kind != NoninfKind::Reference {
            return Err(Error::Config(
                "parameter-importance order applies only to reference priors".into(),
            ));
        }
        if let Some(f) = self.type2_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!(
                    "type2_fraction must lie in (0, 1], got {f}"
                )));
            }
        }
        let needs_pr = self.parameterization.uses_tpr() && self.kind != NoninfKind::Flat;
        match (needs_pr, self.p_r) {
            (true, None) => {
                return Err(Error::Config(
                    "this parameterization requires p_r".into(),
                ))
            }
            (_, Some(p)) if !(p > 0.0 && p < 1.0) => {
                return Err(Error::Config(format!("p_r must lie in (0, 1), got {p}")));
            }
            _ => {}
        }
        let needs_te = self.parameterization.uses_zeta() && self.kind != NoninfKind::Flat;
        match (needs_te, self.t_e) {
            (true, None) => {
                return Err(Error::Config(
                    "zeta parameterizations require t_e".into(),
                ))
            }
            (_, Some(t)) if !(t.is_finite() && t > 0.0) => {
                return Err(Error::Config(format!(
                    "t_e must be positive and finite, got {t}"
                )));
            }
            _ => {}
        }
        Ok(())
    }

    fn w_pr(&self, family: Family) -> f64 {
        // Validated presence; flat never calls this.
        family.quantile(self.p_r.expect("validated: p_r present"))
    }
}

/// Where a density evaluation gets its information elements from.
///
/// The table route is what the sampler uses (one shared read-only table);
/// direct quadrature is the slow exact route kept for validation runs.
#[derive(Clone, Copy)]
pub enum FimSource<'a> {
    Table(&'a FimTable),
    Direct(Family),
}

impl FimSource<'_> {
    pub fn family(&self) -> Family {
        match self {
            FimSource::Table(t) => t.family,
            FimSource::Direct(f) => *f,
        }
    }

    fn at(&self, z_c: f64) -> Result<ScaledFim> {
        match self {
            // Beyond-grid queries clamp by design; the boundary values are
            // within 1e-7 of the true limits at the covered range ends.
            FimSource::Table(t) => Ok(t.interp(z_c).0),
            FimSource::Direct(f) => scaled_fim(z_c, *f),
        }
    }
}

// Decoded evaluation point: scale is always positive, ln_scale is exact
// even when the raw coordinate was already on the log scale.
struct DecodedPoint {
    sigma: f64,
    ln_sigma: f64,
    // log(t_pr) charge for the natural-t_pr parameterization, else 0
    ln_tpr: f64,
    c1: f64,
}

fn decode_point(spec: &NoninfPriorSpec, point: (f64, f64)) -> Result<DecodedPoint> {
    let (c1, c2) = point;
    if !c1.is_finite() || !c2.is_finite() {
        return Err(Error::Config(format!(
            "prior evaluation point must be finite, got ({c1}, {c2})"
        )));
    }
    let (sigma, ln_sigma) = if spec.parameterization.log_scale_coordinate() {
        (c2.exp(), c2)
    } else {
        if c2 <= 0.0 {
            return Err(Error::Config(format!("sigma must be positive, got {c2}")));
        }
        (c2, c2.ln())
    };
    let ln_tpr = match spec.parameterization {
        Parameterization::TprSigma => {
            if c1 <= 0.0 {
                return Err(Error::Config(format!("t_pr must be positive, got {c1}")));
            }
            c1.ln()
        }
        _ => 0.0,
    };
    Ok(DecodedPoint { sigma, ln_sigma, ln_tpr, c1 })
}

// Standardized censoring point for a time-censored spec, written in ratio
// form so it stays finite (and converges to its large-sigma limit) even
// when sigma overflows.
fn standardized_censor_point(
    spec: &NoninfPriorSpec,
    dp: &DecodedPoint,
    t_c: f64,
    family: Family,
) -> f64 {
    let ln_tc = t_c.ln();
    match spec.parameterization {
        Parameterization::MuSigma => (ln_tc - dp.c1) / dp.sigma,
        Parameterization::LogTprSigma | Parameterization::LogTprLogSigma => {
            (ln_tc - dp.c1) / dp.sigma + spec.w_pr(family)
        }
        Parameterization::TprSigma => (ln_tc - dp.ln_tpr) / dp.sigma + spec.w_pr(family),
        Parameterization::ZetaSigma | Parameterization::ZetaLogSigma => {
            let ln_te = spec.t_e.expect("validated: t_e present").ln();
            (ln_tc - ln_te) / dp.sigma + dp.c1
        }
    }
}

fn cj_location_ln(spec: &NoninfPriorSpec, dp: &DecodedPoint, f: Option<&ScaledFim>) -> f64 {
    let tpr_charge = if spec.parameterization == Parameterization::TprSigma {
        -dp.ln_tpr
    } else {
        0.0
    };
    match f {
        None => tpr_charge,
        Some(f) => 0.5 * f.f11.ln() + tpr_charge,
    }
}

fn cj_scale_ln(
    spec: &NoninfPriorSpec,
    dp: &DecodedPoint,
    f: Option<&ScaledFim>,
    family: Family,
) -> f64 {
    let base = if spec.parameterization.log_scale_coordinate() {
        0.0
    } else {
        -dp.ln_sigma
    };
    match f {
        None => base,
        Some(f) => {
            let q = match spec.parameterization {
                Parameterization::MuSigma => f.f22,
                Parameterization::LogTprSigma
                | Parameterization::TprSigma
                | Parameterization::LogTprLogSigma => f.quad(spec.w_pr(family)),
                Parameterization::ZetaSigma | Parameterization::ZetaLogSigma => f.quad(dp.c1),
            };
            base + 0.5 * q.ln()
        }
    }
}

/// Unnormalized log density of a noninformative prior at `point`, which
/// is given in the spec's own coordinates.
pub fn noninf_log_density(
    spec: &NoninfPriorSpec,
    point: (f64, f64),
    table: &FimTable,
) -> Result<f64> {
    noninf_log_density_from(spec, point, &FimSource::Table(table))
}

/// Same as [`noninf_log_density`] but with an explicit choice between the
/// interpolation table and direct quadrature.
pub fn noninf_log_density_from(
    spec: &NoninfPriorSpec,
    point: (f64, f64),
    source: &FimSource,
) -> Result<f64> {
    spec.validate()?;
    let family = source.family();
    let dp = decode_point(spec, point)?;
    if spec.kind == NoninfKind::Flat {
        return Ok(0.0);
    }
    // Information elements, needed only under time censoring and for the
    // ordered zeta reference rows.
    let f_t1 = match spec.censoring {
        CensoringSpec::Type1(t_c) => {
            Some(source.at(standardized_censor_point(spec, &dp, t_c, family))?)
        }
        CensoringSpec::Type2 => None,
    };
    use Parameterization as P;
    let ld = match spec.kind {
        NoninfKind::Flat => unreachable!(),
        NoninfKind::Jeffreys => {
            let base = match spec.parameterization {
                P::MuSigma | P::LogTprSigma => -2.0 * dp.ln_sigma,
                P::TprSigma => -2.0 * dp.ln_sigma - dp.ln_tpr,
                P::LogTprLogSigma | P::ZetaSigma => -dp.ln_sigma,
                P::ZetaLogSigma => 0.0,
            };
            match &f_t1 {
                None => base,
                Some(f) => base + 0.5 * f.det().ln(),
            }
        }
        NoninfKind::CjLocation => cj_location_ln(spec, &dp, f_t1.as_ref()),
        NoninfKind::CjScale => cj_scale_ln(spec, &dp, f_t1.as_ref(), family),
        NoninfKind::Ij => {
            cj_location_ln(spec, &dp, f_t1.as_ref())
                + cj_scale_ln(spec, &dp, f_t1.as_ref(), family)
        }
        NoninfKind::Reference => {
            // Failure-count censoring only (validated). The ordered zeta
            // rows need the information constants at the stopping fraction.
            let quad_zeta = || -> Result<f64> {
                let z2 = spec
                    .type2_fraction
                    .map(|p| family.quantile(p))
                    .unwrap_or(f64::INFINITY);
                Ok(source.at(z2)?.quad(dp.c1))
            };
            match (spec.parameterization, spec.order) {
                (P::MuSigma | P::LogTprSigma, RefOrder::Unordered) => -2.0 * dp.ln_sigma,
                (P::MuSigma | P::LogTprSigma, _) => -dp.ln_sigma,
                (P::TprSigma, RefOrder::Unordered) => -2.0 * dp.ln_sigma - dp.ln_tpr,
                (P::TprSigma, _) => -dp.ln_sigma - dp.ln_tpr,
                (P::LogTprLogSigma, RefOrder::Unordered) => -dp.ln_sigma,
                (P::LogTprLogSigma, _) => 0.0,
                (P::ZetaSigma, RefOrder::LocationFirst) => {
                    -dp.ln_sigma - 0.5 * quad_zeta()?.ln()
                }
                (P::ZetaSigma, _) => -dp.ln_sigma,
                (P::ZetaLogSigma, RefOrder::LocationFirst) => -0.5 * quad_zeta()?.ln(),
                (P::ZetaLogSigma, _) => 0.0,
            }
        }
    };
    Ok(ld)
}

/// Relative density surface of an independence prior over a (t_pr, sigma)
/// grid, scaled so the maximum cell equals 1.
///
/// `rel[i][j]` corresponds to `t_pr_axis[i]` and `sigma_axis[j]`.
#[derive(Debug, Clone)]
pub struct IjSurface {
    pub t_pr: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rel: Vec<Vec<f64>>,
}

fn check_surface_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::Config(format!("{name} axis is empty")));
    }
    for w in axis.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Config(format!("{name} axis must be strictly increasing")));
        }
    }
    if axis.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::Config(format!("{name} axis must be positive and finite")));
    }
    Ok(())
}

/// Evaluates the spec's density over the grid and rescales to a maximum
/// of 1. Requires an independence prior under time censoring, since that
/// is the combination whose surface features are worth plotting.
pub fn ij_relative_surface(
    spec: &NoninfPriorSpec,
    t_pr_axis: &[f64],
    sigma_axis: &[f64],
    source: &FimSource,
) -> Result<IjSurface> {
    spec.validate()?;
    if spec.kind != NoninfKind::Ij {
        return Err(Error::Config("surface evaluation expects an ij prior".into()));
    }
    let CensoringSpec::Type1(_) = spec.censoring else {
        return Err(Error::Config(
            "surface evaluation expects time censoring; the failure-count \
             density is constant in t_pr"
                .into(),
        ));
    };
    check_surface_axis("t_pr", t_pr_axis)?;
    check_surface_axis("sigma", sigma_axis)?;
    let family = source.family();
    use rayon::prelude::*;
    let log_rows: Result<Vec<Vec<f64>>> = t_pr_axis
        .par_iter()
        .map(|&t| {
            sigma_axis
                .iter()
                .map(|&s| {
                    let point = match spec.parameterization {
                        Parameterization::MuSigma => (t.ln() - spec.w_pr(family) * s, s),
                        Parameterization::LogTprSigma => (t.ln(), s),
                        Parameterization::TprSigma => (t, s),
                        Parameterization::LogTprLogSigma => (t.ln(), s.ln()),
                        Parameterization::ZetaSigma | Parameterization::ZetaLogSigma => {
                            let mu = t.ln() - spec.w_pr(family) * s;
                            let zeta = (spec.t_e.expect("validated").ln() - mu) / s;
                            if spec.parameterization == Parameterization::ZetaSigma {
                                (zeta, s)
                            } else {
                                (zeta, s.ln())
                            }
                        }
                    };
                    noninf_log_density_from(spec, point, source)
                })
                .collect()
        })
        .collect();
    let log_rows = log_rows?;
    let max_ld = log_rows
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_ld.is_finite() {
        return Err(Error::Numerical(
            "prior surface has no finite cells to scale by".into(),
        ));
    }
    let rel = log_rows
        .into_iter()
        .map(|row| row.into_iter().map(|ld| (ld - max_ld).exp()).collect())
        .collect();
    Ok(IjSurface {
        t_pr: t_pr_axis.to_vec(),
        sigma: sigma_axis.to_vec(),
        rel,
    })
}

/// Probability that a single unit fails by `t_c` under the distribution
/// pinned down by a quantile-anchored parameter point.
pub fn prob_failure_by(t_c: f64, point: ReparamPoint, family: Family) -> Result<f64> {
    if !(t_c.is_finite() && t_c > 0.0) {
        return Err(Error::Config(format!("time must be positive and finite, got {t_c}")));
    }
    let ls = reparam_to_ls(point, family);
    Ok(family.cdf((t_c.ln() - ls.mu) / ls.sigma))
}

/// Probability that at least one of `n` independent units fails by `t_c`,
/// computed through the log survival function so it stays exact when the
/// single-unit probability underflows.
pub fn prob_any_failure(n: u32, t_c: f64, point: ReparamPoint, family: Family) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("need at least one unit".into()));
    }
    if !(t_c.is_finite() && t_c > 0.0) {
        return Err(Error::Config(format!("time must be positive and finite, got {t_c}")));
    }
    let ls = reparam_to_ls(point, family);
    let ln_sf = family.ln_sf((t_c.ln() - ls.mu) / ls.sigma);
    Ok(-(n as f64 * ln_sf).exp_m1())
}

/// The four densities induced on a log coordinate by truncating a normal
/// or location-scale-t distribution to positive values: `Ltnorm` is the
/// log of a positive-truncated normal variable, `Lrtnorm` the log of its
/// reciprocal, and the `*lst` pair swap in the t kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogTruncKind {
    Ltnorm,
    Lrtnorm,
    Ltlst,
    Lrtlst,
}

/// Log density of the selected transformed distribution at `x`.
pub fn ln_log_trunc_density(
    kind: LogTruncKind,
    x: f64,
    mu: f64,
    sigma: f64,
    df: Option<f64>,
) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) || !mu.is_finite() {
        return Err(Error::Config(format!(
            "truncated shape needs finite mu and positive sigma, got ({mu}, {sigma})"
        )));
    }
    let uses_t = matches!(kind, LogTruncKind::Ltlst | LogTruncKind::Lrtlst);
    let df = match (uses_t, df) {
        (true, Some(d)) if d.is_finite() && d > 0.0 => Some(d),
        (true, _) => {
            return Err(Error::Config(
                "t-kernel shapes need positive degrees of freedom".into(),
            ))
        }
        (false, _) => None,
    };
    let s = match kind {
        LogTruncKind::Ltnorm | LogTruncKind::Ltlst => x,
        LogTruncKind::Lrtnorm | LogTruncKind::Lrtlst => -x,
    };
    // density(s) = (1/sigma) K((mu - e^s)/sigma) / K_cdf(mu/sigma) * e^s
    let z = (mu - s.exp()) / sigma;
    let ld = match df {
        None => normal::ln_pdf(z) - normal::ln_cdf(mu / sigma),
        Some(d) => student_t::pdf(z, d).ln() - student_t::cdf(mu / sigma, d).ln(),
    };
    Ok(ld - sigma.ln() + s)
}

/// Plain-scale counterpart of [`ln_log_trunc_density`].
pub fn log_trunc_density(
    kind: LogTruncKind,
    x: f64,
    mu: f64,
    sigma: f64,
    df: Option<f64>,
) -> Result<f64> {
    Ok(ln_log_trunc_density(kind, x, mu, sigma, df)?.exp())
}

/// Which interpretable positive parameter an informative marginal binds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalTarget {
    TPr,
    Beta,
    Sigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalShape {
    Lognormal,
    TruncatedNormal,
    LogLst,
    TruncatedLst,
}

impl MarginalShape {
    fn uses_df(self) -> bool {
        matches!(self, MarginalShape::LogLst | MarginalShape::TruncatedLst)
    }

    fn log_scale_matching(self) -> bool {
        matches!(self, MarginalShape::Lognormal | MarginalShape::LogLst)
    }
}

/// An informative (or weakly informative) marginal prior, pinned down by
/// the interval carrying the central 0.99 of its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InformativeMarginalSpec {
    pub target: MarginalTarget,
    pub shape: MarginalShape,
    /// (0.005 quantile, 0.995 quantile) of the prior on the target.
    pub range99: (f64, f64),
    #[serde(default)]
    pub df: Option<f64>,
}

impl InformativeMarginalSpec {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.range99;
        if !(a.is_finite() && b.is_finite() && a > 0.0 && a < b) {
            return Err(Error::Config(format!(
                "range99 must satisfy 0 < q005 < q995, got ({a}, {b})"
            )));
        }
        match (self.shape.uses_df(), self.df) {
            (true, Some(d)) if d.is_finite() && d > 0.0 => Ok(()),
            (true, _) => Err(Error::Config(
                "t-kernel shapes need positive degrees of freedom".into(),
            )),
            (false, Some(_)) => Err(Error::Config(
                "df only applies to the t-kernel shapes".into(),
            )),
            (false, None) => Ok(()),
        }
    }
}

/// Location/scale parameters of the marginal's parent distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub mu_star: f64,
    pub sigma_star: f64,
    pub df: Option<f64>,
}

/// Translates a 0.99 range into the parent distribution's parameters.
///
/// Log-scale shapes match quantiles of the log; the truncated shapes
/// match the untruncated parent's quantiles on the natural scale (the
/// truncation at zero then shaves mass only when the range presses
/// against zero). Exact truncated matching is available separately.
pub fn range99_to_shape_params(spec: &InformativeMarginalSpec) -> Result<ShapeParams> {
    spec.validate()?;
    let (a, b) = spec.range99;
    let q = match spec.df {
        None => normal::quantile(0.995),
        Some(d) => student_t::quantile(0.995, d),
    };
    let (lo, hi) = if spec.shape.log_scale_matching() {
        (a.ln(), b.ln())
    } else {
        (a, b)
    };
    Ok(ShapeParams {
        mu_star: 0.5 * (lo + hi),
        sigma_star: (hi - lo) / (2.0 * q),
        df: spec.df,
    })
}

/// Like [`range99_to_shape_params`], but for the truncated shapes the
/// returned parameters make the *truncated* distribution itself hit the
/// requested 0.005/0.995 quantiles, found by a small two-parameter solve
/// seeded at the parent-matching answer.
pub fn range99_to_shape_params_exact(spec: &InformativeMarginalSpec) -> Result<ShapeParams> {
    let seed = range99_to_shape_params(spec)?;
    if spec.shape.log_scale_matching() {
        return Ok(seed); // nothing is truncated away
    }
    let (a, b) = spec.range99;
    let df = spec.df;
    let kernel_cdf = move |z: f64| match df {
        None => normal::cdf(z),
        Some(d) => student_t::cdf(z, d),
    };
    // cdf of the positive-truncated distribution at x
    let trunc_cdf = move |x: f64, m: f64, s: f64| {
        let tail0 = kernel_cdf(-m / s);
        (kernel_cdf((x - m) / s) - tail0) / (1.0 - tail0)
    };
    let objective = move |p: &[f64]| {
        let (m, s) = (p[0], p[1].exp());
        let r1 = trunc_cdf(a, m, s) - 0.005;
        let r2 = trunc_cdf(b, m, s) - 0.995;
        -(r1 * r1 + r2 * r2)
    };
    let start = vec![seed.mu_star, seed.sigma_star.ln()];
    let fit = crate::optimize::nelder_mead_max(
        &objective,
        &start,
        &[0.1 * seed.sigma_star.max(1e-3), 0.1],
        1e-26,
        800,
    );
    let (polished, value, _) = crate::optimize::newton_polish_max(&objective, &fit.x, 20);
    if value < -1e-16 {
        return Err(Error::Numerical(format!(
            "truncated quantile matching stalled at residual {:.2e}",
            (-value).sqrt()
        )));
    }
    Ok(ShapeParams {
        mu_star: polished[0],
        sigma_star: polished[1].exp(),
        df,
    })
}

/// A marginal ready for repeated evaluation in sampling coordinates.
#[derive(Debug, Clone)]
pub struct PreparedMarginal {
    target: MarginalTarget,
    shape: MarginalShape,
    params: ShapeParams,
}

impl PreparedMarginal {
    pub fn prepare(spec: &InformativeMarginalSpec) -> Result<Self> {
        Ok(PreparedMarginal {
            target: spec.target,
            shape: spec.shape,
            params: range99_to_shape_params(spec)?,
        })
    }

    pub fn target(&self) -> MarginalTarget {
        self.target
    }

    pub fn params(&self) -> ShapeParams {
        self.params
    }

    /// Log density on the sampling coordinate covering this target:
    /// log t_pr for the location marginal, log sigma for beta and sigma
    /// marginals (a beta prior is a reciprocal away, so it routes through
    /// the reciprocal forms).
    pub fn ln_density_sampling(&self, w: f64) -> f64 {
        let ShapeParams { mu_star, sigma_star, df } = self.params;
        // Coordinate the parent acts on: ln t_pr, ln beta = -ln sigma,
        // or ln sigma.
        let u = match self.target {
            MarginalTarget::Beta => -w,
            MarginalTarget::TPr | MarginalTarget::Sigma => w,
        };
        match self.shape {
            MarginalShape::Lognormal => {
                normal::ln_pdf((u - mu_star) / sigma_star) - sigma_star.ln()
            }
            MarginalShape::LogLst => {
                student_t::pdf((u - mu_star) / sigma_star, df.expect("validated")).ln()
                    - sigma_star.ln()
            }
            MarginalShape::TruncatedNormal => {
                ln_log_trunc_density(LogTruncKind::Ltnorm, u, mu_star, sigma_star, None)
                    .expect("validated params")
            }
            MarginalShape::TruncatedLst => {
                ln_log_trunc_density(LogTruncKind::Ltlst, u, mu_star, sigma_star, df)
                    .expect("validated params")
            }
        }
    }
}

/// Convenience wrapper: prepare and evaluate in one call.
pub fn marginal_ln_density_sampling(spec: &InformativeMarginalSpec, w: f64) -> Result<f64> {
    Ok(PreparedMarginal::prepare(spec)?.ln_density_sampling(w))
}

/// One factor of a product prior over the sampling coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalComponent {
    Flat,
    /// Conditional factor built from the information elements; needs the
    /// censoring time and the reparameterizing probability.
    Cj { t_c: f64, p_r: f64 },
    Informative(InformativeMarginalSpec),
}

/// A joint prior over (log t_pr, log sigma): either one of the
/// noninformative catalog entries, or a product of per-coordinate factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointPriorSpec {
    Noninf(NoninfPriorSpec),
    Product {
        location: MarginalComponent,
        scale: MarginalComponent,
    },
}

impl JointPriorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            JointPriorSpec::Noninf(spec) => spec.validate(),
            JointPriorSpec::Product { location, scale } => {
                if let MarginalComponent::Informative(m) = location {
                    m.validate()?;
                    if m.target != MarginalTarget::TPr {
                        return Err(Error::Config(
                            "the location factor must target t_pr".into(),
                        ));
                    }
                }
                if let MarginalComponent::Informative(m) = scale {
                    m.validate()?;
                    if m.target == MarginalTarget::TPr {
                        return Err(Error::Config(
                            "the scale factor must target beta or sigma".into(),
                        ));
                    }
                }
                for c in [location, scale] {
                    if let MarginalComponent::Cj { t_c, p_r } = c {
                        if !(t_c.is_finite() && *t_c > 0.0) {
                            return Err(Error::Config(format!(
                                "conditional factor needs a positive censoring time, got {t_c}"
                            )));
                        }
                        if !(*p_r > 0.0 && *p_r < 1.0) {
                            return Err(Error::Config(format!(
                                "conditional factor needs p_r in (0, 1), got {p_r}"
                            )));
                        }
                    }
                }
                if let (
                    MarginalComponent::Cj { t_c: t1, p_r: p1 },
                    MarginalComponent::Cj { t_c: t2, p_r: p2 },
                ) = (location, scale)
                {
                    if t1 != t2 || p1 != p2 {
                        return Err(Error::Config(
                            "paired conditional factors must share t_c and p_r".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// Whether the joint prior integrates to a finite mass.
    pub fn is_proper(&self) -> bool {
        match self {
            JointPriorSpec::Noninf(_) => false,
            JointPriorSpec::Product { location, scale } => {
                matches!(location, MarginalComponent::Informative(_))
                    && matches!(scale, MarginalComponent::Informative(_))
            }
        }
    }
}

/// Unnormalized log prior at a sampling-space point (log t_pr, log sigma).
///
/// Noninformative specs in other parameterizations are carried over with
/// the change-of-variables factor; the zeta parameterizations are not
/// offered as sampling coordinates.
pub fn joint_log_prior(
    spec: &JointPriorSpec,
    point: (f64, f64),
    source: &FimSource,
) -> Result<f64> {
    spec.validate()?;
    let (w1, w2) = point;
    if !w1.is_finite() || !w2.is_finite() {
        return Err(Error::Config(format!(
            "sampling point must be finite, got ({w1}, {w2})"
        )));
    }
    let family = source.family();
    match spec {
        JointPriorSpec::Noninf(ns) => {
            if ns.parameterization.uses_zeta() {
                return Err(Error::Config(
                    "zeta parameterizations are evaluable but not sampled in; \
                     express the prior in a t_pr parameterization"
                        .into(),
                ));
            }
            let sigma = w2.exp();
            let (coords, ln_jac) = match ns.parameterization {
                Parameterization::MuSigma => ((w1 - ns.w_pr(family) * sigma, sigma), w2),
                Parameterization::LogTprSigma => ((w1, sigma), w2),
                Parameterization::TprSigma => ((w1.exp(), sigma), w1 + w2),
                Parameterization::LogTprLogSigma => ((w1, w2), 0.0),
                Parameterization::ZetaSigma | Parameterization::ZetaLogSigma => unreachable!(),
            };
            Ok(noninf_log_density_from(ns, coords, source)? + ln_jac)
        }
        JointPriorSpec::Product { location, scale } => {
            // z_c in ratio form: stays finite for any sampling point.
            let z_c = |t_c: f64, p_r: f64| {
                (t_c.ln() - w1) / w2.exp() + family.quantile(p_r)
            };
            let loc_ld = match location {
                MarginalComponent::Flat => 0.0,
                MarginalComponent::Cj { t_c, p_r } => {
                    0.5 * source.at(z_c(*t_c, *p_r))?.f11.ln()
                }
                MarginalComponent::Informative(m) => {
                    PreparedMarginal::prepare(m)?.ln_density_sampling(w1)
                }
            };
            let scale_ld = match scale {
                MarginalComponent::Flat => 0.0,
                MarginalComponent::Cj { t_c, p_r } => {
                    let f = source.at(z_c(*t_c, *p_r))?;
                    0.5 * f.quad(family.quantile(*p_r)).ln()
                }
                MarginalComponent::Informative(m) => {
                    PreparedMarginal::prepare(m)?.ln_density_sampling(w2)
                }
            };
            Ok(loc_ld + scale_ld)
        }
    }
}
