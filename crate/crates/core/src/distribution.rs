//! Log-location-scale lifetime distributions and their parameterizations.
//!
//! A lifetime `T > 0` follows a log-location-scale distribution when
//! `log T = mu + sigma Z` with `Z` one of the standardized kernels in
//! [`crate::family`]:
//!
//! ```text
//! F(t) = Phi((log t - mu) / sigma),
//! f(t) = phi((log t - mu) / sigma) / (sigma t).
//! ```
//!
//! Besides the natural `(mu, sigma)` pair, two reparameterizations are
//! supported because they are better suited to prior specification and
//! posterior sampling:
//!
//! * Weibull `(eta, beta)` with `mu = log eta`, `sigma = 1/beta` (sev
//!   kernel only, by convention);
//! * quantile-anchored `(t_pr, sigma, p_r)` where `t_pr` is the `p_r`
//!   quantile, so `mu = log t_pr - Phi^-1(p_r) sigma`.

use crate::family::Family;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Location and scale of the log lifetime. `sigma` must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LsParams {
    /// Creates a parameter pair, rejecting non-finite `mu` and
    /// non-positive or non-finite `sigma`.
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Config(format!("location must be finite, got {mu}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!(
                "scale must be positive and finite, got {sigma}"
            )));
        }
        Ok(LsParams { mu, sigma })
    }

    /// Standardizes a log-time: `(y - mu) / sigma`.
    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.mu) / self.sigma
    }
}

/// Conventional Weibull parameters: scale `eta` (characteristic life)
/// and shape `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub eta: f64,
    pub beta: f64,
}

impl WeibullParams {
    pub fn new(eta: f64, beta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Config(format!(
                "Weibull scale must be positive and finite, got {eta}"
            )));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Config(format!(
                "Weibull shape must be positive and finite, got {beta}"
            )));
        }
        Ok(WeibullParams { eta, beta })
    }
}

/// Converts Weibull `(eta, beta)` to the sev-kernel `(mu, sigma)`:
/// `mu = log eta`, `sigma = 1/beta`.
pub fn weibull_to_ls(w: WeibullParams) -> LsParams {
    LsParams {
        mu: w.eta.ln(),
        sigma: 1.0 / w.beta,
    }
}

/// Inverse of [`weibull_to_ls`].
pub fn ls_to_weibull(p: LsParams) -> WeibullParams {
    WeibullParams {
        eta: p.mu.exp(),
        beta: 1.0 / p.sigma,
    }
}

/// Quantile-anchored parameterization: `t_pr` is the `p_r` quantile of
/// the lifetime distribution and `sigma` the usual scale.
///
/// `p_r` is a fixed anchor probability chosen by the analyst (or set from
/// the data as half the failing fraction), not a free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReparamPoint {
    pub t_pr: f64,
    pub sigma: f64,
    pub p_r: f64,
}

impl ReparamPoint {
    pub fn new(t_pr: f64, sigma: f64, p_r: f64) -> Result<Self> {
        if !(t_pr > 0.0) || !t_pr.is_finite() {
            return Err(Error::Config(format!(
                "anchored quantile must be positive and finite, got {t_pr}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!(
                "scale must be positive and finite, got {sigma}"
            )));
        }
        if !(p_r > 0.0 && p_r < 1.0) {
            return Err(Error::Config(format!(
                "anchor probability must lie in (0, 1), got {p_r}"
            )));
        }
        Ok(ReparamPoint { t_pr, sigma, p_r })
    }
}

/// Converts the quantile-anchored point to `(mu, sigma)`:
/// `mu = log t_pr - Phi^-1(p_r) sigma`.
pub fn reparam_to_ls(r: ReparamPoint, family: Family) -> LsParams {
    LsParams {
        mu: r.t_pr.ln() - family.quantile(r.p_r) * r.sigma,
        sigma: r.sigma,
    }
}

/// Inverse of [`reparam_to_ls`] for a given anchor probability.
pub fn ls_to_reparam(p: LsParams, p_r: f64, family: Family) -> Result<ReparamPoint> {
    if !(p_r > 0.0 && p_r < 1.0) {
        return Err(Error::Config(format!(
            "anchor probability must lie in (0, 1), got {p_r}"
        )));
    }
    Ok(ReparamPoint {
        t_pr: (p.mu + family.quantile(p_r) * p.sigma).exp(),
        sigma: p.sigma,
        p_r,
    })
}

/// Standardized log-time `zeta = (log t - mu) / sigma` for `t > 0`.
pub fn zeta(t: f64, p: &LsParams) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Config(format!(
            "time must be positive and finite, got {t}"
        )));
    }
    Ok(p.standardize(t.ln()))
}

/// Lifetime cumulative distribution function `F(t)`.
pub fn lls_cdf(t: f64, p: &LsParams, family: Family) -> Result<f64> {
    Ok(family.cdf(zeta(t, p)?))
}

/// Lifetime density `f(t) = phi(z) / (sigma t)`.
pub fn lls_pdf(t: f64, p: &LsParams, family: Family) -> Result<f64> {
    Ok(family.pdf(zeta(t, p)?) / (p.sigma * t))
}

/// Hazard function `h(t) = f(t) / (1 - F(t))`, computed through the
/// standardized log hazard so it stays accurate far into the upper tail.
pub fn lls_hazard(t: f64, p: &LsParams, family: Family) -> Result<f64> {
    let z = zeta(t, p)?;
    Ok(family.ln_hazard(z).exp() / (p.sigma * t))
}

/// Lifetime quantile `t_p = exp(mu + Phi^-1(p) sigma)` for `p` in (0, 1).
pub fn lls_quantile(prob: f64, p: &LsParams, family: Family) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Config(format!(
            "probability must lie in (0, 1), got {prob}"
        )));
    }
    Ok((p.mu + family.quantile(prob) * p.sigma).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_rel(actual: f64, expected: f64, tol: f64, what: &str) {
        let err = if expected == 0.0 {
            actual.abs()
        } else {
            ((actual - expected) / expected).abs()
        };
        assert!(
            err <= tol,
            "{what}: got {actual:e}, want {expected:e}, rel err {err:e}"
        );
    }

    #[test]
    fn weibull_conversion_matches_reference() {
        let w = WeibullParams::new(21.23, 8.126).expect("valid params");
        let p = weibull_to_ls(w);
        assert_rel(p.mu, 3.0554152757151647279, 1e-15, "mu from eta");
        assert_rel(p.sigma, 0.12306177701206005415, 1e-15, "sigma from beta");
        let back = ls_to_weibull(p);
        assert_rel(back.eta, w.eta, 1e-14, "eta roundtrip");
        assert_rel(back.beta, w.beta, 1e-14, "beta roundtrip");
    }

    #[test]
    fn reparam_roundtrip_and_anchor_property() {
        let r = ReparamPoint::new(180.0, 0.02, 0.1).expect("valid point");
        for family in Family::ALL {
            let p = reparam_to_ls(r, family);
            // By construction t_pr is the p_r quantile.
            assert_rel(
                lls_quantile(r.p_r, &p, family).unwrap(),
                r.t_pr,
                1e-12,
                &format!("{} anchor", family.name()),
            );
            let back = ls_to_reparam(p, r.p_r, family).unwrap();
            assert_rel(back.t_pr, r.t_pr, 1e-12, "t_pr roundtrip");
            assert_eq!(back.sigma, r.sigma);
        }
    }

    #[test]
    fn zeta_matches_reference() {
        let p = LsParams::new(180.0f64.ln(), 0.02).unwrap();
        assert_rel(
            zeta(135.0, &p).unwrap(),
            -14.384103622589046372,
            1e-13,
            "zeta(135)",
        );
    }

    #[test]
    fn quantile_and_pdf_reference_values() {
        let std_sev = LsParams::new(0.0, 0.5).unwrap();
        assert_rel(
            lls_quantile(0.10, &std_sev, Family::Sev).unwrap(),
            0.3245928459745012637,
            1e-13,
            "sev quantile(0.10)",
        );
        let std_norm = LsParams::new(0.0, 1.0).unwrap();
        assert_rel(
            lls_pdf(1.0, &std_norm, Family::Normal).unwrap(),
            0.39894228040143267794,
            1e-14,
            "lognormal pdf at 1",
        );
        // Median of the standard Weibull (mu=0, sigma=1).
        assert_rel(
            lls_quantile(0.5, &std_norm, Family::Sev).unwrap(),
            0.69314718055994530942,
            1e-14,
            "weibull median",
        );
    }

    #[test]
    fn cdf_quantile_consistency_across_families() {
        let p = LsParams::new(1.7, 0.45).unwrap();
        for family in Family::ALL {
            for prob in [1e-6, 0.01, 0.37, 0.5, 0.93, 1.0 - 1e-6] {
                let t = lls_quantile(prob, &p, family).unwrap();
                assert_rel(
                    lls_cdf(t, &p, family).unwrap(),
                    prob,
                    1e-11,
                    &format!("{} cdf(quantile({prob}))", family.name()),
                );
            }
        }
    }

    #[test]
    fn hazard_equals_pdf_over_survival() {
        let p = LsParams::new(0.3, 0.8).unwrap();
        for family in Family::ALL {
            for t in [0.02, 0.5, 1.3, 4.0] {
                let f = lls_pdf(t, &p, family).unwrap();
                let s = 1.0 - lls_cdf(t, &p, family).unwrap();
                let h = lls_hazard(t, &p, family).unwrap();
                assert_rel(h, f / s, 1e-11, &format!("{} hazard({t})", family.name()));
            }
        }
        // Deep upper tail: the naive ratio is 0/0 but the hazard is finite
        // (and for the sev kernel equals beta t^(beta-1) / eta^beta).
        let sev = LsParams::new(0.0, 0.5).unwrap();
        let h = lls_hazard(1e6, &sev, Family::Sev).unwrap();
        assert_rel(h, 2.0 * 1e6, 1e-9, "weibull hazard far out");
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(LsParams::new(0.0, 0.0).is_err());
        assert!(LsParams::new(0.0, -1.0).is_err());
        assert!(LsParams::new(f64::NAN, 1.0).is_err());
        assert!(WeibullParams::new(0.0, 2.0).is_err());
        assert!(ReparamPoint::new(1.0, 1.0, 0.0).is_err());
        assert!(ReparamPoint::new(1.0, 1.0, 1.0).is_err());
        let p = LsParams::new(0.0, 1.0).unwrap();
        assert!(lls_cdf(0.0, &p, Family::Normal).is_err());
        assert!(lls_cdf(-2.0, &p, Family::Normal).is_err());
        assert!(lls_quantile(1.0, &p, Family::Normal).is_err());
        assert!(zeta(f64::INFINITY, &p).is_err());
    }
}
