//! Standardized location-scale kernels.
//!
//! Each family is the distribution of `Z = (Y - mu) / sigma` where `Y` is
//! the log lifetime. The four supported kernels and the lifetime
//! distributions they induce through `T = exp(Y)`:
//!
//! ```text
//! normal     Phi(z)                        lognormal
//! sev        1 - exp(-exp(z))              Weibull
//! lev        exp(-exp(-z))                 Frechet
//! logistic   1 / (1 + exp(-z))             loglogistic
//! ```
//!
//! All functions are exposed in plain and log form; the log forms stay
//! accurate in both tails, which matters for heavily censored likelihoods
//! where survival probabilities routinely fall below 1e-100.

use crate::normal;
use serde::{Deserialize, Serialize};

/// Standardized kernel of a log-location-scale distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Standard normal kernel; lifetimes are lognormal.
    Normal,
    /// Smallest extreme value kernel; lifetimes are Weibull.
    Sev,
    /// Largest extreme value kernel; lifetimes are Frechet.
    Lev,
    /// Standard logistic kernel; lifetimes are loglogistic.
    Logistic,
}

impl Family {
    /// All supported kernels, in a fixed order convenient for sweeps.
    pub const ALL: [Family; 4] = [
        Family::Normal,
        Family::Sev,
        Family::Lev,
        Family::Logistic,
    ];

    /// Stable lowercase name, matching the serialized form.
    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Sev => "sev",
            Family::Lev => "lev",
            Family::Logistic => "logistic",
        }
    }

    /// Parses the lowercase name produced by [`Family::name`].
    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "normal" => Some(Family::Normal),
            "sev" => Some(Family::Sev),
            "lev" => Some(Family::Lev),
            "logistic" => Some(Family::Logistic),
            _ => None,
        }
    }

    /// Cumulative distribution function of the standardized kernel.
    pub fn cdf(self, z: f64) -> f64 {
        match self {
            Family::Normal => normal::cdf(z),
            // 1 - exp(-e^z) without cancellation for small e^z.
            Family::Sev => -(-z.exp()).exp_m1(),
            Family::Lev => (-(-z).exp()).exp(),
            Family::Logistic => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Survival function `1 - cdf(z)`, accurate in the upper tail.
    pub fn sf(self, z: f64) -> f64 {
        match self {
            Family::Normal => normal::sf(z),
            Family::Sev => (-z.exp()).exp(),
            Family::Lev => -(-(-z).exp()).exp_m1(),
            Family::Logistic => Family::Logistic.cdf(-z),
        }
    }

    /// Density of the standardized kernel.
    pub fn pdf(self, z: f64) -> f64 {
        match self {
            Family::Normal => normal::pdf(z),
            Family::Sev => (z - z.exp()).exp(),
            Family::Lev => (-z - (-z).exp()).exp(),
            Family::Logistic => {
                // f = F (1 - F) = e^-|z| / (1 + e^-|z|)^2, symmetric in z.
                let e = (-z.abs()).exp();
                let d = 1.0 + e;
                e / (d * d)
            }
        }
    }

    /// Log density of the standardized kernel.
    pub fn ln_pdf(self, z: f64) -> f64 {
        match self {
            Family::Normal => normal::ln_pdf(z),
            Family::Sev => z - z.exp(),
            Family::Lev => -z - (-z).exp(),
            // ln f = -|z| - 2 ln(1 + e^-|z|).
            Family::Logistic => -z.abs() - 2.0 * (-z.abs()).exp().ln_1p(),
        }
    }

    /// Derivative of the standardized density.
    pub fn pdf_deriv(self, z: f64) -> f64 {
        match self {
            Family::Normal => -z * normal::pdf(z),
            Family::Sev => Family::Sev.pdf(z) * (-z.exp_m1()),
            Family::Lev => Family::Lev.pdf(z) * (-z).exp_m1(),
            Family::Logistic => {
                let f = Family::Logistic.cdf(z);
                Family::Logistic.pdf(z) * (1.0 - 2.0 * f)
            }
        }
    }

    /// Log of the cumulative distribution function, finite for any `z`
    /// where the cdf is positive (it underflows to `-inf` only where the
    /// true cdf is zero to double precision).
    pub fn ln_cdf(self, z: f64) -> f64 {
        match self {
            Family::Normal => normal::ln_cdf(z),
            Family::Sev => {
                let u = z.exp();
                if u == 0.0 {
                    // cdf ~ e^z exactly in this regime.
                    z
                } else {
                    (-(-u).exp_m1()).ln()
                }
            }
            Family::Lev => -(-z).exp(),
            Family::Logistic => {
                if z >= 0.0 {
                    -(-z).exp().ln_1p()
                } else {
                    z - z.exp().ln_1p()
                }
            }
        }
    }

    /// Log of the survival function, the mirror of [`Family::ln_cdf`].
    pub fn ln_sf(self, z: f64) -> f64 {
        match self {
            Family::Normal => normal::ln_sf(z),
            Family::Sev => -z.exp(),
            Family::Lev => {
                let v = (-z).exp();
                if v == 0.0 {
                    -z
                } else {
                    (-(-v).exp_m1()).ln()
                }
            }
            Family::Logistic => Family::Logistic.ln_cdf(-z),
        }
    }

    /// Log of the standardized hazard `phi(z) / (1 - Phi(z))`, in a form
    /// that avoids the cancellation of `ln_pdf - ln_sf` where both logs
    /// are dominated by the same huge term.
    pub fn ln_hazard(self, z: f64) -> f64 {
        match self {
            Family::Normal => normal::ln_pdf(z) - normal::ln_sf(z),
            // phi = e^(z - e^z), 1 - Phi = e^(-e^z): the ratio is e^z.
            Family::Sev => z,
            Family::Lev => Family::Lev.ln_pdf(z) - Family::Lev.ln_sf(z),
            // phi = Phi (1 - Phi), so the hazard is just the cdf.
            Family::Logistic => Family::Logistic.ln_cdf(z),
        }
    }

    /// Quantile of the standardized kernel for `p` in the open (0, 1);
    /// `NAN` outside.
    pub fn quantile(self, p: f64) -> f64 {
        if !(p > 0.0 && p < 1.0) {
            return f64::NAN;
        }
        match self {
            Family::Normal => normal::quantile(p),
            // ln(-ln(1-p)), with ln1p for small p.
            Family::Sev => (-(-p).ln_1p()).ln(),
            Family::Lev => -(-p.ln()).ln(),
            Family::Logistic => (p / (1.0 - p)).ln(),
        }
    }
}
