//! Run configuration: one JSON document per invocation, schema-checked
//! before any computation starts.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use relprior_core::family::Family;
use relprior_core::posterior::{PosteriorTarget, Rect, SamplerConfig};
use relprior_core::prior::{
    InformativeMarginalSpec, JointPriorSpec, MarginalComponent, NoninfPriorSpec,
};
use relprior_core::simulation::SweepSpec;
use relprior_core::{Error, Result};

/// Grid axis request. Values are generated inclusive of both endpoints.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

impl AxisSpec {
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::Config(format!(
                "{name} axis needs finite min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("{name} axis needs at least 2 points")));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(Error::Config(format!(
                "{name} axis with log spacing needs a positive minimum"
            )));
        }
        let (a, b) = match self.spacing {
            Spacing::Linear => (self.min, self.max),
            Spacing::Log => (self.min.ln(), self.max.ln()),
        };
        Ok((0..self.n)
            .map(|i| {
                let v = a + (b - a) * i as f64 / (self.n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => v,
                    Spacing::Log => v.exp(),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_pr: AxisSpec,
    pub sigma: AxisSpec,
}

/// Request for a bounded-prior draw file alongside a posterior run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorCheckSpec {
    pub rect: Rect,
    pub n: usize,
}

/// Scalar estimands a run can report on.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CliTarget {
    FailureProbAt { t: f64 },
    Quantile { p: f64 },
    Beta,
    Sigma,
}

impl CliTarget {
    pub fn to_posterior(self) -> PosteriorTarget {
        match self {
            CliTarget::FailureProbAt { t } => PosteriorTarget::FailureProbAt(t),
            CliTarget::Quantile { p } => PosteriorTarget::Quantile(p),
            CliTarget::Beta => PosteriorTarget::Beta,
            CliTarget::Sigma => PosteriorTarget::Sigma,
        }
    }

    pub fn to_profile(self) -> Result<relprior_core::likelihood::Target> {
        match self {
            CliTarget::FailureProbAt { t } => {
                Ok(relprior_core::likelihood::Target::FailureProbAt { t })
            }
            CliTarget::Quantile { p } => Ok(relprior_core::likelihood::Target::Quantile { p }),
            CliTarget::Beta | CliTarget::Sigma => Err(Error::Config(
                "profile intervals support times and quantiles only".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarySide {
    Location,
    Scale,
}

/// Factor lists for a prior sensitivity sweep; the cross product of the
/// lists defines the variants.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySpec {
    pub side: VarySide,
    #[serde(default)]
    pub df: Vec<f64>,
    pub range99: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional echo of the subcommand; must match when present.
    pub command: Option<String>,
    pub input_path: Option<PathBuf>,
    pub family: Option<Family>,
    /// Prior in any documented JSON form (tagged joint spec, bare
    /// noninformative spec, or bare product components).
    pub prior: Option<Value>,
    pub sampler: Option<SamplerConfig>,
    pub targets: Option<Vec<CliTarget>>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub p_r: Option<f64>,
    /// Interval level for reported estimates (default 0.95).
    pub level: Option<f64>,
    /// Relative-likelihood contour grid; derived from the fit when absent.
    pub grid: Option<GridSpec>,
    /// Density surface grid (required by prior-surface).
    pub surface: Option<GridSpec>,
    pub prior_check: Option<PriorCheckSpec>,
    pub sweep: Option<SweepSpec>,
    pub sensitivity: Option<SensitivitySpec>,
    /// Evaluate censored-information elements by direct quadrature
    /// instead of the interpolation table.
    #[serde(default)]
    pub fim_by_quadrature: bool,
}

/// Config after applying command checks and flag overrides.
pub struct Run {
    pub cfg: RunConfig,
    pub output_dir: PathBuf,
    /// Effective seed override (flag wins over the config field).
    pub seed: Option<u64>,
}

impl Run {
    pub fn level(&self) -> Result<f64> {
        let level = self.cfg.level.unwrap_or(0.95);
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {level}")));
        }
        Ok(level)
    }

    pub fn family(&self) -> Result<Family> {
        self.cfg
            .family
            .ok_or_else(|| Error::Config("config field 'family' is required".into()))
    }

    pub fn input_path(&self) -> Result<&Path> {
        self.cfg
            .input_path
            .as_deref()
            .ok_or_else(|| Error::Config("config field 'input_path' is required".into()))
    }

    pub fn sampler(&self) -> SamplerConfig {
        let mut s = self.cfg.sampler.clone().unwrap_or_default();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s.fim_by_quadrature |= self.cfg.fim_by_quadrature;
        s
    }

    pub fn targets(&self) -> Result<&[CliTarget]> {
        match self.cfg.targets.as_deref() {
            Some(t) if !t.is_empty() => Ok(t),
            _ => Err(Error::Config("config field 'targets' must list at least one target".into())),
        }
    }
}

pub fn load(
    path: &Path,
    command: &str,
    seed_flag: Option<u64>,
    out_flag: Option<PathBuf>,
) -> Result<Run> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
    if let Some(c) = &cfg.command {
        if c != command {
            return Err(Error::Config(format!(
                "config is for command '{c}' but '{command}' was invoked"
            )));
        }
    }
    let output_dir = out_flag
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("output directory required: set 'output_dir' or pass --out".into()))?;
    let seed = seed_flag.or(cfg.seed);
    Ok(Run { cfg, output_dir, seed })
}

// Accepts a bare prior object in any of the documented shapes and wraps
// it into the joint form.
pub fn parse_prior(v: &Value) -> Result<JointPriorSpec> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Config("prior must be a JSON object".into()))?;
    let spec = if obj.contains_key("noninf") || obj.contains_key("product") {
        serde_json::from_value::<JointPriorSpec>(v.clone())
            .map_err(|e| Error::Config(format!("invalid prior: {e}")))?
    } else if obj.contains_key("kind") {
        let ns: NoninfPriorSpec = serde_json::from_value(v.clone())
            .map_err(|e| Error::Config(format!("invalid prior: {e}")))?;
        JointPriorSpec::Noninf(ns)
    } else if obj.contains_key("location") && obj.contains_key("scale") {
        JointPriorSpec::Product {
            location: parse_marginal(&obj["location"])?,
            scale: parse_marginal(&obj["scale"])?,
        }
    } else {
        return Err(Error::Config(
            "prior object must carry 'kind', 'location'+'scale', or a 'noninf'/'product' tag"
                .into(),
        ));
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_marginal(v: &Value) -> Result<MarginalComponent> {
    if let Some(obj) = v.as_object() {
        if obj.contains_key("target") {
            let m: InformativeMarginalSpec = serde_json::from_value(v.clone())
                .map_err(|e| Error::Config(format!("invalid marginal: {e}")))?;
            return Ok(MarginalComponent::Informative(m));
        }
        if obj.contains_key("t_c") {
            let shim: CjShim = serde_json::from_value(v.clone())
                .map_err(|e| Error::Config(format!("invalid marginal: {e}")))?;
            return Ok(MarginalComponent::Cj { t_c: shim.t_c, p_r: shim.p_r });
        }
    }
    serde_json::from_value::<MarginalComponent>(v.clone())
        .map_err(|e| Error::Config(format!("invalid marginal: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CjShim {
    t_c: f64,
    p_r: f64,
}
