//! Coverage-probability study engine.
//!
//! Each cell simulates Type-1-censored samples from a known distribution
//! (location 0, scale 1 on the log scale), fits the posterior under a flat
//! or censored-information prior, scores 95% equal-tail credible intervals
//! for four lifetime quantiles against their known true values, and
//! reports one-sided error probabilities and two-sided coverage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Observation;
use crate::family::Family;
use crate::fim::{build_fim_table, FimTable, FIM_TABLE_DEFAULT_SIZE};
use crate::posterior::{
    equal_tail_ci, sample_posterior_prepared, Coordinate, SamplerConfig,
};
use crate::prior::{
    CensoringSpec, JointPriorSpec, NoninfKind, NoninfPriorSpec, Parameterization, RefOrder,
};
use crate::rng::CounterRng;
use crate::{Dataset, Error, Result};

/// The quantiles every cell scores, smallest first.
pub const STUDY_QUANTILES: [f64; 4] = [0.01, 0.05, 0.10, 0.50];

/// Lifetime model under study, named on the observed-time scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimFamily {
    Weibull,
    Lognormal,
}

impl SimFamily {
    /// The log-scale location-scale family the model corresponds to.
    pub fn log_family(self) -> Family {
        match self {
            SimFamily::Weibull => Family::Sev,
            SimFamily::Lognormal => Family::Normal,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SimFamily::Weibull => "weibull",
            SimFamily::Lognormal => "lognormal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimPrior {
    Flat,
    Ij,
}

impl SimPrior {
    pub fn as_str(self) -> &'static str {
        match self {
            SimPrior::Flat => "flat",
            SimPrior::Ij => "ij",
        }
    }
}

/// How the per-replicate interval is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    /// Equal-tail credible interval from posterior draws.
    #[default]
    Bayes,
    /// Zero-width interval pinned at the true quantile; validates the
    /// scoring path (coverage must come out 0).
    PinnedAtTruth,
}

/// One factor-level combination of the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub family: SimFamily,
    /// Expected number of failures before the censoring time.
    pub e_r: f64,
    /// Expected proportion failing by the censoring time; 1 means the
    /// sample is observed completely (no censoring).
    pub p_fail: f64,
    pub prior: SimPrior,
    pub n_reps: u32,
    #[serde(default = "default_level")]
    pub credible_level: f64,
    pub seed: u64,
    #[serde(default)]
    pub interval_method: IntervalMethod,
}

fn default_level() -> f64 {
    0.95
}

impl CellSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_r.is_finite() && self.e_r > 0.0) {
            return Err(Error::Config(format!(
                "expected failure count must be positive, got {}",
                self.e_r
            )));
        }
        if !(self.p_fail > 0.0 && self.p_fail <= 1.0) {
            return Err(Error::Config(format!(
                "p_fail must lie in (0, 1], got {}",
                self.p_fail
            )));
        }
        if self.n_reps == 0 {
            return Err(Error::Config("n_reps must be positive".into()));
        }
        if !(self.credible_level > 0.0 && self.credible_level <= 1.0) {
            return Err(Error::Config(format!(
                "credible_level must lie in (0, 1], got {}",
                self.credible_level
            )));
        }
        Ok(())
    }

    /// Sample size: expected failures over failure fraction, rounded to
    /// the nearest integer, at least 1.
    pub fn n(&self) -> usize {
        ((self.e_r / self.p_fail).round() as usize).max(1)
    }

    /// Right-censoring time for the true parameters (location 0, scale 1
    /// on the log scale); `None` means complete observation.
    pub fn censoring_time(&self) -> Option<f64> {
        if self.p_fail >= 1.0 {
            None
        } else {
            Some(self.family.log_family().quantile(self.p_fail).exp())
        }
    }

    /// True value of the log lifetime quantile being estimated.
    pub fn true_log_quantile(&self, p: f64) -> f64 {
        self.family.log_family().quantile(p)
    }
}

/// Scores for one estimated quantile within one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileScore {
    pub p: f64,
    /// Share of replicates whose interval sat entirely above the truth.
    pub alpha_l: f64,
    /// Share of replicates whose interval sat entirely below the truth.
    pub alpha_u: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub quantiles: Vec<QuantileScore>,
    pub reps_completed: u32,
    /// Datasets redrawn because they held fewer than three failures.
    pub reps_discarded_lt3: u32,
    /// Replicates excluded because the sampler itself failed.
    pub sampler_failures: u32,
    /// Share of completed replicates whose convergence diagnostic
    /// exceeded the warning threshold (retained, but flagged).
    pub rhat_flag_share: f64,
}

/// Per-replicate sampler budget. The default is a desk-scale reduction;
/// [`SimBudget::full`] restores the four-chain production setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimBudget {
    pub chains: usize,
    pub draws_per_chain: usize,
    pub warmup: usize,
}

impl Default for SimBudget {
    fn default() -> Self {
        SimBudget {
            chains: 2,
            draws_per_chain: 1_500,
            warmup: 1_500,
        }
    }
}

impl SimBudget {
    pub fn full() -> Self {
        SimBudget {
            chains: 4,
            draws_per_chain: 2_500,
            warmup: 2_000,
        }
    }
}

// Draw attempt `attempt` of replicate `rep`: n lifetimes by inverse cdf,
// right-censored at t_c. Exact times enter individually; censored units
// collapse into one row. Returns the dataset and the failure count.
fn draw_rep(cell: &CellSpec, rep: u64, attempt: u64) -> (Dataset, u32) {
    let family = cell.family.log_family();
    let n = cell.n();
    let t_c = cell.censoring_time();
    let mut rng = CounterRng::new(cell.seed, rep).substream(2 + attempt);
    let mut obs = Vec::new();
    let mut censored: u64 = 0;
    for _ in 0..n {
        let t = family.quantile(rng.uniform()).exp();
        match t_c {
            Some(tc) if t > tc => censored += 1,
            _ => obs.push(Observation::Exact { t, count: 1 }),
        }
    }
    let failures = obs.len() as u32;
    if censored > 0 {
        obs.push(Observation::Right {
            t: t_c.expect("censored units imply a censoring time"),
            count: censored,
        });
    }
    let d = Dataset::new(obs, "time").expect("n >= 1 positive lifetimes");
    (d, failures)
}

/// One simulated dataset for the cell: `n` draws from the true
/// distribution, Type-1 censored at the cell's censoring time. No
/// conditioning is applied here.
pub fn simulate_dataset(cell: &CellSpec, rep: u64) -> Dataset {
    draw_rep(cell, rep, 0).0
}

// Redraws until at least three failures, counting discards.
fn draw_conditioned(cell: &CellSpec, rep: u64) -> Result<(Dataset, u32, u32)> {
    const MAX_ATTEMPTS: u64 = 100_000;
    for attempt in 0..MAX_ATTEMPTS {
        let (d, r) = draw_rep(cell, rep, attempt);
        if r >= 3 {
            return Ok((d, r, attempt as u32));
        }
    }
    Err(Error::Numerical(format!(
        "replicate {rep} produced fewer than three failures {MAX_ATTEMPTS} times in a row"
    )))
}

fn prior_spec(cell: &CellSpec, p_r: f64) -> JointPriorSpec {
    let (kind, censoring, p_r) = match cell.prior {
        SimPrior::Flat => (NoninfKind::Flat, CensoringSpec::Type2, None),
        SimPrior::Ij => match cell.censoring_time() {
            // Complete observation: the information prior reduces to its
            // failure-count form, constant in these coordinates.
            None => (NoninfKind::Ij, CensoringSpec::Type2, Some(p_r)),
            Some(tc) => (NoninfKind::Ij, CensoringSpec::Type1(tc), Some(p_r)),
        },
    };
    JointPriorSpec::Noninf(NoninfPriorSpec {
        kind,
        parameterization: Parameterization::LogTprLogSigma,
        censoring,
        type2_fraction: None,
        p_r,
        t_e: None,
        order: RefOrder::Unordered,
    })
}

struct RepScore {
    // per quantile: interval lower end at or above the truth / upper end
    // at or below it
    low_miss: [bool; 4],
    up_miss: [bool; 4],
    rhat_flagged: bool,
    discards: u32,
}

fn run_rep(
    cell: &CellSpec,
    rep: u64,
    budget: &SimBudget,
    table: Option<&FimTable>,
) -> Result<RepScore> {
    let (d, r, discards) = draw_conditioned(cell, rep)?;
    let truth: [f64; 4] = STUDY_QUANTILES.map(|p| cell.true_log_quantile(p));
    if cell.interval_method == IntervalMethod::PinnedAtTruth {
        // Zero-width interval at the truth: both one-sided events fire.
        return Ok(RepScore {
            low_miss: [true; 4],
            up_miss: [true; 4],
            rhat_flagged: false,
            discards,
        });
    }
    let family = cell.family.log_family();
    let n = cell.n() as f64;
    let p_r = f64::from(r) / (2.0 * n);
    let prior = prior_spec(cell, p_r);
    let cfg = SamplerConfig {
        chains: budget.chains,
        draws_per_chain: budget.draws_per_chain,
        warmup: budget.warmup,
        seed: CounterRng::new(cell.seed, rep).substream(0).next_u64(),
        ..SamplerConfig::default()
    };
    let draws = sample_posterior_prepared(&d, family, &prior, Some(p_r), &cfg, table)?;
    let w_pr = family.quantile(p_r);
    let log_tpr = draws.coordinate(Coordinate::LogTpr);
    let log_sigma = draws.coordinate(Coordinate::LogSigma);
    let mut low_miss = [false; 4];
    let mut up_miss = [false; 4];
    for (j, &p) in STUDY_QUANTILES.iter().enumerate() {
        // Log-scale quantile per draw; monotone in the time quantile, so
        // interval scoring is unchanged and overflow-free.
        let wq = family.quantile(p);
        let samples: Vec<f64> = log_tpr
            .iter()
            .zip(&log_sigma)
            .map(|(&w1, &w2)| w1 + (wq - w_pr) * w2.exp())
            .collect();
        let (lo, hi) = equal_tail_ci(&samples, cell.credible_level)?;
        low_miss[j] = lo >= truth[j];
        up_miss[j] = hi <= truth[j];
    }
    let rhat_flagged = draws
        .r_hat
        .map(|r| r[0].max(r[1]) > 1.05)
        .unwrap_or(false);
    Ok(RepScore {
        low_miss,
        up_miss,
        rhat_flagged,
        discards,
    })
}

/// Runs every replicate of one cell and reduces the scores. Replicates
/// run in parallel; the reduction is serial in replicate order, so the
/// result is identical for any thread count.
pub fn run_cell(cell: &CellSpec, budget: &SimBudget) -> Result<CellResult> {
    cell.validate()?;
    if cell.n() < 3 {
        return Err(Error::Config(format!(
            "conditioning on three failures is impossible with sample size {}",
            cell.n()
        )));
    }
    let table = match cell.prior {
        SimPrior::Ij if cell.censoring_time().is_some() => Some(build_fim_table(
            cell.family.log_family(),
            FIM_TABLE_DEFAULT_SIZE,
        )?),
        _ => None,
    };
    let scores: Vec<Result<RepScore>> = (0..u64::from(cell.n_reps))
        .into_par_iter()
        .map(|rep| run_rep(cell, rep, budget, table.as_ref()))
        .collect();
    let mut completed: u32 = 0;
    let mut failures: u32 = 0;
    let mut discarded: u32 = 0;
    let mut flagged: u32 = 0;
    let mut low = [0u32; 4];
    let mut up = [0u32; 4];
    for s in &scores {
        match s {
            Ok(sc) => {
                completed += 1;
                discarded += sc.discards;
                flagged += u32::from(sc.rhat_flagged);
                for j in 0..4 {
                    low[j] += u32::from(sc.low_miss[j]);
                    up[j] += u32::from(sc.up_miss[j]);
                }
            }
            Err(_) => failures += 1,
        }
    }
    if completed == 0 {
        let first = scores.into_iter().find_map(Result::err).unwrap();
        return Err(Error::Numerical(format!(
            "every replicate failed; first error: {first}"
        )));
    }
    let quantiles = STUDY_QUANTILES
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let alpha_l = f64::from(low[j]) / f64::from(completed);
            let alpha_u = f64::from(up[j]) / f64::from(completed);
            QuantileScore {
                p,
                alpha_l,
                alpha_u,
                // Identity by construction; the floor only binds for the
                // degenerate pinned-interval mode.
                coverage: (1.0 - alpha_l - alpha_u).max(0.0),
            }
        })
        .collect();
    Ok(CellResult {
        quantiles,
        reps_completed: completed,
        reps_discarded_lt3: discarded,
        sampler_failures: failures,
        rhat_flag_share: f64::from(flagged) / f64::from(completed),
    })
}

/// Probability a cell's sample shows fewer than three failures: the
/// binomial cdf at 2 for `n` trials with success probability `p_fail`.
pub fn prob_fewer_than_3(cell: &CellSpec) -> f64 {
    let n = cell.n();
    if n < 3 {
        return 1.0;
    }
    let p = cell.p_fail;
    if p >= 1.0 {
        return 0.0;
    }
    let nf = n as f64;
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let terms = [
        nf * ln_q,
        nf.ln() + ln_p + (nf - 1.0) * ln_q,
        (nf * (nf - 1.0) / 2.0).ln() + 2.0 * ln_p + (nf - 2.0) * ln_q,
    ];
    terms.iter().map(|t| t.exp()).sum()
}

/// Binomial standard error of an estimated proportion.
pub fn mc_standard_error(p_hat: f64, n_reps: u32) -> f64 {
    (p_hat * (1.0 - p_hat) / f64::from(n_reps)).sqrt()
}

/// Full-factorial sweep request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub family: Vec<SimFamily>,
    pub prior: Vec<SimPrior>,
    pub e_r: Vec<f64>,
    pub p_fail: Vec<f64>,
    pub n_reps: u32,
    #[serde(default = "default_level")]
    pub credible_level: f64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.family.is_empty()
            || self.prior.is_empty()
            || self.e_r.is_empty()
            || self.p_fail.is_empty()
        {
            return Err(Error::Config("every sweep factor needs at least one level".into()));
        }
        for c in self.cells() {
            c.validate()?;
        }
        Ok(())
    }

    /// Cells in deterministic order. Cells differing only in the prior
    /// share a seed, so both priors are scored on the same datasets.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for (fi, &family) in self.family.iter().enumerate() {
            for (ei, &e_r) in self.e_r.iter().enumerate() {
                for (pi, &p_fail) in self.p_fail.iter().enumerate() {
                    let tag = (fi as u64) << 40 | (ei as u64) << 20 | pi as u64;
                    let seed = CounterRng::new(self.seed, tag).next_u64();
                    for &prior in &self.prior {
                        out.push(CellSpec {
                            family,
                            e_r,
                            p_fail,
                            prior,
                            n_reps: self.n_reps,
                            credible_level: self.credible_level,
                            seed,
                            interval_method: IntervalMethod::Bayes,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Runs the whole sweep, cells in order.
pub fn run_sweep(spec: &SweepSpec, budget: &SimBudget) -> Result<Vec<(CellSpec, CellResult)>> {
    spec.validate()?;
    spec.cells()
        .into_iter()
        .map(|c| run_cell(&c, budget).map(|r| (c, r)))
        .collect()
}

/// Cells whose share of flagged-diagnostic replicates breaks the 2%
/// quality gate; empty means the run is clean.
pub fn quality_gate_failures(results: &[(CellSpec, CellResult)]) -> Vec<String> {
    results
        .iter()
        .filter(|(_, r)| r.rhat_flag_share > 0.02)
        .map(|(c, r)| {
            format!(
                "{} {} e_r={} p_fail={}: {:.1}% of replicates flagged",
                c.family.as_str(),
                c.prior.as_str(),
                c.e_r,
                c.p_fail,
                100.0 * r.rhat_flag_share
            )
        })
        .collect()
}

/// CSV rows, one per cell and quantile:
/// `family,prior,E_r,p_fail,quantile,alpha_L,alpha_U,coverage,n_reps,discarded`.
pub fn sweep_to_csv(results: &[(CellSpec, CellResult)]) -> String {
    let mut out =
        String::from("family,prior,E_r,p_fail,quantile,alpha_L,alpha_U,coverage,n_reps,discarded\n");
    for (cell, res) in results {
        for q in &res.quantiles {
            out.push_str(&format!(
                "{},{},{},{},t_{:.2},{:.6},{:.6},{:.6},{},{}\n",
                cell.family.as_str(),
                cell.prior.as_str(),
                cell.e_r,
                cell.p_fail,
                q.p,
                q.alpha_l,
                q.alpha_u,
                q.coverage,
                res.reps_completed,
                res.reps_discarded_lt3
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(family: SimFamily, e_r: f64, p_fail: f64, prior: SimPrior, n_reps: u32) -> CellSpec {
        CellSpec {
            family,
            e_r,
            p_fail,
            prior,
            n_reps,
            credible_level: 0.95,
            seed: 7,
            interval_method: IntervalMethod::Bayes,
        }
    }

    #[test]
    fn derived_design_quantities_match_their_closed_forms() {
        let c = cell(SimFamily::Weibull, 10.0, 0.5, SimPrior::Flat, 1);
        assert_eq!(c.n(), 20);
        let tc = c.censoring_time().unwrap();
        assert!((tc - std::f64::consts::LN_2).abs() < 1e-12, "{tc}");
        let c = cell(SimFamily::Lognormal, 10.0, 0.5, SimPrior::Flat, 1);
        assert!((c.censoring_time().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cell(SimFamily::Weibull, 10.0, 0.01, SimPrior::Flat, 1).n(), 1000);
        assert_eq!(cell(SimFamily::Weibull, 10.0, 0.03, SimPrior::Flat, 1).n(), 333);
        assert_eq!(cell(SimFamily::Weibull, 0.4, 1.0, SimPrior::Flat, 1).n(), 1);
        // Complete observation has no censoring time.
        assert_eq!(cell(SimFamily::Weibull, 10.0, 1.0, SimPrior::Flat, 1).censoring_time(), None);
        assert!(cell(SimFamily::Weibull, 0.0, 0.5, SimPrior::Flat, 1).validate().is_err());
        assert!(cell(SimFamily::Weibull, 10.0, 1.5, SimPrior::Flat, 1).validate().is_err());
    }

    #[test]
    fn simulated_samples_censor_at_the_cell_time_and_hit_the_failure_fraction() {
        let c = cell(SimFamily::Weibull, 10.0, 0.1, SimPrior::Flat, 1);
        let tc = c.censoring_time().unwrap();
        let mut failures = 0u64;
        let mut total = 0u64;
        for rep in 0..1_000 {
            let d = simulate_dataset(&c, rep);
            for o in d.observations() {
                match *o {
                    Observation::Exact { t, count } => {
                        assert!(t <= tc);
                        failures += u64::from(count);
                    }
                    Observation::Right { t, count } => {
                        assert_eq!(t, tc);
                        total += u64::from(count);
                    }
                    _ => panic!("unexpected observation kind"),
                }
            }
            total += u64::from(d.failure_units());
        }
        assert_eq!(total, 100_000);
        let frac = failures as f64 / total as f64;
        let se = (0.1 * 0.9 / total as f64).sqrt();
        assert!((frac - 0.1).abs() < 3.0 * se, "fraction {frac}");
        // Replicate draws are deterministic functions of (seed, rep).
        assert_eq!(simulate_dataset(&c, 5), simulate_dataset(&c, 5));
        assert_ne!(simulate_dataset(&c, 5), simulate_dataset(&c, 6));
        // Lognormal complete cells produce exact observations only.
        let c = cell(SimFamily::Lognormal, 10.0, 1.0, SimPrior::Flat, 1);
        let d = simulate_dataset(&c, 0);
        assert_eq!(d.failure_units(), 10);
        assert_eq!(d.observations().len(), 10);
    }

    #[test]
    fn fewer_than_three_failure_probabilities_match_the_reference_values() {
        let checks = [
            (0.01, 0.0027, 5e-4),
            (0.05, 0.0023, 5e-4),
            (0.10, 0.0019, 5e-4),
            (0.50, 0.0002, 5e-5),
        ];
        for (p_fail, want, tol) in checks {
            let c = cell(SimFamily::Weibull, 10.0, p_fail, SimPrior::Flat, 1);
            let got = prob_fewer_than_3(&c);
            assert!((got - want).abs() < tol, "p_fail {p_fail}: {got} vs {want}");
        }
        let c = cell(SimFamily::Weibull, 10.0, 1.0, SimPrior::Flat, 1);
        assert_eq!(prob_fewer_than_3(&c), 0.0);
        let c = cell(SimFamily::Weibull, 0.4, 1.0, SimPrior::Flat, 1); // n = 1
        assert_eq!(prob_fewer_than_3(&c), 1.0);
        assert!((mc_standard_error(0.95, 5_000) - 0.0030822070014844882251).abs() < 1e-15);
        assert!((mc_standard_error(0.025, 5_000) - 0.0022079402165819617137).abs() < 1e-15);
        assert_eq!(mc_standard_error(0.5, 1), 0.5);
    }

    #[test]
    fn pinned_interval_mode_scores_zero_and_full_level_scores_one() {
        let mut c = cell(SimFamily::Weibull, 10.0, 0.5, SimPrior::Flat, 50);
        c.interval_method = IntervalMethod::PinnedAtTruth;
        let r = run_cell(&c, &SimBudget::default()).unwrap();
        for q in &r.quantiles {
            assert_eq!(q.alpha_l, 1.0);
            assert_eq!(q.alpha_u, 1.0);
            assert_eq!(q.coverage, 0.0);
        }
        assert_eq!(r.reps_completed, 50);
        // Level-one intervals span the whole posterior sample and almost
        // surely contain the truth.
        let budget = SimBudget { chains: 2, draws_per_chain: 200, warmup: 300 };
        let mut c = cell(SimFamily::Lognormal, 8.0, 1.0, SimPrior::Flat, 12);
        c.credible_level = 1.0;
        let r = run_cell(&c, &budget).unwrap();
        for q in &r.quantiles {
            assert_eq!(q.coverage, 1.0, "{q:?}");
        }
    }

    #[test]
    fn cell_results_are_deterministic_and_satisfy_the_coverage_identity() {
        let budget = SimBudget { chains: 2, draws_per_chain: 250, warmup: 300 };
        let c = cell(SimFamily::Weibull, 5.0, 0.5, SimPrior::Ij, 24);
        let a = run_cell(&c, &budget).unwrap();
        let b = run_cell(&c, &budget).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reps_completed + a.sampler_failures, 24);
        for q in &a.quantiles {
            assert!((q.coverage - (1.0 - q.alpha_l - q.alpha_u)).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&q.alpha_l));
            assert!((0.0..=1.0).contains(&q.coverage));
        }
    }

    #[test]
    fn flat_and_information_priors_share_datasets_within_a_sweep() {
        let spec = SweepSpec {
            family: vec![SimFamily::Weibull, SimFamily::Lognormal],
            prior: vec![SimPrior::Flat, SimPrior::Ij],
            e_r: vec![10.0, 25.0],
            p_fail: vec![0.1, 0.5],
            n_reps: 4,
            credible_level: 0.95,
            seed: 42,
        };
        spec.validate().unwrap();
        let cells = spec.cells();
        assert_eq!(cells.len(), 16);
        for pair in cells.chunks(2) {
            assert_eq!(pair[0].seed, pair[1].seed);
            assert_ne!(pair[0].prior, pair[1].prior);
            assert_eq!(simulate_dataset(&pair[0], 0), simulate_dataset(&pair[1], 0));
        }
        // Distinct factor combinations get distinct seeds.
        let mut seeds: Vec<u64> = cells.iter().map(|c| c.seed).collect();
        seeds.dedup();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 8);
    }

    #[test]
    fn csv_rows_carry_the_full_schema() {
        let c = cell(SimFamily::Weibull, 10.0, 0.5, SimPrior::Flat, 3);
        let r = CellResult {
            quantiles: STUDY_QUANTILES
                .iter()
                .map(|&p| QuantileScore { p, alpha_l: 0.02, alpha_u: 0.03, coverage: 0.95 })
                .collect(),
            reps_completed: 3,
            reps_discarded_lt3: 1,
            sampler_failures: 0,
            rhat_flag_share: 0.0,
        };
        let csv = sweep_to_csv(&[(c, r)]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "family,prior,E_r,p_fail,quantile,alpha_L,alpha_U,coverage,n_reps,discarded"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("weibull,flat,10,0.5,t_0.01,"), "{row}");
        assert!(row.ends_with(",3,1"), "{row}");
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("t_0.10") && csv.contains("t_0.50"));
    }

    #[test]
    fn complete_data_coverage_sits_near_nominal_for_the_flat_prior() {
        // Complete samples of size 10: interval coverage is exact in
        // principle, so 150 replicates should land well inside a 3.2
        // standard-error band around 0.95.
        let c = cell(SimFamily::Weibull, 10.0, 1.0, SimPrior::Flat, 150);
        let r = run_cell(&c, &SimBudget::default()).unwrap();
        assert_eq!(r.sampler_failures, 0);
        let band = 3.2 * mc_standard_error(0.95, 150);
        for q in &r.quantiles {
            assert!(
                (q.coverage - 0.95).abs() < band,
                "t_{}: coverage {} (band {band})",
                q.p,
                q.coverage
            );
        }
    }
}
