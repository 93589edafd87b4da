//! One function per subcommand. Each stages its outputs in memory and
//! writes them only after the whole computation has succeeded.

use serde::Serialize;
use serde_json::{json, Value};

use relprior_core::data::{self, Dataset, StepEstimate};
use relprior_core::family::Family;
use relprior_core::fim::{build_fim_table, FIM_TABLE_DEFAULT_SIZE};
use relprior_core::likelihood::{self, FitResult, ProfileInterval};
use relprior_core::posterior::{
    sample_posterior, sample_prior_bounded, summarize, Coordinate, DrawSet, PosteriorTarget,
};
use relprior_core::prior::{
    ij_relative_surface, FimSource, JointPriorSpec, MarginalComponent, NoninfPriorSpec,
};
use relprior_core::simulation::{
    quality_gate_failures, run_cell, sweep_to_csv, SimBudget,
};
use relprior_core::{Error, Result};

use crate::config::{parse_prior, CliTarget, Run, VarySide};
use crate::emit::{self, Staged};

fn read_dataset(run: &Run) -> Result<Dataset> {
    let path = run.input_path()?;
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open input {}: {e}", path.display())))?;
    data::parse_csv(std::io::BufReader::new(file))
}

fn resolve_p_r(run: &Run, d: &Dataset) -> Result<f64> {
    match run.cfg.p_r {
        Some(p) if p > 0.0 && p < 1.0 => Ok(p),
        Some(p) => Err(Error::Config(format!("p_r must lie in (0, 1), got {p}"))),
        None => Ok(data::max_nonparametric_p(d)? / 2.0),
    }
}

fn posterior_targets(targets: &[CliTarget]) -> Vec<PosteriorTarget> {
    targets.iter().map(|t| t.to_posterior()).collect()
}

#[derive(Serialize)]
struct IntervalLine {
    target: String,
    #[serde(flatten)]
    interval: ProfileInterval,
}

/// Nonparametric estimate plus its plot-point CSV. Exact/right-censored
/// data gets the product-limit estimator, current-status data the
/// isotonic one; anything else is reported as unavailable.
fn npe_parts(d: &Dataset) -> Result<(Value, String)> {
    let (method, estimate): (&str, Option<StepEstimate>) = if d.is_exact_right() {
        ("product_limit", Some(data::kaplan_meier(d)?))
    } else if d.is_current_status() {
        ("isotonic", Some(data::pav_npmle(d)?))
    } else {
        ("none", None)
    };
    let mut csv = String::from("time,prob\n");
    if let Some(e) = &estimate {
        for (t, p) in &e.plot_points {
            csv.push_str(&format!("{t},{p}\n"));
        }
    }
    Ok((json!({ "method": method, "estimate": estimate }), csv))
}

// Contour axes: configured grid if present, otherwise log-spaced windows
// of +/- 4 standard errors around the estimate (+/- 1.5 in log space when
// no curvature information is available).
fn contour_axes(
    run: &Run,
    fit: &FitResult,
    family: Family,
    p_r: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(g) = &run.cfg.grid {
        return Ok((g.t_pr.values("t_pr")?, g.sigma.values("sigma")?));
    }
    let sigma_hat = fit.params_hat.sigma;
    let log_tpr_hat = fit.quantile(family, p_r)?.ln();
    let w = family.quantile(p_r);
    let (half_t, half_s) = match fit.approx_cov {
        Some(c) => {
            let var_ltpr = c[0][0] + 2.0 * w * c[0][1] + w * w * c[1][1];
            let var_lsig = c[1][1] / (sigma_hat * sigma_hat);
            (
                (4.0 * var_ltpr.max(0.0).sqrt()).clamp(0.5, 6.0),
                (4.0 * var_lsig.max(0.0).sqrt()).clamp(0.5, 6.0),
            )
        }
        None => (1.5, 1.5),
    };
    let axis = |center: f64, half: f64| -> Vec<f64> {
        (0..61)
            .map(|i| (center - half + 2.0 * half * i as f64 / 60.0).exp())
            .collect()
    };
    Ok((axis(log_tpr_hat, half_t), axis(sigma_hat.ln(), half_s)))
}

fn grid_csv(t_pr: &[f64], sigma: &[f64], values: &[Vec<f64>]) -> String {
    let mut out = String::from("t_pr,sigma,rel\n");
    for (i, t) in t_pr.iter().enumerate() {
        for (j, s) in sigma.iter().enumerate() {
            out.push_str(&format!("{t},{s},{}\n", values[i][j]));
        }
    }
    out
}

pub fn fit(run: &Run) -> Result<()> {
    let d = read_dataset(run)?;
    let family = run.family()?;
    let level = run.level()?;
    let fit = likelihood::ml_fit(&d, family, None)?;
    if !fit.converged {
        return Err(Error::Numerical(
            "likelihood maximization did not converge".into(),
        ));
    }
    let p_r = resolve_p_r(run, &d)?;
    let report = fit.report(family, p_r)?;
    emit::log(
        "info",
        &[
            ("loglik", format!("{:.6}", fit.loglik_max)),
            ("mu", format!("{:.6}", fit.params_hat.mu)),
            ("sigma", format!("{:.6}", fit.params_hat.sigma)),
        ],
    );

    let mut intervals = Vec::new();
    if let Some(targets) = run.cfg.targets.as_deref() {
        for t in targets {
            let interval = likelihood::profile_ci(&d, family, t.to_profile()?, level)?;
            intervals.push(IntervalLine { target: t.to_posterior().label(), interval });
        }
    }

    let (t_axis, s_axis) = contour_axes(run, &fit, family, p_r)?;
    let grid = likelihood::relative_likelihood_grid(&d, family, p_r, &t_axis, &s_axis)?;
    if !grid.contains_max {
        emit::log("warn", &[("msg", "contour grid does not bracket the estimate".to_string())]);
    }
    let (npe_json, plot_csv) = npe_parts(&d)?;

    let mut staged = Staged::new(&run.output_dir);
    staged.add_json("fit.json", &json!({ "fit": report, "intervals": intervals }))?;
    staged.add("contours.csv", grid_csv(&grid.t_pr, &grid.sigma, &grid.values));
    staged.add_json("npe.json", &npe_json)?;
    staged.add("plotpoints.csv", plot_csv);
    staged.flush()
}

pub fn npe(run: &Run) -> Result<()> {
    let d = read_dataset(run)?;
    let (npe_json, plot_csv) = npe_parts(&d)?;
    let mut staged = Staged::new(&run.output_dir);
    staged.add_json("npe.json", &npe_json)?;
    staged.add("plotpoints.csv", plot_csv);
    staged.flush()
}

// An information prior that names no censoring scheme gets the dataset's
// largest censoring time injected as a fixed-time scheme, so the prior
// reflects the study that actually ran. Complete data keeps the
// parameter-free failure-count form.
fn effective_prior_value(run: &Run, d: &Dataset) -> Result<Value> {
    let mut v = run
        .cfg
        .prior
        .clone()
        .ok_or_else(|| Error::Config("config field 'prior' is required".into()))?;
    let target = if v.get("noninf").is_some() {
        v.get_mut("noninf").expect("key just checked")
    } else {
        &mut v
    };
    if target.get("kind").and_then(Value::as_str) == Some("ij")
        && target.get("censoring").is_none()
    {
        if let Some(t_c) = d.max_censoring_time() {
            target
                .as_object_mut()
                .expect("kind key implies an object")
                .insert("censoring".into(), json!({ "type1": t_c }));
            emit::log("info", &[("effective_t_c", format!("{t_c}"))]);
        } else {
            emit::log(
                "info",
                &[(
                    "note",
                    "information prior without censored observations; failure-count form used"
                        .to_string(),
                )],
            );
        }
    }
    Ok(v)
}

fn log_run_diagnostics(draws: &DrawSet) {
    let mut pairs: Vec<(&str, String)> = vec![
        ("draws", draws.draws.len().to_string()),
        ("acceptance", format!("{:?}", draws.acceptance)),
    ];
    if let Some(r) = draws.r_hat {
        pairs.push(("r_hat_log_tpr", format!("{:.4}", r[0])));
        pairs.push(("r_hat_log_sigma", format!("{:.4}", r[1])));
    }
    emit::log("info", &pairs);
    for w in &draws.warnings {
        emit::log("warn", &[("msg", w.clone())]);
    }
}

pub fn bayes(run: &Run) -> Result<()> {
    let d = read_dataset(run)?;
    let family = run.family()?;
    let targets = run.targets()?;
    let level = run.level()?;
    let cfg = run.sampler();
    let prior_value = effective_prior_value(run, &d)?;
    let prior = parse_prior(&prior_value)?;

    let draws = sample_posterior(&d, family, &prior, run.cfg.p_r, &cfg)?;
    log_run_diagnostics(&draws);
    let summary = summarize(&draws, &posterior_targets(targets), level)?;

    let priorcheck = match &run.cfg.prior_check {
        None => json!({ "requested": false }),
        Some(pc) => {
            let pd = sample_prior_bounded(&prior, &pc.rect, pc.n, family, Some(draws.p_r), &cfg)?;
            json!({
                "requested": true,
                "n": pd.draws.len(),
                "acceptance": pd.acceptance,
                "draws": {
                    "log_tpr": pd.coordinate(Coordinate::LogTpr),
                    "log_sigma": pd.coordinate(Coordinate::LogSigma),
                },
                "warnings": pd.warnings,
            })
        }
    };

    let mut staged = Staged::new(&run.output_dir);
    staged.add("draws.csv", draws.to_csv());
    staged.add_json("summary.json", &summary)?;
    staged.add_json("priorcheck.json", &priorcheck)?;
    staged.flush()
}

pub fn prior_surface(run: &Run) -> Result<()> {
    let family = run.family()?;
    let grid = run
        .cfg
        .surface
        .as_ref()
        .ok_or_else(|| Error::Config("config field 'surface' is required".into()))?;
    let prior_value = run
        .cfg
        .prior
        .as_ref()
        .ok_or_else(|| Error::Config("config field 'prior' is required".into()))?;
    let spec: NoninfPriorSpec = match parse_prior(prior_value)? {
        JointPriorSpec::Noninf(s) => s,
        JointPriorSpec::Product { .. } => {
            return Err(Error::Config(
                "surface evaluation expects a noninformative prior".into(),
            ))
        }
    };
    let t_axis = grid.t_pr.values("t_pr")?;
    let s_axis = grid.sigma.values("sigma")?;
    let table;
    let source = if run.cfg.fim_by_quadrature {
        FimSource::Direct(family)
    } else {
        table = build_fim_table(family, FIM_TABLE_DEFAULT_SIZE)?;
        FimSource::Table(&table)
    };
    let surf = ij_relative_surface(&spec, &t_axis, &s_axis, &source)?;
    let mut staged = Staged::new(&run.output_dir);
    staged.add("surface.csv", grid_csv(&surf.t_pr, &surf.sigma, &surf.rel));
    staged.flush()
}

pub fn simulate(run: &Run, paper_fidelity: bool) -> Result<()> {
    let mut sweep = run
        .cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("config field 'sweep' is required".into()))?;
    if let Some(s) = run.seed {
        sweep.seed = s;
    }
    sweep.validate()?;
    let budget = if paper_fidelity { SimBudget::full() } else { SimBudget::default() };
    emit::log(
        "info",
        &[
            ("paper_fidelity", paper_fidelity.to_string()),
            ("budget_chains", budget.chains.to_string()),
            ("budget_draws_per_chain", budget.draws_per_chain.to_string()),
            ("budget_warmup", budget.warmup.to_string()),
        ],
    );

    // Cells are isolated: one failing cell is logged and skipped, the
    // rest of the sweep still runs and its rows are still written.
    let mut completed = Vec::new();
    let mut first_err: Option<Error> = None;
    for cell in sweep.cells() {
        let ident = format!(
            "{} {} e_r={} p_fail={}",
            cell.family.as_str(),
            cell.prior.as_str(),
            cell.e_r,
            cell.p_fail
        );
        match run_cell(&cell, &budget) {
            Ok(res) => {
                emit::log(
                    "info",
                    &[
                        ("cell", ident),
                        ("reps", res.reps_completed.to_string()),
                        ("discarded", res.reps_discarded_lt3.to_string()),
                    ],
                );
                completed.push((cell, res));
            }
            Err(e) => {
                emit::log("warn", &[("cell", ident), ("failed", e.to_string())]);
                first_err.get_or_insert(e);
            }
        }
    }

    let mut staged = Staged::new(&run.output_dir);
    staged.add("coverage.csv", sweep_to_csv(&completed));
    staged.flush()?;

    if let Some(e) = first_err {
        return Err(e);
    }
    let gates = quality_gate_failures(&completed);
    if !gates.is_empty() {
        for g in &gates {
            emit::log("warn", &[("quality_gate", g.clone())]);
        }
        return Err(Error::Guard(format!(
            "{} cell(s) exceed the diagnostic quality gate",
            gates.len()
        )));
    }
    Ok(())
}

fn variant_prior(
    base: &JointPriorSpec,
    side: VarySide,
    df: Option<f64>,
    range99: (f64, f64),
) -> Result<JointPriorSpec> {
    let mut p = base.clone();
    let JointPriorSpec::Product { location, scale } = &mut p else {
        return Err(Error::Config(
            "sensitivity analysis needs a product prior".into(),
        ));
    };
    let (slot, name) = match side {
        VarySide::Location => (location, "location"),
        VarySide::Scale => (scale, "scale"),
    };
    let MarginalComponent::Informative(m) = slot else {
        return Err(Error::Config(format!(
            "sensitivity analysis needs an informative {name} factor"
        )));
    };
    m.range99 = range99;
    if let Some(v) = df {
        m.df = Some(v);
    }
    p.validate()?;
    Ok(p)
}

pub fn sensitivity(run: &Run) -> Result<()> {
    let d = read_dataset(run)?;
    let family = run.family()?;
    let targets = posterior_targets(run.targets()?);
    let level = run.level()?;
    let cfg = run.sampler();
    let sens = run
        .cfg
        .sensitivity
        .clone()
        .ok_or_else(|| Error::Config("config field 'sensitivity' is required".into()))?;
    if sens.range99.is_empty() {
        return Err(Error::Config(
            "sensitivity.range99 must list at least one range".into(),
        ));
    }
    let base = parse_prior(
        run.cfg
            .prior
            .as_ref()
            .ok_or_else(|| Error::Config("config field 'prior' is required".into()))?,
    )?;

    let dfs: Vec<Option<f64>> = if sens.df.is_empty() {
        vec![None]
    } else {
        sens.df.iter().map(|&x| Some(x)).collect()
    };
    let mut variants = Vec::new();
    for &df in &dfs {
        for &r in &sens.range99 {
            variants.push((df, r));
        }
    }
    if variants.len() < 2 {
        return Err(Error::Config("need at least two prior variants".into()));
    }

    // Every variant reuses the same sampler settings and seed, so rows
    // differ only through the prior.
    let mut csv = String::from("df,range99_lo,range99_hi,target,median,lower,upper,level\n");
    for (df, (lo, hi)) in variants {
        let prior = variant_prior(&base, sens.side, df, (lo, hi))?;
        let draws = sample_posterior(&d, family, &prior, run.cfg.p_r, &cfg)?;
        log_run_diagnostics(&draws);
        let summary = summarize(&draws, &targets, level)?;
        let df_s = df.map(|x| x.to_string()).unwrap_or_default();
        for e in &summary.estimates {
            csv.push_str(&format!(
                "{df_s},{lo},{hi},{},{},{},{},{}\n",
                e.target, e.median, e.lower, e.upper, e.level
            ));
        }
    }

    let mut staged = Staged::new(&run.output_dir);
    staged.add("sensitivity.csv", csv);
    staged.flush()
}
