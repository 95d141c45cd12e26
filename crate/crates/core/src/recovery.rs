//! Monte Carlo parameter recovery: simulate at known parameters, refit,
//! and summarize the spread of the estimates.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::choice::ChoiceModel;
use crate::error::{Error, Result};
use crate::estimate::report::align;
use crate::estimate::{fit_mixture, log_likelihood_tallies, tally, EstimationSpec};
use crate::model::MixtureParams;
use crate::sim::{simulate_session, stream_rng, Elicitation, SimConfig, TypeAssignment};

const STREAM_ITERATIONS: u64 = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    pub truth: MixtureParams,
    pub iterations: usize,
    pub n_subjects: usize,
    pub rounds: usize,
    pub model: ChoiceModel,
    pub seed: u64,
    pub assignment: TypeAssignment,
    /// Template for every refit; its seed is replaced per iteration.
    pub estimation: EstimationSpec,
}

impl RecoveryConfig {
    /// 50 subjects over 10 rounds, 100 iterations, 50 restarts per fit.
    pub fn desk_design(truth: MixtureParams, seed: u64) -> Self {
        RecoveryConfig {
            truth,
            iterations: 100,
            n_subjects: 50,
            rounds: 10,
            model: ChoiceModel::experimental(),
            seed,
            assignment: TypeAssignment::Quota,
            estimation: EstimationSpec::new(truth.spec),
        }
    }
}

/// Seed of iteration `i`; independent of how iterations are scheduled.
pub fn iteration_seed(seed: u64, i: usize) -> u64 {
    stream_rng(seed, STREAM_ITERATIONS, i as u64).gen()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationOutcome {
    pub index: usize,
    pub seed: u64,
    pub estimates: Option<[f64; 8]>,
    pub std_errors: Option<[Option<f64>; 8]>,
    pub ll: Option<f64>,
    /// Log-likelihood of the same data at the true parameters.
    pub ll_truth: Option<f64>,
    /// `n_obs * ln(1/2)`.
    pub ll_uniform: f64,
    pub converged_restarts: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverySummary {
    pub names: [&'static str; 8],
    pub truth: [f64; 8],
    pub mean: [f64; 8],
    pub sd: [f64; 8],
    /// `sd / sqrt(successful iterations)`.
    pub mc_se: [f64; 8],
    /// Mean of the analytic standard errors where available.
    pub mean_se: [Option<f64>; 8],
    pub successes: usize,
    pub failures: Vec<(usize, String)>,
}

fn run_iteration(cfg: &RecoveryConfig, index: usize) -> IterationOutcome {
    let seed = iteration_seed(cfg.seed, index);
    let sim = SimConfig {
        n_subjects: cfg.n_subjects,
        rounds: cfg.rounds,
        model: cfg.model,
        mixture: cfg.truth,
        seed,
        elicitation: Elicitation::Strategy,
        assignment: cfg.assignment,
    };
    let mut outcome = IterationOutcome {
        index,
        seed,
        estimates: None,
        std_errors: None,
        ll: None,
        ll_truth: None,
        ll_uniform: 0.0,
        converged_restarts: 0,
        error: None,
    };
    let attempt = (|| -> Result<()> {
        let data = simulate_session(&sim)?.export();
        let tallies = tally(&data, cfg.estimation.include_direct)?;
        let n_obs: u32 = tallies.iter().map(|t| t.records()).sum();
        outcome.ll_uniform = f64::from(n_obs) * 0.5f64.ln();
        outcome.ll_truth = log_likelihood_tallies(&tallies, &cfg.truth, &cfg.model).ok();
        let spec = EstimationSpec {
            seed,
            ..cfg.estimation.clone()
        };
        let fit = fit_mixture(&data, &cfg.model, &spec)?;
        outcome.estimates = Some(fit.estimates);
        outcome.std_errors = Some(fit.std_errors);
        outcome.ll = Some(fit.ll);
        outcome.converged_restarts = fit.diagnostics.converged;
        Ok(())
    })();
    if let Err(e) = attempt {
        outcome.error = Some(e.to_string());
    }
    outcome
}

/// Runs every iteration (in parallel) and summarizes. A failed fit is
/// recorded in the summary rather than aborting the study.
pub fn run_recovery(cfg: &RecoveryConfig) -> Result<(Vec<IterationOutcome>, RecoverySummary)> {
    if cfg.iterations == 0 {
        return Err(Error::InvalidConfig(
            "recovery needs at least one iteration".into(),
        ));
    }
    if cfg.estimation.spec != cfg.truth.spec {
        return Err(Error::InvalidConfig(format!(
            "truth is {} but estimation uses {}",
            cfg.truth.spec, cfg.estimation.spec
        )));
    }
    let outcomes: Vec<IterationOutcome> = (0..cfg.iterations)
        .into_par_iter()
        .map(|i| run_iteration(cfg, i))
        .collect();
    let summary = summarize(cfg, &outcomes);
    Ok((outcomes, summary))
}

pub fn summarize(cfg: &RecoveryConfig, outcomes: &[IterationOutcome]) -> RecoverySummary {
    let ok: Vec<&[f64; 8]> = outcomes
        .iter()
        .filter_map(|o| o.estimates.as_ref())
        .collect();
    let n = ok.len() as f64;
    let mut mean = [f64::NAN; 8];
    let mut sd = [f64::NAN; 8];
    let mut mc_se = [f64::NAN; 8];
    let mut mean_se = [None; 8];
    for i in 0..8 {
        if ok.is_empty() {
            break;
        }
        let m = ok.iter().map(|v| v[i]).sum::<f64>() / n;
        let var = if ok.len() > 1 {
            ok.iter().map(|v| (v[i] - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean[i] = m;
        sd[i] = var.sqrt();
        mc_se[i] = sd[i] / n.sqrt();
        let ses: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| o.std_errors.as_ref().and_then(|s| s[i]))
            .collect();
        if !ses.is_empty() {
            mean_se[i] = Some(ses.iter().sum::<f64>() / ses.len() as f64);
        }
    }
    RecoverySummary {
        names: MixtureParams::natural_names(cfg.truth.spec),
        truth: cfg.truth.to_natural(),
        mean,
        sd,
        mc_se,
        mean_se,
        successes: ok.len(),
        failures: outcomes
            .iter()
            .filter_map(|o| o.error.as_ref().map(|e| (o.index, e.clone())))
            .collect(),
    }
}

/// The reported columns: every natural parameter except the residual
/// altruist share.
pub const TABLE_COLUMNS: [usize; 7] = [0, 1, 2, 4, 5, 6, 7];

/// True value, mean estimate and s.d. rows over the seven free
/// parameters, three decimals.
pub fn render_recovery(summary: &RecoverySummary) -> String {
    let mut rows = vec![std::iter::once(String::new())
        .chain(TABLE_COLUMNS.iter().map(|&i| summary.names[i].to_string()))
        .collect::<Vec<_>>()];
    let line = |label: &str, v: &[f64; 8]| {
        std::iter::once(label.to_string())
            .chain(TABLE_COLUMNS.iter().map(|&i| format!("{:.3}", v[i])))
            .collect::<Vec<_>>()
    };
    rows.push(line("True value", &summary.truth));
    rows.push(line("Estimated value", &summary.mean));
    rows.push(line("s.d.", &summary.sd));
    let mut out = align(&rows);
    if !summary.failures.is_empty() {
        out.push_str(&format!("failed iterations: {}\n", summary.failures.len()));
    }
    out
}
