use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::{log_likelihood_tallies, posteriors, tally, SubjectTally};
use super::optim::{maximize_bfgs, BfgsOptions, OptimResult};
use super::se::{delta_method, inverse_information, jacobian, HESSIAN_STEP};
use super::transform::{Parameterization, SOCIAL_BOUND};
use crate::choice::ChoiceModel;
use crate::error::{Error, Result};
use crate::kernels::{CondCoopSpec, TypeParams};
use crate::model::MixtureParams;
use crate::sim::{stream_rng, ChoiceData};

const STREAM_RESTARTS: u64 = 5;
/// Distance from a bound below which a natural parameter is flagged.
const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationSpec {
    pub spec: CondCoopSpec,
    pub restarts: usize,
    /// Convergence tolerance on the log-likelihood change.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Admit direct-play records alongside the strategy-method ones.
    pub include_direct: bool,
    /// Hold the conditional-cooperator preferences at these values.
    #[serde(skip)]
    pub fixed_prefs: Option<TypeParams>,
    pub standard_errors: bool,
}

impl EstimationSpec {
    pub fn new(spec: CondCoopSpec) -> Self {
        EstimationSpec {
            spec,
            restarts: 50,
            tol: 1e-8,
            max_iter: 1000,
            seed: 0,
            include_direct: false,
            fixed_prefs: None,
            standard_errors: true,
        }
    }

    pub fn parameterization(&self) -> Result<Parameterization> {
        Parameterization::new(self.spec, self.fixed_prefs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub restarts: usize,
    pub converged: usize,
    pub best_ll: f64,
    pub worst_ll: f64,
    /// Final value of each restart, `None` where the start was infeasible.
    pub restart_lls: Vec<Option<f64>>,
    pub best_restart: usize,
    pub hessian_ok: bool,
    /// Natural parameters at or near a bound.
    pub boundary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub spec: CondCoopSpec,
    pub params: MixtureParams,
    /// `(pi_gm, pi_coop, pi_free, pi_alt, sigma|gamma, rho|delta, beta, omega)`.
    pub estimates: [f64; 8],
    /// `None` for parameters at a bound, held fixed, or when the
    /// information matrix is singular.
    pub std_errors: [Option<f64>; 8],
    pub ll: f64,
    pub aic: f64,
    pub bic: f64,
    pub k: usize,
    pub n_obs: usize,
    pub subject_ids: Vec<String>,
    pub posteriors: Vec<[f64; 4]>,
    pub diagnostics: Diagnostics,
}

impl EstimateResult {
    pub fn names(&self) -> [&'static str; 8] {
        MixtureParams::natural_names(self.spec)
    }
}

/// `AIC = -2 ll + 2k`, `BIC = -2 ll + k ln(n_obs)`.
pub fn information_criteria(ll: f64, k: usize, n_obs: usize) -> Result<(f64, f64)> {
    if n_obs == 0 {
        return Err(Error::InvalidParams(
            "information criteria need n_obs >= 1".into(),
        ));
    }
    let k = k as f64;
    Ok((-2.0 * ll + 2.0 * k, -2.0 * ll + k * (n_obs as f64).ln()))
}

fn objective<'a>(
    param: &'a Parameterization,
    tallies: &'a [SubjectTally],
    model: &'a ChoiceModel,
) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    move |x: &[f64]| {
        param
            .to_params(x)
            .and_then(|p| log_likelihood_tallies(tallies, &p, model))
            .unwrap_or(f64::NAN)
    }
}

/// Uniform draw from the restart box of `param` on restart stream `index`.
pub fn restart_point(param: &Parameterization, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_RESTARTS, index as u64);
    param
        .start_box()
        .into_iter()
        .map(|(lo, hi)| rng.gen_range(lo..=hi))
        .collect()
}

fn boundary_flags(param: &Parameterization, v: &[f64; 8]) -> Vec<usize> {
    let near = |x: f64, b: f64| (x - b).abs() < BOUNDARY_TOL;
    let mut out = Vec::new();
    for i in param.free_natural_indices() {
        let x = v[i];
        let hit = match i {
            0..=3 => near(x, 0.0) || near(x, 1.0),
            4 | 5 => match param.spec {
                CondCoopSpec::ReciprocalFairness => near(x, 0.0) || near(x, 1.0),
                _ => SOCIAL_BOUND - x.abs() < 1e-3,
            },
            6 => x < BOUNDARY_TOL,
            _ => near(x, 0.0) || near(x, 0.5),
        };
        if hit {
            out.push(i);
        }
    }
    out
}

/// Maximum-likelihood fit of the four-type mixture from random restarts.
pub fn fit_mixture(
    data: &ChoiceData,
    model: &ChoiceModel,
    spec: &EstimationSpec,
) -> Result<EstimateResult> {
    let tallies = tally(data, spec.include_direct)?;
    if tallies.len() < 2 {
        return Err(Error::Data(format!(
            "estimation needs at least two subjects, found {}",
            tallies.len()
        )));
    }
    if spec.restarts == 0 {
        return Err(Error::InvalidConfig(
            "at least one restart is required".into(),
        ));
    }
    let param = spec.parameterization()?;
    let n_obs: usize = tallies.iter().map(|t| t.records() as usize).sum();
    let f = objective(&param, &tallies, model);
    let opts = BfgsOptions {
        max_iter: spec.max_iter,
        ftol: spec.tol,
        ..BfgsOptions::default()
    };

    let runs: Vec<OptimResult> = (0..spec.restarts)
        .into_par_iter()
        .map(|i| maximize_bfgs(&f, &restart_point(&param, spec.seed, i), &opts))
        .collect();

    let restart_lls: Vec<Option<f64>> = runs
        .iter()
        .map(|r| r.value.is_finite().then_some(r.value))
        .collect();
    let converged = runs
        .iter()
        .filter(|r| r.converged && r.value.is_finite())
        .count();
    let mut best: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        if r.value.is_finite() && best.is_none_or(|b| r.value > runs[b].value) {
            best = Some(i);
        }
    }
    let finite: Vec<f64> = restart_lls.iter().flatten().copied().collect();
    let (Some(best), true) = (best, converged > 0) else {
        return Err(Error::Convergence(format!(
            "{} restarts, {} with a finite log-likelihood, none converged",
            spec.restarts,
            finite.len()
        )));
    };
    let run = &runs[best];
    let params = param.to_params(&run.x)?;
    let estimates = params.to_natural();
    let k = param.dim();
    let (aic, bic) = information_criteria(run.value, k, n_obs)?;

    let flagged = boundary_flags(&param, &estimates);
    let mut std_errors = [None; 8];
    let mut hessian_ok = false;
    if spec.standard_errors {
        if let Some(cov) = inverse_information(&f, &run.x, HESSIAN_STEP) {
            let g = |x: &[f64]| param.natural(x).ok().map(|v| v.to_vec());
            if let Some(jac) = jacobian(&g, &run.x, 1e-6) {
                let nat = delta_method(&jac, &cov);
                hessian_ok = true;
                for i in param.free_natural_indices() {
                    let var = nat[(i, i)];
                    if !flagged.contains(&i) && var.is_finite() && var >= 0.0 {
                        std_errors[i] = Some(var.sqrt());
                    }
                }
            }
        }
    }

    let names = MixtureParams::natural_names(spec.spec);
    let post = posteriors(&tallies, &params, model)?;
    Ok(EstimateResult {
        spec: spec.spec,
        params,
        estimates,
        std_errors,
        ll: run.value,
        aic,
        bic,
        k,
        n_obs,
        subject_ids: tallies.iter().map(|t| t.id.clone()).collect(),
        posteriors: post,
        diagnostics: Diagnostics {
            restarts: spec.restarts,
            converged,
            best_ll: run.value,
            worst_ll: finite.iter().copied().fold(f64::INFINITY, f64::min),
            restart_lls,
            best_restart: best,
            hessian_ok,
            boundary: flagged.into_iter().map(|i| names[i].to_string()).collect(),
        },
    })
}
