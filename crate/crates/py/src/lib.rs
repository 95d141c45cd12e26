//! Python bindings. Structured results come back as plain dicts decoded
//! from the same JSON the command-line tool writes.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use seqpd_core::choice::{ChoiceModel, NoiseParams};
use seqpd_core::estimate::{fit_mixture, information_criteria as ic, EstimationSpec};
use seqpd_core::game::{
    equilibrium_condition_general, equilibrium_condition_gl, rational_from_f64, Action, GameConfig,
    PayoffMatrix, PositionClass, Scenario,
};
use seqpd_core::io::{self, ResultsFile};
use seqpd_core::kernels::{
    gm_eu as core_gm_eu, type_eu, CondCoopSpec, SocialParams, WelfareParams,
};
use seqpd_core::model::{MixtureParams, TypeShares, TypeTag};
use seqpd_core::recovery::{run_recovery, RecoveryConfig};
use seqpd_core::sim::{simulate_session, ChoiceData, Elicitation, SimConfig, TypeAssignment};
use seqpd_core::stats::{self, McNemarVariant, Tail};
use seqpd_core::{Error, ErrorCategory};

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.category() {
        ErrorCategory::Validation => PyValueError::new_err(msg),
        ErrorCategory::Numerical => PyArithmeticError::new_err(msg),
        ErrorCategory::Io => PyOSError::new_err(msg),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for seqpd_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = io::to_json(value).py()?;
    py.import("json")?.call_method1("loads", (text,))
}

fn scenario(position_class: &str, cooperators: usize) -> PyResult<Scenario> {
    let class = PositionClass::parse(position_class).ok_or_else(|| {
        PyValueError::new_err(format!("unknown position class {position_class:?}"))
    })?;
    let s = Scenario { class, cooperators };
    s.validate(2).py()?;
    Ok(s)
}

fn parse_spec(spec: &str) -> PyResult<CondCoopSpec> {
    CondCoopSpec::parse(spec)
        .ok_or_else(|| PyValueError::new_err(format!("unknown specification {spec:?}")))
}

/// Mixture of the four behavioral types with its preference and noise
/// parameters.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Mixture {
    inner: MixtureParams,
}

#[pymethods]
impl Mixture {
    /// `pi` lists the shares in the order gm, coop, free, alt. The
    /// reciprocal-fairness specification takes `gamma` and `delta`, the
    /// other two take `sigma` and `rho`.
    #[new]
    #[pyo3(signature = (pi, spec="modified_gm", sigma=None, rho=None, gamma=None, delta=None, beta=0.5, omega=0.15))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        pi: [f64; 4],
        spec: &str,
        sigma: Option<f64>,
        rho: Option<f64>,
        gamma: Option<f64>,
        delta: Option<f64>,
        beta: f64,
        omega: f64,
    ) -> PyResult<Self> {
        let spec = parse_spec(spec)?;
        let shares = TypeShares::new(pi).py()?;
        let noise = NoiseParams::new(beta, omega).py()?;
        let inner = match (spec, sigma, rho, gamma, delta) {
            (CondCoopSpec::ReciprocalFairness, None, None, Some(g), Some(d)) => {
                MixtureParams::welfare(shares, WelfareParams::new(g, d).py()?, noise)
            }
            (CondCoopSpec::ModifiedGm | CondCoopSpec::PureCc, Some(s), Some(r), None, None) => {
                MixtureParams::social(shares, spec, SocialParams::new(r, s).py()?, noise)
            }
            _ => {
                return Err(PyValueError::new_err(format!(
                    "{spec} needs {}",
                    if spec == CondCoopSpec::ReciprocalFairness {
                        "gamma and delta"
                    } else {
                        "sigma and rho"
                    }
                )))
            }
        }
        .py()?;
        Ok(Mixture { inner })
    }

    /// Parameter names in natural order.
    #[getter]
    fn names(&self) -> Vec<&'static str> {
        MixtureParams::natural_names(self.inner.spec).to_vec()
    }

    /// `(pi_gm, pi_coop, pi_free, pi_alt, sigma|gamma, rho|delta, beta, omega)`.
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.to_natural().to_vec()
    }

    /// Probability that `type_name` cooperates in a scenario of the
    /// laboratory game.
    fn cooperation_probability(
        &self,
        type_name: &str,
        position_class: &str,
        cooperators: usize,
    ) -> PyResult<f64> {
        let tag = TypeTag::parse(type_name)
            .ok_or_else(|| PyValueError::new_err(format!("unknown type {type_name:?}")))?;
        let s = scenario(position_class, cooperators)?;
        ChoiceModel::experimental()
            .prob(
                tag.behavior(self.inner.spec),
                &self.inner.type_params(tag),
                &s,
                self.inner.noise,
            )
            .py()
    }

    /// Deterministic action ("C" or "D") of `type_name`.
    fn decision(
        &self,
        type_name: &str,
        position_class: &str,
        cooperators: usize,
    ) -> PyResult<&'static str> {
        let tag = TypeTag::parse(type_name)
            .ok_or_else(|| PyValueError::new_err(format!("unknown type {type_name:?}")))?;
        let s = scenario(position_class, cooperators)?;
        let p = type_eu(
            tag.behavior(self.inner.spec),
            &self.inner.type_params(tag),
            &s,
            &GameConfig::experimental(),
        )
        .py()?;
        Ok(p.decision().as_str())
    }

    fn __repr__(&self) -> String {
        let parts: Vec<String> = self
            .names()
            .iter()
            .zip(self.values())
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        format!("Mixture({}, {})", self.inner.spec, parts.join(", "))
    }
}

/// Choice records without latent types.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Choices {
    inner: ChoiceData,
}

#[pymethods]
impl Choices {
    /// Reads a choice CSV.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Choices {
            inner: io::load_choices(&path, &GameConfig::experimental()).py()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_choices(&self.inner, &path).py()
    }

    fn to_csv(&self) -> PyResult<String> {
        io::choices_to_csv(&self.inner).py()
    }

    /// Records of one part (1 strategy method, 3 direct play).
    fn part(&self, part: u8) -> Self {
        Choices {
            inner: self.inner.part(part),
        }
    }

    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.records)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A simulated session: the choices plus the latent types.
#[pyclass(frozen)]
struct Session {
    #[pyo3(get)]
    choices: Choices,
    #[pyo3(get)]
    types: std::collections::BTreeMap<String, &'static str>,
}

#[pyfunction]
#[pyo3(signature = (mixture, n_subjects=50, rounds=10, seed=0, elicitation="strategy", assignment="independent"))]
fn simulate(
    mixture: &Mixture,
    n_subjects: usize,
    rounds: usize,
    seed: u64,
    elicitation: &str,
    assignment: &str,
) -> PyResult<Session> {
    let elicitation = match elicitation {
        "strategy" => Elicitation::Strategy,
        "direct" => Elicitation::Direct,
        "both" => Elicitation::Both,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown elicitation {other:?}"
            )))
        }
    };
    let assignment = match assignment {
        "independent" => TypeAssignment::Independent,
        "quota" => TypeAssignment::Quota,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown assignment {other:?}"
            )))
        }
    };
    let cfg = SimConfig {
        n_subjects,
        rounds,
        elicitation,
        assignment,
        ..SimConfig::recovery_design(mixture.inner, seed)
    };
    let session = simulate_session(&cfg).py()?;
    Ok(Session {
        choices: Choices {
            inner: session.export(),
        },
        types: session
            .truth()
            .into_iter()
            .map(|(id, t)| (id, t.as_str()))
            .collect(),
    })
}

/// Maximum-likelihood fit; returns the results document as a dict.
#[pyfunction]
#[pyo3(signature = (choices, spec="modified_gm", restarts=50, seed=0, include_direct=false))]
fn estimate<'py>(
    py: Python<'py>,
    choices: &Choices,
    spec: &str,
    restarts: usize,
    seed: u64,
    include_direct: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = EstimationSpec {
        restarts,
        seed,
        include_direct,
        ..EstimationSpec::new(parse_spec(spec)?)
    };
    let data = &choices.inner;
    let fit = py
        .detach(|| fit_mixture(data, &ChoiceModel::experimental(), &spec))
        .py()?;
    to_dict(py, &ResultsFile::from(&fit))
}

/// Monte Carlo recovery at `truth`; returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (truth, iterations=100, seed=0, restarts=50))]
fn recover<'py>(
    py: Python<'py>,
    truth: &Mixture,
    iterations: usize,
    seed: u64,
    restarts: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = RecoveryConfig::desk_design(truth.inner, seed);
    cfg.iterations = iterations;
    cfg.estimation.restarts = restarts;
    let (_, summary) = py.detach(|| run_recovery(&cfg)).py()?;
    to_dict(py, &summary)
}

/// Rate tables and hypothesis tests.
#[pyfunction]
#[pyo3(signature = (choices, exact=false))]
fn describe<'py>(py: Python<'py>, choices: &Choices, exact: bool) -> PyResult<Bound<'py, PyAny>> {
    let variant = if exact {
        McNemarVariant::Exact
    } else {
        McNemarVariant::Corrected
    };
    to_dict(py, &stats::describe(&choices.inner, variant).py()?)
}

/// Token and normalized equilibrium checks for payoffs `(T, R, P, S)`.
#[pyfunction]
#[pyo3(signature = (payoffs=(600, 500, 100, 50), n=5, m=2))]
fn equilibrium<'py>(
    py: Python<'py>,
    payoffs: (i64, i64, i64, i64),
    n: usize,
    m: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let (t, r, p, s) = payoffs;
    let game = GameConfig::new(n, m, PayoffMatrix::from_tokens(t, r, p, s).py()?).py()?;
    let tokens = equilibrium_condition_general(&game).py()?;
    let g = game.payoffs.normalized().py()?.g;
    let normalized = equilibrium_condition_gl(n, m, g).py()?;
    let out = serde_json::json!({
        "tokens": {"threshold": tokens.threshold.to_string(), "holds": tokens.holds},
        "normalized": {"threshold": normalized.threshold.to_string(), "holds": normalized.holds},
        "g": g.to_string(),
    });
    to_dict(py, &out)
}

/// Threshold `1 - 2m/(n+m-1)` and whether `g` lies at or below it.
#[pyfunction]
fn equilibrium_gl(n: usize, m: usize, g: f64) -> PyResult<(f64, bool)> {
    let check = equilibrium_condition_gl(n, m, rational_from_f64(g).py()?).py()?;
    Ok((
        *check.threshold.numer() as f64 / *check.threshold.denom() as f64,
        check.holds,
    ))
}

/// Expected payoffs `(EU_C, EU_D)` of a G&M player in the laboratory game.
#[pyfunction]
fn gm_eu(position_class: &str, cooperators: usize) -> PyResult<(f64, f64)> {
    let eu = core_gm_eu(
        &scenario(position_class, cooperators)?,
        &GameConfig::experimental(),
    )
    .py()?;
    Ok((eu.eu_c, eu.eu_d))
}

#[pyfunction]
fn gm_decision(position_class: &str, cooperators: usize) -> PyResult<&'static str> {
    let (c, d) = gm_eu(position_class, cooperators)?;
    Ok(if c >= d {
        Action::C.as_str()
    } else {
        Action::D.as_str()
    })
}

/// `(statistic, p_value)` from discordant counts.
#[pyfunction]
#[pyo3(signature = (b, c, exact=false))]
fn mcnemar(b: u64, c: u64, exact: bool) -> (f64, f64) {
    let variant = if exact {
        McNemarVariant::Exact
    } else {
        McNemarVariant::Corrected
    };
    let r = stats::mcnemar_counts(b, c, variant);
    (r.statistic, r.p_value)
}

#[pyfunction]
#[pyo3(signature = (successes, trials, p0, tail="greater"))]
fn exact_binomial(successes: u64, trials: u64, p0: f64, tail: &str) -> PyResult<f64> {
    let tail =
        Tail::parse(tail).ok_or_else(|| PyValueError::new_err(format!("unknown tail {tail:?}")))?;
    stats::exact_binomial(successes, trials, p0, tail).py()
}

/// `(AIC, BIC)`.
#[pyfunction]
fn information_criteria(ll: f64, k: usize, n_obs: usize) -> PyResult<(f64, f64)> {
    ic(ll, k, n_obs).py()
}

#[pymodule]
#[pyo3(name = "seqpd")]
fn seqpd_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Mixture>()?;
    m.add_class::<Choices>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(recover, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium_gl, m)?)?;
    m.add_function(wrap_pyfunction!(gm_eu, m)?)?;
    m.add_function(wrap_pyfunction!(gm_decision, m)?)?;
    m.add_function(wrap_pyfunction!(mcnemar, m)?)?;
    m.add_function(wrap_pyfunction!(exact_binomial, m)?)?;
    m.add_function(wrap_pyfunction!(information_criteria, m)?)?;
    Ok(())
}
