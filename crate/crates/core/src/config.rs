//! JSON study configuration shared by every command.
//!
//! ```json
//! {
//!   "n": 5, "m": 2,
//!   "payoffs": {"T": 600, "R": 500, "P": 100, "S": 50},
//!   "subjects": 50, "rounds": 10, "seed": 1, "scale": 0.01,
//!   "condcoop": "modified_gm",
//!   "mixture": {"pi": [0.4, 0.3, 0.2, 0.1], "sigma": -0.1, "rho": 0.5,
//!               "beta": 0.5, "omega": 0.15}
//! }
//! ```
//!
//! `gl: {"g": .., "l": ..}` may replace `payoffs`; `gamma`/`delta` replace
//! `sigma`/`rho` under the reciprocal-fairness specification.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::choice::{ChoiceModel, NoiseParams, DEFAULT_SCALE};
use crate::error::{Error, Result};
use crate::estimate::EstimationSpec;
use crate::game::{
    gl_to_matrix, rational_from_f64, validate_payoffs_with, GLParams, GameConfig, PayoffMatrix,
};
use crate::io::load_json;
use crate::kernels::{CondCoopSpec, SocialParams, WelfareParams};
use crate::model::{MixtureParams, TypeShares};
use crate::recovery::RecoveryConfig;
use crate::sim::{Elicitation, SimConfig, TypeAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "S")]
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlSpec {
    pub g: f64,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    /// Shares in the order G&M, conditional cooperator, free rider, altruist.
    pub pi: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub beta: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationSettings {
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub include_direct: bool,
    pub standard_errors: bool,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        let d = EstimationSpec::new(CondCoopSpec::ModifiedGm);
        EstimationSettings {
            restarts: d.restarts,
            tol: d.tol,
            max_iter: d.max_iter,
            include_direct: d.include_direct,
            standard_errors: d.standard_errors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoverySettings {
    pub iterations: usize,
}

impl Default for RecoverySettings {
    fn default() -> Self {
        RecoverySettings { iterations: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<PayoffSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gl: Option<GlSpec>,
    /// Accept payoffs with `2R <= T + S`.
    #[serde(default)]
    pub relax_alternation: bool,
    #[serde(default = "default_subjects")]
    pub subjects: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_spec")]
    pub condcoop: CondCoopSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureSpec>,
    #[serde(default = "default_elicitation")]
    pub elicitation: Elicitation,
    #[serde(default)]
    pub assignment: TypeAssignment,
    #[serde(default)]
    pub estimation: EstimationSettings,
    #[serde(default)]
    pub recovery: RecoverySettings,
}

fn default_n() -> usize {
    5
}
fn default_m() -> usize {
    2
}
fn default_subjects() -> usize {
    50
}
fn default_rounds() -> usize {
    10
}
fn default_scale() -> f64 {
    DEFAULT_SCALE
}
fn default_spec() -> CondCoopSpec {
    CondCoopSpec::ModifiedGm
}
fn default_elicitation() -> Elicitation {
    Elicitation::Strategy
}

impl Default for StudyConfig {
    /// The laboratory game with no mixture.
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self> {
        load_json(path)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The validated stage-game payoffs. Without `payoffs` or `gl` the
    /// laboratory matrix is used.
    pub fn payoff_matrix(&self) -> Result<PayoffMatrix> {
        let pm = match (self.payoffs, self.gl) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "give either payoffs or gl, not both".into(),
                ))
            }
            (Some(p), None) => PayoffMatrix::new_unchecked(
                rational_from_f64(p.t)?,
                rational_from_f64(p.r)?,
                rational_from_f64(p.p)?,
                rational_from_f64(p.s)?,
            ),
            (None, Some(gl)) => gl_to_matrix(GLParams::from_f64(gl.g, gl.l)?)?,
            (None, None) => PayoffMatrix::experimental(),
        };
        validate_payoffs_with(&pm, !self.relax_alternation).map_err(Error::InvalidPayoffs)?;
        Ok(pm)
    }

    pub fn game(&self) -> Result<GameConfig> {
        GameConfig::new(self.n, self.m, self.payoff_matrix()?)
    }

    pub fn choice_model(&self) -> Result<ChoiceModel> {
        ChoiceModel::new(self.game()?, self.scale)
    }

    pub fn mixture(&self) -> Result<MixtureParams> {
        let mx = self
            .mixture
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("the config has no mixture section".into()))?;
        let shares = TypeShares::new(mx.pi)?;
        let noise = NoiseParams::new(mx.beta, mx.omega)?;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                Error::InvalidConfig(format!("mixture.{name} is required for {}", self.condcoop))
            })
        };
        let reject = |v: Option<f64>, name: &str| match v {
            Some(_) => Err(Error::InvalidConfig(format!(
                "mixture.{name} does not apply to {}",
                self.condcoop
            ))),
            None => Ok(()),
        };
        match self.condcoop {
            CondCoopSpec::ReciprocalFairness => {
                reject(mx.sigma, "sigma")?;
                reject(mx.rho, "rho")?;
                let wp = WelfareParams::new(need(mx.gamma, "gamma")?, need(mx.delta, "delta")?)?;
                MixtureParams::welfare(shares, wp, noise)
            }
            spec => {
                reject(mx.gamma, "gamma")?;
                reject(mx.delta, "delta")?;
                let sp = SocialParams::new(need(mx.rho, "rho")?, need(mx.sigma, "sigma")?)?;
                MixtureParams::social(shares, spec, sp, noise)
            }
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let cfg = SimConfig {
            n_subjects: self.subjects,
            rounds: self.rounds,
            model: self.choice_model()?,
            mixture: self.mixture()?,
            seed: self.seed,
            elicitation: self.elicitation,
            assignment: self.assignment,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn estimation_spec(&self) -> EstimationSpec {
        let e = &self.estimation;
        EstimationSpec {
            restarts: e.restarts,
            tol: e.tol,
            max_iter: e.max_iter,
            seed: self.seed,
            include_direct: e.include_direct,
            standard_errors: e.standard_errors,
            ..EstimationSpec::new(self.condcoop)
        }
    }

    pub fn recovery_config(&self) -> Result<RecoveryConfig> {
        Ok(RecoveryConfig {
            truth: self.mixture()?,
            iterations: self.recovery.iterations,
            n_subjects: self.subjects,
            rounds: self.rounds,
            model: self.choice_model()?,
            seed: self.seed,
            assignment: self.assignment,
            estimation: self.estimation_spec(),
        })
    }
}
