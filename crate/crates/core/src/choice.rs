//! Probabilistic choice: logit with a tremble for utility-maximizing types,
//! a constant error rate for heuristic ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Action, GameConfig, Scenario};
use crate::kernels::{type_eu, BehaviorType, EUPair, Prescription, TypeParams};

/// Token utilities are multiplied by this before `beta` is applied, so the
/// laboratory `4R` becomes 20 utility units.
pub const DEFAULT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Logit precision per (scaled) utility unit.
    pub beta: f64,
    /// Tremble probability.
    pub omega: f64,
}

impl NoiseParams {
    /// Accepts `beta >= 0` and `omega` in the closed interval `[0, 1/2]`;
    /// the endpoints are the noiseless and the uniform-choice limits.
    pub fn new(beta: f64, omega: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        if !(0.0..=0.5).contains(&omega) {
            return Err(Error::InvalidParams(format!(
                "omega must lie in [0, 0.5], got {omega}"
            )));
        }
        Ok(NoiseParams { beta, omega })
    }
}

/// `1 / (1 + exp(-x))` without overflow for either sign of `x`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `(1 - omega) * Lambda(beta * (EU_c - EU_d)) + omega / 2`. The pair is
/// taken as already scaled.
pub fn logit_tremble(eu: EUPair, np: NoiseParams) -> f64 {
    (1.0 - np.omega) * logistic(np.beta * eu.difference()) + 0.5 * np.omega
}

pub fn constant_error(prescribed: Action, np: NoiseParams) -> f64 {
    match prescribed {
        Action::C => 1.0 - np.omega,
        Action::D => np.omega,
    }
}

/// Game plus the token-to-utility scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoiceModel {
    pub game: GameConfig,
    pub scale: f64,
}

impl ChoiceModel {
    pub fn new(game: GameConfig, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "payoff scale must be positive, got {scale}"
            )));
        }
        Ok(ChoiceModel { game, scale })
    }

    pub fn experimental() -> Self {
        ChoiceModel {
            game: GameConfig::experimental(),
            scale: DEFAULT_SCALE,
        }
    }

    /// Probability that a type cooperates at `s`.
    pub fn prob(
        &self,
        t: BehaviorType,
        params: &TypeParams,
        s: &Scenario,
        np: NoiseParams,
    ) -> Result<f64> {
        Ok(match type_eu(t, params, s, &self.game)? {
            Prescription::Utility(eu) => logit_tremble(eu.scaled(self.scale), np),
            Prescription::Fixed(a) => constant_error(a, np),
        })
    }
}

/// Free-function form of [`ChoiceModel::prob`].
pub fn choice_prob(
    t: BehaviorType,
    params: &TypeParams,
    s: &Scenario,
    cfg: &GameConfig,
    np: NoiseParams,
    scale: f64,
) -> Result<f64> {
    ChoiceModel::new(*cfg, scale)?.prob(t, params, s, np)
}
