//! Population mixtures over the four behavioral types.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::choice::{ChoiceModel, NoiseParams};
use crate::error::{Error, Result};
use crate::game::Scenario;
use crate::kernels::{BehaviorType, CondCoopSpec, SocialParams, TypeParams, WelfareParams};

/// Mixture components, in the order used by share vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeTag {
    Gm,
    Coop,
    Free,
    Alt,
}

impl TypeTag {
    pub const ALL: [TypeTag; 4] = [TypeTag::Gm, TypeTag::Coop, TypeTag::Free, TypeTag::Alt];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TypeTag::Gm => "gm",
            TypeTag::Coop => "coop",
            TypeTag::Free => "free",
            TypeTag::Alt => "alt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        TypeTag::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn behavior(self, spec: CondCoopSpec) -> BehaviorType {
        match self {
            TypeTag::Gm => BehaviorType::Gm,
            TypeTag::Coop => BehaviorType::CondCoop(spec),
            TypeTag::Free => BehaviorType::FreeRider,
            TypeTag::Alt => BehaviorType::Altruist,
        }
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Type shares `(pi_gm, pi_coop, pi_free, pi_alt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeShares(pub [f64; 4]);

impl TypeShares {
    pub fn new(pi: [f64; 4]) -> Result<Self> {
        if pi.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParams(format!(
                "type shares must be non-negative: {pi:?}"
            )));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "type shares sum to {total}, not 1"
            )));
        }
        Ok(TypeShares(pi))
    }

    /// The altruist share is the residual `1 - pi_gm - pi_coop - pi_free`.
    pub fn from_three(gm: f64, coop: f64, free: f64) -> Result<Self> {
        Self::new([gm, coop, free, 1.0 - gm - coop - free])
    }

    pub fn get(&self, t: TypeTag) -> f64 {
        self.0[t.index()]
    }
}

/// Full parameter vector of the mixture model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureParams {
    pub shares: TypeShares,
    pub spec: CondCoopSpec,
    /// `Social` for the two Charness-Rabin kernels, `Welfare` for the
    /// reciprocal-fairness kernel.
    pub prefs: TypeParams,
    pub noise: NoiseParams,
}

impl MixtureParams {
    pub fn new(
        shares: TypeShares,
        spec: CondCoopSpec,
        prefs: TypeParams,
        noise: NoiseParams,
    ) -> Result<Self> {
        let ok = matches!(
            (spec, prefs),
            (
                CondCoopSpec::ModifiedGm | CondCoopSpec::PureCc,
                TypeParams::Social(_)
            ) | (CondCoopSpec::ReciprocalFairness, TypeParams::Welfare(_))
        );
        if !ok {
            return Err(Error::InvalidParams(format!(
                "preference parameters {prefs:?} do not fit the {spec} specification"
            )));
        }
        Ok(MixtureParams {
            shares,
            spec,
            prefs,
            noise,
        })
    }

    pub fn social(
        shares: TypeShares,
        spec: CondCoopSpec,
        sp: SocialParams,
        noise: NoiseParams,
    ) -> Result<Self> {
        Self::new(shares, spec, TypeParams::Social(sp), noise)
    }

    pub fn welfare(shares: TypeShares, wp: WelfareParams, noise: NoiseParams) -> Result<Self> {
        Self::new(
            shares,
            CondCoopSpec::ReciprocalFairness,
            TypeParams::Welfare(wp),
            noise,
        )
    }

    pub fn type_params(&self, t: TypeTag) -> TypeParams {
        match t {
            TypeTag::Coop => self.prefs,
            _ => TypeParams::None,
        }
    }

    /// Names of the eight natural parameters, matching [`Self::to_natural`].
    pub fn natural_names(spec: CondCoopSpec) -> [&'static str; 8] {
        let (a, b) = preference_names(spec);
        [
            "pi_gm", "pi_coop", "pi_free", "pi_alt", a, b, "beta", "omega",
        ]
    }

    /// `(pi_gm, pi_coop, pi_free, pi_alt, sigma|gamma, rho|delta, beta, omega)`.
    pub fn to_natural(&self) -> [f64; 8] {
        let [g, c, f, a] = self.shares.0;
        let (p1, p2) = match self.prefs {
            TypeParams::Social(sp) => (sp.sigma, sp.rho),
            TypeParams::Welfare(wp) => (wp.gamma, wp.delta),
            TypeParams::None => (f64::NAN, f64::NAN),
        };
        [g, c, f, a, p1, p2, self.noise.beta, self.noise.omega]
    }

    pub fn from_natural(spec: CondCoopSpec, v: &[f64; 8]) -> Result<Self> {
        let shares = TypeShares::new([v[0], v[1], v[2], v[3]])?;
        let prefs = match spec {
            CondCoopSpec::ReciprocalFairness => {
                TypeParams::Welfare(WelfareParams::new(v[4], v[5])?)
            }
            _ => TypeParams::Social(SocialParams::new(v[5], v[4])?),
        };
        Self::new(shares, spec, prefs, NoiseParams::new(v[6], v[7])?)
    }
}

pub(crate) fn preference_names(spec: CondCoopSpec) -> (&'static str, &'static str) {
    match spec {
        CondCoopSpec::ReciprocalFairness => ("gamma", "delta"),
        _ => ("sigma", "rho"),
    }
}

/// `P(C)` for each type (rows, [`TypeTag`] order) at each cell of
/// [`Scenario::EXPERIMENTAL`] (columns).
pub type ProbTable = [[f64; 6]; 4];

pub fn prob_table(model: &ChoiceModel, params: &MixtureParams) -> Result<ProbTable> {
    let mut table = [[0.0; 6]; 4];
    for t in TypeTag::ALL {
        let bt = t.behavior(params.spec);
        let tp = params.type_params(t);
        for (j, s) in Scenario::EXPERIMENTAL.iter().enumerate() {
            table[t.index()][j] = model.prob(bt, &tp, s, params.noise)?;
        }
    }
    Ok(table)
}
