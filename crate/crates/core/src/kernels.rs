//! Expected-utility pairs and deterministic prescriptions for each
//! behavioral type.
//!
//! The G&M kernel follows the general `(n, m)` decision table. The three
//! conditional-cooperator kernels are derived for the five-player,
//! two-sample design only and refuse other sizes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Action, GameConfig, PositionClass, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondCoopSpec {
    /// G&M reasoning with Charness-Rabin payoff transforms.
    ModifiedGm,
    /// Cooperates after partial cooperation and expects others to as well.
    PureCc,
    /// Own payoff blended with a min/total-surplus welfare criterion.
    ReciprocalFairness,
}

impl CondCoopSpec {
    pub fn as_str(self) -> &'static str {
        match self {
            CondCoopSpec::ModifiedGm => "modified_gm",
            CondCoopSpec::PureCc => "pure_cc",
            CondCoopSpec::ReciprocalFairness => "reciprocal_fairness",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.replace('-', "_").as_str() {
            "modified_gm" | "1" => Some(CondCoopSpec::ModifiedGm),
            "pure_cc" | "2" => Some(CondCoopSpec::PureCc),
            "reciprocal_fairness" | "rf" | "3" => Some(CondCoopSpec::ReciprocalFairness),
            _ => None,
        }
    }
}

impl fmt::Display for CondCoopSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BehaviorType {
    Gm,
    FreeRider,
    Altruist,
    CondCoop(CondCoopSpec),
}

impl BehaviorType {
    pub fn is_heuristic(&self) -> bool {
        matches!(self, BehaviorType::FreeRider | BehaviorType::Altruist)
    }
}

/// Charness-Rabin weights: `rho` applies when ahead, `sigma` when behind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocialParams {
    pub rho: f64,
    pub sigma: f64,
}

impl SocialParams {
    pub fn new(rho: f64, sigma: f64) -> Result<Self> {
        if !rho.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidParams(format!(
                "social weights must be finite (rho={rho}, sigma={sigma})"
            )));
        }
        Ok(SocialParams { rho, sigma })
    }

    pub const SELFISH: SocialParams = SocialParams {
        rho: 0.0,
        sigma: 0.0,
    };
}

/// Reciprocal-fairness weights: `gamma` on welfare versus own payoff,
/// `delta` on the minimum versus total surplus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareParams {
    pub gamma: f64,
    pub delta: f64,
}

impl WelfareParams {
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(gamma) || !unit(delta) {
            return Err(Error::InvalidParams(format!(
                "gamma and delta must lie in [0, 1] (gamma={gamma}, delta={delta})"
            )));
        }
        Ok(WelfareParams { gamma, delta })
    }
}

/// Parameters carried by a behavioral type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TypeParams {
    None,
    Social(SocialParams),
    Welfare(WelfareParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EUPair {
    pub eu_c: f64,
    pub eu_d: f64,
}

impl EUPair {
    pub fn new(eu_c: f64, eu_d: f64) -> Self {
        EUPair { eu_c, eu_d }
    }

    /// Argmax with ties going to cooperation.
    pub fn decision(&self) -> Action {
        if self.eu_c >= self.eu_d {
            Action::C
        } else {
            Action::D
        }
    }

    pub fn difference(&self) -> f64 {
        self.eu_c - self.eu_d
    }

    pub fn scaled(&self, factor: f64) -> Self {
        EUPair::new(self.eu_c * factor, self.eu_d * factor)
    }
}

/// Output of a kernel: utilities for optimizing types, a fixed action for
/// heuristic ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prescription {
    Utility(EUPair),
    Fixed(Action),
}

impl Prescription {
    pub fn decision(&self) -> Action {
        match self {
            Prescription::Utility(eu) => eu.decision(),
            Prescription::Fixed(a) => *a,
        }
    }
}

fn require_experimental(cfg: &GameConfig, what: &str) -> Result<()> {
    if cfg.is_experimental_design() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{what} is derived for n=5, m=2 only (got n={}, m={})",
            cfg.n, cfg.m
        )))
    }
}

/// Expected payoffs of C and D under G&M beliefs.
pub fn gm_eu(s: &Scenario, cfg: &GameConfig) -> Result<EUPair> {
    s.validate(cfg.m)?;
    let [t, r, p, su] = cfg.payoffs.to_f64();
    let n = cfg.n as f64;
    let m = cfg.m as f64;
    // expected number of earlier cooperators and of later players
    let before = (n + m - 1.0) / 2.0;
    let after = (n - m - 1.0) / 2.0;
    let eu = match (s.class, s.cooperators) {
        (PositionClass::Pos1, _) => EUPair::new((n - 1.0) * r, (n - 1.0) * p),
        (PositionClass::Pos2, 1) => EUPair::new((n - 1.0) * r, t + (n - 2.0) * p),
        (PositionClass::Pos2, _) => EUPair::new(su + (n - 2.0) * su, p + (n - 2.0) * p),
        (PositionClass::Uncertain, 0) => {
            EUPair::new(before * su + after * su, before * p + after * p)
        }
        (PositionClass::Uncertain, c) if c == cfg.m => {
            EUPair::new((n - 1.0) * r, before * t + after * p)
        }
        (PositionClass::Uncertain, _) => EUPair::new(
            (before - 1.0) * r + (after + 1.0) * su,
            (before - 1.0) * t + (after + 1.0) * p,
        ),
    };
    Ok(eu)
}

pub fn gm_decision(s: &Scenario, cfg: &GameConfig) -> Result<Action> {
    Ok(gm_eu(s, cfg)?.decision())
}

/// Free-riders always defect, altruists always cooperate.
pub fn heuristic_decision(t: BehaviorType, _s: &Scenario) -> Result<Action> {
    match t {
        BehaviorType::FreeRider => Ok(Action::D),
        BehaviorType::Altruist => Ok(Action::C),
        other => Err(Error::InvalidParams(format!(
            "{other:?} is not a heuristic type"
        ))),
    }
}

/// Charness-Rabin utility of receiving `own` while the counterpart gets
/// `other`.
pub fn cr_utility(own: f64, other: f64, sp: SocialParams) -> f64 {
    if own > other {
        (1.0 - sp.rho) * own + sp.rho * other
    } else if own < other {
        (1.0 - sp.sigma) * own + sp.sigma * other
    } else {
        own
    }
}

/// Pairwise payoffs `(T, R, P, S)` after the social-preference transform.
fn transformed(cfg: &GameConfig, sp: SocialParams) -> [f64; 4] {
    let [t, r, p, s] = cfg.payoffs.to_f64();
    [
        cr_utility(t, s, sp),
        cr_utility(r, r, sp),
        cr_utility(p, p, sp),
        cr_utility(s, t, sp),
    ]
}

/// Modified G&M conditional cooperator.
pub fn cc_spec1_eu(s: &Scenario, cfg: &GameConfig, sp: SocialParams) -> Result<EUPair> {
    require_experimental(cfg, "the modified G&M kernel")?;
    s.validate(cfg.m)?;
    let [t, r, p, su] = transformed(cfg, sp);
    let eu = match (s.class, s.cooperators) {
        (PositionClass::Pos1, _) => EUPair::new(4.0 * r, 4.0 * p),
        (PositionClass::Pos2, 1) => EUPair::new(4.0 * r, t + 3.0 * p),
        (PositionClass::Pos2, _) => EUPair::new(4.0 * su, 4.0 * p),
        (PositionClass::Uncertain, 2) => EUPair::new(4.0 * r, 3.0 * t + p),
        // the lone cooperator is the immediate predecessor or the one
        // before, each with weight 1/2
        (PositionClass::Uncertain, 1) => EUPair::new(2.5 * r + 1.5 * su, 2.0 * t + 2.0 * p),
        (PositionClass::Uncertain, _) => EUPair::new(4.0 * su, 4.0 * p),
    };
    Ok(eu)
}

/// Pure conditional cooperator.
pub fn cc_spec2_eu(s: &Scenario, cfg: &GameConfig, sp: SocialParams) -> Result<EUPair> {
    require_experimental(cfg, "the pure conditional-cooperator kernel")?;
    s.validate(cfg.m)?;
    let [t, r, p, su] = transformed(cfg, sp);
    let eu = match (s.class, s.cooperators) {
        (PositionClass::Pos1, _) => EUPair::new(4.0 * r, 4.0 * p),
        (PositionClass::Pos2, 1) => EUPair::new(4.0 * r, 4.0 * t),
        (PositionClass::Pos2, _) => EUPair::new(su + 3.0 * r, 4.0 * p),
        (PositionClass::Uncertain, 2) => EUPair::new(4.0 * r, 4.0 * t),
        (PositionClass::Uncertain, 1) => EUPair::new(su + 3.0 * r, 2.5 * t + 1.5 * p),
        (PositionClass::Uncertain, _) => EUPair::new(3.0 * su + r, 4.0 * p),
    };
    Ok(eu)
}

/// `delta * min + (1 - delta) * sum`.
pub fn welfare(payoffs: &[f64], delta: f64) -> Result<f64> {
    if payoffs.is_empty() {
        return Err(Error::InvalidParams(
            "welfare of an empty payoff vector".into(),
        ));
    }
    let min = payoffs.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = payoffs.iter().sum();
    Ok(delta * min + (1.0 - delta) * sum)
}

/// `(1 - gamma) * own + gamma * W(payoffs)`.
pub fn rf_utility(payoffs: &[f64], own: usize, wp: WelfareParams) -> Result<f64> {
    let own_payoff = *payoffs
        .get(own)
        .ok_or_else(|| Error::InvalidParams(format!("own index {own} outside payoff vector")))?;
    Ok((1.0 - wp.gamma) * own_payoff + wp.gamma * welfare(payoffs, wp.delta)?)
}

/// Coefficients of `(T, R, P, S)` in one player's expected total payoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayoffCombo {
    pub t: u8,
    pub r: u8,
    pub p: u8,
    pub s: u8,
}

const fn combo(t: u8, r: u8, p: u8, s: u8) -> PayoffCombo {
    PayoffCombo { t, r, p, s }
}

impl PayoffCombo {
    pub fn eval(&self, pay: [f64; 4]) -> f64 {
        let [t, r, p, s] = pay;
        f64::from(self.t) * t
            + f64::from(self.r) * r
            + f64::from(self.p) * p
            + f64::from(self.s) * s
    }
}

const R4: PayoffCombo = combo(0, 4, 0, 0);
const P4: PayoffCombo = combo(0, 0, 4, 0);
const S4: PayoffCombo = combo(0, 0, 0, 4);
const T1P3: PayoffCombo = combo(1, 0, 3, 0);
const T3P1: PayoffCombo = combo(3, 0, 1, 0);
const T2P2: PayoffCombo = combo(2, 0, 2, 0);
const R2S2: PayoffCombo = combo(0, 2, 0, 2);
const R1S3: PayoffCombo = combo(0, 1, 0, 3);

/// Expected payoffs of all five sequence slots after C and after D, and
/// which slot is the decision maker's.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WelfareRow {
    pub own: usize,
    pub after_c: [PayoffCombo; 5],
    pub after_d: [PayoffCombo; 5],
}

/// Per-slot expected payoffs for each experimental scenario, as tabulated
/// for the reciprocal-fairness model.
pub fn welfare_row(s: &Scenario) -> Result<WelfareRow> {
    let row = match (s.class, s.cooperators) {
        (PositionClass::Pos1, 0) => WelfareRow {
            own: 0,
            after_c: [R4; 5],
            after_d: [P4; 5],
        },
        (PositionClass::Pos2, 0) => WelfareRow {
            own: 1,
            after_c: [T1P3, S4, T1P3, T1P3, T1P3],
            after_d: [P4; 5],
        },
        (PositionClass::Pos2, 1) => WelfareRow {
            own: 1,
            after_c: [R4; 5],
            after_d: [S4, T1P3, T1P3, T1P3, T1P3],
        },
        (PositionClass::Uncertain, 0) => WelfareRow {
            own: 3,
            after_c: [T1P3, T1P3, T1P3, S4, T1P3],
            after_d: [P4; 5],
        },
        (PositionClass::Uncertain, 1) => WelfareRow {
            own: 3,
            after_c: [R2S2, R2S2, T3P1, R2S2, T3P1],
            after_d: [R1S3, R1S3, T2P2, T2P2, T2P2],
        },
        (PositionClass::Uncertain, 2) => WelfareRow {
            own: 3,
            after_c: [R4; 5],
            after_d: [R2S2, R2S2, R2S2, T3P1, T3P1],
        },
        _ => {
            return Err(Error::InvalidScenario(format!(
                "{s} is not a cell of the five-player design"
            )))
        }
    };
    Ok(row)
}

/// Reciprocal-fairness utilities of C and D.
pub fn rf_eu(s: &Scenario, cfg: &GameConfig, wp: WelfareParams) -> Result<EUPair> {
    require_experimental(cfg, "the reciprocal-fairness kernel")?;
    let row = welfare_row(s)?;
    let pay = cfg.payoffs.to_f64();
    let eval = |combos: &[PayoffCombo; 5]| -> Result<f64> {
        let v: Vec<f64> = combos.iter().map(|c| c.eval(pay)).collect();
        rf_utility(&v, row.own, wp)
    };
    Ok(EUPair::new(eval(&row.after_c)?, eval(&row.after_d)?))
}

/// Dispatches a behavioral type to its kernel.
pub fn type_eu(
    t: BehaviorType,
    params: &TypeParams,
    s: &Scenario,
    cfg: &GameConfig,
) -> Result<Prescription> {
    let mismatch =
        || Error::InvalidParams(format!("parameters {params:?} do not match type {t:?}"));
    match (t, params) {
        (BehaviorType::Gm, TypeParams::None) => Ok(Prescription::Utility(gm_eu(s, cfg)?)),
        (BehaviorType::FreeRider | BehaviorType::Altruist, TypeParams::None) => {
            Ok(Prescription::Fixed(heuristic_decision(t, s)?))
        }
        (BehaviorType::CondCoop(CondCoopSpec::ModifiedGm), TypeParams::Social(sp)) => {
            Ok(Prescription::Utility(cc_spec1_eu(s, cfg, *sp)?))
        }
        (BehaviorType::CondCoop(CondCoopSpec::PureCc), TypeParams::Social(sp)) => {
            Ok(Prescription::Utility(cc_spec2_eu(s, cfg, *sp)?))
        }
        (BehaviorType::CondCoop(CondCoopSpec::ReciprocalFairness), TypeParams::Welfare(wp)) => {
            Ok(Prescription::Utility(rf_eu(s, cfg, *wp)?))
        }
        _ => Err(mismatch()),
    }
}
