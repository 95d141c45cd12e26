//! Stage-game payoffs, samples, scenarios and the closed-form equilibrium
//! conditions for the sequential prisoner's dilemma with position
//! uncertainty.
//!
//! Payoffs are exact rationals so that thresholds such as `3800/6` are
//! reproduced without rounding. Expected utilities downstream are computed
//! in `f64`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token amounts.
pub type Tokens = Rational64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    C,
    D,
}

impl Action {
    pub fn is_cooperate(self) -> bool {
        self == Action::C
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::C => "C",
            Action::D => "D",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which ordering condition a payoff matrix violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffViolation {
    /// `T > R` fails.
    TemptationNotAboveReward,
    /// `R > P` fails.
    RewardNotAbovePunishment,
    /// `P > S` fails.
    PunishmentNotAboveSucker,
    /// `2R > T + S` fails.
    AlternationProfitable,
}

impl fmt::Display for PayoffViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            PayoffViolation::TemptationNotAboveReward => "T > R violated",
            PayoffViolation::RewardNotAbovePunishment => "R > P violated",
            PayoffViolation::PunishmentNotAboveSucker => "P > S violated",
            PayoffViolation::AlternationProfitable => "2R > T + S violated",
        };
        f.write_str(msg)
    }
}

/// Pairwise stage-game payoffs `(T, R, P, S)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayoffMatrix {
    pub temptation: Tokens,
    pub reward: Tokens,
    pub punishment: Tokens,
    pub sucker: Tokens,
}

impl PayoffMatrix {
    /// Builds and validates a matrix from integer token amounts.
    pub fn from_tokens(t: i64, r: i64, p: i64, s: i64) -> Result<Self> {
        let pm = Self::new_unchecked(t.into(), r.into(), p.into(), s.into());
        validate_payoffs(&pm).map_err(Error::InvalidPayoffs)?;
        Ok(pm)
    }

    pub fn new_unchecked(t: Tokens, r: Tokens, p: Tokens, s: Tokens) -> Self {
        PayoffMatrix {
            temptation: t,
            reward: r,
            punishment: p,
            sucker: s,
        }
    }

    /// The laboratory payoffs: T=600, R=500, P=100, S=50 tokens.
    pub fn experimental() -> Self {
        Self::new_unchecked(600.into(), 500.into(), 100.into(), 50.into())
    }

    /// `[T, R, P, S]` as floats.
    pub fn to_f64(&self) -> [f64; 4] {
        [
            ratio_f64(self.temptation),
            ratio_f64(self.reward),
            ratio_f64(self.punishment),
            ratio_f64(self.sucker),
        ]
    }

    pub fn scaled(&self, factor: Tokens) -> Self {
        Self::new_unchecked(
            self.temptation * factor,
            self.reward * factor,
            self.punishment * factor,
            self.sucker * factor,
        )
    }

    /// The same game in the `(g, l)` normalization `(1+g, 1, 0, -l)`:
    /// subtract `P` and divide by `R - P`.
    pub fn normalized(&self) -> Result<GLParams> {
        let span = self.reward - self.punishment;
        if span <= Tokens::zero() {
            return Err(Error::InvalidPayoffs(vec![
                PayoffViolation::RewardNotAbovePunishment,
            ]));
        }
        let g = (self.temptation - self.punishment) / span - Tokens::from_integer(1);
        let l = (self.punishment - self.sucker) / span;
        GLParams::new(g, l)
    }
}

pub(crate) fn ratio_f64(x: Tokens) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Checks `T > R > P > S` and `2R > T + S`, reporting every condition that
/// fails.
pub fn validate_payoffs(p: &PayoffMatrix) -> Result<(), Vec<PayoffViolation>> {
    validate_payoffs_with(p, true)
}

/// As [`validate_payoffs`], optionally skipping the `2R > T + S` condition.
pub fn validate_payoffs_with(
    p: &PayoffMatrix,
    require_alternation: bool,
) -> Result<(), Vec<PayoffViolation>> {
    let mut violated = Vec::new();
    if p.temptation <= p.reward {
        violated.push(PayoffViolation::TemptationNotAboveReward);
    }
    if p.reward <= p.punishment {
        violated.push(PayoffViolation::RewardNotAbovePunishment);
    }
    if p.punishment <= p.sucker {
        violated.push(PayoffViolation::PunishmentNotAboveSucker);
    }
    if require_alternation && p.reward * 2 <= p.temptation + p.sucker {
        violated.push(PayoffViolation::AlternationProfitable);
    }
    if violated.is_empty() {
        Ok(())
    } else {
        Err(violated)
    }
}

/// Gain from defecting on a cooperator (`g`) and loss from cooperating with
/// a defector (`l`), both relative to mutual cooperation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GLParams {
    pub g: Rational64,
    pub l: Rational64,
}

impl GLParams {
    pub fn new(g: Rational64, l: Rational64) -> Result<Self> {
        if g <= Rational64::zero() || l <= Rational64::zero() {
            return Err(Error::InvalidParams(format!(
                "g and l must be positive (g={g}, l={l})"
            )));
        }
        Ok(GLParams { g, l })
    }

    pub fn from_f64(g: f64, l: f64) -> Result<Self> {
        Self::new(rational_from_f64(g)?, rational_from_f64(l)?)
    }
}

/// Closest ratio of 64-bit integers to `x`.
pub fn rational_from_f64(x: f64) -> Result<Rational64> {
    Rational64::approximate_float(x)
        .ok_or_else(|| Error::InvalidParams(format!("{x} is not representable as a ratio")))
}

/// `(T, R, P, S) = (1+g, 1, 0, -l)`.
pub fn gl_to_matrix(gl: GLParams) -> Result<PayoffMatrix> {
    let gl = GLParams::new(gl.g, gl.l)?;
    let one = Rational64::from_integer(1);
    Ok(PayoffMatrix::new_unchecked(
        one + gl.g,
        one,
        Rational64::zero(),
        -gl.l,
    ))
}

/// Group size `n`, sample size `m` and stage payoffs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameConfig {
    pub n: usize,
    pub m: usize,
    pub payoffs: PayoffMatrix,
}

impl GameConfig {
    pub fn new(n: usize, m: usize, payoffs: PayoffMatrix) -> Result<Self> {
        check_sizes(n, m)?;
        Ok(GameConfig { n, m, payoffs })
    }

    /// Five players, samples of two, laboratory payoffs.
    pub fn experimental() -> Self {
        GameConfig {
            n: 5,
            m: 2,
            payoffs: PayoffMatrix::experimental(),
        }
    }

    pub fn is_experimental_design(&self) -> bool {
        self.n == 5 && self.m == 2
    }

    /// Scenario-choices per group-round under the strategy method.
    pub fn scenarios_per_group(&self) -> Result<usize> {
        (1..=self.n)
            .map(|pos| scenario_set(pos, self).map(|s| s.len()))
            .sum()
    }
}

fn check_sizes(n: usize, m: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidConfig(format!(
            "group size n={n} must be at least 3"
        )));
    }
    if m < 1 || m + 2 > n {
        return Err(Error::InvalidConfig(format!(
            "sample size m={m} must lie in 1..={} for n={n}",
            n - 2
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquilibriumCheck {
    pub holds: bool,
    pub threshold: Rational64,
}

/// Full cooperation is an equilibrium iff `g <= 1 - 2m/(n+m-1)`.
pub fn equilibrium_condition_gl(n: usize, m: usize, g: Rational64) -> Result<EquilibriumCheck> {
    check_sizes(n, m)?;
    let (n, m) = (n as i64, m as i64);
    let threshold = Rational64::from_integer(1) - Rational64::new(2 * m, n + m - 1);
    Ok(EquilibriumCheck {
        holds: g <= threshold,
        threshold,
    })
}

/// Token form: cooperation is sustained iff
/// `T <= (2(n-1)R - (n-m-1)P) / (m+n-1)`.
pub fn equilibrium_condition_general(cfg: &GameConfig) -> Result<EquilibriumCheck> {
    check_sizes(cfg.n, cfg.m)?;
    let (n, m) = (cfg.n as i64, cfg.m as i64);
    let p = &cfg.payoffs;
    let threshold = (p.reward * (2 * (n - 1)) - p.punishment * (n - m - 1)) / (m + n - 1);
    Ok(EquilibriumCheck {
        holds: p.temptation <= threshold,
        threshold,
    })
}

/// Total payoff over the `n-1` pairwise matches when `others_cooperating`
/// of the other players cooperate.
pub fn total_payoff(action: Action, others_cooperating: usize, cfg: &GameConfig) -> Result<Tokens> {
    if others_cooperating > cfg.n - 1 {
        return Err(Error::InvalidParams(format!(
            "{others_cooperating} cooperating opponents exceeds n-1={}",
            cfg.n - 1
        )));
    }
    let coop = others_cooperating as i64;
    let defect = (cfg.n - 1 - others_cooperating) as i64;
    let p = &cfg.payoffs;
    Ok(match action {
        Action::C => p.reward * coop + p.sucker * defect,
        Action::D => p.temptation * coop + p.punishment * defect,
    })
}

/// Mean of the uniform belief over positions `m+1..=n`: `(n+m+1)/2`.
pub fn expected_position(n: usize, m: usize) -> Result<Rational64> {
    check_sizes(n, m)?;
    Ok(Rational64::new((n + m + 1) as i64, 2))
}

/// What a player observes: `observed` predecessors of whom `cooperators`
/// cooperated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sample {
    pub observed: usize,
    pub cooperators: usize,
}

impl Sample {
    pub fn new(observed: usize, cooperators: usize, m: usize) -> Result<Self> {
        if cooperators > observed || observed > m {
            return Err(Error::InvalidScenario(format!(
                "sample ({observed}, {cooperators}) violates 0 <= cooperators <= observed <= {m}"
            )));
        }
        Ok(Sample {
            observed,
            cooperators,
        })
    }

    /// No defection in the sample.
    pub fn is_full_cooperation(&self) -> bool {
        self.cooperators == self.observed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionClass {
    Pos1,
    Pos2,
    Uncertain,
}

impl PositionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PositionClass::Pos1 => "pos1",
            PositionClass::Pos2 => "pos2",
            PositionClass::Uncertain => "uncertain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pos1" => Some(PositionClass::Pos1),
            "pos2" => Some(PositionClass::Pos2),
            "uncertain" => Some(PositionClass::Uncertain),
            _ => None,
        }
    }

    /// Class of a 1-based sequence position when samples hold two actions.
    pub fn of_position(position: usize) -> Self {
        match position {
            1 => PositionClass::Pos1,
            2 => PositionClass::Pos2,
            _ => PositionClass::Uncertain,
        }
    }
}

/// One elicitation cell: a position class and the number of cooperators
/// observed (always 0 for the first mover).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub class: PositionClass,
    pub cooperators: usize,
}

impl Scenario {
    pub const fn pos1() -> Self {
        Scenario {
            class: PositionClass::Pos1,
            cooperators: 0,
        }
    }

    pub const fn pos2(cooperators: usize) -> Self {
        Scenario {
            class: PositionClass::Pos2,
            cooperators,
        }
    }

    pub const fn uncertain(cooperators: usize) -> Self {
        Scenario {
            class: PositionClass::Uncertain,
            cooperators,
        }
    }

    /// The six cells of the five-player, two-sample design, ordered
    /// Pos1, Pos2/0, Pos2/1, Uncertain/0, Uncertain/1, Uncertain/2.
    pub const EXPERIMENTAL: [Scenario; 6] = [
        Scenario::pos1(),
        Scenario::pos2(0),
        Scenario::pos2(1),
        Scenario::uncertain(0),
        Scenario::uncertain(1),
        Scenario::uncertain(2),
    ];

    /// Index into [`Scenario::EXPERIMENTAL`].
    pub fn experimental_index(&self) -> Option<usize> {
        Scenario::EXPERIMENTAL.iter().position(|s| s == self)
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let ok = match self.class {
            PositionClass::Pos1 => self.cooperators == 0,
            PositionClass::Pos2 => m >= 2 && self.cooperators <= 1,
            PositionClass::Uncertain => self.cooperators <= m,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!(
                "{self} is not valid with m={m}"
            )))
        }
    }

    /// The `m_c` column: absent for the first mover.
    pub fn observed_cooperators(&self) -> Option<usize> {
        match self.class {
            PositionClass::Pos1 => None,
            _ => Some(self.cooperators),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.class {
            PositionClass::Pos1 => f.write_str("pos1"),
            c => write!(f, "{}/m_c={}", c.as_str(), self.cooperators),
        }
    }
}

/// Scenarios a player at `position` (1-based) answers under the strategy
/// method.
pub fn scenario_set(position: usize, cfg: &GameConfig) -> Result<Vec<Scenario>> {
    if position == 0 || position > cfg.n {
        return Err(Error::InvalidParams(format!(
            "position {position} outside 1..={}",
            cfg.n
        )));
    }
    if position == 1 {
        return Ok(vec![Scenario::pos1()]);
    }
    if cfg.m != 2 {
        return Err(Error::Unsupported(format!(
            "scenario sets beyond the first mover are defined for m=2 only (m={})",
            cfg.m
        )));
    }
    Ok(if position == 2 {
        vec![Scenario::pos2(0), Scenario::pos2(1)]
    } else {
        (0..=2).map(Scenario::uncertain).collect()
    })
}

/// The scenario faced by the player at `position` given the actions already
/// taken by everyone before them (in sequence order).
pub fn scenario_from_history(position: usize, history: &[Action], m: usize) -> Result<Scenario> {
    debug_assert_eq!(history.len() + 1, position);
    if position == 1 {
        return Ok(Scenario::pos1());
    }
    let window = &history[history.len().saturating_sub(m)..];
    let cooperators = window.iter().filter(|a| a.is_cooperate()).count();
    if window.len() == m {
        return Ok(Scenario::uncertain(cooperators));
    }
    if position == 2 {
        return Ok(Scenario::pos2(cooperators));
    }
    Err(Error::Unsupported(format!(
        "position {position} sees a partial sample of {} with m={m}",
        window.len()
    )))
}

/// A contingent plan: the action chosen at each scenario.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrategyProfile(BTreeMap<Scenario, Action>);

impl StrategyProfile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Same action in every cell of the experimental design.
    pub fn always(action: Action) -> Self {
        Self::from_fn(|_| action)
    }

    pub fn from_fn(f: impl Fn(Scenario) -> Action) -> Self {
        StrategyProfile(Scenario::EXPERIMENTAL.iter().map(|&s| (s, f(s))).collect())
    }

    pub fn set(&mut self, scenario: Scenario, action: Action) {
        self.0.insert(scenario, action);
    }

    pub fn get(&self, scenario: &Scenario) -> Option<Action> {
        self.0.get(scenario).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Scenario, &Action)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(Scenario, Action)> for StrategyProfile {
    fn from_iter<I: IntoIterator<Item = (Scenario, Action)>>(iter: I) -> Self {
        StrategyProfile(iter.into_iter().collect())
    }
}

/// Plays a group out in sequence. `order[k]` is the index into `profiles` of
/// the player at position `k+1`; the result is indexed by position.
pub fn realize_play(
    profiles: &[StrategyProfile],
    order: &[usize],
    m: usize,
) -> Result<Vec<Action>> {
    let mut seen = vec![false; profiles.len()];
    if order.len() != profiles.len() {
        return Err(Error::InvalidParams(format!(
            "order has {} entries for {} players",
            order.len(),
            profiles.len()
        )));
    }
    for &p in order {
        if p >= profiles.len() || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParams(format!(
                "order {order:?} is not a permutation"
            )));
        }
    }
    let mut actions = Vec::with_capacity(order.len());
    for (k, &player) in order.iter().enumerate() {
        let scenario = scenario_from_history(k + 1, &actions, m)?;
        let action = profiles[player]
            .get(&scenario)
            .ok_or_else(|| Error::MissingContingency {
                player,
                scenario: scenario.to_string(),
            })?;
        actions.push(action);
    }
    Ok(actions)
}

/// Each player's total payoff given the realized actions by position.
pub fn realized_payoffs(actions: &[Action], cfg: &GameConfig) -> Result<Vec<Tokens>> {
    let total_c = actions.iter().filter(|a| a.is_cooperate()).count();
    actions
        .iter()
        .map(|&a| {
            let others = total_c - usize::from(a.is_cooperate());
            total_payoff(a, others, cfg)
        })
        .collect()
}
