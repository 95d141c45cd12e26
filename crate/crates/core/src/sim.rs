//! Synthetic sessions: latent type draws, per-round random re-matching,
//! strategy-method elicitation (part 1) and direct play (part 3).
//!
//! Every random draw comes from a ChaCha stream keyed by the session seed,
//! a stream kind and an index. Type draws and choice draws are keyed by
//! subject, so extending a session with more subjects leaves the draws of
//! the existing ones untouched; matching uses one stream per part.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::choice::ChoiceModel;
use crate::error::{Error, Result};
use crate::game::{
    ratio_f64, realize_play, realized_payoffs, scenario_from_history, scenario_set, Action,
    Scenario, StrategyProfile,
};
use crate::kernels::type_eu;
use crate::model::{prob_table, MixtureParams, ProbTable, TypeShares, TypeTag};

const STREAM_TYPES: u64 = 0;
const STREAM_P1_MATCHING: u64 = 1;
const STREAM_P1_CHOICES: u64 = 2;
const STREAM_P3_MATCHING: u64 = 3;
const STREAM_P3_CHOICES: u64 = 4;
const STREAM_QUOTA: u64 = 7;

/// A ChaCha8 generator on stream `kind * 2^40 + index` of `seed`.
pub fn stream_rng(seed: u64, kind: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind << 40) | index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Elicitation {
    /// Part 1: every contingency of the assigned position.
    Strategy,
    /// Part 3: one choice given the realized sample.
    Direct,
    /// Part 1 followed by part 3 for the same subjects.
    Both,
}

/// How latent types are allocated to subjects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeAssignment {
    /// Independent draws from the share vector.
    #[default]
    Independent,
    /// Exact counts `round(pi_k * N)` (largest remainder), randomly placed.
    Quota,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_subjects: usize,
    pub rounds: usize,
    pub model: ChoiceModel,
    pub mixture: MixtureParams,
    pub seed: u64,
    pub elicitation: Elicitation,
    pub assignment: TypeAssignment,
}

impl SimConfig {
    /// 50 subjects, 10 rounds, five-player groups, strategy method.
    pub fn recovery_design(mixture: MixtureParams, seed: u64) -> Self {
        SimConfig {
            n_subjects: 50,
            rounds: 10,
            model: ChoiceModel::experimental(),
            mixture,
            seed,
            elicitation: Elicitation::Strategy,
            assignment: TypeAssignment::Independent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.model.game.n;
        if self.n_subjects == 0 || !self.n_subjects.is_multiple_of(n) {
            return Err(Error::InvalidConfig(format!(
                "{} subjects cannot be split into groups of {n}",
                self.n_subjects
            )));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig(
                "at least one round is required".into(),
            ));
        }
        self.model.game.scenarios_per_group()?;
        Ok(())
    }
}

/// One elicited choice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub subject_id: String,
    /// 1 for the strategy method, 3 for direct play.
    pub part: u8,
    pub round: u32,
    pub group_id: String,
    pub position: usize,
    pub scenario: Scenario,
    pub choice: Action,
}

impl ChoiceRecord {
    pub fn is_strategy(&self) -> bool {
        self.part == 1
    }
}

/// The estimation-facing view of a session: choices only, no latent types.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChoiceData {
    pub group_size: usize,
    pub records: Vec<ChoiceRecord>,
}

impl ChoiceData {
    /// Subject ids in order of first appearance.
    pub fn subject_ids(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.subject_id.as_str()))
            .map(|r| r.subject_id.clone())
            .collect()
    }

    pub fn part(&self, part: u8) -> ChoiceData {
        ChoiceData {
            group_size: self.group_size,
            records: self
                .records
                .iter()
                .filter(|r| r.part == part)
                .cloned()
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Group composition of one round: `groups[g][k]` is the subject index at
/// position `k + 1` of group `g`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundMatching {
    pub part: u8,
    pub round: u32,
    pub groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedPlay {
    pub part: u8,
    pub round: u32,
    pub group_id: String,
    /// Indexed by position.
    pub actions: Vec<Action>,
    /// Total token payoff of each position.
    pub payoffs: Vec<f64>,
}

/// Everything a simulation produced, including the latent types that the
/// estimator must not see.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionData {
    pub subject_ids: Vec<String>,
    pub types: Vec<TypeTag>,
    pub matchings: Vec<RoundMatching>,
    pub plays: Vec<RealizedPlay>,
    pub choices: ChoiceData,
}

impl SessionData {
    /// The choice records alone.
    pub fn export(&self) -> ChoiceData {
        self.choices.clone()
    }

    pub fn truth(&self) -> BTreeMap<String, TypeTag> {
        self.subject_ids
            .iter()
            .cloned()
            .zip(self.types.iter().copied())
            .collect()
    }
}

pub fn subject_id(index: usize) -> String {
    format!("s{:03}", index + 1)
}

fn group_id(round: u32, group: usize, groups_per_round: usize) -> String {
    format!("g{}", (round as usize - 1) * groups_per_round + group + 1)
}

/// Independent draws from the share vector, one stream per subject.
pub fn assign_types(n_subjects: usize, shares: &TypeShares, seed: u64) -> Result<Vec<TypeTag>> {
    let shares = TypeShares::new(shares.0)?;
    let last_positive = TypeTag::ALL
        .into_iter()
        .rev()
        .find(|t| shares.get(*t) > 0.0)
        .expect("shares sum to one");
    Ok((0..n_subjects)
        .map(|i| {
            let u: f64 = stream_rng(seed, STREAM_TYPES, i as u64).gen();
            let mut acc = 0.0;
            for t in TypeTag::ALL {
                acc += shares.get(t);
                if u < acc && shares.get(t) > 0.0 {
                    return t;
                }
            }
            last_positive
        })
        .collect())
}

/// Exactly `round(pi_k * n)` subjects of each type, the rounding remainder
/// going to the largest fractional parts, in a seeded random order.
pub fn assign_quota(n_subjects: usize, shares: &TypeShares, seed: u64) -> Result<Vec<TypeTag>> {
    let shares = TypeShares::new(shares.0)?;
    let exact = shares.0.map(|p| p * n_subjects as f64);
    let mut counts = exact.map(|x| x.floor() as usize);
    let mut by_remainder: Vec<usize> = (0..4).collect();
    by_remainder.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n_subjects.saturating_sub(counts.iter().sum::<usize>());
    for &k in by_remainder.iter().take(short) {
        counts[k] += 1;
    }
    let mut types: Vec<TypeTag> = TypeTag::ALL
        .into_iter()
        .flat_map(|t| std::iter::repeat_n(t, counts[t.index()]))
        .collect();
    types.shuffle(&mut stream_rng(seed, STREAM_QUOTA, 0));
    Ok(types)
}

fn draw(rng: &mut ChaCha8Rng, p_c: f64) -> Action {
    if rng.gen::<f64>() < p_c {
        Action::C
    } else {
        Action::D
    }
}

struct Part<'a> {
    cfg: &'a SimConfig,
    table: &'a ProbTable,
    types: &'a [TypeTag],
    ids: &'a [String],
}

impl Part<'_> {
    fn prob(&self, subject: usize, s: &Scenario) -> Result<f64> {
        let j = s.experimental_index().ok_or_else(|| {
            Error::InvalidScenario(format!("{s} is outside the five-player design"))
        })?;
        Ok(self.table[self.types[subject].index()][j])
    }

    fn matching(&self, rng: &mut ChaCha8Rng, part: u8, round: u32) -> RoundMatching {
        let mut order: Vec<usize> = (0..self.cfg.n_subjects).collect();
        order.shuffle(rng);
        RoundMatching {
            part,
            round,
            groups: order
                .chunks(self.cfg.model.game.n)
                .map(<[usize]>::to_vec)
                .collect(),
        }
    }

    fn strategy(&self, out: &mut SessionData) -> Result<()> {
        let cfg = self.cfg;
        let game = &cfg.model.game;
        let mut match_rng = stream_rng(cfg.seed, STREAM_P1_MATCHING, 0);
        let mut subject_rngs: Vec<_> = (0..cfg.n_subjects)
            .map(|i| stream_rng(cfg.seed, STREAM_P1_CHOICES, i as u64))
            .collect();
        for round in 1..=cfg.rounds as u32 {
            let m = self.matching(&mut match_rng, 1, round);
            let per_round = m.groups.len();
            for (g, members) in m.groups.iter().enumerate() {
                let gid = group_id(round, g, per_round);
                let mut profiles = Vec::with_capacity(members.len());
                for (k, &subj) in members.iter().enumerate() {
                    let mut profile = StrategyProfile::new();
                    for s in scenario_set(k + 1, game)? {
                        let a = draw(&mut subject_rngs[subj], self.prob(subj, &s)?);
                        profile.set(s, a);
                        out.choices.records.push(ChoiceRecord {
                            subject_id: self.ids[subj].clone(),
                            part: 1,
                            round,
                            group_id: gid.clone(),
                            position: k + 1,
                            scenario: s,
                            choice: a,
                        });
                    }
                    profiles.push(profile);
                }
                let order: Vec<usize> = (0..members.len()).collect();
                let actions = realize_play(&profiles, &order, game.m)?;
                out.plays.push(play(1, round, gid, actions, cfg)?);
            }
            out.matchings.push(m);
        }
        Ok(())
    }

    fn direct(&self, out: &mut SessionData) -> Result<()> {
        let cfg = self.cfg;
        let game = &cfg.model.game;
        let mut match_rng = stream_rng(cfg.seed, STREAM_P3_MATCHING, 0);
        let mut subject_rngs: Vec<_> = (0..cfg.n_subjects)
            .map(|i| stream_rng(cfg.seed, STREAM_P3_CHOICES, i as u64))
            .collect();
        for round in 1..=cfg.rounds as u32 {
            let m = self.matching(&mut match_rng, 3, round);
            let per_round = m.groups.len();
            for (g, members) in m.groups.iter().enumerate() {
                let gid = group_id(round, g, per_round);
                let mut actions = Vec::with_capacity(members.len());
                for (k, &subj) in members.iter().enumerate() {
                    let s = scenario_from_history(k + 1, &actions, game.m)?;
                    let a = draw(&mut subject_rngs[subj], self.prob(subj, &s)?);
                    out.choices.records.push(ChoiceRecord {
                        subject_id: self.ids[subj].clone(),
                        part: 3,
                        round,
                        group_id: gid.clone(),
                        position: k + 1,
                        scenario: s,
                        choice: a,
                    });
                    actions.push(a);
                }
                out.plays.push(play(3, round, gid, actions, cfg)?);
            }
            out.matchings.push(m);
        }
        Ok(())
    }
}

fn play(
    part: u8,
    round: u32,
    group_id: String,
    actions: Vec<Action>,
    cfg: &SimConfig,
) -> Result<RealizedPlay> {
    let payoffs = realized_payoffs(&actions, &cfg.model.game)?
        .into_iter()
        .map(ratio_f64)
        .collect();
    Ok(RealizedPlay {
        part,
        round,
        group_id,
        actions,
        payoffs,
    })
}

pub fn simulate_session(cfg: &SimConfig) -> Result<SessionData> {
    cfg.validate()?;
    let types = match cfg.assignment {
        TypeAssignment::Independent => assign_types(cfg.n_subjects, &cfg.mixture.shares, cfg.seed)?,
        TypeAssignment::Quota => assign_quota(cfg.n_subjects, &cfg.mixture.shares, cfg.seed)?,
    };
    let ids: Vec<String> = (0..cfg.n_subjects).map(subject_id).collect();
    let table = prob_table(&cfg.model, &cfg.mixture)?;
    let mut out = SessionData {
        subject_ids: ids.clone(),
        types: types.clone(),
        matchings: Vec::new(),
        plays: Vec::new(),
        choices: ChoiceData {
            group_size: cfg.model.game.n,
            records: Vec::new(),
        },
    };
    let part = Part {
        cfg,
        table: &table,
        types: &types,
        ids: &ids,
    };
    match cfg.elicitation {
        Elicitation::Strategy => part.strategy(&mut out)?,
        Elicitation::Direct => part.direct(&mut out)?,
        Elicitation::Both => {
            part.strategy(&mut out)?;
            part.direct(&mut out)?;
        }
    }
    Ok(out)
}

/// Share of records matching the deterministic prescription of the
/// subject's true type.
pub fn success_rate(
    data: &ChoiceData,
    truth: &BTreeMap<String, TypeTag>,
    params: &MixtureParams,
    model: &ChoiceModel,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Data("no records to score".into()));
    }
    let mut hits = 0usize;
    for r in &data.records {
        let t = truth.get(&r.subject_id).ok_or_else(|| {
            Error::Data(format!(
                "no latent type recorded for subject {}",
                r.subject_id
            ))
        })?;
        let prescribed = type_eu(
            t.behavior(params.spec),
            &params.type_params(*t),
            &r.scenario,
            &model.game,
        )?
        .decision();
        hits += usize::from(prescribed == r.choice);
    }
    Ok(hits as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::NoiseParams;
    use crate::kernels::{CondCoopSpec, SocialParams};

    fn mixture(pi: [f64; 4], beta: f64, omega: f64) -> MixtureParams {
        MixtureParams::social(
            TypeShares::new(pi).unwrap(),
            CondCoopSpec::ModifiedGm,
            SocialParams::new(0.5, -0.1).unwrap(),
            NoiseParams::new(beta, omega).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn degenerate_type_draws() {
        let s = TypeShares::new([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(assign_types(200, &s, 3)
            .unwrap()
            .iter()
            .all(|t| *t == TypeTag::Gm));
        let s = TypeShares::new([0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(assign_types(200, &s, 3)
            .unwrap()
            .iter()
            .all(|t| *t == TypeTag::Alt));
    }

    #[test]
    fn type_draws_are_prefix_stable() {
        let s = TypeShares::new([0.4, 0.3, 0.2, 0.1]).unwrap();
        let a = assign_types(30, &s, 11).unwrap();
        let b = assign_types(60, &s, 11).unwrap();
        assert_eq!(a[..], b[..30]);
        assert_ne!(assign_types(60, &s, 12).unwrap(), b);
    }

    #[test]
    fn quota_counts_are_exact() {
        let s = TypeShares::new([0.4, 0.3, 0.2, 0.1]).unwrap();
        let t = assign_quota(50, &s, 4).unwrap();
        let count = |x| t.iter().filter(|&&y| y == x).count();
        assert_eq!(
            [
                count(TypeTag::Gm),
                count(TypeTag::Coop),
                count(TypeTag::Free),
                count(TypeTag::Alt)
            ],
            [20, 15, 10, 5]
        );
        let s = TypeShares::new([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]).unwrap();
        assert_eq!(assign_quota(10, &s, 4).unwrap().len(), 10);
    }

    #[test]
    fn strategy_counts() {
        let cfg = SimConfig::recovery_design(mixture([0.4, 0.3, 0.2, 0.1], 0.5, 0.15), 1);
        let d = simulate_session(&cfg).unwrap();
        assert_eq!(d.choices.len(), 1200);
        assert_eq!(d.matchings.len(), 10);
        assert_eq!(d.plays.len(), 100);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = SimConfig::recovery_design(mixture([0.4, 0.3, 0.2, 0.1], 0.5, 0.15), 1);
        cfg.n_subjects = 52;
        assert!(simulate_session(&cfg).is_err());
        cfg.n_subjects = 50;
        cfg.rounds = 0;
        assert!(simulate_session(&cfg).is_err());
    }

    #[test]
    fn noiseless_free_riders_earn_four_p() {
        let mut cfg = SimConfig::recovery_design(mixture([0.0, 0.0, 1.0, 0.0], 1.0, 0.0), 5);
        cfg.elicitation = Elicitation::Both;
        let d = simulate_session(&cfg).unwrap();
        assert!(d.choices.records.iter().all(|r| r.choice == Action::D));
        assert!(d
            .plays
            .iter()
            .all(|p| p.payoffs.iter().all(|&x| x == 400.0)));
    }

    #[test]
    fn success_rate_needs_types() {
        let cfg = SimConfig::recovery_design(mixture([0.0, 0.0, 0.0, 1.0], 1.0, 0.0), 5);
        let d = simulate_session(&cfg).unwrap();
        let rate = success_rate(&d.choices, &d.truth(), &cfg.mixture, &cfg.model).unwrap();
        assert_eq!(rate, 1.0);
        let mut truth = d.truth();
        truth.remove("s001");
        assert!(success_rate(&d.choices, &truth, &cfg.mixture, &cfg.model).is_err());
    }
}
