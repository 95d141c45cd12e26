//! Descriptive cooperation rates and the hypothesis tests used on them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::game::{
    ratio_f64, realize_play, realized_payoffs, Action, GameConfig, PositionClass, Scenario,
    StrategyProfile,
};
use crate::sim::{ChoiceData, ChoiceRecord, RealizedPlay};

/// Cooperation count over a number of records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub coop: u64,
    pub total: u64,
}

impl Cell {
    /// `None` for an empty cell.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.coop as f64 / self.total as f64)
    }

    fn add(&mut self, a: Action) {
        self.total += 1;
        self.coop += u64::from(a.is_cooperate());
    }
}

pub const RATE_ROWS: [&str; 4] = ["1", "2", ">2", "All"];

/// Cooperation by position class (rows `1`, `2`, `>2`, `All`) and number of
/// observed cooperators (columns `c_0..`). First movers sit in `c_0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateTable {
    /// `cells[row][column]`, rows in [`RATE_ROWS`] order.
    pub cells: Vec<Vec<Cell>>,
    pub total: Cell,
}

impl RateTable {
    pub fn columns(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn get(&self, row: usize, column: usize) -> Cell {
        self.cells[row][column]
    }

    /// Rows of strings: header then one line per row, rates to three
    /// decimals and `-` for empty cells.
    pub fn to_rows(&self) -> Vec<Vec<String>> {
        let mut rows = vec![std::iter::once("Position".to_string())
            .chain((0..self.columns()).map(|j| format!("c_{j}")))
            .collect::<Vec<_>>()];
        for (label, cells) in RATE_ROWS.iter().zip(&self.cells) {
            rows.push(
                std::iter::once(label.to_string())
                    .chain(cells.iter().map(|c| {
                        c.rate()
                            .map_or_else(|| "-".to_string(), |r| format!("{r:.3}"))
                    }))
                    .collect(),
            );
        }
        rows
    }
}

fn row_of(class: PositionClass) -> usize {
    match class {
        PositionClass::Pos1 => 0,
        PositionClass::Pos2 => 1,
        PositionClass::Uncertain => 2,
    }
}

/// Empirical cooperation frequencies of every record in `data`. Filter by
/// part beforehand to separate elicitation methods.
pub fn cooperation_rates(data: &ChoiceData) -> RateTable {
    let columns = data
        .records
        .iter()
        .map(|r| r.scenario.cooperators + 1)
        .max()
        .unwrap_or(1);
    let mut cells = vec![vec![Cell::default(); columns]; 4];
    let mut total = Cell::default();
    for r in &data.records {
        let j = r.scenario.cooperators;
        cells[row_of(r.scenario.class)][j].add(r.choice);
        cells[3][j].add(r.choice);
        total.add(r.choice);
    }
    RateTable { cells, total }
}

/// One point of a plot-ready series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub figure: String,
    pub part: u8,
    pub round: u32,
    pub series: String,
    pub coop: u64,
    pub total: u64,
    pub rate: f64,
}

fn push_series(
    out: &mut Vec<SeriesPoint>,
    figure: &str,
    part: u8,
    by_key: BTreeMap<(u32, String), Cell>,
) {
    for ((round, series), c) in by_key {
        out.push(SeriesPoint {
            figure: figure.to_string(),
            part,
            round,
            series,
            coop: c.coop,
            total: c.total,
            rate: c.rate().unwrap_or(f64::NAN),
        });
    }
}

/// Long-format cooperation series per round.
///
/// * `individual`: share of C among all records of each part.
/// * `group`: share of C among realized actions (strategy groups are played
///   out from their profiles first).
/// * `condition`: part-1 records by observed cooperators, for every position
///   (`all/c_j`) and for the uncertain positions only (`uncertain/c_j`).
pub fn rates_by_round(data: &ChoiceData, game: &GameConfig) -> Result<Vec<SeriesPoint>> {
    let mut out = Vec::new();
    let parts: BTreeSet<u8> = data.records.iter().map(|r| r.part).collect();
    for &part in &parts {
        let mut m: BTreeMap<(u32, String), Cell> = BTreeMap::new();
        for r in data.records.iter().filter(|r| r.part == part) {
            m.entry((r.round, "all".into())).or_default().add(r.choice);
        }
        push_series(&mut out, "individual", part, m);
    }
    for &part in &parts {
        let plays = if part == 1 {
            realize_strategy_groups(&data.part(1), game)?
        } else {
            direct_plays(&data.part(part), game)?
        };
        let mut m: BTreeMap<(u32, String), Cell> = BTreeMap::new();
        for p in &plays {
            let cell = m.entry((p.round, "all".into())).or_default();
            for &a in &p.actions {
                cell.add(a);
            }
        }
        push_series(&mut out, "group", part, m);
    }
    let mut m: BTreeMap<(u32, String), Cell> = BTreeMap::new();
    for r in data.records.iter().filter(|r| r.part == 1) {
        let j = r.scenario.cooperators;
        m.entry((r.round, format!("all/c_{j}")))
            .or_default()
            .add(r.choice);
        if r.scenario.class == PositionClass::Uncertain {
            m.entry((r.round, format!("uncertain/c_{j}")))
                .or_default()
                .add(r.choice);
        }
    }
    push_series(&mut out, "condition", 1, m);
    Ok(out)
}

type GroupKey = (u32, String);

fn groups_of<'a>(
    records: impl Iterator<Item = &'a ChoiceRecord>,
) -> BTreeMap<GroupKey, Vec<&'a ChoiceRecord>> {
    let mut groups: BTreeMap<GroupKey, Vec<&ChoiceRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.round, r.group_id.clone()))
            .or_default()
            .push(r);
    }
    groups
}

fn make_play(
    part: u8,
    (round, group_id): GroupKey,
    actions: Vec<Action>,
    game: &GameConfig,
) -> Result<RealizedPlay> {
    let payoffs = realized_payoffs(&actions, game)?
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

/// Plays out every part-1 group from the elicited profiles, in position
/// order. Groups are returned sorted by round, then group id.
pub fn realize_strategy_groups(data: &ChoiceData, game: &GameConfig) -> Result<Vec<RealizedPlay>> {
    let mut out = Vec::new();
    for (key, recs) in groups_of(data.records.iter().filter(|r| r.is_strategy())) {
        let mut profiles = vec![StrategyProfile::new(); game.n];
        for r in &recs {
            if r.position == 0 || r.position > game.n {
                return Err(Error::Data(format!(
                    "group {} round {}: position {} outside 1..={}",
                    key.1, key.0, r.position, game.n
                )));
            }
            profiles[r.position - 1].set(r.scenario, r.choice);
        }
        let order: Vec<usize> = (0..game.n).collect();
        let actions = realize_play(&profiles, &order, game.m)?;
        out.push(make_play(1, key, actions, game)?);
    }
    Ok(out)
}

fn direct_plays(data: &ChoiceData, game: &GameConfig) -> Result<Vec<RealizedPlay>> {
    let mut out = Vec::new();
    for (key, mut recs) in groups_of(data.records.iter()) {
        let part = recs[0].part;
        recs.sort_by_key(|r| r.position);
        if recs.len() != game.n || recs.iter().enumerate().any(|(k, r)| r.position != k + 1) {
            return Err(Error::Data(format!(
                "group {} round {} does not hold one choice per position",
                key.1, key.0
            )));
        }
        let actions = recs.iter().map(|r| r.choice).collect();
        out.push(make_play(part, key, actions, game)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McNemarVariant {
    /// `(|b - c| - 1)^2 / (b + c)` against chi-squared(1).
    #[default]
    Corrected,
    /// Two-sided binomial test of `min(b, c)` in `b + c` trials at 1/2.
    Exact,
}

impl McNemarVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            McNemarVariant::Corrected => "corrected",
            McNemarVariant::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    pub variant: McNemarVariant,
    /// Pairs with (first, second) = (true, false).
    pub b: u64,
    /// Pairs with (first, second) = (false, true).
    pub c: u64,
    /// The chi-squared statistic, or `min(b, c)` for the exact variant.
    pub statistic: f64,
    pub p_value: f64,
    /// Set when there are no discordant pairs; the p-value is then 1.
    pub degenerate: bool,
}

/// Upper tail of chi-squared with one degree of freedom.
pub fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        erfc((x / 2.0).sqrt())
    }
}

pub fn mcnemar_counts(b: u64, c: u64, variant: McNemarVariant) -> McNemarResult {
    let n = b + c;
    if n == 0 {
        return McNemarResult {
            variant,
            b,
            c,
            statistic: 0.0,
            p_value: 1.0,
            degenerate: true,
        };
    }
    let (statistic, p_value) = match variant {
        McNemarVariant::Corrected => {
            let d = (b as f64 - c as f64).abs() - 1.0;
            let s = d * d / n as f64;
            (s, chi2_1_sf(s))
        }
        McNemarVariant::Exact => {
            let k = b.min(c);
            let tail = binomial_tail(k, n, 0.5, Tail::Less);
            (k as f64, (2.0 * tail).min(1.0))
        }
    };
    McNemarResult {
        variant,
        b,
        c,
        statistic,
        p_value,
        degenerate: false,
    }
}

/// McNemar's test on paired binary outcomes.
pub fn mcnemar(pairs: &[(bool, bool)], variant: McNemarVariant) -> McNemarResult {
    let b = pairs.iter().filter(|&&(x, y)| x && !y).count() as u64;
    let c = pairs.iter().filter(|&&(x, y)| !x && y).count() as u64;
    mcnemar_counts(b, c, variant)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    /// `P(X >= k)`.
    Greater,
    /// `P(X <= k)`.
    Less,
}

impl Tail {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "greater" => Some(Tail::Greater),
            "less" => Some(Tail::Less),
            _ => None,
        }
    }
}

/// Integer binomial coefficients are exact up to this many trials.
const EXACT_TRIALS: u64 = 60;

fn binomial_pmf(i: u64, n: u64, p: f64) -> f64 {
    if p == 0.0 {
        return f64::from(u8::from(i == 0));
    }
    if p == 1.0 {
        return f64::from(u8::from(i == n));
    }
    if n <= EXACT_TRIALS {
        let mut coef: u64 = 1;
        for j in 0..i.min(n - i) {
            coef = coef * (n - j) / (j + 1);
        }
        coef as f64 * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32)
    } else {
        (ln_binomial(n, i) + i as f64 * p.ln() + (n - i) as f64 * (-p).ln_1p()).exp()
    }
}

fn binomial_tail(k: u64, n: u64, p: f64, tail: Tail) -> f64 {
    let sum: f64 = match tail {
        Tail::Greater => (k..=n).map(|i| binomial_pmf(i, n, p)).sum(),
        Tail::Less => (0..=k).map(|i| binomial_pmf(i, n, p)).sum(),
    };
    sum.min(1.0)
}

/// One-sided exact binomial test of `successes` out of `trials` against the
/// null rate `p0`.
pub fn exact_binomial(successes: u64, trials: u64, p0: f64, tail: Tail) -> Result<f64> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::InvalidParams(format!(
            "null probability {p0} outside [0, 1]"
        )));
    }
    if successes > trials {
        return Err(Error::InvalidParams(format!(
            "{successes} successes exceed {trials} trials"
        )));
    }
    Ok(binomial_tail(successes, trials, p0, tail))
}

/// Part-1 choice matched to a part-3 decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HotColdPair {
    pub subject_id: String,
    pub round: u32,
    pub scenario: Scenario,
    /// Round of the part-1 answer that was used.
    pub cold_round: u32,
    pub cold: Action,
    pub hot: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotColdReport {
    pub pairs: Vec<HotColdPair>,
    /// Part-3 decisions whose scenario the subject never answered in part 1.
    pub unmatched: usize,
    pub cold: Cell,
    pub hot: Cell,
    pub mcnemar: McNemarResult,
    pub mcnemar_exact: McNemarResult,
}

/// Compares strategy-method (cold) and direct (hot) choices on the part-3
/// histories.
///
/// Each part-3 decision is paired with the same subject's part-1 answer for
/// the scenario actually faced: from the same round when the subject
/// answered it then, otherwise from the latest earlier round, otherwise from
/// the earliest later round.
pub fn hot_vs_cold(part1: &ChoiceData, part3: &ChoiceData) -> Result<HotColdReport> {
    let ids1: BTreeSet<String> = part1.subject_ids().into_iter().collect();
    let ids3: BTreeSet<String> = part3.subject_ids().into_iter().collect();
    if ids1 != ids3 {
        let only1: Vec<_> = ids1.difference(&ids3).take(3).collect();
        let only3: Vec<_> = ids3.difference(&ids1).take(3).collect();
        return Err(Error::Data(format!(
            "parts hold different subjects (part 1 only: {only1:?}, part 3 only: {only3:?})"
        )));
    }
    let mut answers: BTreeMap<(&str, Scenario), BTreeMap<u32, Action>> = BTreeMap::new();
    for r in &part1.records {
        answers
            .entry((r.subject_id.as_str(), r.scenario))
            .or_default()
            .insert(r.round, r.choice);
    }
    let mut pairs = Vec::new();
    let mut unmatched = 0;
    for r in &part3.records {
        let found = answers
            .get(&(r.subject_id.as_str(), r.scenario))
            .and_then(|by_round| {
                by_round
                    .range(..=r.round)
                    .next_back()
                    .or_else(|| by_round.range(r.round..).next())
                    .map(|(&k, &a)| (k, a))
            });
        match found {
            Some((cold_round, cold)) => pairs.push(HotColdPair {
                subject_id: r.subject_id.clone(),
                round: r.round,
                scenario: r.scenario,
                cold_round,
                cold,
                hot: r.choice,
            }),
            None => unmatched += 1,
        }
    }
    let mut cold = Cell::default();
    let mut hot = Cell::default();
    for p in &pairs {
        cold.add(p.cold);
        hot.add(p.hot);
    }
    let binary: Vec<(bool, bool)> = pairs
        .iter()
        .map(|p| (p.cold.is_cooperate(), p.hot.is_cooperate()))
        .collect();
    Ok(HotColdReport {
        unmatched,
        cold,
        hot,
        mcnemar: mcnemar(&binary, McNemarVariant::Corrected),
        mcnemar_exact: mcnemar(&binary, McNemarVariant::Exact),
        pairs,
    })
}

/// A single-proportion test of one condition's cooperation count against
/// the rate observed in a reference condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionTest {
    pub label: String,
    pub coop: u64,
    pub total: u64,
    pub null_rate: f64,
    pub p_value: f64,
}

/// Within-profile McNemar comparison of two conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedConditionTest {
    pub label: String,
    pub pairs: usize,
    pub result: McNemarResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub strategy_rates: Option<RateTable>,
    pub direct_rates: Option<RateTable>,
    pub binomial: Vec<ConditionTest>,
    pub paired: Vec<PairedConditionTest>,
    pub hot_cold: Option<HotColdReport>,
}

/// Rate tables per elicitation method, the two condition tests against
/// `c_0` (all positions), the paired McNemar tests of `c_1` and `c_2` against
/// `c_0` on the uncertain-position profiles, and hot-vs-cold when both parts
/// are present.
///
/// A condition test asks whether the `c_j` count exceeds what the pooled
/// `c_0` rate predicts: `P(X >= coop_j)` with `X ~ Bin(total_j, rate_0)`.
pub fn describe(data: &ChoiceData, variant: McNemarVariant) -> Result<Description> {
    if data.is_empty() {
        return Err(Error::Data("no records to describe".into()));
    }
    let p1 = data.part(1);
    let p3 = data.part(3);
    let strategy_rates = (!p1.is_empty()).then(|| cooperation_rates(&p1));
    let direct_rates = (!p3.is_empty()).then(|| cooperation_rates(&p3));
    let mut binomial = Vec::new();
    let mut paired = Vec::new();
    if let Some(t) = &strategy_rates {
        if let Some(base) = t.cells[3].first().and_then(Cell::rate) {
            for j in 1..t.columns() {
                let c = t.get(3, j);
                if c.total > 0 {
                    binomial.push(ConditionTest {
                        label: format!("c_{j} > c_0"),
                        coop: c.coop,
                        total: c.total,
                        null_rate: base,
                        p_value: exact_binomial(c.coop, c.total, base, Tail::Greater)?,
                    });
                }
            }
        }
        let mut profiles: BTreeMap<(&str, u32), BTreeMap<usize, bool>> = BTreeMap::new();
        for r in p1
            .records
            .iter()
            .filter(|r| r.scenario.class == PositionClass::Uncertain)
        {
            profiles
                .entry((r.subject_id.as_str(), r.round))
                .or_default()
                .insert(r.scenario.cooperators, r.choice.is_cooperate());
        }
        for j in 1..t.columns() {
            let pairs: Vec<(bool, bool)> = profiles
                .values()
                .filter_map(|p| Some((*p.get(&0)?, *p.get(&j)?)))
                .collect();
            if !pairs.is_empty() {
                paired.push(PairedConditionTest {
                    label: format!("c_0 vs c_{j}"),
                    pairs: pairs.len(),
                    result: mcnemar(&pairs, variant),
                });
            }
        }
    }
    let hot_cold = if !p1.is_empty() && !p3.is_empty() {
        Some(hot_vs_cold(&p1, &p3)?)
    } else {
        None
    };
    Ok(Description {
        strategy_rates,
        direct_rates,
        binomial,
        paired,
        hot_cold,
    })
}
