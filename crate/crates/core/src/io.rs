//! File formats: choice CSVs, the latent-type sidecar, JSON results and
//! plot-ready CSV series.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Diagnostics, EstimateResult};
use crate::game::{
    scenario_from_history, scenario_set, Action, GameConfig, PositionClass, Scenario,
};
use crate::kernels::CondCoopSpec;
use crate::model::TypeTag;
use crate::sim::{ChoiceData, ChoiceRecord, RealizedPlay};
use crate::stats::{RateTable, SeriesPoint};

pub const CHOICES_VERSION_LINE: &str = "# seqpd choices v1";
pub const CHOICES_HEADER: [&str; 8] = [
    "subject_id",
    "part",
    "round",
    "group_id",
    "position",
    "position_class",
    "m_c",
    "choice",
];

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// The choice CSV text: version line, header, one row per record in order.
pub fn choices_to_csv(data: &ChoiceData) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CHOICES_HEADER)?;
    for r in &data.records {
        let m_c = match r.scenario.class {
            PositionClass::Pos1 => String::new(),
            _ => r.scenario.cooperators.to_string(),
        };
        w.write_record([
            r.subject_id.as_str(),
            &r.part.to_string(),
            &r.round.to_string(),
            r.group_id.as_str(),
            &r.position.to_string(),
            r.scenario.class.as_str(),
            &m_c,
            r.choice.as_str(),
        ])?;
    }
    let body = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    let mut out = format!("{CHOICES_VERSION_LINE}\n").into_bytes();
    out.extend(body);
    String::from_utf8(out).map_err(|e| Error::Data(e.to_string()))
}

pub fn save_choices(data: &ChoiceData, path: &Path) -> Result<()> {
    write_file(path, choices_to_csv(data)?.as_bytes())
}

pub fn load_choices(path: &Path, game: &GameConfig) -> Result<ChoiceData> {
    parse_choices(&read_file(path)?, path, game)
}

struct Row {
    line: usize,
    record: ChoiceRecord,
}

fn schema(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses and validates a choice CSV. `path` is only used in diagnostics.
///
/// Every row must be internally consistent (position class against
/// position, `m_c` present exactly when the position is not first and
/// within range, `C`/`D` choice). Across rows, each part-1 group-round must
/// hold one subject per position answering exactly that position's
/// scenarios, and each part-3 group-round one decision per position whose
/// `m_c` agrees with the choices before it.
pub fn parse_choices(text: &str, path: &Path, game: &GameConfig) -> Result<ChoiceData> {
    let mut body = text;
    let mut first_line = 1;
    if let Some(rest) = text.strip_prefix('#') {
        let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
        let line = format!("#{}", line.trim_end_matches('\r'));
        if line != CHOICES_VERSION_LINE {
            return Err(schema(
                path,
                1,
                format!("unsupported version line {line:?}, expected {CHOICES_VERSION_LINE:?}"),
            ));
        }
        body = tail;
        first_line = 2;
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut rows = Vec::new();
    let mut header_seen = false;
    for rec in reader.records() {
        let rec = rec?;
        let line = first_line - 1 + rec.position().map_or(0, |p| p.line() as usize);
        if !header_seen {
            let got: Vec<&str> = rec.iter().collect();
            if got != CHOICES_HEADER {
                return Err(schema(
                    path,
                    line,
                    format!(
                        "header {got:?} does not match {:?}",
                        CHOICES_HEADER.join(",")
                    ),
                ));
            }
            header_seen = true;
            continue;
        }
        rows.push(Row {
            line,
            record: parse_row(&rec, path, line, game)?,
        });
    }
    if !header_seen {
        return Err(schema(path, first_line, "missing header row"));
    }
    validate_strategy_groups(&rows, path, game)?;
    validate_direct_groups(&rows, path, game)?;
    Ok(ChoiceData {
        group_size: game.n,
        records: rows.into_iter().map(|r| r.record).collect(),
    })
}

fn parse_row(
    rec: &csv::StringRecord,
    path: &Path,
    line: usize,
    game: &GameConfig,
) -> Result<ChoiceRecord> {
    if rec.len() != CHOICES_HEADER.len() {
        return Err(schema(
            path,
            line,
            format!(
                "expected {} fields, found {}",
                CHOICES_HEADER.len(),
                rec.len()
            ),
        ));
    }
    let field = |i: usize| &rec[i];
    let subject_id = field(0).to_string();
    if subject_id.is_empty() {
        return Err(schema(path, line, "empty subject_id"));
    }
    let part: u8 = field(1)
        .parse()
        .ok()
        .filter(|p| *p == 1 || *p == 3)
        .ok_or_else(|| schema(path, line, format!("part {:?} must be 1 or 3", field(1))))?;
    let round: u32 = field(2).parse().ok().filter(|r| *r >= 1).ok_or_else(|| {
        schema(
            path,
            line,
            format!("round {:?} must be a positive integer", field(2)),
        )
    })?;
    let group_id = field(3).to_string();
    if group_id.is_empty() {
        return Err(schema(path, line, "empty group_id"));
    }
    let position: usize = field(4)
        .parse()
        .ok()
        .filter(|p| (1..=game.n).contains(p))
        .ok_or_else(|| {
            schema(
                path,
                line,
                format!("position {:?} outside 1..={}", field(4), game.n),
            )
        })?;
    let class = PositionClass::parse(field(5))
        .ok_or_else(|| schema(path, line, format!("unknown position_class {:?}", field(5))))?;
    if class != PositionClass::of_position(position) {
        return Err(schema(
            path,
            line,
            format!(
                "position_class {} is inconsistent with position {position}",
                class.as_str()
            ),
        ));
    }
    let scenario = match (class, field(6)) {
        (PositionClass::Pos1, "") => Scenario::pos1(),
        (PositionClass::Pos1, v) => {
            return Err(schema(
                path,
                line,
                format!("m_c must be empty at position 1, found {v:?}"),
            ))
        }
        (_, "") => return Err(schema(path, line, "m_c is required after position 1")),
        (c, v) => {
            let k: usize = v
                .parse()
                .map_err(|_| schema(path, line, format!("m_c {v:?} is not a count")))?;
            let max = if c == PositionClass::Pos2 { 1 } else { game.m };
            if k > max {
                return Err(schema(
                    path,
                    line,
                    format!("m_c={k} exceeds {max} for {}", c.as_str()),
                ));
            }
            Scenario {
                class: c,
                cooperators: k,
            }
        }
    };
    let choice = match field(7) {
        "C" => Action::C,
        "D" => Action::D,
        v => return Err(schema(path, line, format!("choice {v:?} must be C or D"))),
    };
    Ok(ChoiceRecord {
        subject_id,
        part,
        round,
        group_id,
        position,
        scenario,
        choice,
    })
}

type GroupRows<'a> = BTreeMap<(u32, &'a str), Vec<&'a Row>>;

fn group_rows(rows: &[Row], part: u8) -> GroupRows<'_> {
    let mut groups: GroupRows = BTreeMap::new();
    for r in rows.iter().filter(|r| r.record.part == part) {
        groups
            .entry((r.record.round, r.record.group_id.as_str()))
            .or_default()
            .push(r);
    }
    groups
}

fn check_one_group_per_round(rows: &[Row], path: &Path, part: u8) -> Result<()> {
    let mut seen: HashMap<(&str, u32), &str> = HashMap::new();
    for r in rows.iter().filter(|r| r.record.part == part) {
        let key = (r.record.subject_id.as_str(), r.record.round);
        match seen.insert(key, r.record.group_id.as_str()) {
            Some(g) if g != r.record.group_id => {
                return Err(schema(
                    path,
                    r.line,
                    format!(
                        "subject {} is in groups {g} and {} in part {part} round {}",
                        key.0, r.record.group_id, key.1
                    ),
                ));
            }
            _ => {}
        }
    }
    Ok(())
}

fn validate_strategy_groups(rows: &[Row], path: &Path, game: &GameConfig) -> Result<()> {
    check_one_group_per_round(rows, path, 1)?;
    let expected: Vec<BTreeSet<Scenario>> = (1..=game.n)
        .map(|p| scenario_set(p, game).map(|v| v.into_iter().collect()))
        .collect::<Result<_>>()?;
    let per_group = game.scenarios_per_group()?;
    for ((round, gid), recs) in group_rows(rows, 1) {
        let mut by_position: BTreeMap<usize, (&str, BTreeSet<Scenario>)> = BTreeMap::new();
        for r in &recs {
            let entry = by_position
                .entry(r.record.position)
                .or_insert((r.record.subject_id.as_str(), BTreeSet::new()));
            if entry.0 != r.record.subject_id {
                return Err(schema(
                    path,
                    r.line,
                    format!(
                        "group {gid} round {round}: position {} held by both {} and {}",
                        r.record.position, entry.0, r.record.subject_id
                    ),
                ));
            }
            if !entry.1.insert(r.record.scenario) {
                return Err(schema(
                    path,
                    r.line,
                    format!(
                        "duplicate scenario row {} for subject {} in round {round}",
                        r.record.scenario, r.record.subject_id
                    ),
                ));
            }
        }
        let last = recs.last().map_or(0, |r| r.line);
        if recs.len() != per_group || by_position.len() != game.n {
            return Err(schema(path, last, format!(
                "group {gid} round {round} has {} scenario rows over {} positions, expected {per_group} over {}",
                recs.len(),
                by_position.len(),
                game.n
            )));
        }
        for (pos, (subject, got)) in &by_position {
            if *got != expected[pos - 1] {
                return Err(schema(path, last, format!(
                    "group {gid} round {round}: subject {subject} at position {pos} does not answer every scenario of that position"
                )));
            }
        }
    }
    Ok(())
}

fn validate_direct_groups(rows: &[Row], path: &Path, game: &GameConfig) -> Result<()> {
    let mut seen: HashMap<(&str, u32), usize> = HashMap::new();
    for r in rows.iter().filter(|r| r.record.part == 3) {
        if let Some(prev) = seen.insert((r.record.subject_id.as_str(), r.record.round), r.line) {
            return Err(schema(
                path,
                r.line,
                format!(
                    "subject {} already decided in part 3 round {} (line {prev})",
                    r.record.subject_id, r.record.round
                ),
            ));
        }
    }
    for ((round, gid), mut recs) in group_rows(rows, 3) {
        recs.sort_by_key(|r| r.record.position);
        let last = recs.iter().map(|r| r.line).max().unwrap_or(0);
        let positions: Vec<usize> = recs.iter().map(|r| r.record.position).collect();
        if positions != (1..=game.n).collect::<Vec<_>>() {
            return Err(schema(
                path,
                last,
                format!(
                    "group {gid} round {round} holds positions {positions:?}, expected 1..={}",
                    game.n
                ),
            ));
        }
        let mut history = Vec::with_capacity(game.n);
        for r in recs {
            let seen = scenario_from_history(r.record.position, &history, game.m)?;
            if seen != r.record.scenario {
                return Err(schema(
                    path,
                    r.line,
                    format!(
                        "recorded scenario {} but the preceding choices give {seen}",
                        r.record.scenario
                    ),
                ));
            }
            history.push(r.record.choice);
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TypeRow {
    subject_id: String,
    #[serde(rename = "type")]
    tag: String,
}

/// Latent types, kept apart from the choice file.
pub fn save_types(types: &BTreeMap<String, TypeTag>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (id, t) in types {
        w.serialize(TypeRow {
            subject_id: id.clone(),
            tag: t.as_str().to_string(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_file(path, &bytes)
}

pub fn load_types(path: &Path) -> Result<BTreeMap<String, TypeTag>> {
    let text = read_file(path)?;
    let mut out = BTreeMap::new();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    for row in reader.deserialize::<TypeRow>() {
        let row = row?;
        let t = TypeTag::parse(&row.tag).ok_or_else(|| {
            Error::Data(format!("{}: unknown type {:?}", path.display(), row.tag))
        })?;
        out.insert(row.subject_id, t);
    }
    Ok(out)
}

/// Serialized form of an estimation result, keyed by parameter name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub spec: CondCoopSpec,
    pub estimates: BTreeMap<String, f64>,
    pub std_errors: BTreeMap<String, Option<f64>>,
    pub ll: f64,
    pub aic: f64,
    pub bic: f64,
    pub k: usize,
    pub n_obs: usize,
    /// Subject id to type name to posterior probability.
    pub posteriors: BTreeMap<String, BTreeMap<String, f64>>,
    pub diagnostics: Diagnostics,
}

impl From<&EstimateResult> for ResultsFile {
    fn from(r: &EstimateResult) -> Self {
        let names = r.names();
        ResultsFile {
            spec: r.spec,
            estimates: names
                .iter()
                .zip(r.estimates)
                .map(|(n, v)| (n.to_string(), v))
                .collect(),
            std_errors: names
                .iter()
                .zip(r.std_errors)
                .map(|(n, v)| (n.to_string(), v))
                .collect(),
            ll: r.ll,
            aic: r.aic,
            bic: r.bic,
            k: r.k,
            n_obs: r.n_obs,
            posteriors: r
                .subject_ids
                .iter()
                .zip(&r.posteriors)
                .map(|(id, p)| {
                    let by_type = TypeTag::ALL
                        .iter()
                        .map(|t| (t.as_str().to_string(), p[t.index()]))
                        .collect();
                    (id.clone(), by_type)
                })
                .collect(),
            diagnostics: r.diagnostics.clone(),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn save_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    write_file(path, to_json(value)?.as_bytes())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_file(path)?)?)
}

pub fn save_results(result: &EstimateResult, path: &Path) -> Result<()> {
    save_json(&ResultsFile::from(result), path)
}

pub fn load_results(path: &Path) -> Result<ResultsFile> {
    load_json(path)
}

/// Rate table as CSV, three decimals, empty cells as `-`.
pub fn rate_table_csv(table: &RateTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in table.to_rows() {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// Long-format series; rates to six decimals, empty when undefined.
pub fn series_csv(points: &[SeriesPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["figure", "part", "round", "series", "coop", "total", "rate"])?;
    for p in points {
        let rate = if p.rate.is_finite() {
            format!("{:.6}", p.rate)
        } else {
            String::new()
        };
        w.write_record([
            p.figure.clone(),
            p.part.to_string(),
            p.round.to_string(),
            p.series.clone(),
            p.coop.to_string(),
            p.total.to_string(),
            rate,
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// One row per player: `part,round,group_id,position,action,payoff`.
pub fn plays_csv(plays: &[RealizedPlay]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["part", "round", "group_id", "position", "action", "payoff"])?;
    for p in plays {
        for (k, (a, pay)) in p.actions.iter().zip(&p.payoffs).enumerate() {
            w.write_record([
                p.part.to_string(),
                p.round.to_string(),
                p.group_id.clone(),
                (k + 1).to_string(),
                a.as_str().to_string(),
                pay.to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}
