use rayon::prelude::*;

use crate::choice::ChoiceModel;
use crate::error::{Error, Result};
use crate::model::{prob_table, MixtureParams, ProbTable, TypeTag};
use crate::sim::{ChoiceData, ChoiceRecord};

/// Above this many subjects the likelihood is evaluated with rayon.
const PARALLEL_SUBJECTS: usize = 512;

/// Cooperation counts of one subject in each cell of the design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectTally {
    pub id: String,
    pub coop: [u32; 6],
    pub total: [u32; 6],
}

impl SubjectTally {
    fn new(id: String) -> Self {
        SubjectTally {
            id,
            coop: [0; 6],
            total: [0; 6],
        }
    }

    fn add(&mut self, r: &ChoiceRecord) -> Result<()> {
        let j = r.scenario.experimental_index().ok_or_else(|| {
            Error::InvalidScenario(format!(
                "record of {} in round {} references {}",
                r.subject_id, r.round, r.scenario
            ))
        })?;
        self.total[j] += 1;
        self.coop[j] += u32::from(r.choice.is_cooperate());
        Ok(())
    }

    pub fn records(&self) -> u32 {
        self.total.iter().sum()
    }
}

/// Per-subject tallies in order of first appearance. Direct-play records
/// are skipped unless `include_direct` is set.
pub fn tally(data: &ChoiceData, include_direct: bool) -> Result<Vec<SubjectTally>> {
    let mut index = std::collections::HashMap::new();
    let mut out: Vec<SubjectTally> = Vec::new();
    for r in data
        .records
        .iter()
        .filter(|r| include_direct || r.is_strategy())
    {
        let k = *index.entry(r.subject_id.clone()).or_insert_with(|| {
            out.push(SubjectTally::new(r.subject_id.clone()));
            out.len() - 1
        });
        out[k].add(r)?;
    }
    Ok(out)
}

/// `ln p` and `ln(1 - p)` for every entry of a probability table.
#[derive(Debug, Clone, Copy)]
pub struct LogTable {
    ln_c: ProbTable,
    ln_d: ProbTable,
}

impl LogTable {
    pub fn new(table: &ProbTable) -> Self {
        let mut ln_c = [[0.0; 6]; 4];
        let mut ln_d = [[0.0; 6]; 4];
        for k in 0..4 {
            for j in 0..6 {
                ln_c[k][j] = table[k][j].ln();
                ln_d[k][j] = (-table[k][j]).ln_1p();
            }
        }
        LogTable { ln_c, ln_d }
    }

    /// Log-probability of a subject's choices under each type.
    pub fn type_log_likelihoods(&self, t: &SubjectTally) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, o) in out.iter_mut().enumerate() {
            for j in 0..6 {
                let c = f64::from(t.coop[j]);
                let d = f64::from(t.total[j] - t.coop[j]);
                // a zero count contributes nothing, even against ln 0
                if c > 0.0 {
                    *o += c * self.ln_c[k][j];
                }
                if d > 0.0 {
                    *o += d * self.ln_d[k][j];
                }
            }
        }
        out
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log of the mixture likelihood of one subject; types with zero share
/// are dropped before the log-sum-exp.
pub fn subject_log_likelihood(t: &SubjectTally, shares: &[f64; 4], logs: &LogTable) -> f64 {
    let per_type = logs.type_log_likelihoods(t);
    let mut terms = [f64::NEG_INFINITY; 4];
    for k in 0..4 {
        if shares[k] > 0.0 {
            terms[k] = shares[k].ln() + per_type[k];
        }
    }
    log_sum_exp(&terms)
}

/// `sum_k pi_k prod_r P(y_r | k)` for one subject's records.
pub fn subject_likelihood(
    records: &[ChoiceRecord],
    params: &MixtureParams,
    model: &ChoiceModel,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Data(
            "subject likelihood needs at least one record".into(),
        ));
    }
    let mut t = SubjectTally::new(records[0].subject_id.clone());
    for r in records {
        t.add(r)?;
    }
    let logs = LogTable::new(&prob_table(model, params)?);
    Ok(subject_log_likelihood(&t, &params.shares.0, &logs).exp())
}

/// Sample log-likelihood over precomputed tallies.
pub fn log_likelihood_tallies(
    tallies: &[SubjectTally],
    params: &MixtureParams,
    model: &ChoiceModel,
) -> Result<f64> {
    let logs = LogTable::new(&prob_table(model, params)?);
    let shares = &params.shares.0;
    let ll: f64 = if tallies.len() >= PARALLEL_SUBJECTS {
        // collect first so the reduction order does not depend on scheduling
        let parts: Vec<f64> = tallies
            .par_iter()
            .map(|t| subject_log_likelihood(t, shares, &logs))
            .collect();
        parts.iter().sum()
    } else {
        tallies
            .iter()
            .map(|t| subject_log_likelihood(t, shares, &logs))
            .sum()
    };
    if ll.is_finite() || tallies.is_empty() {
        Ok(ll)
    } else {
        Err(Error::Numerical(format!(
            "log-likelihood evaluated to {ll}"
        )))
    }
}

/// Sample log-likelihood of every record in `data`, both parts included.
pub fn log_likelihood(
    data: &ChoiceData,
    params: &MixtureParams,
    model: &ChoiceModel,
) -> Result<f64> {
    log_likelihood_tallies(&tally(data, true)?, params, model)
}

/// Posterior type probabilities `pi_k prod_r P(y_r | k)`, normalized.
pub fn posteriors(
    tallies: &[SubjectTally],
    params: &MixtureParams,
    model: &ChoiceModel,
) -> Result<Vec<[f64; 4]>> {
    let logs = LogTable::new(&prob_table(model, params)?);
    let shares = &params.shares.0;
    tallies
        .iter()
        .map(|t| {
            let per_type = logs.type_log_likelihoods(t);
            let mut terms = [f64::NEG_INFINITY; 4];
            for k in 0..4 {
                if shares[k] > 0.0 {
                    terms[k] = shares[k].ln() + per_type[k];
                }
            }
            let norm = log_sum_exp(&terms);
            if !norm.is_finite() {
                return Err(Error::Numerical(format!(
                    "subject {} has zero likelihood under every type",
                    t.id
                )));
            }
            Ok(terms.map(|x| (x - norm).exp()))
        })
        .collect()
}

/// Posterior responsibilities keyed by subject id (strategy records only
/// unless `include_direct`).
pub fn classify_subjects(
    data: &ChoiceData,
    params: &MixtureParams,
    model: &ChoiceModel,
    include_direct: bool,
) -> Result<Vec<(String, [f64; 4])>> {
    let tallies = tally(data, include_direct)?;
    let post = posteriors(&tallies, params, model)?;
    Ok(tallies.into_iter().map(|t| t.id).zip(post).collect())
}

/// Most probable type; ties go to the earlier tag.
pub fn modal_type(posterior: &[f64; 4]) -> TypeTag {
    let mut best = 0;
    for k in 1..4 {
        if posterior[k] > posterior[best] {
            best = k;
        }
    }
    TypeTag::ALL[best]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::NoiseParams;
    use crate::game::{Action, Scenario};
    use crate::kernels::{CondCoopSpec, SocialParams};
    use crate::model::TypeShares;

    fn params(pi: [f64; 4], omega: f64) -> MixtureParams {
        MixtureParams::social(
            TypeShares::new(pi).unwrap(),
            CondCoopSpec::ModifiedGm,
            SocialParams::new(-1.219, 2.377).unwrap(),
            NoiseParams::new(0.623, omega).unwrap(),
        )
        .unwrap()
    }

    fn rec(subject: &str, s: Scenario, a: Action) -> ChoiceRecord {
        ChoiceRecord {
            subject_id: subject.into(),
            part: 1,
            round: 1,
            group_id: "g1".into(),
            position: match s.class {
                crate::game::PositionClass::Pos1 => 1,
                crate::game::PositionClass::Pos2 => 2,
                crate::game::PositionClass::Uncertain => 3,
            },
            scenario: s,
            choice: a,
        }
    }

    #[test]
    fn spec_examples() {
        let m = ChoiceModel::experimental();
        let c = [rec("a", Scenario::pos1(), Action::C)];
        let l = subject_likelihood(&c, &params([0.0, 0.0, 0.0, 1.0], 0.2), &m).unwrap();
        assert!((l - 0.8).abs() < 1e-15);
        let l = subject_likelihood(&c, &params([0.0, 0.0, 1.0, 0.0], 0.2), &m).unwrap();
        assert!((l - 0.2).abs() < 1e-15);
        let cd = [
            rec("a", Scenario::pos1(), Action::C),
            rec("a", Scenario::pos2(0), Action::D),
        ];
        let l = subject_likelihood(&cd, &params([0.0, 0.0, 0.5, 0.5], 0.2), &m).unwrap();
        assert!((l - 0.16).abs() < 1e-15);
        let data = ChoiceData {
            group_size: 5,
            records: c.to_vec(),
        };
        let ll = log_likelihood(&data, &params([0.0, 0.0, 0.0, 1.0], 0.2), &m).unwrap();
        assert!((ll - 0.8f64.ln()).abs() < 1e-15);
        let empty = ChoiceData::default();
        assert_eq!(
            log_likelihood(&empty, &params([0.4, 0.3, 0.2, 0.1], 0.2), &m).unwrap(),
            0.0
        );
    }

    #[test]
    fn impossible_data_is_a_numerical_error() {
        let m = ChoiceModel::experimental();
        let data = ChoiceData {
            group_size: 5,
            records: vec![rec("a", Scenario::pos1(), Action::D)],
        };
        let err = log_likelihood(&data, &params([0.0, 0.0, 0.0, 1.0], 0.0), &m).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn posterior_examples() {
        let m = ChoiceModel::experimental();
        let all_d: Vec<_> = Scenario::EXPERIMENTAL
            .iter()
            .flat_map(|&s| std::iter::repeat_n(rec("x", s, Action::D), 10))
            .collect();
        let zero = rec("z", Scenario::pos1(), Action::C);
        let mut data = ChoiceData {
            group_size: 5,
            records: all_d,
        };
        let p = params([0.2, 0.3, 0.4, 0.1], 0.195);
        let post = classify_subjects(&data, &p, &m, false).unwrap();
        assert_eq!(modal_type(&post[0].1), TypeTag::Free);
        assert!((post[0].1.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let unit = params([0.0, 1.0, 0.0, 0.0], 0.195);
        let post = classify_subjects(&data, &unit, &m, false).unwrap();
        assert_eq!(post[0].1, [0.0, 1.0, 0.0, 0.0]);

        // a subject without records keeps the prior
        let empty = SubjectTally::new("e".into());
        let post = posteriors(&[empty], &p, &m).unwrap();
        for (got, prior) in post[0].iter().zip(p.shares.0) {
            assert!((got - prior).abs() < 1e-15);
        }

        // direct-play records are ignored by default
        data.records.push(ChoiceRecord { part: 3, ..zero });
        assert_eq!(tally(&data, false).unwrap().len(), 1);
        assert_eq!(tally(&data, true).unwrap().len(), 2);
    }
}
