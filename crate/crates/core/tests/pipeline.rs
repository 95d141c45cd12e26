use approx::assert_relative_eq;
use seqpd::choice::{ChoiceModel, NoiseParams};
use seqpd::estimate::{fit_mixture, EstimationSpec};
use seqpd::game::{Action, GameConfig};
use seqpd::io::{
    load_choices, load_results, load_types, save_choices, save_results, save_types, to_json,
    ResultsFile,
};
use seqpd::kernels::{CondCoopSpec, SocialParams};
use seqpd::model::{MixtureParams, TypeShares};
use seqpd::sim::{simulate_session, Elicitation, SimConfig, TypeAssignment};
use seqpd::stats::{cooperation_rates, hot_vs_cold, RateTable};

fn mixture(pi: [f64; 4], omega: f64) -> MixtureParams {
    MixtureParams::social(
        TypeShares::new(pi).unwrap(),
        CondCoopSpec::ModifiedGm,
        SocialParams::new(0.5, -0.1).unwrap(),
        NoiseParams::new(0.5, omega).unwrap(),
    )
    .unwrap()
}

#[test]
fn saved_choices_and_types_load_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimConfig {
        elicitation: Elicitation::Both,
        ..SimConfig::recovery_design(mixture([0.4, 0.3, 0.2, 0.1], 0.15), 8)
    };
    let session = simulate_session(&cfg).unwrap();
    let data = session.export();
    let path = dir.path().join("nested/choices.csv");
    save_choices(&data, &path).unwrap();
    assert_eq!(
        load_choices(&path, &GameConfig::experimental()).unwrap(),
        data
    );

    let types = dir.path().join("types.csv");
    save_types(&session.truth(), &types).unwrap();
    assert_eq!(load_types(&types).unwrap(), session.truth());
}

#[test]
fn rate_cells_track_their_conditional_expectation() {
    let model = ChoiceModel::experimental();
    let params = mixture([0.4, 0.3, 0.2, 0.1], 0.15);
    let cfg = SimConfig {
        n_subjects: 200,
        ..SimConfig::recovery_design(params, 31)
    };
    let session = simulate_session(&cfg).unwrap();
    let truth = session.truth();
    let data = session.export();
    let table = cooperation_rates(&data);

    // given the drawn types, choices are independent Bernoulli draws
    let mut expected = vec![vec![(0.0, 0.0); table.columns()]; 4];
    for r in &data.records {
        let tag = truth[&r.subject_id];
        let p = model
            .prob(
                tag.behavior(params.spec),
                &params.type_params(tag),
                &r.scenario,
                params.noise,
            )
            .unwrap();
        let row = match r.position {
            1 => 0,
            2 => 1,
            _ => 2,
        };
        for i in [row, 3] {
            let cell = &mut expected[i][r.scenario.cooperators];
            cell.0 += p;
            cell.1 += p * (1.0 - p);
        }
    }
    for (i, row) in expected.iter().enumerate() {
        for (j, &(mean, var)) in row.iter().enumerate() {
            let cell = table.get(i, j);
            if cell.total == 0 {
                continue;
            }
            let z = (cell.coop as f64 - mean) / var.sqrt();
            assert!(
                z.abs() < 4.0,
                "cell ({i},{j}): {} vs {mean:.1}, z={z:.2}",
                cell.coop
            );
        }
    }
    let all: u64 = table.cells[3].iter().map(|c| c.total).sum();
    assert_eq!(all, data.len() as u64);
}

#[test]
fn noiseless_heuristic_populations() {
    let free = simulate_session(&SimConfig::recovery_design(
        mixture([0.0, 0.0, 1.0, 0.0], 0.0),
        2,
    ))
    .unwrap();
    assert!(free.export().records.iter().all(|r| r.choice == Action::D));
    let table = cooperation_rates(&free.export());
    assert_eq!(table.total.coop, 0);

    let alt = simulate_session(&SimConfig::recovery_design(
        mixture([0.0, 0.0, 0.0, 1.0], 0.0),
        2,
    ))
    .unwrap();
    assert!(alt.export().records.iter().all(|r| r.choice == Action::C));
    assert!(alt
        .plays
        .iter()
        .all(|p| p.actions.iter().all(|&a| a == Action::C)));
}

#[test]
fn hot_and_cold_rates_agree_without_a_method_effect() {
    let cfg = SimConfig {
        n_subjects: 200,
        elicitation: Elicitation::Both,
        assignment: TypeAssignment::Quota,
        ..SimConfig::recovery_design(mixture([0.4, 0.3, 0.2, 0.1], 0.15), 17)
    };
    let data = simulate_session(&cfg).unwrap().export();
    let report = hot_vs_cold(&data.part(1), &data.part(3)).unwrap();
    assert_eq!(report.hot.total as usize + report.unmatched, 200 * 10);
    assert_eq!(report.cold.total, report.hot.total);
    let n = report.hot.total as f64;
    let p = (report.hot.coop + report.cold.coop) as f64 / (2.0 * n);
    let gap = report.hot.rate().unwrap() - report.cold.rate().unwrap();
    assert!(
        gap.abs() < 3.0 * (2.0 * p * (1.0 - p) / n).sqrt(),
        "gap {gap}"
    );
}

#[test]
fn results_json_is_stable_and_round_trips() {
    let data = simulate_session(&SimConfig::recovery_design(
        mixture([0.4, 0.3, 0.2, 0.1], 0.15),
        5,
    ))
    .unwrap()
    .export();
    let spec = EstimationSpec {
        restarts: 4,
        seed: 1,
        ..EstimationSpec::new(CondCoopSpec::ModifiedGm)
    };
    let fit = fit_mixture(&data, &ChoiceModel::experimental(), &spec).unwrap();
    let file = ResultsFile::from(&fit);
    let again = fit_mixture(&data, &ChoiceModel::experimental(), &spec).unwrap();
    assert_eq!(
        to_json(&file).unwrap(),
        to_json(&ResultsFile::from(&again)).unwrap()
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.json");
    save_results(&fit, &path).unwrap();
    let loaded = load_results(&path).unwrap();
    assert_eq!(loaded, file);
    assert_relative_eq!(
        loaded.aic,
        -2.0 * fit.ll + 2.0 * fit.k as f64,
        max_relative = 1e-12
    );
    let pi_sum: f64 = ["pi_gm", "pi_coop", "pi_free", "pi_alt"]
        .iter()
        .map(|k| loaded.estimates[*k])
        .sum();
    assert_relative_eq!(pi_sum, 1.0, epsilon = 1e-12);
    for post in loaded.posteriors.values() {
        assert_relative_eq!(post.values().sum::<f64>(), 1.0, epsilon = 1e-9);
    }
}

#[test]
fn rate_table_serializes_losslessly() {
    let data = simulate_session(&SimConfig::recovery_design(
        mixture([0.4, 0.3, 0.2, 0.1], 0.15),
        6,
    ))
    .unwrap()
    .export();
    let table = cooperation_rates(&data);
    let back: RateTable = serde_json::from_str(&to_json(&table).unwrap()).unwrap();
    assert_eq!(back, table);
}
