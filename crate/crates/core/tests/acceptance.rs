//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always shown.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_rational::Rational64;
use seqpd::choice::{ChoiceModel, NoiseParams};
use seqpd::estimate::transform::alr_inverse;
use seqpd::estimate::{
    fit_mixture, information_criteria, log_likelihood, subject_likelihood, EstimationSpec,
};
use seqpd::game::{
    equilibrium_condition_general, equilibrium_condition_gl, Action, GameConfig, PositionClass,
    Scenario,
};
use seqpd::kernels::{
    gm_decision, gm_eu, type_eu, BehaviorType, CondCoopSpec, Prescription, SocialParams,
    TypeParams, WelfareParams,
};
use seqpd::model::{MixtureParams, TypeShares, TypeTag};
use seqpd::recovery::{
    run_recovery, IterationOutcome, RecoveryConfig, RecoverySummary, TABLE_COLUMNS,
};
use seqpd::sim::{simulate_session, ChoiceData, ChoiceRecord, SimConfig};
use seqpd::stats::{exact_binomial, mcnemar_counts, McNemarVariant, Tail};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn timed<T>(f: impl Fn() -> T) -> (T, Duration) {
    // best of several runs, to keep scheduler noise out of the sub-millisecond budgets
    let mut best = Duration::MAX;
    let mut out = f();
    for _ in 0..20 {
        let t0 = Instant::now();
        out = f();
        best = best.min(t0.elapsed());
    }
    (out, best)
}

fn criterion_1() -> Outcome {
    let game = GameConfig::experimental();
    let ((tokens, normalized), took) = timed(|| {
        let tokens = equilibrium_condition_general(&game).unwrap();
        let g = game.payoffs.normalized().unwrap().g;
        (tokens, equilibrium_condition_gl(5, 2, g).unwrap())
    });
    ensure!(
        tokens.threshold == Rational64::new(3800, 6),
        "token threshold {}",
        tokens.threshold
    );
    ensure!(tokens.holds, "token condition fails");
    ensure!(
        game.payoffs.normalized().unwrap().g == Rational64::new(1, 4),
        "g is not 1/4"
    );
    ensure!(
        normalized.threshold == Rational64::new(1, 3),
        "normalized threshold {}",
        normalized.threshold
    );
    ensure!(normalized.holds, "normalized condition fails");
    ensure!(took < Duration::from_millis(1), "took {took:?}");
    Ok(format!(
        "threshold {} (= 3800/6), g = 1/4 <= 1/3, {took:?}",
        tokens.threshold
    ))
}

fn criterion_2() -> Outcome {
    let game = GameConfig::experimental();
    let rows = [
        (Scenario::uncertain(2), (2000.0, 1900.0), Action::C),
        (Scenario::uncertain(1), (1100.0, 1400.0), Action::D),
        (Scenario::uncertain(0), (200.0, 400.0), Action::D),
        (Scenario::pos2(1), (2000.0, 900.0), Action::C),
        (Scenario::pos2(0), (200.0, 400.0), Action::D),
        (Scenario::pos1(), (2000.0, 400.0), Action::C),
    ];
    let (_, took) = timed(|| {
        rows.iter()
            .map(|(s, _, _)| gm_decision(s, &game).unwrap())
            .collect::<Vec<_>>()
    });
    for (s, (c, d), decision) in rows {
        let eu = gm_eu(&s, &game).map_err(|e| e.to_string())?;
        ensure!(eu.eu_c == c && eu.eu_d == d, "{s}: EU {:?}", eu);
        ensure!(gm_decision(&s, &game).unwrap() == decision, "{s}: decision");
    }
    ensure!(took < Duration::from_millis(1), "took {took:?}");
    Ok(format!(
        "decisions C,D,D,C,D,C and all six EU pairs exact, {took:?}"
    ))
}

struct RecoveryRun {
    label: &'static str,
    reference_mean: [f64; 7],
    outcomes: Vec<IterationOutcome>,
    summary: RecoverySummary,
}

fn recovery_runs() -> &'static [RecoveryRun] {
    static RUNS: OnceLock<Vec<RecoveryRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let shares = TypeShares::new([0.4, 0.3, 0.2, 0.1]).unwrap();
        let noise = NoiseParams::new(0.5, 0.15).unwrap();
        let social = MixtureParams::social(
            shares,
            CondCoopSpec::ModifiedGm,
            SocialParams::new(0.5, -0.1).unwrap(),
            noise,
        )
        .unwrap();
        let welfare =
            MixtureParams::welfare(shares, WelfareParams::new(0.3, 0.6).unwrap(), noise).unwrap();
        let cases = [
            (
                "social (sigma -0.1, rho 0.5)",
                social,
                [0.397, 0.304, 0.200, -0.116, 0.523, 0.506, 0.150],
            ),
            (
                "reciprocal fairness (gamma 0.3, delta 0.6)",
                welfare,
                [0.390, 0.310, 0.200, 0.309, 0.584, 0.510, 0.150],
            ),
        ];
        cases
            .into_iter()
            .map(|(label, truth, reference_mean)| {
                let (outcomes, summary) =
                    run_recovery(&RecoveryConfig::desk_design(truth, 2024)).unwrap();
                RecoveryRun {
                    label,
                    reference_mean,
                    outcomes,
                    summary,
                }
            })
            .collect()
    })
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    for run in recovery_runs() {
        let s = &run.summary;
        ensure!(
            s.successes == 100,
            "{}: {} of 100 fits succeeded",
            run.label,
            s.successes
        );
        let mut worst_z: f64 = 0.0;
        let mut worst_gap: f64 = 0.0;
        for (col, &i) in TABLE_COLUMNS.iter().enumerate() {
            let z = (s.mean[i] - s.truth[i]).abs() / s.mc_se[i];
            let gap = (s.mean[i] - run.reference_mean[col]).abs();
            ensure!(
                z <= 3.0,
                "{}: {} mean {:.4} is {z:.2} MC s.e. from {}",
                run.label,
                s.names[i],
                s.mean[i],
                s.truth[i]
            );
            ensure!(
                gap <= 0.05,
                "{}: {} mean {:.4} is {gap:.3} from the reference {}",
                run.label,
                s.names[i],
                s.mean[i],
                run.reference_mean[col]
            );
            worst_z = worst_z.max(z);
            worst_gap = worst_gap.max(gap);
        }
        notes.push(format!(
            "{}: max |z| {worst_z:.2}, max reference gap {worst_gap:.3}",
            run.label
        ));
    }
    Ok(notes.join("; "))
}

fn criterion_4() -> Outcome {
    // The third column's LL is printed to two decimals; -1210.323 is the
    // value its AIC and BIC imply.
    let columns = [
        (-1186.544, 2387.088, 2426.433),
        (-1191.416, 2396.832, 2436.177),
        (-1210.323, 2434.646, 2473.991),
    ];
    for (ll, aic, bic) in columns {
        let (a, b) = information_criteria(ll, 7, 2040).map_err(|e| e.to_string())?;
        ensure!(
            (a - aic).abs() < 1e-3 && (b - bic).abs() < 1e-3,
            "LL {ll}: got AIC {a:.4}, BIC {b:.4}"
        );
    }
    Ok("three columns match to 1e-3 with k=7, n=2040".into())
}

fn brute_force(records: &[ChoiceRecord], params: &MixtureParams, game: &GameConfig) -> f64 {
    let (beta, omega) = (params.noise.beta, params.noise.omega);
    let mut total = 0.0;
    for tag in TypeTag::ALL {
        let mut prod = params.shares.get(tag);
        for r in records {
            let p_c = match type_eu(
                tag.behavior(params.spec),
                &params.type_params(tag),
                &r.scenario,
                game,
            )
            .unwrap()
            {
                Prescription::Utility(eu) => {
                    omega / 2.0 + (1.0 - omega) / (1.0 + (-beta * 0.01 * (eu.eu_c - eu.eu_d)).exp())
                }
                Prescription::Fixed(Action::C) => 1.0 - omega,
                Prescription::Fixed(Action::D) => omega,
            };
            prod *= if r.choice == Action::C {
                p_c
            } else {
                1.0 - p_c
            };
        }
        total += prod;
    }
    total
}

fn criterion_5() -> Outcome {
    let game = GameConfig::experimental();
    let model = ChoiceModel::experimental();
    let param_sets = [
        MixtureParams::social(
            TypeShares::new([0.4, 0.3, 0.2, 0.1]).unwrap(),
            CondCoopSpec::ModifiedGm,
            SocialParams::new(-1.219, 2.377).unwrap(),
            NoiseParams::new(0.623, 0.195).unwrap(),
        ),
        MixtureParams::social(
            TypeShares::new([0.25, 0.25, 0.25, 0.25]).unwrap(),
            CondCoopSpec::PureCc,
            SocialParams::new(0.5, -0.1).unwrap(),
            NoiseParams::new(2.0, 0.0).unwrap(),
        ),
        MixtureParams::welfare(
            TypeShares::new([0.1, 0.6, 0.0, 0.3]).unwrap(),
            WelfareParams::new(0.3, 0.6).unwrap(),
            NoiseParams::new(0.05, 0.5).unwrap(),
        ),
    ];
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for params in param_sets {
        let params = params.map_err(|e| e.to_string())?;
        for s1 in Scenario::EXPERIMENTAL {
            for s2 in Scenario::EXPERIMENTAL {
                for (a1, a2) in [
                    (Action::C, Action::C),
                    (Action::C, Action::D),
                    (Action::D, Action::C),
                    (Action::D, Action::D),
                ] {
                    let records = [(s1, a1), (s2, a2)].map(|(s, a)| ChoiceRecord {
                        subject_id: "x".into(),
                        part: 1,
                        round: 1,
                        group_id: "g1".into(),
                        position: match s.class {
                            PositionClass::Pos1 => 1,
                            PositionClass::Pos2 => 2,
                            PositionClass::Uncertain => 3,
                        },
                        scenario: s,
                        choice: a,
                    });
                    let got =
                        subject_likelihood(&records, &params, &model).map_err(|e| e.to_string())?;
                    let want = brute_force(&records, &params, &game);
                    worst = worst.max((got - want).abs());
                    ensure!(
                        (got - want).abs() < 1e-12,
                        "{s1}/{a1}, {s2}/{a2}: {got} vs {want}"
                    );
                    checked += 1;
                }
            }
        }
    }
    Ok(format!(
        "{checked} two-record instances, max abs difference {worst:.1e}"
    ))
}

fn session_85() -> ChoiceData {
    let mixture = MixtureParams::social(
        TypeShares::new([0.276, 0.100, 0.480, 0.144]).unwrap(),
        CondCoopSpec::ModifiedGm,
        SocialParams::new(-1.219, 2.377).unwrap(),
        NoiseParams::new(0.623, 0.195).unwrap(),
    )
    .unwrap();
    let cfg = SimConfig {
        n_subjects: 85,
        ..SimConfig::recovery_design(mixture, 77)
    };
    simulate_session(&cfg).unwrap().export()
}

fn criterion_6() -> Outcome {
    let data = session_85();
    ensure!(data.len() == 2040, "{} records", data.len());
    // beta = 0 flattens the logit and omega = 1/2 the constant-error types
    let uniform = MixtureParams::social(
        TypeShares::new([0.25; 4]).unwrap(),
        CondCoopSpec::ModifiedGm,
        SocialParams::SELFISH,
        NoiseParams::new(0.0, 0.5).unwrap(),
    )
    .unwrap();
    let ll =
        log_likelihood(&data, &uniform, &ChoiceModel::experimental()).map_err(|e| e.to_string())?;
    let expected = 2040.0 * 0.5f64.ln();
    ensure!((ll - expected).abs() < 1e-9, "uniform LL {ll}");
    ensure!(
        (ll + 1414.02).abs() < 0.005,
        "uniform LL {ll} is not about -1414.02"
    );
    let mut fits = 0;
    for run in recovery_runs() {
        for o in &run.outcomes {
            let fit =
                o.ll.ok_or_else(|| format!("iteration {} has no fit", o.index))?;
            ensure!(
                o.converged_restarts > 0,
                "iteration {} did not converge",
                o.index
            );
            ensure!(
                fit > o.ll_uniform,
                "iteration {}: {fit} <= {}",
                o.index,
                o.ll_uniform
            );
            fits += 1;
        }
    }
    Ok(format!(
        "uniform LL {ll:.4}; all {fits} recovery fits exceed their uniform baseline"
    ))
}

fn criterion_7() -> Outcome {
    let game = GameConfig::experimental();
    let sp = SocialParams::new(-1.219, 2.377).map_err(|e| e.to_string())?;
    let t = BehaviorType::CondCoop(CondCoopSpec::ModifiedGm);
    let mut pattern = Vec::new();
    for s in Scenario::EXPERIMENTAL {
        let a = type_eu(t, &TypeParams::Social(sp), &s, &game)
            .unwrap()
            .decision();
        let expected = if s == Scenario::uncertain(2) {
            Action::D
        } else {
            Action::C
        };
        ensure!(a == expected, "{s}: {a}");
        pattern.push(format!("{s}:{a}"));
    }
    // the two cut-offs behind the pattern: rho below -100/1650 flips
    // uncertain/m_c=2 to D, sigma at or above 50/550 keeps the rest at C
    ensure!(
        sp.rho < -100.0 / 1650.0 && sp.sigma >= 50.0 / 550.0,
        "estimates on the wrong side of a cut-off"
    );
    Ok(pattern.join(" "))
}

fn criterion_8() -> Outcome {
    let m = mcnemar_counts(10, 20, McNemarVariant::Corrected);
    ensure!(m.statistic == 2.7, "statistic {}", m.statistic);
    ensure!((m.p_value - 0.1003).abs() < 1e-3, "p {}", m.p_value);
    let p = exact_binomial(8, 10, 0.5, Tail::Greater).map_err(|e| e.to_string())?;
    ensure!(p == 56.0 / 1024.0, "binomial tail {p}");
    Ok(format!(
        "McNemar 2.7 (p={:.4}), binomial tail 56/1024 exactly",
        m.p_value
    ))
}

fn criterion_9() -> Outcome {
    let game = GameConfig::experimental();
    let model = ChoiceModel::experimental();
    // logit translation invariance and range
    for beta in [0.0, 0.1, 0.5, 3.0] {
        for omega in [0.0, 0.15, 0.5] {
            let np = NoiseParams::new(beta, omega).unwrap();
            for (c, d) in [(2000.0, 1900.0), (200.0, 400.0), (-50.0, 75.5)] {
                let base = seqpd::choice::logit_tremble(
                    seqpd::kernels::EUPair::new(c, d).scaled(0.01),
                    np,
                );
                ensure!((0.0..=1.0).contains(&base), "p={base}");
                ensure!(
                    base >= omega / 2.0 - 1e-15 && base <= 1.0 - omega / 2.0 + 1e-15,
                    "p={base} outside tremble band"
                );
                for k in [-1000.0, 3.25, 1e4] {
                    let shifted = seqpd::choice::logit_tremble(
                        seqpd::kernels::EUPair::new(c + k, d + k).scaled(0.01),
                        np,
                    );
                    ensure!((shifted - base).abs() < 1e-12, "shift {k} moved p");
                }
            }
        }
    }
    // simplex closure
    for a in [
        [0.0, 0.0, 0.0],
        [30.0, -30.0, 5.0],
        [-700.0, 2.0, 1.5],
        [1e3, 1e3, 1e3],
    ] {
        let pi = alr_inverse(a);
        ensure!(pi.iter().all(|p| (0.0..=1.0).contains(p)), "{pi:?}");
        ensure!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{pi:?}");
    }
    // count identities
    ensure!(
        game.scenarios_per_group().unwrap() == 12,
        "scenarios per group"
    );
    let data = session_85();
    ensure!(
        data.len() == 17 * 12 * 10,
        "85 x 10 gives {} rows",
        data.len()
    );
    // seed determinism, including across worker counts
    let mixture = MixtureParams::social(
        TypeShares::new([0.4, 0.3, 0.2, 0.1]).unwrap(),
        CondCoopSpec::ModifiedGm,
        SocialParams::new(0.5, -0.1).unwrap(),
        NoiseParams::new(0.5, 0.15).unwrap(),
    )
    .unwrap();
    let spec = EstimationSpec {
        restarts: 8,
        seed: 3,
        ..EstimationSpec::new(CondCoopSpec::ModifiedGm)
    };
    let pipeline = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let data = simulate_session(&SimConfig::recovery_design(mixture, 99))
                .unwrap()
                .export();
            let fit = fit_mixture(&data, &model, &spec).unwrap();
            (data, fit.estimates, fit.std_errors, fit.ll, fit.posteriors)
        })
    };
    let one = pipeline(1);
    ensure!(one == pipeline(1), "repeat run differs");
    ensure!(one == pipeline(3), "three workers differ from one");
    let other = simulate_session(&SimConfig::recovery_design(mixture, 100))
        .unwrap()
        .export();
    ensure!(other != one.0, "a different seed reproduced the data");
    Ok("translation invariance, ranges, simplex closure, 12 per group-round, 2040 rows, determinism across 1 and 3 workers".into())
}

fn criterion_10() -> Outcome {
    let text = include_str!("fixtures/lab_targets.json");
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let hc = &v["hot_vs_cold"];
    let rate = |k: &str| hc[k]["coop"].as_f64().unwrap() / hc[k]["total"].as_f64().unwrap();
    ensure!(
        (rate("strategy") - 0.432).abs() < 5e-4 && (rate("direct") - 0.459).abs() < 5e-4,
        "hot/cold counts"
    );
    let cols = v["estimates"].as_object().ok_or("estimates")?;
    let mut n = 0;
    for (_, c) in cols {
        let (a, b) =
            information_criteria(c["ll"].as_f64().unwrap(), 7, 2040).map_err(|e| e.to_string())?;
        ensure!(
            (a - c["aic"].as_f64().unwrap()).abs() < 1e-3
                && (b - c["bic"].as_f64().unwrap()).abs() < 1e-3,
            "fixture IC"
        );
        n += 1;
    }
    let mut by_row: BTreeMap<&str, usize> = BTreeMap::new();
    for (row, vals) in v["rates"].as_object().ok_or("rates")? {
        by_row.insert(row.as_str(), vals.as_array().map_or(0, Vec::len));
    }
    ensure!(by_row.len() == 4, "rate rows");
    Ok(format!(
        "DECLARED: lab rates, {n} estimate columns and the 367/850 vs 390/850 comparison need the raw data; fixtures load and their computational path checks out"
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("equilibrium conditions", criterion_1),
        ("decision table", criterion_2),
        ("Monte Carlo recovery", criterion_3),
        ("information criteria", criterion_4),
        ("likelihood oracle", criterion_5),
        ("uniform baseline", criterion_6),
        ("conditional-cooperator pattern", criterion_7),
        ("statistical tests", criterion_8),
        ("property suite", criterion_9),
        ("declared data-dependent targets", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} ({name}, {secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}, {secs:.2}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
