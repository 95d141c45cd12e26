use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use seqpd::config::StudyConfig;
use seqpd::estimate::report::align;
use seqpd::estimate::{fit_mixture, render_estimates, EstimateResult};
use seqpd::game::{
    equilibrium_condition_general, equilibrium_condition_gl, rational_from_f64, EquilibriumCheck,
    GameConfig, Tokens,
};
use seqpd::io::{
    choices_to_csv, load_choices, plays_csv, rate_table_csv, save_json, save_types, series_csv,
    to_json, write_file, ResultsFile,
};
use seqpd::kernels::CondCoopSpec;
use seqpd::recovery::{render_recovery, run_recovery};
use seqpd::sim::{simulate_session, ChoiceData};
use seqpd::stats::{self, Description, HotColdReport, McNemarResult, McNemarVariant, RateTable};
use seqpd::{Error, Result};

use crate::{Common, Format, Variant};

fn load_config(common: &Common) -> Result<StudyConfig> {
    let mut cfg = match &common.config {
        Some(path) => StudyConfig::load(path)?,
        None => StudyConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn print(text: &str) {
    print!("{text}");
}

fn emit(common: &Common, text: &str, value: &Value) -> Result<()> {
    match common.format {
        Format::Text => print(text),
        Format::Json => print(&to_json(value)?),
    }
    Ok(())
}

fn out_file(common: &Common, name: &str) -> Option<PathBuf> {
    common.out.as_ref().map(|d| d.join(name))
}

fn ratio(r: &Tokens) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn check_json(c: &EquilibriumCheck) -> Value {
    json!({
        "threshold": c.threshold.to_string(),
        "threshold_value": ratio(&c.threshold),
        "holds": c.holds,
    })
}

fn pass(holds: bool) -> &'static str {
    if holds {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn equilibrium(
    common: &Common,
    sweep: bool,
    ns: &[usize],
    ms: &[usize],
    gs: &[f64],
) -> Result<()> {
    let cfg = load_config(common)?;
    let game = cfg.game()?;
    let gl = game.payoffs.normalized()?;
    if sweep {
        return equilibrium_sweep(common, &game, ns, ms, gs);
    }
    let tokens = equilibrium_condition_general(&game)?;
    let normalized = equilibrium_condition_gl(game.n, game.m, gl.g)?;
    let [t, r, p, s] = game.payoffs.to_f64();
    let mut text = format!("game n={} m={} T={t} R={r} P={p} S={s}\n", game.n, game.m);
    let _ = writeln!(
        text,
        "T threshold {:.3}: {}",
        ratio(&tokens.threshold),
        pass(tokens.holds)
    );
    let _ = writeln!(
        text,
        "g={} threshold {:.3}: {}",
        gl.g,
        ratio(&normalized.threshold),
        pass(normalized.holds)
    );
    let value = json!({
        "n": game.n,
        "m": game.m,
        "payoffs": {"T": t, "R": r, "P": p, "S": s},
        "g": gl.g.to_string(),
        "l": gl.l.to_string(),
        "tokens": check_json(&tokens),
        "normalized": check_json(&normalized),
    });
    if let Some(path) = out_file(common, "equilibrium.json") {
        save_json(&value, &path)?;
    }
    emit(common, &text, &value)
}

fn equilibrium_sweep(
    common: &Common,
    game: &GameConfig,
    ns: &[usize],
    ms: &[usize],
    gs: &[f64],
) -> Result<()> {
    let ns = if ns.is_empty() {
        vec![game.n]
    } else {
        ns.to_vec()
    };
    let gs = if gs.is_empty() {
        vec![ratio(&game.payoffs.normalized()?.g)]
    } else {
        gs.to_vec()
    };
    let mut rows = Vec::new();
    for &n in &ns {
        let m_grid: Vec<usize> = if ms.is_empty() {
            (1..=n.saturating_sub(2)).collect()
        } else {
            ms.to_vec()
        };
        for &m in &m_grid {
            for &g in &gs {
                let c = equilibrium_condition_gl(n, m, rational_from_f64(g)?)?;
                rows.push((n, m, g, c));
            }
        }
    }
    let mut text = String::from("n,m,g,threshold,holds\n");
    for (n, m, g, c) in &rows {
        let _ = writeln!(text, "{n},{m},{g},{:.6},{}", ratio(&c.threshold), c.holds);
    }
    let value = Value::Array(
        rows.iter()
            .map(|(n, m, g, c)| json!({"n": n, "m": m, "g": g, "check": check_json(c)}))
            .collect(),
    );
    if let Some(path) = out_file(common, "equilibrium_sweep.csv") {
        write_file(&path, text.as_bytes())?;
    }
    emit(common, &text, &value)
}

pub fn simulate(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let out = common
        .out
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("simulate needs --out".into()))?;
    let session = simulate_session(&cfg.sim_config()?)?;
    let data = session.export();
    let choices = out.join("choices.csv");
    write_file(&choices, choices_to_csv(&data)?.as_bytes())?;
    let types = out.join("types.csv");
    save_types(&session.truth(), &types)?;
    let plays = out.join("plays.csv");
    write_file(&plays, plays_csv(&session.plays)?.as_bytes())?;
    let text = format!(
        "wrote {} choices for {} subjects over {} rounds to {}\n",
        data.len(),
        cfg.subjects,
        cfg.rounds,
        choices.display()
    );
    let value = json!({
        "records": data.len(),
        "subjects": cfg.subjects,
        "rounds": cfg.rounds,
        "seed": cfg.seed,
        "files": [choices, types, plays],
    });
    emit(common, &text, &value)
}

fn load_data(cfg: &StudyConfig, path: &Path) -> Result<ChoiceData> {
    load_choices(path, &cfg.game()?)
}

pub fn estimate(common: &Common, data: &Path, specs: &[String]) -> Result<()> {
    let cfg = load_config(common)?;
    let data = load_data(&cfg, data)?;
    let model = cfg.choice_model()?;
    let specs: Vec<CondCoopSpec> = if specs.is_empty() {
        vec![cfg.condcoop]
    } else {
        specs
            .iter()
            .map(|s| {
                CondCoopSpec::parse(s)
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown specification {s:?}")))
            })
            .collect::<Result<_>>()?
    };
    let mut fits: Vec<EstimateResult> = Vec::new();
    for spec in &specs {
        let es = seqpd::estimate::EstimationSpec {
            spec: *spec,
            ..cfg.estimation_spec()
        };
        fits.push(fit_mixture(&data, &model, &es)?);
    }
    let files: Vec<ResultsFile> = fits.iter().map(ResultsFile::from).collect();
    if let Some(dir) = &common.out {
        if files.len() == 1 {
            save_json(&files[0], &dir.join("results.json"))?;
        } else {
            for f in &files {
                save_json(f, &dir.join(format!("results_{}.json", f.spec.as_str())))?;
            }
        }
    }
    let refs: Vec<&EstimateResult> = fits.iter().collect();
    let mut text = render_estimates(&refs);
    for (i, f) in fits.iter().enumerate() {
        let _ = writeln!(
            text,
            "({}) {}: {}/{} restarts converged{}",
            i + 1,
            f.spec,
            f.diagnostics.converged,
            f.diagnostics.restarts,
            if f.diagnostics.boundary.is_empty() {
                String::new()
            } else {
                format!(", at a bound: {}", f.diagnostics.boundary.join(", "))
            }
        );
    }
    let value = if files.len() == 1 {
        serde_json::to_value(&files[0])?
    } else {
        serde_json::to_value(&files)?
    };
    emit(common, &text, &value)
}

pub fn recover(common: &Common, iterations: Option<usize>) -> Result<()> {
    let cfg = load_config(common)?;
    let mut rc = cfg.recovery_config()?;
    if let Some(it) = iterations {
        rc.iterations = it;
    }
    let (outcomes, summary) = run_recovery(&rc)?;
    let mut text = render_recovery(&summary);
    for (i, msg) in &summary.failures {
        let _ = writeln!(text, "iteration {i}: {msg}");
    }
    let value = json!({"summary": summary, "iterations": outcomes});
    if let Some(path) = out_file(common, "recovery.json") {
        save_json(&value, &path)?;
    }
    emit(common, &text, &value)
}

fn rate_text(title: &str, t: &RateTable) -> String {
    format!("{title}\n{}", align(&t.to_rows()))
}

fn mcnemar_text(label: &str, r: &McNemarResult) -> String {
    let stat = match r.variant {
        McNemarVariant::Corrected => format!("chi2={:.4}", r.statistic),
        McNemarVariant::Exact => format!("min(b,c)={}", r.statistic),
    };
    format!(
        "{label}: McNemar ({}) b={} c={} {stat} p={:.4}{}\n",
        r.variant.as_str(),
        r.b,
        r.c,
        r.p_value,
        if r.degenerate {
            " (no discordant pairs)"
        } else {
            ""
        }
    )
}

fn hot_cold_text(r: &HotColdReport) -> String {
    let rate = |c: &stats::Cell| {
        c.rate()
            .map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
    };
    let mut s = format!(
        "part 1 (strategy) C rate {} ({}/{})\npart 3 (direct) C rate {} ({}/{})\n",
        rate(&r.cold),
        r.cold.coop,
        r.cold.total,
        rate(&r.hot),
        r.hot.coop,
        r.hot.total
    );
    s.push_str(&mcnemar_text("part 1 vs part 3", &r.mcnemar));
    s.push_str(&mcnemar_text("part 1 vs part 3", &r.mcnemar_exact));
    if r.unmatched > 0 {
        let _ = writeln!(
            s,
            "{} part-3 decisions had no part-1 answer for their scenario",
            r.unmatched
        );
    }
    s
}

fn describe_text(d: &Description) -> String {
    let mut s = String::new();
    if let Some(t) = &d.strategy_rates {
        s.push_str(&rate_text("Cooperation rates, strategy method (part 1)", t));
    }
    if let Some(t) = &d.direct_rates {
        if !s.is_empty() {
            s.push('\n');
        }
        s.push_str(&rate_text("Cooperation rates, direct play (part 3)", t));
    }
    if !d.binomial.is_empty() {
        s.push('\n');
    }
    for b in &d.binomial {
        let _ = writeln!(
            s,
            "{}: exact binomial {}/{} against rate {:.3}, one-sided p={:.4}",
            b.label, b.coop, b.total, b.null_rate, b.p_value
        );
    }
    for p in &d.paired {
        s.push_str(&mcnemar_text(
            &format!("{} ({} profiles)", p.label, p.pairs),
            &p.result,
        ));
    }
    if let Some(h) = &d.hot_cold {
        s.push('\n');
        s.push_str(&hot_cold_text(h));
    }
    s
}

pub fn describe(common: &Common, data: &Path, variant: Variant) -> Result<()> {
    let cfg = load_config(common)?;
    let data = load_data(&cfg, data)?;
    let variant = match variant {
        Variant::Corrected => McNemarVariant::Corrected,
        Variant::Exact => McNemarVariant::Exact,
    };
    let d = stats::describe(&data, variant)?;
    if let Some(dir) = &common.out {
        if let Some(t) = &d.strategy_rates {
            write_file(&dir.join("rates_part1.csv"), rate_table_csv(t)?.as_bytes())?;
        }
        if let Some(t) = &d.direct_rates {
            write_file(&dir.join("rates_part3.csv"), rate_table_csv(t)?.as_bytes())?;
        }
        save_json(&d, &dir.join("describe.json"))?;
    }
    emit(common, &describe_text(&d), &serde_json::to_value(&d)?)
}

pub fn realize(common: &Common, data: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let game = cfg.game()?;
    let data = load_data(&cfg, data)?;
    let plays = stats::realize_strategy_groups(&data, &game)?;
    let csv = plays_csv(&plays)?;
    if let Some(path) = out_file(common, "realized.csv") {
        write_file(&path, csv.as_bytes())?;
    }
    emit(common, &csv, &serde_json::to_value(&plays)?)
}

pub fn compare_methods(common: &Common, paths: &[PathBuf]) -> Result<()> {
    let cfg = load_config(common)?;
    let mut records = Vec::new();
    for p in paths {
        records.extend(load_data(&cfg, p)?.records);
    }
    let data = ChoiceData {
        group_size: cfg.n,
        records,
    };
    let (p1, p3) = (data.part(1), data.part(3));
    if p1.is_empty() || p3.is_empty() {
        return Err(Error::Data(
            "compare-methods needs part-1 and part-3 records".into(),
        ));
    }
    let report = stats::hot_vs_cold(&p1, &p3)?;
    if let Some(path) = out_file(common, "hot_cold.json") {
        save_json(&report, &path)?;
    }
    emit(
        common,
        &hot_cold_text(&report),
        &serde_json::to_value(&report)?,
    )
}

pub fn plot_data(common: &Common, data: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let game = cfg.game()?;
    let data = load_data(&cfg, data)?;
    let points = stats::rates_by_round(&data, &game)?;
    let csv = series_csv(&points)?;
    if let Some(path) = out_file(common, "plot_data.csv") {
        write_file(&path, csv.as_bytes())?;
    }
    emit(common, &csv, &serde_json::to_value(&points)?)
}
