//! Plain-text rendering of one or more fits side by side.

use statrs::function::erf::erfc;

use super::fit::EstimateResult;

const ROWS: [&str; 10] = [
    "pi_gm", "pi_coop", "pi_free", "pi_alt", "sigma", "rho", "gamma", "delta", "beta", "omega",
];

/// Two-sided normal p-value of `estimate / se`.
pub fn wald_p_value(estimate: f64, se: f64) -> f64 {
    erfc((estimate / se).abs() / std::f64::consts::SQRT_2)
}

/// `***` below 0.01, `**` below 0.05, `*` below 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn lookup(r: &EstimateResult, name: &str) -> Option<(f64, Option<f64>)> {
    let i = r.names().iter().position(|n| *n == name)?;
    Some((r.estimates[i], r.std_errors[i]))
}

/// One column per fit: estimates with significance stars, standard errors
/// in parentheses beneath, then LL, AIC, BIC and the observation count.
pub fn render_estimates(results: &[&EstimateResult]) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["Parameter".to_string()];
    header.extend((1..=results.len()).map(|i| format!("({i})")));
    rows.push(header);
    for name in ROWS {
        if results.iter().all(|r| lookup(r, name).is_none()) {
            continue;
        }
        let mut est = vec![name.to_string()];
        let mut se = vec!["s.e.".to_string()];
        for r in results {
            match lookup(r, name) {
                Some((v, s)) => {
                    let mark = s
                        .filter(|s| *s > 0.0)
                        .map_or("", |s| stars(wald_p_value(v, s)));
                    est.push(format!("{v:.3}{mark}"));
                    se.push(s.map_or_else(|| "(-)".to_string(), |s| format!("({s:.3})")));
                }
                None => {
                    est.push("-".into());
                    se.push("-".into());
                }
            }
        }
        rows.push(est);
        rows.push(se);
    }
    type Footer = (&'static str, fn(&EstimateResult) -> String);
    let footer: [Footer; 4] = [
        ("LL", |r| format!("{:.3}", r.ll)),
        ("AIC", |r| format!("{:.3}", r.aic)),
        ("BIC", |r| format!("{:.3}", r.bic)),
        ("Obs", |r| r.n_obs.to_string()),
    ];
    for (label, f) in footer {
        let mut row = vec![label.to_string()];
        row.extend(results.iter().map(|r| f(r)));
        rows.push(row);
    }
    align(&rows)
}

/// Left-aligns the first column and right-aligns the rest.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(String::len)
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
