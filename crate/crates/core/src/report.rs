//! Report bundle: delimited text files plus a plot-ready long-format data
//! file, regenerated deterministically from an [`AnalysisReport`].
//!
//! Files and column orders (comma-separated, header row, UTF-8):
//! - `choice_rates.csv`: option_index,label,pooled_rate,se,n_runs,runs_excluded
//! - `choice_rates_long.csv`: condition,agent,run,option_index,label,rate
//! - `contrast.csv`: n_runs,runs_excluded,mean,sd,t,df,p,cohen_d,stars,verdict
//! - `diagnostic_pairs.csv`: pair,k,n,proportion,z,p,stars
//! - `learning_curves.csv`: context,repetition,accuracy,se,n_runs

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::AnalysisReport;
use crate::error::AnalysisError;
use crate::stats::{significance_stars, OneSampleT};
use crate::task::build_task_spec;

fn fmt_f(value: f64) -> String {
    if value.is_nan() {
        "NA".to_string()
    } else {
        format!("{value:.6}")
    }
}

fn fmt_p(p: f64) -> String {
    if p.is_nan() {
        "NA".to_string()
    } else if p < 1e-4 {
        format!("{p:.3e}")
    } else {
        format!("{p:.6}")
    }
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), AnalysisError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| AnalysisError::ReportIo {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes the full bundle into `dir` (created if absent).
pub fn write_report_bundle(report: &AnalysisReport, dir: &Path) -> Result<(), AnalysisError> {
    fs::create_dir_all(dir).map_err(|e| AnalysisError::ReportIo {
        path: dir.display().to_string(),
        source: e,
    })?;

    let mut rates = String::from("option_index,label,pooled_rate,se,n_runs,runs_excluded\n");
    for pooled in &report.rates.pooled {
        writeln!(
            rates,
            "{},{},{},{},{},{}",
            pooled.option_index,
            pooled.label,
            fmt_f(pooled.mean),
            fmt_f(pooled.se),
            pooled.n_runs,
            pooled.runs_excluded
        )
        .unwrap();
    }
    write_file(dir, "choice_rates.csv", &rates)?;

    let spec = build_task_spec();
    let mut long = String::from("condition,agent,run,option_index,label,rate\n");
    for run in &report.rates.per_run {
        for option_index in 0..8 {
            writeln!(
                long,
                "{},{},{},{},{},{}",
                run.condition,
                run.agent_label,
                run.run_index,
                option_index,
                spec.option(option_index).label(),
                run.rate(option_index).map_or("NA".to_string(), fmt_f)
            )
            .unwrap();
        }
    }
    write_file(dir, "choice_rates_long.csv", &long)?;

    let mut contrast = String::from("n_runs,runs_excluded,mean,sd,t,df,p,cohen_d,stars,verdict\n");
    match &report.contrast.test {
        OneSampleT::Test(test) => {
            let verdict = if test.p < 0.05 {
                if test.mean > 0.0 {
                    "absolute-consistent"
                } else {
                    "relative-consistent"
                }
            } else {
                "not-significant"
            };
            writeln!(
                contrast,
                "{},{},{},{},{},{},{},{},{},{}",
                test.n,
                report.contrast.runs_excluded,
                fmt_f(test.mean),
                fmt_f(test.sd),
                fmt_f(test.t),
                test.df,
                fmt_p(test.p),
                fmt_f(test.cohen_d),
                significance_stars(test.p),
                verdict
            )
            .unwrap();
        }
        OneSampleT::Degenerate { n, mean } => {
            writeln!(
                contrast,
                "{},{},{},NA,NA,NA,NA,NA,,degenerate",
                n,
                report.contrast.runs_excluded,
                fmt_f(*mean)
            )
            .unwrap();
        }
    }
    write_file(dir, "contrast.csv", &contrast)?;

    let mut diagnostics = String::from("pair,k,n,proportion,z,p,stars\n");
    for pair in &report.diagnostics {
        match &pair.test {
            Some(test) => writeln!(
                diagnostics,
                "{},{},{},{},{},{},{}",
                pair.name,
                pair.k,
                pair.n,
                fmt_f(test.proportion),
                fmt_f(test.z),
                fmt_p(test.p),
                pair.stars
            )
            .unwrap(),
            None => writeln!(diagnostics, "{},0,0,NA,NA,NA,", pair.name).unwrap(),
        }
    }
    write_file(dir, "diagnostic_pairs.csv", &diagnostics)?;

    let mut curves = String::from("context,repetition,accuracy,se,n_runs\n");
    for point in &report.curves {
        writeln!(
            curves,
            "{},{},{},{},{}",
            point.context_index,
            point.repetition,
            fmt_f(point.accuracy),
            fmt_f(point.se),
            point.n_runs
        )
        .unwrap();
    }
    write_file(dir, "learning_curves.csv", &curves)
}

/// Human-readable summary: the contrast line with stars and the six
/// diagnostic proportions.
pub fn summary_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "condition: {}  agent: {}  runs: {}",
        report.conditions.join("+"),
        report.agents.join("+"),
        report.n_runs
    )
    .unwrap();

    out.push_str("transfer choice rates (pooled):\n");
    for pooled in &report.rates.pooled {
        writeln!(
            out,
            "  {:<4} {}  (se {}, n {})",
            pooled.label,
            fmt_f(pooled.mean),
            fmt_f(pooled.se),
            pooled.n_runs
        )
        .unwrap();
    }

    match &report.contrast.test {
        OneSampleT::Test(test) => writeln!(
            out,
            "contrast: {}{}  t({}) = {}, p = {}, d = {}",
            fmt_f(test.mean),
            significance_stars(test.p),
            test.df,
            fmt_f(test.t),
            fmt_p(test.p),
            fmt_f(test.cohen_d)
        )
        .unwrap(),
        OneSampleT::Degenerate { n, mean } => writeln!(
            out,
            "contrast: {} (degenerate: no variance across {} runs)",
            fmt_f(*mean),
            n
        )
        .unwrap(),
    }

    out.push_str("diagnostic pairs (proportion choosing the higher-mean L option):\n");
    for pair in &report.diagnostics {
        match &pair.test {
            Some(test) => writeln!(
                out,
                "  {:<12} {}{}  ({}/{}, z = {}, p = {})",
                pair.name,
                fmt_f(test.proportion),
                pair.stars,
                pair.k,
                pair.n,
                fmt_f(test.z),
                fmt_p(test.p)
            )
            .unwrap(),
            None => writeln!(out, "  {:<12} no valid trials", pair.name).unwrap(),
        }
    }
    out
}
