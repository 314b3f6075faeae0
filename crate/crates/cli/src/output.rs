//! Report and plot-data emission. Writes are atomic (temp file + rename)
//! and a failed run removes everything it already wrote, so no partial
//! outputs survive.

use anyhow::{Context, Result};
use foreval::inference::EvaluationReport;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// One row of `plots/risk.csv`.
pub struct RiskRow {
    pub predictor: String,
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// One row of `plots/bias.csv`.
pub struct BiasRow {
    pub label: String,
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub significant: bool,
}

pub fn risk_csv(rows: &[RiskRow]) -> String {
    let mut out = String::from("predictor,mean,ci_lower,ci_upper\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.predictor, row.mean, row.ci_lower, row.ci_upper
        ));
    }
    out
}

pub fn bias_csv(rows: &[BiasRow]) -> String {
    let mut out = String::from("label,mean,ci_lower,ci_upper,significant\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.label, row.mean, row.ci_lower, row.ci_upper, row.significant
        ));
    }
    out
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let mut staged = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("staging file in {}", dir.display()))?;
    staged
        .write_all(contents.as_bytes())
        .with_context(|| format!("writing staged contents for {}", path.display()))?;
    staged
        .persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Write `report.json` plus the `plots/` CSV series under `out_dir`.
pub fn write_outputs(
    out_dir: &Path,
    report: &EvaluationReport,
    risk_rows: &[RiskRow],
    bias_rows: &[BiasRow],
) -> Result<()> {
    let plots = out_dir.join("plots");
    fs::create_dir_all(&plots).with_context(|| format!("creating {}", plots.display()))?;

    let report_json =
        serde_json::to_string_pretty(report).context("serializing the report")?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<()> {
        let report_path = out_dir.join("report.json");
        write_atomic(&report_path, &format!("{report_json}\n"))?;
        written.push(report_path);
        let risk_path = plots.join("risk.csv");
        write_atomic(&risk_path, &risk_csv(risk_rows))?;
        written.push(risk_path);
        let bias_path = plots.join("bias.csv");
        write_atomic(&bias_path, &bias_csv(bias_rows))?;
        written.push(bias_path);
        Ok(())
    })();
    if result.is_err() {
        for path in written {
            let _ = fs::remove_file(path);
        }
    }
    result
}

/// Human-readable table of a report, for the `report` subcommand.
pub fn render_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "study: {}  eb: {}  loss: {}  samples: {}  seed: {}\n",
        report
            .entries
            .first()
            .map(|e| e.study.as_str())
            .unwrap_or("-"),
        report.eb_kind,
        report.loss,
        report.n_samples,
        report.seed
    ));
    if let Some(rate) = report.variance_floor_hit_rate {
        out.push_str(&format!("variance floor hit rate: {rate:.6}\n"));
    }
    out.push_str(&format!(
        "{:<40} {:>12} {:>12} {:>12} {:>8}\n",
        "estimand", "mean", "ci_lower", "ci_upper", "p"
    ));
    for entry in &report.entries {
        let flag = match entry.significant {
            Some(true) => " *",
            _ => "",
        };
        out.push_str(&format!(
            "{:<40} {:>12.4} {:>12.4} {:>12.4} {:>8.4}{}\n",
            entry.estimand, entry.mean, entry.ci_lower, entry.ci_upper, entry.p_value, flag
        ));
    }
    out
}
