use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::to_db;
use crate::harness::config::OutputKind;
use crate::harness::engine::{Experiment, SteadyBounds};
use crate::theory::TheoryParams;

pub const CSV_HEADER: [&str; 6] = ["iteration", "algorithm", "msd_db", "mse", "alpha_k", "lambda_k"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn cell(enabled: bool, v: f64) -> String {
    if enabled {
        v.to_string()
    } else {
        String::new()
    }
}

/// One row per (algorithm, iteration), curves in configuration order.
/// Iterations are 1-based. The `theory_msd_db` column appears when the
/// experiment carries an overlay and is filled on the modelled entry's
/// rows only.
pub fn write_csv(exp: &Experiment, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if exp.overlay.is_some() {
        header.push("theory_msd_db");
    }
    w.write_record(&header).map_err(csv_err(path))?;

    let outs = &exp.config.outputs;
    let (msd_on, mse_on, alpha_on, lambda_on) = (
        outs.contains(&OutputKind::MsdCurve),
        outs.contains(&OutputKind::MseCurve),
        outs.contains(&OutputKind::AlphaCurve),
        outs.contains(&OutputKind::LambdaCurve),
    );
    for curve in &exp.curves {
        let theory = exp.overlay.as_ref().filter(|o| o.label == curve.label);
        for k in 0..curve.msd.len() {
            let mut row = vec![
                (k + 1).to_string(),
                curve.label.clone(),
                cell(msd_on, curve.msd_db[k]),
                cell(mse_on, curve.mse[k]),
                cell(alpha_on, curve.alpha_k[k]),
                cell(lambda_on, curve.lambda_k[k]),
            ];
            if let Some(o) = &exp.overlay {
                row.push(match theory {
                    Some(_) => to_db(o.msd[k + 1]).to_string(),
                    None => String::new(),
                });
            }
            w.write_record(&row).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveSummary {
    pub label: String,
    pub rule: String,
    pub valid: bool,
    pub trials: usize,
    pub diverged_trials: usize,
    pub steady_msd_db: f64,
    pub steady_msd: f64,
    pub steady_msd_stderr: f64,
    pub steady_mse: f64,
    pub steady_excess_mse: f64,
    pub final_alpha_k: f64,
    pub final_lambda_k: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheorySummary {
    pub label: String,
    pub params: TheoryParams,
    pub model_diverged_at: Option<usize>,
    pub final_msd_db: f64,
    /// g/(1−f) fixed point.
    pub steady_msd_db_fixed_point: Option<f64>,
    /// The printed closed form.
    pub steady_msd_db_closed_form: Option<f64>,
    pub steady_mse: Option<f64>,
    pub mean_stability_bound: Option<f64>,
    #[serde(flatten)]
    pub bounds: SteadyBounds,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub description: String,
    pub seed: u64,
    pub trials: usize,
    pub iterations: usize,
    pub steady_window: usize,
    pub noise_variance: f64,
    pub curves: Vec<CurveSummary>,
    pub theory: Option<TheorySummary>,
}

impl Summary {
    pub fn from_experiment(exp: &Experiment) -> Self {
        let cfg = &exp.config;
        let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
        let curves = exp
            .curves
            .iter()
            .map(|c| CurveSummary {
                label: c.label.clone(),
                rule: c.rule.to_string(),
                valid: c.is_valid(),
                trials: c.trials,
                diverged_trials: c.diverged_trials,
                steady_msd_db: c.steady_msd_db(),
                steady_msd: c.steady_msd(),
                steady_msd_stderr: c.steady_msd_stderr(),
                steady_mse: c.steady_mse(),
                steady_excess_mse: c.steady_excess_mse(),
                final_alpha_k: last(&c.alpha_k),
                final_lambda_k: last(&c.lambda_k),
            })
            .collect();
        let theory = exp.overlay.as_ref().map(|o| TheorySummary {
            label: o.label.clone(),
            params: o.params,
            model_diverged_at: o.diverged_at,
            final_msd_db: to_db(last(&o.msd)),
            steady_msd_db_fixed_point: o.fixed_point.map(|s| to_db(s.msd)),
            steady_msd_db_closed_form: o.closed_form.map(|s| to_db(s.msd)),
            steady_mse: o.fixed_point.map(|s| s.mse),
            mean_stability_bound: o.mean_bound,
            bounds: o.bounds,
        });
        Self {
            name: cfg.name.clone(),
            description: cfg.description.clone(),
            seed: cfg.seed.0,
            trials: cfg.trials,
            iterations: cfg.iterations,
            steady_window: crate::harness::engine::steady_window(cfg.iterations),
            noise_variance: exp.noise_variance,
            curves,
            theory,
        }
    }
}

pub fn write_summary(exp: &Experiment, path: &Path) -> Result<Summary> {
    let summary = Summary::from_experiment(exp);
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))?;
    Ok(summary)
}

/// Writes `<name>.csv` and `<name>.json` under `dir`, creating it.
pub fn write_experiment(exp: &Experiment, dir: &Path) -> Result<Summary> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_csv(exp, &dir.join(format!("{}.csv", exp.config.name)))?;
    write_summary(exp, &dir.join(format!("{}.json", exp.config.name)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::preset;
    use crate::harness::engine::run_experiment;

    #[test]
    fn csv_schema_and_row_count() {
        let cfg = preset(1).unwrap().with_overrides(Some(2), Some(50), None).unwrap();
        let exp = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let summary = write_experiment(&exp, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("figure1.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iteration,algorithm,msd_db,mse,alpha_k,lambda_k,theory_msd_db"
        );
        assert_eq!(lines.count(), 50);
        assert!(summary.theory.unwrap().steady_msd_db_fixed_point.is_some());
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("figure1.json")).unwrap()).unwrap();
        assert_eq!(json["curves"][0]["label"], "NCLMAT");
    }

    #[test]
    fn csv_without_overlay_has_base_header() {
        let cfg = preset(4).unwrap().with_overrides(Some(1), Some(20), None).unwrap();
        let exp = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_csv(&exp, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(text.lines().count(), 1 + 3 * 20);
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let cfg = preset(1).unwrap().with_overrides(Some(1), Some(5), None).unwrap();
        let exp = run_experiment(&cfg).unwrap();
        let err = write_csv(&exp, Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
