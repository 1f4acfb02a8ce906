//! Side-by-side runs of configs that differ only in their combiner.

use std::path::Path;

use crate::config::{ExperimentConfig, ResolvedConfig};
use crate::error::{AppError, Result};
use crate::harness::{run_ensemble, CurveSet, Execution};
use crate::output::{format_float, Table};

pub const COMPARE_FILE: &str = "compare.csv";

/// Fraction of the rise from start to final value that counts as converged.
pub const RISE_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareEntry {
    pub name: String,
    pub algorithm: String,
    pub mu: f64,
    pub u: Option<f64>,
    pub final_window_mse: f64,
    pub iterations_to_90pct: Option<usize>,
}

/// Rows whose `t` lies in the last tenth of the horizon.
pub fn final_window(curves: &CurveSet, horizon: usize) -> std::ops::Range<usize> {
    let start_t = horizon - (horizon / 10).max(1);
    let first = curves
        .t
        .iter()
        .position(|&t| t >= start_t)
        .unwrap_or(curves.rows().saturating_sub(1));
    first..curves.rows()
}

/// Mean of `series` over the final window.
pub fn final_window_mean(curves: &CurveSet, horizon: usize, series: impl Fn(usize) -> f64) -> f64 {
    let w = final_window(curves, horizon);
    let n = w.len() as f64;
    w.map(series).sum::<f64>() / n
}

/// First `t` at which `series` has covered 90% of the way from its initial
/// value to its final-window mean. `None` if it never does or does not move.
pub fn rise_time(
    curves: &CurveSet,
    horizon: usize,
    series: impl Fn(usize) -> f64,
) -> Option<usize> {
    let start = series(0);
    let end = final_window_mean(curves, horizon, &series);
    let span = end - start;
    if span == 0.0 || span.is_nan() {
        return None;
    }
    (0..curves.rows())
        .find(|&r| (series(r) - start) / span >= RISE_FRACTION)
        .map(|r| curves.t[r])
}

pub fn summarize(name: &str, rc: &ResolvedConfig, curves: &CurveSet) -> CompareEntry {
    let horizon = rc.config.horizon;
    CompareEntry {
        name: name.to_string(),
        algorithm: rc.algorithm.to_string(),
        mu: rc.config.mixture.mu,
        u: rc.config.mixture.u,
        final_window_mse: final_window_mean(curves, horizon, |r| curves.mse_mixture[r]),
        iterations_to_90pct: rise_time(curves, horizon, |r| curves.mean_weights[r][0]),
    }
}

/// Configs are comparable when everything outside the mixture, theory and
/// output sections resolves identically.
pub fn check_comparable(configs: &[(String, ResolvedConfig)]) -> Result<()> {
    if configs.len() < 2 {
        return Err(AppError::NotComparable("need at least two configs".into()));
    }
    let key = |rc: &ResolvedConfig| {
        let mut c: ExperimentConfig = rc.echo();
        c.mixture = configs[0].1.config.mixture.clone();
        c.theory = Default::default();
        c.output = Default::default();
        c
    };
    let reference = key(&configs[0].1);
    for (name, rc) in &configs[1..] {
        let c = key(rc);
        let what = if c.signal != reference.signal {
            Some("signal")
        } else if c.constituents != reference.constituents {
            Some("constituents")
        } else if c.horizon != reference.horizon {
            Some("horizon")
        } else if c.runs != reference.runs {
            Some("runs")
        } else if c.seed != reference.seed {
            Some("seed")
        } else {
            None
        };
        if let Some(what) = what {
            return Err(AppError::NotComparable(format!(
                "{name} differs from {} in {what}",
                configs[0].0
            )));
        }
    }
    Ok(())
}

pub fn compare_table(entries: &[CompareEntry]) -> Table {
    Table {
        header: [
            "name",
            "algorithm",
            "mu",
            "u",
            "final_window_mse",
            "iterations_to_90pct",
        ]
        .map(String::from)
        .into(),
        rows: entries
            .iter()
            .map(|e| {
                vec![
                    e.name.clone(),
                    e.algorithm.clone(),
                    format_float(e.mu),
                    e.u.map(format_float).unwrap_or_default(),
                    format_float(e.final_window_mse),
                    e.iterations_to_90pct
                        .map(|n| n.to_string())
                        .unwrap_or_default(),
                ]
            })
            .collect(),
    }
}

/// Indices ordered fastest first, ties broken by lower final MSE.
pub fn ranking(entries: &[CompareEntry]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..entries.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ea, eb) = (&entries[a], &entries[b]);
        let ia = ea.iterations_to_90pct.unwrap_or(usize::MAX);
        let ib = eb.iterations_to_90pct.unwrap_or(usize::MAX);
        ia.cmp(&ib)
            .then(ea.final_window_mse.total_cmp(&eb.final_window_mse))
    });
    idx
}

/// Loads, checks, runs every config and writes `compare.csv` into `out`.
pub fn compare_paths(paths: &[&Path], out: &Path, exec: Execution) -> Result<Vec<CompareEntry>> {
    let mut configs = Vec::new();
    for p in paths {
        let name = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        configs.push((name, ExperimentConfig::from_path(p)?.resolve()?));
    }
    compare_resolved(&configs, out, exec)
}

pub fn compare_resolved(
    configs: &[(String, ResolvedConfig)],
    out: &Path,
    exec: Execution,
) -> Result<Vec<CompareEntry>> {
    check_comparable(configs)?;
    let mut entries = Vec::new();
    for (name, rc) in configs {
        let curves = run_ensemble(rc, exec)?;
        entries.push(summarize(name, rc, &curves));
    }
    std::fs::create_dir_all(out).map_err(AppError::io(out))?;
    compare_table(&entries).write(&out.join(COMPARE_FILE))?;
    Ok(entries)
}
