//! CSV curves and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ResolvedConfig};
use crate::error::{AppError, Result};
use crate::harness::CurveSet;

pub const MSE_FILE: &str = "mse.csv";
pub const WEIGHTS_MEAN_FILE: &str = "weights_mean.csv";
pub const WEIGHTS_MOMENT_FILE: &str = "weights_moment.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Round-trip exact, locale independent, `NaN` for missing values.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// One CSV table held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, t: usize, values: impl IntoIterator<Item = String>) {
        let mut row = vec![t.to_string()];
        row.extend(values);
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let csv_err = |source| AppError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_path(path)
            .map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(AppError::io(path))?;
        Ok(())
    }
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn floats<'a>(v: impl IntoIterator<Item = &'a f64> + 'a) -> impl Iterator<Item = String> + 'a {
    v.into_iter().map(|x| format_float(*x))
}

pub fn mse_table(c: &CurveSet) -> Table {
    let m = c.mse_constituents.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string(), "mse_mixture".to_string()];
    header.extend(numbered("mse_c", m));
    if c.theory.is_some() {
        header.push("mse_theory".into());
    }
    let mut table = Table::new(header);
    for r in 0..c.rows() {
        let mut vals: Vec<String> = vec![format_float(c.mse_mixture[r])];
        vals.extend(floats(&c.mse_constituents[r]));
        if let Some(th) = &c.theory {
            vals.push(format_float(th.mse[r]));
        }
        table.push(c.t[r], vals);
    }
    table
}

pub fn weights_mean_table(c: &CurveSet) -> Table {
    let dim = c.mean_state.first().map_or(0, Vec::len);
    let m = c.mean_weights.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend(numbered("qa_", dim));
    header.extend(numbered("w_", m));
    if c.theory.is_some() {
        header.extend(numbered("theory_qa_", dim));
        header.extend(numbered("theory_w_", m));
    }
    let mut table = Table::new(header);
    for r in 0..c.rows() {
        let mut vals: Vec<String> = floats(&c.mean_state[r])
            .chain(floats(&c.mean_weights[r]))
            .collect();
        if let Some(th) = &c.theory {
            vals.extend(floats(&th.mean_state[r]));
            vals.extend(floats(&th.mean_weights[r]));
        }
        table.push(c.t[r], vals);
    }
    table
}

/// `entries` are zero-based; headers are one-based.
pub fn weights_moment_table(c: &CurveSet, entries: &[(usize, usize)]) -> Table {
    let mut header = vec!["t".to_string()];
    for (i, j) in entries {
        header.push(format!("Qa_{}_{}", i + 1, j + 1));
        if c.theory.is_some() {
            header.push(format!("theory_Qa_{}_{}", i + 1, j + 1));
        }
    }
    let mut table = Table::new(header);
    for r in 0..c.rows() {
        let mut vals = Vec::new();
        for &(i, j) in entries {
            vals.push(format_float(c.second_moment[r][(i, j)]));
            if let Some(th) = &c.theory {
                vals.push(format_float(th.second_moment[r][(i, j)]));
            }
        }
        table.push(c.t[r], vals);
    }
    table
}

pub fn diagnostics_table(c: &CurveSet) -> Table {
    let mut header: Vec<String> = [
        "t",
        "linearization_diff",
        "quotient_diff",
        "saturation_count",
    ]
    .map(String::from)
    .into();
    if c.theory.is_some() {
        header.push("convergence_radius".into());
    }
    let mut table = Table::new(header);
    for r in 0..c.rows() {
        let mut vals = vec![
            format_float(c.linearization[r]),
            format_float(c.quotient[r]),
            c.saturation[r].to_string(),
        ];
        if let Some(th) = &c.theory {
            vals.push(format_float(th.convergence_radius[r]));
        }
        table.push(c.t[r], vals);
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub rows: usize,
    pub columns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub wall_clock_seconds: f64,
    pub runs: usize,
    pub diverged_runs: usize,
    pub moment_runs: Option<usize>,
    /// Resolved config: reproduces every CSV when run again.
    pub config: ExperimentConfig,
    pub files: Vec<FileEntry>,
}

/// Writes the four CSV files and `manifest.json` into `dir`.
pub fn write_all(
    dir: &Path,
    rc: &ResolvedConfig,
    curves: &CurveSet,
    wall_clock_seconds: f64,
) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    let tables = [
        (MSE_FILE, mse_table(curves)),
        (WEIGHTS_MEAN_FILE, weights_mean_table(curves)),
        (
            WEIGHTS_MOMENT_FILE,
            weights_moment_table(curves, &rc.moment_entries),
        ),
        (DIAGNOSTICS_FILE, diagnostics_table(curves)),
    ];
    let mut files = Vec::new();
    for (name, table) in &tables {
        table.write(&dir.join(name))?;
        files.push(FileEntry {
            name: name.to_string(),
            rows: table.rows.len(),
            columns: table.header.len(),
        });
    }
    let mut echo = rc.echo();
    echo.output.directory = dir.to_path_buf();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: rc.config.seed,
        wall_clock_seconds,
        runs: rc.config.runs,
        diverged_runs: curves.diverged,
        moment_runs: curves.theory.as_ref().map(|t| t.moment_runs),
        config: echo,
        files,
    };
    let path: PathBuf = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(AppError::io(&path))?;
    Ok(manifest)
}

/// Reads a CSV written by [`Table::write`] back as header plus numeric rows.
pub fn read_numeric(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let csv_err = |source| AppError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        rows.push(
            rec.iter()
                .map(|s| s.parse::<f64>().unwrap_or(f64::NAN))
                .collect(),
        );
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            123_456_789.123_456_79,
            f64::MIN_POSITIVE,
            0.0,
        ] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_float(f64::NAN), "NaN");
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn table_writes_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(vec!["t".into(), "a".into()]);
        t.push(0, [format_float(0.25)]);
        t.push(9, [format_float(f64::NAN)]);
        let path = dir.path().join("x.csv");
        t.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t,a\r\n0,2.5000000000000000e-1\r\n9,NaN\r\n");
        let (h, rows) = read_numeric(&path).unwrap();
        assert_eq!(h, vec!["t", "a"]);
        assert_eq!(rows[0], vec![0.0, 0.25]);
        assert!(rows[1][1].is_nan());
    }
}
