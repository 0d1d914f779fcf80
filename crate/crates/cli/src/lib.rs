//! Experiment runner for the `genfl` simulator: configuration files, single
//! runs, sweeps, CSV metrics and SVG plots.

pub mod config;
pub mod error;
pub mod metrics;
pub mod plot;
pub mod sweep;

use std::path::{Path, PathBuf};

use genfl_core::protocol::run_experiment;

pub use config::{load_config, parse_config, RunConfig};
pub use error::CliError;
pub use metrics::MetricsTable;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_ECHO_FILE: &str = "config.txt";

/// Runs one experiment.
pub fn run(cfg: &RunConfig) -> Result<MetricsTable, CliError> {
    let trace = run_experiment(&cfg.experiment)?;
    let table = MetricsTable::new(config::config_hash(cfg), cfg.experiment.seed, trace).map_err(|source| {
        CliError::Metrics {
            path: cfg.output_dir.clone(),
            source,
        }
    })?;
    if let Some(last) = table.rows().last() {
        log::info!(
            "{} run {:016x}: round {} accuracy {:.4}",
            table.mode(),
            table.config_hash(),
            last.round,
            last.test_accuracy
        );
    }
    Ok(table)
}

/// Writes `metrics.csv` and the resolved config into `cfg.output_dir`.
pub fn write_run(cfg: &RunConfig, table: &MetricsTable) -> Result<(), CliError> {
    let dir = &cfg.output_dir;
    let put = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        metrics::write_atomic(&path, bytes).map_err(|e| CliError::io(&path, e))
    };
    put(CONFIG_ECHO_FILE, config::render_config(cfg).as_bytes())?;
    put(METRICS_FILE, table.to_csv().as_bytes())?;
    log::debug!("wrote {}", dir.display());
    Ok(())
}

/// Legend label for a metrics file: its mode, plus the run directory name
/// when several inputs share a mode.
fn series_label(path: &Path, mode: &str, ambiguous: bool) -> String {
    if !ambiguous {
        return mode.to_string();
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let name = if stem == "metrics" {
        path.parent()
            .and_then(|p| p.file_name())
            .and_then(|s| s.to_str())
            .unwrap_or(stem)
    } else {
        stem
    };
    format!("{mode} {name}")
}

/// Renders one accuracy curve per CSV file into `out`.
pub fn plot_files(inputs: &[PathBuf], out: &Path, title: &str) -> Result<(), CliError> {
    let mut loaded = Vec::with_capacity(inputs.len());
    for path in inputs {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let rows = metrics::parse_csv(&text).map_err(|source| CliError::Metrics {
            path: path.clone(),
            source,
        })?;
        loaded.push((path, rows));
    }
    let modes: Vec<String> = loaded.iter().map(|(_, r)| r[0].mode.to_string()).collect();
    let series: Vec<plot::Series> = loaded
        .iter()
        .zip(&modes)
        .map(|((path, rows), mode)| {
            let ambiguous = modes.iter().filter(|m| *m == mode).count() > 1;
            plot::Series {
                label: series_label(path, mode, ambiguous),
                points: rows.iter().map(|r| (r.round as f64, r.test_accuracy)).collect(),
            }
        })
        .collect();
    let svg = plot::render_svg(&series, title)?;
    metrics::write_atomic(out, svg.as_bytes()).map_err(|e| CliError::io(out, e))
}
