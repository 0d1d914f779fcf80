//! One-axis parameter sweeps.

use std::fmt::Write as _;
use std::path::Path;

use genfl_core::rng::mix_seed;
use rayon::prelude::*;

use crate::config::{apply_override, fnv1a, RunConfig, KEYS};
use crate::error::CliError;
use crate::metrics::{push_row, write_atomic, MetricsTable, CSV_HEADER};
use crate::plot::{render_svg, Series};
use crate::{run, write_run};

/// Keys that cannot be swept.
const FIXED_KEYS: &[&str] = &["output_dir", "parallel_clients"];

#[derive(Debug, Clone)]
pub struct SweepMember {
    pub value: String,
    pub config: RunConfig,
    pub table: MetricsTable,
}

/// Seed of one sweep member: independent across values, reproducible.
pub fn child_seed(base_seed: u64, axis: &str, value: &str) -> u64 {
    mix_seed(&[base_seed, fnv1a(axis.as_bytes()), fnv1a(value.as_bytes())])
}

/// Splits a comma-separated list, dropping blanks.
pub fn parse_values(list: &str) -> Vec<String> {
    list.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect()
}

fn dir_name(axis: &str, value: &str) -> String {
    let clean: String = value
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{axis}={clean}")
}

/// Resolves every member's configuration without running anything.
///
/// Unless `shared_seed` is set, member seeds come from [`child_seed`]; a
/// sweep over `seed` itself uses the listed seeds verbatim.
pub fn plan_sweep(
    base: &RunConfig,
    axis: &str,
    values: &[String],
    shared_seed: bool,
    out_dir: &Path,
) -> Result<Vec<(String, RunConfig)>, CliError> {
    if !KEYS.contains(&axis) || FIXED_KEYS.contains(&axis) {
        return Err(CliError::Sweep(format!("`{axis}` is not a sweepable key")));
    }
    if values.is_empty() {
        return Err(CliError::Sweep("no sweep values given".into()));
    }
    let mut names: Vec<String> = Vec::with_capacity(values.len());
    let mut plan = Vec::with_capacity(values.len());
    for value in values {
        let name = dir_name(axis, value);
        if names.contains(&name) {
            return Err(CliError::Sweep(format!("value `{value}` listed twice")));
        }
        let mut cfg = base.clone();
        apply_override(&mut cfg, axis, value)?;
        if !shared_seed && axis != "seed" {
            cfg.experiment.seed = child_seed(base.experiment.seed, axis, value);
        }
        cfg.output_dir = out_dir.join(&name);
        names.push(name);
        plan.push((value.clone(), cfg));
    }
    Ok(plan)
}

/// Runs every member (in parallel), writes each run directory, a combined
/// `sweep.csv` and `plot.svg` under `out_dir`.
pub fn run_sweep(
    base: &RunConfig,
    axis: &str,
    values: &[String],
    shared_seed: bool,
    out_dir: &Path,
) -> Result<Vec<SweepMember>, CliError> {
    let plan = plan_sweep(base, axis, values, shared_seed, out_dir)?;
    let members = plan
        .into_par_iter()
        .map(|(value, config)| {
            log::info!("sweep {axis}={value}: seed {}", config.experiment.seed);
            let table = run(&config)?;
            write_run(&config, &table)?;
            Ok(SweepMember {
                value,
                config,
                table,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let csv = combined_csv(axis, &members);
    let path = out_dir.join("sweep.csv");
    write_atomic(&path, csv.as_bytes()).map_err(|e| CliError::io(&path, e))?;

    let series: Vec<Series> = members
        .iter()
        .map(|m| Series {
            label: format!("{} {axis}={}", m.table.mode(), m.value),
            points: accuracy_points(&m.table),
        })
        .collect();
    let svg = render_svg(&series, &format!("sweep over {axis}"))?;
    let path = out_dir.join("plot.svg");
    write_atomic(&path, svg.as_bytes()).map_err(|e| CliError::io(&path, e))?;
    Ok(members)
}

pub(crate) fn accuracy_points(table: &MetricsTable) -> Vec<(f64, f64)> {
    table
        .rows()
        .iter()
        .map(|r| (r.round as f64, r.test_accuracy))
        .collect()
}

/// Every member's rows, prefixed with the swept value and run identity.
pub fn combined_csv(axis: &str, members: &[SweepMember]) -> String {
    let mut out = format!("axis,value,seed,config_hash,{CSV_HEADER}\n");
    for m in members {
        let prefix = format!(
            "{axis},{},{},{:016x},",
            m.value,
            m.table.seed(),
            m.table.config_hash()
        );
        for r in m.table.rows() {
            let mut row = String::new();
            push_row(&mut row, r);
            let _ = write!(out, "{prefix}{row}");
        }
    }
    out
}
