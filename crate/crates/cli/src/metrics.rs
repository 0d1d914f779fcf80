//! Per-round metrics tables and their CSV form.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use genfl_core::costmodel::RoundMetrics;
use genfl_core::protocol::Mode;
use thiserror::Error;

pub const CSV_HEADER: &str =
    "round,mode,test_accuracy,test_loss,mean_client_emd,round_time_sec,round_energy_joules,pool_size";

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("metrics table is empty")]
    Empty,
    #[error("row {index} has round {round}, expected {expected}")]
    RoundOrder {
        index: usize,
        round: usize,
        expected: usize,
    },
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// One run's trace together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    config_hash: u64,
    seed: u64,
    rows: Vec<RoundMetrics>,
}

impl MetricsTable {
    /// Rows must be rounds 0, 1, 2, ... in order.
    pub fn new(config_hash: u64, seed: u64, rows: Vec<RoundMetrics>) -> Result<Self, MetricsError> {
        if rows.is_empty() {
            return Err(MetricsError::Empty);
        }
        for (index, row) in rows.iter().enumerate() {
            if row.round != index {
                return Err(MetricsError::RoundOrder {
                    index,
                    round: row.round,
                    expected: index,
                });
            }
        }
        Ok(Self {
            config_hash,
            seed,
            rows,
        })
    }

    pub fn config_hash(&self) -> u64 {
        self.config_hash
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rows(&self) -> &[RoundMetrics] {
        &self.rows
    }

    pub fn mode(&self) -> Mode {
        self.rows[0].mode
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            push_row(&mut out, r);
        }
        out
    }
}

pub(crate) fn push_row(out: &mut String, r: &RoundMetrics) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        r.round,
        r.mode,
        r.test_accuracy,
        r.test_loss,
        r.mean_client_emd,
        r.round_time_sec,
        r.round_energy_joules,
        r.pool_size
    );
}

/// Parses a `metrics.csv` produced by [`MetricsTable::to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<RoundMetrics>, MetricsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        _ => {
            return Err(MetricsError::Csv {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let err = |message: String| MetricsError::Csv { line, message };
        let cells: Vec<&str> = raw.trim_end().split(',').collect();
        if cells.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", cells.len())));
        }
        let real = |k: usize| -> Result<f64, MetricsError> {
            cells[k]
                .parse()
                .map_err(|_| err(format!("bad number `{}`", cells[k])))
        };
        let int = |k: usize| -> Result<usize, MetricsError> {
            cells[k]
                .parse()
                .map_err(|_| err(format!("bad integer `{}`", cells[k])))
        };
        rows.push(RoundMetrics {
            round: int(0)?,
            mode: cells[1]
                .parse()
                .map_err(|_| err(format!("bad mode `{}`", cells[1])))?,
            test_accuracy: real(2)?,
            test_loss: real(3)?,
            mean_client_emd: real(4)?,
            round_time_sec: real(5)?,
            round_energy_joules: real(6)?,
            pool_size: int(7)?,
        });
    }
    if rows.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(rows)
}

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
