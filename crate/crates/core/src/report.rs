//! Deterministic output artifacts: CSV tables with a frozen float format and
//! a JSON run manifest. Every float is written through [`fmt_sci`] so a rerun
//! with the same configuration and seed produces byte-identical tables.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::auth::AuthDecision;
use crate::error::{Error, Result};
use crate::ler::VarianceCell;
use crate::signature::{SignatureTrace, TraceStats};

/// Frozen scientific-notation float format (nine significant digits).
/// Negative zero is normalized so arithmetic that lands on -0.0 cannot
/// change output bytes.
pub fn fmt_sci(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.8e}")
}

/// Write a generic CSV: header line plus pre-formatted rows, `\n` endings,
/// no quoting (callers only emit numbers and fixed labels). Every row must
/// match the header width; nothing is written when any row is malformed.
pub fn write_lines_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::invalid(format!(
                "csv row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
    }
    let mut out = Vec::with_capacity(rows.len() * 32 + 64);
    writeln!(out, "{}", header.join(",")).expect("vec write");
    for row in rows {
        writeln!(out, "{}", row.join(",")).expect("vec write");
    }
    std::fs::write(path, out).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// One row per chip per grid point: the raw and normalized pair counts.
pub fn write_traces_csv(path: &Path, traces: &[SignatureTrace]) -> Result<()> {
    let header = ["chip_id", "cof_over_cu", "n_ac", "normalized", "repeats", "seed"];
    let mut rows = Vec::new();
    for t in traces {
        for (j, &ratio) in t.cof_over_cu.iter().enumerate() {
            rows.push(vec![
                t.chip_id.to_string(),
                fmt_sci(ratio),
                t.counts[j].to_string(),
                fmt_sci(t.normalized[j]),
                t.repeats.to_string(),
                t.seed.to_string(),
            ]);
        }
    }
    write_lines_csv(path, &header, &rows)
}

/// Population summaries, one labeled block per sweep setting (for example a
/// `repeats` column with one block for each averaging depth).
pub fn write_labeled_stats_csv(
    path: &Path,
    label_name: &str,
    blocks: &[(String, TraceStats)],
) -> Result<()> {
    let header = [label_name, "cof_over_cu", "avg", "std", "n_traces"];
    let mut rows = Vec::new();
    for (label, s) in blocks {
        for j in 0..s.cof_over_cu.len() {
            rows.push(vec![
                label.clone(),
                fmt_sci(s.cof_over_cu[j]),
                fmt_sci(s.avg[j]),
                fmt_sci(s.std[j]),
                s.n_traces.to_string(),
            ]);
        }
    }
    write_lines_csv(path, &header, &rows)
}

/// Line-edge-roughness variance sweep. Cells whose every sample collided
/// carry no variance estimate and are written as `nan`.
pub fn write_ler_csv(path: &Path, cells: &[VarianceCell]) -> Result<()> {
    let header =
        ["geometry_scale", "eta_ler_nm", "sigma_ler_nm", "norm_variance", "samples", "seed"];
    let rows = cells
        .iter()
        .map(|c| {
            vec![
                fmt_sci(c.geometry_scale),
                fmt_sci(c.eta * 1e9),
                fmt_sci(c.sigma * 1e9),
                c.norm_variance.map_or_else(|| "nan".to_string(), fmt_sci),
                c.samples.to_string(),
                c.seed.to_string(),
            ]
        })
        .collect::<Vec<_>>();
    write_lines_csv(path, &header, &rows)
}

/// One converter probe per row: applied differential input, produced code,
/// ideal-quantizer code, and the absolute code error in LSB.
pub struct AdcVerifyRow {
    pub v_diff: f64,
    pub code_actual: u32,
    pub code_ideal: u32,
}

pub fn write_adc_verify_csv(path: &Path, rows: &[AdcVerifyRow]) -> Result<()> {
    let header = ["v_diff", "code_actual", "code_ideal", "abs_error_lsb"];
    let out = rows
        .iter()
        .map(|r| {
            let err = (i64::from(r.code_actual) - i64::from(r.code_ideal)).unsigned_abs();
            vec![
                fmt_sci(r.v_diff),
                r.code_actual.to_string(),
                r.code_ideal.to_string(),
                err.to_string(),
            ]
        })
        .collect::<Vec<_>>();
    write_lines_csv(path, &header, &out)
}

/// Authentication outcomes for a batch of chips against one card.
pub fn write_decisions_csv(path: &Path, rows: &[(u64, AuthDecision)]) -> Result<()> {
    let header = ["chip_id", "d_auth", "d_auth_weighted", "accept", "bound_violations"];
    let out = rows
        .iter()
        .map(|(id, d)| {
            vec![
                id.to_string(),
                fmt_sci(d.d_auth),
                fmt_sci(d.d_auth_weighted),
                u8::from(d.accept).to_string(),
                d.bound_violations.to_string(),
            ]
        })
        .collect::<Vec<_>>();
    write_lines_csv(path, &header, &out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub wall_ms: u64,
}

/// Provenance record saved next to every batch of output files. Timings vary
/// between runs; everything else is reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub global_seed: u64,
    pub version: String,
    pub files: Vec<String>,
    pub stages: Vec<StageTiming>,
    pub failed_stage: Option<String>,
}

impl RunManifest {
    pub fn new(config_hash: String, global_seed: u64) -> Self {
        RunManifest {
            config_hash,
            global_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            files: Vec::new(),
            stages: Vec::new(),
            failed_stage: None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("manifest parse: {e}")))
    }
}
