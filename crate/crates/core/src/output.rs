//! CSV emission of sweep results.
//!
//! Header: `sigma_c2,n,snr_db,mse,ber,bw_eff,trials,fade_events`. Floats
//! are written in plain decimal with at least six significant digits and
//! as many more as needed for the value to parse back exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{SweepRecord, SweepResult};

pub const HEADER: &str = "sigma_c2,n,snr_db,mse,ber,bw_eff,trials,fade_events";

/// Shortest fixed-point rendering with ≥ 6 significant digits that parses
/// back to `x` exactly.
pub fn format_decimal(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0.00000".into() } else { format!("{x}") };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let min_prec = (5 - magnitude).max(0) as usize;
    for prec in min_prec..=min_prec + 20 {
        let s = format!("{x:.prec$}");
        if s.parse::<f64>() == Ok(x) {
            return s;
        }
    }
    format!("{x:e}")
}

pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::with_capacity(64 * (result.records.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in &result.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_decimal(r.sigma_c2),
            r.redundancy,
            format_decimal(r.snr_db),
            format_decimal(r.mse),
            format_decimal(r.ber),
            format_decimal(r.bw_eff),
            r.trials,
            r.fade_events
        );
    }
    out
}

pub fn emit_results(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(result)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses text produced by [`to_csv`]. Per-trial vectors and pooled bit
/// counts are not part of the file and come back empty / zero.
pub fn parse_csv(text: &str) -> std::result::Result<SweepResult, (usize, String)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err((1, "missing or unexpected header".into())),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err((lineno, format!("expected 8 fields, got {}", fields.len())));
        }
        let float = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|e| (lineno, format!("field {i}: {e}")))
        };
        let int = |i: usize| {
            fields[i]
                .parse::<u64>()
                .map_err(|e| (lineno, format!("field {i}: {e}")))
        };
        records.push(SweepRecord {
            sigma_c2: float(0)?,
            redundancy: int(1)? as usize,
            snr_db: float(2)?,
            mse: float(3)?,
            ber: float(4)?,
            bw_eff: float(5)?,
            trials: int(6)? as usize,
            fade_events: int(7)?,
            bit_errors: 0,
            bits: 0,
            trial_mse: Vec::new(),
            trial_ber: Vec::new(),
        });
    }
    Ok(SweepResult { records })
}

pub fn read_results(path: &Path) -> Result<SweepResult> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}
