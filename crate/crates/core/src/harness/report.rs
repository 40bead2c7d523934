use std::path::Path;

use crate::error::{Error, Result};

use super::ResultRow;

pub const CSV_COLUMNS: [&str; 10] = [
    "k",
    "sigma",
    "method",
    "alpha",
    "excess_risk",
    "sym_diff_size",
    "iterations",
    "converged",
    "wall_time_ms",
    "seed",
];

const SIG_DIGITS: i32 = 9;

/// Shortest `%.9g`-style rendering: 9 significant digits, trailing zeros
/// trimmed, scientific notation outside `1e-5 <= |v| < 1e9`.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", (SIG_DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG_DIGITS {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (SIG_DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn record(row: &ResultRow) -> [String; 10] {
    [
        row.k.to_string(),
        format_sig(row.sigma),
        row.method.label().to_string(),
        row.alpha.map(format_sig).unwrap_or_default(),
        row.excess_risk.map(format_sig).unwrap_or_default(),
        row.sym_diff_size.map(|v| v.to_string()).unwrap_or_default(),
        row.iterations.to_string(),
        row.converged.to_string(),
        row.wall_time_ms.to_string(),
        row.seed.to_string(),
    ]
}

/// Write rows with the fixed header. Failed cells leave `excess_risk` and
/// `sym_diff_size` empty.
pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
