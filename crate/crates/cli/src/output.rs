//! CSV output and configuration hashing.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use captrade_core::simulation::{HorizonRun, SweepResult};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const YEARS_HEADER: [&str; 13] = [
    "year",
    "company",
    "allocated",
    "banked_in",
    "flops_allowed",
    "x_star",
    "y_star",
    "banked_out",
    "penalty",
    "utility",
    "energy",
    "co2_kg",
    "clearing_price",
];

pub const TRADES_HEADER: [&str; 7] = [
    "year",
    "seller",
    "buyer",
    "quantity",
    "price",
    "seller_flops",
    "buyer_flops",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "year",
    "total_flops",
    "total_allowances",
    "total_energy",
    "total_co2_kg",
    "total_penalty",
    "violations",
    "benchmark",
    "clearing_price",
    "unmatched_net",
];

pub const SWEEP_HEADER: [&str; 6] = ["axis_value", "x_base", "x_ct", "u_base", "u_ct", "b"];

/// Hex SHA-256 of the canonical JSON encoding of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("configuration serialises");
    hex::encode(Sha256::digest(json))
}

/// Ten significant digits, positional for ordinary magnitudes and
/// scientific otherwise, with trailing zeros trimmed.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-7..16).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_owned()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_sig).unwrap_or_default()
}

/// Opens `path` and writes the provenance comment line.
fn create(path: &Path, hash: &str, extra_comments: &[String]) -> Result<BufWriter<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut head = format!("# captrade {VERSION} config_hash={hash}\n");
    for c in extra_comments {
        head.push_str(&format!("# {c}\n"));
    }
    w.write_all(head.as_bytes())
        .map_err(|e| CliError::io(path, e))?;
    Ok(w)
}

fn write_table(
    path: &Path,
    hash: &str,
    comments: &[String],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let w = create(path, hash, comments)?;
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header).map_err(csv_err)?;
    for row in rows {
        csv.write_record(&row).map_err(csv_err)?;
    }
    csv.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Writes `years.csv`, `trades.csv` and `summary.csv` into `dir`.
pub fn write_run(dir: &Path, hash: &str, run: &HorizonRun) -> Result<Vec<PathBuf>, CliError> {
    let years = dir.join("years.csv");
    write_table(
        &years,
        hash,
        &[],
        &YEARS_HEADER,
        run.reports.iter().flat_map(|r| {
            r.rows.iter().map(move |c| {
                vec![
                    r.year.to_string(),
                    c.company.clone(),
                    format_sig(c.allocated),
                    format_sig(c.banked_in),
                    format_sig(c.flops_allowed),
                    format_sig(c.x_star),
                    format_sig(c.y_star),
                    format_sig(c.banked_out),
                    format_sig(c.penalty),
                    format_sig(c.utility),
                    format_sig(c.energy),
                    format_sig(c.co2_kg),
                    format_opt(c.price),
                ]
            })
        }),
    )?;

    let trades = dir.join("trades.csv");
    write_table(
        &trades,
        hash,
        &[],
        &TRADES_HEADER,
        run.ledger.entries.iter().map(|t| {
            vec![
                t.year.to_string(),
                t.seller.clone(),
                t.buyer.clone(),
                format_sig(t.quantity),
                format_sig(t.price),
                format_sig(t.seller_flops),
                format_sig(t.buyer_flops),
            ]
        }),
    )?;

    let summary = dir.join("summary.csv");
    write_table(
        &summary,
        hash,
        &[],
        &SUMMARY_HEADER,
        run.reports.iter().map(|r| {
            vec![
                r.year.to_string(),
                format_sig(r.total_flops),
                format_sig(r.total_allowances),
                format_sig(r.total_energy()),
                format_sig(r.total_co2_kg()),
                format_sig(r.total_penalty()),
                r.rows
                    .iter()
                    .filter(|c| c.violation > 0.0)
                    .count()
                    .to_string(),
                format_opt(r.benchmark),
                format_opt(r.clearing_price),
                format_sig(r.unmatched_net),
            ]
        }),
    )?;
    Ok(vec![years, trades, summary])
}

/// Writes one sweep table to `path`.
pub fn write_sweep(path: &Path, hash: &str, result: &SweepResult) -> Result<(), CliError> {
    let comments: Vec<String> = result
        .crossover
        .map(|c| vec![format!("crossover_axis_value={}", format_sig(c))])
        .unwrap_or_default();
    write_table(
        path,
        hash,
        &comments,
        &SWEEP_HEADER,
        result.rows.iter().map(|r| {
            vec![
                format_sig(r.axis_value),
                format_sig(r.x_base),
                format_sig(r.x_ct),
                format_sig(r.u_base),
                format_sig(r.u_ct),
                format_sig(r.price),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(-0.0), "0");
        assert_eq!(format_sig(10.0), "10");
        assert_eq!(format_sig(7.0710678118654755), "7.071067812");
        assert_eq!(format_sig(-0.18284271247461903), "-0.1828427125");
        assert_eq!(format_sig(0.005625), "0.005625");
        assert_eq!(format_sig(123456789012.0), "123456789012");
        assert_eq!(format_sig(2.5e-12), "2.5e-12");
        assert_eq!(format_sig(9.9999999999), "10");
        assert_eq!(format_sig(1e20), "1e20");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&(1.0, "x"));
        assert_eq!(a, config_hash(&(1.0, "x")));
        assert_ne!(a, config_hash(&(1.5, "x")));
        assert_eq!(a.len(), 64);
    }
}
