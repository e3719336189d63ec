//! CSV writers. Reals are written with 17 significant digits so that
//! regressions show up byte for byte.

use std::path::Path;

use wbs_core::{ExtractionTrace, GrowthReport, LiminfReport, ProbeReport};

use crate::error::CliError;

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    let io = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    CliError::io(path, io)
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Columns `index, residual, verdict`.
pub fn write_probe(path: &Path, report: &ProbeReport) -> Result<(), CliError> {
    let verdict = report.verdict.to_string();
    write_rows(
        path,
        &["index", "residual", "verdict"],
        report
            .rows
            .iter()
            .map(|r| vec![r.index.to_string(), real(r.residual), verdict.clone()]),
    )
}

/// Columns `k, selected_index, max_pairing, partial_norm_p, cesaro_norm, bound_margin`.
/// The bound margin is the smallest over components and empty when no bound was checked.
pub fn write_trace(path: &Path, trace: &ExtractionTrace, growth: Option<&GrowthReport>) -> Result<(), CliError> {
    write_rows(
        path,
        &["k", "selected_index", "max_pairing", "partial_norm_p", "cesaro_norm", "bound_margin"],
        trace.steps().iter().map(|s| {
            vec![
                s.k.to_string(),
                s.index.to_string(),
                real(s.max_pairing()),
                real(s.partial_norm_p()),
                real(s.cesaro_norm),
                growth
                    .and_then(|g| g.bound_margin_at(s.k))
                    .map(real)
                    .unwrap_or_default(),
            ]
        }),
    )
}

/// Columns `i, alpha_i, tail_inf, limit_integral, margin`, with `margin = tail_inf − limit_integral`.
pub fn write_liminf(path: &Path, report: &LiminfReport) -> Result<(), CliError> {
    let limit = report.limit_integral;
    write_rows(
        path,
        &["i", "alpha_i", "tail_inf", "limit_integral", "margin"],
        report.rows.iter().map(|r| {
            vec![
                r.i.to_string(),
                real(r.alpha),
                real(r.tail_inf),
                real(limit),
                real(r.tail_inf - limit),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.12345679, 0.0] {
            let s = real(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            assert!(!s.contains(','));
        }
        assert_eq!(real(0.5), "5.0000000000000000e-1");
    }
}
