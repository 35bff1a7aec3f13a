//! Result files: sweep histograms, detection records and JSON reports.

use std::path::Path;

use gausteer_core::sweep::SweepResult;
use gausteer_core::witness::DetectionRecord;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats::write_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct HistogramRow {
    measure_bin_lo: f64,
    measure_bin_hi: f64,
    settings: usize,
    count: u64,
    fraction: f64,
}

fn csv_string<T: Serialize>(header: &[&str], rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.serialize(row).expect("flat rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// One row per bin and settings column, bins then settings ascending.
/// Settings `0` holds undetected samples.
pub fn sweep_csv(result: &SweepResult) -> String {
    let rows = result.counts.iter().enumerate().flat_map(|(b, row)| {
        row.iter().enumerate().map(move |(c, &count)| HistogramRow {
            measure_bin_lo: result.bin_edges[b],
            measure_bin_hi: result.bin_edges[b + 1],
            settings: result.settings_axis[c],
            count,
            fraction: result.fractions[b][c],
        })
    });
    csv_string(&["measure_bin_lo", "measure_bin_hi", "settings", "count", "fraction"], rows)
}

pub fn sweep_json(result: &SweepResult) -> String {
    serde_json::to_string_pretty(result).expect("sweep results serialize")
}

pub fn render_sweep(result: &SweepResult, format: Format) -> String {
    match format {
        Format::Csv => sweep_csv(result),
        Format::Json => sweep_json(result),
    }
}

pub fn emit_results(result: &SweepResult, format: Format, path: &Path) -> Result<()> {
    write_text(path, &render_sweep(result, format))
}

/// Loads a JSON sweep and checks that every populated bin's fractions sum to
/// one and match its counts.
pub fn read_sweep_json(path: &Path) -> Result<SweepResult> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let result: SweepResult = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
    for (b, (counts, fractions)) in result.counts.iter().zip(&result.fractions).enumerate() {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            continue;
        }
        let sum: f64 = fractions.iter().sum();
        let consistent = counts
            .iter()
            .zip(fractions)
            .all(|(&c, &f)| (c as f64 / total as f64 - f).abs() <= 1e-12);
        if (sum - 1.0).abs() > 1e-12 || !consistent {
            return Err(CliError::parse(path, format!("bin {b}: fractions do not match counts")));
        }
    }
    Ok(result)
}

#[derive(Debug, Serialize)]
struct RoundRow {
    settings: usize,
    status: String,
    value: Option<f64>,
    error: Option<f64>,
    retried: bool,
}

pub fn render_detection(record: &DetectionRecord, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(record).expect("records serialize"),
        Format::Csv => csv_string(
            &["settings", "status", "value", "error", "retried"],
            record.rounds.iter().map(|r| RoundRow {
                settings: r.settings,
                status: serde_json::to_value(r.status)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                value: r.value,
                error: r.error,
                retried: r.retried,
            }),
        ),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use gausteer_core::sweep::{assemble, SampleOutcome, SweepConfig, SweepFamily};

    fn outcome(index: usize, measure: f64, settings_used: Option<usize>) -> SampleOutcome {
        SampleOutcome { index, parameter: None, measure, settings_used, solver_failure: false }
    }

    #[test]
    fn empty_sweep_has_only_a_header() {
        let result = assemble(&SweepConfig::new(SweepFamily::Svs, 1, 0), &[]);
        assert_eq!(sweep_csv(&result), "measure_bin_lo,measure_bin_hi,settings,count,fraction\n");
    }

    #[test]
    fn rows_are_ordered_and_complete() {
        let mut config = SweepConfig::new(SweepFamily::Svs, 3, 0);
        config.bins = gausteer_core::sweep::BinSpec::Edges(vec![0.0, 1.0, 2.0]);
        let result = assemble(&config, &[outcome(0, 0.5, Some(9)), outcome(1, 1.5, None), outcome(2, 0.2, Some(9))]);
        let csv = sweep_csv(&result);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * result.settings_axis.len());
        assert_eq!(lines[1], "0.0,1.0,0,0,0.0");
        assert!(lines.contains(&"0.0,1.0,9,2,1.0"));
        assert!(lines.contains(&"1.0,2.0,0,1,1.0"));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.json");
        let result = assemble(
            &SweepConfig::new(SweepFamily::Svs, 3, 0),
            &[outcome(0, 0.5, Some(9)), outcome(1, 1.5, Some(8)), outcome(2, 0.2, Some(10))],
        );
        emit_results(&result, Format::Json, &path).unwrap();
        assert_eq!(read_sweep_json(&path).unwrap(), result);

        let mut broken = result.clone();
        broken.fractions[0][0] += 0.5;
        std::fs::write(&path, sweep_json(&broken)).unwrap();
        assert!(read_sweep_json(&path).is_err());
    }
}
