//! Plot-ready exports of reports, comparisons and mode tables.
//!
//! Output is byte-stable for fixed inputs: floats use Rust's shortest
//! round-trip formatting and row order follows the input.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objective::{Direction, DEFAULT_DIRECTIONS};
use crate::sim::{ComparisonTable, SimulationReport};
use crate::wgra::OperationMode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("unknown format `{0}` (expected table or csv)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

pub const WINDOW_COLUMNS: [&str; 8] = [
    "subject",
    "scenario",
    "window_index",
    "mode",
    "energy_wh",
    "frames_processed",
    "mean_true_count",
    "mean_detected_count",
];
pub const AGGREGATE_COLUMNS: [&str; 5] = ["subject", "total_energy_wh", "total_frames_processed", "mean_fpr", "accuracy_proxy"];
pub const DELTA_COLUMNS: [&str; 5] = ["subject", "other", "energy_saving", "fpr_gain", "accuracy_delta"];
pub const BOXPLOT_COLUMNS: [&str; 7] = ["subject", "block", "min", "q1", "median", "q3", "max"];
pub const RADAR_COLUMNS: [&str; 4] = ["subject", "acc", "eng", "rate"];
pub const MODE_COLUMNS: [&str; 7] = ["mode", "configuration", "acc", "eng", "rate", "grg", "weights"];

/// One or more header+rows blocks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tabular {
    sections: Vec<(Vec<String>, Vec<Vec<String>>)>,
}

impl Tabular {
    /// A single-section table.
    pub fn new(header: &[&str], rows: Vec<Vec<String>>) -> Self {
        Tabular {
            sections: vec![(header.iter().map(|s| s.to_string()).collect(), rows)],
        }
    }

    fn section<const N: usize>(mut self, header: [&str; N], rows: Vec<Vec<String>>) -> Self {
        self.sections.push((header.iter().map(|s| s.to_string()).collect(), rows));
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::Table => self.to_string(),
        }
    }

    fn csv(&self) -> String {
        let mut out = Vec::new();
        for (i, (header, rows)) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push(b'\n');
            }
            let mut w = csv::WriterBuilder::new().flexible(false).from_writer(Vec::new());
            w.write_record(header).expect("in-memory write");
            for row in rows {
                w.write_record(row).expect("in-memory write");
            }
            out.extend(w.into_inner().expect("in-memory flush"));
        }
        String::from_utf8(out).expect("csv output is utf-8")
    }
}

impl fmt::Display for Tabular {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (header, rows)) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let mut widths: Vec<usize> = header.iter().map(String::len).collect();
            for row in rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let line = |f: &mut fmt::Formatter<'_>, cells: &[String]| -> fmt::Result {
                let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                writeln!(f, "{}", padded.join("  ").trim_end())
            };
            line(f, header)?;
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            line(f, &rule)?;
            for row in rows {
                line(f, row)?;
            }
        }
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Per-window rows followed by the aggregates block. An empty report yields
/// only the window header.
pub fn report_table(report: &SimulationReport) -> Tabular {
    let rows = report
        .windows
        .iter()
        .map(|w| {
            vec![
                report.subject.clone(),
                report.scenario.clone(),
                w.window_index.to_string(),
                w.mode.clone(),
                num(w.energy_wh),
                num(w.frames_processed),
                num(w.mean_true_count),
                num(w.mean_detected_count),
            ]
        })
        .collect();
    let table = Tabular::default().section(WINDOW_COLUMNS, rows);
    if report.windows.is_empty() {
        return table;
    }
    let a = &report.aggregates;
    table.section(
        AGGREGATE_COLUMNS,
        vec![vec![
            report.subject.clone(),
            num(a.total_energy_wh),
            num(a.total_frames_processed),
            num(a.mean_fpr),
            num(a.accuracy_proxy),
        ]],
    )
}

/// Aggregate rows for every subject, then deltas of the first against the rest.
pub fn comparison_table(table: &ComparisonTable) -> Tabular {
    let rows = table
        .rows
        .iter()
        .map(|r| {
            let a = &r.aggregates;
            vec![
                r.subject.clone(),
                num(a.total_energy_wh),
                num(a.total_frames_processed),
                num(a.mean_fpr),
                num(a.accuracy_proxy),
            ]
        })
        .collect();
    let deltas = table
        .deltas
        .iter()
        .map(|d| {
            vec![
                d.subject.clone(),
                d.other.clone(),
                num(d.energy_saving),
                num(d.fpr_gain),
                num(d.accuracy_delta),
            ]
        })
        .collect();
    Tabular::default().section(AGGREGATE_COLUMNS, rows).section(DELTA_COLUMNS, deltas)
}

pub fn boxplot_table(table: &ComparisonTable) -> Tabular {
    let rows = table
        .boxplots
        .iter()
        .map(|b| {
            vec![
                b.subject.clone(),
                b.block.clone(),
                num(b.min),
                num(b.q1),
                num(b.median),
                num(b.q3),
                num(b.max),
            ]
        })
        .collect();
    Tabular::default().section(BOXPLOT_COLUMNS, rows)
}

/// Subject aggregates normalized per axis over subjects, higher is better on
/// every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarRow {
    pub subject: String,
    pub acc: f64,
    pub eng: f64,
    pub rate: f64,
}

pub fn radar_rows(table: &ComparisonTable) -> Vec<RadarRow> {
    let raw: Vec<[f64; 3]> = table
        .rows
        .iter()
        .map(|r| {
            [
                r.aggregates.accuracy_proxy,
                r.aggregates.total_energy_wh,
                r.aggregates.total_frames_processed,
            ]
        })
        .collect();
    let mut normalized = raw.clone();
    for j in 0..3 {
        let lo = raw.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let hi = raw.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        for (n, r) in normalized.iter_mut().zip(&raw) {
            n[j] = if hi == lo {
                1.0
            } else {
                match DEFAULT_DIRECTIONS[j] {
                    Direction::Maximize => (r[j] - lo) / (hi - lo),
                    Direction::Minimize => (hi - r[j]) / (hi - lo),
                }
            };
        }
    }
    table
        .rows
        .iter()
        .zip(normalized)
        .map(|(r, n)| RadarRow {
            subject: r.subject.clone(),
            acc: n[0],
            eng: n[1],
            rate: n[2],
        })
        .collect()
}

pub fn radar_table(table: &ComparisonTable) -> Tabular {
    let rows = radar_rows(table)
        .into_iter()
        .map(|r| vec![r.subject, num(r.acc), num(r.eng), num(r.rate)])
        .collect();
    Tabular::default().section(RADAR_COLUMNS, rows)
}

pub fn mode_table(modes: &[OperationMode]) -> Tabular {
    let rows = modes
        .iter()
        .map(|m| {
            let w = m.spec.weights;
            vec![
                m.name().to_string(),
                m.chosen.to_string(),
                num(m.objectives.acc),
                num(m.objectives.eng),
                num(m.objectives.rate),
                num(m.grg),
                format!("{}/{}/{}", w[0], w[1], w[2]),
            ]
        })
        .collect();
    Tabular::default().section(MODE_COLUMNS, rows)
}
