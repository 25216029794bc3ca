use std::io::{self, Write};

use plm_core::{ErrorRates, MetricsRow, MetricsSink, Phase};

use crate::CliError;

pub const HEADER: &str =
    "iteration,phase,err_train_direct,err_train_recall,err_new_direct,err_new_recall,err_all_direct,err_all_recall";

/// 17 significant digits, enough to round-trip any f64.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_row(row: &MetricsRow) -> String {
    let e = &row.errors;
    let mut line = format!("{},{}", row.iteration, row.phase);
    for v in [e.train_direct, e.train_recall, e.new_direct, e.new_recall, e.all_direct, e.all_recall] {
        line.push(',');
        line.push_str(&format_real(v));
    }
    line
}

/// Streams rows as CSV, writing the header on creation.
pub struct CsvSink<W: Write> {
    out: W,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{HEADER}")?;
        Ok(Self { out })
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> MetricsSink for CsvSink<W> {
    fn record(&mut self, row: &MetricsRow) -> io::Result<()> {
        writeln!(self.out, "{}", format_row(row))
    }
}

/// Parses CSV text written by [`CsvSink`]. Row numbers in errors are 1-based
/// file lines, so the header is line 1.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>, CliError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == HEADER => {}
        _ => {
            return Err(CliError::Csv {
                row: 1,
                msg: "missing or unexpected header".into(),
            })
        }
    }
    let mut rows: Vec<MetricsRow> = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| CliError::Csv { row, msg };
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 8 {
            return Err(bad(format!("expected 8 fields, found {}", fields.len())));
        }
        let iteration: usize = fields[0].parse().map_err(|_| bad(format!("bad iteration {:?}", fields[0])))?;
        let phase: Phase = fields[1].parse().map_err(bad)?;
        let mut v = [0.0; 6];
        for (slot, field) in v.iter_mut().zip(&fields[2..]) {
            *slot = field.parse().map_err(|_| bad(format!("bad number {field:?}")))?;
        }
        if let Some(prev) = rows.last() {
            if iteration <= prev.iteration {
                return Err(bad(format!("iteration {iteration} does not follow {}", prev.iteration)));
            }
        }
        rows.push(MetricsRow {
            iteration,
            phase,
            errors: ErrorRates {
                train_direct: v[0],
                train_recall: v[1],
                new_direct: v[2],
                new_recall: v[3],
                all_direct: v[4],
                all_recall: v[5],
            },
        });
    }
    Ok(rows)
}
