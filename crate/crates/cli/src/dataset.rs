//! Dataset CSV ingestion and emission.
//!
//! Columns: `time` (positive decimal), `event` (`0` or `1`), `arm` (`Rx` or
//! `C`) and any number of `s:<factor>` stratum columns, in any order. Every
//! line is either parsed or reported with its line number; nothing is
//! skipped silently.

use std::io::Write;
use std::path::Path;

use survquack_core::estim::{Arm, Record, SurvivalSample};

use crate::error::CliError;

const MAX_SHOWN: usize = 50;

struct Layout {
    time: usize,
    event: usize,
    arm: usize,
    strata: Vec<(String, usize)>,
}

fn layout(header: &csv::StringRecord) -> Result<Layout, Vec<String>> {
    let mut problems = Vec::new();
    let (mut time, mut event, mut arm) = (None, None, None);
    let mut strata = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, name) in header.iter().enumerate() {
        if !seen.insert(name) {
            problems.push(format!("line 1: duplicate column '{name}'"));
            continue;
        }
        match name {
            "time" => time = Some(i),
            "event" => event = Some(i),
            "arm" => arm = Some(i),
            s if s.starts_with("s:") && s.len() > 2 => strata.push((s[2..].to_string(), i)),
            other => problems.push(format!("line 1: unknown column '{other}' (stratum columns are named s:<factor>)")),
        }
    }
    for (col, found) in [("time", time), ("event", event), ("arm", arm)] {
        if found.is_none() {
            problems.push(format!("line 1: missing required column '{col}'"));
        }
    }
    if !problems.is_empty() {
        return Err(problems);
    }
    Ok(Layout { time: time.unwrap(), event: event.unwrap(), arm: arm.unwrap(), strata })
}

fn parse_row(row: &csv::StringRecord, lay: &Layout, width: usize, line: u64) -> Result<Record, String> {
    if row.len() != width {
        return Err(format!("line {line}: expected {width} fields, found {}", row.len()));
    }
    let raw_time = &row[lay.time];
    let time: f64 = raw_time.parse().map_err(|_| format!("line {line}: time '{raw_time}' is not a number"))?;
    if !(time.is_finite() && time > 0.0) {
        return Err(format!("line {line}: time must be positive, got {raw_time}"));
    }
    let event = match &row[lay.event] {
        "1" => true,
        "0" => false,
        other => return Err(format!("line {line}: event must be 0 or 1, got '{other}'")),
    };
    let arm = match &row[lay.arm] {
        "Rx" => Arm::Rx,
        "C" => Arm::C,
        other => return Err(format!("line {line}: arm must be Rx or C, got '{other}'")),
    };
    let mut strata = Vec::with_capacity(lay.strata.len());
    for (name, i) in &lay.strata {
        let label = &row[*i];
        if label.is_empty() {
            return Err(format!("line {line}: empty level for factor '{name}'"));
        }
        strata.push(label.to_string());
    }
    Ok(Record { time, event, arm, strata })
}

/// Parse dataset text. `origin` names the source in diagnostics.
pub fn parse_dataset(text: &str, origin: &Path) -> Result<SurvivalSample, CliError> {
    let fail = |diagnostics: Vec<String>| {
        let count = diagnostics.len();
        let mut shown = diagnostics;
        if count > MAX_SHOWN {
            shown.truncate(MAX_SHOWN);
            shown.push(format!("... and {} more", count - MAX_SHOWN));
        }
        CliError::Dataset { path: origin.to_path_buf(), count, diagnostics: shown }
    };
    let mut diagnostics = Vec::new();
    // The csv reader skips blank lines; report them instead.
    let body = text.strip_suffix('\n').unwrap_or(text);
    for (i, l) in body.split('\n').enumerate() {
        if l.trim().is_empty() {
            diagnostics.push(format!("line {}: empty line", i + 1));
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = match rdr.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => h.clone(),
        Ok(_) => return Err(fail(vec!["line 1: missing header row".into()])),
        Err(e) => return Err(fail(vec![format!("line 1: {e}")])),
    };
    let lay = layout(&header).map_err(fail)?;
    // The reader's own line counter ignores skipped blank lines, so line
    // numbers come from byte offsets. A record's offset can point at blank
    // lines preceding it; step over those first.
    let bytes = text.as_bytes();
    let line_starts: Vec<usize> = std::iter::once(0).chain(text.match_indices('\n').map(|(i, _)| i + 1)).collect();
    let line_at = |pos: Option<&csv::Position>, fallback: usize| {
        pos.map_or(fallback as u64, |p| {
            let mut b = p.byte() as usize;
            while b < bytes.len() && matches!(bytes[b], b'\n' | b'\r' | b' ' | b'\t') {
                b += 1;
            }
            line_starts.partition_point(|&s| s <= b) as u64
        })
    };
    let mut records = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        match row {
            Ok(row) => {
                let line = line_at(row.position(), k + 2);
                match parse_row(&row, &lay, header.len(), line) {
                    Ok(r) => records.push(r),
                    Err(d) => diagnostics.push(d),
                }
            }
            Err(e) => {
                let line = line_at(e.position(), k + 2);
                diagnostics.push(format!("line {line}: {e}"));
            }
        }
    }
    if records.is_empty() && diagnostics.is_empty() {
        diagnostics.push("no data rows".into());
    }
    if !diagnostics.is_empty() {
        diagnostics.sort_by_key(|d| line_of(d));
        return Err(fail(diagnostics));
    }
    let factors = lay.strata.into_iter().map(|(n, _)| n).collect();
    Ok(SurvivalSample::new(factors, records)?)
}

fn line_of(d: &str) -> u64 {
    d.strip_prefix("line ").and_then(|r| r.split(':').next()).and_then(|n| n.parse().ok()).unwrap_or(u64::MAX)
}

pub fn read_dataset(path: &Path) -> Result<SurvivalSample, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    parse_dataset(&text, path)
}

/// Serialize a sample in the dataset format. Times use the shortest decimal
/// that round-trips, so parsing the output gives back the same sample.
pub fn write_dataset<W: Write>(sample: &SurvivalSample, out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["time".to_string(), "event".into(), "arm".into()];
    header.extend(sample.factors().iter().map(|f| format!("s:{f}")));
    w.write_record(&header)?;
    for r in sample.records() {
        let mut row = vec![format!("{}", r.time), if r.event { "1" } else { "0" }.to_string(), r.arm.to_string()];
        row.extend(r.strata.iter().cloned());
        w.write_record(&row)?;
    }
    w.flush()
}
