//! CSV artifacts.

use std::path::Path;

use crate::bo::RunRecord;
use crate::error::{HarnessError, Result};

pub const CSV_HEADER: [&str; 7] = ["model", "benchmark", "seed", "iteration", "hv", "hv_gap", "elapsed_ms"];

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub model: String,
    pub benchmark: String,
    pub seed: u64,
    pub iteration: usize,
    pub hv: f64,
    pub hv_gap: f64,
    pub elapsed_ms: f64,
}

/// Mean gap and standard error per (model, iteration).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: String,
    pub iteration: usize,
    pub mean_gap: f64,
    pub std_error: f64,
    pub repetitions: usize,
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path)?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn csv_err(e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => HarnessError::Io(e),
        other => HarnessError::Config(format!("csv: {other:?}")),
    }
}

pub fn emit_csv(rows: &[CsvRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(HarnessError::Config("no rows to write".into()));
    }
    let mut w = writer(path)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.benchmark.clone(),
            r.seed.to_string(),
            r.iteration.to_string(),
            fmt_f64(r.hv),
            fmt_f64(r.hv_gap),
            fmt_f64(r.elapsed_ms),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::ReaderBuilder::new().from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(HarnessError::Config(format!("{}: unexpected header", path.display())));
    }
    let bad = |line: u64, what: &str| HarnessError::Config(format!("{}:{line}: bad {what}", path.display()));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(line, CSV_HEADER[i]));
        rows.push(CsvRow {
            model: rec[0].to_string(),
            benchmark: rec[1].to_string(),
            seed: rec[2].parse().map_err(|_| bad(line, "seed"))?,
            iteration: rec[3].parse().map_err(|_| bad(line, "iteration"))?,
            hv: num(4)?,
            hv_gap: num(5)?,
            elapsed_ms: num(6)?,
        });
    }
    Ok(rows)
}

pub fn emit_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["model", "iteration", "mean_gap", "std_error", "repetitions"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.iteration.to_string(),
            fmt_f64(r.mean_gap),
            fmt_f64(r.std_error),
            r.repetitions.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per fallback iteration; a header alone when there were none.
pub fn emit_failures(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["model", "benchmark", "seed", "iteration", "message"]).map_err(csv_err)?;
    for rec in records {
        for (i, msg) in &rec.warnings {
            w.write_record([rec.model.to_string(), rec.benchmark.clone(), rec.seed.to_string(), i.to_string(), msg.clone()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Chosen inputs and observed objective vectors, one row per iteration.
pub fn emit_observations(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let (dim, objectives) = records
        .first()
        .and_then(|r| r.rows.first())
        .map_or((0, 0), |row| (row.x.len(), row.y.len()));
    let mut header = vec!["model".to_string(), "seed".into(), "iteration".into(), "fallback".into()];
    header.extend((0..dim).map(|d| format!("x{d}")));
    header.extend((0..objectives).map(|o| format!("y{o}")));
    w.write_record(&header).map_err(csv_err)?;
    for rec in records {
        for row in &rec.rows {
            let mut fields =
                vec![rec.model.to_string(), rec.seed.to_string(), row.iteration.to_string(), row.fallback.to_string()];
            fields.extend(row.x.iter().chain(&row.y).map(|v| fmt_f64(*v)));
            w.write_record(&fields).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
