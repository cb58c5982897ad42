use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{BatchSummary, MeanStd, SessionOutcome, SessionReport};
use crate::pref::{Side, BELIEF_TRACE_HEADER};
use crate::sim::LogError;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("log: {0}")]
    Log(#[from] LogError),
    #[error("invalid report {path}: {message}")]
    InvalidReport { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, csv::Error> {
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub const HANDSHAKE_CSV_HEADER: [&str; 17] = [
    "session_id",
    "log_id",
    "phase",
    "trial",
    "side",
    "chosen",
    "amplitude_cm",
    "frequency_hz",
    "stiffness",
    "amplitude_error_pct",
    "frequency_error_pct",
    "dtw_m",
    "plv",
    "mean_torque_nm",
    "mean_power_w",
    "actual_amplitude_m",
    "log_sha256",
];

/// One metrics row per handshake of `report`.
pub fn write_handshake_rows<W: Write>(w: &mut csv::Writer<W>, report: &SessionReport) -> Result<(), csv::Error> {
    let mut row = |phase: &str, trial: usize, side: &str, chosen: Option<bool>, h: &super::HandshakeRecord| {
        let m = &h.metrics;
        w.write_record([
            report.session_id.clone(),
            h.log_id.clone(),
            phase.to_string(),
            trial.to_string(),
            side.to_string(),
            chosen.map(|c| c.to_string()).unwrap_or_default(),
            num(h.params.amplitude_cm()),
            num(h.params.frequency_hz),
            num(h.params.stiffness),
            opt(m.amplitude_error_pct),
            opt(m.frequency_error_pct),
            num(m.dtw_m),
            opt(m.plv),
            num(m.mean_torque_nm),
            num(m.mean_power_w),
            num(m.actual_amplitude_m),
            h.log_sha256.clone(),
        ])
    };
    for t in &report.training {
        row("training", t.trial, "left", Some(t.selected == Side::Left), &t.left)?;
        row("training", t.trial, "right", Some(t.selected == Side::Right), &t.right)?;
    }
    row("optimized", 0, "", None, &report.optimized)?;
    for v in &report.validation {
        row("validation", v.trial, "left", Some(v.selected == Side::Left), &v.left)?;
        row("validation", v.trial, "right", Some(v.selected == Side::Right), &v.right)?;
    }
    Ok(())
}

pub fn handshakes_csv(reports: &[&SessionReport]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HANDSHAKE_CSV_HEADER)?;
    for r in reports {
        write_handshake_rows(&mut w, r)?;
    }
    Ok(String::from_utf8(finish(w)?).expect("csv output is utf-8"))
}

pub fn belief_trace_csv(report: &SessionReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BELIEF_TRACE_HEADER)?;
    for r in &report.belief_trace {
        let mut rec = vec![r.trial.to_string(), num(r.amplitude_cm), num(r.frequency_hz), num(r.stiffness)];
        rec.extend(r.mean.iter().copied().map(num));
        rec.extend(r.std.iter().copied().map(num));
        w.write_record(rec)?;
    }
    Ok(String::from_utf8(finish(w)?).expect("csv output is utf-8"))
}

/// Write `report.json`, `handshakes.csv`, `belief_trace.csv` and
/// `logs/<id>.{csv,json}` under `dir`.
pub fn write_session(outcome: &SessionOutcome, dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    let logs_dir = dir.join("logs");
    fs::create_dir_all(&logs_dir).map_err(io_err(&logs_dir))?;
    let report = &outcome.report;
    let mut written = Vec::new();
    let mut put = |path: PathBuf, bytes: &[u8]| -> Result<(), ExportError> {
        write_file(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    put(dir.join("report.json"), report.to_json().as_bytes())?;
    put(dir.join("handshakes.csv"), handshakes_csv(&[report])?.as_bytes())?;
    put(dir.join("belief_trace.csv"), belief_trace_csv(report)?.as_bytes())?;
    for (id, log) in &outcome.logs {
        put(logs_dir.join(format!("{id}.csv")), log.to_csv_string().as_bytes())?;
        let envelope = serde_json::to_string_pretty(&log.envelope()).expect("envelope serializes");
        put(logs_dir.join(format!("{id}.json")), envelope.as_bytes())?;
    }
    Ok(written)
}

/// Read and validate a report written by [`write_session`].
pub fn read_report(path: &Path) -> Result<SessionReport, ExportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    SessionReport::from_json(&text).map_err(|message| ExportError::InvalidReport {
        path: path.display().to_string(),
        message,
    })
}

fn mean_std_cells(m: &MeanStd) -> [String; 3] {
    [opt(m.mean), opt(m.std), m.n.to_string()]
}

/// Write `batch.json`, `optimized_params.csv`, `categories.csv`,
/// `correlation.csv` and `handshakes.csv` under `dir`.
pub fn write_batch(summary: &BatchSummary, reports: &[SessionReport], dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let path = dir.join("batch.json");
    write_file(&path, serde_json::to_string_pretty(summary).expect("summary serializes").as_bytes())?;
    written.push(path);

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["parameter", "mean", "std", "n"])?;
    let p = &summary.optimized_params;
    for (name, m) in [("amplitude_cm", &p.amplitude_cm), ("frequency_hz", &p.frequency_hz), ("stiffness", &p.stiffness)] {
        let [mean, std, n] = mean_std_cells(m);
        w.write_record([name.to_string(), mean, std, n])?;
    }
    let path = dir.join("optimized_params.csv");
    write_file(&path, &finish(w)?)?;
    written.push(path);

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["category", "metric", "mean", "std", "n"])?;
    for c in &summary.categories {
        for (name, m) in [
            ("amplitude_error_pct", &c.amplitude_error_pct),
            ("frequency_error_pct", &c.frequency_error_pct),
            ("dtw_m", &c.dtw_m),
            ("plv", &c.plv),
            ("mean_torque_nm", &c.mean_torque_nm),
            ("mean_power_w", &c.mean_power_w),
        ] {
            let [mean, std, n] = mean_std_cells(m);
            w.write_record([c.category.clone(), name.to_string(), mean, std, n])?;
        }
    }
    let path = dir.join("categories.csv");
    write_file(&path, &finish(w)?)?;
    written.push(path);

    let mut w = csv::Writer::from_writer(Vec::new());
    let corr = &summary.correlation;
    w.write_record(std::iter::once(String::new()).chain(corr.names.iter().cloned()))?;
    for (name, row) in corr.names.iter().zip(&corr.values) {
        w.write_record(std::iter::once(name.clone()).chain(row.iter().map(|v| opt(*v))))?;
    }
    let path = dir.join("correlation.csv");
    write_file(&path, &finish(w)?)?;
    written.push(path);

    let path = dir.join("handshakes.csv");
    let refs: Vec<&SessionReport> = reports.iter().collect();
    write_file(&path, handshakes_csv(&refs)?.as_bytes())?;
    written.push(path);
    Ok(written)
}
