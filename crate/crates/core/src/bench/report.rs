use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::sweep::SweepRow;
use super::BenchError;
use crate::io::{atomic_write, format_float};

pub const CSV_HEADER: &str = "sweep,x,estimator,condition,mean_deg,std_deg,n_sessions,n_samples";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

fn io_err(e: impl std::fmt::Display) -> BenchError {
    BenchError::Io(e.to_string())
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String, BenchError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    w.write_record(CSV_HEADER.split(',')).map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.sweep.clone(),
            format_float(r.x),
            r.estimator.clone(),
            r.condition.clone(),
            format_float(r.mean_deg),
            format_float(r.std_deg),
            r.n_sessions.to_string(),
            r.n_samples.to_string(),
        ])
        .map_err(io_err)?;
    }
    String::from_utf8(w.into_inner().map_err(io_err)?).map_err(io_err)
}

pub fn parse_rows_csv(text: &str) -> Result<Vec<SweepRow>, BenchError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| BenchError::Parse { line: 1, message: e.to_string() })?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(BenchError::Parse { line: 1, message: format!("expected header `{CSV_HEADER}`") });
    }
    let mut rows = vec![];
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| BenchError::Parse { line, message: e.to_string() })?;
        let bad = |field: &str| BenchError::Parse { line, message: format!("invalid {field}") };
        let f = |k: usize, name: &str| rec[k].parse::<f64>().map_err(|_| bad(name));
        let u = |k: usize, name: &str| rec[k].parse::<usize>().map_err(|_| bad(name));
        if rec.len() != 8 {
            return Err(BenchError::Parse { line, message: format!("expected 8 fields, got {}", rec.len()) });
        }
        rows.push(SweepRow {
            sweep: rec[0].to_string(),
            x: f(1, "x")?,
            estimator: rec[2].to_string(),
            condition: rec[3].to_string(),
            mean_deg: f(4, "mean_deg")?,
            std_deg: f(5, "std_deg")?,
            n_sessions: u(6, "n_sessions")?,
            n_samples: u(7, "n_samples")?,
        });
    }
    Ok(rows)
}

pub fn rows_to_json(rows: &[SweepRow]) -> Result<String, BenchError> {
    let mut s = serde_json::to_string_pretty(rows).map_err(io_err)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_rows_json(text: &str) -> Result<Vec<SweepRow>, BenchError> {
    serde_json::from_str(text).map_err(|e| BenchError::Parse { line: e.line(), message: e.to_string() })
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// One `x mean std n_sessions` data file per (sweep, estimator, condition) series.
pub fn write_gnuplot(rows: &[SweepRow], dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let mut series: BTreeMap<(String, String, String), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        series.entry((r.sweep.clone(), r.estimator.clone(), r.condition.clone())).or_default().push(r);
    }
    let mut paths = vec![];
    for ((sweep, est, cond), rs) in series {
        let mut text = format!("# {sweep} sweep, estimator {est}, condition {cond}\n# x mean_deg std_deg n_sessions\n");
        for r in rs {
            text.push_str(&format!("{} {} {} {}\n", format_float(r.x), format_float(r.mean_deg), format_float(r.std_deg), r.n_sessions));
        }
        let path = dir.join(format!("{}_{}_{}.dat", slug(&sweep), slug(&est), slug(&cond)));
        atomic_write(&path, text.as_bytes()).map_err(io_err)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes `results.csv` or `results.json` (plus gnuplot series when requested) into `dir`.
pub fn report(rows: &[SweepRow], format: ReportFormat, dir: &Path, gnuplot: bool) -> Result<Vec<PathBuf>, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::EmptyResults);
    }
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let (name, text) = match format {
        ReportFormat::Csv => ("results.csv", rows_to_csv(rows)?),
        ReportFormat::Json => ("results.json", rows_to_json(rows)?),
    };
    let path = dir.join(name);
    atomic_write(&path, text.as_bytes()).map_err(io_err)?;
    let mut paths = vec![path];
    if gnuplot {
        paths.extend(write_gnuplot(rows, dir)?);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<SweepRow> {
        vec![
            SweepRow {
                sweep: "distance".into(),
                x: 300.0,
                estimator: "geometric".into(),
                condition: "indoor".into(),
                mean_deg: 0.1 + 0.2,
                std_deg: 1.0 / 3.0,
                n_sessions: 20,
                n_samples: 400,
            },
            SweepRow {
                sweep: "distance".into(),
                x: 1800.0,
                estimator: "stream:a,b".into(),
                condition: "glasses".into(),
                mean_deg: std::f64::consts::PI,
                std_deg: 1e-300,
                n_sessions: 1,
                n_samples: 20,
            },
        ]
    }

    #[test]
    fn csv_and_json_round_trip_exactly() {
        let csv = rows_to_csv(&rows()).unwrap();
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(parse_rows_csv(&csv).unwrap(), rows());
        assert_eq!(parse_rows_json(&rows_to_json(&rows()).unwrap()).unwrap(), rows());
        assert_eq!(rows_to_csv(&rows()).unwrap(), csv);
    }

    #[test]
    fn empty_results_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(report(&[], ReportFormat::Csv, dir.path(), false), Err(BenchError::EmptyResults));
    }

    #[test]
    fn report_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let paths = report(&rows(), ReportFormat::Json, dir.path(), true).unwrap();
        assert_eq!(paths.len(), 3);
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(parse_rows_json(&text).unwrap(), rows());
    }

    #[test]
    fn malformed_csv_reports_line() {
        let text = format!("{CSV_HEADER}\ndistance,abc,g,indoor,1,1,1,1\n");
        assert_eq!(parse_rows_csv(&text), Err(BenchError::Parse { line: 2, message: "invalid x".into() }));
    }
}
