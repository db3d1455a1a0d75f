//! Versioned results CSV: one row per (scenario, replicate, method).

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use cmprisk::metrics::MetricsReport;

use crate::config::{Cell, Method};

pub const RESULTS_HEADER: &str = "# cmprisk-lab results v1";

pub const COLUMNS: [&str; 17] = [
    "scenario", "n", "p", "cortype", "r", "r_b", "model", "replicate", "method", "status", "tpr", "fdr",
    "betaerr", "cindex", "auc10", "ibs10", "wall_seconds",
];

/// Metric columns, in file order.
pub const METRICS: [&str; 6] = ["tpr", "fdr", "betaerr", "cindex", "auc10", "ibs10"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Failed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Success => "success",
            Status::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub n: usize,
    pub p: usize,
    pub cortype: String,
    pub r: f64,
    pub r_b: f64,
    pub model: String,
    pub replicate: usize,
    pub method: String,
    pub status: Status,
    /// In `METRICS` order.
    pub metrics: [Option<f64>; 6],
    pub wall_seconds: Option<f64>,
}

impl ResultRow {
    pub fn new(cell: &Cell, replicate: usize, method: Method, status: Status, report: &MetricsReport, wall: f64) -> Self {
        let s = &cell.spec;
        Self {
            scenario: cell.id.clone(),
            n: s.n,
            p: s.p,
            cortype: s.cortype.to_string(),
            r: s.r,
            r_b: s.r_b,
            model: s.model.to_string(),
            replicate,
            method: method.name().to_string(),
            status,
            metrics: [report.tpr, report.fdr, report.betaerr, report.cindex, report.auc_t, report.ibs_t],
            wall_seconds: Some(wall),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        METRICS.iter().position(|m| *m == name).and_then(|i| self.metrics[i])
    }

    /// Value of any column as written to the file.
    pub fn field(&self, column: &str) -> Option<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        Some(match column {
            "scenario" => self.scenario.clone(),
            "n" => self.n.to_string(),
            "p" => self.p.to_string(),
            "cortype" => self.cortype.clone(),
            "r" => self.r.to_string(),
            "r_b" => self.r_b.to_string(),
            "model" => self.model.clone(),
            "replicate" => self.replicate.to_string(),
            "method" => self.method.clone(),
            "status" => self.status.to_string(),
            "wall_seconds" => opt(self.wall_seconds),
            m if METRICS.contains(&m) => opt(self.metric(m)),
            _ => return None,
        })
    }
}

/// Write rows under the version header. Wall-clock times are dropped unless
/// `wall_clock` is set, so repeated runs give identical bytes.
pub fn write_results<W: Write>(mut writer: W, rows: &[ResultRow], wall_clock: bool) -> Result<()> {
    writeln!(writer, "{RESULTS_HEADER}")?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for row in rows {
        let mut row = row.clone();
        if !wall_clock {
            row.wall_seconds = None;
        }
        w.write_record(COLUMNS.iter().map(|c| row.field(c).expect("known column")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_results(path: &Path, rows: &[ResultRow], wall_clock: bool) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut buf = std::io::BufWriter::new(file);
    write_results(&mut buf, rows, wall_clock)?;
    buf.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn parse_opt(s: &str, what: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).with_context(|| format!("row {line}: bad {what} `{s}`"))
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut lines = BufReader::new(reader);
    let mut first = String::new();
    lines.read_line(&mut first)?;
    if first.trim_end() != RESULTS_HEADER {
        bail!("not a results file: expected `{RESULTS_HEADER}` on the first line");
    }
    let mut r = csv::Reader::from_reader(lines);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        bail!("unexpected results columns: {}", header.join(","));
    }
    let mut rows = Vec::new();
    for (k, record) in r.records().enumerate() {
        let rec = record?;
        let line = k + 3;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            parse_opt(get(i), COLUMNS[i], line)?.with_context(|| format!("row {line}: missing {}", COLUMNS[i]))
        };
        let mut metrics = [None; 6];
        for (m, slot) in metrics.iter_mut().enumerate() {
            *slot = parse_opt(get(10 + m), METRICS[m], line)?;
        }
        rows.push(ResultRow {
            scenario: get(0).to_string(),
            n: num(1)? as usize,
            p: num(2)? as usize,
            cortype: get(3).to_string(),
            r: num(4)?,
            r_b: num(5)?,
            model: get(6).to_string(),
            replicate: num(7)? as usize,
            method: get(8).to_string(),
            status: match get(9) {
                "success" => Status::Success,
                "failed" => Status::Failed,
                other => bail!("row {line}: unknown status `{other}`"),
            },
            metrics,
            wall_seconds: parse_opt(get(16), "wall_seconds", line)?,
        });
    }
    Ok(rows)
}

pub fn load_results(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_results(file).with_context(|| format!("reading {}", path.display()))
}
