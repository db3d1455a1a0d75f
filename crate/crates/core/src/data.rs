//! Right-censored competing-risk observations.
//!
//! A record carries the observed time `T = min(T*, C)`, a status (0 for
//! censored, `k` for an observed event of type `k`) and a covariate vector.
//! Datasets are immutable once built.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub time: f64,
    pub status: u32,
    pub covariates: Vec<f64>,
}

impl SubjectRecord {
    pub fn new(time: f64, status: u32, covariates: Vec<f64>) -> Self {
        Self {
            time,
            status,
            covariates,
        }
    }

    pub fn is_censored(&self) -> bool {
        self.status == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<SubjectRecord>,
    p: usize,
    n_causes: u32,
    covariate_names: Vec<String>,
}

/// Column mapping for [`Dataset::load_csv`].
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub time: String,
    pub status: String,
    /// Explicit covariate columns; `None` takes every remaining column in file order.
    pub covariates: Option<Vec<String>>,
    /// Declared number of event types; `None` infers the maximum observed status.
    pub n_causes: Option<u32>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            time: "time".into(),
            status: "status".into(),
            covariates: None,
            n_causes: None,
        }
    }
}

impl Dataset {
    /// Validates every record. Row numbers in errors are 1-based.
    pub fn new(
        records: Vec<SubjectRecord>,
        n_causes: u32,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let p = covariate_names.len();
        let mut bad_time = Vec::new();
        let mut bad_status = Vec::new();
        let mut bad_len = Vec::new();
        let mut bad_value = Vec::new();
        for (i, r) in records.iter().enumerate() {
            if !(r.time.is_finite() && r.time > 0.0) {
                bad_time.push(i + 1);
            }
            if r.status > n_causes {
                bad_status.push(i + 1);
            }
            if r.covariates.len() != p {
                bad_len.push(i + 1);
            } else if r.covariates.iter().any(|v| !v.is_finite()) {
                bad_value.push(i + 1);
            }
        }
        if !bad_time.is_empty() {
            return Err(Error::Validation {
                message: "observed time must be positive".into(),
                rows: bad_time,
            });
        }
        if !bad_status.is_empty() {
            return Err(Error::Validation {
                message: format!("status exceeds the number of event types ({n_causes})"),
                rows: bad_status,
            });
        }
        if !bad_len.is_empty() {
            return Err(Error::Validation {
                message: format!("expected {p} covariates"),
                rows: bad_len,
            });
        }
        if !bad_value.is_empty() {
            return Err(Error::Validation {
                message: "covariate values must be finite numbers".into(),
                rows: bad_value,
            });
        }
        Ok(Self {
            records,
            p,
            n_causes,
            covariate_names,
        })
    }

    /// Convenience constructor naming covariates `x1..xp`.
    pub fn from_records(records: Vec<SubjectRecord>, n_causes: u32) -> Result<Self> {
        let p = records.first().map_or(0, |r| r.covariates.len());
        Self::new(records, n_causes, default_names(p))
    }

    pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, schema)
    }

    pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
        };
        let time_col = find(&schema.time)?;
        let status_col = find(&schema.status)?;
        let cov_cols: Vec<usize> = match &schema.covariates {
            Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
            None => (0..headers.len())
                .filter(|&c| c != time_col && c != status_col)
                .collect(),
        };
        let names: Vec<String> = cov_cols.iter().map(|&c| headers[c].to_string()).collect();

        let mut records = Vec::new();
        let mut unparsable = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |c: usize| rec.get(c).and_then(|s| s.parse::<f64>().ok());
            let time = parse(time_col);
            let status = rec.get(status_col).and_then(|s| s.parse::<u32>().ok());
            let covs: Option<Vec<f64>> = cov_cols.iter().map(|&c| parse(c)).collect();
            match (time, status, covs) {
                (Some(time), Some(status), Some(covariates)) => records.push(SubjectRecord {
                    time,
                    status,
                    covariates,
                }),
                _ => unparsable.push(row + 1),
            }
        }
        if !unparsable.is_empty() {
            return Err(Error::Validation {
                message: "unparsable or missing values".into(),
                rows: unparsable,
            });
        }
        let n_causes = schema
            .n_causes
            .unwrap_or_else(|| records.iter().map(|r| r.status).max().unwrap_or(0));
        Self::new(records, n_causes, names)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "status".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.time.to_string(), r.status.to_string()];
            row.extend(r.covariates.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_causes(&self) -> u32 {
        self.n_causes
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn time(&self, i: usize) -> f64 {
        self.records[i].time
    }

    pub fn status(&self, i: usize) -> u32 {
        self.records[i].status
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.records[i].covariates
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.covariates[j]).collect()
    }

    pub fn max_time(&self) -> f64 {
        self.records.iter().map(|r| r.time).fold(0.0, f64::max)
    }

    pub fn count_events(&self, cause: u32) -> usize {
        self.records.iter().filter(|r| r.status == cause).count()
    }

    pub fn has_events(&self) -> bool {
        self.records.iter().any(|r| r.status >= 1)
    }

    /// New dataset holding the given rows (duplicates allowed).
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            p: self.p,
            n_causes: self.n_causes,
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Keep only the first `p` covariate columns.
    pub fn subset_covariates(&self, p: usize) -> Self {
        let p = p.min(self.p);
        Self {
            records: self
                .records
                .iter()
                .map(|r| SubjectRecord::new(r.time, r.status, r.covariates[..p].to_vec()))
                .collect(),
            p,
            n_causes: self.n_causes,
            covariate_names: self.covariate_names[..p].to_vec(),
        }
    }

    /// Same outcomes with a replacement covariate matrix (row-major, n x p').
    pub fn with_covariates(&self, rows: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if rows.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "expected {} covariate rows, got {}",
                self.n(),
                rows.len()
            )));
        }
        let records = self
            .records
            .iter()
            .zip(rows)
            .map(|(r, x)| SubjectRecord::new(r.time, r.status, x))
            .collect();
        Self::new(records, self.n_causes, names)
    }

    /// Sorted distinct times at which any event (status >= 1) was observed.
    pub fn distinct_event_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.status >= 1)
            .map(|r| r.time)
            .collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Indices `i` with `T_i >= t` (0-based).
    pub fn risk_set(&self, t: f64) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.time >= t)
            .map(|(i, _)| i)
            .collect()
    }

    /// `(d_k(t), d(t), Y(t))`: type-`k` events at `t`, all events at `t`, and the
    /// number at risk. A censoring tied with `t` counts as at risk.
    pub fn event_counts(&self, t: f64, cause: u32) -> (usize, usize, usize) {
        let mut dk = 0;
        let mut d = 0;
        let mut y = 0;
        for r in &self.records {
            if r.time >= t {
                y += 1;
            }
            if r.time == t && r.status >= 1 {
                d += 1;
                if r.status == cause {
                    dk += 1;
                }
            }
        }
        (dk, d, y)
    }

    /// Indices of covariates whose names are listed, in the listed order.
    pub fn covariate_indices(&self, names: &[&str]) -> Result<Vec<usize>> {
        let lookup: HashSet<&str> = names.iter().copied().collect();
        if lookup.len() != names.len() {
            return Err(Error::InvalidInput("duplicate covariate names".into()));
        }
        names
            .iter()
            .map(|n| {
                self.covariate_names
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::Schema(format!("unknown covariate `{n}`")))
            })
            .collect()
    }
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}


#[cfg(test)]
mod tests {
    use super::fixtures::d3;
    use super::*;

    #[test]
    fn parses_three_row_file_without_covariates() {
        let csv = "time,status\n1,1\n2,0\n3,2\n";
        let ds = Dataset::read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!((ds.n(), ds.p(), ds.n_causes()), (3, 0, 2));
        assert_eq!(ds, d3());
    }

    #[test]
    fn zero_time_names_the_row() {
        let csv = "time,status,x1\n0,1,0.5\n2,0,1\n";
        match Dataset::read_csv(csv.as_bytes(), &CsvSchema::default()) {
            Err(Error::Validation { rows, .. }) => assert_eq!(rows, vec![1]),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn status_above_declared_causes_is_rejected() {
        let csv = "time,status\n1,3\n2,1\n";
        let schema = CsvSchema {
            n_causes: Some(2),
            ..CsvSchema::default()
        };
        match Dataset::read_csv(csv.as_bytes(), &schema) {
            Err(Error::Validation { rows, .. }) => assert_eq!(rows, vec![1]),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "t,status\n1,1\n";
        assert!(matches!(
            Dataset::read_csv(csv.as_bytes(), &CsvSchema::default()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn missing_covariate_value_is_rejected() {
        let csv = "time,status,x1\n1,1,\n2,0,1\n";
        match Dataset::read_csv(csv.as_bytes(), &CsvSchema::default()) {
            Err(Error::Validation { rows, .. }) => assert_eq!(rows, vec![1]),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn risk_sets() {
        let ds = d3();
        assert_eq!(ds.risk_set(2.0), vec![1, 2]);
        assert_eq!(ds.risk_set(1.0), vec![0, 1, 2]);
        assert!(ds.risk_set(3.5).is_empty());
    }

    #[test]
    fn event_counts_are_tie_aware() {
        let ds = d3();
        assert_eq!(ds.event_counts(1.0, 1), (1, 1, 3));
        assert_eq!(ds.event_counts(2.0, 1), (0, 0, 2));
        assert_eq!(ds.event_counts(3.0, 2), (1, 1, 1));
    }

    #[test]
    fn explicit_covariate_selection() {
        let csv = "a,time,b,status\n1,1,2,1\n3,2,4,0\n";
        let schema = CsvSchema {
            covariates: Some(vec!["b".into()]),
            ..CsvSchema::default()
        };
        let ds = Dataset::read_csv(csv.as_bytes(), &schema).unwrap();
        assert_eq!(ds.p(), 1);
        assert_eq!(ds.column(0), vec![2.0, 4.0]);
        let ds = Dataset::read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(ds.covariate_names(), &["a".to_string(), "b".to_string()]);
    }
}
