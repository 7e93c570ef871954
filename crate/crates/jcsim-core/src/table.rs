//! Result rows, CSV emission and read-back.
//!
//! Columns are `sinr_db,metric,series,value,ci,trials,seed`; floats carry
//! nine significant digits. Values are rounded to that precision when a row
//! is pushed, so a written table reads back unchanged.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Metric;
use crate::error::{Error, Result};

pub const HEADER: [&str; 7] = ["sinr_db", "metric", "series", "value", "ci", "trials", "seed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sinr_db: f64,
    pub metric: Metric,
    /// Estimator, bound or CSI case.
    pub series: String,
    pub value: f64,
    /// 95% confidence halfwidth; zero for deterministic values.
    pub ci: f64,
    pub trials: usize,
    pub seed: u64,
}

/// `x` rounded to nine significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if x.is_finite() {
        format_sig9(x).parse().unwrap_or(x)
    } else {
        x
    }
}

pub fn format_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, mut row: ResultRow) {
        row.sinr_db = round_sig9(row.sinr_db);
        row.value = round_sig9(row.value);
        row.ci = round_sig9(row.ci);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    pub fn get(&self, sinr_db: f64, metric: Metric, series: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.series == series && (r.sinr_db - sinr_db).abs() < 1e-9)
    }

    /// Series present for `metric`, in first-seen order.
    pub fn series(&self, metric: Metric) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in self.rows.iter().filter(|r| r.metric == metric) {
            if !out.contains(&r.series.as_str()) {
                out.push(&r.series);
            }
        }
        out
    }

    /// Rows whose metric is in `metrics`.
    pub fn filter(&self, metrics: &[Metric]) -> Result<ResultTable> {
        if metrics.is_empty() {
            return Err(Error::UnknownMetric {
                name: String::new(),
                available: Metric::available(),
            });
        }
        Ok(ResultTable {
            rows: self
                .rows
                .iter()
                .filter(|r| metrics.contains(&r.metric))
                .cloned()
                .collect(),
        })
    }

    /// Filter by metric names as typed by a user.
    pub fn filter_names(&self, names: &[&str]) -> Result<ResultTable> {
        let metrics = names.iter().map(|n| n.parse()).collect::<Result<Vec<Metric>>>()?;
        self.filter(&metrics)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(HEADER)?;
        for r in &self.rows {
            out.write_record([
                format_sig9(r.sinr_db),
                r.metric.name().to_string(),
                r.series.clone(),
                format_sig9(r.value),
                format_sig9(r.ci),
                r.trials.to_string(),
                r.seed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(r);
        let header = input.headers()?.clone();
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(Error::InvalidConfig(format!(
                "unexpected CSV header `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut table = ResultTable::new();
        for rec in input.deserialize::<RawRow>() {
            let rec = rec?;
            table.rows.push(ResultRow {
                sinr_db: rec.sinr_db,
                metric: rec.metric.parse()?,
                series: rec.series,
                value: rec.value,
                ci: rec.ci,
                trials: rec.trials,
                seed: rec.seed,
            });
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

#[derive(Deserialize)]
struct RawRow {
    sinr_db: f64,
    metric: String,
    series: String,
    value: f64,
    ci: f64,
    trials: usize,
    seed: u64,
}

/// Sample mean and 95% normal-approximation halfwidth.
pub fn mean_ci(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}
