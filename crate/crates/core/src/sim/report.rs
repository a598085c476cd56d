//! Experiment reports and their CSV rendering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::fmt17;
use crate::stats::Proportion;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// A named scalar. Stochastic metrics carry a standard error and trial count;
/// empirical probabilities also carry a 95% Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub group: String,
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilson_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilson_high: Option<f64>,
}

impl Metric {
    pub fn exact(group: &str, name: &str, value: f64) -> Self {
        Self {
            group: group.into(),
            name: name.into(),
            value,
            std_error: None,
            trials: None,
            wilson_low: None,
            wilson_high: None,
        }
    }

    pub fn estimate(group: &str, name: &str, value: f64, std_error: f64, trials: u64) -> Self {
        Self { std_error: Some(std_error), trials: Some(trials), ..Self::exact(group, name, value) }
    }

    pub fn proportion(group: &str, name: &str, p: &Proportion) -> Self {
        Self {
            std_error: Some(p.std_error),
            trials: Some(p.trials),
            wilson_low: Some(p.wilson_low),
            wilson_high: Some(p.wilson_high),
            ..Self::exact(group, name, p.value)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt17::format(*x),
            Cell::Text(t) => csv_text(t),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

fn csv_text(t: &str) -> String {
    if t.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", t.replace('"', "\"\""))
    } else {
        t.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Header row plus one line per row, `\n`-terminated.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.iter().map(|c| csv_text(c)).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// Wall-clock measurement summarized over repetitions, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub group: String,
    pub name: String,
    pub repetitions: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl TimingRow {
    pub fn from_samples(group: &str, name: &str, mut seconds: Vec<f64>) -> Self {
        seconds.sort_by(f64::total_cmp);
        let n = seconds.len();
        let median = if n % 2 == 1 { seconds[n / 2] } else { 0.5 * (seconds[n / 2 - 1] + seconds[n / 2]) };
        Self { group: group.into(), name: name.into(), repetitions: n, min: seconds[0], median, max: seconds[n - 1] }
    }
}

/// Everything that depends on the clock or the machine.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSection {
    pub threads: usize,
    pub total_seconds: f64,
    pub rows: Vec<TimingRow>,
}

impl TimingSection {
    pub fn to_csv(&self) -> String {
        let mut t = Table::new("timing", &["group", "name", "repetitions", "min_s", "median_s", "max_s"]);
        for r in &self.rows {
            t.push(vec![
                r.group.as_str().into(),
                r.name.as_str().into(),
                r.repetitions.into(),
                r.min.into(),
                r.median.into(),
                r.max.into(),
            ]);
        }
        t.to_csv()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub library_version: String,
    pub kind: String,
    pub seed: u64,
    /// The fully resolved configuration, defaults included.
    pub config: ExperimentConfig,
    /// Definitions and conventions the numbers depend on.
    pub metadata: BTreeMap<String, String>,
    pub metrics: Vec<Metric>,
    pub tables: Vec<Table>,
    /// Noteworthy events such as skipped comparisons or unsupported sums.
    pub events: Vec<String>,
    /// Excluded from reproducibility comparisons.
    pub timing: TimingSection,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            library_version: crate::VERSION.into(),
            kind: config.experiment.kind().into(),
            seed: config.seed,
            config: config.clone(),
            metadata: BTreeMap::new(),
            metrics: Vec::new(),
            tables: Vec::new(),
            events: Vec::new(),
            timing: TimingSection::default(),
        }
    }

    pub fn metric(&self, group: &str, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.group == group && m.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn metrics_csv(&self) -> String {
        let mut t = Table::new(
            "metrics",
            &["group", "name", "value", "std_error", "trials", "wilson_low", "wilson_high"],
        );
        for m in &self.metrics {
            t.push(vec![
                m.group.as_str().into(),
                m.name.as_str().into(),
                m.value.into(),
                m.std_error.into(),
                m.trials.map_or(Cell::Empty, Cell::from),
                m.wilson_low.into(),
                m.wilson_high.into(),
            ]);
        }
        t.to_csv()
    }

    /// `(file name, contents)` for every CSV artifact except timing.
    pub fn csv_files(&self) -> Vec<(String, String)> {
        let mut out = vec![("metrics.csv".to_string(), self.metrics_csv())];
        for t in &self.tables {
            out.push((format!("{}.csv", t.name), t.to_csv()));
        }
        out
    }

    /// Report JSON with the timing section zeroed, for reproducibility checks.
    pub fn deterministic_json(&self) -> String {
        let mut r = self.clone();
        r.timing = TimingSection::default();
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
