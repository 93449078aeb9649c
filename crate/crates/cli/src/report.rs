use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// One row of a measurement table.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub experiment: String,
    pub n: usize,
    #[serde(rename = "K")]
    pub depth: u32,
    pub m: usize,
    pub gamma: f64,
    pub s_or_xi_or_lambda: f64,
    pub measurement: f64,
    pub envelope: f64,
    pub fitted_slope: Option<f64>,
    pub seed: u64,
}

/// One row of a counterexample table.
#[derive(Clone, Debug, Serialize)]
pub struct CounterRow {
    pub construction: String,
    pub m: usize,
    pub p: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub expected: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Table {
    Measurements(Vec<Row>),
    Counterexamples(Vec<CounterRow>),
}

impl Table {
    pub fn len(&self) -> usize {
        match self {
            Table::Measurements(r) => r.len(),
            Table::Counterexamples(r) => r.len(),
        }
    }
}

/// Everything an experiment produces.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub table: Table,
    pub assertions: Vec<Assertion>,
    pub constants: BTreeMap<String, f64>,
    pub series: BTreeMap<String, Vec<f64>>,
}

impl Outcome {
    pub fn new(table: Table) -> Self {
        Self { table, assertions: Vec::new(), constants: BTreeMap::new(), series: BTreeMap::new() }
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion { name: name.into(), pass, detail: detail.into() });
    }

    pub fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.into(), value);
    }

    pub fn pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

/// JSON summary written next to the CSV.
#[derive(Serialize)]
pub struct Summary<'a> {
    pub experiment: &'a str,
    pub config: &'a ExperimentConfig,
    pub pass: bool,
    pub rows: usize,
    pub csv: String,
    pub assertions: &'a [Assertion],
    pub constants: &'a BTreeMap<String, f64>,
    pub series: &'a BTreeMap<String, Vec<f64>>,
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().context("flushing CSV buffer")
}

pub const MEASUREMENT_COLUMNS: [&str; 10] =
    ["experiment", "n", "K", "m", "gamma", "s_or_xi_or_lambda", "measurement", "envelope", "fitted_slope", "seed"];
pub const COUNTER_COLUMNS: [&str; 8] = ["construction", "m", "p", "lhs", "rhs", "ratio", "expected", "abs_error"];

/// Writes `<stem>.csv` and `<stem>.json` into the output directory, each
/// atomically. Returns the two paths.
pub fn write_outputs(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<(PathBuf, PathBuf)> {
    let dir: &Path = &cfg.out;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = cfg.experiment.file_stem();
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let bytes = match &outcome.table {
        Table::Measurements(rows) => csv_bytes(rows, &MEASUREMENT_COLUMNS)?,
        Table::Counterexamples(rows) => csv_bytes(rows, &COUNTER_COLUMNS)?,
    };
    czlab_core::io::atomic_write(&csv_path, &bytes)?;
    let summary = Summary {
        experiment: cfg.experiment.name(),
        config: cfg,
        pass: outcome.pass(),
        rows: outcome.table.len(),
        csv: format!("{stem}.csv"),
        assertions: &outcome.assertions,
        constants: &outcome.constants,
        series: &outcome.series,
    };
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    czlab_core::io::atomic_write(&json_path, &json)?;
    Ok((csv_path, json_path))
}
