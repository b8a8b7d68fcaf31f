//! Experiment reports: one JSON document per run, CSV tables for sequences,
//! and grid functions in their text format.

use std::fs;
use std::path::Path;

use blsat_core::{Error, GaussianTuple, GridFunction, SymmetricMatrix};
use serde_json::{json, Map, Value};

use crate::config::Command;
use crate::{EXIT_INFEASIBLE, EXIT_NOT_CONVERGED, EXIT_OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Infeasible,
    Unbounded,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Self::Ok => EXIT_OK,
            Self::Infeasible | Self::Unbounded => EXIT_INFEASIBLE,
            Self::NotConverged => EXIT_NOT_CONVERGED,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Infeasible => "infeasible",
            Self::Unbounded => "unbounded",
            Self::NotConverged => "not_converged",
        }
    }

    /// The status a core error stands for, if it is an outcome rather than bad input.
    pub fn of_error(e: &Error) -> Option<Self> {
        match e {
            Error::Infeasible(_) => Some(Self::Infeasible),
            Error::Unbounded { .. } => Some(Self::Unbounded),
            Error::NotConverged { .. } => Some(Self::NotConverged),
            _ => None,
        }
    }

    /// The more severe of the two: unbounded and infeasible outrank non-convergence.
    pub fn worst(self, other: Self) -> Self {
        let rank = |s: Self| match s {
            Self::Ok => 0,
            Self::NotConverged => 1,
            Self::Infeasible | Self::Unbounded => 2,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

/// A finite number as a JSON number; `inf`, `-inf`, `nan` as strings.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::String(text(v))
    }
}

/// Shortest decimal that round-trips, or `inf`/`-inf`/`nan`.
pub fn text(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

pub fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| num(*x)).collect())
}

pub fn matrix(a: &SymmetricMatrix) -> Value {
    Value::Array(a.rows().iter().map(|r| nums(r)).collect())
}

pub fn tuple(t: &GaussianTuple) -> Value {
    Value::Array(t.blocks().iter().map(matrix).collect())
}

/// Column-oriented sequence data, written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => match n.as_f64() {
                        Some(f) if !n.is_i64() && !n.is_u64() => text(f),
                        _ => n.to_string(),
                    },
                    other => other.to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub command: Command,
    pub status: Status,
    pub config: Value,
    pub seed: Option<u64>,
    pub results: Map<String, Value>,
    pub tables: Vec<Table>,
    /// Output grid functions, written as `<name>.txt`.
    pub grids: Vec<(String, GridFunction)>,
    pub error: Option<String>,
}

impl ExperimentReport {
    pub fn new(command: Command, config: Value, seed: Option<u64>) -> Self {
        Self {
            command,
            status: Status::Ok,
            config,
            seed,
            results: Map::new(),
            tables: Vec::new(),
            grids: Vec::new(),
            error: None,
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.into(), value.into());
    }

    pub fn set_num(&mut self, key: &str, value: f64) {
        self.set(key, num(value));
    }

    pub fn degrade(&mut self, status: Status) {
        self.status = self.status.worst(status);
    }

    /// Names of the files [`write`](Self::write) produces besides the report.
    pub fn file_names(&self) -> Vec<String> {
        let tables = self.tables.iter().map(|t| format!("{}.csv", t.name));
        let grids = self.grids.iter().map(|(n, _)| format!("{n}.txt"));
        tables.chain(grids).collect()
    }

    /// The JSON document. `wall_time_seconds` is the only field that varies
    /// between identical runs.
    pub fn to_json(&self, threads: usize, wall_time_seconds: f64, files: &[String]) -> Value {
        let mut doc = json!({
            "command": self.command.name(),
            "status": self.status.as_str(),
            "config": self.config,
            "results": self.results,
            "files": files,
            "provenance": {
                "blsat_version": env!("CARGO_PKG_VERSION"),
                "core_version": blsat_core::VERSION,
                "seed": self.seed,
                "threads": threads,
                "wall_time_seconds": wall_time_seconds,
            },
        });
        if let Some(e) = &self.error {
            doc["error"] = Value::String(e.clone());
        }
        doc
    }

    /// Writes `report.json`, the CSV tables and the grid functions into `dir`.
    pub fn write(&self, dir: &Path, threads: usize, wall_time_seconds: f64) -> std::io::Result<Value> {
        fs::create_dir_all(dir)?;
        for t in &self.tables {
            fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        for (name, g) in &self.grids {
            fs::write(dir.join(format!("{name}.txt")), g.to_text())?;
        }
        let doc = self.to_json(threads, wall_time_seconds, &self.file_names());
        fs::write(dir.join("report.json"), pretty(&doc) + "\n")?;
        Ok(doc)
    }
}

pub fn pretty(doc: &Value) -> String {
    serde_json::to_string_pretty(doc).expect("JSON values always serialize")
}
