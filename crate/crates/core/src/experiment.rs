// SPDX-License-Identifier: Apache-2.0

//! Experiment records and their CSV/JSON serialisation.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How selection probabilities are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Exact PMFs (quadrature, closed form, enumeration).
    #[default]
    Oracle,
    MonteCarlo,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oracle" => Ok(Mode::Oracle),
            "montecarlo" | "monte-carlo" | "mc" => Ok(Mode::MonteCarlo),
            _ => Err(Error::Precondition(format!(
                "mode must be `oracle` or `montecarlo`, got `{s}`"
            ))),
        }
    }
}

/// One metric for one (application, mechanism, epsilon) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub application: String,
    pub mechanism: String,
    pub epsilon: f64,
    pub delta: f64,
    pub metric: String,
    pub value: f64,
    pub bound: Option<f64>,
    pub seed: u64,
    /// Wall-clock time of the cell; never written to CSV unless timing is
    /// requested, so oracle output stays byte-stable.
    pub runtime_ms: f64,
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

impl ResultRow {
    pub fn rounded(&self) -> Self {
        Self {
            epsilon: round12(self.epsilon),
            delta: round12(self.delta),
            value: round12(self.value),
            bound: self.bound.map(round12),
            runtime_ms: (self.runtime_ms * 1000.0).round() / 1000.0,
            ..self.clone()
        }
    }
}

/// Results plus the configuration that produced them.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult<C: Serialize> {
    pub config: C,
    pub rows: Vec<ResultRow>,
}

impl<C: Serialize> ExperimentResult<C> {
    pub fn new(config: C) -> Self {
        Self {
            config,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    /// CSV with a `# config: {json}` comment line first. Rows are rounded;
    /// `runtime_ms` is only included when `timing` is set.
    pub fn write_csv<W: Write>(&self, out: W, timing: bool) -> Result<()> {
        let mut out = out;
        writeln!(out, "# config: {}", serde_json::to_string(&self.config)?)?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec![
            "application",
            "mechanism",
            "epsilon",
            "delta",
            "metric",
            "value",
            "bound",
            "seed",
        ];
        if timing {
            header.push("runtime_ms");
        }
        w.write_record(&header).map_err(csv_err)?;
        for r in self.rows.iter().map(ResultRow::rounded) {
            let mut rec = vec![
                r.application,
                r.mechanism,
                r.epsilon.to_string(),
                r.delta.to_string(),
                r.metric,
                r.value.to_string(),
                r.bound.map(|b| b.to_string()).unwrap_or_default(),
                r.seed.to_string(),
            ];
            if timing {
                rec.push(r.runtime_ms.to_string());
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pretty JSON with rounded rows (runtime included).
    pub fn to_json(&self) -> Result<String> {
        let rounded = ExperimentResult {
            config: &self.config,
            rows: self.rows.iter().map(ResultRow::rounded).collect(),
        };
        Ok(serde_json::to_string_pretty(&rounded)?)
    }

    /// Writes `<stem>.csv` and `<stem>.json` next to `path`.
    pub fn write_files(&self, path: &Path, timing: bool) -> Result<()> {
        let csv_path = path.with_extension("csv");
        let json_path = path.with_extension("json");
        let file = std::fs::File::create(&csv_path)?;
        self.write_csv(std::io::BufWriter::new(file), timing)?;
        std::fs::write(&json_path, self.to_json()? + "\n")?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Dataset(e.to_string())
}
