//! Result records and their on-disk forms.

use crate::config::ScenarioConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

pub const RECORD_SCHEMA_VERSION: u32 = 1;
pub const CSV_STAMP: &str = "# rotorqc-series v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tool {
    pub name: String,
    pub version: String,
}

impl Tool {
    pub fn current() -> Self {
        Self { name: "rotorqc".into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    /// RFC 3339 wall-clock time of the run; the only non-reproducible field.
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub value: f64,
    /// One standard error, or a 95% half-width where noted in `unit`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub uncertainty: Option<f64>,
    pub unit: String,
}

/// A table of numbers with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// CSV text: the stamp line, a header, then one line per row.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut buf = format!("{CSV_STAMP} {}\n", self.name).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(|x| format!("{x:e}")))?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub tool: Tool,
    pub provenance: Provenance,
    /// The fully defaulted config; feeding it back reproduces the run.
    pub config: ScenarioConfig,
    pub scalars: BTreeMap<String, Scalar>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub details: Value,
    #[serde(default)]
    pub series: Vec<Series>,
}

impl ResultRecord {
    pub fn new(config: &ScenarioConfig) -> Self {
        Self {
            schema_version: RECORD_SCHEMA_VERSION,
            tool: Tool::current(),
            provenance: Provenance { seed: config.seed, timestamp: None },
            config: config.clone(),
            scalars: BTreeMap::new(),
            warnings: Vec::new(),
            details: Value::Null,
            series: Vec::new(),
        }
    }

    pub fn set(&mut self, name: &str, value: f64, unit: &str) {
        self.scalars.insert(name.into(), Scalar { value, uncertainty: None, unit: unit.into() });
    }

    pub fn set_with_error(&mut self, name: &str, value: f64, uncertainty: f64, unit: &str) {
        self.scalars.insert(name.into(), Scalar { value, uncertainty: Some(uncertainty), unit: unit.into() });
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).map(|s| s.value)
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn stamp_now(&mut self) {
        self.provenance.timestamp = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    }

    /// Everything except the timestamp and the output location, for
    /// reproducibility checks.
    pub fn payload(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("record serializes");
        v["provenance"]["timestamp"] = Value::Null;
        v["config"]["output"] = Value::Null;
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}
