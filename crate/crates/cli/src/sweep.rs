//! Parameter sweeps with per-point completion markers.
//!
//! Each finished point is written to `<out>/<name>.points/pNNNN.json`. A rerun
//! reuses every marker whose echoed config matches the point it stands for,
//! so an interrupted sweep resumes where it stopped.

use crate::config::{expand_sweep, ConfigError, Scenario, ScenarioConfig};
use crate::output::write_atomic;
use crate::record::{ResultRecord, Series};
use crate::runner::{run_scenario, RunError};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepOptions {
    /// Ignore existing markers and recompute every point.
    pub fresh: bool,
}

pub fn points_dir(out: &Path, name: &str) -> PathBuf {
    out.join(format!("{name}.points"))
}

fn point_config(config: &ScenarioConfig, index: usize, scenario: Scenario) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("{}-p{index:04}", config.name),
        scenario,
        ..config.clone()
    }
}

fn load_marker(path: &Path, expected: &ScenarioConfig) -> Option<ResultRecord> {
    let text = std::fs::read_to_string(path).ok()?;
    let record: ResultRecord = serde_json::from_str(&text).ok()?;
    (record.config == *expected).then_some(record)
}

fn axis_number(v: &Value, position: usize) -> f64 {
    match v {
        Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
        Value::Bool(b) => *b as u8 as f64,
        // strings and objects are recorded by their position on the axis
        _ => position as f64,
    }
}

/// Run every grid point of a sweep config and tabulate the scalars.
pub fn run_sweep(config: &ScenarioConfig, out: &Path, options: SweepOptions) -> Result<ResultRecord, RunError> {
    config.validate()?;
    let Scenario::Sweep(sweep) = &config.scenario else {
        return Err(RunError::Config(ConfigError::Invalid {
            field: "scenario.kind".into(),
            reason: "expected a sweep".into(),
        }));
    };
    let points = expand_sweep(sweep)?;
    let dir = points_dir(out, &config.name);
    std::fs::create_dir_all(&dir)?;

    let mut records = Vec::with_capacity(points.len());
    let mut resumed = 0;
    for p in &points {
        let pc = point_config(config, p.index, p.scenario.clone());
        let marker = dir.join(format!("p{:04}.json", p.index));
        let existing = if options.fresh { None } else { load_marker(&marker, &pc) };
        let record = match existing {
            Some(r) => {
                resumed += 1;
                r
            }
            None => {
                let mut r = run_scenario(&pc)?;
                r.stamp_now();
                write_atomic(&marker, r.to_json().as_bytes())?;
                r
            }
        };
        records.push(record);
    }

    let scalar_names: Vec<String> = records[0].scalars.keys().cloned().collect();
    let mut columns: Vec<String> = sweep.axes.iter().map(|a| a.parameter.clone()).collect();
    columns.extend(scalar_names.iter().cloned());
    let mut table = Series { name: "table".into(), columns, rows: Vec::new() };
    for (p, r) in points.iter().zip(&records) {
        let mut row: Vec<f64> = p
            .values
            .iter()
            .zip(&sweep.axes)
            .map(|((_, v), axis)| axis_number(v, axis.values.iter().position(|x| x == v).unwrap_or(0)))
            .collect();
        row.extend(scalar_names.iter().map(|n| r.scalar(n).unwrap_or(f64::NAN)));
        table.push(row);
    }

    let mut record = ResultRecord::new(config);
    record.set("points", points.len() as f64, "1");
    record.series.push(table);
    record.details = json!({
        "points": points.iter().zip(&records).map(|(p, r)| json!({
            "index": p.index,
            "values": p.values.iter().cloned().collect::<serde_json::Map<String, Value>>(),
            "warnings": r.warnings,
        })).collect::<Vec<_>>(),
    });
    for r in &records {
        record.warnings.extend(r.warnings.iter().map(|w| format!("{}: {w}", r.config.name)));
    }
    // how many markers were reused is reported but kept out of the payload,
    // which must not depend on whether the sweep was interrupted
    log_resumed(resumed, points.len());
    Ok(record)
}

fn log_resumed(resumed: usize, total: usize) {
    if resumed > 0 {
        eprintln!("resumed {resumed} of {total} points from completion markers");
    }
}
