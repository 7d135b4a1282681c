//! Shipped scenario presets.
//!
//! Presets are compiled into the binary. Setting `ROTORQC_PRESET_DIR` adds a
//! directory searched first, so a local `<name>.json` overrides a shipped one.

use crate::config::{ConfigError, ScenarioConfig};
use std::path::{Path, PathBuf};

pub const PRESET_DIR_ENV: &str = "ROTORQC_PRESET_DIR";

pub const PRESETS: &[(&str, &str)] = &[
    ("ns2-rabi", include_str!("../presets/ns2-rabi.json")),
    ("rabi-full-integration", include_str!("../presets/rabi-full-integration.json")),
    ("rabi-intensity-sweep", include_str!("../presets/rabi-intensity-sweep.json")),
    ("aux-selection", include_str!("../presets/aux-selection.json")),
    ("cz-cnot", include_str!("../presets/cz-cnot.json")),
    ("sm-thermal", include_str!("../presets/sm-thermal.json")),
    ("readout-99.94", include_str!("../presets/readout-99.94.json")),
    ("readout-repetitions", include_str!("../presets/readout-repetitions.json")),
    ("decoherence-gaussian", include_str!("../presets/decoherence-gaussian.json")),
    ("decoherence-narrowing", include_str!("../presets/decoherence-narrowing.json")),
    ("decoherence-m0", include_str!("../presets/decoherence-m0.json")),
];

fn override_path(name: &str) -> Option<PathBuf> {
    let dir = std::env::var_os(PRESET_DIR_ENV)?;
    let p = Path::new(&dir).join(format!("{name}.json"));
    p.is_file().then_some(p)
}

/// Raw JSON text of a preset.
pub fn preset_text(name: &str) -> Result<String, PresetError> {
    if let Some(p) = override_path(name) {
        return std::fs::read_to_string(&p).map_err(|e| PresetError::Io(p, e));
    }
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| t.to_string())
        .ok_or_else(|| PresetError::Config(ConfigError::UnknownPreset(name.into())))
}

pub fn load_preset(name: &str) -> Result<ScenarioConfig, PresetError> {
    Ok(ScenarioConfig::from_json(&preset_text(name)?)?)
}

/// Preset names, shipped ones plus any extra files in the override directory.
pub fn preset_names() -> Vec<String> {
    let mut names: Vec<String> = PRESETS.iter().map(|(n, _)| n.to_string()).collect();
    if let Some(dir) = std::env::var_os(PRESET_DIR_ENV) {
        if let Ok(entries) = std::fs::read_dir(dir) {
            for e in entries.flatten() {
                let p = e.path();
                if p.extension().is_some_and(|x| x == "json") {
                    if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                        if !names.iter().any(|n| n == stem) {
                            names.push(stem.to_string());
                        }
                    }
                }
            }
        }
    }
    names.sort();
    names
}

#[derive(Debug, thiserror::Error)]
pub enum PresetError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
}

/// Load a config from a file path, or by preset name when no such file exists.
pub fn resolve(spec: &str) -> Result<ScenarioConfig, PresetError> {
    let p = Path::new(spec);
    if p.is_file() {
        let text = std::fs::read_to_string(p).map_err(|e| PresetError::Io(p.to_path_buf(), e))?;
        return Ok(ScenarioConfig::from_json(&text)?);
    }
    load_preset(spec)
}
