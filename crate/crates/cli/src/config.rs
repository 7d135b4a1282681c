//! Scenario documents.
//!
//! Everything at this boundary is in laboratory units: frequencies in Hz,
//! intensities in W/cm², fields in tesla, times in seconds. Conversion to
//! angular units happens once, in [`crate::runner`].

use rotorqc::angular::{MoleculeParams, RotBasisState};
use rotorqc::decoherence::{predicted_t2, DephasingQubit, NoiseProcess};
use rotorqc::fields::Polarization;
use rotorqc::gates::thermal_n_max;
use rotorqc::readout::{DetectionModel, PulseModel, ReadoutConfig};
use rotorqc::units::{hz_to_angular, ELECTRON_G};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: reason.into() }
}

fn finite_positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn probability(field: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(field, format!("must lie in [0, 1], got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    /// One JSON document with every series embedded.
    #[default]
    Json,
    /// Scalars in JSON, each series in its own CSV file.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_out_dir() -> String {
    "rotorqc-out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out_dir(), format: OutputFormat::Json }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeConfig {
    pub name: String,
    pub b0_hz: f64,
    pub delta_alpha_a3: f64,
    pub g_r: f64,
}

impl Default for MoleculeConfig {
    fn default() -> Self {
        let m = MoleculeParams::ns2_plus();
        Self { name: m.name, b0_hz: m.b0_hz, delta_alpha_a3: m.delta_alpha_a3, g_r: m.g_r }
    }
}

impl MoleculeConfig {
    pub fn params(&self) -> MoleculeParams {
        MoleculeParams { name: self.name.clone(), b0_hz: self.b0_hz, delta_alpha_a3: self.delta_alpha_a3, g_r: self.g_r, mass_amu: None }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        finite_positive("molecule.b0_hz", self.b0_hz)?;
        if !self.delta_alpha_a3.is_finite() || self.delta_alpha_a3 == 0.0 {
            return Err(invalid("molecule.delta_alpha_a3", "must be finite and nonzero"));
        }
        if !self.g_r.is_finite() {
            return Err(invalid("molecule.g_r", "must be finite"));
        }
        Ok(())
    }
}

/// A rotor level `|J, M⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub j: u32,
    pub m: i32,
}

impl Level {
    pub fn state(&self, field: &str) -> Result<RotBasisState, ConfigError> {
        RotBasisState::new(self.j, self.m).map_err(|e| invalid(field, e.to_string()))
    }
}

impl From<RotBasisState> for Level {
    fn from(s: RotBasisState) -> Self {
        Self { j: s.j, m: s.m }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    #[default]
    Interaction,
    Lab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiScenario {
    #[serde(default = "default_polarization")]
    pub polarization: Polarization,
    /// Sets the drive strength; exclusive with `rabi_hz`.
    #[serde(default)]
    pub intensity_w_cm2: Option<f64>,
    /// Target resonant Rabi frequency; exclusive with `intensity_w_cm2`.
    #[serde(default)]
    pub rabi_hz: Option<f64>,
    #[serde(default)]
    pub detuning_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    /// Defaults to three Rabi periods.
    #[serde(default)]
    pub duration_s: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_rabi_j_max")]
    pub j_max: u32,
    #[serde(default)]
    pub frame: FrameKind,
    /// Drop couplings faster than this; `null` integrates everything.
    #[serde(default)]
    pub secular_cutoff_hz: Option<f64>,
    #[serde(default = "yes")]
    pub light_shift: bool,
    #[serde(default = "yes")]
    pub compensate_light_shift: bool,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_polarization() -> Polarization {
    Polarization::ParallelLinear
}
fn default_samples() -> usize {
    200
}
fn default_rabi_j_max() -> u32 {
    8
}
fn yes() -> bool {
    true
}
fn default_tolerance() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    #[serde(default = "default_nu")]
    pub nu_hz: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Phonon truncation; defaults depend on the scenario.
    #[serde(default)]
    pub n_max: Option<usize>,
}

fn default_nu() -> f64 {
    1e6
}
fn default_eta() -> f64 {
    0.1
}

impl Default for ModeConfig {
    fn default() -> Self {
        Self { nu_hz: default_nu(), eta: default_eta(), n_max: None }
    }
}

impl ModeConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        finite_positive("mode.nu_hz", self.nu_hz)?;
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid("mode.eta", format!("must lie in (0, 1), got {}", self.eta)));
        }
        if let Some(n) = self.n_max {
            if n < 2 {
                return Err(invalid("mode.n_max", "must be ≥ 2"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CzGate {
    #[default]
    Cnot,
    Cz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateCzScenario {
    #[serde(default)]
    pub gate: CzGate,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub control: usize,
    #[serde(default = "one")]
    pub target: usize,
    /// Carrier Rabi frequency behind each sideband pulse; defaults to `0.001·ν`.
    #[serde(default)]
    pub sideband_carrier_rabi_hz: Option<f64>,
    /// Defaults to `0.01·ν`.
    #[serde(default)]
    pub single_qubit_rabi_hz: Option<f64>,
    #[serde(default = "default_gate_tolerance")]
    pub tolerance: f64,
}

fn one() -> usize {
    1
}
fn default_gate_tolerance() -> f64 {
    1e-7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSmScenario {
    #[serde(default)]
    pub mode: ModeConfig,
    /// Gate detuning from the sidebands; defaults to `0.005·ν`.
    #[serde(default)]
    pub delta_hz: Option<f64>,
    #[serde(default = "default_loops")]
    pub loops: u32,
    #[serde(default = "default_nbar")]
    pub n_bar: Vec<f64>,
    #[serde(default = "default_sm_tolerance")]
    pub tolerance: f64,
}

fn default_loops() -> u32 {
    1
}
fn default_nbar() -> Vec<f64> {
    vec![0.0]
}
fn default_sm_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    pub bright_mean: f64,
    pub dark_mean: f64,
    pub threshold: u32,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        let d = rotorqc::readout::AtomicIonModel::typical().detection;
        Self { bright_mean: d.bright_mean, dark_mean: d.dark_mean, threshold: d.threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutScenario {
    #[serde(default = "default_reps")]
    pub repetitions: u32,
    #[serde(default)]
    pub molecule_pulse_infidelity: f64,
    #[serde(default)]
    pub atom_pulse_infidelity: f64,
    #[serde(default)]
    pub cooling_error: f64,
    #[serde(default)]
    pub prep_error: f64,
    #[serde(default = "default_read_state")]
    pub read_state: Level,
    #[serde(default)]
    pub detection: DetectionConfig,
    /// Monte-Carlo trials per input state.
    #[serde(default = "default_readout_trials")]
    pub trials: u64,
    /// Single shots per input recorded round by round.
    #[serde(default = "default_example_shots")]
    pub example_shots: u64,
}

fn default_reps() -> u32 {
    1
}
fn default_read_state() -> Level {
    RotBasisState::READ.into()
}
fn default_readout_trials() -> u64 {
    100_000
}
fn default_example_shots() -> u64 {
    3
}

impl ReadoutScenario {
    pub fn readout_config(&self) -> Result<ReadoutConfig, ConfigError> {
        Ok(ReadoutConfig {
            repetitions: self.repetitions,
            molecule_pulse_infidelity: self.molecule_pulse_infidelity,
            atom_pulse_infidelity: self.atom_pulse_infidelity,
            cooling_error: self.cooling_error,
            prep_error: self.prep_error,
            read_state: self.read_state.state("read_state")?,
            pulse_model: PulseModel::Ideal,
        })
    }

    pub fn detection_model(&self) -> DetectionModel {
        DetectionModel { bright_mean: self.detection.bright_mean, dark_mean: self.detection.dark_mean, threshold: self.detection.threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum QubitSpec {
    ElectronSpin {
        #[serde(default = "default_g_e")]
        g_e: f64,
    },
    /// Two rotor levels; `g_r` defaults to the molecule's.
    Rotational {
        lower: Level,
        upper: Level,
        #[serde(default)]
        g_r: Option<f64>,
    },
}

fn default_g_e() -> f64 {
    ELECTRON_G
}

impl QubitSpec {
    pub fn qubit(&self, molecule: &MoleculeConfig) -> Result<DephasingQubit, ConfigError> {
        Ok(match self {
            QubitSpec::ElectronSpin { g_e } => DephasingQubit::ElectronSpin { g_e: *g_e },
            QubitSpec::Rotational { lower, upper, g_r } => DephasingQubit::Rotational {
                lower: lower.state("qubits.lower")?,
                upper: upper.state("qubits.upper")?,
                g_r: g_r.unwrap_or(molecule.g_r),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceScenario {
    /// One qubit, or two to compare (`T2` of the second over the first).
    pub qubits: Vec<QubitSpec>,
    pub sigma_b_t: f64,
    pub tau_c_s: f64,
    #[serde(default = "default_deco_trials")]
    pub trials: u64,
    /// Points per qubit when `times_s` is absent.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Shared evolution times; by default each qubit gets its own window
    /// around its predicted T2.
    #[serde(default)]
    pub times_s: Option<Vec<f64>>,
}

fn default_deco_trials() -> u64 {
    4000
}
fn default_points() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Field of the base scenario, dotted for nested fields (`mode.eta`).
    pub parameter: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepScenario {
    /// Any non-sweep scenario.
    pub base: Value,
    /// Cartesian grid; the last axis varies fastest.
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Scenario {
    Rabi(RabiScenario),
    GateCz(GateCzScenario),
    GateSm(GateSmScenario),
    Readout(ReadoutScenario),
    Decoherence(DecoherenceScenario),
    Sweep(SweepScenario),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Rabi(_) => "rabi",
            Scenario::GateCz(_) => "gate-cz",
            Scenario::GateSm(_) => "gate-sm",
            Scenario::Readout(_) => "readout",
            Scenario::Decoherence(_) => "decoherence",
            Scenario::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub molecule: MoleculeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub scenario: Scenario,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl ScenarioConfig {
    /// Parse and validate.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let c: ScenarioConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid("schema_version", format!("unsupported version {}", self.schema_version)));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(invalid("name", "must be non-empty and use only [A-Za-z0-9-_.]"));
        }
        self.molecule.validate()?;
        validate_scenario(&self.scenario, &self.molecule)
    }
}

fn validate_scenario(scenario: &Scenario, molecule: &MoleculeConfig) -> Result<(), ConfigError> {
    match scenario {
        Scenario::Rabi(s) => validate_rabi(s, molecule),
        Scenario::GateCz(s) => validate_cz(s),
        Scenario::GateSm(s) => validate_sm(s),
        Scenario::Readout(s) => validate_readout(s),
        Scenario::Decoherence(s) => validate_decoherence(s, molecule),
        Scenario::Sweep(s) => {
            for p in expand_sweep(s)? {
                validate_scenario(&p.scenario, molecule)
                    .map_err(|e| invalid(&format!("sweep point {}", p.index), e.to_string()))?;
            }
            Ok(())
        }
    }
}

fn validate_rabi(s: &RabiScenario, molecule: &MoleculeConfig) -> Result<(), ConfigError> {
    match (s.intensity_w_cm2, s.rabi_hz) {
        (Some(i), None) => finite_positive("intensity_w_cm2", i)?,
        (None, Some(r)) => finite_positive("rabi_hz", r)?,
        _ => return Err(invalid("intensity_w_cm2", "give exactly one of intensity_w_cm2 and rabi_hz")),
    }
    if !s.detuning_hz.is_finite() || !s.phase_rad.is_finite() {
        return Err(invalid("detuning_hz", "detuning and phase must be finite"));
    }
    if s.detuning_hz <= -6.0 * molecule.b0_hz {
        return Err(invalid("detuning_hz", "beat frequency must stay positive"));
    }
    if let Some(d) = s.duration_s {
        finite_positive("duration_s", d)?;
    }
    if s.samples < 8 {
        return Err(invalid("samples", "need at least 8 samples to fit"));
    }
    // the upper level must sit below the truncation edge
    if s.j_max < 4 || s.j_max % 2 == 1 {
        return Err(invalid("j_max", "must be even and ≥ 4"));
    }
    if let Some(c) = s.secular_cutoff_hz {
        finite_positive("secular_cutoff_hz", c)?;
        if s.frame == FrameKind::Lab {
            return Err(invalid("secular_cutoff_hz", "a secular cutoff needs the interaction frame"));
        }
    }
    tolerance("tolerance", s.tolerance)
}

fn tolerance(field: &str, t: f64) -> Result<(), ConfigError> {
    if t > 0.0 && t <= 1e-3 {
        Ok(())
    } else {
        Err(invalid(field, format!("must lie in (0, 1e-3], got {t}")))
    }
}

fn validate_cz(s: &GateCzScenario) -> Result<(), ConfigError> {
    s.mode.validate()?;
    if s.control > 1 || s.target > 1 {
        return Err(invalid("control", "ions are numbered 0 and 1"));
    }
    if s.control == s.target {
        return Err(invalid("target", "control and target must differ"));
    }
    for (f, v) in [("sideband_carrier_rabi_hz", s.sideband_carrier_rabi_hz), ("single_qubit_rabi_hz", s.single_qubit_rabi_hz)] {
        if let Some(v) = v {
            finite_positive(f, v)?;
        }
    }
    tolerance("tolerance", s.tolerance)
}

fn validate_sm(s: &GateSmScenario) -> Result<(), ConfigError> {
    s.mode.validate()?;
    if let Some(d) = s.delta_hz {
        if !d.is_finite() || d == 0.0 {
            return Err(invalid("delta_hz", "must be finite and nonzero"));
        }
    }
    if s.loops == 0 {
        return Err(invalid("loops", "must be ≥ 1"));
    }
    if s.n_bar.is_empty() {
        return Err(invalid("n_bar", "need at least one value"));
    }
    for &n in &s.n_bar {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(invalid("n_bar", format!("must be finite and ≥ 0, got {n}")));
        }
        if let Some(n_max) = s.mode.n_max {
            let need = thermal_n_max(n);
            if n_max < need {
                return Err(invalid("mode.n_max", format!("n̄ = {n} needs n_max ≥ {need}")));
            }
        }
    }
    tolerance("tolerance", s.tolerance)
}

fn validate_readout(s: &ReadoutScenario) -> Result<(), ConfigError> {
    if s.repetitions == 0 {
        return Err(invalid("repetitions", "must be ≥ 1"));
    }
    for (f, v) in [
        ("molecule_pulse_infidelity", s.molecule_pulse_infidelity),
        ("atom_pulse_infidelity", s.atom_pulse_infidelity),
        ("cooling_error", s.cooling_error),
        ("prep_error", s.prep_error),
    ] {
        probability(f, v)?;
    }
    let read = s.read_state.state("read_state")?;
    if read.j % 2 == 1 {
        return Err(invalid("read_state", "must be an even-J level"));
    }
    if read == RotBasisState::DOWN || read == RotBasisState::UP {
        return Err(invalid("read_state", "must differ from both qubit levels"));
    }
    s.detection_model().validate().map_err(|e| invalid("detection", e.to_string()))?;
    if s.trials == 0 {
        return Err(invalid("trials", "must be ≥ 1"));
    }
    Ok(())
}

fn validate_decoherence(s: &DecoherenceScenario, molecule: &MoleculeConfig) -> Result<(), ConfigError> {
    if s.qubits.is_empty() || s.qubits.len() > 2 {
        return Err(invalid("qubits", "give one qubit, or two to compare"));
    }
    let process = NoiseProcess::new(s.sigma_b_t, s.tau_c_s, 0).map_err(|e| invalid("sigma_b_t", e.to_string()))?;
    if s.trials == 0 {
        return Err(invalid("trials", "must be ≥ 1"));
    }
    match &s.times_s {
        Some(t) => {
            if t.is_empty() || t.iter().any(|x| !x.is_finite() || *x < 0.0) || t.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("times_s", "must be non-negative and strictly increasing"));
            }
        }
        None => {
            if s.points < 4 {
                return Err(invalid("points", "need at least 4 points"));
            }
            for q in &s.qubits {
                let q = q.qubit(molecule)?;
                if predicted_t2(q.sensitivity(), &process).is_none() {
                    return Err(invalid("times_s", format!("{} does not decay in this model; give explicit times", q.label())));
                }
            }
        }
    }
    for q in &s.qubits {
        if let QubitSpec::Rotational { lower, upper, .. } = q {
            lower.state("qubits.lower")?;
            upper.state("qubits.upper")?;
        }
    }
    Ok(())
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub values: Vec<(String, Value)>,
    pub scenario: Scenario,
}

fn set_path(target: &mut Value, path: &str, value: Value) -> Result<(), ConfigError> {
    let mut cur = target;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| invalid(path, "parent is not an object"))?;
        if k + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*part).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Expand the grid. Points are parsed here and validated by
/// [`ScenarioConfig::validate`].
pub fn expand_sweep(s: &SweepScenario) -> Result<Vec<SweepPoint>, ConfigError> {
    if s.axes.is_empty() {
        return Err(invalid("axes", "need at least one axis"));
    }
    for a in &s.axes {
        if a.values.is_empty() {
            return Err(invalid(&format!("axes.{}", a.parameter), "no values"));
        }
        for v in &a.values {
            if let Some(x) = v.as_f64() {
                if !x.is_finite() {
                    return Err(invalid(&format!("axes.{}", a.parameter), "values must be finite"));
                }
            }
        }
        if a.parameter == "kind" {
            return Err(invalid("axes", "cannot sweep the scenario kind"));
        }
    }
    let total: usize = s.axes.iter().map(|a| a.values.len()).product();
    let mut points = Vec::with_capacity(total);
    for index in 0..total {
        let mut rest = index;
        let mut picks = vec![0; s.axes.len()];
        for (k, a) in s.axes.iter().enumerate().rev() {
            picks[k] = rest % a.values.len();
            rest /= a.values.len();
        }
        let mut doc = s.base.clone();
        let mut values = Vec::new();
        for (a, &p) in s.axes.iter().zip(&picks) {
            set_path(&mut doc, &a.parameter, a.values[p].clone())?;
            values.push((a.parameter.clone(), a.values[p].clone()));
        }
        let scenario: Scenario = serde_json::from_value(doc)
            .map_err(|e| invalid(&format!("sweep point {index}"), e.to_string()))?;
        if matches!(scenario, Scenario::Sweep(_)) {
            return Err(invalid("base", "sweeps cannot nest"));
        }
        points.push(SweepPoint { index, values, scenario });
    }
    Ok(points)
}

/// Convert a mode block to the core type with truncation `n_max`.
pub fn motional_mode(m: &ModeConfig, n_max: usize) -> Result<rotorqc::motion::MotionalMode, ConfigError> {
    rotorqc::motion::MotionalMode::new(hz_to_angular(m.nu_hz), n_max, m.eta).map_err(|e| invalid("mode", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rabi_doc(extra: &str) -> String {
        format!(r#"{{"name": "t", "scenario": {{"kind": "rabi", "rabi_hz": 1e6{extra}}}}}"#)
    }

    #[test]
    fn defaults_fill_in() {
        let c = ScenarioConfig::from_json(&rabi_doc("")).unwrap();
        assert_eq!(c.molecule, MoleculeConfig::default());
        assert_eq!(c.output, OutputConfig::default());
        let Scenario::Rabi(r) = &c.scenario else { panic!() };
        assert_eq!(r.j_max, 8);
        // the echo parses back to the same config
        assert_eq!(ScenarioConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ScenarioConfig::from_json(&rabi_doc(r#", "rabbi": 1"#)), Err(ConfigError::Parse(_))));
        let top = r#"{"name": "t", "extra": 1, "scenario": {"kind": "rabi", "rabi_hz": 1e6}}"#;
        assert!(ScenarioConfig::from_json(top).is_err());
    }

    #[test]
    fn physics_preconditions_surface_early() {
        for bad in [r#", "intensity_w_cm2": 1e6"#, r#", "j_max": 3"#, r#", "frame": "lab", "secular_cutoff_hz": 1e9"#, r#", "samples": 2"#] {
            assert!(matches!(ScenarioConfig::from_json(&rabi_doc(bad)), Err(ConfigError::Invalid { .. })), "{bad}");
        }
        let sm = r#"{"name": "t", "scenario": {"kind": "gate-sm", "n_bar": [2.0], "mode": {"n_max": 5}}}"#;
        assert!(ScenarioConfig::from_json(sm).is_err());
        let deco = r#"{"name": "t", "scenario": {"kind": "decoherence", "sigma_b_t": 1e-6, "tau_c_s": 1.0,
            "qubits": [{"kind": "rotational", "lower": {"j": 0, "m": 0}, "upper": {"j": 2, "m": 0}}]}}"#;
        assert!(ScenarioConfig::from_json(deco).is_err());
    }

    #[test]
    fn sweep_grid_is_validated_and_ordered() {
        let doc = r#"{"name": "s", "scenario": {"kind": "sweep",
            "base": {"kind": "readout", "trials": 10},
            "axes": [{"parameter": "repetitions", "values": [1, 3]},
                     {"parameter": "detection.bright_mean", "values": [10.0, 20.0]}]}}"#;
        let bad_base = doc.replace(r#""trials": 10"#, r#""trials": 10, "detection": {"bright_mean": 1, "dark_mean": 0.5}"#);
        let c = ScenarioConfig::from_json(doc);
        // a partial detection block is a config error
        assert!(c.is_err());
        let ok = doc.replace(r#""trials": 10"#, r#""trials": 10, "detection": {"bright_mean": 1, "dark_mean": 0.5, "threshold": 2}"#);
        let c = ScenarioConfig::from_json(&ok).unwrap();
        let Scenario::Sweep(s) = &c.scenario else { panic!() };
        let pts = expand_sweep(s).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[1].values[0].1, serde_json::json!(1));
        assert_eq!(pts[1].values[1].1, serde_json::json!(20.0));
        assert!(ScenarioConfig::from_json(&bad_base).is_err());
        let neg = ok.replace("[10.0, 20.0]", "[-1.0]");
        assert!(ScenarioConfig::from_json(&neg).is_err());
    }
}
