//! WebAssembly bindings for a three-panel browser demo: Rabi flopping of the
//! NS2+ qubit, Ramsey decay of an electron spin against a rotational pair, and
//! readout fidelity versus the number of repetitions.
//!
//! Each export has a plain Rust twin returning a serializable struct, which
//! is what the native tests exercise.

use rotorqc::angular::{MoleculeParams, RotBasisState};
use rotorqc::decoherence::{default_times, ramsey_decay, DephasingQubit, NoiseProcess};
use rotorqc::dynamics::{addressed_pair, simulate_rabi_flopping, FrameOptions, RabiConfig};
use rotorqc::fields::{intensity_to_e0_sq, Polarization, SynthesizedDrive};
use rotorqc::readout::{majority_vote_error, readout_fidelity_sweep, AtomicIonModel, DetectionModel, ReadoutConfig};
use rotorqc::units::{angular_to_hz, hz_to_angular};
use serde::Serialize;
use std::f64::consts::PI;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct RabiCurve {
    pub rabi_hz: f64,
    pub times_us: Vec<f64>,
    pub p_upper: Vec<f64>,
    /// `Ω²/(Ω² + δ²)·sin²(Ω_g t/2)`.
    pub two_level: Vec<f64>,
}

/// Flopping on `|0,0⟩ ↔ |2,0⟩` (or `|2,2⟩` with `rotating`) over three
/// generalized periods.
pub fn rabi_curve_data(intensity_w_cm2: f64, detuning_hz: f64, rotating: bool, samples: usize) -> Result<RabiCurve, String> {
    if !(1e3..=1e9).contains(&intensity_w_cm2) {
        return Err("intensity must lie between 1e3 and 1e9 W/cm²".into());
    }
    if !(8..=1000).contains(&samples) {
        return Err("samples must lie between 8 and 1000".into());
    }
    let m = MoleculeParams::ns2_plus();
    let kind = if rotating { Polarization::CounterRotatingCircular } else { Polarization::ParallelLinear };
    let (lower, upper) = addressed_pair(kind);
    let e0_sq = intensity_to_e0_sq(intensity_w_cm2).map_err(|e| e.to_string())?;
    let delta = hz_to_angular(detuning_hz);
    let drive = SynthesizedDrive::new(kind, e0_sq, m.energy(upper) - m.energy(lower))
        .map_err(|e| e.to_string())?
        .with_detuning(delta);
    let rabi = drive.coupling(&m).rabi_frequency(lower, upper);
    let general = rabi.hypot(delta);
    let duration = 3.0 * 2.0 * PI / general;
    let config = RabiConfig { j_max: 6, frame: FrameOptions::secular(m.omega0() / 2.0, true), ..Default::default() };
    let trace = simulate_rabi_flopping(&m, &drive, duration, samples, &config).map_err(|e| e.to_string())?;
    let two_level = trace.times.iter().map(|t| (rabi / general).powi(2) * (general * t / 2.0).sin().powi(2)).collect();
    Ok(RabiCurve {
        rabi_hz: angular_to_hz(rabi),
        times_us: trace.times.iter().map(|t| t * 1e6).collect(),
        p_upper: trace.p_upper,
        two_level,
    })
}

#[derive(Debug, Serialize)]
pub struct RamseyPanel {
    pub label: String,
    pub t2_s: Option<f64>,
    pub times_s: Vec<f64>,
    pub coherence: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct RamseyComparison {
    pub electron: RamseyPanel,
    pub rotational: RamseyPanel,
    /// Rotational T2 over electron T2.
    pub ratio: Option<f64>,
    pub sensitivity_ratio: f64,
}

/// Ramsey decay of an electron spin and of the `{|2,−2⟩, |2,2⟩}` pair in the
/// same Ornstein-Uhlenbeck field noise.
pub fn ramsey_comparison_data(sigma_ut: f64, tau_c_s: f64, trials: u32, seed: u64) -> Result<RamseyComparison, String> {
    if !(1..=5000).contains(&trials) {
        return Err("trials must lie between 1 and 5000".into());
    }
    let process = NoiseProcess::new(sigma_ut * 1e-6, tau_c_s, seed).map_err(|e| e.to_string())?;
    let m = MoleculeParams::ns2_plus();
    let panel = |q: DephasingQubit| -> Result<RamseyPanel, String> {
        let times = default_times(&q, &process, 30).map_err(|e| e.to_string())?;
        let c = ramsey_decay(&q, &process, &times, trials as u64).map_err(|e| e.to_string())?;
        Ok(RamseyPanel { label: q.label(), t2_s: c.fit.ok().map(|f| f.t2), times_s: c.times, coherence: c.coherence })
    };
    let (e, r) = (DephasingQubit::electron(), DephasingQubit::stretched_pair(m.g_r));
    let electron = panel(e)?;
    let rotational = panel(r)?;
    let ratio = match (electron.t2_s, rotational.t2_s) {
        (Some(a), Some(b)) => Some(b / a),
        _ => None,
    };
    Ok(RamseyComparison { electron, rotational, ratio, sensitivity_ratio: (e.sensitivity() / r.sensitivity()).abs() })
}

#[derive(Debug, Serialize)]
pub struct ReadoutPoint {
    pub repetitions: u32,
    pub fidelity: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Independent-round prediction from the detection errors alone.
    pub detection_binomial: f64,
}

/// Assignment fidelity for `1, 3, …, max_repetitions` rounds.
pub fn readout_curve_data(
    pulse_infidelity: f64,
    bright_mean: f64,
    max_repetitions: u32,
    trials: u32,
    seed: u64,
) -> Result<Vec<ReadoutPoint>, String> {
    if !(1..=21).contains(&max_repetitions) {
        return Err("max_repetitions must lie between 1 and 21".into());
    }
    if !(1..=200_000).contains(&trials) {
        return Err("trials must lie between 1 and 200000".into());
    }
    let detection = DetectionModel::new(bright_mean, 0.5, 5).map_err(|e| e.to_string())?;
    let atom = AtomicIonModel { detection, ..AtomicIonModel::typical() };
    let configs: Vec<ReadoutConfig> = (1..=max_repetitions)
        .step_by(2)
        .map(|r| ReadoutConfig {
            repetitions: r,
            molecule_pulse_infidelity: pulse_infidelity,
            atom_pulse_infidelity: pulse_infidelity,
            read_state: RotBasisState::READ,
            ..Default::default()
        })
        .collect();
    let rows = readout_fidelity_sweep(&configs, &atom, trials as u64, seed).map_err(|e| e.to_string())?;
    let (be, de) = (detection.bright_error(), detection.dark_error());
    Ok(rows
        .into_iter()
        .map(|row| {
            let r = row.config.repetitions;
            ReadoutPoint {
                repetitions: r,
                fidelity: row.fidelity,
                ci_low: row.ci_low,
                ci_high: row.ci_high,
                detection_binomial: 1.0 - (majority_vote_error(be, r) + majority_vote_error(de, r)) / 2.0,
            }
        })
        .collect())
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<JsValue, JsValue> {
    let v = r.map_err(|e| JsValue::from_str(&e))?;
    serde_wasm_bindgen::to_value(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn rabi_curve(intensity_w_cm2: f64, detuning_hz: f64, rotating: bool, samples: usize) -> Result<JsValue, JsValue> {
    to_js(rabi_curve_data(intensity_w_cm2, detuning_hz, rotating, samples))
}

#[wasm_bindgen]
pub fn ramsey_comparison(sigma_ut: f64, tau_c_s: f64, trials: u32, seed: u64) -> Result<JsValue, JsValue> {
    to_js(ramsey_comparison_data(sigma_ut, tau_c_s, trials, seed))
}

#[wasm_bindgen]
pub fn readout_curve(pulse_infidelity: f64, bright_mean: f64, max_repetitions: u32, trials: u32, seed: u64) -> Result<JsValue, JsValue> {
    to_js(readout_curve_data(pulse_infidelity, bright_mean, max_repetitions, trials, seed))
}
