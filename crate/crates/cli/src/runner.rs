//! Turns a validated scenario into a [`ResultRecord`].

use crate::config::{
    motional_mode, ConfigError, CzGate, DecoherenceScenario, FrameKind, GateCzScenario, GateSmScenario, MoleculeConfig,
    RabiScenario, ReadoutScenario, Scenario, ScenarioConfig,
};
use crate::record::{ResultRecord, Series};
use rotorqc::angular::{cos2_matrix_element, RotBasisState};
use rotorqc::decoherence::{manifold_moment, ou_coherence, predicted_t2, ramsey_decay, default_times, NoiseProcess};
use rotorqc::dynamics::{addressed_pair, Frame, FrameOptions, PropagatorOptions, RabiConfig, simulate_rabi_flopping};
use rotorqc::fields::{coupling_amplitude, e0_sq_for_rabi, e0_sq_to_intensity, intensity_to_e0_sq, SynthesizedDrive};
use rotorqc::gates::{
    aux_loop_stark_phase, cirac_zoller_cnot, cirac_zoller_cz, evaluate_gate, sm_target, sorensen_molmer_gate,
    thermal_gate_fidelity, thermal_n_max, CzParams, GateSystem,
};
use rotorqc::readout::{
    majority_vote_error, molecule_input, monte_carlo_basis, readout_fidelity_sweep, readout_protocol, AtomicIonModel,
    Outcome,
};
use rotorqc::rng::trial_rng;
use rotorqc::units::{angular_to_hz, hz_to_angular};
use rotorqc::C64;
use serde_json::json;
use std::f64::consts::PI;
use thiserror::Error;

/// Populations in `J = J_max` above this make a run invalid.
pub const TRUNCATION_LIMIT: f64 = 1e-8;
/// Weighted population in the top phonon level above this makes a gate run invalid.
pub const PHONON_TRUNCATION_LIMIT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn sim<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Simulation(e.to_string())
}

/// Run a non-sweep scenario. The record carries no timestamp.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ResultRecord, RunError> {
    config.validate()?;
    let mut record = ResultRecord::new(config);
    match &config.scenario {
        Scenario::Rabi(s) => run_rabi(s, &config.molecule, &mut record)?,
        Scenario::GateCz(s) => run_cz(s, &config.molecule, &mut record)?,
        Scenario::GateSm(s) => run_sm(s, &config.molecule, &mut record)?,
        Scenario::Readout(s) => run_readout(s, config.seed, &mut record)?,
        Scenario::Decoherence(s) => run_decoherence(s, &config.molecule, config.seed, &mut record)?,
        Scenario::Sweep(_) => {
            return Err(RunError::Config(ConfigError::Invalid {
                field: "scenario".into(),
                reason: "sweeps run through `rotorqc sweep`".into(),
            }))
        }
    }
    Ok(record)
}

fn state_label(s: RotBasisState) -> String {
    format!("J{}M{}", s.j, s.m)
}

fn spectator(lower: RotBasisState, upper: RotBasisState) -> RotBasisState {
    if upper == RotBasisState::UP {
        RotBasisState::AUX
    } else if lower == RotBasisState::DOWN {
        RotBasisState::UP
    } else {
        RotBasisState::DOWN
    }
}

fn run_rabi(s: &RabiScenario, mc: &MoleculeConfig, record: &mut ResultRecord) -> Result<(), RunError> {
    let m = mc.params();
    let (lower, upper) = addressed_pair(s.polarization);
    let e0_sq = match (s.intensity_w_cm2, s.rabi_hz) {
        (Some(i), _) => intensity_to_e0_sq(i).map_err(sim)?,
        (None, Some(r)) => e0_sq_for_rabi(&m, s.polarization, lower, upper, hz_to_angular(r)).map_err(sim)?,
        (None, None) => unreachable!("validated"),
    };
    let gap = m.energy(upper) - m.energy(lower);
    let drive = SynthesizedDrive::new(s.polarization, e0_sq, gap)
        .map_err(sim)?
        .with_detuning(hz_to_angular(s.detuning_hz))
        .with_phase(s.phase_rad);
    let coupling = drive.coupling(&m);
    let rabi = coupling.rabi_frequency(lower, upper);
    let detuning = hz_to_angular(s.detuning_hz);
    let generalized = rabi.hypot(detuning);
    let duration = s.duration_s.unwrap_or(3.0 * 2.0 * PI / generalized);
    let frame = FrameOptions {
        frame: match s.frame {
            FrameKind::Interaction => Frame::Interaction,
            FrameKind::Lab => Frame::Lab,
        },
        light_shift: s.light_shift,
        secular_cutoff: s.secular_cutoff_hz.map(hz_to_angular),
    };
    let cfg = RabiConfig {
        j_max: s.j_max,
        frame,
        propagator: PropagatorOptions { tolerance: s.tolerance, ..Default::default() },
        compensate_light_shift: s.compensate_light_shift,
    };
    let trace = simulate_rabi_flopping(&m, &drive, duration, s.samples, &cfg).map_err(sim)?;

    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let spec = spectator(lower, upper);
    let spectator_pop = trace.population_of(spec).map(|p| max(&p)).unwrap_or(0.0);
    record.set("omega0_hz", m.omega0_hz(), "Hz");
    record.set("cos2_element_00_20", cos2_matrix_element(RotBasisState::DOWN, RotBasisState::UP), "1");
    record.set("e0_squared", e0_sq, "V^2/m^2");
    record.set("intensity_w_cm2", e0_sq_to_intensity(e0_sq), "W/cm^2");
    record.set("coupling_amplitude_hz", angular_to_hz(coupling_amplitude(&m, e0_sq)), "Hz");
    record.set("predicted_rabi_hz", angular_to_hz(rabi), "Hz");
    record.set("generalized_rabi_hz", angular_to_hz(generalized), "Hz");
    record.set("rabi_over_omega0", rabi / m.omega0(), "1");
    record.set("light_shift_hz", angular_to_hz(coupling.differential_light_shift(lower, upper)), "Hz");
    record.set("duration_s", duration, "s");
    record.set("max_upper_population", max(&trace.p_upper), "1");
    record.set("final_upper_population", *trace.p_upper.last().unwrap_or(&0.0), "1");
    record.set("max_leakage", max(&trace.leakage), "1");
    record.set("max_m_nonzero_population", max(&trace.m_nonzero), "1");
    record.set("max_boundary_population", max(&trace.boundary), "1");
    record.set("spectator_max_population", spectator_pop, "1");
    record.set("max_norm_drift", trace.max_norm_drift, "1");
    match trace.fit(generalized) {
        Some(f) => {
            record.set("fitted_rabi_hz", angular_to_hz(f.frequency), "Hz");
            record.set("fit_relative_error", (f.frequency - generalized).abs() / generalized, "1");
            record.set("fit_rms_residual", f.rms_residual, "1");
        }
        None => record.warnings.push("sinusoid fit did not converge".into()),
    }
    record.details = json!({
        "addressed_pair": [lower, upper],
        "spectator": spec,
        "applied_drive": trace.drive,
        "frame": frame,
    });

    let keep: Vec<usize> = (0..trace.states.len())
        .filter(|&i| {
            let st = trace.states[i];
            st == lower || st == upper || st == spec || trace.populations.iter().any(|p| p[i] > 1e-12)
        })
        .collect();
    let mut cols = vec!["time_s".to_string()];
    cols.extend(keep.iter().map(|&i| format!("population_{}", state_label(trace.states[i]))));
    cols.push("leakage".into());
    let mut series = Series { name: "populations".into(), columns: cols, rows: Vec::new() };
    for (k, t) in trace.times.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(keep.iter().map(|&i| trace.populations[k][i]));
        row.push(trace.leakage[k]);
        series.push(row);
    }
    record.series.push(series);

    let boundary = max(&trace.boundary);
    if boundary > TRUNCATION_LIMIT {
        return Err(RunError::Invariant(format!(
            "population {boundary:e} reached J = {} (limit {TRUNCATION_LIMIT:e}); raise j_max",
            s.j_max
        )));
    }
    Ok(())
}

fn ideal_cz() -> [[C64; 4]; 4] {
    let mut u = [[C64::new(0.0, 0.0); 4]; 4];
    for (k, row) in u.iter_mut().enumerate() {
        row[k] = C64::new(if k == 3 { -1.0 } else { 1.0 }, 0.0);
    }
    u
}

/// CNOT rows in the `|ion 0, ion 1⟩` ordering for either control.
fn ideal_cnot_for(control: usize) -> [[C64; 4]; 4] {
    let mut u = [[C64::new(0.0, 0.0); 4]; 4];
    for (input, row) in u.iter_mut().enumerate() {
        let (a, b) = (input >> 1, input & 1);
        let (a, b) = if control == 0 { (a, b ^ a) } else { (a ^ b, b) };
        row[(a << 1) | b] = C64::new(1.0, 0.0);
    }
    u
}

fn run_cz(s: &GateCzScenario, mc: &MoleculeConfig, record: &mut ResultRecord) -> Result<(), RunError> {
    let m = mc.params();
    let mode = motional_mode(&s.mode, s.mode.n_max.unwrap_or(3))?;
    let mut system = GateSystem::new(m.clone(), mode);
    system.propagator.tolerance = s.tolerance;
    let mut params = CzParams::for_mode(&mode);
    if let Some(r) = s.sideband_carrier_rabi_hz {
        params.sideband_carrier_rabi = hz_to_angular(r);
    }
    if let Some(r) = s.single_qubit_rabi_hz {
        params.single_qubit_rabi = hz_to_angular(r);
    }
    let cz = cirac_zoller_cz(s.control, s.target, &m, &mode, &params).map_err(sim)?;
    let (name, seq, ideal) = match s.gate {
        CzGate::Cz => ("CZ", cz.clone(), ideal_cz()),
        CzGate::Cnot => (
            "CNOT",
            cirac_zoller_cnot(s.control, s.target, &m, &mode, &params).map_err(sim)?,
            ideal_cnot_for(s.control),
        ),
    };
    let report = evaluate_gate(&system, name, &seq, &ideal).map_err(sim)?;
    record.set("min_fidelity", report.min_fidelity(), "1");
    for (label, f) in report.input_labels.iter().zip(&report.fidelities) {
        record.set(&format!("fidelity_{label}"), *f, "1");
    }
    record.set("superposition_fidelity", report.superposition_fidelity, "1");
    record.set("max_leakage", report.leakage.iter().copied().fold(0.0, f64::max), "1");
    record.set("gate_duration_s", seq.duration(), "s");
    record.set("aux_loop_stark_phase_rad", aux_loop_stark_phase(&cz, &m), "rad");
    record.set("omitted_light_shift_phase_rad", report.light_shift_phase, "rad");
    let mut table = Series::new("truth_table", &["input", "output", "re", "im", "probability"]);
    for (i, row) in report.realized.iter().enumerate() {
        for (o, [re, im]) in row.iter().enumerate() {
            table.push(vec![i as f64, o as f64, *re, *im, re * re + im * im]);
        }
    }
    record.series.push(table);
    record.details = json!({
        "report": report,
        "pulses": seq.pulses().iter().map(|p| json!({
            "label": p.label, "start_s": p.start, "duration_s": p.duration, "branch": p.branch,
        })).collect::<Vec<_>>(),
        "phonon_n_max": mode.n_max,
    });
    Ok(())
}

fn run_sm(s: &GateSmScenario, mc: &MoleculeConfig, record: &mut ResultRecord) -> Result<(), RunError> {
    let m = mc.params();
    let nu = hz_to_angular(s.mode.nu_hz);
    let delta = hz_to_angular(s.delta_hz.unwrap_or(0.005 * s.mode.nu_hz));
    let duration = s.loops as f64 * 2.0 * PI / delta.abs();
    let mut fidelities = Vec::new();
    let mut reports = Vec::new();
    let mut per_fock = Series::new("per_fock", &["n_bar", "n", "weight", "fidelity"]);
    for &n_bar in &s.n_bar {
        let n_max = s.mode.n_max.unwrap_or_else(|| thermal_n_max(n_bar));
        let mode = motional_mode(&s.mode, n_max)?;
        let mut system = GateSystem::new(m.clone(), mode);
        system.propagator.tolerance = s.tolerance;
        let gate = sorensen_molmer_gate(&m, &mode, delta, duration).map_err(sim)?;
        if let Some(w) = &gate.warning {
            record.warnings.push(w.clone());
        }
        let r = thermal_gate_fidelity(&system, &gate.sequence, n_bar, &sm_target()).map_err(sim)?;
        if r.top_level_population > PHONON_TRUNCATION_LIMIT {
            return Err(RunError::Invariant(format!(
                "population {:e} reached phonon level {n_max} at n̄ = {n_bar}",
                r.top_level_population
            )));
        }
        record.set(&format!("fidelity_nbar_{n_bar}"), r.fidelity, "1");
        record.set(&format!("top_phonon_population_nbar_{n_bar}"), r.top_level_population, "1");
        for &(n, w, f) in &r.per_fock {
            per_fock.push(vec![n_bar, n as f64, w, f]);
        }
        fidelities.push(r.fidelity);
        reports.push(json!({ "n_bar": n_bar, "n_max": n_max, "report": r }));
    }
    let (lo, hi) = fidelities.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &f| (a.min(f), b.max(f)));
    record.set("min_fidelity", lo, "1");
    record.set("fidelity_spread", hi - lo, "1");
    record.set("gate_duration_s", duration, "s");
    record.set("delta_over_nu", delta / nu, "1");
    record.series.push(per_fock);
    record.details = json!({ "loops": s.loops, "thermal": reports });
    Ok(())
}

fn run_readout(s: &ReadoutScenario, seed: u64, record: &mut ResultRecord) -> Result<(), RunError> {
    let cfg = s.readout_config()?;
    let atom = AtomicIonModel { detection: s.detection_model(), ..AtomicIonModel::typical() };
    let row = readout_fidelity_sweep(&[cfg], &atom, s.trials, seed).map_err(sim)?.remove(0);
    let n = (2 * s.trials) as f64;
    record.set_with_error("fidelity", row.fidelity, (row.fidelity * (1.0 - row.fidelity) / n).sqrt(), "1");
    record.set("fidelity_ci_low", row.ci_low, "1");
    record.set("fidelity_ci_high", row.ci_high, "1");
    record.set("error_down", row.errors_down as f64 / s.trials as f64, "1");
    record.set("error_up", row.errors_up as f64 / s.trials as f64, "1");
    let (be, de) = (atom.detection.bright_error(), atom.detection.dark_error());
    record.set("detection_bright_error", be, "1");
    record.set("detection_dark_error", de, "1");
    record.set(
        "detection_only_binomial_fidelity",
        1.0 - (majority_vote_error(be, s.repetitions) + majority_vote_error(de, s.repetitions)) / 2.0,
        "1",
    );

    let basis = monte_carlo_basis(cfg.read_state).map_err(sim)?;
    let mut shots = Series::new("rounds", &["shot", "input_up", "round", "photon_count", "outcome_up"]);
    let up = |o: Outcome| if o == Outcome::Up { 1.0 } else { 0.0 };
    for shot in 0..s.example_shots {
        for (input, state) in [(0.0, RotBasisState::DOWN), (1.0, RotBasisState::UP)] {
            let psi = molecule_input(&basis, &[(state, C64::new(1.0, 0.0))]).map_err(sim)?;
            // streams past the ones the fidelity estimate used
            let stream = 2 * s.trials + 2 * shot + input as u64;
            let r = readout_protocol(&psi, &atom, &cfg, None, &mut trial_rng(seed, stream)).map_err(sim)?;
            for round in &r.rounds {
                shots.push(vec![shot as f64, input, round.round as f64, round.photon_count as f64, up(round.outcome)]);
            }
        }
    }
    record.series.push(shots);
    record.details = json!({ "row": row, "atom": { "eta": atom.eta_atom, "rabi_hz": angular_to_hz(atom.rabi) } });
    Ok(())
}

fn run_decoherence(s: &DecoherenceScenario, mc: &MoleculeConfig, seed: u64, record: &mut ResultRecord) -> Result<(), RunError> {
    let process = NoiseProcess::new(s.sigma_b_t, s.tau_c_s, seed).map_err(sim)?;
    let mut fits = Vec::new();
    let mut details = Vec::new();
    for (i, spec) in s.qubits.iter().enumerate() {
        let q = spec.qubit(mc)?;
        let times = match &s.times_s {
            Some(t) => t.clone(),
            None => default_times(&q, &process, s.points).map_err(sim)?,
        };
        let curve = ramsey_decay(&q, &process, &times, s.trials).map_err(sim)?;
        let sens = q.sensitivity();
        record.set(&format!("sensitivity_{i}"), sens, "rad/s/T");
        record.set(&format!("min_coherence_{i}"), curve.coherence.iter().copied().fold(1.0, f64::min), "1");
        record.set(&format!("final_coherence_{i}"), *curve.coherence.last().unwrap(), "1");
        if let Some(t2) = predicted_t2(sens, &process) {
            record.set(&format!("predicted_t2_{i}"), t2, "s");
        }
        match &curve.fit {
            Ok(f) => {
                match curve.t2_std_error {
                    Some(se) => record.set_with_error(&format!("t2_{i}"), f.t2, se, "s"),
                    None => record.set(&format!("t2_{i}"), f.t2, "s"),
                }
                record.set(&format!("decay_exponent_{i}"), f.exponent, "1");
                fits.push(Some((f.t2, curve.t2_std_error, sens)));
            }
            Err(e) => {
                record.warnings.push(format!("qubit {i} ({}): no T2 fit: {e}", q.label()));
                fits.push(None);
            }
        }
        let mut series = Series::new(&format!("coherence_{i}"), &["time_s", "coherence", "std_error", "predicted"]);
        for (k, t) in curve.times.iter().enumerate() {
            series.push(vec![*t, curve.coherence[k], curve.std_error[k], ou_coherence(sens, s.sigma_b_t, s.tau_c_s, *t)]);
        }
        record.series.push(series);
        details.push(json!({
            "qubit": q, "label": q.label(), "fit": curve.fit, "max_abs_phase": curve.max_abs_phase,
        }));
    }
    record.set("upper_manifold_moment", manifold_moment(RotBasisState::UP.j, mc.g_r).abs(), "nuclear magnetons");
    if let [Some((t2a, sea, sa)), Some((t2b, seb, sb))] = fits[..] {
        // second qubit over first, so a less sensitive second qubit gives a ratio above one
        let ratio = t2b / t2a;
        let rel = |se: Option<f64>, t2: f64| se.map_or(0.0, |x| x / t2);
        let se = ratio * rel(sea, t2a).hypot(rel(seb, t2b));
        let sens_ratio = (sa / sb).abs();
        record.set_with_error("t2_ratio", ratio, se, "1");
        record.set("sensitivity_ratio", sens_ratio, "1");
        record.set("sensitivity_ratio_squared", sens_ratio * sens_ratio, "1");
        if let (Some(pa), Some(pb)) = (predicted_t2(sa, &process), predicted_t2(sb, &process)) {
            record.set("predicted_t2_ratio", pb / pa, "1");
        }
    }
    record.details = json!({ "qubits": details, "process": { "sigma_b_t": s.sigma_b_t, "tau_c_s": s.tau_c_s } });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cnot_tables_for_both_controls() {
        let one = C64::new(1.0, 0.0);
        let u = ideal_cnot_for(0);
        assert_eq!(u[2][3], one);
        assert_eq!(u[3][2], one);
        assert_eq!(u, rotorqc::gates::ideal_cnot());
        let v = ideal_cnot_for(1);
        assert_eq!(v[1][3], one);
        assert_eq!(v[3][1], one);
        assert_eq!(v[2][2], one);
    }

    #[test]
    fn short_rabi_run() {
        let c = ScenarioConfig::from_json(
            r#"{"name": "t", "scenario": {"kind": "rabi", "rabi_hz": 1e6, "j_max": 4,
                "secular_cutoff_hz": 1e10, "samples": 40}}"#,
        )
        .unwrap();
        let r = run_scenario(&c).unwrap();
        assert!((r.scalar("predicted_rabi_hz").unwrap() - 1e6).abs() < 1e-3);
        assert!(r.scalar("fit_relative_error").unwrap() < 1e-3);
        assert!(r.series("populations").unwrap().column("population_J2M0").is_some());
    }

    #[test]
    fn truncation_is_an_invariant_violation() {
        // a drive at 5% of ω₀ pushes population up the ladder to J = 4
        let c = ScenarioConfig::from_json(
            r#"{"name": "t", "scenario": {"kind": "rabi", "rabi_hz": 1e9, "j_max": 4,
                "samples": 16, "duration_s": 2e-9, "tolerance": 1e-6}}"#,
        )
        .unwrap();
        assert!(matches!(run_scenario(&c), Err(RunError::Invariant(_))));
    }
}
