//! Gate protocols on two molecular ions sharing one motional mode.
//!
//! Gate simulations run in the interaction frame with the secular cutoff at
//! `ω₀/2`, which keeps every term near resonance (carrier, red and blue
//! sidebands) and drops the optical-frequency counter-rotating ones. The
//! static light shift is off by default; [`GateReport::light_shift_phase`]
//! reports the conditional phase it would add to the controlled-phase loop.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::{MoleculeParams, RotBasisState, RotorBasis};
use crate::basis::{BasisError, Factor, JointState, ProductBasis};
use crate::dynamics::{DriveTerm, DynamicsError, FrameOptions, HamiltonianSpec, PropagatorOptions, System};
use crate::fields::{e0_sq_for_rabi, FieldError, Geometry, Polarization, SynthesizedDrive};
use crate::motion::{thermal_state, MotionError, MotionalMode, SidebandBranch};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("rotation angle {0} outside [0, 2π]")]
    InvalidAngle(f64),
    #[error("ion {0} does not exist")]
    NoSuchIon(usize),
    #[error("control and target must differ")]
    SameIon,
    #[error("initial phonon population outside n = 0 is {0:e}")]
    NonzeroPhonon(f64),
    #[error("sideband pulses need counter-propagating beams with η > 0")]
    NoLambDicke,
    #[error("detuning δ must be nonzero")]
    ZeroDetuning,
    #[error("pulses overlap or have non-positive duration")]
    BadSchedule,
}

/// Computational level of one molecular qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Qubit {
    Down,
    Up,
}

impl Qubit {
    pub fn state(self) -> RotBasisState {
        match self {
            Qubit::Down => RotBasisState::DOWN,
            Qubit::Up => RotBasisState::UP,
        }
    }

    pub const ALL: [Qubit; 2] = [Qubit::Down, Qubit::Up];
}

/// A rectangular pulse: one or more drives applied together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub label: String,
    pub start: f64,
    pub duration: f64,
    pub branch: SidebandBranch,
    /// Transition the pulse addresses, used for light-shift compensation.
    pub pair: (RotBasisState, RotBasisState),
    /// `(ion, drive)` pairs.
    pub drives: Vec<(usize, SynthesizedDrive)>,
}

impl Pulse {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Time-ordered, non-overlapping pulses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseSequence {
    pulses: Vec<Pulse>,
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn duration(&self) -> f64 {
        self.pulses.last().map_or(0.0, Pulse::end)
    }

    /// Append a pulse starting when the previous one ends.
    pub fn push(
        &mut self,
        label: impl Into<String>,
        duration: f64,
        branch: SidebandBranch,
        pair: (RotBasisState, RotBasisState),
        drives: Vec<(usize, SynthesizedDrive)>,
    ) -> Result<(), GateError> {
        if !(duration > 0.0) {
            return Err(GateError::BadSchedule);
        }
        let start = self.duration();
        self.pulses.push(Pulse { label: label.into(), start, duration, branch, pair, drives });
        Ok(())
    }

    /// Append all pulses of `other`, shifted to start after this sequence.
    pub fn then(mut self, other: &PulseSequence) -> Self {
        let offset = self.duration();
        for p in &other.pulses {
            let mut p = p.clone();
            p.start += offset;
            self.pulses.push(p);
        }
        self
    }

    /// Multiply every drive's `E₀²` by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        for p in &mut self.pulses {
            for (_, d) in &mut p.drives {
                d.e0_sq *= factor;
            }
        }
        self
    }

    /// Evolve `state` through every pulse.
    pub fn run(
        &self,
        system: &System,
        frame: FrameOptions,
        propagator: &PropagatorOptions,
        state: &JointState,
    ) -> Result<JointState, GateError> {
        let rotors = system.basis.rotor_factors();
        let mut psi = state.clone();
        let mut t: f64 = 0.0;
        for p in &self.pulses {
            if p.start < t - 1e-15 * t.abs() || !(p.duration > 0.0) {
                return Err(GateError::BadSchedule);
            }
            let mut terms = Vec::with_capacity(p.drives.len());
            for (ion, d) in &p.drives {
                let factor = *rotors.get(*ion).ok_or(GateError::NoSuchIon(*ion))?;
                let mut d = d.clone();
                if frame.light_shift {
                    let shift = d.coupling(&system.molecule).differential_light_shift(p.pair.0, p.pair.1);
                    d.detuning += shift;
                }
                terms.push(DriveTerm::molecular(factor, d));
            }
            let h = HamiltonianSpec::build(system, &terms, frame)?;
            psi = h.propagate(&psi, p.start, p.end(), propagator)?.state;
            t = p.end();
        }
        Ok(psi)
    }
}

/// Two molecular ions and their shared mode.
#[derive(Debug, Clone)]
pub struct GateSystem {
    pub molecule: MoleculeParams,
    pub mode: MotionalMode,
    pub j_max: u32,
    pub frame: FrameOptions,
    pub propagator: PropagatorOptions,
}

impl GateSystem {
    /// `J_max = 4`, secular cutoff `ω₀/2`, light shift off.
    pub fn new(molecule: MoleculeParams, mode: MotionalMode) -> Self {
        let cutoff = molecule.omega0() / 2.0;
        Self {
            molecule,
            mode,
            j_max: 4,
            frame: FrameOptions::secular(cutoff, false),
            propagator: PropagatorOptions { tolerance: 1e-6, ..Default::default() },
        }
    }

    pub fn basis(&self) -> Result<Arc<ProductBasis>, GateError> {
        let rotor = RotorBasis::even(self.j_max).map_err(BasisError::from)?;
        Ok(Arc::new(ProductBasis::new(vec![
            Factor::Rotor(rotor.clone()),
            Factor::Rotor(rotor),
            Factor::Phonon { n_max: self.mode.n_max },
        ])))
    }

    pub fn system(&self) -> Result<System, GateError> {
        Ok(System::new(self.basis()?, self.molecule.clone()).with_mode(self.mode))
    }

    /// `|a, b, n⟩`.
    pub fn product_state(&self, basis: &Arc<ProductBasis>, a: Qubit, b: Qubit, n: usize) -> Result<JointState, GateError> {
        let da = basis.rotor_level(0, a.state())?;
        let db = basis.rotor_level(1, b.state())?;
        Ok(JointState::basis_state(basis.clone(), &[da, db, n])?)
    }

    /// Run `seq` on `state`, which must have no phonons.
    pub fn run_from_ground(&self, seq: &PulseSequence, state: &JointState) -> Result<JointState, GateError> {
        let p = state.basis().phonon_factor().ok_or(GateError::NoLambDicke)?;
        let excited = 1.0 - state.factor_populations(p)?[0];
        if excited > 1e-12 {
            return Err(GateError::NonzeroPhonon(excited));
        }
        seq.run(&self.system()?, self.frame, &self.propagator, state)
    }
}

fn check_angle(angle: f64) -> Result<(), GateError> {
    if !(0.0..=2.0 * PI).contains(&angle) {
        return Err(GateError::InvalidAngle(angle));
    }
    Ok(())
}

/// `exp(−i·angle/2·(cos(phase)σx + sin(phase)σy))` on `ion`, Pauli matrices
/// written in the ordered basis `(|↓⟩, |↑⟩)`.
///
/// A resonant co-propagating linear pair of Rabi frequency `rabi`.
pub fn single_qubit_gate(
    angle: f64,
    phase: f64,
    molecule: &MoleculeParams,
    rabi: f64,
    ion: usize,
) -> Result<PulseSequence, GateError> {
    check_angle(angle)?;
    let mut seq = PulseSequence::new();
    if angle == 0.0 {
        return Ok(seq);
    }
    let pair = (RotBasisState::DOWN, RotBasisState::UP);
    let e0_sq = e0_sq_for_rabi(molecule, Polarization::ParallelLinear, pair.0, pair.1, rabi)?;
    // the resonant term is −(Ω/2)(e^{−2iφ}|↑⟩⟨↓| + h.c.), so 2φ = π − phase
    let drive = SynthesizedDrive::new(Polarization::ParallelLinear, e0_sq, molecule.omega0())?
        .with_phase((PI - phase) / 2.0)
        .with_geometry(Geometry::CoPropagating);
    seq.push(format!("R({angle:.4}, {phase:.4}) ion {ion}"), angle / rabi, SidebandBranch::Carrier, pair, vec![(ion, drive)])?;
    Ok(seq)
}

/// Rates of the Cirac-Zoller sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CzParams {
    /// Carrier Rabi frequency behind each sideband pulse (rad/s).
    pub sideband_carrier_rabi: f64,
    /// Rabi frequency of the target's single-qubit pulses (rad/s).
    pub single_qubit_rabi: f64,
}

impl CzParams {
    /// Sideband carrier at `0.001·ν`, single-qubit pulses at `0.01·ν`. The carrier
    /// Stark phases of the sideband pulses grow with the sideband rate; at this
    /// rate their residue stays below `1e-3` in fidelity.
    pub fn for_mode(mode: &MotionalMode) -> Self {
        Self { sideband_carrier_rabi: 0.001 * mode.nu, single_qubit_rabi: 0.01 * mode.nu }
    }
}

fn sideband_pulse(
    seq: &mut PulseSequence,
    label: &str,
    molecule: &MoleculeParams,
    mode: &MotionalMode,
    kind: Polarization,
    pair: (RotBasisState, RotBasisState),
    carrier_rabi: f64,
    area: f64,
    ion: usize,
) -> Result<(), GateError> {
    if mode.eta <= 0.0 {
        return Err(GateError::NoLambDicke);
    }
    let e0_sq = e0_sq_for_rabi(molecule, kind, pair.0, pair.1, carrier_rabi)?;
    let gap = molecule.energy(pair.1) - molecule.energy(pair.0);
    let drive = SynthesizedDrive::new(kind, e0_sq, gap)?
        .with_detuning(SidebandBranch::Red.detuning(mode.nu))
        .with_geometry(Geometry::CounterPropagating);
    let duration = area / (mode.eta * carrier_rabi);
    seq.push(label, duration, SidebandBranch::Red, pair, vec![(ion, drive)])
}

/// Controlled phase `diag(1, 1, 1, −1)` in the `|control, target⟩` basis.
///
/// Red-sideband π on the control, a red-sideband 2π loop through
/// `|aux⟩ = |2,2⟩` on the target with the counter-rotating circular pair,
/// then the first pulse again.
pub fn cirac_zoller_cz(
    control: usize,
    target: usize,
    molecule: &MoleculeParams,
    mode: &MotionalMode,
    params: &CzParams,
) -> Result<PulseSequence, GateError> {
    if control == target {
        return Err(GateError::SameIon);
    }
    let qubit = (RotBasisState::DOWN, RotBasisState::UP);
    let aux = (RotBasisState::DOWN, RotBasisState::AUX);
    let mut seq = PulseSequence::new();
    let w = params.sideband_carrier_rabi;
    sideband_pulse(&mut seq, "control red π", molecule, mode, Polarization::ParallelLinear, qubit, w, PI, control)?;
    sideband_pulse(&mut seq, "target aux red 2π", molecule, mode, Polarization::CounterRotatingCircular, aux, w, 2.0 * PI, target)?;
    sideband_pulse(&mut seq, "control red π", molecule, mode, Polarization::ParallelLinear, qubit, w, PI, control)?;
    Ok(seq)
}

/// CNOT as `Ry(π/2)_t · CZ · Ry(−π/2)_t`.
///
/// The closing rotation's phase absorbs the carrier Stark shift the aux loop
/// puts on the target (see [`aux_loop_stark_phase`]).
pub fn cirac_zoller_cnot(
    control: usize,
    target: usize,
    molecule: &MoleculeParams,
    mode: &MotionalMode,
    params: &CzParams,
) -> Result<PulseSequence, GateError> {
    let pre = single_qubit_gate(PI / 2.0, -PI / 2.0, molecule, params.single_qubit_rabi, target)?;
    let cz = cirac_zoller_cz(control, target, molecule, mode, params)?;
    let stark = aux_loop_stark_phase(&cz, molecule);
    let post = single_qubit_gate(PI / 2.0, PI / 2.0 - stark, molecule, params.single_qubit_rabi, target)?;
    Ok(pre.then(&cz).then(&post))
}

/// Phase `Σ Ω²·T/(4|δ|)` that the off-resonant carrier of each aux-loop
/// sideband pulse (carrier Rabi `Ω`, detuning `δ`, duration `T`) adds to the
/// target's `|↓⟩`.
pub fn aux_loop_stark_phase(seq: &PulseSequence, molecule: &MoleculeParams) -> f64 {
    seq.pulses()
        .iter()
        .filter(|p| p.pair.1 == RotBasisState::AUX && p.branch != SidebandBranch::Carrier)
        .flat_map(|p| p.drives.iter().map(move |(_, d)| (p, d)))
        .map(|(p, d)| {
            let rabi = d.coupling(molecule).rabi_frequency(p.pair.0, p.pair.1);
            rabi * rabi * p.duration / (4.0 * d.detuning.abs())
        })
        .sum()
}

/// Conditional phase the static light shift of the aux loop would imprint
/// between target `|↓⟩` and `|↑⟩`.
pub fn aux_loop_light_shift_phase(seq: &PulseSequence, molecule: &MoleculeParams) -> f64 {
    seq.pulses()
        .iter()
        .filter(|p| p.pair.1 == RotBasisState::AUX)
        .flat_map(|p| p.drives.iter().map(move |(_, d)| (p.duration, d)))
        .map(|(duration, d)| d.coupling(molecule).differential_light_shift(RotBasisState::DOWN, RotBasisState::UP) * duration)
        .sum()
}

/// A Sørensen-Mølmer pulse with its loop count.
#[derive(Debug, Clone, PartialEq)]
pub struct SmGate {
    pub sequence: PulseSequence,
    pub loops: u32,
    /// Set when the duration does not close the phase-space loop.
    pub warning: Option<String>,
}

/// Bichromatic gate on ions 0 and 1 with beats `ω₀ ± (ν + δ)`.
///
/// The per-beam sideband rate is `ηΩ = |δ|/(2√K)` for `K` loops, so the
/// gate is maximally entangling. For `δ > 0` it maps `|↓↓⟩` to
/// `(|↓↓⟩ + i|↑↑⟩)/√2`.
pub fn sorensen_molmer_gate(
    molecule: &MoleculeParams,
    mode: &MotionalMode,
    delta: f64,
    duration: f64,
) -> Result<SmGate, GateError> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(GateError::ZeroDetuning);
    }
    if mode.eta <= 0.0 {
        return Err(GateError::NoLambDicke);
    }
    let loop_time = 2.0 * PI / delta.abs();
    let exact = duration / loop_time;
    let loops = exact.round().max(1.0) as u32;
    let warning = ((exact - loops as f64).abs() > 1e-9).then(|| {
        format!("duration is {exact:.6} loop periods; spin and motion stay entangled")
    });
    let sideband_rate = delta.abs() / (2.0 * (loops as f64).sqrt());
    let carrier = sideband_rate / mode.eta;
    let pair = (RotBasisState::DOWN, RotBasisState::UP);
    let e0_sq = e0_sq_for_rabi(molecule, Polarization::ParallelLinear, pair.0, pair.1, carrier)?;
    let base = SynthesizedDrive::new(Polarization::ParallelLinear, e0_sq, molecule.omega0())?
        .with_geometry(Geometry::CounterPropagating);
    let blue = base.clone().with_detuning(mode.nu + delta);
    let red = base.with_detuning(-(mode.nu + delta));
    let drives = vec![(0, blue.clone()), (0, red.clone()), (1, blue), (1, red)];
    let mut sequence = PulseSequence::new();
    sequence.push("Sørensen-Mølmer", duration, SidebandBranch::Carrier, pair, drives)?;
    Ok(SmGate { sequence, loops, warning })
}

/// `|⟨a|b⟩|²`.
pub fn state_fidelity(a: &JointState, b: &JointState) -> Result<f64, GateError> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// `⟨t|ρ|t⟩` for the two-rotor target `t` (amplitudes over
/// `|↓↓⟩, |↓↑⟩, |↑↓⟩, |↑↑⟩`) with the phonon traced out.
pub fn reduced_fidelity(psi: &JointState, target: &[C64; 4]) -> Result<f64, GateError> {
    let b = psi.basis();
    let p = b.phonon_factor().ok_or(GateError::NoLambDicke)?;
    let n_dim = b.factors()[p].dim();
    let mut f = 0.0;
    for n in 0..n_dim {
        let mut overlap = C64::new(0.0, 0.0);
        for (k, (qa, qb)) in comp_pairs().into_iter().enumerate() {
            let idx = b.index(&[b.rotor_level(0, qa.state())?, b.rotor_level(1, qb.state())?, n]);
            overlap += target[k].conj() * psi.amplitudes()[idx];
        }
        f += overlap.norm_sqr();
    }
    Ok(f.min(1.0))
}

fn comp_pairs() -> [(Qubit, Qubit); 4] {
    [(Qubit::Down, Qubit::Down), (Qubit::Down, Qubit::Up), (Qubit::Up, Qubit::Down), (Qubit::Up, Qubit::Up)]
}

/// Amplitudes on `|↓↓⟩, |↓↑⟩, |↑↓⟩, |↑↑⟩` at phonon `n`.
pub fn computational_amplitudes(psi: &JointState, n: usize) -> Result<[C64; 4], GateError> {
    let b = psi.basis();
    let mut out = [C64::new(0.0, 0.0); 4];
    for (k, (qa, qb)) in comp_pairs().into_iter().enumerate() {
        out[k] = psi.amplitudes()[b.index(&[b.rotor_level(0, qa.state())?, b.rotor_level(1, qb.state())?, n])];
    }
    Ok(out)
}

/// Ideal CNOT with ion 0 as control, on `|↓↓⟩, |↓↑⟩, |↑↓⟩, |↑↑⟩`.
pub fn ideal_cnot() -> [[C64; 4]; 4] {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    [[l, o, o, o], [o, l, o, o], [o, o, o, l], [o, o, l, o]]
}

/// Outcome of simulating a two-qubit gate on the computational inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub name: String,
    pub input_labels: Vec<String>,
    /// Realized output amplitudes on the computational subspace at `n = 0`,
    /// one row per input, as `[re, im]` pairs.
    pub realized: Vec<[[f64; 2]; 4]>,
    /// `|⟨ideal, n=0|ψ⟩|²` per input.
    pub fidelities: Vec<f64>,
    /// Population outside the computational subspace at `n = 0`.
    pub leakage: Vec<f64>,
    /// Output phase of each row relative to the first row.
    pub local_phases: Vec<f64>,
    /// Fidelity for `(|↓⟩ + |↑⟩)|↓⟩/√2`.
    pub superposition_fidelity: f64,
    /// Conditional phase the omitted light shift would add (rad).
    pub light_shift_phase: f64,
}

impl GateReport {
    pub fn min_fidelity(&self) -> f64 {
        self.fidelities.iter().copied().fold(1.0, f64::min)
    }
}

/// Simulate `seq` on all computational inputs from `n = 0` and compare to
/// `ideal` (rows are outputs for each input).
pub fn evaluate_gate(
    system: &GateSystem,
    name: &str,
    seq: &PulseSequence,
    ideal: &[[C64; 4]; 4],
) -> Result<GateReport, GateError> {
    let basis = system.basis()?;
    let inputs = comp_pairs();
    let outputs = crate::rng::map_trials(5, |k| -> Result<JointState, GateError> {
        let start = if k < 4 {
            system.product_state(&basis, inputs[k as usize].0, inputs[k as usize].1, 0)?
        } else {
            let mut s = system.product_state(&basis, Qubit::Down, Qubit::Down, 0)?;
            let up = system.product_state(&basis, Qubit::Up, Qubit::Down, 0)?;
            for (a, b) in s.amplitudes_mut().iter_mut().zip(up.amplitudes()) {
                *a = (*a + b) / 2f64.sqrt();
            }
            s
        };
        system.run_from_ground(seq, &start)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut report = GateReport {
        name: name.into(),
        input_labels: inputs.iter().map(|(a, b)| format!("{a:?}{b:?}")).collect(),
        realized: Vec::new(),
        fidelities: Vec::new(),
        leakage: Vec::new(),
        local_phases: Vec::new(),
        superposition_fidelity: 0.0,
        light_shift_phase: aux_loop_light_shift_phase(seq, &system.molecule),
    };
    let mut first_phase = None;
    for (k, out) in outputs.iter().take(4).enumerate() {
        let amps = computational_amplitudes(out, 0)?;
        let overlap: C64 = ideal[k].iter().zip(&amps).map(|(i, a)| i.conj() * a).sum();
        report.realized.push(amps.map(|a| [a.re, a.im]));
        report.fidelities.push(overlap.norm_sqr().min(1.0));
        report.leakage.push((1.0 - amps.iter().map(|a| a.norm_sqr()).sum::<f64>()).max(0.0));
        let phase = overlap.arg();
        let reference = *first_phase.get_or_insert(phase);
        report.local_phases.push(wrap(phase - reference));
    }
    let s2 = 2f64.sqrt();
    let target: Vec<C64> = (0..4).map(|i| (ideal[0][i] + ideal[2][i]) / s2).collect();
    let amps = computational_amplitudes(&outputs[4], 0)?;
    let overlap: C64 = target.iter().zip(&amps).map(|(t, a)| t.conj() * a).sum();
    report.superposition_fidelity = overlap.norm_sqr().min(1.0);
    Ok(report)
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Thermal-state performance of an entangling gate from `|↓↓⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalGateReport {
    pub n_bar: f64,
    /// `Σ_n w_n·F_n / Σ_n w_n` over the simulated Fock states.
    pub fidelity: f64,
    /// `(n, w_n, F_n)` for every simulated Fock state.
    pub per_fock: Vec<(usize, f64, f64)>,
    /// Thermal weight beyond the phonon truncation.
    pub tail_mass: f64,
    /// Thermal weight of Fock states not simulated.
    pub skipped_mass: f64,
    /// `Σ_n w_n·P(n_max)`: weighted population reaching the top phonon level.
    pub top_level_population: f64,
}

/// `(|↓↓⟩ + i|↑↑⟩)/√2`.
pub fn sm_target() -> [C64; 4] {
    let s = 1.0 / 2f64.sqrt();
    [C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, s)]
}

/// Thermal weight left out when averaging over Fock states.
pub const THERMAL_SKIP_MASS: f64 = 1e-7;

/// Run `seq` from `|↓↓, n⟩` for the Fock states carrying all but
/// [`THERMAL_SKIP_MASS`] of the thermal weight and average the phonon-traced
/// fidelity to `target`.
pub fn thermal_gate_fidelity(
    system: &GateSystem,
    seq: &PulseSequence,
    n_bar: f64,
    target: &[C64; 4],
) -> Result<ThermalGateReport, GateError> {
    let thermal = thermal_state(n_bar, system.mode.n_max)?;
    let basis = system.basis()?;
    let sys = system.system()?;
    let mut fock = Vec::new();
    let mut covered = 0.0;
    for (n, &w) in thermal.weights.iter().enumerate() {
        if covered >= 1.0 - THERMAL_SKIP_MASS {
            break;
        }
        fock.push(n);
        covered += w;
    }
    let results = crate::rng::map_trials(fock.len() as u64, |k| -> Result<(f64, f64), GateError> {
        let n = fock[k as usize];
        let start = system.product_state(&basis, Qubit::Down, Qubit::Down, n)?;
        let out = seq.run(&sys, system.frame, &system.propagator, &start)?;
        let top = out.factor_populations(2)?[system.mode.n_max];
        Ok((reduced_fidelity(&out, target)?, top))
    });
    let mut report = ThermalGateReport {
        n_bar,
        fidelity: 0.0,
        per_fock: Vec::new(),
        tail_mass: thermal.tail_mass,
        skipped_mass: (1.0 - covered).max(0.0),
        top_level_population: 0.0,
    };
    for (k, r) in results.into_iter().enumerate() {
        let (f, top) = r?;
        let n = fock[k];
        let w = thermal.weights[n];
        report.fidelity += w * f / covered;
        report.per_fock.push((n, w, f));
        report.top_level_population += w * top;
    }
    Ok(report)
}

/// Phonon truncation for a thermal average at `n_bar`: the `1e-6` tail
/// cutoff plus room for the gate's transient displacement.
pub fn thermal_n_max(n_bar: f64) -> usize {
    (crate::motion::thermal_cutoff(n_bar, 1e-6) + 10).max(5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_rotor() -> (System, MoleculeParams) {
        let m = MoleculeParams::ns2_plus();
        (System::single_rotor(m.clone(), 4).unwrap(), m)
    }

    fn secular(m: &MoleculeParams) -> FrameOptions {
        FrameOptions::secular(m.omega0() / 2.0, false)
    }

    #[test]
    fn angle_validation_and_identity() {
        let m = MoleculeParams::ns2_plus();
        assert!(single_qubit_gate(-0.1, 0.0, &m, 1e6, 0).is_err());
        assert!(single_qubit_gate(7.0, 0.0, &m, 1e6, 0).is_err());
        assert!(single_qubit_gate(0.0, 0.0, &m, 1e6, 0).unwrap().pulses().is_empty());
    }

    #[test]
    fn rotation_axis_convention() {
        // R(π/2, 0) = exp(−iπ/4·σx) sends |↓⟩ to (|↓⟩ − i|↑⟩)/√2
        let (sys, m) = single_rotor();
        let seq = single_qubit_gate(PI / 2.0, 0.0, &m, 2.0 * PI * 1e6, 0).unwrap();
        let s = JointState::basis_state(sys.basis.clone(), &[0]).unwrap();
        let out = seq.run(&sys, secular(&m), &PropagatorOptions::default(), &s).unwrap();
        let up = sys.basis.rotor_level(0, RotBasisState::UP).unwrap();
        let ratio = out.amplitudes()[up] / out.amplitudes()[0];
        assert!((ratio - C64::new(0.0, -1.0)).norm() < 1e-6, "{ratio}");
        let seq = single_qubit_gate(PI / 2.0, PI / 2.0, &m, 2.0 * PI * 1e6, 0).unwrap();
        let out = seq.run(&sys, secular(&m), &PropagatorOptions::default(), &s).unwrap();
        let ratio = out.amplitudes()[up] / out.amplitudes()[0];
        assert!((ratio - C64::new(1.0, 0.0)).norm() < 1e-6, "{ratio}");
    }

    #[test]
    fn half_pulses_compose() {
        let (sys, m) = single_rotor();
        let rabi = 2.0 * PI * 1e6;
        let half = single_qubit_gate(PI / 2.0, 0.3, &m, rabi, 0).unwrap();
        let full = single_qubit_gate(PI, 0.3, &m, rabi, 0).unwrap();
        let s = JointState::basis_state(sys.basis.clone(), &[0]).unwrap();
        let opts = PropagatorOptions::default();
        let a = half.clone().then(&half).run(&sys, secular(&m), &opts, &s).unwrap();
        let b = full.run(&sys, secular(&m), &opts, &s).unwrap();
        assert!(state_fidelity(&a, &b).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn fidelity_basics() {
        let (sys, _) = single_rotor();
        let a = JointState::basis_state(sys.basis.clone(), &[0]).unwrap();
        let b = JointState::basis_state(sys.basis.clone(), &[1]).unwrap();
        assert_eq!(state_fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(state_fidelity(&a, &b).unwrap(), 0.0);
        let mut amps = vec![C64::new(0.0, 0.0); sys.basis.dim()];
        amps[0] = C64::new(1.0, 0.0);
        amps[1] = C64::new(1.0, 0.0);
        let plus = JointState::normalized(sys.basis.clone(), amps).unwrap();
        assert!((state_fidelity(&plus, &a).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cz_requires_ground_state_motion() {
        let m = MoleculeParams::ns2_plus();
        let gs = GateSystem::new(m.clone(), MotionalMode::default_trap());
        let basis = gs.basis().unwrap();
        let seq = cirac_zoller_cz(0, 1, &m, &gs.mode, &CzParams::for_mode(&gs.mode)).unwrap();
        let s = gs.product_state(&basis, Qubit::Up, Qubit::Down, 1).unwrap();
        assert!(matches!(gs.run_from_ground(&seq, &s), Err(GateError::NonzeroPhonon(_))));
        assert_eq!(cirac_zoller_cz(1, 1, &m, &gs.mode, &CzParams::for_mode(&gs.mode)), Err(GateError::SameIon));
    }

    #[test]
    fn sm_validation() {
        let m = MoleculeParams::ns2_plus();
        let mode = MotionalMode::default_trap();
        assert_eq!(sorensen_molmer_gate(&m, &mode, 0.0, 1.0), Err(GateError::ZeroDetuning));
        let delta = 0.005 * mode.nu;
        let g = sorensen_molmer_gate(&m, &mode, delta, 2.0 * PI / delta).unwrap();
        assert_eq!(g.loops, 1);
        assert!(g.warning.is_none());
        let g = sorensen_molmer_gate(&m, &mode, delta, 1.3 * 2.0 * PI / delta).unwrap();
        assert!(g.warning.is_some());
    }
}
