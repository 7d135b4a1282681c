//! State-transfer readout of a molecular qubit through a co-trapped atomic ion.
//!
//! One round: (1) cool the shared mode to `n = 0`, (2) prepare the atom in
//! `|↓_atom⟩`, (3) a molecular sideband pulse that moves `|↑⟩` population to
//! `|read⟩` while adding a phonon (blue in odd rounds, red `|read⟩ → |↑⟩` in
//! even rounds), (4) an atomic red sideband `|↓_atom, 1⟩ → |↑_atom, 0⟩`, and
//! (5) fluorescence detection. A bright atom means the molecule was `|↓⟩`.
//! Rounds are combined by majority vote.
//!
//! There are no decay channels anywhere in this model; population can only move
//! through the unitary pulses and the explicit resets and projections.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::{MoleculeParams, RotBasisState, RotorBasis};
use crate::basis::{AtomLevel, BasisError, Factor, JointState, ProductBasis};
use crate::dynamics::{AtomicDrive, DriveTerm, DynamicsError, FrameOptions, HamiltonianSpec, PropagatorOptions, System};
use crate::fields::{e0_sq_for_rabi, Geometry, Polarization, SynthesizedDrive};
use crate::motion::{MotionalMode, SidebandBranch};
use crate::rng::{map_trials, trial_rng};
use crate::units::hz_to_angular;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadoutError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("basis has no {0} factor")]
    MissingFactor(&'static str),
    #[error("read state {0} is not in the rotor basis")]
    ReadStateMissing(RotBasisState),
    #[error("read state must differ from |↓⟩ and |↑⟩")]
    ReadStateCollision,
    #[error("need at least one repetition")]
    NoRepetitions,
    #[error("{0} must lie in [0, 1], got {1}")]
    BadProbability(&'static str, f64),
    #[error("bright mean {bright} must exceed dark mean {dark} ≥ 0")]
    BadDetection { bright: f64, dark: f64 },
    #[error("need at least one trial")]
    NoTrials,
}

/// Molecular qubit outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Down,
    Up,
}

/// Poisson photon counting with a bright/dark threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionModel {
    pub bright_mean: f64,
    pub dark_mean: f64,
    /// Counts `≥ threshold` are classified bright.
    pub threshold: u32,
}

impl DetectionModel {
    pub fn new(bright_mean: f64, dark_mean: f64, threshold: u32) -> Result<Self, ReadoutError> {
        let m = Self { bright_mean, dark_mean, threshold };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ReadoutError> {
        if !(self.dark_mean >= 0.0) || !(self.bright_mean > self.dark_mean) || !self.bright_mean.is_finite() {
            return Err(ReadoutError::BadDetection { bright: self.bright_mean, dark: self.dark_mean });
        }
        Ok(())
    }

    /// Probability that a bright atom is classified dark.
    pub fn bright_error(&self) -> f64 {
        poisson_cdf_below(self.bright_mean, self.threshold)
    }

    /// Probability that a dark atom is classified bright.
    pub fn dark_error(&self) -> f64 {
        1.0 - poisson_cdf_below(self.dark_mean, self.threshold)
    }
}

/// `P(X < k)` for `X ~ Poisson(mean)`.
pub fn poisson_cdf_below(mean: f64, k: u32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if mean == 0.0 {
        return 1.0;
    }
    let mut term = (-mean).exp();
    let mut sum = term;
    for i in 1..k {
        term *= mean / i as f64;
        sum += term;
    }
    sum.min(1.0)
}

/// The atomic logic ion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomicIonModel {
    pub detection: DetectionModel,
    /// Lamb-Dicke parameter of the atomic sideband beams.
    pub eta_atom: f64,
    /// Carrier Rabi frequency of the atomic drive (rad/s).
    pub rabi: f64,
    /// Atomic qubit splitting (rad/s).
    pub frequency: f64,
}

impl AtomicIonModel {
    /// Bright mean 20, dark mean 0.5, threshold 5; `η = 0.1`, `Ω = 2π × 20 kHz`,
    /// splitting `2π × 12.6 GHz`.
    pub fn typical() -> Self {
        Self {
            detection: DetectionModel { bright_mean: 20.0, dark_mean: 0.5, threshold: 5 },
            eta_atom: 0.1,
            rabi: hz_to_angular(2e4),
            frequency: hz_to_angular(12.6e9),
        }
    }
}

/// How sideband pulses are applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseModel {
    /// Exact two-level rotations per phonon number, with injected under-rotation.
    Ideal,
    /// Full integration of the sideband Hamiltonians; injected errors ignored.
    Integrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    pub repetitions: u32,
    /// Transfer failure probability of each molecular sideband π pulse.
    pub molecule_pulse_infidelity: f64,
    /// Transfer failure probability of each atomic sideband π pulse.
    pub atom_pulse_infidelity: f64,
    /// Probability that cooling leaves one phonon.
    pub cooling_error: f64,
    /// Probability that preparation leaves the atom in `|↑_atom⟩`.
    pub prep_error: f64,
    pub read_state: RotBasisState,
    pub pulse_model: PulseModel,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            repetitions: 1,
            molecule_pulse_infidelity: 0.0,
            atom_pulse_infidelity: 0.0,
            cooling_error: 0.0,
            prep_error: 0.0,
            read_state: RotBasisState::READ,
            pulse_model: PulseModel::Ideal,
        }
    }
}

impl ReadoutConfig {
    pub fn validate(&self) -> Result<(), ReadoutError> {
        if self.repetitions == 0 {
            return Err(ReadoutError::NoRepetitions);
        }
        for (name, p) in [
            ("molecule_pulse_infidelity", self.molecule_pulse_infidelity),
            ("atom_pulse_infidelity", self.atom_pulse_infidelity),
            ("cooling_error", self.cooling_error),
            ("prep_error", self.prep_error),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ReadoutError::BadProbability(name, p));
            }
        }
        if self.read_state == RotBasisState::DOWN || self.read_state == RotBasisState::UP {
            return Err(ReadoutError::ReadStateCollision);
        }
        Ok(())
    }
}

/// Physical parameters for [`PulseModel::Integrated`].
#[derive(Debug, Clone)]
pub struct IntegratedPulses {
    pub molecule: MoleculeParams,
    pub mode: MotionalMode,
    /// Carrier Rabi frequency behind the molecular sideband pulse (rad/s).
    pub carrier_rabi: f64,
    pub propagator: PropagatorOptions,
}

impl IntegratedPulses {
    pub fn new(molecule: MoleculeParams, mode: MotionalMode) -> Self {
        let carrier_rabi = 0.002 * mode.nu;
        Self { molecule, mode, carrier_rabi, propagator: PropagatorOptions { tolerance: 1e-7, ..Default::default() } }
    }
}

/// `rotor(J ≤ J_max) ⊗ atom ⊗ phonon(n ≤ n_max)` basis for readout.
pub fn readout_basis(j_max: u32, n_max: usize) -> Result<Arc<ProductBasis>, ReadoutError> {
    let rotor = RotorBasis::even(j_max).map_err(BasisError::from)?;
    Ok(Arc::new(ProductBasis::new(vec![Factor::Rotor(rotor), Factor::AtomQubit, Factor::Phonon { n_max }])))
}

/// `|rotor⟩ ⊗ |↓_atom⟩ ⊗ |0⟩` in `basis`.
pub fn molecule_input(basis: &Arc<ProductBasis>, amplitudes: &[(RotBasisState, C64)]) -> Result<JointState, ReadoutError> {
    let (r, a, p) = factors(basis)?;
    let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
    for &(s, c) in amplitudes {
        let mut d = vec![0; basis.factors().len()];
        d[r] = basis.rotor_level(r, s)?;
        d[a] = AtomLevel::Down as usize;
        d[p] = 0;
        amps[basis.index(&d)] += c;
    }
    Ok(JointState::normalized(basis.clone(), amps)?)
}

fn factors(basis: &ProductBasis) -> Result<(usize, usize, usize), ReadoutError> {
    let r = *basis.rotor_factors().first().ok_or(ReadoutError::MissingFactor("rotor"))?;
    let a = basis.atom_factor().ok_or(ReadoutError::MissingFactor("atomic qubit"))?;
    let p = basis.phonon_factor().ok_or(ReadoutError::MissingFactor("phonon"))?;
    Ok((r, a, p))
}

/// Precomputed index tables for one basis and read state.
struct Engine {
    basis: Arc<ProductBasis>,
    atom: usize,
    phonon: usize,
    atom_digit: Vec<usize>,
    phonon_digit: Vec<usize>,
    /// `(|↑, n⟩, |read, n+1⟩, √(n+1))`
    blue: Vec<(usize, usize, f64)>,
    /// `(|↑, n⟩, |read, n−1⟩, √n)`
    red: Vec<(usize, usize, f64)>,
    /// `(|x, ↓_atom, n⟩, |x, ↑_atom, n−1⟩, √n)`
    atom_red: Vec<(usize, usize, f64)>,
    rotor: usize,
    read: usize,
    read_state: RotBasisState,
}

impl Engine {
    fn new(basis: &Arc<ProductBasis>, read_state: RotBasisState) -> Result<Self, ReadoutError> {
        let (r, a, p) = factors(basis)?;
        let rb = basis.rotor_basis(r)?;
        let up = rb.require(RotBasisState::UP).map_err(BasisError::from)?;
        let read = rb.index_of(read_state).ok_or(ReadoutError::ReadStateMissing(read_state))?;
        let n_top = basis.factors()[p].dim() - 1;
        let dim = basis.dim();
        let mut e = Engine {
            basis: basis.clone(),
            atom: a,
            phonon: p,
            atom_digit: (0..dim).map(|i| basis.digit(i, a)).collect(),
            phonon_digit: (0..dim).map(|i| basis.digit(i, p)).collect(),
            blue: Vec::new(),
            red: Vec::new(),
            atom_red: Vec::new(),
            rotor: r,
            read,
            read_state,
        };
        let (rs, ps, as_) = (basis.stride(r), basis.stride(p), basis.stride(a));
        for i in 0..dim {
            let n = e.phonon_digit[i];
            let level = basis.digit(i, r);
            if level == up {
                let base = i - up * rs + read * rs;
                if n < n_top {
                    e.blue.push((i, base + ps, ((n + 1) as f64).sqrt()));
                }
                if n > 0 {
                    e.red.push((i, base - ps, (n as f64).sqrt()));
                }
            }
            if e.atom_digit[i] == AtomLevel::Down as usize && n > 0 {
                e.atom_red.push((i, i + as_ - ps, (n as f64).sqrt()));
            }
        }
        Ok(e)
    }

    fn rotate(amps: &mut [C64], pairs: &[(usize, usize, f64)], base_angle: f64) {
        let mi = C64::new(0.0, -1.0);
        for &(i, j, rate) in pairs {
            let (x, y) = (amps[i], amps[j]);
            if x.norm_sqr() == 0.0 && y.norm_sqr() == 0.0 {
                continue;
            }
            let half = base_angle * rate / 2.0;
            let (s, c) = half.sin_cos();
            amps[i] = x * c + mi * s * y;
            amps[j] = mi * s * x + y * c;
        }
    }

    /// Sample a level of factor `k` from its marginal, then project onto it.
    fn project<R: Rng>(&self, amps: &mut [C64], digit: &[usize], rng: &mut R) -> usize {
        let mut marg = [0.0; 64];
        for (i, a) in amps.iter().enumerate() {
            marg[digit[i]] += a.norm_sqr();
        }
        let total: f64 = marg.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut level = 0;
        for (l, &w) in marg.iter().enumerate() {
            if w > 0.0 {
                level = l;
                if u < w {
                    break;
                }
                u -= w;
            }
        }
        let norm = marg[level].sqrt();
        for (i, a) in amps.iter_mut().enumerate() {
            if digit[i] == level {
                *a /= norm;
            } else {
                *a = C64::new(0.0, 0.0);
            }
        }
        level
    }

    /// Move all amplitude from level `from` to level `to` of factor `k`.
    fn shift_level(&self, amps: &mut [C64], k: usize, digit: &[usize], from: usize, to: usize) {
        if from == to {
            return;
        }
        let stride = self.basis.stride(k) as isize;
        let delta = (to as isize - from as isize) * stride;
        let moved: Vec<(usize, C64)> = (0..amps.len())
            .filter(|&i| digit[i] == from)
            .map(|i| ((i as isize + delta) as usize, std::mem::replace(&mut amps[i], C64::new(0.0, 0.0))))
            .collect();
        for (j, v) in moved {
            amps[j] = v;
        }
    }
}

/// Per-round record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub photon_count: u32,
    pub outcome: Outcome,
    /// Phonon `n = 1` population right after step (3).
    pub phonon_one_after_transfer: f64,
    /// `|read⟩` population right after step (3).
    pub read_population_after_transfer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutResult {
    pub outcome: Outcome,
    pub state: JointState,
    pub rounds: Vec<RoundRecord>,
}

impl ReadoutResult {
    pub fn photon_counts(&self) -> Vec<u32> {
        self.rounds.iter().map(|r| r.photon_count).collect()
    }
}

/// Photon count for an atom projected onto `level`, and its classification.
pub fn detection_round<R: Rng>(level: AtomLevel, model: &DetectionModel, rng: &mut R) -> (u32, Outcome) {
    let mean = match level {
        AtomLevel::Down => model.bright_mean,
        AtomLevel::Up => model.dark_mean,
    };
    let count = if mean > 0.0 {
        Poisson::new(mean).map(|p| p.sample(rng) as u32).unwrap_or(0)
    } else {
        0
    };
    let outcome = if count >= model.threshold { Outcome::Down } else { Outcome::Up };
    (count, outcome)
}

/// Majority vote; a tie goes to the first round.
pub fn majority(outcomes: &[Outcome]) -> Outcome {
    let ups = outcomes.iter().filter(|o| **o == Outcome::Up).count();
    let downs = outcomes.len() - ups;
    match ups.cmp(&downs) {
        std::cmp::Ordering::Greater => Outcome::Up,
        std::cmp::Ordering::Less => Outcome::Down,
        std::cmp::Ordering::Equal => outcomes.first().copied().unwrap_or(Outcome::Down),
    }
}

/// Under-rotated π pulse angle leaving transfer probability `1 − infidelity`.
fn pulse_angle(infidelity: f64) -> f64 {
    2.0 * (1.0 - infidelity).sqrt().asin()
}

/// Run the repeated readout on `state`.
///
/// `integrated` must be given when `config.pulse_model` is
/// [`PulseModel::Integrated`].
pub fn readout_protocol<R: Rng>(
    state: &JointState,
    atom: &AtomicIonModel,
    config: &ReadoutConfig,
    integrated: Option<&IntegratedPulses>,
    rng: &mut R,
) -> Result<ReadoutResult, ReadoutError> {
    config.validate()?;
    atom.detection.validate()?;
    let engine = Engine::new(state.basis(), config.read_state)?;
    run_protocol(&engine, state, atom, config, integrated, rng)
}

fn run_protocol<R: Rng>(
    engine: &Engine,
    state: &JointState,
    atom: &AtomicIonModel,
    config: &ReadoutConfig,
    integrated: Option<&IntegratedPulses>,
    rng: &mut R,
) -> Result<ReadoutResult, ReadoutError> {
    let mut amps = state.amplitudes().to_vec();
    let mol_angle = pulse_angle(config.molecule_pulse_infidelity);
    let atom_angle = pulse_angle(config.atom_pulse_infidelity);
    let mut rounds = Vec::with_capacity(config.repetitions as usize);
    for round in 1..=config.repetitions {
        // (1) cooling
        let n = engine.project(&mut amps, &engine.phonon_digit, rng);
        let target = usize::from(rng.random::<f64>() < config.cooling_error);
        engine.shift_level(&mut amps, engine.phonon, &engine.phonon_digit, n, target);
        // (2) atomic preparation
        let level = engine.project(&mut amps, &engine.atom_digit, rng);
        let target = usize::from(rng.random::<f64>() < config.prep_error);
        engine.shift_level(&mut amps, engine.atom, &engine.atom_digit, level, target);
        // (3) molecular sideband
        let blue = round % 2 == 1;
        match (config.pulse_model, integrated) {
            (PulseModel::Ideal, _) => {
                Engine::rotate(&mut amps, if blue { &engine.blue } else { &engine.red }, mol_angle)
            }
            (PulseModel::Integrated, Some(phys)) => {
                amps = integrated_molecule_pulse(engine, phys, amps, blue)?;
            }
            (PulseModel::Integrated, None) => return Err(ReadoutError::MissingFactor("integrated pulse parameters")),
        }
        let after = JointState::from_raw(engine.basis.clone(), amps.clone());
        let phonon_one = after.factor_populations(engine.phonon)?.get(1).copied().unwrap_or(0.0);
        let read_pop = after.factor_populations(engine.rotor)?[engine.read];
        // (4) atomic red sideband
        match (config.pulse_model, integrated) {
            (PulseModel::Integrated, Some(phys)) => {
                amps = integrated_atom_pulse(engine, phys, atom, amps)?;
            }
            _ => Engine::rotate(&mut amps, &engine.atom_red, atom_angle),
        }
        // (5) detection
        let level = engine.project(&mut amps, &engine.atom_digit, rng);
        let level = if level == 0 { AtomLevel::Down } else { AtomLevel::Up };
        let (photon_count, outcome) = detection_round(level, &atom.detection, rng);
        rounds.push(RoundRecord {
            round,
            photon_count,
            outcome,
            phonon_one_after_transfer: phonon_one,
            read_population_after_transfer: read_pop,
        });
    }
    let outcomes: Vec<Outcome> = rounds.iter().map(|r| r.outcome).collect();
    let mut post = JointState::from_raw(engine.basis.clone(), amps);
    post.renormalize();
    Ok(ReadoutResult { outcome: majority(&outcomes), state: post, rounds })
}

fn integrated_system(engine: &Engine, phys: &IntegratedPulses, atom: Option<&AtomicIonModel>) -> System {
    let mode = phys.mode.with_n_max(engine.basis.factors()[engine.phonon].dim() - 1);
    System::new(engine.basis.clone(), phys.molecule.clone())
        .with_mode(mode)
        .with_atom_frequency(atom.map_or(hz_to_angular(12.6e9), |a| a.frequency))
}

fn evolve(h: &HamiltonianSpec, engine: &Engine, amps: Vec<C64>, duration: f64, opts: &PropagatorOptions) -> Result<Vec<C64>, ReadoutError> {
    let s = JointState::normalized(engine.basis.clone(), amps)?;
    Ok(h.propagate(&s, 0.0, duration, opts)?.state.into_amplitudes())
}

fn integrated_molecule_pulse(engine: &Engine, phys: &IntegratedPulses, amps: Vec<C64>, blue: bool) -> Result<Vec<C64>, ReadoutError> {
    let m = &phys.molecule;
    let (lower, upper) = (RotBasisState::UP, engine.read_state);
    let e0_sq = e0_sq_for_rabi(m, Polarization::ParallelLinear, lower, upper, phys.carrier_rabi)
        .map_err(DynamicsError::from)?;
    let branch = if blue { SidebandBranch::Blue } else { SidebandBranch::Red };
    let drive = SynthesizedDrive::new(Polarization::ParallelLinear, e0_sq, m.energy(upper) - m.energy(lower))
        .map_err(DynamicsError::from)?
        .with_detuning(branch.detuning(phys.mode.nu))
        .with_geometry(Geometry::CounterPropagating);
    let sys = integrated_system(engine, phys, None);
    let frame = FrameOptions::secular(m.omega0() / 2.0, false);
    let h = HamiltonianSpec::build(&sys, &[DriveTerm::molecular(engine.rotor, drive)], frame)?;
    // the blue pulse is timed for n = 0 → 1, the red one for n = 1 → 0
    let duration = PI / (phys.mode.eta * phys.carrier_rabi);
    evolve(&h, engine, amps, duration, &phys.propagator)
}

fn integrated_atom_pulse(engine: &Engine, phys: &IntegratedPulses, atom: &AtomicIonModel, amps: Vec<C64>) -> Result<Vec<C64>, ReadoutError> {
    let sys = integrated_system(engine, phys, Some(atom));
    let drive = AtomicDrive {
        rabi: atom.rabi,
        beat: atom.frequency - phys.mode.nu,
        phase: 0.0,
        eta: atom.eta_atom,
        window: None,
    };
    let frame = FrameOptions::secular(phys.molecule.omega0() / 2.0, false);
    let h = HamiltonianSpec::build(&sys, &[DriveTerm::atomic(engine.atom, drive)], frame)?;
    let duration = PI / (atom.eta_atom * atom.rabi);
    evolve(&h, engine, amps, duration, &phys.propagator)
}

/// Majority-vote error for `rounds` independent rounds each wrong with
/// probability `eps` (ties resolved by the first round).
pub fn majority_vote_error(eps: f64, rounds: u32) -> f64 {
    let r = rounds as i32;
    let mut total = 0.0;
    let mut binom = 1.0;
    for k in 0..=r {
        if k > 0 {
            binom *= (r - k + 1) as f64 / k as f64;
        }
        let p = binom * eps.powi(k) * (1.0 - eps).powi(r - k);
        if 2 * k > r {
            total += p;
        } else if 2 * k == r {
            // ties: wrong exactly when the first round was wrong
            total += p * k as f64 / r as f64;
        }
    }
    total
}

/// Monte-Carlo assignment fidelity for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub config: ReadoutConfig,
    pub trials_per_input: u64,
    /// `|↓⟩` inputs read as up.
    pub errors_down: u64,
    /// `|↑⟩` inputs read as down.
    pub errors_up: u64,
    /// `1 − (e_↓ + e_↑)/2`.
    pub fidelity: f64,
    /// 95% Wilson interval on the fidelity.
    pub ci_low: f64,
    pub ci_high: f64,
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    let z: f64 = 1.959_963_984_540_054;
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let denom = 1.0 + z * z / n_f;
    let centre = (p + z * z / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z * z / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Basis sized for ideal-pulse Monte Carlo with `read_state`.
pub fn monte_carlo_basis(read_state: RotBasisState) -> Result<Arc<ProductBasis>, ReadoutError> {
    readout_basis(read_state.j.max(2), 3)
}

/// Estimate the assignment fidelity of each configuration with `trials`
/// inputs of each of `|↓⟩` and `|↑⟩`.
///
/// Trial `k` of configuration `c` uses stream `2·(c·trials + k) + input`.
pub fn readout_fidelity_sweep(
    configs: &[ReadoutConfig],
    atom: &AtomicIonModel,
    trials: u64,
    seed: u64,
) -> Result<Vec<FidelityRow>, ReadoutError> {
    if trials == 0 {
        return Err(ReadoutError::NoTrials);
    }
    atom.detection.validate()?;
    let mut rows = Vec::with_capacity(configs.len());
    for (c, config) in configs.iter().enumerate() {
        config.validate()?;
        if config.pulse_model == PulseModel::Integrated {
            return Err(ReadoutError::MissingFactor("ideal pulse model for Monte Carlo"));
        }
        let basis = monte_carlo_basis(config.read_state)?;
        let engine = Engine::new(&basis, config.read_state)?;
        let down = molecule_input(&basis, &[(RotBasisState::DOWN, C64::new(1.0, 0.0))])?;
        let up = molecule_input(&basis, &[(RotBasisState::UP, C64::new(1.0, 0.0))])?;
        let results = map_trials(2 * trials, |k| -> Result<bool, ReadoutError> {
            let input = k % 2;
            let stream = 2 * (c as u64 * trials) + k;
            let mut rng = trial_rng(seed, stream);
            let (start, truth) = if input == 0 { (&down, Outcome::Down) } else { (&up, Outcome::Up) };
            let r = run_protocol(&engine, start, atom, config, None, &mut rng)?;
            Ok(r.outcome != truth)
        });
        let (mut e_down, mut e_up) = (0, 0);
        for (k, r) in results.into_iter().enumerate() {
            if r? {
                if k % 2 == 0 {
                    e_down += 1;
                } else {
                    e_up += 1;
                }
            }
        }
        let correct = 2 * trials - e_down - e_up;
        let (lo, hi) = wilson_interval(correct, 2 * trials);
        rows.push(FidelityRow {
            config: *config,
            trials_per_input: trials,
            errors_down: e_down,
            errors_up: e_up,
            fidelity: correct as f64 / (2 * trials) as f64,
            ci_low: lo,
            ci_high: hi,
        });
    }
    Ok(rows)
}
