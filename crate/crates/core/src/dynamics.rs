//! Time-dependent Schrödinger evolution for rotors, an atomic qubit and a
//! phonon mode.
//!
//! A Hamiltonian is assembled as a list of harmonic entries
//! `amplitude·e^{i·frequency·t}` on `|row⟩⟨col|`. In the interaction frame the
//! level splittings are folded into the entry frequencies; in the lab frame they
//! appear as static diagonal entries. Evolution uses a fourth-order Magnus
//! integrator with step-doubling error control, restricted to the subspace
//! reachable from the initial state.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::{cos2_matrix_element, MoleculeParams, Parity, RotBasisState, RotorBasis, RotorOperators};
use crate::basis::{BasisError, Factor, JointState, ProductBasis};
use crate::fields::{coupling_amplitude, Dressing, FieldError, Polarization, PulseWindow, SynthesizedDrive};
use crate::fit::{fit_sinusoid_near, SinusoidFit};
use crate::motion::MotionalMode;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("drive targets factor {0}, which is not a {1}")]
    InvalidTarget(usize, &'static str),
    #[error("basis has a phonon factor but no motional mode was given")]
    MissingMode,
    #[error("phonon factor has n_max = {basis} but the mode has n_max = {mode}")]
    ModeMismatch { basis: usize, mode: usize },
    #[error("a secular cutoff needs the interaction frame")]
    LabFrameCutoff,
    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("norm drifted by {0:e}")]
    NormDrift(f64),
    #[error("step budget of {0} exhausted")]
    MaxSteps(u64),
    #[error("times must be finite, ordered and not before the start time")]
    InvalidTimes,
    #[error("state does not live in the Hamiltonian's basis")]
    BasisMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Lab,
    /// Rotating with the bare level energies.
    Interaction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameOptions {
    pub frame: Frame,
    /// Keep the static `−A·cos²θ` (or `−A·sin²θ`) light shift.
    pub light_shift: bool,
    /// Drop interaction-frame entries oscillating faster than this (rad/s).
    pub secular_cutoff: Option<f64>,
}

impl Default for FrameOptions {
    fn default() -> Self {
        Self { frame: Frame::Interaction, light_shift: true, secular_cutoff: None }
    }
}

impl FrameOptions {
    /// Interaction frame, light shift kept, no terms dropped.
    pub fn full() -> Self {
        Self::default()
    }

    /// Interaction frame keeping only terms slower than `cutoff`.
    pub fn secular(cutoff: f64, light_shift: bool) -> Self {
        Self { frame: Frame::Interaction, light_shift, secular_cutoff: Some(cutoff) }
    }
}

/// Resonant drive on the atomic logic qubit, parametrized by its Rabi rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomicDrive {
    pub rabi: f64,
    pub beat: f64,
    pub phase: f64,
    /// Lamb-Dicke parameter of the atomic beams; 0 means carrier only.
    pub eta: f64,
    pub window: Option<PulseWindow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DriveSource {
    Molecular(SynthesizedDrive),
    Atomic(AtomicDrive),
}

/// A drive acting on one factor of the product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveTerm {
    pub target: usize,
    pub source: DriveSource,
}

impl DriveTerm {
    pub fn molecular(target: usize, drive: SynthesizedDrive) -> Self {
        Self { target, source: DriveSource::Molecular(drive) }
    }

    pub fn atomic(target: usize, drive: AtomicDrive) -> Self {
        Self { target, source: DriveSource::Atomic(drive) }
    }

    fn window(&self) -> Option<PulseWindow> {
        match &self.source {
            DriveSource::Molecular(d) => d.window,
            DriveSource::Atomic(d) => d.window,
        }
    }
}

/// Static description of the physical system.
#[derive(Debug, Clone)]
pub struct System {
    pub basis: Arc<ProductBasis>,
    pub molecule: MoleculeParams,
    pub mode: Option<MotionalMode>,
    /// Splitting of the atomic qubit (rad/s).
    pub atom_frequency: f64,
}

impl System {
    pub fn new(basis: Arc<ProductBasis>, molecule: MoleculeParams) -> Self {
        Self { basis, molecule, mode: None, atom_frequency: 0.0 }
    }

    /// One rotor truncated at `j_max` (even `J` only).
    pub fn single_rotor(molecule: MoleculeParams, j_max: u32) -> Result<Self, DynamicsError> {
        let rotor = RotorBasis::even(j_max).map_err(BasisError::from)?;
        Ok(Self::new(Arc::new(ProductBasis::rotor(rotor)), molecule))
    }

    pub fn with_mode(mut self, mode: MotionalMode) -> Self {
        self.mode = Some(mode);
        self
    }

    pub fn with_atom_frequency(mut self, w: f64) -> Self {
        self.atom_frequency = w;
        self
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if let Some(k) = self.basis.phonon_factor() {
            let Factor::Phonon { n_max } = self.basis.factors()[k] else { unreachable!() };
            match self.mode {
                None => return Err(DynamicsError::MissingMode),
                Some(m) if m.n_max != n_max => {
                    return Err(DynamicsError::ModeMismatch { basis: n_max, mode: m.n_max })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Bare energy of every product state (rad/s).
    pub fn energies(&self) -> Vec<f64> {
        let b = &self.basis;
        (0..b.dim())
            .map(|i| {
                b.factors()
                    .iter()
                    .enumerate()
                    .map(|(k, f)| {
                        let d = b.digit(i, k);
                        match f {
                            Factor::Rotor(r) => self.molecule.energy(r.states()[d]),
                            Factor::AtomQubit => d as f64 * self.atom_frequency,
                            Factor::Phonon { .. } => d as f64 * self.mode.map_or(0.0, |m| m.nu),
                        }
                    })
                    .sum()
            })
            .collect()
    }
}

/// One harmonic entry `amplitude·e^{i·frequency·t}·|row⟩⟨col|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub amplitude: C64,
    pub frequency: f64,
    /// Index into [`HamiltonianSpec::windows`]; `None` is always on.
    pub window: Option<usize>,
}

/// Assembled Hamiltonian (units of ħ, rad/s).
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    basis: Arc<ProductBasis>,
    frame: Frame,
    energies: Vec<f64>,
    entries: Vec<Entry>,
    windows: Vec<PulseWindow>,
}

struct Local {
    /// (row, col, value) in the factor's own level indices.
    nonzeros: Vec<(usize, usize, C64)>,
    frequency: f64,
    dressing: Dressing,
    eta: f64,
}

impl HamiltonianSpec {
    pub fn build(system: &System, drives: &[DriveTerm], options: FrameOptions) -> Result<Self, DynamicsError> {
        system.validate()?;
        if options.frame == Frame::Lab && options.secular_cutoff.is_some() {
            return Err(DynamicsError::LabFrameCutoff);
        }
        let basis = system.basis.clone();
        let energies = system.energies();
        let phonon = basis.phonon_factor();
        let mut ops_cache: HashMap<usize, RotorOperators> = HashMap::new();
        let mut windows = Vec::new();
        let mut acc: HashMap<(usize, usize, u64, usize), C64> = HashMap::new();
        let mut order: Vec<(usize, usize, u64, usize)> = Vec::new();
        let mut push = |row: usize, col: usize, v: C64, freq: f64, w: usize| {
            let key = (row, col, freq.to_bits(), w);
            acc.entry(key)
                .and_modify(|x| *x += v)
                .or_insert_with(|| {
                    order.push(key);
                    v
                });
        };

        for drive in drives {
            let w = match drive.window() {
                Some(win) => {
                    windows.push(win);
                    windows.len() - 1
                }
                None => usize::MAX,
            };
            let locals = match &drive.source {
                DriveSource::Molecular(d) => {
                    let Ok(Factor::Rotor(rb)) = basis.factor(drive.target) else {
                        return Err(DynamicsError::InvalidTarget(drive.target, "rotor"));
                    };
                    let ops = ops_cache.entry(drive.target).or_insert_with(|| rb.operators());
                    let eta = system.mode.map_or(0.0, |m| m.eta_for(d.geometry));
                    d.coupling(&system.molecule)
                        .components(ops)
                        .into_iter()
                        .filter(|c| options.light_shift || !c.is_light_shift)
                        .map(|c| Local {
                            nonzeros: nonzeros(&c.operator),
                            frequency: c.frequency,
                            dressing: c.dressing,
                            eta,
                        })
                        .collect::<Vec<_>>()
                }
                DriveSource::Atomic(d) => {
                    if !matches!(basis.factor(drive.target), Ok(Factor::AtomQubit)) {
                        return Err(DynamicsError::InvalidTarget(drive.target, "atomic qubit"));
                    }
                    let absorb = C64::from_polar(d.rabi / 2.0, -d.phase);
                    vec![
                        Local { nonzeros: vec![(1, 0, absorb)], frequency: -d.beat, dressing: Dressing::Absorb, eta: d.eta },
                        Local { nonzeros: vec![(0, 1, absorb.conj())], frequency: d.beat, dressing: Dressing::Emit, eta: d.eta },
                    ]
                }
            };
            let stride = basis.stride(drive.target);
            for local in &locals {
                for col in 0..basis.dim() {
                    let level = basis.digit(col, drive.target);
                    for &(r, c, v) in local.nonzeros.iter().filter(|(_, c, _)| *c == level) {
                        let row = col + r * stride - c * stride;
                        let mut emit = |row: usize, v: C64| {
                            let freq = match options.frame {
                                Frame::Lab => local.frequency,
                                Frame::Interaction => local.frequency + (energies[row] - energies[col]),
                            };
                            if options.secular_cutoff.is_none_or(|cut| freq.abs() <= cut) {
                                push(row, col, v, freq, w);
                            }
                        };
                        emit(row, v);
                        let sign = match local.dressing {
                            Dressing::None => continue,
                            Dressing::Absorb => 1.0,
                            Dressing::Emit => -1.0,
                        };
                        if local.eta == 0.0 {
                            continue;
                        }
                        let Some(p) = phonon else { continue };
                        let ps = basis.stride(p);
                        let n = basis.digit(col, p);
                        let n_top = basis.factors()[p].dim() - 1;
                        let kick = C64::new(0.0, sign * local.eta);
                        if n > 0 {
                            emit(row - ps, v * kick * (n as f64).sqrt());
                        }
                        if n < n_top {
                            emit(row + ps, v * kick * ((n + 1) as f64).sqrt());
                        }
                    }
                }
            }
        }

        let mut entries: Vec<Entry> = Vec::with_capacity(order.len() + energies.len());
        if options.frame == Frame::Lab {
            for (i, &e) in energies.iter().enumerate() {
                if e != 0.0 {
                    entries.push(Entry { row: i, col: i, amplitude: C64::new(e, 0.0), frequency: 0.0, window: None });
                }
            }
        }
        for key in order {
            let v = acc[&key];
            if v.norm() == 0.0 {
                continue;
            }
            entries.push(Entry {
                row: key.0,
                col: key.1,
                amplitude: v,
                frequency: f64::from_bits(key.2),
                window: (key.3 != usize::MAX).then_some(key.3),
            });
        }
        Ok(Self { basis, frame: options.frame, energies, entries, windows })
    }

    pub fn basis(&self) -> &Arc<ProductBasis> {
        &self.basis
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn windows(&self) -> &[PulseWindow] {
        &self.windows
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    fn active(&self, e: &Entry, t: f64) -> bool {
        e.window.is_none_or(|w| self.windows[w].contains(t))
    }

    /// Dense matrix at time `t`, for checks on small systems.
    pub fn matrix_at(&self, t: f64) -> nalgebra::DMatrix<C64> {
        let n = self.basis.dim();
        let mut h = nalgebra::DMatrix::zeros(n, n);
        for e in self.entries.iter().filter(|e| self.active(e, t)) {
            h[(e.row, e.col)] += e.amplitude * C64::from_polar(1.0, e.frequency * t);
        }
        h
    }

    /// Map an interaction-frame state at time `t` to the lab frame.
    pub fn interaction_to_lab(&self, state: &mut JointState, t: f64) {
        for (a, e) in state.amplitudes_mut().iter_mut().zip(&self.energies) {
            *a *= C64::from_polar(1.0, -e * t);
        }
    }

    /// Inverse of [`interaction_to_lab`](Self::interaction_to_lab).
    pub fn lab_to_interaction(&self, state: &mut JointState, t: f64) {
        for (a, e) in state.amplitudes_mut().iter_mut().zip(&self.energies) {
            *a *= C64::from_polar(1.0, e * t);
        }
    }

    /// Evolve `state` from `t0` to `t1`.
    pub fn propagate(
        &self,
        state: &JointState,
        t0: f64,
        t1: f64,
        options: &PropagatorOptions,
    ) -> Result<Propagation, DynamicsError> {
        let mut out = self.propagate_sampled(state, t0, &[t1], options)?;
        Ok(out.pop().expect("one sample requested"))
    }

    /// Evolve `state` from `t0`, returning the state at each of `times`.
    pub fn propagate_sampled(
        &self,
        state: &JointState,
        t0: f64,
        times: &[f64],
        options: &PropagatorOptions,
    ) -> Result<Vec<Propagation>, DynamicsError> {
        if !state.same_basis(&JointState::from_raw(self.basis.clone(), Vec::new())) {
            return Err(DynamicsError::BasisMismatch);
        }
        if !t0.is_finite() || times.iter().any(|t| !t.is_finite()) {
            return Err(DynamicsError::InvalidTimes);
        }
        if times.first().is_some_and(|&t| t < t0) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(DynamicsError::InvalidTimes);
        }
        let n0 = state.norm();
        if (n0 - 1.0).abs() > crate::basis::NORM_TOLERANCE {
            return Err(BasisError::NotNormalized(n0).into());
        }
        let span = times.last().map_or(0.0, |t| t - t0);

        // reachable subspace
        let support: Vec<usize> = (0..self.basis.dim())
            .filter(|&i| state.amplitudes()[i].norm_sqr() > 0.0)
            .collect();
        let sub = reachable(self.basis.dim(), &self.entries, &support);
        let mut global_to_local = vec![usize::MAX; self.basis.dim()];
        for (l, &g) in sub.iter().enumerate() {
            global_to_local[g] = l;
        }
        let mut psi: Vec<C64> = sub.iter().map(|&g| state.amplitudes()[g]).collect();

        let mut breaks: Vec<f64> = self
            .windows
            .iter()
            .flat_map(|w| [w.start, w.end()])
            .chain(times.iter().copied())
            .filter(|&t| t > t0)
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let mut stepper = Stepper::new(options, span);
        let mut compiled: HashMap<Vec<bool>, Compiled> = HashMap::new();
        let mut results = Vec::with_capacity(times.len());
        let mut t = t0;
        let mut next_sample = 0;
        let emit_samples = |t: f64, psi: &[C64], next: &mut usize, stepper: &Stepper, results: &mut Vec<Propagation>| -> Result<(), DynamicsError> {
            while *next < times.len() && times[*next] <= t {
                let mut amps = vec![C64::new(0.0, 0.0); self.basis.dim()];
                for (l, &g) in sub.iter().enumerate() {
                    amps[g] = psi[l];
                }
                let drift = (amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs();
                if drift > options.norm_limit {
                    return Err(DynamicsError::NormDrift(drift));
                }
                results.push(Propagation {
                    state: JointState::from_raw(self.basis.clone(), amps),
                    time: times[*next],
                    steps: stepper.accepted,
                    norm_drift: drift,
                });
                *next += 1;
            }
            Ok(())
        };
        emit_samples(t, &psi, &mut next_sample, &stepper, &mut results)?;
        for &b in &breaks {
            if next_sample >= times.len() {
                break;
            }
            let mid = 0.5 * (t + b);
            let mask: Vec<bool> = self.windows.iter().map(|w| w.contains(mid)).collect();
            let c = compiled
                .entry(mask)
                .or_insert_with(|| Compiled::new(self, &sub, &global_to_local, mid));
            if c.bound > 0.0 {
                stepper.advance(c, &mut psi, t, b)?;
            }
            t = b;
            emit_samples(t, &psi, &mut next_sample, &stepper, &mut results)?;
        }
        Ok(results)
    }
}

fn nonzeros(m: &nalgebra::DMatrix<C64>) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v.norm() != 0.0 {
                out.push((r, c, v));
            }
        }
    }
    out
}

fn reachable(dim: usize, entries: &[Entry], support: &[usize]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for e in entries.iter().filter(|e| e.row != e.col) {
        adj[e.col].push(e.row);
        adj[e.row].push(e.col);
    }
    let mut seen = vec![false; dim];
    let mut queue: VecDeque<usize> = support.iter().copied().collect();
    for &s in support {
        seen[s] = true;
    }
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..dim).filter(|&i| seen[i]).collect()
}

/// Propagated state with diagnostics.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub state: JointState,
    pub time: f64,
    /// Accepted steps since the start of the run.
    pub steps: u64,
    /// `|‖ψ‖ − 1|`.
    pub norm_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorOptions {
    /// Target global error in the state vector.
    pub tolerance: f64,
    pub max_steps: u64,
    /// Largest tolerated `|‖ψ‖ − 1|`.
    pub norm_limit: f64,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_steps: 200_000_000, norm_limit: 1e-10 }
    }
}

/// Entries restricted to the reachable subspace, grouped by frequency.
struct Compiled {
    n: usize,
    freqs: Vec<f64>,
    entry_freq: Vec<usize>,
    entry_slot: Vec<usize>,
    entry_amp: Vec<C64>,
    slot_row: Vec<usize>,
    slot_col: Vec<usize>,
    bound: f64,
    max_freq: f64,
}

impl Compiled {
    fn new(h: &HamiltonianSpec, sub: &[usize], g2l: &[usize], t: f64) -> Self {
        let mut freq_idx: HashMap<u64, usize> = HashMap::new();
        let mut slot_idx: HashMap<(usize, usize), usize> = HashMap::new();
        let mut c = Compiled {
            n: sub.len(),
            freqs: Vec::new(),
            entry_freq: Vec::new(),
            entry_slot: Vec::new(),
            entry_amp: Vec::new(),
            slot_row: Vec::new(),
            slot_col: Vec::new(),
            bound: 0.0,
            max_freq: 0.0,
        };
        let mut row_sum = vec![0.0; sub.len()];
        for e in h.entries.iter().filter(|e| h.active(e, t)) {
            let (r, col) = (g2l[e.row], g2l[e.col]);
            if r == usize::MAX || col == usize::MAX {
                continue;
            }
            let fi = *freq_idx.entry(e.frequency.to_bits()).or_insert_with(|| {
                c.freqs.push(e.frequency);
                c.freqs.len() - 1
            });
            let si = *slot_idx.entry((r, col)).or_insert_with(|| {
                c.slot_row.push(r);
                c.slot_col.push(col);
                c.slot_row.len() - 1
            });
            c.entry_freq.push(fi);
            c.entry_slot.push(si);
            c.entry_amp.push(e.amplitude);
            row_sum[r] += e.amplitude.norm();
            c.max_freq = c.max_freq.max(e.frequency.abs());
        }
        c.bound = row_sum.iter().copied().fold(0.0, f64::max);
        c
    }

    /// Slot values of `−iH(t)`.
    fn values(&self, t: f64, phases: &mut Vec<C64>, vals: &mut Vec<C64>) {
        phases.clear();
        phases.extend(self.freqs.iter().map(|f| C64::from_polar(1.0, f * t)));
        vals.clear();
        vals.resize(self.slot_row.len(), C64::new(0.0, 0.0));
        let mi = C64::new(0.0, -1.0);
        for k in 0..self.entry_amp.len() {
            vals[self.entry_slot[k]] += mi * self.entry_amp[k] * phases[self.entry_freq[k]];
        }
    }

    fn apply(&self, vals: &[C64], x: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for s in 0..vals.len() {
            out[self.slot_row[s]] += vals[s] * x[self.slot_col[s]];
        }
    }
}

struct Stepper {
    tol_rate: f64,
    max_steps: u64,
    h: Option<f64>,
    accepted: u64,
    attempts: u64,
    phases: Vec<C64>,
    a1: Vec<C64>,
    a2: Vec<C64>,
}

const ROUNDOFF_FLOOR: f64 = 16.0 * f64::EPSILON;
const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6
const COMMUTATOR_WEIGHT: f64 = 0.144_337_567_297_406_43; // √3/12

impl Stepper {
    fn new(options: &PropagatorOptions, span: f64) -> Self {
        Self {
            tol_rate: options.tolerance / span.max(f64::MIN_POSITIVE),
            max_steps: options.max_steps,
            h: None,
            accepted: 0,
            attempts: 0,
            phases: Vec::new(),
            a1: Vec::new(),
            a2: Vec::new(),
        }
    }

    fn advance(&mut self, c: &Compiled, psi: &mut Vec<C64>, a: f64, b: f64) -> Result<(), DynamicsError> {
        let h_cap = 2.0 / c.bound;
        let mut h = self.h.unwrap_or_else(|| (0.5 / c.bound).min(1.0 / c.max_freq.max(1e-300)));
        let mut t = a;
        let (mut big, mut half, mut tmp) = (vec![], vec![], vec![]);
        while t < b {
            if self.attempts >= self.max_steps {
                return Err(DynamicsError::MaxSteps(self.max_steps));
            }
            self.attempts += 1;
            h = h.min(h_cap);
            let last = h >= b - t;
            let hs = if last { b - t } else { h };
            self.step(c, psi, t, hs, &mut big);
            self.step(c, psi, t, hs / 2.0, &mut tmp);
            self.step(c, &tmp, t + hs / 2.0, hs / 2.0, &mut half);
            let err = big.iter().zip(&half).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            // the floor keeps tiny steps from chasing rounding noise
            let allowed = self.tol_rate * hs + ROUNDOFF_FLOOR;
            if err <= allowed {
                std::mem::swap(psi, &mut half);
                t = if last { b } else { t + hs };
                self.accepted += 1;
            }
            let factor = if err == 0.0 { 4.0 } else { (0.9 * (allowed / err).powf(0.25)).clamp(0.2, 4.0) };
            if err <= allowed && last {
                // a truncated final step says little about the natural size
                h = h.max(hs * factor);
            } else {
                h = hs * factor;
            }
            if h < (t.abs() + b.abs()) * 4.0 * f64::EPSILON {
                return Err(DynamicsError::StepSizeUnderflow { t, h });
            }
        }
        self.h = Some(h);
        Ok(())
    }

    /// One fourth-order Magnus step of size `h` from `t`.
    fn step(&mut self, c: &Compiled, x: &[C64], t: f64, h: f64, out: &mut Vec<C64>) {
        let mut v1 = std::mem::take(&mut self.a1);
        let mut v2 = std::mem::take(&mut self.a2);
        c.values(t + (0.5 - GAUSS_OFFSET) * h, &mut self.phases, &mut v1);
        c.values(t + (0.5 + GAUSS_OFFSET) * h, &mut self.phases, &mut v2);
        let n = c.n;
        let (mut y1, mut y2, mut z1, mut z2) =
            (vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]);
        let omega = |v: &[C64], res: &mut [C64], y1: &mut [C64], y2: &mut [C64], z1: &mut [C64], z2: &mut [C64]| {
            c.apply(&v1, v, y1);
            c.apply(&v2, v, y2);
            c.apply(&v2, y1, z1);
            c.apply(&v1, y2, z2);
            let k = COMMUTATOR_WEIGHT * h * h;
            for i in 0..n {
                res[i] = (y1[i] + y2[i]) * (h / 2.0) + (z1[i] - z2[i]) * k;
            }
        };
        out.clear();
        out.extend_from_slice(x);
        let mut term = x.to_vec();
        let mut next = vec![C64::new(0.0, 0.0); n];
        for k in 1..64 {
            omega(&term, &mut next, &mut y1, &mut y2, &mut z1, &mut z2);
            let inv = 1.0 / k as f64;
            let mut size = 0.0;
            for i in 0..n {
                term[i] = next[i] * inv;
                out[i] += term[i];
                size += term[i].norm_sqr();
            }
            if size < 1e-34 {
                break;
            }
        }
        self.a1 = v1;
        self.a2 = v2;
    }
}

/// Resonant Rabi frequency of the linear drive on `|0,0⟩ ↔ |2,0⟩`.
pub fn rabi_frequency(molecule: &MoleculeParams, e0_sq: f64) -> f64 {
    coupling_amplitude(molecule, e0_sq) * cos2_matrix_element(RotBasisState::UP, RotBasisState::DOWN)
}

/// The two levels a drive polarization addresses from `|0,0⟩`.
pub fn addressed_pair(kind: Polarization) -> (RotBasisState, RotBasisState) {
    match kind {
        Polarization::ParallelLinear => (RotBasisState::DOWN, RotBasisState::UP),
        Polarization::CounterRotatingCircular => (RotBasisState::DOWN, RotBasisState::AUX),
    }
}

/// Retune `drive` so its beat tracks the light-shifted transition.
pub fn compensate_light_shift(drive: &SynthesizedDrive, molecule: &MoleculeParams) -> SynthesizedDrive {
    let (lower, upper) = addressed_pair(drive.kind);
    let shift = drive.coupling(molecule).differential_light_shift(lower, upper);
    drive.clone().with_detuning(drive.detuning + shift)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiConfig {
    pub j_max: u32,
    pub frame: FrameOptions,
    pub propagator: PropagatorOptions,
    /// Shift the beat by the differential light shift of the addressed pair.
    pub compensate_light_shift: bool,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            j_max: 8,
            frame: FrameOptions::full(),
            propagator: PropagatorOptions::default(),
            compensate_light_shift: true,
        }
    }
}

/// Populations sampled during a Rabi experiment starting in `|0,0⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiTrace {
    pub lower: RotBasisState,
    pub upper: RotBasisState,
    pub times: Vec<f64>,
    pub p_lower: Vec<f64>,
    pub p_upper: Vec<f64>,
    /// Population outside the addressed pair.
    pub leakage: Vec<f64>,
    /// Population in `M ≠ 0` states.
    pub m_nonzero: Vec<f64>,
    /// Population in `J = J_max`.
    pub boundary: Vec<f64>,
    pub max_norm_drift: f64,
    /// Basis states in the order used by `populations`.
    pub states: Vec<RotBasisState>,
    /// Population of every basis state at every sample time.
    pub populations: Vec<Vec<f64>>,
    /// The drive actually applied, after any compensation.
    pub drive: SynthesizedDrive,
}

impl RabiTrace {
    /// Fit the upper-level population, searching near `guess` (rad/s).
    pub fn fit(&self, guess: f64) -> Option<SinusoidFit> {
        fit_sinusoid_near(&self.times, &self.p_upper, guess)
    }

    /// Population of `state` over time, if it is in the basis.
    pub fn population_of(&self, state: RotBasisState) -> Option<Vec<f64>> {
        let i = self.states.iter().position(|s| *s == state)?;
        Some(self.populations.iter().map(|p| p[i]).collect())
    }
}

/// Drive a single rotor from `|0,0⟩` and record populations at `samples`
/// evenly spaced times in `(0, duration]`.
pub fn simulate_rabi_flopping(
    molecule: &MoleculeParams,
    drive: &SynthesizedDrive,
    duration: f64,
    samples: usize,
    config: &RabiConfig,
) -> Result<RabiTrace, DynamicsError> {
    if !(duration > 0.0) || samples == 0 {
        return Err(DynamicsError::InvalidTimes);
    }
    let rotor = RotorBasis::new(config.j_max, Parity::EvenJ).map_err(BasisError::from)?;
    let system = System::new(Arc::new(ProductBasis::rotor(rotor.clone())), molecule.clone());
    let drive = if config.compensate_light_shift { compensate_light_shift(drive, molecule) } else { drive.clone() };
    let h = HamiltonianSpec::build(&system, &[DriveTerm::molecular(0, drive.clone())], config.frame)?;
    let (lower, upper) = addressed_pair(drive.kind);
    let (li, ui) = (rotor.require(lower).map_err(BasisError::from)?, rotor.require(upper).map_err(BasisError::from)?);
    let start = JointState::basis_state(system.basis.clone(), &[li])?;
    let times: Vec<f64> = (1..=samples).map(|k| duration * k as f64 / samples as f64).collect();
    let out = h.propagate_sampled(&start, 0.0, &times, &config.propagator)?;
    let boundary = rotor.boundary_indices();
    let mut trace = RabiTrace {
        lower,
        upper,
        times: times.clone(),
        p_lower: Vec::new(),
        p_upper: Vec::new(),
        leakage: Vec::new(),
        m_nonzero: Vec::new(),
        boundary: Vec::new(),
        max_norm_drift: 0.0,
        states: rotor.states().to_vec(),
        populations: Vec::new(),
        drive,
    };
    for p in &out {
        let a = p.state.amplitudes();
        let pl = a[li].norm_sqr();
        let pu = a[ui].norm_sqr();
        trace.p_lower.push(pl);
        trace.p_upper.push(pu);
        trace.leakage.push((1.0 - pl - pu).max(0.0));
        trace.m_nonzero.push(
            rotor.states().iter().zip(a).filter(|(s, _)| s.m != 0).map(|(_, x)| x.norm_sqr()).sum(),
        );
        trace.boundary.push(boundary.iter().map(|&i| a[i].norm_sqr()).sum());
        trace.max_norm_drift = trace.max_norm_drift.max(p.norm_drift);
        trace.populations.push(a.iter().map(|x| x.norm_sqr()).collect());
    }
    Ok(trace)
}
