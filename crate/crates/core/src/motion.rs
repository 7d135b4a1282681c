//! The shared motional mode of two co-trapped ions.
//!
//! Sideband couplings are kept to first order in the Lamb-Dicke parameter:
//! `e^{iη(a+a†)} ≈ 1 + iη(a + a†)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::{RotBasisState, RotorBasis};
use crate::fields::{resonant_element, EffectiveCoupling, Geometry};
use crate::units::hz_to_angular;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("mode frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("phonon truncation n_max = {0} is below 2")]
    TruncationTooSmall(usize),
    #[error("Lamb-Dicke parameter {0} outside [0, 1)")]
    InvalidEta(f64),
    #[error("negative mean phonon number {0}")]
    NegativeOccupation(f64),
    #[error("{0:?} sideband requested with η = 0")]
    NoLambDicke(SidebandBranch),
    #[error(transparent)]
    Angular(#[from] crate::angular::AngularError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionalMode {
    /// Mode angular frequency `ν`.
    pub nu: f64,
    pub n_max: usize,
    /// Lamb-Dicke parameter for counter-propagating beams.
    pub eta: f64,
}

impl MotionalMode {
    pub fn new(nu: f64, n_max: usize, eta: f64) -> Result<Self, MotionError> {
        if !(nu > 0.0) {
            return Err(MotionError::NonPositiveFrequency(nu));
        }
        if n_max < 2 {
            return Err(MotionError::TruncationTooSmall(n_max));
        }
        if !(0.0..1.0).contains(&eta) {
            return Err(MotionError::InvalidEta(eta));
        }
        Ok(Self { nu, n_max, eta })
    }

    /// `ν = 2π × 1 MHz`, `η = 0.1`, `n_max = 5`.
    pub fn default_trap() -> Self {
        Self { nu: hz_to_angular(1e6), n_max: 5, eta: 0.1 }
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    /// Co-propagating beams impart no recoil along the trap axis.
    pub fn eta_for(&self, geometry: Geometry) -> f64 {
        match geometry {
            Geometry::CoPropagating => 0.0,
            Geometry::CounterPropagating => self.eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SidebandBranch {
    Carrier,
    /// Internal raise with phonon annihilation, beat `gap − ν`.
    Red,
    /// Internal raise with phonon creation, beat `gap + ν`.
    Blue,
}

impl SidebandBranch {
    /// Beat-note offset from the internal transition.
    pub fn detuning(self, nu: f64) -> f64 {
        match self {
            SidebandBranch::Carrier => 0.0,
            SidebandBranch::Red => -nu,
            SidebandBranch::Blue => nu,
        }
    }
}

/// Thermal (geometric) phonon distribution truncated at `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub n_bar: f64,
    pub weights: Vec<f64>,
    /// Probability mass beyond `n_max` before renormalization.
    pub tail_mass: f64,
}

impl ThermalState {
    pub fn mean(&self) -> f64 {
        self.weights.iter().enumerate().map(|(n, w)| n as f64 * w).sum()
    }
}

/// `w_n ∝ n̄ⁿ/(n̄+1)ⁿ⁺¹` for `n ≤ n_max`.
pub fn thermal_state(n_bar: f64, n_max: usize) -> Result<ThermalState, MotionError> {
    if n_bar < 0.0 || n_bar.is_nan() {
        return Err(MotionError::NegativeOccupation(n_bar));
    }
    let ratio = n_bar / (n_bar + 1.0);
    let mut weights: Vec<f64> = (0..=n_max)
        .map(|n| ratio.powi(n as i32) / (n_bar + 1.0))
        .collect();
    let kept: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= kept);
    Ok(ThermalState { n_bar, weights, tail_mass: ratio.powi(n_max as i32 + 1) })
}

/// Smallest `n_max` whose discarded thermal tail is below `tail`.
pub fn thermal_cutoff(n_bar: f64, tail: f64) -> usize {
    if n_bar <= 0.0 {
        return 0;
    }
    let ratio = n_bar / (n_bar + 1.0);
    // tail mass beyond n_max is ratio^(n_max+1)
    ((tail.ln() / ratio.ln()).ceil() as usize).saturating_sub(1)
}

/// Resonant (rotating-wave) sideband operator on `rotor ⊗ phonon`, phonon index
/// fastest.
///
/// Carrier elements are `Ω/2`, red `ηΩ√n/2` for `|upper, n−1⟩⟨lower, n|`, blue
/// `ηΩ√(n+1)/2` for `|upper, n+1⟩⟨lower, n|`, with `Ω` the carrier Rabi
/// frequency of `coupling`. Hermitian conjugates are included.
pub fn sideband_coupling(
    coupling: &EffectiveCoupling,
    rotor: &RotorBasis,
    lower: RotBasisState,
    upper: RotBasisState,
    mode: &MotionalMode,
    branch: SidebandBranch,
    geometry: Geometry,
) -> Result<DMatrix<C64>, MotionError> {
    let eta = mode.eta_for(geometry);
    if branch != SidebandBranch::Carrier && eta == 0.0 {
        return Err(MotionError::NoLambDicke(branch));
    }
    let l = rotor.require(lower)?;
    let u = rotor.require(upper)?;
    let np = mode.n_max + 1;
    let dim = rotor.len() * np;
    let idx = |r: usize, n: usize| r * np + n;
    let absorb = C64::from_polar(-coupling.amplitude / 2.0, -2.0 * coupling.phase)
        * resonant_element(coupling.class, lower, upper);
    let i = C64::new(0.0, 1.0);
    let mut h = DMatrix::zeros(dim, dim);
    for n in 0..np {
        let (target, factor) = match branch {
            SidebandBranch::Carrier => (Some(n), C64::new(1.0, 0.0)),
            SidebandBranch::Red if n > 0 => (Some(n - 1), i * eta * (n as f64).sqrt()),
            SidebandBranch::Blue if n + 1 < np => (Some(n + 1), i * eta * ((n + 1) as f64).sqrt()),
            _ => (None, C64::new(0.0, 0.0)),
        };
        if let Some(m) = target {
            let v = absorb * factor;
            h[(idx(u, m), idx(l, n))] += v;
            h[(idx(l, n), idx(u, m))] += v.conj();
        }
    }
    Ok(h)
}
