//! Synthesized two-beam Raman drives.
//!
//! Two co-polarized beams of amplitude `E₀/2` at `ω₁`, `ω₂` sum to
//! `ẑ·E₀·cos(ω̄t)·cos(beat·t/2 + φ)`. Averaging `E²` over the optical carrier
//! `ω̄` leaves `E₀²/4·(1 + cos(beat·t + 2φ))`, so the interaction
//! `−½Δα·E²·cos²θ` splits into a static light shift `−A·cos²θ` and a term
//! `−A·cos(beat·t + 2φ)·cos²θ` with `A = Δα·E₀²/8`.
//!
//! Two counter-rotating circular beams instead synthesize a linear
//! polarization spinning at `beat/2` in the x-y plane. The same averaging gives
//! `−A·sin²θ − (A/2)·sin²θ·(e^{2iφ_m}·e^{−i(beat·t+2φ)} + h.c.)`, which drives
//! `ΔM = ±2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::{
    cos2_matrix_element, sin2_exp2iphi_matrix_element, MoleculeParams, RotBasisState,
    RotorOperators,
};
use crate::units::{w_per_cm2_to_si, EPSILON_0, HBAR, SPEED_OF_LIGHT};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("negative intensity {0} W/cm²")]
    NegativeIntensity(f64),
    #[error("negative squared field amplitude {0}")]
    NegativeFieldSquared(f64),
    #[error("pulse duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("beat frequency must be positive, got {0}")]
    NonPositiveBeat(f64),
    #[error("transition {0} → {1} is not driven by this polarization")]
    ForbiddenTransition(RotBasisState, RotBasisState),
}

/// Intensity (W/cm²) to squared field amplitude (V²/m²) via `I = ε₀·c·E₀²/2`.
pub fn intensity_to_e0_sq(intensity_w_cm2: f64) -> Result<f64, FieldError> {
    if intensity_w_cm2 < 0.0 || intensity_w_cm2.is_nan() {
        return Err(FieldError::NegativeIntensity(intensity_w_cm2));
    }
    Ok(2.0 * w_per_cm2_to_si(intensity_w_cm2) / (EPSILON_0 * SPEED_OF_LIGHT))
}

/// Inverse of [`intensity_to_e0_sq`].
pub fn e0_sq_to_intensity(e0_sq: f64) -> f64 {
    e0_sq * EPSILON_0 * SPEED_OF_LIGHT / 2.0 / 1e4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarization {
    /// Both beams linearly polarized along z: `ΔM = 0`.
    ParallelLinear,
    /// Counter-rotating circular beams: rotating linear polarization, `ΔM = ±2`.
    CounterRotatingCircular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    /// No momentum kick along the trap axis; carrier only.
    CoPropagating,
    /// Maximal momentum transfer; sidebands enabled.
    CounterPropagating,
}

/// Rectangular pulse envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseWindow {
    pub start: f64,
    pub duration: f64,
}

impl PulseWindow {
    pub fn new(start: f64, duration: f64) -> Result<Self, FieldError> {
        if !(duration > 0.0) {
            return Err(FieldError::NonPositiveDuration(duration));
        }
        Ok(Self { start, duration })
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }
}

/// A two-beam Raman drive.
///
/// `beat = transition + detuning`; the detuning is 0 on the carrier and `∓ν` on
/// the red/blue sidebands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedDrive {
    pub kind: Polarization,
    /// `E₀²` in V²/m².
    pub e0_sq: f64,
    /// Angular frequency of the addressed transition.
    pub transition: f64,
    /// Offset of the beat note from `transition`.
    pub detuning: f64,
    /// Phase `φ` of the synthesized field; the resonant term carries `2φ`.
    pub phase: f64,
    pub geometry: Geometry,
    /// Active window; `None` means always on.
    pub window: Option<PulseWindow>,
}

impl SynthesizedDrive {
    pub fn new(kind: Polarization, e0_sq: f64, transition: f64) -> Result<Self, FieldError> {
        if e0_sq < 0.0 || e0_sq.is_nan() {
            return Err(FieldError::NegativeFieldSquared(e0_sq));
        }
        Ok(Self {
            kind,
            e0_sq,
            transition,
            detuning: 0.0,
            phase: 0.0,
            geometry: Geometry::CoPropagating,
            window: None,
        })
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = geometry;
        self
    }

    pub fn with_window(mut self, window: PulseWindow) -> Self {
        self.window = Some(window);
        self
    }

    pub fn beat(&self) -> f64 {
        self.transition + self.detuning
    }

    /// Effective coupling for `molecule`.
    pub fn coupling(&self, molecule: &MoleculeParams) -> EffectiveCoupling {
        EffectiveCoupling {
            class: match self.kind {
                Polarization::ParallelLinear => OperatorClass::Cos2,
                Polarization::CounterRotatingCircular => OperatorClass::Sin2Rotating,
            },
            amplitude: coupling_amplitude(molecule, self.e0_sq),
            beat: self.beat(),
            phase: self.phase,
        }
    }
}

/// `Δα·E₀²/(8ħ)` in rad/s.
pub fn coupling_amplitude(molecule: &MoleculeParams, e0_sq: f64) -> f64 {
    molecule.delta_alpha_si() * e0_sq / (8.0 * HBAR)
}

/// Operator the drive couples to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorClass {
    /// `cos²θ`, `ΔM = 0`.
    Cos2,
    /// `sin²θ·e^{±2iφ}`, `ΔM = ±2`, with a `sin²θ` static part.
    Sin2Rotating,
}

/// Time dependence of a coupling component on the motional mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dressing {
    /// Phonon identity; intensity-only terms with no momentum kick.
    None,
    /// Photon absorbed from the beat note, multiplies by `1 + iη(a + a†)`.
    Absorb,
    /// Conjugate process, multiplies by `1 − iη(a + a†)`.
    Emit,
}

/// One harmonic piece `coefficient·operator·e^{i·frequency·t}` of a coupling.
#[derive(Debug, Clone)]
pub struct CouplingComponent {
    /// Rotor operator including its complex prefactor.
    pub operator: nalgebra::DMatrix<C64>,
    pub frequency: f64,
    pub dressing: Dressing,
    /// The static light-shift part.
    pub is_light_shift: bool,
}

/// Carrier-averaged interaction generated by a [`SynthesizedDrive`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoupling {
    pub class: OperatorClass,
    /// `A = Δα·E₀²/(8ħ)`, rad/s.
    pub amplitude: f64,
    pub beat: f64,
    pub phase: f64,
}

impl EffectiveCoupling {
    /// Decompose into a static light-shift part and the two resonant halves.
    pub fn components(&self, ops: &RotorOperators) -> Vec<CouplingComponent> {
        let a = self.amplitude;
        let to_c = |m: &nalgebra::DMatrix<f64>, c: C64| m.map(|x| c * x);
        let absorb = C64::from_polar(-a / 2.0, -2.0 * self.phase);
        let emit = absorb.conj();
        let (stat, raise, lower) = match self.class {
            OperatorClass::Cos2 => (&ops.cos2, &ops.cos2, &ops.cos2),
            OperatorClass::Sin2Rotating => (&ops.sin2, &ops.sin2_raise, &ops.sin2_lower),
        };
        vec![
            CouplingComponent {
                operator: to_c(stat, C64::new(-a, 0.0)),
                frequency: 0.0,
                dressing: Dressing::None,
                is_light_shift: true,
            },
            CouplingComponent {
                operator: to_c(raise, absorb),
                frequency: -self.beat,
                dressing: Dressing::Absorb,
                is_light_shift: false,
            },
            CouplingComponent {
                operator: to_c(lower, emit),
                frequency: self.beat,
                dressing: Dressing::Emit,
                is_light_shift: false,
            },
        ]
    }

    /// Rotor-space interaction operator at time `t` (no motional dressing).
    pub fn operator_at(&self, ops: &RotorOperators, t: f64) -> nalgebra::DMatrix<C64> {
        let n = ops.cos2.nrows();
        self.components(ops)
            .into_iter()
            .fold(nalgebra::DMatrix::zeros(n, n), |acc, c| {
                acc + c.operator * C64::from_polar(1.0, c.frequency * t)
            })
    }

    /// Resonant Rabi frequency `A·|⟨upper|O|lower⟩|` between two levels.
    pub fn rabi_frequency(&self, lower: RotBasisState, upper: RotBasisState) -> f64 {
        self.amplitude * resonant_element(self.class, lower, upper).norm()
    }

    /// Shift of the `lower → upper` transition frequency caused by the static
    /// light-shift term.
    pub fn differential_light_shift(&self, lower: RotBasisState, upper: RotBasisState) -> f64 {
        let diag = |s: RotBasisState| match self.class {
            OperatorClass::Cos2 => cos2_matrix_element(s, s),
            OperatorClass::Sin2Rotating => 1.0 - cos2_matrix_element(s, s),
        };
        -self.amplitude * (diag(upper) - diag(lower))
    }
}

/// Matrix element of the resonant (raising) operator of `class`.
pub fn resonant_element(class: OperatorClass, lower: RotBasisState, upper: RotBasisState) -> C64 {
    match class {
        OperatorClass::Cos2 => C64::new(cos2_matrix_element(upper, lower), 0.0),
        OperatorClass::Sin2Rotating => {
            let sign = if upper.m >= lower.m { 1 } else { -1 };
            sin2_exp2iphi_matrix_element(upper, lower, sign)
        }
    }
}

/// `E₀²` that gives resonant Rabi frequency `rabi` on `lower ↔ upper`.
pub fn e0_sq_for_rabi(
    molecule: &MoleculeParams,
    kind: Polarization,
    lower: RotBasisState,
    upper: RotBasisState,
    rabi: f64,
) -> Result<f64, FieldError> {
    let class = match kind {
        Polarization::ParallelLinear => OperatorClass::Cos2,
        Polarization::CounterRotatingCircular => OperatorClass::Sin2Rotating,
    };
    let element = resonant_element(class, lower, upper).norm();
    if element == 0.0 {
        return Err(FieldError::ForbiddenTransition(lower, upper));
    }
    Ok(8.0 * HBAR * rabi / (molecule.delta_alpha_si() * element))
}

/// Carrier-averaged linear-pair coupling `−½Δα·E²·cos²θ`.
///
/// Kept as an explicit constructor mirroring the field synthesis.
pub fn synthesize_linear_pair(
    molecule: &MoleculeParams,
    e0_sq: f64,
    beat: f64,
    phase: f64,
) -> Result<EffectiveCoupling, FieldError> {
    if !(beat > 0.0) {
        return Err(FieldError::NonPositiveBeat(beat));
    }
    if e0_sq < 0.0 {
        return Err(FieldError::NegativeFieldSquared(e0_sq));
    }
    Ok(EffectiveCoupling {
        class: OperatorClass::Cos2,
        amplitude: coupling_amplitude(molecule, e0_sq),
        beat,
        phase,
    })
}

/// Carrier-averaged counter-rotating-pair coupling.
pub fn synthesize_rotating_pair(
    molecule: &MoleculeParams,
    e0_sq: f64,
    beat: f64,
    phase: f64,
) -> Result<EffectiveCoupling, FieldError> {
    if !(beat > 0.0) {
        return Err(FieldError::NonPositiveBeat(beat));
    }
    if e0_sq < 0.0 {
        return Err(FieldError::NegativeFieldSquared(e0_sq));
    }
    Ok(EffectiveCoupling {
        class: OperatorClass::Sin2Rotating,
        amplitude: coupling_amplitude(molecule, e0_sq),
        beat,
        phase,
    })
}

/// Exact `E²(t)` of the parallel-linear pair, optical carrier included.
pub fn linear_pair_field_sq(e0_sq: f64, carrier: f64, beat: f64, phase: f64, t: f64) -> f64 {
    let e = (carrier * t).cos() * (beat * t / 2.0 + phase).cos();
    e0_sq * e * e
}

/// Carrier-averaged `⟨E²⟩(t) = E₀²/4·(1 + cos(beat·t + 2φ))`.
pub fn linear_pair_field_sq_averaged(e0_sq: f64, beat: f64, phase: f64, t: f64) -> f64 {
    e0_sq / 4.0 * (1.0 + (beat * t + 2.0 * phase).cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::RotorBasis;
    use std::f64::consts::PI;

    #[test]
    fn intensity_conversion() {
        assert_eq!(intensity_to_e0_sq(0.0).unwrap(), 0.0);
        let e = intensity_to_e0_sq(2.5e6).unwrap();
        assert!((e / 1.882e13 - 1.0).abs() < 1e-3, "{e}");
        let e2 = intensity_to_e0_sq(5e6).unwrap();
        assert!((e2 / e - 2.0).abs() < 1e-14);
        assert!(intensity_to_e0_sq(-1.0).is_err());
        assert!((e0_sq_to_intensity(e) - 2.5e6).abs() < 1e-6);
    }

    #[test]
    fn zero_field_gives_zero_coupling() {
        let m = MoleculeParams::ns2_plus();
        let c = synthesize_linear_pair(&m, 0.0, m.omega0(), 0.3).unwrap();
        let ops = RotorBasis::even(4).unwrap().operators();
        assert!(c.operator_at(&ops, 1.234e-9).iter().all(|x| x.norm() == 0.0));
        let r = synthesize_rotating_pair(&m, 0.0, m.omega0(), 0.0).unwrap();
        assert_eq!(r.amplitude, 0.0);
        assert!(synthesize_linear_pair(&m, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn resonant_amplitude_matches_rabi_formula() {
        let m = MoleculeParams::ns2_plus();
        let e0_sq = 1e13;
        let c = synthesize_linear_pair(&m, e0_sq, m.omega0(), 0.0).unwrap();
        let expected = m.delta_alpha_si() * e0_sq * cos2_matrix_element(RotBasisState::DOWN, RotBasisState::UP)
            / (8.0 * HBAR);
        assert!((c.rabi_frequency(RotBasisState::DOWN, RotBasisState::UP) / expected - 1.0).abs() < 1e-14);
        let back = e0_sq_for_rabi(&m, Polarization::ParallelLinear, RotBasisState::DOWN, RotBasisState::UP, expected)
            .unwrap();
        assert!((back / e0_sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_enters_twice() {
        let m = MoleculeParams::ns2_plus();
        let basis = RotorBasis::even(2).unwrap();
        let ops = basis.operators();
        let c0 = synthesize_linear_pair(&m, 1e12, 1.0, 0.0).unwrap();
        let c1 = synthesize_linear_pair(&m, 1e12, 1.0, 0.4).unwrap();
        let res0 = &c0.components(&ops)[1];
        let res1 = &c1.components(&ops)[1];
        let (i, j) = (basis.index_of(RotBasisState::UP).unwrap(), 0);
        let ratio = res1.operator[(i, j)] / res0.operator[(i, j)];
        assert!((ratio.arg() + 0.8).abs() < 1e-12);
    }

    #[test]
    fn rotating_pair_does_not_couple_up_to_down() {
        let m = MoleculeParams::ns2_plus();
        let basis = RotorBasis::even(4).unwrap();
        let ops = basis.operators();
        let c = synthesize_rotating_pair(&m, 1e12, m.omega0(), 0.0).unwrap();
        let (d, u, a) = (
            basis.index_of(RotBasisState::DOWN).unwrap(),
            basis.index_of(RotBasisState::UP).unwrap(),
            basis.index_of(RotBasisState::AUX).unwrap(),
        );
        let comps = c.components(&ops);
        assert_eq!(comps[1].operator[(u, d)].norm(), 0.0);
        assert!(comps[1].operator[(a, d)].norm() > 0.0);
        assert_eq!(c.rabi_frequency(RotBasisState::DOWN, RotBasisState::UP), 0.0);
    }

    #[test]
    fn assembled_operator_is_hermitian() {
        let m = MoleculeParams::ns2_plus();
        let ops = RotorBasis::even(8).unwrap().operators();
        for c in [
            synthesize_linear_pair(&m, 3e12, m.omega0(), 0.7).unwrap(),
            synthesize_rotating_pair(&m, 3e12, m.omega0(), -1.1).unwrap(),
        ] {
            for k in 0..20 {
                let t = k as f64 * 1.7e-11;
                let h = c.operator_at(&ops, t);
                let scale = c.amplitude;
                let diff = (&h - h.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max);
                assert!(diff / scale < 1e-14, "{diff}");
            }
        }
    }

    #[test]
    fn carrier_average_matches_exact_field() {
        let beat = 1.0;
        let phase = 0.37;
        let e0_sq = 2.0;
        for ratio in [1e3, 1e4] {
            let carrier = ratio * beat;
            for &t0 in &[0.0, 0.9, 2.3, 5.1] {
                let period = 2.0 * PI / carrier;
                // midpoint rule over one carrier period, many nodes
                let n = 20_000;
                let avg = (0..n)
                    .map(|k| {
                        let t = t0 - period / 2.0 + (k as f64 + 0.5) * period / n as f64;
                        linear_pair_field_sq(e0_sq, carrier, beat, phase, t)
                    })
                    .sum::<f64>()
                    / n as f64;
                let approx = linear_pair_field_sq_averaged(e0_sq, beat, phase, t0);
                // residual is first order in beat/carrier
                let rel = (avg - approx).abs() / (e0_sq / 2.0);
                assert!(rel < 1.0 / ratio, "ratio {ratio} t {t0}: {rel}");
            }
        }
    }

    #[test]
    fn light_shift_is_not_common_mode() {
        let m = MoleculeParams::ns2_plus();
        let c = synthesize_linear_pair(&m, 1e12, m.omega0(), 0.0).unwrap();
        let shift = c.differential_light_shift(RotBasisState::DOWN, RotBasisState::UP);
        let expected = -c.amplitude * (11.0 / 21.0 - 1.0 / 3.0);
        assert!((shift - expected).abs() < 1e-12 * c.amplitude);
    }

    #[test]
    fn window_validation() {
        assert!(PulseWindow::new(0.0, 0.0).is_err());
        let w = PulseWindow::new(1.0, 2.0).unwrap();
        assert!(w.contains(1.0) && !w.contains(3.0));
    }
}
