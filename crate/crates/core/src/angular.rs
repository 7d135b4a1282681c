//! Angular-momentum algebra for a linear rigid rotor.
//!
//! The rotor basis is built from `|J, M⟩` eigenstates. Laser coupling through
//! the polarizability anisotropy enters through two orientation operators:
//!
//! * `cos²θ = 1/3 + (2/3)·P₂(cos θ)`, which connects `ΔJ ∈ {0, ±2}` at fixed `M`
//!   (light polarized along z);
//! * `sin²θ·e^{±2iφ} = √(32π/15)·Y₂,±₂`, which connects `ΔJ ∈ {0, ±2}` with
//!   `ΔM = ±2` (linear polarization rotating in the x-y plane).
//!
//! Both reduce to products of Wigner 3-j symbols. The 3-j symbols are evaluated
//! with the Racah sum in exact rational arithmetic and rounded once at the end.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AngularError {
    #[error("even-J basis needs an even truncation, got J_max = {0}")]
    OddTruncation(u32),
    #[error("|M| = {m} exceeds J = {j}")]
    ProjectionOutOfRange { j: u32, m: i32 },
    #[error("state |{j},{m}⟩ is not part of the basis")]
    NotInBasis { j: u32, m: i32 },
    #[error("non-positive rotational constant {0}")]
    NonPositiveB0(f64),
}

/// A rotor eigenstate `|J, M⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RotBasisState {
    pub j: u32,
    pub m: i32,
}

impl RotBasisState {
    pub fn new(j: u32, m: i32) -> Result<Self, AngularError> {
        if m.unsigned_abs() > j {
            return Err(AngularError::ProjectionOutOfRange { j, m });
        }
        Ok(Self { j, m })
    }

    /// Qubit `|↓⟩ = |0,0⟩`.
    pub const DOWN: Self = Self { j: 0, m: 0 };
    /// Qubit `|↑⟩ = |2,0⟩`.
    pub const UP: Self = Self { j: 2, m: 0 };
    /// Auxiliary level `|2,2⟩` used by the Cirac-Zoller gate.
    pub const AUX: Self = Self { j: 2, m: 2 };
    /// Default readout shelving level `|4,0⟩`.
    pub const READ: Self = Self { j: 4, m: 0 };
}

impl std::fmt::Display for RotBasisState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "|{},{}⟩", self.j, self.m)
    }
}

/// Which rotational levels the nuclear-spin statistics allow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    EvenJ,
    AllJ,
}

/// Truncated rotor basis ordered by ascending `J`, then ascending `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotorBasis {
    j_max: u32,
    parity: Parity,
    states: Vec<RotBasisState>,
    index: HashMap<RotBasisState, usize>,
}

impl RotorBasis {
    /// Even-J basis with `J ∈ {0, 2, …, j_max}`.
    pub fn even(j_max: u32) -> Result<Self, AngularError> {
        Self::new(j_max, Parity::EvenJ)
    }

    pub fn new(j_max: u32, parity: Parity) -> Result<Self, AngularError> {
        if parity == Parity::EvenJ && j_max % 2 != 0 {
            return Err(AngularError::OddTruncation(j_max));
        }
        let step = match parity {
            Parity::EvenJ => 2,
            Parity::AllJ => 1,
        };
        let states: Vec<_> = (0..=j_max)
            .step_by(step)
            .flat_map(|j| (-(j as i32)..=j as i32).map(move |m| RotBasisState { j, m }))
            .collect();
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Ok(Self { j_max, parity, states, index })
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn states(&self) -> &[RotBasisState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: RotBasisState) -> Option<usize> {
        self.index.get(&state).copied()
    }

    pub fn require(&self, state: RotBasisState) -> Result<usize, AngularError> {
        self.index_of(state)
            .ok_or(AngularError::NotInBasis { j: state.j, m: state.m })
    }

    /// Indices of the outermost `J = J_max` shell, used as a truncation probe.
    pub fn boundary_indices(&self) -> Vec<usize> {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, s)| s.j == self.j_max)
            .map(|(i, _)| i)
            .collect()
    }

    /// Dense orientation operators over this basis.
    pub fn operators(&self) -> RotorOperators {
        RotorOperators::new(self)
    }
}

/// Rotor energy `B₀·J(J+1)` in the units of `b0`.
pub fn rot_energy(j: u32, b0: f64) -> f64 {
    let j = j as f64;
    b0 * j * (j + 1.0)
}

/// Molecular constants for a linear nonpolar rotor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeParams {
    pub name: String,
    /// Rotational constant `B₀` in Hz.
    pub b0_hz: f64,
    /// Polarizability anisotropy `Δα = α∥ − α⊥` as a polarizability volume, Å³.
    pub delta_alpha_a3: f64,
    /// Rotational g-factor.
    pub g_r: f64,
    /// Mass in atomic mass units; informational.
    #[serde(default)]
    pub mass_amu: Option<f64>,
}

impl MoleculeParams {
    pub fn new(
        name: impl Into<String>,
        b0_hz: f64,
        delta_alpha_a3: f64,
        g_r: f64,
    ) -> Result<Self, AngularError> {
        let m = Self { name: name.into(), b0_hz, delta_alpha_a3, g_r, mass_amu: None };
        m.validate()?;
        Ok(m)
    }

    /// NS₂⁺ with `B₀ = 3.44 GHz`, `Δα = 8.47 Å³`, `g_r = −0.014`.
    pub fn ns2_plus() -> Self {
        Self {
            name: "NS2+".into(),
            b0_hz: 3.44e9,
            delta_alpha_a3: 8.47,
            g_r: -0.014,
            mass_amu: Some(78.07),
        }
    }

    pub fn validate(&self) -> Result<(), AngularError> {
        if !(self.b0_hz > 0.0) || !self.b0_hz.is_finite() {
            return Err(AngularError::NonPositiveB0(self.b0_hz));
        }
        Ok(())
    }

    /// `B₀` as an angular frequency.
    pub fn b0(&self) -> f64 {
        crate::units::hz_to_angular(self.b0_hz)
    }

    /// Qubit gap `ω₀ = 6·B₀` (rad/s).
    pub fn omega0(&self) -> f64 {
        rot_energy(2, self.b0()) - rot_energy(0, self.b0())
    }

    /// Qubit gap in Hz.
    pub fn omega0_hz(&self) -> f64 {
        rot_energy(2, self.b0_hz) - rot_energy(0, self.b0_hz)
    }

    /// Level energy of `state` (rad/s).
    pub fn energy(&self, state: RotBasisState) -> f64 {
        rot_energy(state.j, self.b0())
    }

    /// Δα in SI units (C·m²/V).
    pub fn delta_alpha_si(&self) -> f64 {
        crate::units::polarizability_volume_to_si(self.delta_alpha_a3)
    }
}

fn factorial(n: i64) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Wigner 3-j symbol for integer angular momenta.
///
/// Returns 0 whenever the triad violates the triangle rule, a projection is out
/// of range, or the projections do not sum to zero.
pub fn wigner3j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
    if j1 < 0 || j2 < 0 || j3 < 0 {
        return 0.0;
    }
    if m1 + m2 + m3 != 0 || m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return 0.0;
    }
    if j3 > j1 + j2 || j3 < (j1 - j2).abs() {
        return 0.0;
    }
    let (j1, j2, j3, m1, m2, m3) =
        (j1 as i64, j2 as i64, j3 as i64, m1 as i64, m2 as i64, m3 as i64);

    let delta = BigRational::new(
        factorial(j1 + j2 - j3) * factorial(j1 - j2 + j3) * factorial(-j1 + j2 + j3),
        factorial(j1 + j2 + j3 + 1),
    );
    let projections = factorial(j1 + m1)
        * factorial(j1 - m1)
        * factorial(j2 + m2)
        * factorial(j2 - m2)
        * factorial(j3 + m3)
        * factorial(j3 - m3);

    let k_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let k_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let denom = factorial(k)
            * factorial(j3 - j2 + k + m1)
            * factorial(j3 - j1 + k - m2)
            * factorial(j1 + j2 - j3 - k)
            * factorial(j1 - k - m1)
            * factorial(j2 - k + m2);
        let term = BigRational::new(BigInt::one(), denom);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }

    let squared = delta * BigRational::from_integer(projections) * &sum * &sum;
    let magnitude = squared.to_f64().unwrap_or(f64::NAN).sqrt();
    let phase_negative = (j1 - j2 - m3).rem_euclid(2) == 1;
    let negative = phase_negative ^ sum.is_negative();
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

fn minus_one_pow(n: i32) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Reduced rank-2 factor `(-1)^{M'}·√((2J'+1)(2J+1))·(J' 2 J; 0 0 0)(J' 2 J; −M' q M)`.
fn rank2_element(bra: RotBasisState, ket: RotBasisState, q: i32) -> f64 {
    let (jb, mb, jk, mk) = (bra.j as i32, bra.m, ket.j as i32, ket.m);
    if mb != mk + q {
        return 0.0;
    }
    let reduced = wigner3j(jb, 2, jk, 0, 0, 0);
    if reduced == 0.0 {
        return 0.0;
    }
    minus_one_pow(mb)
        * (((2 * jb + 1) * (2 * jk + 1)) as f64).sqrt()
        * reduced
        * wigner3j(jb, 2, jk, -mb, q, mk)
}

/// `⟨bra| cos²θ |ket⟩`.
pub fn cos2_matrix_element(bra: RotBasisState, ket: RotBasisState) -> f64 {
    if bra.m != ket.m {
        return 0.0;
    }
    let isotropic = if bra == ket { 1.0 / 3.0 } else { 0.0 };
    isotropic + 2.0 / 3.0 * rank2_element(bra, ket, 0)
}

/// `⟨bra| sin²θ·e^{2i·sign·φ} |ket⟩` for `sign = ±1`.
///
/// Nonzero only when `M_bra − M_ket = 2·sign`.
pub fn sin2_exp2iphi_matrix_element(bra: RotBasisState, ket: RotBasisState, sign: i32) -> C64 {
    debug_assert!(sign == 1 || sign == -1, "sign must be ±1");
    let q = 2 * sign.signum();
    C64::new((8.0f64 / 3.0).sqrt() * rank2_element(bra, ket, q), 0.0)
}

/// Orientation operators on a [`RotorBasis`], computed once and reused.
#[derive(Debug, Clone)]
pub struct RotorOperators {
    /// `cos²θ`, real symmetric.
    pub cos2: DMatrix<f64>,
    /// `sin²θ`, real symmetric.
    pub sin2: DMatrix<f64>,
    /// `sin²θ·e^{+2iφ}`, raises `M` by 2.
    pub sin2_raise: DMatrix<f64>,
    /// `sin²θ·e^{−2iφ}`, lowers `M` by 2; the transpose of `sin2_raise`.
    pub sin2_lower: DMatrix<f64>,
}

impl RotorOperators {
    pub fn new(basis: &RotorBasis) -> Self {
        let n = basis.len();
        let s = basis.states();
        let cos2 = DMatrix::from_fn(n, n, |r, c| cos2_matrix_element(s[r], s[c]));
        let sin2 = DMatrix::identity(n, n) - &cos2;
        let sin2_raise = DMatrix::from_fn(n, n, |r, c| sin2_exp2iphi_matrix_element(s[r], s[c], 1).re);
        let sin2_lower =
            DMatrix::from_fn(n, n, |r, c| sin2_exp2iphi_matrix_element(s[r], s[c], -1).re);
        Self { cos2, sin2, sin2_raise, sin2_lower }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn energies() {
        assert_eq!(rot_energy(0, 5.0), 0.0);
        assert_eq!(rot_energy(4, 1.0), 20.0);
        assert_eq!(rot_energy(2, 3.44) - rot_energy(0, 3.44), 20.64);
    }

    #[test]
    fn ns2_gap() {
        let m = MoleculeParams::ns2_plus();
        assert_eq!(m.omega0_hz(), 20.64e9);
    }

    #[test]
    fn closed_form_three_j() {
        assert_abs_diff_eq!(wigner3j(1, 1, 0, 0, 0, 0), -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(wigner3j(2, 2, 0, 1, -1, 0), -1.0 / 5f64.sqrt(), epsilon = 1e-15);
        for j in 0..8 {
            for m in -j..=j {
                let expected = minus_one_pow(j - m) / ((2 * j + 1) as f64).sqrt();
                assert_abs_diff_eq!(wigner3j(j, j, 0, m, -m, 0), expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn three_j_invalid_is_zero() {
        assert_eq!(wigner3j(1, 1, 3, 0, 0, 0), 0.0);
        assert_eq!(wigner3j(1, 1, 1, 1, 1, 0), 0.0);
        assert_eq!(wigner3j(1, 1, 1, 2, -2, 0), 0.0);
        // odd J sum with all m = 0 vanishes by symmetry
        assert_eq!(wigner3j(1, 1, 1, 0, 0, 0), 0.0);
    }

    #[test]
    fn qubit_matrix_elements() {
        let c = cos2_matrix_element(RotBasisState::DOWN, RotBasisState::UP);
        assert_abs_diff_eq!(c, 2.0 / (3.0 * 5f64.sqrt()), epsilon = 1e-15);
        assert!((c - 0.2981).abs() < 1e-4);
        assert_abs_diff_eq!(
            cos2_matrix_element(RotBasisState::DOWN, RotBasisState::DOWN),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            cos2_matrix_element(RotBasisState::UP, RotBasisState::UP),
            11.0 / 21.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rotating_elements_follow_delta_m_rule() {
        let aux = sin2_exp2iphi_matrix_element(RotBasisState::AUX, RotBasisState::DOWN, 1);
        assert!(aux.re > 0.0);
        assert_abs_diff_eq!(aux.re, (8.0f64 / 15.0).sqrt(), epsilon = 1e-14);
        assert_eq!(sin2_exp2iphi_matrix_element(RotBasisState::UP, RotBasisState::DOWN, 1).norm(), 0.0);
        assert_eq!(sin2_exp2iphi_matrix_element(RotBasisState::AUX, RotBasisState::DOWN, -1).norm(), 0.0);
    }

    #[test]
    fn basis_ordering_and_size() {
        let b = RotorBasis::even(16).unwrap();
        assert_eq!(b.len(), 153);
        assert_eq!(b.states()[0], RotBasisState::DOWN);
        assert_eq!(b.states()[1], RotBasisState { j: 2, m: -2 });
        assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(b.boundary_indices().len(), 33);
        assert!(RotorBasis::even(5).is_err());
        assert_eq!(RotorBasis::new(2, Parity::AllJ).unwrap().len(), 9);
    }

    #[test]
    fn invalid_state_rejected() {
        assert!(RotBasisState::new(1, 2).is_err());
        assert!(MoleculeParams::new("x", 0.0, 1.0, 0.0).is_err());
    }
}
