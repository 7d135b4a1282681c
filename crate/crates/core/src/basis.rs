//! Tensor-product bases and normalized joint state vectors.
//!
//! A [`ProductBasis`] is an ordered list of factors (rotors, an atomic qubit,
//! a phonon ladder). Global indices are mixed-radix with the first factor
//! varying slowest.

use std::sync::Arc;

use thiserror::Error;

use crate::angular::{RotBasisState, RotorBasis};
use crate::C64;

/// Tolerance on `‖ψ‖ − 1` for a state to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("expected {expected} amplitudes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state norm {0} deviates from 1")]
    NotNormalized(f64),
    #[error("states live in different bases")]
    BasisMismatch,
    #[error("factor {0} does not exist")]
    NoSuchFactor(usize),
    #[error("level {level} out of range for factor {factor}")]
    LevelOutOfRange { factor: usize, level: usize },
    #[error("factor {0} is not a {1}")]
    WrongFactorKind(usize, &'static str),
    #[error(transparent)]
    Angular(#[from] crate::angular::AngularError),
}

/// Levels of the co-trapped atomic ion used for readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomLevel {
    Down = 0,
    Up = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Rotor(RotorBasis),
    /// Two-level hyperfine qubit of the atomic logic ion.
    AtomQubit,
    /// Phonon number states `0..=n_max` of the shared mode.
    Phonon { n_max: usize },
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Rotor(b) => b.len(),
            Factor::AtomQubit => 2,
            Factor::Phonon { n_max } => n_max + 1,
        }
    }

    pub fn level_label(&self, level: usize) -> String {
        match self {
            Factor::Rotor(b) => {
                let s = b.states()[level];
                format!("J{}M{}", s.j, s.m)
            }
            Factor::AtomQubit => if level == 0 { "atom_down" } else { "atom_up" }.to_string(),
            Factor::Phonon { .. } => format!("n{level}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductBasis {
    factors: Vec<Factor>,
    strides: Vec<usize>,
    dim: usize,
}

impl ProductBasis {
    pub fn new(factors: Vec<Factor>) -> Self {
        let mut strides = vec![1; factors.len()];
        for k in (0..factors.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * factors[k + 1].dim();
        }
        let dim = factors.iter().map(Factor::dim).product();
        Self { factors, strides, dim }
    }

    /// A single rotor.
    pub fn rotor(basis: RotorBasis) -> Self {
        Self::new(vec![Factor::Rotor(basis)])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, k: usize) -> Result<&Factor, BasisError> {
        self.factors.get(k).ok_or(BasisError::NoSuchFactor(k))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.strides).map(|(d, s)| d * s).sum()
    }

    pub fn digit(&self, index: usize, k: usize) -> usize {
        (index / self.strides[k]) % self.factors[k].dim()
    }

    pub fn digits(&self, index: usize) -> Vec<usize> {
        (0..self.factors.len()).map(|k| self.digit(index, k)).collect()
    }

    pub fn rotor_basis(&self, k: usize) -> Result<&RotorBasis, BasisError> {
        match self.factor(k)? {
            Factor::Rotor(b) => Ok(b),
            _ => Err(BasisError::WrongFactorKind(k, "rotor")),
        }
    }

    /// Index of the first phonon factor, if any.
    pub fn phonon_factor(&self) -> Option<usize> {
        self.factors.iter().position(|f| matches!(f, Factor::Phonon { .. }))
    }

    pub fn atom_factor(&self) -> Option<usize> {
        self.factors.iter().position(|f| matches!(f, Factor::AtomQubit))
    }

    pub fn rotor_factors(&self) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f, Factor::Rotor(_)))
            .map(|(k, _)| k)
            .collect()
    }

    /// Level index of a rotor state inside factor `k`.
    pub fn rotor_level(&self, k: usize, state: RotBasisState) -> Result<usize, BasisError> {
        Ok(self.rotor_basis(k)?.require(state)?)
    }

    pub fn label(&self, index: usize) -> String {
        self.digits(index)
            .iter()
            .zip(&self.factors)
            .map(|(d, f)| f.level_label(*d))
            .collect::<Vec<_>>()
            .join("_")
    }
}

/// Normalized amplitude vector over a [`ProductBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    basis: Arc<ProductBasis>,
    amps: Vec<C64>,
}

impl JointState {
    pub fn from_amplitudes(basis: Arc<ProductBasis>, amps: Vec<C64>) -> Result<Self, BasisError> {
        if amps.len() != basis.dim() {
            return Err(BasisError::DimensionMismatch { expected: basis.dim(), got: amps.len() });
        }
        let s = Self { basis, amps };
        let n = s.norm();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(BasisError::NotNormalized(n));
        }
        Ok(s)
    }

    /// Like [`from_amplitudes`](Self::from_amplitudes) but rescales to unit norm.
    pub fn normalized(basis: Arc<ProductBasis>, mut amps: Vec<C64>) -> Result<Self, BasisError> {
        if amps.len() != basis.dim() {
            return Err(BasisError::DimensionMismatch { expected: basis.dim(), got: amps.len() });
        }
        let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(BasisError::NotNormalized(n));
        }
        amps.iter_mut().for_each(|a| *a /= n);
        Ok(Self { basis, amps })
    }

    /// Product basis state with the given level in each factor.
    pub fn basis_state(basis: Arc<ProductBasis>, digits: &[usize]) -> Result<Self, BasisError> {
        if digits.len() != basis.factors().len() {
            return Err(BasisError::DimensionMismatch {
                expected: basis.factors().len(),
                got: digits.len(),
            });
        }
        for (k, (&d, f)) in digits.iter().zip(basis.factors()).enumerate() {
            if d >= f.dim() {
                return Err(BasisError::LevelOutOfRange { factor: k, level: d });
            }
        }
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        amps[basis.index(digits)] = C64::new(1.0, 0.0);
        Ok(Self { basis, amps })
    }

    /// Used by the propagator, which reports norm drift itself.
    pub(crate) fn from_raw(basis: Arc<ProductBasis>, amps: Vec<C64>) -> Self {
        Self { basis, amps }
    }

    pub fn basis(&self) -> &Arc<ProductBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn renormalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
        n
    }

    pub fn same_basis(&self, other: &JointState) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &JointState) -> Result<C64, BasisError> {
        if !self.same_basis(other) {
            return Err(BasisError::BasisMismatch);
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Marginal level populations of factor `k`.
    pub fn factor_populations(&self, k: usize) -> Result<Vec<f64>, BasisError> {
        let f = self.basis.factor(k)?;
        let mut p = vec![0.0; f.dim()];
        for (i, a) in self.amps.iter().enumerate() {
            p[self.basis.digit(i, k)] += a.norm_sqr();
        }
        Ok(p)
    }

    /// Population of the product state given by `digits`.
    pub fn population(&self, digits: &[usize]) -> f64 {
        self.amps[self.basis.index(digits)].norm_sqr()
    }

    /// Total population of basis states accepted by `pred`.
    pub fn population_where(&self, mut pred: impl FnMut(&[usize]) -> bool) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| pred(&self.basis.digits(*i)))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joint() -> Arc<ProductBasis> {
        Arc::new(ProductBasis::new(vec![
            Factor::Rotor(RotorBasis::even(2).unwrap()),
            Factor::AtomQubit,
            Factor::Phonon { n_max: 3 },
        ]))
    }

    #[test]
    fn mixed_radix_round_trip() {
        let b = joint();
        assert_eq!(b.dim(), 6 * 2 * 4);
        for i in 0..b.dim() {
            assert_eq!(b.index(&b.digits(i)), i);
        }
        assert_eq!(b.phonon_factor(), Some(2));
        assert_eq!(b.atom_factor(), Some(1));
        assert_eq!(b.label(b.index(&[3, 1, 2])), "J2M0_atom_up_n2");
    }

    #[test]
    fn marginals() {
        let b = joint();
        let s = JointState::basis_state(b.clone(), &[5, 0, 1]).unwrap();
        let p = s.factor_populations(2).unwrap();
        assert_eq!(p, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.population(&[5, 0, 1]), 1.0);
    }

    #[test]
    fn rejects_unnormalized() {
        let b = joint();
        let amps = vec![C64::new(0.5, 0.0); b.dim()];
        assert!(matches!(
            JointState::from_amplitudes(b.clone(), amps.clone()),
            Err(BasisError::NotNormalized(_))
        ));
        let s = JointState::normalized(b, amps).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inner_requires_same_basis() {
        let a = JointState::basis_state(joint(), &[0, 0, 0]).unwrap();
        let other = Arc::new(ProductBasis::rotor(RotorBasis::even(2).unwrap()));
        let b = JointState::basis_state(other, &[0]).unwrap();
        assert_eq!(a.inner(&b), Err(BasisError::BasisMismatch));
    }
}
