//! Ideal rotating-wave pulse unitaries for two three-level ions sharing one
//! mode, built by direct matrix exponentiation.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rotorqc::angular::RotBasisState;
use rotorqc::basis::JointState;
use rotorqc::C64;

pub const DOWN: usize = 0;
pub const UP: usize = 1;
pub const AUX: usize = 2;

pub struct IdealModel {
    pub n_max: usize,
}

impl IdealModel {
    pub fn dim(&self) -> usize {
        9 * (self.n_max + 1)
    }

    pub fn index(&self, a: usize, b: usize, n: usize) -> usize {
        (a * 3 + b) * (self.n_max + 1) + n
    }

    fn levels(&self, ion: usize, own: usize, other: usize) -> (usize, usize) {
        if ion == 0 { (own, other) } else { (other, own) }
    }

    fn exp_i(&self, generator: &DMatrix<C64>, area: f64) -> DMatrix<C64> {
        (generator * C64::new(0.0, -area / 2.0)).exp()
    }

    /// `exp(−i·angle/2·(cos(phase)σx + sin(phase)σy))` on `ion`'s `{↓, ↑}`.
    pub fn rotation(&self, ion: usize, angle: f64, phase: f64) -> DMatrix<C64> {
        let mut g = DMatrix::zeros(self.dim(), self.dim());
        for other in 0..3 {
            for n in 0..=self.n_max {
                let (a0, b0) = self.levels(ion, DOWN, other);
                let (a1, b1) = self.levels(ion, UP, other);
                let (lo, hi) = (self.index(a0, b0, n), self.index(a1, b1, n));
                g[(hi, lo)] = C64::from_polar(1.0, phase);
                g[(lo, hi)] = C64::from_polar(1.0, -phase);
            }
        }
        self.exp_i(&g, angle)
    }

    /// Red sideband `|↓, n⟩ → |upper, n−1⟩` of pulse area `area`, with the
    /// `−i` recoil phase of a zero-phase drive.
    pub fn red(&self, ion: usize, upper: usize, area: f64) -> DMatrix<C64> {
        let mut g = DMatrix::zeros(self.dim(), self.dim());
        for other in 0..3 {
            for n in 1..=self.n_max {
                let (a0, b0) = self.levels(ion, DOWN, other);
                let (a1, b1) = self.levels(ion, upper, other);
                let (lo, hi) = (self.index(a0, b0, n), self.index(a1, b1, n - 1));
                let v = C64::new(0.0, -(n as f64).sqrt());
                g[(hi, lo)] = v;
                g[(lo, hi)] = v.conj();
            }
        }
        self.exp_i(&g, area)
    }

    pub fn cz(&self, control: usize, target: usize) -> DMatrix<C64> {
        use std::f64::consts::PI;
        let c = self.red(control, UP, PI);
        &c * self.red(target, AUX, 2.0 * PI) * &c
    }

    pub fn cnot(&self, control: usize, target: usize) -> DMatrix<C64> {
        use std::f64::consts::PI;
        self.rotation(target, PI / 2.0, PI / 2.0) * self.cz(control, target) * self.rotation(target, PI / 2.0, -PI / 2.0)
    }

    /// Column of `u` for the product input `|a, b, n⟩`.
    pub fn apply(&self, u: &DMatrix<C64>, a: usize, b: usize, n: usize) -> Vec<C64> {
        u.column(self.index(a, b, n)).iter().copied().collect()
    }

    /// `|⟨oracle|ψ⟩|²` with `psi` from a simulation on `[Rotor, Rotor, Phonon]`.
    pub fn overlap(&self, oracle: &[C64], psi: &JointState) -> f64 {
        let b = psi.basis();
        let states = [RotBasisState::DOWN, RotBasisState::UP, RotBasisState::AUX];
        let n_sim = b.factors()[2].dim();
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..3 {
            for c in 0..3 {
                for n in 0..=self.n_max.min(n_sim - 1) {
                    let i = b.index(&[b.rotor_level(0, states[a]).unwrap(), b.rotor_level(1, states[c]).unwrap(), n]);
                    acc += oracle[self.index(a, c, n)].conj() * psi.amplitudes()[i];
                }
            }
        }
        acc.norm_sqr()
    }
}
