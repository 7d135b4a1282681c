//! Simulation toolkit for quantum computing with the rotational states of
//! trapped nonpolar molecular ions.
//!
//! The qubit lives in the rotor levels `|↓⟩ = |J=0, M=0⟩` and
//! `|↑⟩ = |J=2, M=0⟩` of an even-J linear molecule. Laser pairs drive
//! two-photon Raman transitions through the polarizability anisotropy, a shared
//! motional mode couples ions for two-qubit gates, and a co-trapped atomic ion
//! reads the molecule out by state transfer.
//!
//! Module map:
//!
//! * [`angular`] rotor basis, energies, `cos²θ` and `sin²θ e^{±2iφ}` matrix elements
//! * [`fields`] synthesized two-beam Raman drives and their effective couplings
//! * [`basis`] tensor-product bases and joint state vectors
//! * [`dynamics`] Hamiltonian assembly and the unitary propagator
//! * [`motion`] the shared motional mode, sidebands, thermal states
//! * [`gates`] single-qubit rotations, Cirac-Zoller CNOT, Sørensen-Mølmer gate
//! * [`readout`] state-transfer readout through an atomic ion
//! * [`decoherence`] magnetic-noise dephasing and coherence comparisons
//!
//! Frequencies are angular (rad/s) and times are seconds everywhere inside the
//! library; [`units`] holds the conversions used at the boundaries.

pub mod angular;
pub mod basis;
pub mod decoherence;
pub mod dynamics;
pub mod fields;
pub mod fit;
pub mod gates;
pub mod motion;
pub mod readout;
pub mod rng;
pub mod units;

pub use num_complex::Complex64 as C64;
