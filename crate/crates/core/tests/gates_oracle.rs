//! Gate sequences against products of ideal pulse unitaries.

mod support;

use std::f64::consts::PI;

use rotorqc::angular::{MoleculeParams, RotBasisState};
use rotorqc::gates::{
    cirac_zoller_cnot, cirac_zoller_cz, ideal_cnot, single_qubit_gate, CzParams, GateSystem, Qubit,
};
use rotorqc::motion::MotionalMode;
use rotorqc::C64;
use support::oracle::{IdealModel, DOWN, UP};

fn computational(model: &IdealModel, column: &[C64]) -> [C64; 4] {
    [
        column[model.index(DOWN, DOWN, 0)],
        column[model.index(DOWN, UP, 0)],
        column[model.index(UP, DOWN, 0)],
        column[model.index(UP, UP, 0)],
    ]
}

#[test]
fn oracle_reproduces_truth_tables() {
    let model = IdealModel { n_max: 2 };
    let cz = model.cz(0, 1);
    let cnot = model.cnot(0, 1);
    let ideal = ideal_cnot();
    let inputs = [(DOWN, DOWN), (DOWN, UP), (UP, DOWN), (UP, UP)];
    for (k, &(a, b)) in inputs.iter().enumerate() {
        let z = computational(&model, &model.apply(&cz, a, b, 0));
        let sign = if k == 3 { -1.0 } else { 1.0 };
        assert!((z[k] - sign).norm() < 1e-12, "cz row {k}: {z:?}");
        let x = computational(&model, &model.apply(&cnot, a, b, 0));
        let overlap: C64 = ideal[k].iter().zip(&x).map(|(i, v)| i.conj() * v).sum();
        assert!((overlap.norm_sqr() - 1.0).abs() < 1e-12, "cnot row {k}");
    }
}

fn system() -> GateSystem {
    let mut s = GateSystem::new(MoleculeParams::ns2_plus(), MotionalMode::default_trap().with_n_max(3));
    s.propagator.tolerance = 1e-8;
    s
}

#[test]
fn single_qubit_rotation_matches_oracle() {
    let sys = system();
    let model = IdealModel { n_max: 3 };
    let basis = sys.basis().unwrap();
    let seq = single_qubit_gate(PI / 2.0, 0.3, &sys.molecule, 0.01 * sys.mode.nu, 1).unwrap();
    let u = model.rotation(1, PI / 2.0, 0.3);
    for (a, b) in [(Qubit::Down, Qubit::Down), (Qubit::Down, Qubit::Up), (Qubit::Up, Qubit::Up)] {
        let out = sys.run_from_ground(&seq, &sys.product_state(&basis, a, b, 0).unwrap()).unwrap();
        let column = model.apply(&u, a as usize, b as usize, 0);
        assert!(model.overlap(&column, &out) > 1.0 - 1e-4);
    }
}

#[test]
fn sideband_pulses_match_oracle() {
    let sys = system();
    let model = IdealModel { n_max: 3 };
    let basis = sys.basis().unwrap();
    let cz = cirac_zoller_cz(0, 1, &sys.molecule, &sys.mode, &CzParams::for_mode(&sys.mode)).unwrap();
    for (k, pulse) in cz.pulses().iter().take(2).enumerate() {
        let mut single = rotorqc::gates::PulseSequence::new();
        single.push(pulse.label.clone(), pulse.duration, pulse.branch, pulse.pair, pulse.drives.clone()).unwrap();
        let (input, u) = if k == 0 {
            ((Qubit::Up, Qubit::Down, 0), model.red(0, UP, PI))
        } else {
            ((Qubit::Down, Qubit::Up, 1), model.red(1, support::oracle::AUX, 2.0 * PI))
        };
        let start = sys.product_state(&basis, input.0, input.1, input.2).unwrap();
        let out = single.run(&sys.system().unwrap(), sys.frame, &sys.propagator, &start).unwrap();
        let column = model.apply(&u, input.0 as usize, input.1 as usize, input.2);
        assert!(model.overlap(&column, &out) > 0.999, "pulse {k}");
        if k == 1 {
            // the aux loop leaves |↑⟩ alone
            let up = basis.rotor_level(1, RotBasisState::UP).unwrap();
            let p_up = out.population_where(|d| d[1] == up);
            assert!((p_up - 1.0).abs() < 1e-8, "{p_up}");
        }
    }
}

#[test]
fn cnot_squared_is_identity() {
    let mut sys = system();
    sys.propagator.tolerance = 1e-6;
    let params = CzParams::for_mode(&sys.mode);
    let cnot = cirac_zoller_cnot(0, 1, &sys.molecule, &sys.mode, &params).unwrap();
    let twice = cnot.clone().then(&cnot);
    let basis = sys.basis().unwrap();
    let inputs = [(Qubit::Down, Qubit::Down), (Qubit::Down, Qubit::Up), (Qubit::Up, Qubit::Down), (Qubit::Up, Qubit::Up)];
    let outputs = rotorqc::rng::map_trials(4, |k| {
        let (a, b) = inputs[k as usize];
        let s = sys.product_state(&basis, a, b, 0).unwrap();
        (s.clone(), sys.run_from_ground(&twice, &s).unwrap())
    });
    for (start, out) in outputs {
        let f = start.inner(&out).unwrap().norm_sqr();
        assert!(f > 1.0 - 1e-3, "{f}");
    }
}
