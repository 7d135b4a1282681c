//! Repeated readout against the binomial majority-vote oracle.

use rotorqc::angular::{MoleculeParams, RotBasisState};
use rotorqc::motion::MotionalMode;
use rotorqc::readout::{
    majority_vote_error, molecule_input, readout_basis, readout_fidelity_sweep, readout_protocol,
    AtomicIonModel, DetectionModel, IntegratedPulses, Outcome, PulseModel, ReadoutConfig,
};
use rotorqc::rng::trial_rng;
use rotorqc::C64;

/// Enumerate every error pattern of `rounds` independent rounds.
fn brute_force(eps: f64, rounds: u32) -> f64 {
    let mut total = 0.0;
    for mask in 0u32..(1 << rounds) {
        let wrong = mask.count_ones();
        let p = eps.powi(wrong as i32) * (1.0 - eps).powi((rounds - wrong) as i32);
        let first_wrong = mask & 1 == 1;
        let majority_wrong = match (2 * wrong).cmp(&rounds) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => first_wrong,
        };
        if majority_wrong {
            total += p;
        }
    }
    total
}

#[test]
fn closed_form_matches_enumeration() {
    for eps in [0.001, 0.03, 0.2, 0.45] {
        for r in 1..=10 {
            assert!((majority_vote_error(eps, r) - brute_force(eps, r)).abs() < 1e-14);
        }
    }
    assert!((majority_vote_error(0.03, 5) - 2.6e-4).abs() < 0.05e-4);
}

#[test]
fn detection_limited_readout_follows_binomial() {
    // no pulse errors, so each round fails only through photon statistics
    let detection = DetectionModel::new(6.0, 0.5, 2).unwrap();
    let atom = AtomicIonModel { detection, ..AtomicIonModel::typical() };
    let (eps_down, eps_up) = (detection.bright_error(), detection.dark_error());
    let reps = [1, 2, 3, 5, 7];
    let configs: Vec<ReadoutConfig> = reps.iter().map(|&r| ReadoutConfig { repetitions: r, ..Default::default() }).collect();
    let trials = 20_000;
    let rows = readout_fidelity_sweep(&configs, &atom, trials, 11).unwrap();
    let mut last = 0.0;
    for (row, &r) in rows.iter().zip(&reps) {
        for (errors, eps) in [(row.errors_down, eps_down), (row.errors_up, eps_up)] {
            let p = majority_vote_error(eps, r);
            let sd = (trials as f64 * p * (1.0 - p)).sqrt();
            let diff = (errors as f64 - trials as f64 * p).abs();
            assert!(diff <= 4.0 * sd + 1.0, "R = {r}: {errors} vs {}", trials as f64 * p);
        }
        let predicted = 1.0 - (majority_vote_error(eps_down, r) + majority_vote_error(eps_up, r)) / 2.0;
        assert!(row.ci_low - 1e-3 <= predicted && predicted <= row.ci_high + 1e-3);
        if r % 2 == 1 {
            assert!(predicted >= last);
            last = predicted;
        }
    }
}

#[test]
fn integrated_pulses_agree_with_ideal_ones() {
    let molecule = MoleculeParams::ns2_plus();
    let mode = MotionalMode::default_trap().with_n_max(3);
    let phys = IntegratedPulses::new(molecule, mode);
    let basis = readout_basis(4, 3).unwrap();
    let atom = AtomicIonModel {
        detection: DetectionModel::new(1e3, 0.0, 1).unwrap(),
        ..AtomicIonModel::typical()
    };
    let (a, b) = (C64::new(0.6, 0.0), C64::new(0.0, 0.8));
    let input = molecule_input(&basis, &[(RotBasisState::DOWN, a), (RotBasisState::UP, b)]).unwrap();
    let ideal = ReadoutConfig { repetitions: 2, ..Default::default() };
    let integrated = ReadoutConfig { pulse_model: PulseModel::Integrated, ..ideal };
    let ri = readout_protocol(&input, &atom, &ideal, None, &mut trial_rng(5, 0)).unwrap();
    let rf = readout_protocol(&input, &atom, &integrated, Some(&phys), &mut trial_rng(5, 0)).unwrap();
    assert!((ri.rounds[0].phonon_one_after_transfer - 0.64).abs() < 1e-6);
    assert!((rf.rounds[0].phonon_one_after_transfer - 0.64).abs() < 2e-3);
    assert!((rf.rounds[0].read_population_after_transfer - 0.64).abs() < 2e-3);
    assert!((rf.state.norm() - 1.0).abs() < 1e-10);
    // a collapsed |↑⟩ keeps reading up through the red round as well
    let up = molecule_input(&basis, &[(RotBasisState::UP, C64::new(1.0, 0.0))]).unwrap();
    let r = readout_protocol(&up, &atom, &integrated, Some(&phys), &mut trial_rng(6, 0)).unwrap();
    assert!(r.rounds.iter().all(|x| x.outcome == Outcome::Up));
    assert_eq!(r.outcome, Outcome::Up);
}
