//! Noise statistics and Ramsey decay against closed forms.

use rotorqc::decoherence::{
    compare_coherence, default_times, gaussian_coherence, predicted_t2, ramsey_decay, DecayModel,
    DephasingQubit, NoiseProcess,
};

#[test]
fn ou_variance_and_correlation_time() {
    let tau = 2e-3;
    let sigma = 3e-6;
    let dt = tau / 10.0;
    let n = 20_000;
    let lags = 10;
    let mut var = 0.0;
    let mut corr = vec![0.0; lags + 1];
    let mut count = 0.0;
    let runs = 20;
    for stream in 0..runs {
        let p = NoiseProcess::new(sigma, tau, 77).unwrap();
        let b = p.trajectory(stream, dt, n).unwrap();
        var += b.iter().map(|x| x * x).sum::<f64>();
        count += b.len() as f64;
        for (lag, c) in corr.iter_mut().enumerate() {
            *c += b.iter().zip(&b[lag..]).map(|(x, y)| x * y).sum::<f64>() / (b.len() - lag) as f64;
        }
    }
    var /= count;
    assert!((var / (sigma * sigma) - 1.0).abs() < 0.05, "{}", var / (sigma * sigma));
    // −ln ρ(lag) = lag·dt/τ
    let x: Vec<f64> = (1..=lags).map(|k| k as f64 * dt).collect();
    let y: Vec<f64> = (1..=lags).map(|k| -(corr[k] / corr[0]).ln()).collect();
    let slope = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|a| a * a).sum::<f64>();
    let fitted = 1.0 / slope;
    assert!((fitted / tau - 1.0).abs() < 0.1, "{fitted}");
}

#[test]
fn gaussian_regime_matches_closed_form() {
    let q = DephasingQubit::electron();
    let s = q.sensitivity();
    let sigma = 1e-6;
    let t2 = 2f64.sqrt() / (s * sigma);
    // τ_c/t ≥ 100 over the whole window
    let p = NoiseProcess::new(sigma, 300.0 * t2, 3).unwrap();
    let times: Vec<f64> = (1..=15).map(|k| k as f64 * 0.1 * t2).collect();
    let curve = ramsey_decay(&q, &p, &times, 20_000).unwrap();
    for ((t, c), se) in times.iter().zip(&curve.coherence).zip(&curve.std_error) {
        let expected = gaussian_coherence(s, sigma, *t);
        assert!((c - expected).abs() <= 3.0 * se, "t = {t}: {c} vs {expected} ± {se}");
    }
    let fit = curve.fit.unwrap();
    assert_eq!(fit.model, DecayModel::Gaussian);
    assert!((fit.t2 / t2 - 1.0).abs() < 0.03);
}

#[test]
fn motional_narrowing_is_exponential() {
    let q = DephasingQubit::electron();
    let s = q.sensitivity();
    let sigma = 1e-6;
    let tau = 0.01 / (s * sigma);
    let p = NoiseProcess::new(sigma, tau, 4).unwrap();
    let expected = 1.0 / (s * s * sigma * sigma * tau);
    let times = default_times(&q, &p, 30).unwrap();
    let curve = ramsey_decay(&q, &p, &times, 10_000).unwrap();
    let fit = curve.fit.unwrap();
    assert_eq!(fit.model, DecayModel::Exponential);
    assert!((fit.t2 / expected - 1.0).abs() < 0.05, "{} vs {expected}", fit.t2);
    assert!((predicted_t2(s, &p).unwrap() / expected - 1.0).abs() < 0.02);
}

#[test]
fn t2_ratio_is_invariant_under_noise_scaling() {
    let a = DephasingQubit::stretched_pair(-0.014);
    let b = DephasingQubit::electron();
    let p = NoiseProcess::new(1e-6, 1e6, 8).unwrap();
    let r1 = compare_coherence(&a, &b, &p, 4_000, 30).unwrap();
    let r2 = compare_coherence(&a, &b, &p.with_sigma(2e-6), 4_000, 30).unwrap();
    assert!((r1.ratio / r2.ratio - 1.0).abs() < 0.05);
    assert!((r2.t2_b / r1.t2_b - 0.5).abs() < 0.03);
    let same = compare_coherence(&b, &b, &p, 2_000, 30).unwrap();
    assert_eq!(same.ratio, 1.0);
    // quasi-static dephasing: T2 ∝ 1/sensitivity
    assert!((r1.ratio / r1.sensitivity_ratio - 1.0).abs() < 0.1);
    assert!((r1.predicted_ratio / r1.sensitivity_ratio - 1.0).abs() < 1e-6);
    assert!(r1.ratio_ci.0 <= r1.ratio && r1.ratio <= r1.ratio_ci.1);
}

#[test]
fn m_zero_qubit_outlives_electron_by_far() {
    let e = DephasingQubit::electron();
    let p = NoiseProcess::new(1e-6, 1e3, 2).unwrap();
    let t2e = predicted_t2(e.sensitivity(), &p).unwrap();
    let times: Vec<f64> = (1..=10).map(|k| k as f64 * 100.0 * t2e).collect();
    let m0 = ramsey_decay(&DephasingQubit::computational(-0.014), &p, &times, 200).unwrap();
    assert!(m0.coherence.iter().all(|c| *c > 0.999));
    let el = ramsey_decay(&e, &p, &times, 200).unwrap();
    assert!(el.coherence.iter().all(|c| *c < 0.2));
}

#[test]
fn curves_are_bit_identical_across_worker_counts() {
    let q = DephasingQubit::electron();
    let p = NoiseProcess::new(1e-6, 1e-3, 21).unwrap();
    let times = default_times(&q, &p, 12).unwrap();
    let a = ramsey_decay(&q, &p, &times, 500).unwrap();
    let b = ramsey_decay(&q, &p, &times, 500).unwrap();
    assert_eq!(a, b);
    #[cfg(feature = "parallel")]
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let c = pool.install(|| ramsey_decay(&q, &p, &times, 500).unwrap());
        assert_eq!(a, c);
    }
}
