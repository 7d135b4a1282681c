//! Dephasing from magnetic-field noise.
//!
//! The field is an Ornstein-Uhlenbeck process with RMS amplitude `σ_B` and
//! correlation time `τ_c`. A qubit whose splitting moves by `S·B` (rad/s)
//! accumulates the phase `S·∫B dt`; the field and its integral are advanced
//! together with their exact joint Gaussian transition, so there is no
//! discretization error at any step size.
//!
//! Only the linear Zeeman effect is modeled. `M = 0` rotational qubits are
//! therefore perfectly immune here, which is a property of the model and not
//! an infinite physical coherence time.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::RotBasisState;
use crate::fit::slope_through_origin;
use crate::rng::{map_trials, trial_rng};
use crate::units::{BOHR_MAGNETON, ELECTRON_G, HBAR, NUCLEAR_MAGNETON};
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecoherenceError {
    #[error("σ_B must be ≥ 0, got {0}")]
    NegativeSigma(f64),
    #[error("τ_c must be > 0, got {0}")]
    NonPositiveTau(f64),
    #[error("time step must be > 0, got {0}")]
    NonPositiveStep(f64),
    #[error("evolution times must be finite, non-negative and increasing")]
    BadTimes,
    #[error("need at least one trial")]
    NoTrials,
    #[error("qubit has zero field sensitivity; T2 is unbounded in this model")]
    Insensitive,
    #[error("decay fit failed: {0}")]
    Fit(String),
}

/// Ornstein-Uhlenbeck magnetic-field noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseProcess {
    /// RMS field (T).
    pub sigma_b: f64,
    /// Correlation time (s).
    pub tau_c: f64,
    pub seed: u64,
}

impl NoiseProcess {
    pub fn new(sigma_b: f64, tau_c: f64, seed: u64) -> Result<Self, DecoherenceError> {
        let p = Self { sigma_b, tau_c, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DecoherenceError> {
        if !(self.sigma_b >= 0.0) || !self.sigma_b.is_finite() {
            return Err(DecoherenceError::NegativeSigma(self.sigma_b));
        }
        if !(self.tau_c > 0.0) {
            return Err(DecoherenceError::NonPositiveTau(self.tau_c));
        }
        Ok(())
    }

    pub fn with_sigma(mut self, sigma_b: f64) -> Self {
        self.sigma_b = sigma_b;
        self
    }

    /// Stationary field trajectory `B(k·dt)`, `k = 0..=n_steps`, from stream
    /// `stream`.
    pub fn trajectory(&self, stream: u64, dt: f64, n_steps: usize) -> Result<Vec<f64>, DecoherenceError> {
        self.validate()?;
        if !(dt > 0.0) {
            return Err(DecoherenceError::NonPositiveStep(dt));
        }
        let mut rng = trial_rng(self.seed, stream);
        let a = (-dt / self.tau_c).exp();
        let kick = self.sigma_b * (-(-2.0 * dt / self.tau_c).exp_m1()).sqrt();
        let mut b = self.sigma_b * rng.sample::<f64, _>(StandardNormal);
        let mut out = Vec::with_capacity(n_steps + 1);
        out.push(b);
        for _ in 0..n_steps {
            b = a * b + kick * rng.sample::<f64, _>(StandardNormal);
            out.push(b);
        }
        Ok(out)
    }
}

/// [`NoiseProcess::trajectory`] on stream 0.
pub fn sample_noise_trajectory(process: &NoiseProcess, dt: f64, n_steps: usize) -> Result<Vec<f64>, DecoherenceError> {
    process.trajectory(0, dt, n_steps)
}

/// Exact transition of `(B, ∫B)` over a step of `x = dt/τ`, in units of `σ`
/// and `σ·τ`: returns `(a, var_b, mean_coef, var_i, cov)`.
fn joint_step(x: f64) -> (f64, f64, f64, f64, f64) {
    let em = (-x).exp_m1(); // a − 1
    let a = 1.0 + em;
    let var_b = -(-2.0 * x).exp_m1();
    let mean_coef = -em;
    // 2x − 3 + 4a − a², which cancels badly for small x
    let var_i = if x < 1e-2 {
        let x2 = x * x;
        x2 * x * (2.0 / 3.0 - x / 2.0 + 7.0 * x2 / 30.0 - x2 * x / 12.0 + 31.0 * x2 * x2 / 1260.0)
    } else {
        2.0 * x - 3.0 + 4.0 * a - a * a
    };
    let cov = em * em;
    (a, var_b, mean_coef, var_i, cov)
}

/// Linear Zeeman shift of a rotor level, `−g_r·μ_N·M·B/ħ` (rad/s).
pub fn zeeman_shift(state: RotBasisState, b: f64, g_r: f64) -> f64 {
    -g_r * NUCLEAR_MAGNETON * state.m as f64 * b / HBAR
}

/// Signed magnetic moment of the `J` manifold, `g_r·√(J(J+1))`, in units of μ_N.
pub fn manifold_moment(j: u32, g_r: f64) -> f64 {
    let j = j as f64;
    g_r * (j * (j + 1.0)).sqrt()
}

/// Zeeman coupling of a two-level qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DephasingQubit {
    /// Two rotor levels shifted by `−g_r·μ_N·M·B`.
    Rotational { lower: RotBasisState, upper: RotBasisState, g_r: f64 },
    /// Spin-1/2 with levels at `±½·g_e·μ_B·B`.
    ElectronSpin { g_e: f64 },
}

impl DephasingQubit {
    pub fn electron() -> Self {
        DephasingQubit::ElectronSpin { g_e: ELECTRON_G }
    }

    /// `{|2,−2⟩, |2,2⟩}` pair.
    pub fn stretched_pair(g_r: f64) -> Self {
        DephasingQubit::Rotational {
            lower: RotBasisState { j: 2, m: -2 },
            upper: RotBasisState { j: 2, m: 2 },
            g_r,
        }
    }

    /// The `M = 0` computational qubit.
    pub fn computational(g_r: f64) -> Self {
        DephasingQubit::Rotational { lower: RotBasisState::DOWN, upper: RotBasisState::UP, g_r }
    }

    /// `∂(splitting)/∂B` in rad/s/T.
    pub fn sensitivity(&self) -> f64 {
        match *self {
            DephasingQubit::Rotational { lower, upper, g_r } => {
                zeeman_shift(upper, 1.0, g_r) - zeeman_shift(lower, 1.0, g_r)
            }
            DephasingQubit::ElectronSpin { g_e } => g_e * BOHR_MAGNETON / HBAR,
        }
    }

    pub fn label(&self) -> String {
        match self {
            DephasingQubit::Rotational { lower, upper, .. } => format!("rotational {lower}-{upper}"),
            DephasingQubit::ElectronSpin { .. } => "electron spin".into(),
        }
    }
}

/// Closed-form OU coherence `exp(−S²σ²τ²(t/τ − 1 + e^{−t/τ}))`.
pub fn ou_coherence(sensitivity: f64, sigma_b: f64, tau_c: f64, t: f64) -> f64 {
    let x = t / tau_c;
    let g = if x < 1e-4 { x * x / 2.0 - x * x * x / 6.0 } else { x - 1.0 + (-x).exp() };
    (-(sensitivity * sigma_b * tau_c).powi(2) * g).exp()
}

/// Quasi-static limit `exp(−(S·σ·t)²/2)`.
pub fn gaussian_coherence(sensitivity: f64, sigma_b: f64, t: f64) -> f64 {
    (-(sensitivity * sigma_b * t).powi(2) / 2.0).exp()
}

/// Time at which [`ou_coherence`] falls to `1/e`.
pub fn predicted_t2(sensitivity: f64, process: &NoiseProcess) -> Option<f64> {
    let s = sensitivity.abs();
    if s == 0.0 || process.sigma_b == 0.0 {
        return None;
    }
    let target = (-1f64).exp();
    let f = |t: f64| ou_coherence(s, process.sigma_b, process.tau_c, t) - target;
    let mut hi = (2f64.sqrt() / (s * process.sigma_b)).max(1.0 / (s * s * process.sigma_b.powi(2) * process.tau_c));
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayModel {
    /// `exp(−(t/T2)²)`.
    Gaussian,
    /// `exp(−t/T2)`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T2Fit {
    pub model: DecayModel,
    pub t2: f64,
    /// Fitted exponent `p` of `−ln C ∝ t^p`.
    pub exponent: f64,
    pub points_used: usize,
}

/// Fit a decay model to a coherence curve, using points with
/// `0.05 ≤ C ≤ 0.95`. The model follows the fitted log-log exponent.
pub fn fit_t2(times: &[f64], coherence: &[f64]) -> Result<T2Fit, DecoherenceError> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(coherence)
        .filter(|(&t, &c)| t > 0.0 && (0.05..=0.95).contains(&c))
        .map(|(&t, &c)| (t, -c.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(DecoherenceError::Fit(format!("only {} usable points", pts.len())));
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(DecoherenceError::Fit("degenerate time points".into()));
    }
    let exponent = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let model = if exponent >= 1.5 { DecayModel::Gaussian } else { DecayModel::Exponential };
    let (x, y): (Vec<f64>, Vec<f64>) = match model {
        DecayModel::Gaussian => pts.iter().map(|&(t, y)| (t * t, y)).unzip(),
        DecayModel::Exponential => pts.iter().copied().unzip(),
    };
    let k = slope_through_origin(&x, &y).filter(|k| *k > 0.0).ok_or_else(|| DecoherenceError::Fit("non-positive decay rate".into()))?;
    let t2 = match model {
        DecayModel::Gaussian => 1.0 / k.sqrt(),
        DecayModel::Exponential => 1.0 / k,
    };
    Ok(T2Fit { model, t2, exponent, points_used: pts.len() })
}

/// Ensemble Ramsey experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyCurve {
    pub qubit: DephasingQubit,
    pub times: Vec<f64>,
    /// `|⟨e^{iφ(t)}⟩|`.
    pub coherence: Vec<f64>,
    /// Standard error of each coherence point.
    pub std_error: Vec<f64>,
    pub trials: u64,
    /// Largest `|φ|` seen in any trajectory at any time.
    pub max_abs_phase: f64,
    /// Fit over all trials; `Err` keeps the raw curve usable.
    pub fit: Result<T2Fit, String>,
    /// Standard error of the fitted T2 from independent batches.
    pub t2_std_error: Option<f64>,
}

const BATCHES: u64 = 10;

/// Phases `φ(t_i)` of one trajectory.
fn trajectory_phases(sensitivity: f64, process: &NoiseProcess, times: &[f64], stream: u64) -> Vec<f64> {
    let mut rng = trial_rng(process.seed, stream);
    let (sigma, tau) = (process.sigma_b, process.tau_c);
    let mut b = sigma * rng.sample::<f64, _>(StandardNormal);
    let mut integral = 0.0;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &ti in times {
        let dt = ti - t;
        if dt > 0.0 {
            let (a, var_b, mean_coef, var_i, cov) = joint_step(dt / tau);
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let sd_b = var_b.sqrt();
            // conditional on the kick in B, in units of σ and σ·τ
            let (coef, rest) = if sd_b > 0.0 { (cov / sd_b, (var_i - cov * cov / var_b).max(0.0).sqrt()) } else { (0.0, var_i.max(0.0).sqrt()) };
            integral += tau * (mean_coef * b + sigma * (coef * z1 + rest * z2));
            b = a * b + sigma * sd_b * z1;
            t = ti;
        }
        out.push(sensitivity * integral);
    }
    out
}

fn coherence_stats(phases: &[Vec<f64>], i: usize) -> (f64, f64) {
    let n = phases.len() as f64;
    let mean: C64 = phases.iter().map(|p| C64::from_polar(1.0, p[i])).sum::<C64>() / n;
    let c = mean.norm();
    let dir = if c > 0.0 { mean / c } else { C64::new(1.0, 0.0) };
    let var = phases
        .iter()
        .map(|p| ((C64::from_polar(1.0, p[i]) * dir.conj()).re - c).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    (c, (var / n).sqrt())
}

/// Ramsey coherence of `qubit` at `times` averaged over `trials` field
/// trajectories. Trial `k` uses stream `k`.
pub fn ramsey_decay(
    qubit: &DephasingQubit,
    process: &NoiseProcess,
    times: &[f64],
    trials: u64,
) -> Result<RamseyCurve, DecoherenceError> {
    process.validate()?;
    if trials == 0 {
        return Err(DecoherenceError::NoTrials);
    }
    if times.is_empty() || times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DecoherenceError::BadTimes);
    }
    let s = qubit.sensitivity();
    let phases = map_trials(trials, |k| trajectory_phases(s, process, times, k));
    let mut coherence = Vec::with_capacity(times.len());
    let mut std_error = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let (c, se) = coherence_stats(&phases, i);
        coherence.push(c);
        std_error.push(se);
    }
    let max_abs_phase = phases.iter().flatten().fold(0.0f64, |m, p| m.max(p.abs()));
    let fit = fit_t2(times, &coherence).map_err(|e| e.to_string());
    let t2_std_error = if trials >= 2 * BATCHES {
        let size = (trials / BATCHES) as usize;
        let batch_t2: Vec<f64> = phases
            .chunks(size)
            .take(BATCHES as usize)
            .filter_map(|chunk| {
                let c: Vec<f64> = (0..times.len()).map(|i| coherence_stats(chunk, i).0).collect();
                fit_t2(times, &c).ok().map(|f| f.t2)
            })
            .collect();
        (batch_t2.len() >= 3).then(|| {
            let m = batch_t2.iter().sum::<f64>() / batch_t2.len() as f64;
            let var = batch_t2.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (batch_t2.len() - 1) as f64;
            (var / batch_t2.len() as f64).sqrt()
        })
    } else {
        None
    };
    Ok(RamseyCurve { qubit: *qubit, times: times.to_vec(), coherence, std_error, trials, max_abs_phase, fit, t2_std_error })
}

/// `n` evenly spaced times spanning `[0.1, 2.5]·T2` of the predicted decay.
pub fn default_times(qubit: &DephasingQubit, process: &NoiseProcess, n: usize) -> Result<Vec<f64>, DecoherenceError> {
    let t2 = predicted_t2(qubit.sensitivity(), process).ok_or(DecoherenceError::Insensitive)?;
    Ok((0..n).map(|k| t2 * (0.1 + 2.4 * k as f64 / (n - 1).max(1) as f64)).collect())
}

/// T2 comparison of two qubits in the same noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceComparison {
    pub curve_a: RamseyCurve,
    pub curve_b: RamseyCurve,
    pub t2_a: f64,
    pub t2_b: f64,
    /// `T2_a / T2_b`.
    pub ratio: f64,
    /// 95% interval from the batch standard errors.
    pub ratio_ci: (f64, f64),
    /// `|S_b / S_a|`.
    pub sensitivity_ratio: f64,
    /// Ratio of the closed-form `1/e` times; equals the sensitivity ratio in
    /// the quasi-static limit and its square under motional narrowing.
    pub predicted_ratio: f64,
}

/// Simulate both qubits over their own predicted decay windows.
pub fn compare_coherence(
    a: &DephasingQubit,
    b: &DephasingQubit,
    process: &NoiseProcess,
    trials: u64,
    points: usize,
) -> Result<CoherenceComparison, DecoherenceError> {
    let ta = default_times(a, process, points)?;
    let tb = default_times(b, process, points)?;
    let curve_a = ramsey_decay(a, process, &ta, trials)?;
    let curve_b = ramsey_decay(b, process, &tb, trials)?;
    let fa = curve_a.fit.clone().map_err(DecoherenceError::Fit)?;
    let fb = curve_b.fit.clone().map_err(DecoherenceError::Fit)?;
    let ratio = fa.t2 / fb.t2;
    let rel = |se: Option<f64>, t2: f64| se.map_or(0.0, |s| s / t2);
    let spread = 1.96 * rel(curve_a.t2_std_error, fa.t2).hypot(rel(curve_b.t2_std_error, fb.t2));
    let pa = predicted_t2(a.sensitivity(), process).ok_or(DecoherenceError::Insensitive)?;
    let pb = predicted_t2(b.sensitivity(), process).ok_or(DecoherenceError::Insensitive)?;
    Ok(CoherenceComparison {
        t2_a: fa.t2,
        t2_b: fb.t2,
        ratio,
        ratio_ci: (ratio * (1.0 - spread), ratio * (1.0 + spread)),
        sensitivity_ratio: (b.sensitivity() / a.sensitivity()).abs(),
        predicted_ratio: pa / pb,
        curve_a,
        curve_b,
    })
}
