//! Least-squares fits used to read frequencies and decay times off traces.

use nalgebra::{Matrix3, Vector3};

/// `y ≈ offset + amplitude·cos(frequency·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub rms_residual: f64,
}

fn linear_fit(t: &[f64], y: &[f64], w: f64) -> Option<(Vector3<f64>, f64)> {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let row = Vector3::new(1.0, (w * ti).cos(), (w * ti).sin());
        ata += row * row.transpose();
        aty += row * yi;
    }
    let coef = ata.lu().solve(&aty)?;
    let sse = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let m = coef[0] + coef[1] * (w * ti).cos() + coef[2] * (w * ti).sin();
            (yi - m).powi(2)
        })
        .sum();
    Some((coef, sse))
}

/// Fit a single sinusoid, scanning angular frequencies in `[w_lo, w_hi]`.
pub fn fit_sinusoid_in(t: &[f64], y: &[f64], w_lo: f64, w_hi: f64) -> Option<SinusoidFit> {
    if t.len() < 4 || t.len() != y.len() || !(w_hi > w_lo) || !(w_lo > 0.0) {
        return None;
    }
    let span = t.last()? - t.first()?;
    let grid_step = (2.0 * std::f64::consts::PI / span / 16.0).min((w_hi - w_lo) / 64.0);
    let n_grid = ((w_hi - w_lo) / grid_step).ceil() as usize + 1;
    let sse = |w: f64| linear_fit(t, y, w).map(|(_, s)| s).unwrap_or(f64::INFINITY);
    let (mut best_w, mut best) = (w_lo, f64::INFINITY);
    for k in 0..n_grid {
        let w = w_lo + k as f64 * grid_step;
        let s = sse(w);
        if s < best {
            best = s;
            best_w = w;
        }
    }
    // golden-section refinement around the grid minimum
    let (mut a, mut b) = ((best_w - grid_step).max(w_lo * 0.5), best_w + grid_step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (sse(c), sse(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 * best_w.abs().max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sse(d);
        }
    }
    let w = (a + b) / 2.0;
    let (coef, s) = linear_fit(t, y, w)?;
    Some(SinusoidFit {
        frequency: w,
        amplitude: coef[1].hypot(coef[2]),
        phase: (-coef[2]).atan2(coef[1]),
        offset: coef[0],
        rms_residual: (s / t.len() as f64).sqrt(),
    })
}

/// Fit with the scan window `[0.5, 1.5]·guess`.
pub fn fit_sinusoid_near(t: &[f64], y: &[f64], guess: f64) -> Option<SinusoidFit> {
    fit_sinusoid_in(t, y, 0.5 * guess, 1.5 * guess)
}

/// Fit with a window spanning one cycle over the record up to Nyquist.
pub fn fit_sinusoid(t: &[f64], y: &[f64]) -> Option<SinusoidFit> {
    let span = t.last()? - t.first()?;
    let dt = span / (t.len() - 1) as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    fit_sinusoid_in(t, y, 0.5 * two_pi / span, std::f64::consts::PI / dt)
}

/// Slope of a least-squares line through the origin.
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> Option<f64> {
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx)
}
