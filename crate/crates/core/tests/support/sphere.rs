//! Spherical harmonics and product quadrature on the unit sphere.

#![allow(dead_code)]

use rotorqc::angular::RotBasisState;
use rotorqc::C64;
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Associated Legendre `P_l^m(x)` for `m ≥ 0`, Condon-Shortley phase included.
pub fn legendre(l: i32, m: i32, x: f64) -> f64 {
    let s = (1.0 - x * x).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= -((2 * k - 1) as f64) * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pm1;
    }
    for ll in (m + 2)..=l {
        let p = (x * (2 * ll - 1) as f64 * pm1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pm1;
        pm1 = p;
    }
    pm1
}

pub fn factorial(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

pub fn ylm(l: i32, m: i32, x: f64, phi: f64) -> C64 {
    let am = m.abs();
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * factorial(l - am) / factorial(l + am)).sqrt();
    let y = C64::from_polar(norm * legendre(l, am, x), am as f64 * phi);
    if m >= 0 {
        y
    } else {
        y.conj() * if am % 2 == 0 { 1.0 } else { -1.0 }
    }
}

/// `∫ Y*_bra f(θ,φ) Y_ket dΩ`.
pub fn quadrature(bra: RotBasisState, ket: RotBasisState, f: impl Fn(f64, f64) -> C64) -> C64 {
    let nodes = gauss_legendre(24);
    let n_phi = 32;
    let mut total = C64::new(0.0, 0.0);
    for &(x, w) in &nodes {
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            let v = ylm(bra.j as i32, bra.m, x, phi).conj() * f(x, phi) * ylm(ket.j as i32, ket.m, x, phi);
            total += v * w * 2.0 * PI / n_phi as f64;
        }
    }
    total
}
