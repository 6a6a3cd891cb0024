//! Integer-order Bessel functions `J0, J1, K0, K1` for real arguments.
//!
//! Small arguments use the ascending power series. Larger arguments use the
//! integral representations
//!
//! ```text
//! J_n(x) = (1/2π) ∫_0^{2π} cos(nτ − x sin τ) dτ
//! K_n(x) = ∫_0^∞ exp(−x cosh t) cosh(nt) dt
//! ```
//!
//! evaluated with the trapezoidal rule, which converges geometrically for
//! these periodic / doubly-decaying analytic integrands.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const J_SERIES_MAX: f64 = 8.0;
const K_SERIES_MAX: f64 = 2.0;

pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= J_SERIES_MAX {
        j_series(x, 0)
    } else {
        j_trapezoid(x, 0)
    }
}

pub fn j1(x: f64) -> f64 {
    let sign = x.signum();
    let x = x.abs();
    sign * if x <= J_SERIES_MAX { j_series(x, 1) } else { j_trapezoid(x, 1) }
}

fn j_series(x: f64, order: u32) -> f64 {
    let t = 0.25 * x * x;
    // term_k = (−t)^k / (k! (k+order)!)
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..200 {
        term *= -t / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn j_trapezoid(x: f64, order: u32) -> f64 {
    // Aliasing error ~ J_{N−n}(x), negligible once N ≫ e·x/2.
    let n = (2.0 * x).ceil() as usize + 48;
    let order = order as f64;
    let sum: f64 = (0..n)
        .map(|j| {
            let tau = 2.0 * PI * j as f64 / n as f64;
            (order * tau - x * tau.sin()).cos()
        })
        .sum();
    sum / n as f64
}

pub fn k0(x: f64) -> f64 {
    assert!(x > 0.0, "K0 requires a positive argument, got {x}");
    if x <= K_SERIES_MAX {
        k0_series(x)
    } else {
        k_trapezoid(x, 0)
    }
}

pub fn k1(x: f64) -> f64 {
    assert!(x > 0.0, "K1 requires a positive argument, got {x}");
    if x <= K_SERIES_MAX {
        k1_series(x)
    } else {
        k_trapezoid(x, 1)
    }
}

fn k0_series(x: f64) -> f64 {
    let t = 0.25 * x * x;
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut term = 1.0; // t^k / (k!)^2
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    for k in 1..100 {
        let kf = k as f64;
        term *= t / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += term * harmonic;
        if term < 1e-18 * i0 {
            break;
        }
    }
    -log_term * i0 + tail
}

fn k1_series(x: f64) -> f64 {
    let t = 0.25 * x * x;
    // term_k = t^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut psi_k1 = -EULER_GAMMA; // ψ(k+1)
    let mut psi_k2 = 1.0 - EULER_GAMMA; // ψ(k+2)
    let mut i1_sum = 1.0;
    let mut psi_sum = psi_k1 + psi_k2;
    for k in 1..100 {
        let kf = k as f64;
        term *= t / (kf * (kf + 1.0));
        psi_k1 += 1.0 / kf;
        psi_k2 += 1.0 / (kf + 1.0);
        i1_sum += term;
        psi_sum += term * (psi_k1 + psi_k2);
        if term < 1e-18 * i1_sum {
            break;
        }
    }
    let i1 = 0.5 * x * i1_sum;
    1.0 / x + (0.5 * x).ln() * i1 - 0.25 * x * psi_sum
}

fn k_trapezoid(x: f64, order: u32) -> f64 {
    // Integrand scaled by e^{x}; cut off where x (cosh t − 1) exceeds 50.
    let h = 0.05;
    let t_max = (1.0 + 50.0 / x).acosh();
    let steps = (t_max / h).ceil() as usize;
    let order = order as f64;
    let mut sum = 0.5;
    for j in 1..=steps {
        let t = j as f64 * h;
        sum += (-x * (t.cosh() - 1.0)).exp() * (order * t).cosh();
    }
    h * sum * (-x).exp()
}
