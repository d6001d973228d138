//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

/// J_n(u) = (1/π) ∫₀^π cos(nθ − u sin θ) dθ by the trapezoid rule, which
/// converges geometrically for this periodic integrand.
pub fn bessel_integral(n: i32, u: f64) -> f64 {
    let m = 4000;
    let h = PI / m as f64;
    let mut s = 0.0;
    for i in 0..=m {
        let th = i as f64 * h;
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        s += w * (n as f64 * th - u * th.sin()).cos();
    }
    s * h / PI
}

/// Ai by classical RK4 on y'' = x y from the known values at the origin.
pub fn airy_rk4(target: f64) -> f64 {
    let (mut y, mut yp) = (0.355_028_053_887_817_2, -0.258_819_403_792_806_8);
    let steps = (target.abs() / 2e-4).ceil() as usize;
    let h = target / steps as f64;
    let mut x = 0.0;
    let f = |x: f64, y: f64| x * y;
    for _ in 0..steps {
        let k1y = yp;
        let k1p = f(x, y);
        let k2y = yp + 0.5 * h * k1p;
        let k2p = f(x + 0.5 * h, y + 0.5 * h * k1y);
        let k3y = yp + 0.5 * h * k2p;
        let k3p = f(x + 0.5 * h, y + 0.5 * h * k2y);
        let k4y = yp + h * k3p;
        let k4p = f(x + h, y + h * k3y);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        yp += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        x += h;
    }
    y
}

/// e^{−iHt} for the periodic tight-binding ring of n sites by nalgebra's
/// Padé matrix exponential.
pub fn ring_propagator(n: usize, t: f64) -> DMatrix<Complex64> {
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        h[(j, (j + 1) % n)] = Complex64::new(-1.0, 0.0);
        h[((j + 1) % n, j)] = Complex64::new(-1.0, 0.0);
    }
    (h * Complex64::new(0.0, -t)).exp()
}
