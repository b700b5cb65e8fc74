//! One-dimensional quadrature and the order-zero Bessel function.

use std::f64::consts::{PI, TAU};

/// Composite Simpson rule on `[a, b]` with `intervals` (rounded up to even)
/// subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Trapezoidal rule over one period `[0, 2π)`; spectrally accurate for smooth
/// periodic integrands.
pub fn periodic_trapezoid(f: impl Fn(f64) -> f64, nodes: usize) -> f64 {
    let h = TAU / nodes as f64;
    (0..nodes).map(|i| f(i as f64 * h)).sum::<f64>() * h
}

/// `J₀(x) = (1/2π) ∫₀^{2π} cos(x sin θ) dθ`.
///
/// The trapezoid error decays like `(|x|/2)^N / N!` in the node count `N`,
/// so 64 + 2|x| nodes reach machine precision for moderate arguments.
pub fn bessel_j0(x: f64) -> f64 {
    let nodes = 64 + 2 * x.abs().ceil() as usize;
    periodic_trapezoid(|theta| (x * theta.sin()).cos(), nodes) / (2.0 * PI)
}
