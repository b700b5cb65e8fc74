//! Helpers shared by the integration tests. The oracles here are computed
//! by routes that do not go through the library's own quadrature code.
#![allow(dead_code)]

use std::f64::consts::PI;

use toricost_core::{
    build, DarbouxChart, HamiltonianComponent, IntegratorConfig, SystemDef, SystemParams,
};

pub fn sys(id: &str) -> SystemDef {
    build(id, &SystemParams::default()).unwrap()
}

pub fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

/// h₁ = cos θ₁ + ½ cos θ₂, h₂ = cos θ₃ + ½ cos θ₄ + h₁ on T² × T².
/// Both fields are bounded and smooth, and neither flow is linear.
pub fn t2xt2() -> SystemDef {
    let chart = DarbouxChart::from_id("t2xt2").unwrap();
    let h1 = |x: &[f64]| x[0].cos() + 0.5 * x[1].cos();
    let g1 = |x: &[f64]| vec![-x[0].sin(), -0.5 * x[1].sin(), 0.0, 0.0];
    let h2 = move |x: &[f64]| x[2].cos() + 0.5 * x[3].cos() + h1(x);
    let g2 = move |x: &[f64]| {
        let mut g = g1(x);
        g[2] = -x[2].sin();
        g[3] = -0.5 * x[3].sin();
        g
    };
    SystemDef::new(
        "t2xt2-test",
        chart,
        vec![
            HamiltonianComponent::new(h1, g1),
            HamiltonianComponent::new(h2, g2),
        ],
    )
    .unwrap()
}

/// J₀ by its power series Σ (−1)ᵏ (x/2)²ᵏ / (k!)².
pub fn j0_series(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// Composite midpoint rule on [a, b].
pub fn midpoint(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Perturbed spin, θ̇ = −(1 + 2εz): the chordal distance² at height z after
/// time t is |1 − e^{iωt}|²(1 − z²) with ω = 1 + 2εz.
pub fn perturbed_oracle(eps: f64, t: f64) -> f64 {
    let integrand = |z: f64| {
        let w = (1.0 + 2.0 * eps * z) * t;
        let (s, c) = w.sin_cos();
        ((1.0 - c).powi(2) + s * s) * (1.0 - z * z)
    };
    2.0 * PI * midpoint(integrand, -1.0, 1.0, 200_000)
}

/// Area of S² times the mean of |x − R_t x|² for uniform x, from the
/// angle-doubling identity |1 − e^{it}|² = 4 sin²(t/2).
pub fn sphere_rotation_oracle(t: f64) -> f64 {
    // ∫ (1 − z²) dz over [−1, 1] = 4/3, times 2π for θ
    2.0 * PI * (4.0 / 3.0) * 4.0 * (t / 2.0).sin().powi(2)
}

/// splitmix64, kept separate from the library's ChaCha streams.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Plain Monte Carlo of C_t for the sphere rotation: uniform points in
/// ambient coordinates rotated about the z-axis, squared distance averaged.
pub fn sphere_rotation_brute_force(t: f64, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = SplitMix(seed);
    let (s, c) = t.sin_cos();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let z = 2.0 * rng.uniform() - 1.0;
        let phi = 2.0 * PI * rng.uniform();
        let r = (1.0 - z * z).sqrt();
        let (x, y) = (r * phi.cos(), r * phi.sin());
        let (xr, yr) = (c * x - s * y, s * x + c * y);
        let d = (x - xr).powi(2) + (y - yr).powi(2);
        sum += d;
        sum_sq += d * d;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean) * n as f64 / (n as f64 - 1.0);
    let area = 4.0 * PI;
    (area * mean, area * (var / n as f64).sqrt())
}

/// Random uniform measure on the unit square with squared Euclidean costs.
pub fn unit_square_points(m: usize, rng: &mut SplitMix) -> Vec<Vec<f64>> {
    (0..m).map(|_| vec![rng.uniform(), rng.uniform()]).collect()
}
