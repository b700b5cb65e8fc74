//! Hamiltonian vector fields, Poisson brackets and the induced ℝⁿ-action.
//!
//! Conventions: the chart pairs coordinates as `(q₀, p₀, q₁, p₁, …)` with
//! `ω = Σ dqᵢ ∧ dpᵢ`, and `X^f` is defined by `ω(X^f, ·) = −df`, which gives
//! `X^f = Σ (−∂f/∂pᵢ) ∂/∂qᵢ + (∂f/∂qᵢ) ∂/∂pᵢ`. With this convention `h = z` on
//! the sphere rotates clockwise: `θ̇ = −1`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_points, ChartPoint, CoordRange, DarbouxChart, SingularSetSpec};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type FlowFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// One component `h_k` of a momentum map.
#[derive(Clone)]
pub struct HamiltonianComponent {
    value: ScalarFn,
    gradient: GradientFn,
    analytic_flow: Option<FlowFn>,
}

impl HamiltonianComponent {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        HamiltonianComponent {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            analytic_flow: None,
        }
    }

    /// Attach a closed-form time-`t` map. Outputs need not be angle-reduced.
    pub fn with_analytic_flow(
        mut self,
        flow: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.analytic_flow = Some(Arc::new(flow));
        self
    }

    pub fn without_analytic_flow(mut self) -> Self {
        self.analytic_flow = None;
        self
    }

    pub fn value(&self, coords: &[f64]) -> f64 {
        (self.value)(coords)
    }

    pub fn gradient(&self, coords: &[f64]) -> Vec<f64> {
        (self.gradient)(coords)
    }

    pub fn has_analytic_flow(&self) -> bool {
        self.analytic_flow.is_some()
    }
}

impl fmt::Debug for HamiltonianComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianComponent")
            .field("analytic_flow", &self.analytic_flow.is_some())
            .finish()
    }
}

/// A compact integrable system `(M, ω, h)` on a Darboux chart.
#[derive(Debug, Clone)]
pub struct SystemDef {
    pub name: String,
    pub chart: DarbouxChart,
    pub components: Vec<HamiltonianComponent>,
    pub singular: SingularSetSpec,
}

impl SystemDef {
    pub fn new(
        name: impl Into<String>,
        chart: DarbouxChart,
        components: Vec<HamiltonianComponent>,
    ) -> Result<Self> {
        if components.len() != chart.half_dimension() {
            return Err(Error::InvalidInput(format!(
                "{} momentum-map components on a chart of half dimension {}",
                components.len(),
                chart.half_dimension()
            )));
        }
        let singular = chart.singular_set();
        Ok(SystemDef {
            name: name.into(),
            chart,
            components,
            singular,
        })
    }

    pub fn half_dimension(&self) -> usize {
        self.components.len()
    }

    /// Copy of the system with every analytic flow removed, so all flows go
    /// through the integrator.
    pub fn numeric(&self) -> SystemDef {
        SystemDef {
            components: self
                .components
                .iter()
                .cloned()
                .map(HamiltonianComponent::without_analytic_flow)
                .collect(),
            ..self.clone()
        }
    }

    fn component(&self, k: usize) -> Result<&HamiltonianComponent> {
        self.components.get(k).ok_or_else(|| {
            Error::InvalidInput(format!(
                "component index {k} out of range for n = {}",
                self.half_dimension()
            ))
        })
    }

    fn check_regular(&self, coords: &[f64]) -> Result<()> {
        if self.singular.contains(coords) {
            Err(Error::SingularPoint(coords.to_vec()))
        } else {
            Ok(())
        }
    }
}

/// Flow times `t = (t₁, …, tₙ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeVector(pub Vec<f64>);

impl TimeVector {
    pub fn new(entries: Vec<f64>) -> Self {
        TimeVector(entries)
    }

    pub fn zeros(n: usize) -> Self {
        TimeVector(vec![0.0; n])
    }

    pub fn splat(n: usize, t: f64) -> Self {
        TimeVector(vec![t; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for TimeVector {
    fn from(v: Vec<f64>) -> Self {
        TimeVector(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step_size: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step_size: 1e-3,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= 0.1) {
            return Err(Error::InvalidInput(format!(
                "step_size must lie in (0, 0.1], got {}",
                self.step_size
            )));
        }
        if !(self.newton_tol > 0.0 && self.newton_tol < self.step_size * self.step_size) {
            return Err(Error::InvalidInput(format!(
                "newton_tol must lie in (0, step_size²), got {}",
                self.newton_tol
            )));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidInput(
                "newton_max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `X^{h_k}` from a gradient vector.
fn field_from_gradient(grad: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; grad.len()];
    for i in (0..grad.len()).step_by(2) {
        x[i] = -grad[i + 1];
        x[i + 1] = grad[i];
    }
    x
}

/// `ω(a, b)` for the standard form `Σ dqᵢ ∧ dpᵢ`.
pub fn symplectic_pairing(a: &[f64], b: &[f64]) -> f64 {
    (0..a.len())
        .step_by(2)
        .map(|i| a[i] * b[i + 1] - a[i + 1] * b[i])
        .sum()
}

fn vector_field_unchecked(sys: &SystemDef, k: usize, coords: &[f64]) -> Vec<f64> {
    field_from_gradient(&sys.components[k].gradient(coords))
}

/// The Hamiltonian vector field of component `k` at `p`.
pub fn hamiltonian_vector_field(sys: &SystemDef, k: usize, p: &ChartPoint) -> Result<Vec<f64>> {
    let h = sys.component(k)?;
    sys.check_regular(p.coords())?;
    Ok(field_from_gradient(&h.gradient(p.coords())))
}

/// `{h_i, h_j}(p) = ω(X^{h_i}, X^{h_j})`.
pub fn poisson_bracket(sys: &SystemDef, i: usize, j: usize, p: &ChartPoint) -> Result<f64> {
    let xi = hamiltonian_vector_field(sys, i, p)?;
    let xj = hamiltonian_vector_field(sys, j, p)?;
    Ok(symplectic_pairing(&xi, &xj))
}

/// One implicit-midpoint step `y = x + dt·X((x + y)/2)`, solved by Newton's
/// method with a finite-difference Jacobian of the field.
fn implicit_midpoint_step(
    sys: &SystemDef,
    k: usize,
    x: &[f64],
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let dim = x.len();
    let field = |z: &[f64]| vector_field_unchecked(sys, k, z);
    let midpoint =
        |y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect() };

    // explicit Euler predictor
    let fx = field(x);
    let mut y: Vec<f64> = x.iter().zip(&fx).map(|(a, f)| a + dt * f).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.newton_max_iter {
        let mid = midpoint(&y);
        let fm = field(&mid);
        let g: Vec<f64> = (0..dim).map(|i| y[i] - x[i] - dt * fm[i]).collect();

        // J = I − (dt/2)·DX(mid)
        let mut jac = DMatrix::<f64>::identity(dim, dim);
        let h = 1e-7;
        for c in 0..dim {
            let mut plus = mid.clone();
            let mut minus = mid.clone();
            plus[c] += h;
            minus[c] -= h;
            let (fp, fmn) = (field(&plus), field(&minus));
            for r in 0..dim {
                jac[(r, c)] -= 0.5 * dt * (fp[r] - fmn[r]) / (2.0 * h);
            }
        }
        let delta = jac
            .lu()
            .solve(&DVector::from_vec(g))
            .ok_or(Error::NewtonDivergence {
                iterations: cfg.newton_max_iter,
                residual,
            })?;
        residual = delta.amax();
        for i in 0..dim {
            y[i] -= delta[i];
        }
        if !residual.is_finite() {
            break;
        }
        if residual < cfg.newton_tol {
            return Ok(y);
        }
    }
    Err(Error::NewtonDivergence {
        iterations: cfg.newton_max_iter,
        residual,
    })
}

fn integrate(
    sys: &SystemDef,
    k: usize,
    t: f64,
    start: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let h = cfg.step_size;
    let steps = (t.abs() / h).ceil() as usize;
    let mut x = start.to_vec();
    let mut elapsed = 0.0;
    for s in 0..steps {
        let dt = if s + 1 == steps { t.abs() - elapsed } else { h };
        elapsed += dt;
        x = implicit_midpoint_step(sys, k, &x, dt.copysign(t), cfg)?;
        sys.chart.normalize(&mut x);
    }
    Ok(x)
}

fn flow_component_coords(
    sys: &SystemDef,
    k: usize,
    t: f64,
    coords: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    if t == 0.0 {
        return Ok(coords.to_vec());
    }
    let mut out = match &sys.components[k].analytic_flow {
        Some(flow) => flow(t, coords),
        None => integrate(sys, k, t, coords, cfg)?,
    };
    sys.chart.normalize(&mut out);
    Ok(out)
}

/// Time-`t` map of component `k`.
pub fn flow_component(
    sys: &SystemDef,
    k: usize,
    t: f64,
    p: &ChartPoint,
    cfg: &IntegratorConfig,
) -> Result<ChartPoint> {
    sys.component(k)?;
    sys.check_regular(p.coords())?;
    flow_component_coords(sys, k, t, p.coords(), cfg).map(ChartPoint::from_raw)
}

/// `φ_t^h` composed in the given component order.
pub fn flow_in_order(
    sys: &SystemDef,
    t: &TimeVector,
    p: &ChartPoint,
    order: &[usize],
    cfg: &IntegratorConfig,
) -> Result<ChartPoint> {
    if t.len() != sys.half_dimension() {
        return Err(Error::InvalidInput(format!(
            "time vector has {} entries, system has n = {}",
            t.len(),
            sys.half_dimension()
        )));
    }
    sys.check_regular(p.coords())?;
    let mut coords = p.coords().to_vec();
    for &k in order {
        sys.component(k)?;
        coords = flow_component_coords(sys, k, t.0[k], &coords, cfg)?;
    }
    Ok(ChartPoint::from_raw(coords))
}

/// `φ_t^h = φ_{t₁}^{h₁} ∘ ⋯ ∘ φ_{tₙ}^{hₙ}`, applied in index order.
pub fn flow(
    sys: &SystemDef,
    t: &TimeVector,
    p: &ChartPoint,
    cfg: &IntegratorConfig,
) -> Result<ChartPoint> {
    let order: Vec<usize> = (0..sys.half_dimension()).collect();
    flow_in_order(sys, t, p, &order, cfg)
}

/// Largest ambient distance between the index-ordered flow and a randomly
/// permuted one, over `trials` random `(p, t, α)` with `t ∈ [−π, π]ⁿ`.
pub fn check_flow_commutativity(
    sys: &SystemDef,
    trials: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let n = sys.half_dimension();
    if n < 2 {
        return Err(Error::InvalidInput(
            "flow commutativity needs n >= 2".into(),
        ));
    }
    let points = sample_points(&sys.chart, trials, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x636f_6d6d_7574_6521);
    let mut worst = 0.0f64;
    for p in &points {
        let t = TimeVector(
            (0..n)
                .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect(),
        );
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let a = sys.chart.embed(&flow(sys, &t, p, cfg)?)?;
        let b = sys.chart.embed(&flow_in_order(sys, &t, p, &order, cfg)?)?;
        worst = worst.max(euclidean(&a, &b));
    }
    Ok(worst)
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

const FD_STEP: f64 = 1e-4;

/// Worst `|det Dφ_t − 1|` over `trials` random points, with the Jacobian in
/// chart coordinates from fourth-order central differences of step 1e-4.
pub fn check_volume_preservation(
    sys: &SystemDef,
    t: &TimeVector,
    trials: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let dim = sys.chart.dimension();
    let ranges = sys.chart.coord_ranges();
    let mut worst = 0.0f64;
    let mut index = 0u64;
    let mut done = 0;
    while done < trials {
        let p = sys.chart.sample_point(seed, index);
        index += 1;
        // keep the difference stencil inside open intervals
        let interior = ranges.iter().zip(p.coords()).all(|(r, &x)| match *r {
            CoordRange::Angle => true,
            CoordRange::Open { lo, hi } => x - 3.0 * FD_STEP > lo && x + 3.0 * FD_STEP < hi,
        });
        if !interior {
            continue;
        }
        done += 1;
        let image = flow(sys, t, &p, cfg)?;
        let shifted = |c: usize, k: f64| -> Result<Vec<f64>> {
            let mut x = p.coords().to_vec();
            x[c] += k * FD_STEP;
            sys.chart.normalize(&mut x);
            let y = flow(sys, t, &ChartPoint::from_raw(x), cfg)?;
            // offsets from the unperturbed image, so angles never wrap mid-stencil
            Ok(sys.chart.coord_difference(y.coords(), image.coords()))
        };
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for c in 0..dim {
            let (p1, m1) = (shifted(c, 1.0)?, shifted(c, -1.0)?);
            let (p2, m2) = (shifted(c, 2.0)?, shifted(c, -2.0)?);
            for r in 0..dim {
                jac[(r, c)] = (8.0 * (p1[r] - m1[r]) - (p2[r] - m2[r])) / (12.0 * FD_STEP);
            }
        }
        worst = worst.max((jac.determinant() - 1.0).abs());
    }
    Ok(worst)
}

/// Largest `|{h_i, h_j}|` over `samples` random points and all pairs `i < j`.
pub fn max_poisson_defect(sys: &SystemDef, samples: usize, seed: u64) -> Result<f64> {
    let n = sys.half_dimension();
    let mut worst = 0.0f64;
    for p in sample_points(&sys.chart, samples, seed) {
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max(poisson_bracket(sys, i, j, &p)?.abs());
            }
        }
    }
    Ok(worst)
}

/// Fraction of `samples` random points where the `n` Hamiltonian vector
/// fields span an `n`-dimensional space.
pub fn regular_fraction(sys: &SystemDef, samples: usize, seed: u64) -> Result<f64> {
    let n = sys.half_dimension();
    let dim = sys.chart.dimension();
    let mut regular = 0usize;
    for p in sample_points(&sys.chart, samples, seed) {
        let mut m = DMatrix::<f64>::zeros(dim, n);
        for k in 0..n {
            let x = hamiltonian_vector_field(sys, k, &p)?;
            for r in 0..dim {
                m[(r, k)] = x[r];
            }
        }
        let sv = m.singular_values();
        let top = sv.max();
        if top > 0.0 && sv.iter().all(|s| *s > 1e-9 * top) {
            regular += 1;
        }
    }
    Ok(regular as f64 / samples as f64)
}
