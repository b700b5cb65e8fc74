//! Discrete Monge and Kantorovich problems at desk scale.
//!
//! Monge minimizes over transport maps, Kantorovich over couplings. For
//! uniform marginals on equally many points the coupling polytope is the
//! Birkhoff polytope, whose vertices are permutation matrices, so exhaustive
//! permutation search solves both problems exactly.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::costs::{check_setup, estimate_on_samples, CostFunction};
use crate::dynamics::{flow, IntegratorConfig, SystemDef, TimeVector};
use crate::error::{Error, Result};
use crate::geometry::sample_points;

/// Largest support size for brute force (9! = 362 880 permutations).
pub const MAX_BRUTE_FORCE: usize = 9;

pub const MAX_COUPLING_SAMPLES: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let m = DiscreteMeasure { points, weights };
        m.validate()?;
        Ok(m)
    }

    /// Equal weights `1/len` on each point.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        DiscreteMeasure::new(points, weights)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidInput("measure has no points".into()));
        }
        if self.points.len() != self.weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} weights",
                self.points.len(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(
                "weights must be positive and finite".into(),
            ));
        }
        let d = self.points[0].len();
        if self
            .points
            .iter()
            .any(|p| p.len() != d || p.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidInput(
                "points must share one finite dimension".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|w| (w - w0).abs() <= 1e-12 * w0)
    }
}

/// Row-major `rows × cols` matrix of nonnegative costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "cost matrix of shape {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidInput(
                "cost entries must be finite and nonnegative".into(),
            ));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    /// `C[i, j] = cost(xᵢ, yⱼ)` over the supports of two measures.
    pub fn from_measures(
        source: &DiscreteMeasure,
        target: &DiscreteMeasure,
        cost: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Result<Self> {
        let data = source
            .points
            .iter()
            .flat_map(|x| target.points.iter().map(|y| cost(x, y)).collect::<Vec<_>>())
            .collect();
        CostMatrix::new(source.len(), target.len(), data)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> CostMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Mean entry, the scale for tolerances and regularization.
    pub fn cost_scale(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// A coupling `μ` on `supp μ₋ × supp μ₊`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    pub matrix: Vec<f64>,
    pub cost: f64,
    /// Max deviation of row sums from `μ₋` and column sums from `μ₊`.
    pub marginal_defect: (f64, f64),
}

impl TransportPlan {
    fn assemble(
        matrix: Vec<f64>,
        source: &DiscreteMeasure,
        target: &DiscreteMeasure,
        costs: &CostMatrix,
    ) -> Self {
        let (rows, cols) = (costs.rows, costs.cols);
        let cost = matrix.iter().zip(&costs.data).map(|(p, c)| p * c).sum();
        let row_defect = (0..rows)
            .map(|i| {
                (matrix[i * cols..(i + 1) * cols].iter().sum::<f64>() - source.weights[i]).abs()
            })
            .fold(0.0, f64::max);
        let col_defect = (0..cols)
            .map(|j| {
                ((0..rows).map(|i| matrix[i * cols + j]).sum::<f64>() - target.weights[j]).abs()
            })
            .fold(0.0, f64::max);
        TransportPlan {
            rows,
            cols,
            matrix,
            cost,
            marginal_defect: (row_defect, col_defect),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.cols + j]
    }
}

/// `f: i ↦ assignment[i]` between supports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportMap {
    pub assignment: Vec<usize>,
}

fn check_shapes(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    costs: &CostMatrix,
) -> Result<()> {
    source.validate()?;
    target.validate()?;
    if costs.rows != source.len() || costs.cols != target.len() {
        return Err(Error::InvalidInput(format!(
            "cost matrix is {}x{}, measures have {} and {} points",
            costs.rows,
            costs.cols,
            source.len(),
            target.len()
        )));
    }
    let (a, b) = (source.total_mass(), target.total_mass());
    if (a - b).abs() > 1e-9 * a.max(b) {
        return Err(Error::InvalidInput(format!(
            "total masses differ: {a} vs {b}"
        )));
    }
    Ok(())
}

fn check_brute_force(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    costs: &CostMatrix,
) -> Result<()> {
    check_shapes(source, target, costs)?;
    if source.len() != target.len() {
        return Err(Error::UnsupportedMeasure(format!(
            "{} source points vs {} target points: a transport map would have to split mass",
            source.len(),
            target.len()
        )));
    }
    if !source.is_uniform() || !target.is_uniform() {
        return Err(Error::UnsupportedMeasure(
            "non-uniform weights: transport maps need not exist".into(),
        ));
    }
    if source.len() > MAX_BRUTE_FORCE {
        return Err(Error::InvalidInput(format!(
            "brute force supports at most {MAX_BRUTE_FORCE} points, got {}",
            source.len()
        )));
    }
    Ok(())
}

/// Exact Monge problem by enumerating all permutations.
pub fn solve_monge_bruteforce(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    costs: &CostMatrix,
) -> Result<(TransportMap, f64)> {
    check_brute_force(source, target, costs)?;
    let m = source.len();
    let w = source.weights[0];
    let mut best: Option<(Vec<usize>, f64)> = None;
    for perm in (0..m).permutations(m) {
        let cost: f64 = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| w * costs.get(i, j))
            .sum();
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((perm, cost));
        }
    }
    let (assignment, cost) = best.expect("at least one permutation");
    Ok((TransportMap { assignment }, cost))
}

/// The coupling `(Id × f)(μ₋)` induced by a transport map.
pub fn graph_plan(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    map: &TransportMap,
    costs: &CostMatrix,
) -> Result<TransportPlan> {
    check_shapes(source, target, costs)?;
    if map.assignment.len() != source.len() || map.assignment.iter().any(|&j| j >= target.len()) {
        return Err(Error::InvalidInput(
            "transport map does not fit the supports".into(),
        ));
    }
    let mut matrix = vec![0.0; costs.rows * costs.cols];
    for (i, &j) in map.assignment.iter().enumerate() {
        matrix[i * costs.cols + j] += source.weights[i];
    }
    Ok(TransportPlan::assemble(matrix, source, target, costs))
}

/// Exact Kantorovich optimum for uniform marginals, searched over the
/// vertices of the Birkhoff polytope (scaled permutation matrices).
pub fn solve_kantorovich_exact(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    costs: &CostMatrix,
) -> Result<TransportPlan> {
    check_brute_force(source, target, costs)?;
    let m = source.len();
    let w = source.weights[0];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut matrix = vec![0.0; m * m];
    for perm in (0..m).permutations(m) {
        matrix.iter_mut().for_each(|x| *x = 0.0);
        for (i, &j) in perm.iter().enumerate() {
            matrix[i * m + j] = w;
        }
        let cost: f64 = matrix.iter().zip(&costs.data).map(|(p, c)| p * c).sum();
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((matrix.clone(), cost));
        }
    }
    let (matrix, _) = best.expect("at least one permutation");
    Ok(TransportPlan::assemble(matrix, source, target, costs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iter: usize,
    /// Stop once the row marginal defect of the scaled kernel drops below this.
    pub tol: f64,
    /// Largest defect left at `max_iter` that may still be rounded onto the
    /// marginals; anything above is a non-convergence error.
    pub round_tol: f64,
}

impl SinkhornConfig {
    pub fn new(epsilon: f64) -> Self {
        SinkhornConfig {
            epsilon,
            max_iter: 200_000,
            tol: 1e-9,
            round_tol: 1e-4,
        }
    }
}

/// Project a nearly feasible plan onto the couplings of `a` and `b`: scale
/// rows and columns down to their targets, then spread the missing mass as a
/// rank-one correction (Altschuler, Weed and Rigollet). Moves at most about
/// twice the marginal defect in L1.
fn round_to_marginals(matrix: &mut [f64], a: &[f64], b: &[f64]) {
    let (m, k) = (a.len(), b.len());
    for i in 0..m {
        let row = &mut matrix[i * k..(i + 1) * k];
        let s: f64 = row.iter().sum();
        if s > a[i] {
            let f = a[i] / s;
            row.iter_mut().for_each(|x| *x *= f);
        }
    }
    for j in 0..k {
        let s: f64 = (0..m).map(|i| matrix[i * k + j]).sum();
        if s > b[j] {
            let f = b[j] / s;
            (0..m).for_each(|i| matrix[i * k + j] *= f);
        }
    }
    let err_a: Vec<f64> = (0..m)
        .map(|i| (a[i] - matrix[i * k..(i + 1) * k].iter().sum::<f64>()).max(0.0))
        .collect();
    let err_b: Vec<f64> = (0..k)
        .map(|j| (b[j] - (0..m).map(|i| matrix[i * k + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = err_b.iter().sum();
    if total > 0.0 {
        for i in 0..m {
            for j in 0..k {
                matrix[i * k + j] += err_a[i] * err_b[j] / total;
            }
        }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Entropic Kantorovich problem by alternating marginal scaling of the Gibbs
/// kernel `exp(−C/ε)`. Switches to log-domain potentials when
/// `ε < 0.05 · max C` to avoid kernel underflow.
pub fn solve_kantorovich_sinkhorn(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    costs: &CostMatrix,
    cfg: &SinkhornConfig,
) -> Result<TransportPlan> {
    check_shapes(source, target, costs)?;
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "epsilon must be positive, got {}",
            cfg.epsilon
        )));
    }
    let matrix = if cfg.epsilon < 0.05 * costs.max_entry() {
        sinkhorn_log(source, target, costs, cfg)?
    } else {
        sinkhorn_scaling(source, target, costs, cfg)?
    };
    Ok(TransportPlan::assemble(matrix, source, target, costs))
}

fn row_defect(matrix: &[f64], cols: usize, a: &[f64]) -> f64 {
    a.iter()
        .enumerate()
        .map(|(i, ai)| (matrix[i * cols..(i + 1) * cols].iter().sum::<f64>() - ai).abs())
        .fold(0.0, f64::max)
}

fn sinkhorn_scaling(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    costs: &CostMatrix,
    cfg: &SinkhornConfig,
) -> Result<Vec<f64>> {
    let (m, k) = (costs.rows, costs.cols);
    let (a, b) = (&source.weights, &target.weights);
    let kernel: Vec<f64> = costs
        .data
        .iter()
        .map(|c| (-c / cfg.epsilon).exp())
        .collect();
    let mut u = vec![1.0; m];
    let mut v = vec![1.0; k];
    let plan = |u: &[f64], v: &[f64]| -> Vec<f64> {
        (0..m * k)
            .map(|idx| u[idx / k] * kernel[idx] * v[idx % k])
            .collect()
    };
    let mut defect = f64::INFINITY;
    let mut last = Vec::new();
    for _ in 0..cfg.max_iter {
        for i in 0..m {
            let s: f64 = (0..k).map(|j| kernel[i * k + j] * v[j]).sum();
            u[i] = a[i] / s;
        }
        for j in 0..k {
            let s: f64 = (0..m).map(|i| kernel[i * k + j] * u[i]).sum();
            v[j] = b[j] / s;
        }
        // columns are exact after the v-update; rows carry the defect
        let p = plan(&u, &v);
        defect = row_defect(&p, k, a);
        if !defect.is_finite() {
            break;
        }
        last = p;
        if defect < cfg.tol {
            break;
        }
    }
    finish(last, defect, source, target, cfg)
}

fn sinkhorn_log(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    costs: &CostMatrix,
    cfg: &SinkhornConfig,
) -> Result<Vec<f64>> {
    let (m, k) = (costs.rows, costs.cols);
    let eps = cfg.epsilon;
    let log_a: Vec<f64> = source.weights.iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = target.weights.iter().map(|w| w.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; k];
    let plan = |f: &[f64], g: &[f64]| -> Vec<f64> {
        (0..m * k)
            .map(|idx| ((f[idx / k] + g[idx % k] - costs.data[idx]) / eps).exp())
            .collect()
    };
    let mut defect = f64::INFINITY;
    let mut last = Vec::new();
    for _ in 0..cfg.max_iter {
        for i in 0..m {
            let lse = log_sum_exp((0..k).map(|j| (g[j] - costs.get(i, j)) / eps));
            f[i] = eps * (log_a[i] - lse);
        }
        for j in 0..k {
            let lse = log_sum_exp((0..m).map(|i| (f[i] - costs.get(i, j)) / eps));
            g[j] = eps * (log_b[j] - lse);
        }
        let p = plan(&f, &g);
        defect = row_defect(&p, k, &source.weights);
        if !defect.is_finite() {
            break;
        }
        last = p;
        if defect < cfg.tol {
            break;
        }
    }
    finish(last, defect, source, target, cfg)
}

fn finish(
    mut matrix: Vec<f64>,
    defect: f64,
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    cfg: &SinkhornConfig,
) -> Result<Vec<f64>> {
    if defect.is_nan() || defect > cfg.tol.max(cfg.round_tol) {
        return Err(Error::SinkhornNonConvergence {
            iterations: cfg.max_iter,
            defect,
        });
    }
    round_to_marginals(&mut matrix, &source.weights, &target.weights);
    Ok(matrix)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub monge_cost: f64,
    pub kantorovich_cost: f64,
    pub sinkhorn_cost: f64,
    pub graph_plan_cost: f64,
    /// `monge_cost ≥ kantorovich_cost − 1e-9`.
    pub holds: bool,
    /// The graph plan of the optimal map costs exactly the Monge optimum.
    pub graph_plan_matches: bool,
    pub assignment: Vec<usize>,
    pub plan: TransportPlan,
}

/// Check that the Kantorovich optimum bounds the Monge optimum from below.
pub fn verify_monge_kantorovich_bound(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    costs: &CostMatrix,
    epsilon: f64,
) -> Result<BoundReport> {
    let (map, monge_cost) = solve_monge_bruteforce(source, target, costs)?;
    let exact = solve_kantorovich_exact(source, target, costs)?;
    let graph = graph_plan(source, target, &map, costs)?;
    let sinkhorn =
        solve_kantorovich_sinkhorn(source, target, costs, &SinkhornConfig::new(epsilon))?;
    Ok(BoundReport {
        monge_cost,
        kantorovich_cost: exact.cost,
        sinkhorn_cost: sinkhorn.cost,
        graph_plan_cost: graph.cost,
        holds: monge_cost >= exact.cost - 1e-9,
        graph_plan_matches: graph.cost == monge_cost,
        assignment: map.assignment,
        plan: exact,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowCoupling {
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    pub costs: CostMatrix,
    /// Cost of the coupling `(Id × φ_t)(μ₋)` with probability weights.
    pub graph_plan_cost: f64,
    /// The matching `C_t` estimate, equal to `graph_plan_cost · vol(M)`.
    pub periodicity_value: f64,
    pub total_volume: f64,
}

/// Discretize `μ_ω` by samples `xᵢ` and push it forward by the time-`t`
/// map: `μ₋ = Σ δ_{xᵢ}/N`, `μ₊ = Σ δ_{φ_t(xᵢ)}/N`.
pub fn sampled_flow_coupling(
    sys: &SystemDef,
    t: &TimeVector,
    c: &CostFunction,
    n_samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<FlowCoupling> {
    // the full cost matrix is N², so this stays small
    if n_samples == 0 || n_samples > MAX_COUPLING_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "n_samples must lie in 1..={MAX_COUPLING_SAMPLES}, got {n_samples}"
        )));
    }
    check_setup(sys, c, cfg)?;
    let samples = sample_points(&sys.chart, n_samples, seed);
    let images = samples
        .iter()
        .map(|x| flow(sys, t, x, cfg))
        .collect::<Result<Vec<_>>>()?;
    let embed = |pts: &[crate::geometry::ChartPoint]| -> Result<Vec<Vec<f64>>> {
        pts.iter().map(|p| sys.chart.embed(p)).collect()
    };
    let source = DiscreteMeasure::uniform(embed(&samples)?)?;
    let target = DiscreteMeasure::uniform(embed(&images)?)?;
    let costs = CostMatrix::from_measures(&source, &target, |a, b| c.kind.eval_ambient(a, b))?;
    let identity = TransportMap {
        assignment: (0..n_samples).collect(),
    };
    let plan = graph_plan(&source, &target, &identity, &costs)?;
    let estimate = estimate_on_samples(sys, t, c, &samples, seed, cfg, None)?;
    Ok(FlowCoupling {
        source,
        target,
        costs,
        graph_plan_cost: plan.cost,
        periodicity_value: estimate.value,
        total_volume: sys.chart.total_volume(),
    })
}
