//! Zero scans of `T ↦ C_T^h(M, c)` and the toric verdict.
//!
//! A toric system (2π-normalized) has zero periodicity cost exactly on the
//! lattice `(2πℤ)ⁿ` and positive cost everywhere else. A finite scan can only
//! collect evidence for that, hence [`Verdict::ToricEvidence`].
//!
//! Grid points are split three ways. With `floor = 1e-6 · vol(M) · cost_scale`
//! and `thr = max(floor, 5·std_error)` at the point:
//!
//! * zero: `value < thr`
//! * positive: `value > 10·thr`
//! * ambiguous: anything in between, which makes the verdict inconclusive.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::costs::{check_inputs, cost_scale, estimate_on_samples, CostEstimate, CostFunction};
use crate::dynamics::{IntegratorConfig, SystemDef, TimeVector};
use crate::error::{Error, Result};
use crate::geometry::sample_points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ToricEvidence,
    NotToric,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::ToricEvidence => "ToricEvidence",
            Verdict::NotToric => "NotToric",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
}

impl Default for AxisRange {
    fn default() -> Self {
        AxisRange {
            t_min: 0.0,
            t_max: 2.0 * TAU,
            steps: 129,
        }
    }
}

impl AxisRange {
    /// Parse `t_min:t_max:steps`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || {
            Error::InvalidInput(format!(
                "malformed grid axis `{s}`, expected t_min:t_max:steps"
            ))
        };
        if parts.len() != 3 {
            return Err(bad());
        }
        let t_min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let t_max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let axis = AxisRange {
            t_min,
            t_max,
            steps,
        };
        axis.validate()?;
        Ok(axis)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_min.is_finite() && self.t_max.is_finite() && self.t_min < self.t_max) {
            return Err(Error::InvalidInput(format!(
                "grid axis needs finite t_min < t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.steps < 2 {
            return Err(Error::InvalidInput(
                "grid axis needs at least 2 steps".into(),
            ));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.t_max - self.t_min) / (self.steps - 1) as f64
    }

    /// Evenly spaced values. Values within 1e-9 of a multiple of 2π are
    /// snapped onto it, and lattice points the spacing misses are inserted.
    pub fn values(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut v: Vec<f64> = (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.t_max
                } else {
                    self.t_min + i as f64 * h
                }
            })
            .map(snap_to_lattice)
            .collect();
        let k_lo = (self.t_min / TAU).ceil() as i64;
        let k_hi = (self.t_max / TAU).floor() as i64;
        for k in k_lo..=k_hi {
            let lattice = k as f64 * TAU;
            if !v.contains(&lattice) {
                v.push(lattice);
            }
        }
        v.sort_by(f64::total_cmp);
        v
    }
}

fn snap_to_lattice(t: f64) -> f64 {
    let k = (t / TAU).round();
    if (t - k * TAU).abs() < 1e-9 {
        k * TAU
    } else {
        t
    }
}

/// Whether every entry is an exact multiple of 2π (grid values are snapped).
fn on_standard_lattice(t: &[f64]) -> bool {
    t.iter().all(|&x| (x / TAU).round() * TAU == x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub axes: Vec<AxisRange>,
}

impl ScanGrid {
    pub fn new(axes: Vec<AxisRange>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidInput(
                "scan grid needs at least one axis".into(),
            ));
        }
        for a in &axes {
            a.validate()?;
        }
        Ok(ScanGrid { axes })
    }

    /// `[0, 4π]` with 129 steps on every axis; full grids only for n ≤ 2.
    pub fn default_for(n: usize) -> Result<Self> {
        if n == 0 || n > 2 {
            return Err(Error::InvalidInput(format!(
                "default full-grid scans support n <= 2 (got n = {n}); pass explicit probe axes"
            )));
        }
        Ok(ScanGrid {
            axes: vec![AxisRange::default(); n],
        })
    }

    /// Same range on all `n` axes.
    pub fn uniform(n: usize, axis: AxisRange) -> Result<Self> {
        ScanGrid::new(vec![axis; n])
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn axis_values(&self) -> Vec<Vec<f64>> {
        self.axes.iter().map(AxisRange::values).collect()
    }

    /// All grid points in lexicographic order, the last axis varying fastest.
    pub fn points(&self) -> Vec<TimeVector> {
        let values = self.axis_values();
        let mut out = vec![Vec::new()];
        for axis in &values {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&t| {
                        let mut p = prefix.clone();
                        p.push(t);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(TimeVector).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Zero,
    Positive,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub grid: ScanGrid,
    pub estimates: Vec<CostEstimate>,
    pub zeros: Vec<TimeVector>,
    pub verdict: Verdict,
    /// Scale floor `1e-6 · vol(M) · cost_scale`; noise raises it pointwise.
    pub zero_threshold: f64,
    pub positivity_margin: f64,
}

impl ScanResult {
    pub fn threshold_at(&self, e: &CostEstimate) -> f64 {
        point_threshold(self.zero_threshold, e)
    }

    pub fn class_of(&self, e: &CostEstimate) -> PointClass {
        classify_point(self.zero_threshold, e)
    }

    fn find(&self, t: &[f64]) -> Option<&CostEstimate> {
        self.estimates.iter().find(|e| e.t.0 == t)
    }
}

fn point_threshold(floor: f64, e: &CostEstimate) -> f64 {
    floor.max(5.0 * e.std_error)
}

fn classify_point(floor: f64, e: &CostEstimate) -> PointClass {
    let thr = point_threshold(floor, e);
    if e.value < thr {
        PointClass::Zero
    } else if e.value > 10.0 * thr {
        PointClass::Positive
    } else {
        PointClass::Ambiguous
    }
}

const SCALE_PAIRS: usize = 10_000;

fn zero_floor(c: &CostFunction, n_samples: usize, seed: u64) -> Result<f64> {
    let scale = cost_scale(c, n_samples.min(SCALE_PAIRS), seed)?;
    Ok(1e-6 * c.chart.total_volume() * scale)
}

/// Evaluate `C_t` on every grid point with one shared sample set.
pub fn scan(
    sys: &SystemDef,
    c: &CostFunction,
    grid: &ScanGrid,
    n_samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<ScanResult> {
    check_inputs(sys, c, n_samples, cfg)?;
    if grid.dimension() != sys.half_dimension() {
        return Err(Error::InvalidInput(format!(
            "grid has {} axes, system has n = {}",
            grid.dimension(),
            sys.half_dimension()
        )));
    }
    let samples = sample_points(&sys.chart, n_samples, seed);
    let estimates = grid
        .points()
        .iter()
        .map(|t| estimate_on_samples(sys, t, c, &samples, seed, cfg, None))
        .collect::<Result<Vec<_>>>()?;
    let floor = zero_floor(c, n_samples, seed)?;
    let zeros = estimates
        .iter()
        .filter(|e| classify_point(floor, e) == PointClass::Zero)
        .map(|e| e.t.clone())
        .collect();
    let mut result = ScanResult {
        grid: grid.clone(),
        estimates,
        zeros,
        verdict: Verdict::Inconclusive,
        zero_threshold: floor,
        positivity_margin: 10.0 * floor,
    };
    result.verdict = standard_verdict(&result);
    Ok(result)
}

/// Verdict for the 2π-normalized torus.
fn standard_verdict(r: &ScanResult) -> Verdict {
    if r.estimates
        .iter()
        .any(|e| r.class_of(e) == PointClass::Ambiguous)
    {
        return Verdict::Inconclusive;
    }
    let diagonal = vec![TAU; r.grid.dimension()];
    let Some(at_period) = r.find(&diagonal) else {
        return Verdict::Inconclusive;
    };
    match r.class_of(at_period) {
        PointClass::Positive if at_period.value > 5.0 * at_period.std_error => Verdict::NotToric,
        PointClass::Zero => {
            let clean = r
                .estimates
                .iter()
                .filter(|e| !on_standard_lattice(&e.t.0))
                .all(|e| r.class_of(e) == PointClass::Positive);
            // off-lattice zeros mean the 2π-action is not effective
            if clean {
                Verdict::ToricEvidence
            } else {
                Verdict::Inconclusive
            }
        }
        _ => Verdict::Inconclusive,
    }
}

const GOLDEN_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 4;

/// Golden-section minimum of `f` on `[a, b]`; returns `(arg, value)`.
fn golden_section(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > GOLDEN_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Locally minimize `C_t` around `t_candidate` within `radius` per axis:
/// golden section for n = 1, coordinate descent otherwise. Returns the input
/// unchanged when nothing better is found.
pub fn refine_zero(
    sys: &SystemDef,
    c: &CostFunction,
    t_candidate: &TimeVector,
    radius: f64,
    n_samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<(TimeVector, CostEstimate)> {
    check_inputs(sys, c, n_samples, cfg)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let samples = sample_points(&sys.chart, n_samples, seed);
    let eval = |t: &TimeVector| estimate_on_samples(sys, t, c, &samples, seed, cfg, None);

    let start = eval(t_candidate)?;
    let mut best_t = t_candidate.clone();
    let mut best_value = start.value;
    let n = t_candidate.len();
    let sweeps = if n == 1 { 1 } else { MAX_SWEEPS };
    for _ in 0..sweeps {
        let before = best_t.clone();
        for k in 0..n {
            let centre = t_candidate.0[k];
            let mut probe = best_t.clone();
            let (arg, value) = golden_section(
                |x| {
                    probe.0[k] = x;
                    eval(&probe).map(|e| e.value)
                },
                centre - radius,
                centre + radius,
            )?;
            if value < best_value {
                best_value = value;
                best_t.0[k] = arg;
            }
        }
        if best_t == before {
            break;
        }
    }
    if best_t == *t_candidate {
        return Ok((best_t, start));
    }
    let est = eval(&best_t)?;
    Ok((best_t, est))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedCandidate {
    pub axis: usize,
    pub start: TimeVector,
    pub refined: TimeVector,
    pub estimate: CostEstimate,
    pub is_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// Smallest positive zero along each axis line.
    pub period: Option<TimeVector>,
    pub reason: String,
    pub candidates: Vec<RefinedCandidate>,
    pub scan: ScanResult,
}

/// Scan, refine zero candidates on each axis line, and look for a period
/// lattice `T₁ℤ × ⋯ × Tₙℤ` whose points carry every zero of the scan.
pub fn classify(
    sys: &SystemDef,
    c: &CostFunction,
    grid: &ScanGrid,
    n_samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<Classification> {
    let scan = scan(sys, c, grid, n_samples, seed, cfg)?;
    let n = grid.dimension();
    let verdict_only = |verdict, reason: &str, candidates, scan| Classification {
        verdict,
        period: None,
        reason: reason.to_string(),
        candidates,
        scan,
    };

    if scan
        .estimates
        .iter()
        .any(|e| scan.class_of(e) == PointClass::Ambiguous)
    {
        return Ok(verdict_only(
            Verdict::Inconclusive,
            "noise too large to separate zeros from positive costs",
            Vec::new(),
            scan,
        ));
    }

    let mut candidates = Vec::new();
    let mut period = Vec::with_capacity(n);
    for k in 0..n {
        let line: Vec<&CostEstimate> = scan
            .estimates
            .iter()
            .filter(|e| (0..n).all(|j| j == k || e.t.0[j] == 0.0))
            .collect();
        if line.is_empty() {
            return Ok(verdict_only(
                Verdict::Inconclusive,
                "scan window does not contain the axis lines through the origin",
                candidates,
                scan,
            ));
        }
        let radius = grid.axes[k].spacing();
        let mut found = None;
        for i in 0..line.len() {
            let t = line[i].t.0[k];
            let left_ok = i == 0 || line[i].value <= line[i - 1].value;
            let right_ok = i + 1 == line.len() || line[i].value <= line[i + 1].value;
            if t <= 0.0 || !left_ok || !right_ok {
                continue;
            }
            let (refined, estimate) =
                refine_zero(sys, c, &line[i].t, radius, n_samples, seed, cfg)?;
            let is_zero = classify_point(scan.zero_threshold, &estimate) == PointClass::Zero;
            candidates.push(RefinedCandidate {
                axis: k,
                start: line[i].t.clone(),
                refined: refined.clone(),
                estimate,
                is_zero,
            });
            if is_zero {
                found = Some(refined.0[k]);
                break;
            }
        }
        match found {
            Some(p) => period.push(p),
            None => {
                return Ok(verdict_only(
                    Verdict::NotToric,
                    &format!(
                        "no zero of the cost along axis {} in the scan window",
                        k + 1
                    ),
                    candidates,
                    scan,
                ))
            }
        }
    }

    let spacing: Vec<f64> = grid.axes.iter().map(AxisRange::spacing).collect();
    let near_lattice = |t: &[f64]| {
        t.iter()
            .zip(&period)
            .zip(&spacing)
            .all(|((x, p), h)| (x - (x / p).round() * p).abs() <= 0.5 * h)
    };
    let stray = scan.zeros.iter().find(|z| !near_lattice(&z.0)).cloned();
    if let Some(z) = stray {
        return Ok(verdict_only(
            Verdict::Inconclusive,
            &format!("zero at {:?} lies off the detected period lattice", z.0),
            candidates,
            scan,
        ));
    }
    Ok(Classification {
        verdict: Verdict::ToricEvidence,
        period: Some(TimeVector(period)),
        reason: "zero costs exactly on the period lattice, positive elsewhere".to_string(),
        candidates,
        scan,
    })
}
