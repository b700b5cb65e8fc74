//! Catalog of integrable systems with analytic flows and closed-form costs.
//!
//! Every oracle is the chordal-sq periodicity cost. For a rotation by angle `α`
//! of a point at distance `r` from the axis, `|x − Rx|² = 2r²(1 − cos α)`;
//! integrating over the chart gives the closed forms below.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{HamiltonianComponent, SystemDef, TimeVector};
use crate::error::{Error, Result};
use crate::geometry::DarbouxChart;
use crate::quadrature::{bessel_j0, simpson};
use crate::toricity::Verdict;

/// Named numeric parameters; `numeric = 1` strips analytic flows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemParams(pub BTreeMap<String, f64>);

impl SystemParams {
    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    /// Parse `key=value` pairs.
    pub fn parse<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for pair in pairs {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("parameter `{pair}` is not key=value"))
            })?;
            let v: f64 = v.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("parameter `{pair}` has a non-numeric value"))
            })?;
            map.insert(k.trim().to_string(), v);
        }
        Ok(SystemParams(map))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub chart: &'static str,
    pub description: &'static str,
    /// Accepted parameter names with defaults.
    pub params: &'static [(&'static str, f64)],
    pub expected_verdict: Verdict,
    pub expected_period: Option<&'static [f64]>,
}

impl CatalogEntry {
    pub fn dimension(&self) -> usize {
        DarbouxChart::from_id(self.chart)
            .map(|c| c.dimension())
            .unwrap_or(0)
    }
}

const PERTURBED_DEFAULT_EPS: f64 = 0.1;
const TWO_PI: f64 = 2.0 * PI;

static CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        id: "s2-spin",
        chart: "s2",
        description: "rotation of the sphere about the z-axis, h = z",
        params: &[("numeric", 0.0)],
        expected_verdict: Verdict::ToricEvidence,
        expected_period: Some(&[TWO_PI]),
    },
    CatalogEntry {
        id: "s2-spin-halfspeed",
        chart: "s2",
        description: "half-speed rotation, h = z/2",
        params: &[("numeric", 0.0)],
        expected_verdict: Verdict::ToricEvidence,
        expected_period: Some(&[2.0 * TWO_PI]),
    },
    CatalogEntry {
        id: "s2-spin-perturbed",
        chart: "s2",
        description: "height-dependent rotation speed, h = z + epsilon*z^2",
        params: &[("epsilon", PERTURBED_DEFAULT_EPS), ("numeric", 0.0)],
        expected_verdict: Verdict::NotToric,
        expected_period: None,
    },
    CatalogEntry {
        id: "s2-xspin",
        chart: "s2",
        description:
            "rotation about the x-axis, h = sqrt(1-z^2)*cos(theta); nonlinear in the chart",
        params: &[("numeric", 0.0)],
        expected_verdict: Verdict::ToricEvidence,
        expected_period: Some(&[TWO_PI]),
    },
    CatalogEntry {
        id: "t2-cos",
        chart: "t2",
        description: "shear flow on the torus, h = cos(theta1)",
        params: &[("numeric", 0.0)],
        expected_verdict: Verdict::NotToric,
        expected_period: None,
    },
    CatalogEntry {
        id: "s2xs2-toric",
        chart: "s2xs2",
        description: "independent rotations of two spheres, h = (z1, z2)",
        params: &[("numeric", 0.0)],
        expected_verdict: Verdict::ToricEvidence,
        expected_period: Some(&[TWO_PI, TWO_PI]),
    },
];

pub fn catalog() -> &'static [CatalogEntry] {
    CATALOG
}

pub fn entry(id: &str) -> Result<&'static CatalogEntry> {
    CATALOG
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::UnknownSystem(id.to_string()))
}

fn check_params(entry: &CatalogEntry, params: &SystemParams) -> Result<()> {
    for key in params.0.keys() {
        if !entry.params.iter().any(|(k, _)| k == key) {
            return Err(Error::InvalidInput(format!(
                "system {} has no parameter `{key}`",
                entry.id
            )));
        }
    }
    if let Some(flag) = params.get("numeric") {
        if flag != 0.0 && flag != 1.0 {
            return Err(Error::InvalidInput("numeric must be 0 or 1".into()));
        }
    }
    Ok(())
}

fn epsilon(params: &SystemParams) -> Result<f64> {
    let eps = params.get("epsilon").unwrap_or(PERTURBED_DEFAULT_EPS);
    if !(-0.4..=0.4).contains(&eps) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in [-0.4, 0.4], got {eps}"
        )));
    }
    Ok(eps)
}

/// `h = speed·z + eps·z²` on the sphere factor at coordinate offset `off`.
/// The flow rotates height `z` by angle `−(speed + 2·eps·z)·t`.
fn spin(dim: usize, off: usize, speed: f64, eps: f64) -> HamiltonianComponent {
    HamiltonianComponent::new(
        move |c: &[f64]| {
            let z = c[off + 1];
            speed * z + eps * z * z
        },
        move |c: &[f64]| {
            let mut g = vec![0.0; dim];
            g[off + 1] = speed + 2.0 * eps * c[off + 1];
            g
        },
    )
    .with_analytic_flow(move |t, c: &[f64]| {
        let mut out = c.to_vec();
        out[off] -= (speed + 2.0 * eps * c[off + 1]) * t;
        out
    })
}

/// `h = x = √(1−z²)·cos θ`, rotating about the x-axis by angle `−t`.
fn xspin() -> HamiltonianComponent {
    HamiltonianComponent::new(
        |c: &[f64]| (1.0 - c[1] * c[1]).sqrt() * c[0].cos(),
        |c: &[f64]| {
            let (theta, z) = (c[0], c[1]);
            let r = (1.0 - z * z).sqrt();
            vec![-r * theta.sin(), -z * theta.cos() / r]
        },
    )
    .with_analytic_flow(|t, c: &[f64]| {
        let (theta, z) = (c[0], c[1]);
        let r = (1.0 - z * z).sqrt();
        let (x, y) = (r * theta.cos(), r * theta.sin());
        let (s, co) = t.sin_cos();
        let y1 = y * co + z * s;
        let z1 = -y * s + z * co;
        vec![y1.atan2(x), z1]
    })
}

fn torus_cos() -> HamiltonianComponent {
    HamiltonianComponent::new(|c: &[f64]| c[0].cos(), |c: &[f64]| vec![-c[0].sin(), 0.0])
        .with_analytic_flow(|t, c: &[f64]| vec![c[0], c[1] - t * c[0].sin()])
}

/// Build a catalog system.
pub fn build(id: &str, params: &SystemParams) -> Result<SystemDef> {
    let e = entry(id)?;
    check_params(e, params)?;
    let chart = DarbouxChart::from_id(e.chart)?;
    let components = match id {
        "s2-spin" => vec![spin(2, 0, 1.0, 0.0)],
        "s2-spin-halfspeed" => vec![spin(2, 0, 0.5, 0.0)],
        "s2-spin-perturbed" => vec![spin(2, 0, 1.0, epsilon(params)?)],
        "s2-xspin" => vec![xspin()],
        "t2-cos" => vec![torus_cos()],
        "s2xs2-toric" => vec![spin(4, 0, 1.0, 0.0), spin(4, 2, 1.0, 0.0)],
        _ => unreachable!("catalog entry without builder"),
    };
    let sys = SystemDef::new(id, chart, components)?;
    Ok(if params.get("numeric") == Some(1.0) {
        sys.numeric()
    } else {
        sys
    })
}

/// `(16π/3)(1 − cos α)`: chordal-sq cost of rotating the unit sphere by `α`.
pub fn sphere_rotation_cost(angle: f64) -> f64 {
    16.0 * PI / 3.0 * (1.0 - angle.cos())
}

/// Closed-form chordal-sq periodicity cost `C_t`, when the catalog knows one.
pub fn oracle(id: &str, params: &SystemParams, t: &TimeVector) -> Result<Option<f64>> {
    let e = entry(id)?;
    check_params(e, params)?;
    let n = DarbouxChart::from_id(e.chart)?.half_dimension();
    if t.len() != n {
        return Err(Error::InvalidInput(format!(
            "time vector has {} entries, system has n = {n}",
            t.len()
        )));
    }
    let t = t.entries();
    let value = match id {
        "s2-spin" | "s2-xspin" => sphere_rotation_cost(t[0]),
        "s2-spin-halfspeed" => sphere_rotation_cost(t[0] / 2.0),
        "s2-spin-perturbed" => {
            let eps = epsilon(params)?;
            let t = t[0];
            // 2π ∫₋₁¹ (1 − z²)·2(1 − cos((1 + 2εz)t)) dz
            2.0 * PI
                * simpson(
                    |z| (1.0 - z * z) * 2.0 * (1.0 - ((1.0 + 2.0 * eps * z) * t).cos()),
                    -1.0,
                    1.0,
                    4000,
                )
        }
        "t2-cos" => 8.0 * PI * PI * (1.0 - bessel_j0(t[0])),
        "s2xs2-toric" => 4.0 * PI * (sphere_rotation_cost(t[0]) + sphere_rotation_cost(t[1])),
        _ => return Ok(None),
    };
    Ok(Some(value))
}
