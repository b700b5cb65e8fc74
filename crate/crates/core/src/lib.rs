//! Periodicity costs of compact completely integrable Hamiltonian systems.
//!
//! For a momentum map `h = (h₁, …, hₙ)` with commuting flows, the periodicity
//! cost at time `T ∈ ℝⁿ` is
//!
//! ```text
//! C_T^h(M, c) = ∫_M c(x, φ_T^h(x)) dμ_ω
//! ```
//!
//! for a continuous metric-like cost `c`. A system is toric exactly when this
//! vanishes on the period lattice of the acting torus and is positive
//! elsewhere. The crate estimates `C_T` by Monte Carlo on Darboux charts,
//! scans it over time windows, and classifies systems accordingly. A small
//! discrete optimal transport module covers the Monge/Kantorovich side.
//!
//! ```
//! use toricost_core::{build, make_cost, periodicity_cost, IntegratorConfig, SystemParams, TimeVector};
//!
//! let sys = build("s2-spin", &SystemParams::default()).unwrap();
//! let cost = make_cost("chordal-sq", &sys.chart).unwrap();
//! let t = TimeVector::new(vec![std::f64::consts::TAU]);
//! let est = periodicity_cost(&sys, &t, &cost, 1_000, 42, &IntegratorConfig::default()).unwrap();
//! assert!(est.value < 1e-9);
//! ```

pub mod costs;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod quadrature;
pub mod systems;
pub mod toricity;
pub mod transport;

pub use costs::{
    cost_continuity_probe, cost_scale, make_cost, periodicity_cost, periodicity_cost_in,
    periodicity_cost_quadrature, BoxRegion, CostEstimate, CostFunction, CostKind,
};
pub use dynamics::{
    check_flow_commutativity, check_volume_preservation, flow, flow_component, flow_in_order,
    hamiltonian_vector_field, max_poisson_defect, poisson_bracket, regular_fraction,
    HamiltonianComponent, IntegratorConfig, SystemDef, TimeVector,
};
pub use error::{Error, Result};
pub use geometry::{sample_points, ChartPoint, CoordRange, DarbouxChart, Factor, SingularSetSpec};
pub use systems::{build, catalog, oracle, CatalogEntry, SystemParams};
pub use toricity::{
    classify, refine_zero, scan, AxisRange, Classification, PointClass, RefinedCandidate, ScanGrid,
    ScanResult, Verdict,
};
pub use transport::{
    graph_plan, sampled_flow_coupling, solve_kantorovich_exact, solve_kantorovich_sinkhorn,
    solve_monge_bruteforce, verify_monge_kantorovich_bound, BoundReport, CostMatrix,
    DiscreteMeasure, FlowCoupling, SinkhornConfig, TransportMap, TransportPlan,
};
