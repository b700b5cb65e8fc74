//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use toricost_core::{
    catalog, check_flow_commutativity, check_volume_preservation, classify, flow_component,
    make_cost, max_poisson_defect, periodicity_cost, sample_points, scan, solve_kantorovich_exact,
    solve_kantorovich_sinkhorn, solve_monge_bruteforce, AxisRange, ChartPoint, CostMatrix,
    DarbouxChart, DiscreteMeasure, IntegratorConfig, ScanGrid, SinkhornConfig, TimeVector, Verdict,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn within_sigma(value: f64, se: f64, truth: f64, k: f64) -> bool {
    (value - truth).abs() <= k * se
}

fn toric_zero() -> Outcome {
    let s = sys("s2-spin");
    let c = make_cost("chordal-sq", &s.chart).unwrap();
    let truth = 32.0 * PI / 3.0;
    // oracle cross-checks: hand integration and a 10⁷-sample brute force
    ensure!(
        (sphere_rotation_oracle(PI) - truth).abs() < 1e-12,
        "hand integral disagrees"
    );
    let (bf, bf_se) = sphere_rotation_brute_force(PI, 10_000_000, 2024);
    ensure!(
        within_sigma(bf, bf_se, truth, 3.0),
        "brute force {bf} ± {bf_se} vs {truth}"
    );

    let mut values = Vec::new();
    let mut ses = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in [1, 2, 3] {
        let (zero, dt0) = timed(|| {
            periodicity_cost(&s, &TimeVector::new(vec![TAU]), &c, 100_000, seed, &cfg()).unwrap()
        });
        let (half, dt1) = timed(|| {
            periodicity_cost(&s, &TimeVector::new(vec![PI]), &c, 100_000, seed, &cfg()).unwrap()
        });
        ensure!(zero.value < 1e-9, "seed {seed}: C_2π = {:e}", zero.value);
        slowest = slowest.max(dt0).max(dt1);
        values.push(half.value);
        ses.push(half.std_error);
    }
    let mean = values.iter().sum::<f64>() / 3.0;
    let se = ses.iter().map(|s| s * s).sum::<f64>().sqrt() / 3.0;
    ensure!(
        within_sigma(mean, se, truth, 3.0),
        "C_π = {mean} ± {se} vs {truth}"
    );
    ensure!(
        slowest < Duration::from_secs(10),
        "slowest estimate took {slowest:?}"
    );
    Ok(format!(
        "C_π = {mean:.5} ± {se:.5} (oracle {truth:.5}); slowest estimate {slowest:.2?}"
    ))
}

fn positivity_off_lattice() -> Outcome {
    let s = sys("s2-spin");
    let c = make_cost("chordal-sq", &s.chart).unwrap();
    let grid = ScanGrid::default_for(1).unwrap();
    let (r, dt) = timed(|| scan(&s, &c, &grid, 100_000, 42, &cfg()).unwrap());
    ensure!(
        r.estimates.len() == 129,
        "{} grid points",
        r.estimates.len()
    );
    let mut worst = f64::INFINITY;
    for e in &r.estimates {
        let t = e.t.entries()[0];
        let on_lattice = (t / TAU - (t / TAU).round()).abs() < 1e-12;
        if !on_lattice {
            ensure!(
                e.value > r.positivity_margin,
                "C at t = {t} is {:e}",
                e.value
            );
            worst = worst.min(e.value / r.positivity_margin);
        }
    }
    let zeros: Vec<f64> = r.zeros.iter().map(|t| t.entries()[0]).collect();
    ensure!(zeros == vec![0.0, TAU, 2.0 * TAU], "zeros {zeros:?}");
    ensure!(dt < Duration::from_secs(300), "scan took {dt:?}");
    Ok(format!(
        "zeros at {{0, 2π, 4π}}; smallest off-lattice value {worst:.1}× margin; {dt:.2?}"
    ))
}

fn non_toric_detection() -> Outcome {
    let s = sys("t2-cos");
    let c = make_cost("chordal-sq", &s.chart).unwrap();
    let mut worst = 0.0f64;
    for t in [1.0, 2.0, PI, TAU] {
        let truth = 8.0 * PI * PI * (1.0 - j0_series(t));
        let e = periodicity_cost(&s, &TimeVector::new(vec![t]), &c, 100_000, 42, &cfg()).unwrap();
        ensure!(
            within_sigma(e.value, e.std_error, truth, 3.0),
            "t2-cos t = {t}: {} ± {} vs {truth}",
            e.value,
            e.std_error
        );
        worst = worst.max((e.value - truth).abs() / e.std_error);
    }
    let grid = ScanGrid::default_for(1).unwrap();
    let cls = classify(&s, &c, &grid, 100_000, 42, &cfg()).unwrap();
    ensure!(
        cls.verdict == Verdict::NotToric,
        "t2-cos classified {}: {}",
        cls.verdict,
        cls.reason
    );

    let p = sys("s2-spin-perturbed");
    let c = make_cost("chordal-sq", &p.chart).unwrap();
    let truth = perturbed_oracle(0.1, TAU);
    let e = periodicity_cost(&p, &TimeVector::new(vec![TAU]), &c, 100_000, 42, &cfg()).unwrap();
    ensure!(
        within_sigma(e.value, e.std_error, truth, 3.0),
        "perturbed C_2π = {} ± {} vs {truth}",
        e.value,
        e.std_error
    );
    let cls = classify(&p, &c, &grid, 100_000, 42, &cfg()).unwrap();
    ensure!(
        cls.verdict == Verdict::NotToric,
        "perturbed classified {}: {}",
        cls.verdict,
        cls.reason
    );
    Ok(format!("Bessel oracle within {worst:.2}σ; perturbed C_2π = {:.4} (oracle {truth:.4}); both NotToric", e.value))
}

fn general_period() -> Outcome {
    let s = sys("s2-spin-halfspeed");
    let c = make_cost("chordal-sq", &s.chart).unwrap();
    let cls = classify(
        &s,
        &c,
        &ScanGrid::default_for(1).unwrap(),
        100_000,
        42,
        &cfg(),
    )
    .unwrap();
    ensure!(
        cls.verdict == Verdict::ToricEvidence,
        "classified {}: {}",
        cls.verdict,
        cls.reason
    );
    let period = cls.period.ok_or("no period reported")?.entries()[0];
    ensure!((period - 4.0 * PI).abs() < 1e-3, "period {period}");
    Ok(format!(
        "ToricEvidence, period {period:.9} (4π = {:.9})",
        4.0 * PI
    ))
}

fn product_system() -> Outcome {
    let prod = sys("s2xs2-toric");
    let one = sys("s2-spin");
    let cp = make_cost("chordal-sq", &prod.chart).unwrap();
    let c1 = make_cost("chordal-sq", &one.chart).unwrap();
    let area = one.chart.total_volume();
    let mut worst = 0.0f64;
    for (i, t) in [
        [0.5, 0.0],
        [1.0, 2.0],
        [PI, PI / 2.0],
        [TAU, 3.0],
        [5.0, 7.0],
    ]
    .iter()
    .enumerate()
    {
        let seed = 100 + i as u64;
        let p = periodicity_cost(
            &prod,
            &TimeVector::new(t.to_vec()),
            &cp,
            100_000,
            seed,
            &cfg(),
        )
        .unwrap();
        let a = periodicity_cost(
            &one,
            &TimeVector::new(vec![t[0]]),
            &c1,
            100_000,
            seed + 10,
            &cfg(),
        )
        .unwrap();
        let b = periodicity_cost(
            &one,
            &TimeVector::new(vec![t[1]]),
            &c1,
            100_000,
            seed + 20,
            &cfg(),
        )
        .unwrap();
        // C on S²×S² = area(S²)·(C₁(t₁) + C₁(t₂))
        let rhs = area * (a.value + b.value);
        let se =
            (p.std_error.powi(2) + (area * a.std_error).powi(2) + (area * b.std_error).powi(2))
                .sqrt();
        ensure!(
            (p.value - rhs).abs() <= 3.0 * se,
            "t = {t:?}: {} vs {rhs} (se {se})",
            p.value
        );
        worst = worst.max((p.value - rhs).abs() / se);
    }
    let grid = ScanGrid::uniform(
        2,
        AxisRange {
            t_min: 0.0,
            t_max: 4.0 * PI,
            steps: 33,
        },
    )
    .unwrap();
    let cls = classify(&prod, &cp, &grid, 10_000, 42, &cfg()).unwrap();
    ensure!(
        cls.verdict == Verdict::ToricEvidence,
        "classified {}: {}",
        cls.verdict,
        cls.reason
    );
    let period = cls.period.ok_or("no period reported")?;
    ensure!(
        period.entries().iter().all(|p| (p - TAU).abs() < 1e-3),
        "period {period:?}"
    );
    Ok(format!(
        "additivity within {worst:.2}σ at 5 points; ToricEvidence, period (2π, 2π) on a 33×33 grid"
    ))
}

fn xspin_error(step: f64, pts: &[ChartPoint]) -> f64 {
    let s = sys("s2-xspin");
    let num = s.numeric();
    let cfg = IntegratorConfig {
        step_size: step,
        newton_tol: 1e-14,
        newton_max_iter: 100,
    };
    pts.iter()
        .map(|p| {
            let a = s
                .chart
                .embed(&flow_component(&s, 0, 1.0, p, &cfg).unwrap())
                .unwrap();
            let b = s
                .chart
                .embed(&flow_component(&num, 0, 1.0, p, &cfg).unwrap())
                .unwrap();
            a.iter()
                .zip(&b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

fn dynamics_invariants() -> Outcome {
    let mut poisson = 0.0f64;
    for e in catalog() {
        poisson = poisson.max(max_poisson_defect(&sys(e.id), 1_000, 1).unwrap());
    }
    poisson = poisson.max(max_poisson_defect(&t2xt2(), 1_000, 1).unwrap());
    ensure!(poisson < 1e-8, "Poisson defect {poisson:e}");

    let prod = sys("s2xs2-toric");
    let comm = check_flow_commutativity(&prod, 1_000, 7, &cfg()).unwrap();
    ensure!(comm <= 1e-9, "analytic flow commutativity {comm:e}");

    let mut vol_analytic = 0.0f64;
    for id in ["s2-spin", "s2-spin-perturbed", "s2-xspin", "t2-cos"] {
        for t in [1.0, -4.0, 10.0] {
            let d = check_volume_preservation(&sys(id), &TimeVector::new(vec![t]), 50, 3, &cfg())
                .unwrap();
            vol_analytic = vol_analytic.max(d);
        }
    }
    ensure!(
        vol_analytic <= 1e-6,
        "analytic volume defect {vol_analytic:e}"
    );

    let torus = t2xt2();
    let num_cfg = IntegratorConfig {
        step_size: 1e-2,
        newton_tol: 1e-13,
        ..IntegratorConfig::default()
    };
    let mut vol_numeric = 0.0f64;
    for t in [[10.0, -10.0], [-3.0, 7.0], [0.5, 10.0]] {
        let d = check_volume_preservation(&torus, &TimeVector::new(t.to_vec()), 10, 3, &num_cfg)
            .unwrap();
        vol_numeric = vol_numeric.max(d);
    }
    ensure!(vol_numeric <= 1e-4, "numeric volume defect {vol_numeric:e}");

    let pts: Vec<ChartPoint> = sample_points(&DarbouxChart::sphere(), 200, 12)
        .into_iter()
        .filter(|p| {
            let (theta, z) = (p.coords()[0], p.coords()[1]);
            ((1.0 - z * z).sqrt() * theta.cos()).abs() > 0.6
        })
        .take(10)
        .collect();
    let ratio = xspin_error(0.02, &pts) / xspin_error(0.01, &pts);
    ensure!(
        (3.5..=4.5).contains(&ratio),
        "error ratio under step halving {ratio}"
    );
    Ok(format!(
        "Poisson {poisson:.1e}; commutativity {comm:.1e}; volume {vol_analytic:.1e} analytic, {vol_numeric:.1e} numeric; order ratio {ratio:.3}"
    ))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn transport_bound() -> Outcome {
    let mut rng = SplitMix(0x5eed);
    let start = Instant::now();
    let mut worst_rel = 0.0f64;
    for k in 0..100 {
        let m = 2 + k % 7;
        let mu = DiscreteMeasure::uniform(unit_square_points(m, &mut rng)).unwrap();
        let nu = DiscreteMeasure::uniform(unit_square_points(m, &mut rng)).unwrap();
        let c = CostMatrix::from_measures(&mu, &nu, sq_dist).unwrap();
        let (_, monge) = solve_monge_bruteforce(&mu, &nu, &c).unwrap();
        let kant = solve_kantorovich_exact(&mu, &nu, &c).unwrap();
        ensure!(
            monge >= kant.cost - 1e-9,
            "instance {k}: Monge {monge} < Kantorovich {}",
            kant.cost
        );
        ensure!(
            (monge - kant.cost).abs() <= 1e-12,
            "instance {k}: no Birkhoff equality"
        );
        let eps = 0.01 * c.cost_scale();
        let sk = solve_kantorovich_sinkhorn(&mu, &nu, &c, &SinkhornConfig::new(eps))
            .map_err(|e| format!("instance {k}: {e}"))?;
        let rel = (sk.cost - monge).abs() / monge;
        ensure!(
            rel <= 0.05,
            "instance {k} (m = {m}): sinkhorn {} vs optimum {monge}",
            sk.cost
        );
        worst_rel = worst_rel.max(rel);
    }
    let dt = start.elapsed();
    ensure!(dt < Duration::from_secs(60), "took {dt:?}");
    Ok(format!(
        "100 instances, Monge = Kantorovich; sinkhorn within {:.2}% of the optimum; {dt:.2?}",
        100.0 * worst_rel
    ))
}

fn run(bin: &str, dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin)
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn reproducibility() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_toricost");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mu = r#"{"points": [[0.0, 0.0], [1.0, 0.2], [0.3, 0.9], [0.5, 0.5]], "weights": [0.25, 0.25, 0.25, 0.25]}"#;
    let nu = r#"{"points": [[0.1, 0.0], [0.9, 0.3], [0.2, 1.0], [0.6, 0.4]], "weights": [0.25, 0.25, 0.25, 0.25]}"#;
    let commands: [&[&str]; 6] = [
        &[
            "cost",
            "--system",
            "s2-spin-perturbed",
            "--t",
            "2.5",
            "--samples",
            "20000",
            "--out",
            "cost.json",
        ],
        &[
            "scan",
            "--system",
            "t2-cos",
            "--samples",
            "5000",
            "--out",
            "scan.csv",
        ],
        &[
            "scan",
            "--system",
            "s2xs2-toric",
            "--grid",
            "0:12.566370614359172:9",
            "--samples",
            "2000",
            "--out",
            "scan2.csv",
        ],
        &[
            "classify",
            "--system",
            "s2-spin-halfspeed",
            "--samples",
            "5000",
            "--out",
            "classify.json",
        ],
        &[
            "transport",
            "--source",
            "mu.json",
            "--target",
            "nu.json",
            "--plan",
            "plan.csv",
            "--report",
            "bound.json",
        ],
        &["plot", "--input", "scan.csv", "--out", "scan.svg"],
    ];
    for dir in &dirs {
        std::fs::write(dir.path().join("mu.json"), mu).unwrap();
        std::fs::write(dir.path().join("nu.json"), nu).unwrap();
        for args in commands {
            run(bin, dir.path(), args)?;
        }
        run(
            bin,
            dir.path(),
            &["plot", "--input", "scan2.csv", "--out", "scan2.svg"],
        )?;
    }
    let files = [
        "cost.json",
        "scan.csv",
        "scan.json",
        "scan2.csv",
        "scan2.json",
        "classify.json",
        "plan.csv",
        "bound.json",
        "scan.svg",
        "scan2.svg",
    ];
    for f in files {
        let a = std::fs::read(dirs[0].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = std::fs::read(dirs[1].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure!(a == b, "{f} differs between runs");
    }
    Ok(format!(
        "{} output files byte-identical across two runs",
        files.len()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("toric zero", toric_zero),
        ("positivity off the lattice", positivity_off_lattice),
        ("non-toric detection", non_toric_detection),
        ("general period", general_period),
        ("product system", product_system),
        ("dynamics invariants", dynamics_invariants),
        ("transport bound", transport_bound),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
