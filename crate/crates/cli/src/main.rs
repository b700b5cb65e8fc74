//! `toricost`: periodicity costs, toricity scans and transport checks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use toricost_core::io::{
    read_measure_json, read_scan_csv, render_scan_svg, to_json, write_plan_csv, write_scan_csv,
};
use toricost_core::{
    build, catalog, classify, make_cost, periodicity_cost, scan, verify_monge_kantorovich_bound,
    AxisRange, CostKind, CostMatrix, Error, IntegratorConfig, ScanGrid, SystemDef, SystemParams,
    TimeVector, Verdict,
};

mod output;

use output::write_atomic;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "toricost",
    version,
    about = "Periodicity costs and toric detection for integrable systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in systems.
    Systems {
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Estimate C_t for one time vector.
    Cost(CostArgs),
    /// Evaluate C_t over a grid and write CSV plus a JSON sidecar.
    Scan(ScanArgs),
    /// Scan, refine zeros and report a verdict with the detected period.
    Classify(ClassifyArgs),
    /// Solve a discrete transport problem and check the Monge/Kantorovich bound.
    Transport(TransportArgs),
    /// Render a scan CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SystemArgs {
    /// System id from `toricost systems`.
    #[arg(long)]
    system: String,
    /// System parameter as key=value; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Cost function: chordal or chordal-sq.
    #[arg(long, default_value = "chordal-sq")]
    cost: String,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Integrator step size.
    #[arg(long)]
    step_size: Option<f64>,
    /// Newton residual tolerance for the implicit midpoint solve.
    #[arg(long)]
    newton_tol: Option<f64>,
    #[arg(long)]
    newton_max_iter: Option<usize>,
}

impl SystemArgs {
    fn integrator(&self) -> IntegratorConfig {
        let mut cfg = IntegratorConfig::default();
        if let Some(h) = self.step_size {
            cfg.step_size = h;
        }
        if let Some(tol) = self.newton_tol {
            cfg.newton_tol = tol;
        }
        if let Some(k) = self.newton_max_iter {
            cfg.newton_max_iter = k;
        }
        cfg
    }

    fn system(&self) -> Result<SystemDef, Error> {
        let params = SystemParams::parse(self.params.iter().map(String::as_str))?;
        build(&self.system, &params)
    }
}

#[derive(Args)]
struct CostArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Time vector in radians, comma separated for n > 1.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        required = true
    )]
    t: Vec<f64>,
    /// Also write the JSON estimate to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Axis range t_min:t_max:steps; give one per axis, or one for all axes.
    /// Defaults to 0:4π:129 on every axis.
    #[arg(
        long = "grid",
        value_name = "T_MIN:T_MAX:STEPS",
        allow_hyphen_values = true
    )]
    grid: Vec<String>,
}

impl GridArgs {
    fn grid(&self, n: usize) -> Result<ScanGrid, Error> {
        let axes = self
            .grid
            .iter()
            .map(|s| AxisRange::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        match axes.len() {
            0 => ScanGrid::default_for(n),
            1 => ScanGrid::uniform(n, axes[0]),
            k if k == n => ScanGrid::new(axes),
            k => Err(Error::InvalidInput(format!(
                "{k} grid axes given, system has n = {n}"
            ))),
        }
    }
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Scan CSV path.
    #[arg(long, default_value = "scan.csv")]
    out: PathBuf,
    /// JSON sidecar path; defaults to the CSV path with a .json extension.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Also write the classification as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TransportArgs {
    /// Source measure JSON: {"points": [[...], ...], "weights": [...]}.
    #[arg(long)]
    source: PathBuf,
    /// Target measure JSON.
    #[arg(long)]
    target: PathBuf,
    /// Sinkhorn regularization as a multiple of the mean cost entry.
    #[arg(long, default_value_t = 0.01)]
    epsilon_factor: f64,
    /// Plan CSV path (exact Kantorovich plan).
    #[arg(long, default_value = "plan.csv")]
    plan: PathBuf,
    /// Bound report JSON path.
    #[arg(long, default_value = "bound.json")]
    report: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Scan CSV to render.
    #[arg(long)]
    input: PathBuf,
    /// SVG path.
    #[arg(long, default_value = "scan.svg")]
    out: PathBuf,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numeric() {
            EXIT_NUMERIC
        } else {
            EXIT_VALIDATION
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl Failure {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn input(path: &Path, e: std::io::Error) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: format!("{}: {e}", path.display()),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(f) = configure_threads() {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.code);
    }
    let result = match cli.command {
        Command::Systems { json } => cmd_systems(json),
        Command::Cost(a) => cmd_cost(&a),
        Command::Scan(a) => cmd_scan(&a),
        Command::Classify(a) => cmd_classify(&a),
        Command::Transport(a) => cmd_transport(&a),
        Command::Plot(a) => cmd_plot(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// `TORICOST_THREADS` caps the worker pool. Results do not depend on it.
fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("TORICOST_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure {
            code: EXIT_VALIDATION,
            message: format!("TORICOST_THREADS must be a positive integer, got `{raw}`"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure {
            code: 1,
            message: e.to_string(),
        })
}

fn json(value: &impl Serialize) -> Result<String, Failure> {
    Ok(to_json(value)? + "\n")
}

fn fmt_time(t: &TimeVector) -> String {
    let parts: Vec<String> = t
        .entries()
        .iter()
        .map(|x| toricost_core::io::format_f64(*x))
        .collect();
    format!("({})", parts.join(", "))
}

fn cmd_systems(as_json: bool) -> CmdResult {
    if as_json {
        print!("{}", json(&catalog())?);
        return Ok(0);
    }
    println!("{:<20} {:>3}  {:<15} parameters", "id", "dim", "expected");
    for e in catalog() {
        let params: Vec<String> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "{:<20} {:>3}  {:<15} {}",
            e.id,
            e.dimension(),
            e.expected_verdict.to_string(),
            params.join(" ")
        );
    }
    Ok(0)
}

#[derive(Serialize)]
struct CostReport<'a> {
    system: &'a str,
    cost: &'a str,
    t: &'a TimeVector,
    value: f64,
    std_error: f64,
    n_samples: usize,
    seed: u64,
}

fn cmd_cost(a: &CostArgs) -> CmdResult {
    let sys = a.sys.system()?;
    let c = make_cost(&a.sys.cost, &sys.chart)?;
    let t = TimeVector::new(a.t.clone());
    let e = periodicity_cost(&sys, &t, &c, a.sys.samples, a.sys.seed, &a.sys.integrator())?;
    let text = json(&CostReport {
        system: &a.sys.system,
        cost: c.name(),
        t: &e.t,
        value: e.value,
        std_error: e.std_error,
        n_samples: e.n_samples,
        seed: e.seed,
    })?;
    if let Some(path) = &a.out {
        write_atomic(path, &text).map_err(|e| Failure::io(path, e))?;
    }
    print!("{text}");
    Ok(0)
}

#[derive(Serialize)]
struct ScanSidecar<'a> {
    system: &'a str,
    params: &'a SystemParams,
    cost: &'a str,
    n_samples: usize,
    seed: u64,
    grid: &'a [AxisRange],
    verdict: Verdict,
    zero_threshold: f64,
    positivity_margin: f64,
    zeros: &'a [TimeVector],
}

fn cmd_scan(a: &ScanArgs) -> CmdResult {
    let params = SystemParams::parse(a.sys.params.iter().map(String::as_str))?;
    let sys = build(&a.sys.system, &params)?;
    let c = make_cost(&a.sys.cost, &sys.chart)?;
    let grid = a.grid.grid(sys.half_dimension())?;
    let r = scan(
        &sys,
        &c,
        &grid,
        a.sys.samples,
        a.sys.seed,
        &a.sys.integrator(),
    )?;
    let csv = write_scan_csv(&r);
    let sidecar = json(&ScanSidecar {
        system: &a.sys.system,
        params: &params,
        cost: c.name(),
        n_samples: a.sys.samples,
        seed: a.sys.seed,
        grid: &r.grid.axes,
        verdict: r.verdict,
        zero_threshold: r.zero_threshold,
        positivity_margin: r.positivity_margin,
        zeros: &r.zeros,
    })?;
    let json_path = a
        .json
        .clone()
        .unwrap_or_else(|| a.out.with_extension("json"));
    write_atomic(&a.out, &csv).map_err(|e| Failure::io(&a.out, e))?;
    write_atomic(&json_path, &sidecar).map_err(|e| Failure::io(&json_path, e))?;
    println!("{} rows written to {}", r.estimates.len(), a.out.display());
    println!("verdict: {}", r.verdict);
    Ok(0)
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    system: &'a str,
    cost: &'a str,
    n_samples: usize,
    seed: u64,
    verdict: Verdict,
    period: Option<&'a TimeVector>,
    reason: &'a str,
    zeros: &'a [TimeVector],
}

fn cmd_classify(a: &ClassifyArgs) -> CmdResult {
    let sys = a.sys.system()?;
    let c = make_cost(&a.sys.cost, &sys.chart)?;
    let grid = a.grid.grid(sys.half_dimension())?;
    let cls = classify(
        &sys,
        &c,
        &grid,
        a.sys.samples,
        a.sys.seed,
        &a.sys.integrator(),
    )?;
    if let Some(path) = &a.out {
        let text = json(&ClassifyReport {
            system: &a.sys.system,
            cost: c.name(),
            n_samples: a.sys.samples,
            seed: a.sys.seed,
            verdict: cls.verdict,
            period: cls.period.as_ref(),
            reason: &cls.reason,
            zeros: &cls.scan.zeros,
        })?;
        write_atomic(path, &text).map_err(|e| Failure::io(path, e))?;
    }
    println!("verdict: {}", cls.verdict);
    match &cls.period {
        Some(p) => println!("period: {}", fmt_time(p)),
        None => println!("period: none"),
    }
    println!("reason: {}", cls.reason);
    Ok(if cls.verdict == Verdict::Inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        0
    })
}

#[derive(Serialize)]
struct TransportReport {
    monge_cost: f64,
    kantorovich_cost: f64,
    sinkhorn_cost: f64,
    graph_plan_cost: f64,
    epsilon: f64,
    holds: bool,
    graph_plan_matches: bool,
    assignment: Vec<usize>,
}

fn cmd_transport(a: &TransportArgs) -> CmdResult {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Failure::input(p, e));
    let source = read_measure_json(&read(&a.source)?)?;
    let target = read_measure_json(&read(&a.target)?)?;
    if source
        .points
        .iter()
        .chain(&target.points)
        .any(|p| p.len() != source.points[0].len())
    {
        return Err(Error::InvalidInput("all points must have the same dimension".into()).into());
    }
    let costs = CostMatrix::from_measures(&source, &target, |x, y| {
        CostKind::ChordalSq.eval_ambient(x, y)
    })?;
    if !(a.epsilon_factor > 0.0 && a.epsilon_factor.is_finite()) {
        return Err(Error::InvalidInput("epsilon factor must be positive".into()).into());
    }
    // identical supports give an all-zero matrix; any positive ε works there
    let epsilon = a.epsilon_factor * costs.cost_scale().max(f64::MIN_POSITIVE.sqrt());
    let r = verify_monge_kantorovich_bound(&source, &target, &costs, epsilon)?;
    let report = json(&TransportReport {
        monge_cost: r.monge_cost,
        kantorovich_cost: r.kantorovich_cost,
        sinkhorn_cost: r.sinkhorn_cost,
        graph_plan_cost: r.graph_plan_cost,
        epsilon,
        holds: r.holds,
        graph_plan_matches: r.graph_plan_matches,
        assignment: r.assignment.clone(),
    })?;
    write_atomic(&a.plan, &write_plan_csv(&r.plan)).map_err(|e| Failure::io(&a.plan, e))?;
    write_atomic(&a.report, &report).map_err(|e| Failure::io(&a.report, e))?;
    print!("{report}");
    Ok(0)
}

fn cmd_plot(a: &PlotArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.input).map_err(|e| Failure::input(&a.input, e))?;
    let (n, rows) = read_scan_csv(&text)?;
    let svg = render_scan_svg(n, &rows)?;
    write_atomic(&a.out, &svg).map_err(|e| Failure::io(&a.out, e))?;
    println!("wrote {}", a.out.display());
    Ok(0)
}
