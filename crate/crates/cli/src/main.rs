mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lgmm::csv::{
    grid_csv, grid_labels, group_endpoints_csv, group_labels, group_paths_csv, plot_script,
    sde_endpoints_csv, sde_paths_csv,
};
use lgmm::dh::{DhFamily, DhMeasure};
use lgmm::error::Error;
use lgmm::fokker_planck::{
    mollified_delta, solve_fp_with, stability_bound, DensityGrid, FpEquation, FpOptions,
};
use lgmm::group::{simulate_group_ensemble, simulate_group_path, GroupOptions, Manifold, Scheme};
use lgmm::noise::SeedRecord;
use lgmm::sde::{integrate_ensemble, integrate_path, SdeSystem, SystemId};
use lgmm::verify::{run_check, CheckConfig, CheckId};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use output::Outputs;

#[derive(Parser)]
#[command(
    name = "lgmm",
    version,
    about = "Brownian motion on R3, SU(2) and H3: simulation, Fokker-Planck solves and checks"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, env = "LGMM_SEED", default_value_t = 1)]
    seed: u64,
    /// File of `key=value` lines; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Also write a gnuplot script next to every CSV.
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Brownian motion on a manifold; one endpoint row per path.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// A projected SDE system.
    #[command(args_override_self = true)]
    Sde(SdeArgs),
    /// A Fokker–Planck equation on its grid.
    #[command(args_override_self = true)]
    Fpsolve(FpArgs),
    /// A named check; exit code 0 iff it passes.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Support, density and volume of a DH measure.
    #[command(args_override_self = true)]
    Dh(DhArgs),
}

#[derive(Args)]
struct TimeArgs {
    #[arg(long)]
    t: f64,
    /// Step size; defaults to 1e-3 unless --steps is given.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    manifold: Manifold,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    paths: usize,
    #[command(flatten)]
    time: TimeArgs,
    /// Project the Itô scheme back onto the group after every step.
    #[arg(long)]
    renormalize: bool,
    #[arg(long)]
    full_paths: bool,
}

#[derive(Args)]
struct SdeArgs {
    #[arg(long)]
    system: SystemId,
    /// Start state, comma separated; defaults to the image of the base point.
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    paths: usize,
    #[command(flatten)]
    time: TimeArgs,
    #[arg(long)]
    full_paths: bool,
}

#[derive(Args)]
struct FpArgs {
    #[arg(long)]
    equation: FpEquation,
    #[arg(long, default_value_t = 201)]
    nodes: usize,
    /// Nodes along the second axis (2D); defaults to --nodes.
    #[arg(long)]
    ny: Option<usize>,
    /// `uniform` or `delta`.
    #[arg(long, default_value = "delta")]
    init: String,
    /// Delta width; defaults to five grid steps.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    t: f64,
    /// Defaults to 1e-4 in 1D and to the stability bound in 2D.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    lambda_max: f64,
    #[arg(long, default_value_t = 1e-4)]
    leakage_tol: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// A check id, or `all`.
    #[arg(long)]
    check: String,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct DhArgs {
    #[arg(long)]
    family: DhFamily,
    /// Leaf parameter r, θ or λ.
    #[arg(long)]
    param: f64,
    /// Point at which to evaluate the normalized density.
    #[arg(long)]
    point: Option<f64>,
}

enum Failure {
    Config(String),
    Runtime(String),
    Statistical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Statistical(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Integration { .. } | Error::SchemeFailure(_) => Failure::Runtime(msg),
            Error::Leakage { .. } | Error::InsufficientData(_) | Error::BinUnderflow { .. } => {
                Failure::Statistical(msg)
            }
            _ => Failure::Config(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("io: {e}"))
    }
}

type Run<T> = std::result::Result<T, Failure>;

fn steps(time: &TimeArgs) -> Run<(usize, f64)> {
    let t = time.t;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Failure::Config(format!("--t must be positive, got {t}")));
    }
    let (n, dt) = match (time.steps, time.dt) {
        (Some(0), _) => return Err(Failure::Config("--steps must be positive".into())),
        (Some(n), None) => (n, t / n as f64),
        (Some(n), Some(dt)) => (n, dt),
        (None, dt) => {
            let dt = dt.unwrap_or(1e-3);
            if !(dt > 0.0) {
                return Err(Failure::Config(format!("--dt must be positive, got {dt}")));
            }
            ((t / dt).round().max(1.0) as usize, dt)
        }
    };
    if (n as f64 * dt - t).abs() > 1e-12 * t.max(1.0) {
        return Err(Failure::Config(format!(
            "dt * n_steps = {} does not equal t = {t}",
            n as f64 * dt
        )));
    }
    Ok((n, t / n as f64))
}

fn add_csv(out: &mut Outputs, plot: bool, name: &str, title: &str, csv: String) {
    if plot {
        let header: Vec<&str> = csv.lines().next().unwrap_or("").split(',').collect();
        out.add(
            &name.replace(".csv", ".plt"),
            plot_script(name, title, &header),
        );
    }
    out.add(name, csv);
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("lgmm-out"))
}

fn base_config(cli: &Cli) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("seed".into(), json!(cli.seed));
    m.insert("out".into(), json!(out_dir(cli)));
    m.insert("threads".into(), json!(rayon::current_num_threads()));
    m
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Run<()> {
    let scheme = a.scheme.unwrap_or(a.manifold.default_scheme());
    let (n, dt) = steps(&a.time)?;
    let opts = GroupOptions {
        renormalize: a.renormalize,
    };
    let mut out = Outputs::new(&out_dir(cli));
    let title = format!("{} {} t={}", a.manifold, scheme, a.time.t);
    if a.full_paths {
        let paths = (0..a.paths as u64)
            .into_par_iter()
            .map(|i| {
                simulate_group_path(
                    a.manifold,
                    scheme,
                    a.time.t,
                    n,
                    SeedRecord::new(cli.seed, i),
                    opts,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ends: Vec<_> = paths.iter().map(|p| p.endpoint().clone()).collect();
        add_csv(
            &mut out,
            cli.plot,
            "endpoints.csv",
            &title,
            group_endpoints_csv(a.manifold, &ends),
        );
        add_csv(
            &mut out,
            cli.plot,
            "paths.csv",
            &title,
            group_paths_csv(a.manifold, &paths),
        );
    } else {
        let ends =
            simulate_group_ensemble(a.manifold, scheme, a.time.t, n, a.paths, cli.seed, opts)?;
        add_csv(
            &mut out,
            cli.plot,
            "endpoints.csv",
            &title,
            group_endpoints_csv(a.manifold, &ends),
        );
    }
    let mut c = base_config(cli);
    c.insert("manifold".into(), json!(a.manifold.name()));
    c.insert("scheme".into(), json!(scheme.name()));
    c.insert("paths".into(), json!(a.paths));
    c.insert("t".into(), json!(a.time.t));
    c.insert("dt".into(), json!(dt));
    c.insert("n_steps".into(), json!(n));
    c.insert("renormalize".into(), json!(a.renormalize));
    c.insert("full_paths".into(), json!(a.full_paths));
    c.insert("columns".into(), json!(group_labels(a.manifold)));
    let m = out.finish("simulate", c)?;
    println!(
        "{} paths of {} written; manifest {}",
        a.paths,
        a.manifold,
        m.display()
    );
    Ok(())
}

fn sde(cli: &Cli, a: &SdeArgs) -> Run<()> {
    let sys = SdeSystem::new(a.system);
    let (n, dt) = steps(&a.time)?;
    let start = sys.natural_start();
    let x0 =
        a.x0.clone()
            .unwrap_or_else(|| start[..sys.dimension()].to_vec());
    let mut out = Outputs::new(&out_dir(cli));
    let title = format!("{} t={}", a.system, a.time.t);
    let ens = integrate_ensemble(&sys, &x0, a.time.t, n, a.paths, cli.seed)?;
    add_csv(
        &mut out,
        cli.plot,
        "endpoints.csv",
        &title,
        sde_endpoints_csv(&ens),
    );
    if a.full_paths {
        let paths = (0..a.paths as u64)
            .into_par_iter()
            .map(|i| integrate_path(&sys, &x0, a.time.t, n, SeedRecord::new(cli.seed, i), 1.0))
            .collect::<Result<Vec<_>, _>>()?;
        add_csv(
            &mut out,
            cli.plot,
            "paths.csv",
            &title,
            sde_paths_csv(&paths),
        );
    }
    let mut c = base_config(cli);
    c.insert("system".into(), json!(a.system.name()));
    c.insert("x0".into(), json!(x0));
    c.insert("paths".into(), json!(a.paths));
    c.insert("t".into(), json!(a.time.t));
    c.insert("dt".into(), json!(dt));
    c.insert("n_steps".into(), json!(n));
    c.insert("full_paths".into(), json!(a.full_paths));
    c.insert("columns".into(), json!(sys.state_labels()));
    let m = out.finish("sde", c)?;
    println!(
        "{} paths of {} written; manifest {}",
        a.paths,
        a.system,
        m.display()
    );
    Ok(())
}

fn fpsolve(cli: &Cli, a: &FpArgs) -> Run<()> {
    let (domain, family, two_d) = (
        a.equation.domain(a.lambda_max),
        a.equation.manifold(),
        a.equation.dimension() == 2,
    );
    let ny = if two_d { a.ny.unwrap_or(a.nodes) } else { 0 };
    let grid = DensityGrid::zeros(domain, a.nodes, ny)?;
    let eps = a.eps.unwrap_or(5.0 * grid.hx().max(grid.hy()));
    let p0 = match a.init.as_str() {
        "uniform" => DensityGrid::uniform(domain, a.nodes, ny)?,
        "delta" | "mollified-delta" => mollified_delta(family, eps, &grid)?,
        other => {
            return Err(Failure::Config(format!(
                "unknown --init '{other}' (uniform or delta)"
            )))
        }
    };
    let dt = match a.dt {
        Some(dt) => dt,
        None => stability_bound(a.equation, &grid)?.unwrap_or(1e-4),
    };
    if !(a.t >= 0.0) {
        return Err(Failure::Config(format!(
            "--t must be non-negative, got {}",
            a.t
        )));
    }
    let opts = FpOptions {
        leakage_tolerance: f64::INFINITY,
        ..FpOptions::default()
    };
    let sol = solve_fp_with(a.equation, &p0, a.t, dt, opts)?;
    let mut out = Outputs::new(&out_dir(cli));
    add_csv(
        &mut out,
        cli.plot,
        "density.csv",
        &format!("{} t={}", a.equation, a.t),
        grid_csv(&sol.grid),
    );
    let mut c = base_config(cli);
    c.remove("seed");
    c.insert("equation".into(), json!(a.equation.name()));
    c.insert("nodes".into(), json!(a.nodes));
    c.insert("ny".into(), json!(ny));
    c.insert("init".into(), json!(a.init));
    c.insert("eps".into(), json!(eps));
    c.insert("t".into(), json!(a.t));
    c.insert("dt".into(), json!(sol.dt));
    c.insert("n_steps".into(), json!(sol.steps));
    c.insert("lambda_max".into(), json!(a.lambda_max));
    c.insert("leakage_tol".into(), json!(a.leakage_tol));
    c.insert("columns".into(), json!(grid_labels(domain)));
    c.insert("mass_drift".into(), json!(sol.mass_drift()));
    c.insert("leakage".into(), json!(sol.leakage));
    out.finish("fpsolve", c)?;
    println!("mass_drift {:e}", sol.mass_drift());
    println!("leakage {:e}", sol.leakage);
    println!("steps {} dt {:e}", sol.steps, sol.dt);
    if sol.leakage > a.leakage_tol {
        return Err(Error::Leakage {
            leakage: sol.leakage,
            tolerance: a.leakage_tol,
        }
        .into());
    }
    Ok(())
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Run<()> {
    let checks: Vec<CheckId> = if a.check == "all" {
        CheckId::ALL.to_vec()
    } else {
        vec![a.check.parse::<CheckId>()?]
    };
    let mut out = Outputs::new(&out_dir(cli));
    let mut failed = Vec::new();
    let mut configs = Vec::new();
    for id in checks {
        let d = CheckConfig::defaults(id);
        let cfg = CheckConfig {
            paths: a.paths.unwrap_or(d.paths),
            t: a.t.unwrap_or(d.t),
            dt: a.dt.unwrap_or(d.dt),
            seed: cli.seed,
            half_width: a.half_width.unwrap_or(d.half_width),
            bins: a.bins.unwrap_or(d.bins),
            threshold: a.threshold.unwrap_or(d.threshold),
            nodes: a.nodes.unwrap_or(d.nodes),
            lambda_max: a.lambda_max.unwrap_or(d.lambda_max),
            eps: a.eps.or(d.eps),
        };
        let report = run_check(id, &cfg)?;
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| Failure::Runtime(e.to_string()))?
            + "\n";
        out.add(&format!("{id}.json"), text);
        println!("{id}: {}", if report.pass { "pass" } else { "FAIL" });
        if !report.pass {
            failed.push(id.name());
        }
        configs.push(json!({ "check": id.name(), "config": cfg_json(&cfg) }));
    }
    let mut c = base_config(cli);
    c.insert("checks".into(), Value::Array(configs));
    out.finish("verify", c)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Statistical(format!(
            "failed: {}",
            failed.join(", ")
        )))
    }
}

fn cfg_json(c: &CheckConfig) -> Value {
    json!({
        "paths": c.paths, "t": c.t, "dt": c.dt, "seed": c.seed, "half_width": c.half_width,
        "bins": c.bins, "threshold": c.threshold, "nodes": c.nodes, "lambda_max": c.lambda_max, "eps": c.eps,
    })
}

fn dh(cli: &Cli, a: &DhArgs) -> Run<()> {
    let m = DhMeasure::new(a.family, a.param)?;
    let (lo, hi) = m.support();
    let mut v = json!({
        "family": a.family.name(),
        "parameter": a.param,
        "support": [lo, hi],
        "density": 1.0 / m.support_length(),
        "total_mass": m.total_mass(),
        "volume": m.volume(),
    });
    if let Some(x) = a.point {
        v["density_at_point"] = json!(m.normalized_density(x));
        v["point"] = json!(x);
    }
    let text =
        serde_json::to_string_pretty(&v).map_err(|e| Failure::Runtime(e.to_string()))? + "\n";
    print!("{text}");
    if let Some(dir) = &cli.out {
        let mut out = Outputs::new(dir);
        out.add("dh.json", text);
        let mut c = base_config(cli);
        c.remove("seed");
        c.insert("family".into(), json!(a.family.name()));
        c.insert("param".into(), json!(a.param));
        c.insert("point".into(), json!(a.point));
        out.finish("dh", c)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Run<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Sde(a) => sde(cli, a),
        Command::Fpsolve(a) => fpsolve(cli, a),
        Command::Verify(a) => verify(cli, a),
        Command::Dh(a) => dh(cli, a),
    }
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(m) | Failure::Runtime(m) | Failure::Statistical(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
