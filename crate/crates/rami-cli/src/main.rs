mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use config::{Config, ConfigError};
use rami::harvest::{
    emit_field_csv, growth_integral, harvest_value, parse_field_csv, solve_state, GrowthFunction,
    HalfSpaceGrid, ScalarField,
};
use rami::irrigation::{emit_tree_csv, irrigation_cost, parse_tree_csv};
use rami::measures::DiscreteMeasure;
use rami::optimize::{
    branch_rescale, optimize_branches, optimize_roots, root_rescale, AnnealSchedule,
    BranchProblem, LatticeSpec, PayoffReport, RootProblem,
};
use rami::sunlight::{sunlight_total, uniform_quadrature, ProjectionGrid};
use rami::verify::{run_suite, SUITES};

#[derive(Parser)]
#[command(name = "rami", about = "Payoff functionals and shape optimization for ramified trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bracket the transport cost of a measure and write the witness tree
    Irrigate {
        /// Measure CSV (header x1..xd,mass)
        #[arg(long)]
        measure: PathBuf,
        /// Cost exponent in (0, 1]
        #[arg(long)]
        alpha: f64,
        /// Tree search budget in relocation sweeps
        #[arg(long, default_value_t = 300)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for tree.csv and report.json
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Evaluate the exposure functional of a measure
    Sunlight {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override one config key, e.g. --set sunlight.directions=128
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Solve the state equation under a measure and evaluate the harvest
    Harvest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Maximize a payoff functional over lattice measures
    Optimize {
        #[command(subcommand)]
        side: OptimizeSide,
    },
    /// Print the normalization map for a parameter set
    Rescale {
        #[command(subcommand)]
        side: RescaleSide,
    },
    /// Run named invariant check suites
    Verify {
        /// One of: measures, irrigation, sunlight, harvest, optimize, scaling
        #[arg(long)]
        suite: Option<String>,
    },
}

#[derive(Subcommand)]
enum OptimizeSide {
    /// Exposure minus transport cost, measures in the upper half-space
    Branches {
        #[arg(long)]
        config: PathBuf,
        /// Overrides branches.seed from the config
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Harvest minus transport cost, measures in the lower half-space
    Roots {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long = "set")]
        set: Vec<String>,
    },
}

#[derive(Subcommand)]
enum RescaleSide {
    /// Normalize intensity scale b and cost c to 1
    Branches {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    /// Normalize sigma, a, b to 1, rescaling the cost to c-tilde
    Roots {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
}

// Exit codes: 0 ok, 1 failed checks, 2 input error, 3 precondition error.
fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<rami::Error>() {
        return match e {
            rami::Error::Parse { .. } | rami::Error::Io(_) => 2,
            _ => 3,
        };
    }
    if err.downcast_ref::<ConfigError>().is_some() || err.downcast_ref::<std::io::Error>().is_some()
    {
        return 2;
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(failed_checks) if failed_checks == 0 => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> Result<usize> {
    init_threads()?;
    match cli.command {
        Command::Irrigate { measure, alpha, budget, seed, out } => {
            cmd_irrigate(&measure, alpha, budget, seed, &out)?;
        }
        Command::Sunlight { config, measure, out, set } => {
            cmd_sunlight(&load_config(&config, &set)?, &measure, &out)?;
        }
        Command::Harvest { config, measure, out, set } => {
            cmd_harvest(&load_config(&config, &set)?, &measure, &out)?;
        }
        Command::Optimize { side } => match side {
            OptimizeSide::Branches { config, seed, out, set } => {
                cmd_optimize_branches(&load_config(&config, &set)?, seed, &out)?;
            }
            OptimizeSide::Roots { config, seed, out, set } => {
                cmd_optimize_roots(&load_config(&config, &set)?, seed, &out)?;
            }
        },
        Command::Rescale { side } => cmd_rescale(side)?,
        Command::Verify { suite } => return cmd_verify(suite.as_deref()),
    }
    Ok(0)
}

/// RAMI_THREADS caps the rayon pool; unset leaves the rayon default.
fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RAMI_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| ConfigError(format!("RAMI_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(ConfigError("RAMI_THREADS must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("building the thread pool")?;
    }
    Ok(())
}

fn load_config(path: &Path, sets: &[String]) -> Result<Config> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = Config::parse(&text)?;
    cfg.apply_overrides(sets)?;
    Ok(cfg)
}

fn load_measure(path: &Path) -> Result<DiscreteMeasure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(DiscreteMeasure::parse_csv(&text)?)
}

fn print_report<T: Serialize>(report: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

/// Writes `text` to `out/name` and feeds it back through `reparse`, which
/// must reproduce the byte-identical emission.
fn write_verified(
    out: &Path,
    name: &str,
    text: &str,
    reparse: impl Fn(&str) -> Result<String>,
) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    let back = fs::read_to_string(&path)?;
    let again = reparse(&back).with_context(|| format!("re-parsing {}", path.display()))?;
    if again != text {
        return Err(rami::Error::Structure(format!(
            "emitted file {} does not round-trip through its parser",
            path.display()
        ))
        .into());
    }
    Ok(())
}

fn write_report<T: Serialize + for<'a> Deserialize<'a> + PartialEq>(
    out: &Path,
    report: &T,
) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(report)?;
    fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    let back: T = serde_json::from_str(&fs::read_to_string(&path)?)
        .with_context(|| format!("re-parsing {}", path.display()))?;
    if back != *report {
        return Err(rami::Error::Structure(format!(
            "emitted file {} does not round-trip through its parser",
            path.display()
        ))
        .into());
    }
    Ok(())
}

#[derive(Serialize, Deserialize, PartialEq)]
struct IrrigateReport {
    alpha: f64,
    atoms: usize,
    total_mass: f64,
    upper: f64,
    lower: f64,
    gap: f64,
}

fn cmd_irrigate(measure: &Path, alpha: f64, budget: usize, seed: u64, out: &Path) -> Result<()> {
    let mu = load_measure(measure)?;
    let bracket = irrigation_cost(&mu, alpha, budget, seed)?;
    let report = IrrigateReport {
        alpha,
        atoms: mu.atoms().len(),
        total_mass: mu.total_mass(),
        upper: bracket.upper,
        lower: bracket.lower,
        gap: bracket.gap(),
    };
    print_report(&report)?;
    write_report(out, &report)?;
    write_verified(out, "tree.csv", &emit_tree_csv(&bracket.tree), |s| {
        Ok(emit_tree_csv(&parse_tree_csv(s)?))
    })
}

#[derive(Serialize, Deserialize, PartialEq)]
struct SunlightReport {
    dim: usize,
    directions: usize,
    intensity: f64,
    quadrature_norm: f64,
    grid_h: f64,
    grid_extent: f64,
    atoms: usize,
    total_mass: f64,
    exposure: f64,
}

fn cmd_sunlight(cfg: &Config, measure: &Path, out: &Path) -> Result<()> {
    let mu = load_measure(measure)?;
    let k = cfg.usize("sunlight.directions", 64)?;
    let intensity = cfg.f64("sunlight.intensity", 1.0)?;
    let quad = uniform_quadrature(mu.dim(), k, |_| intensity)?;
    let h = cfg.require_f64("sunlight.grid_h")?;
    let grid = match cfg.f64_opt("sunlight.grid_extent")? {
        Some(extent) => ProjectionGrid::new(h, extent, mu.dim() - 1)?,
        None => ProjectionGrid::for_measure(&mu, h)?,
    };
    let exposure = sunlight_total(&mu, &quad, &grid)?;
    let report = SunlightReport {
        dim: mu.dim(),
        directions: k,
        intensity,
        quadrature_norm: quad.quadrature_norm(),
        grid_h: grid.h,
        grid_extent: grid.extent,
        atoms: mu.atoms().len(),
        total_mass: mu.total_mass(),
        exposure,
    };
    print_report(&report)?;
    write_report(out, &report)
}

#[derive(Serialize, Deserialize, PartialEq)]
struct HarvestReport {
    dim: usize,
    grid_l: f64,
    grid_h: f64,
    nodes: usize,
    sigma: f64,
    a: f64,
    b: f64,
    kappa: f64,
    m: f64,
    iterations: usize,
    residual: f64,
    total_mass: f64,
    harvest: f64,
    growth_integral: f64,
}

fn cmd_harvest(cfg: &Config, measure: &Path, out: &Path) -> Result<()> {
    let mu = load_measure(measure)?;
    let (f, sigma, a, b) = growth_params(cfg)?;
    let l = cfg.require_f64("harvest.grid_l")?;
    let h = cfg.require_f64("harvest.grid_h")?;
    let grid = HalfSpaceGrid::new(mu.dim(), l, h)?;
    let tol = cfg.f64("harvest.solve_tol", 1e-8)?;
    let max_iter = cfg.usize("harvest.solve_max_iter", 50_000)?;
    let sol = solve_state(&mu, &f, &grid, sigma, a, b, tol, max_iter)?;
    let report = HarvestReport {
        dim: mu.dim(),
        grid_l: l,
        grid_h: h,
        nodes: grid.node_count(),
        sigma,
        a,
        b,
        kappa: f.rate(),
        m: f.carrying_value(),
        iterations: sol.iterations,
        residual: sol.residual,
        total_mass: mu.total_mass(),
        harvest: harvest_value(&sol.field, &mu)?,
        growth_integral: growth_integral(&sol.field, &f, a, b),
    };
    print_report(&report)?;
    write_report(out, &report)?;
    write_field(out, &sol.field)
}

fn growth_params(cfg: &Config) -> Result<(GrowthFunction, f64, f64, f64)> {
    let kappa = cfg.f64("harvest.kappa", 1.0)?;
    let m = cfg.f64("harvest.m", 1.0)?;
    let f = GrowthFunction::logistic(kappa, m)?;
    Ok((f, cfg.f64("harvest.sigma", 1.0)?, cfg.f64("harvest.a", 1.0)?, cfg.f64("harvest.b", 1.0)?))
}

/// Field coordinates are derived from the grid spacing, which the parser
/// reconstructs only to rounding accuracy, so this round-trip compares the
/// parsed object instead of the emitted bytes.
fn write_field(out: &Path, field: &ScalarField) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("field.csv");
    let text = emit_field_csv(field);
    fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    let back = parse_field_csv(&fs::read_to_string(&path)?)
        .with_context(|| format!("re-parsing {}", path.display()))?;
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(1e-30);
    let ok = back.values() == field.values()
        && back.grid().dim() == field.grid().dim()
        && rel(back.grid().spacing(), field.grid().spacing()) <= 1e-9
        && rel(back.grid().half_width(), field.grid().half_width()) <= 1e-9;
    if !ok {
        return Err(rami::Error::Structure(format!(
            "emitted file {} does not round-trip through its parser",
            path.display()
        ))
        .into());
    }
    Ok(())
}

fn write_measure(out: &Path, mu: &DiscreteMeasure) -> Result<()> {
    write_verified(out, "measure.csv", &mu.emit_csv(), |s| {
        Ok(DiscreteMeasure::parse_csv(s)?.emit_csv())
    })
}

#[derive(Serialize, Deserialize, PartialEq)]
struct OptimizeReport {
    mode: String,
    alpha: f64,
    c: f64,
    seed: u64,
    accepted_moves: usize,
    atoms: usize,
    evaluation: PayoffReport,
    trace: Vec<f64>,
}

fn anneal_from(cfg: &Config, section: &str) -> Result<Option<AnnealSchedule>> {
    let t0 = cfg.f64_opt(&format!("{section}.anneal_t0"))?;
    let cooling = cfg.f64_opt(&format!("{section}.anneal_cooling"))?;
    match (t0, cooling) {
        (Some(t0), Some(cooling)) => Ok(Some(AnnealSchedule { t0, cooling })),
        (None, None) => Ok(None),
        _ => Err(ConfigError(format!(
            "{section}.anneal_t0 and {section}.anneal_cooling must be set together"
        ))
        .into()),
    }
}

fn cmd_optimize_branches(cfg: &Config, seed: Option<u64>, out: &Path) -> Result<()> {
    let alpha = cfg.require_f64("branches.alpha")?;
    let c = cfg.require_f64("branches.c")?;
    let dim = cfg.usize("branches.dim", 2)?;
    let k = cfg.usize("sunlight.directions", 64)?;
    let intensity = cfg.f64("sunlight.intensity", 1.0)?;
    let quad = uniform_quadrature(dim, k, |_| intensity)?;
    let grid = ProjectionGrid::new(
        cfg.require_f64("sunlight.grid_h")?,
        cfg.require_f64("sunlight.grid_extent")?,
        dim - 1,
    )?;
    let lattice = LatticeSpec {
        spacing: cfg.require_f64("branches.lattice_spacing")?,
        radius: cfg.require_f64("branches.lattice_radius")?,
    };
    let mut prob = BranchProblem::new(alpha, c, quad, grid, lattice)?;
    prob.mass_quantum = cfg.f64("branches.mass_quantum", prob.mass_quantum)?;
    prob.budget = cfg.usize("branches.budget", prob.budget)?;
    prob.tree_budget = cfg.usize("branches.tree_budget", prob.tree_budget)?;
    prob.seed = seed.unwrap_or(cfg.u64("branches.seed", prob.seed)?);
    prob.anneal = anneal_from(cfg, "branches")?;
    prob.validate()?;

    let (mu, evaluation, trace) = optimize_branches(&prob)?;
    let tree = irrigation_cost(&mu, alpha, prob.tree_budget, prob.seed)?.tree;
    let report = OptimizeReport {
        mode: "branches".into(),
        alpha,
        c,
        seed: prob.seed,
        accepted_moves: trace.len(),
        atoms: mu.atoms().len(),
        evaluation,
        trace,
    };
    print_report(&report)?;
    write_report(out, &report)?;
    write_measure(out, &mu)?;
    write_verified(out, "tree.csv", &emit_tree_csv(&tree), |s| {
        Ok(emit_tree_csv(&parse_tree_csv(s)?))
    })
}

fn cmd_optimize_roots(cfg: &Config, seed: Option<u64>, out: &Path) -> Result<()> {
    let alpha = cfg.require_f64("roots.alpha")?;
    let c = cfg.require_f64("roots.c")?;
    let dim = cfg.usize("roots.dim", 2)?;
    let (f, sigma, a, b) = growth_params(cfg)?;
    let grid = HalfSpaceGrid::new(
        dim,
        cfg.require_f64("harvest.grid_l")?,
        cfg.require_f64("harvest.grid_h")?,
    )?;
    let lattice = LatticeSpec {
        spacing: cfg.require_f64("roots.lattice_spacing")?,
        radius: cfg.require_f64("roots.lattice_radius")?,
    };
    let mut prob = RootProblem::new(alpha, c, a, b, sigma, f, grid, lattice)?;
    prob.mass_quantum = cfg.f64("roots.mass_quantum", prob.mass_quantum)?;
    prob.budget = cfg.usize("roots.budget", prob.budget)?;
    prob.tree_budget = cfg.usize("roots.tree_budget", prob.tree_budget)?;
    prob.seed = seed.unwrap_or(cfg.u64("roots.seed", prob.seed)?);
    prob.solve_tol = cfg.f64("harvest.solve_tol", prob.solve_tol)?;
    prob.solve_max_iter = cfg.usize("harvest.solve_max_iter", prob.solve_max_iter)?;
    prob.anneal = anneal_from(cfg, "roots")?;
    prob.validate()?;

    let (mu, field, evaluation, trace) = optimize_roots(&prob)?;
    let tree = irrigation_cost(&mu, alpha, prob.tree_budget, prob.seed)?.tree;
    let report = OptimizeReport {
        mode: "roots".into(),
        alpha,
        c,
        seed: prob.seed,
        accepted_moves: trace.len(),
        atoms: mu.atoms().len(),
        evaluation,
        trace,
    };
    print_report(&report)?;
    write_report(out, &report)?;
    write_measure(out, &mu)?;
    write_field(out, &field)?;
    write_verified(out, "tree.csv", &emit_tree_csv(&tree), |s| {
        Ok(emit_tree_csv(&parse_tree_csv(s)?))
    })
}

#[derive(Serialize, Deserialize, PartialEq)]
struct BranchRescaleReport {
    b: f64,
    c: f64,
    alpha: f64,
    dim: usize,
    lambda: f64,
    factor: f64,
}

#[derive(Serialize, Deserialize, PartialEq)]
struct RootRescaleReport {
    a: f64,
    b: f64,
    sigma: f64,
    c: f64,
    alpha: f64,
    dim: usize,
    lambda: f64,
    c_tilde: f64,
    factor: f64,
}

fn cmd_rescale(side: RescaleSide) -> Result<()> {
    match side {
        RescaleSide::Branches { b, c, alpha, dim } => {
            let (lambda, factor) = branch_rescale(b, c, alpha, dim)?;
            print_report(&BranchRescaleReport { b, c, alpha, dim, lambda, factor })
        }
        RescaleSide::Roots { a, b, sigma, c, alpha, dim } => {
            let (lambda, c_tilde, factor) = root_rescale(a, b, sigma, c, alpha, dim)?;
            print_report(&RootRescaleReport { a, b, sigma, c, alpha, dim, lambda, c_tilde, factor })
        }
    }
}

fn cmd_verify(suite: Option<&str>) -> Result<usize> {
    let suites: Vec<&str> = match suite {
        Some(s) => {
            if !SUITES.contains(&s) {
                return Err(ConfigError(format!(
                    "unknown suite '{s}'; available: {}",
                    SUITES.join(", ")
                ))
                .into());
            }
            vec![s]
        }
        None => SUITES.to_vec(),
    };
    let mut failed = 0;
    println!("{:<12} {:<52} {:<6} detail", "suite", "check", "result");
    for s in suites {
        for r in run_suite(s)? {
            let status = if r.passed { "PASS" } else { "FAIL" };
            if !r.passed {
                failed += 1;
            }
            println!("{:<12} {:<52} {:<6} {}", r.suite, r.name, status, r.detail);
        }
    }
    if failed > 0 {
        println!("{failed} check(s) failed");
    } else {
        println!("all checks passed");
    }
    Ok(failed)
}
