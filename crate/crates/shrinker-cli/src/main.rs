use clap::{Args, Parser, Subcommand};
use shrinker::exec::Execution;
use shrinker::soliton::Anchor;
use shrinker_cli::commands;
use shrinker_cli::config::{CarlemanConfig, GridConfig, RunConfig, SourceConfig};
use shrinker_cli::error::{CliError, CliResult, EXIT_CHECK_FAILED, EXIT_PASS};
use shrinker_cli::report::ReportBundle;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "shrinker", version, about = "Shrinking solitons asymptotic to cones: construction, flows and weight diagnostics")]
struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root; each command writes to `<root>/<command>/`.
    #[arg(long, global = true, env = "SHRINKER_OUT")]
    out: Option<PathBuf>,
    /// Run every kernel on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shoot, normalize and fit a soliton profile.
    Construct(ConstructArgs),
    /// Self-similar flow of a soliton and its identities.
    Flow(FlowArgs),
    /// Weight bounds, threshold scans and the inequality battery.
    Carleman(CarlemanArgs),
    /// Difference system between two flows from one cone.
    Diff(DiffArgs),
    /// The acceptance suite.
    VerifyAll(VerifyArgs),
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "s0")]
    s0: Option<f64>,
    #[arg(long)]
    s_min: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    /// Fit window as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    window: Option<Vec<f64>>,
    /// `cone` or `expansion`.
    #[arg(long)]
    anchor: Option<String>,
}

#[derive(Args)]
struct SourceArgs {
    #[arg(long)]
    n: Option<usize>,
    /// `1` selects the Gaussian soliton.
    #[arg(long)]
    alpha: Option<f64>,
    /// Profile CSV written by `construct`.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    x_min: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    #[arg(long)]
    tau_step: Option<f64>,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_delimiter = ',')]
    trajectory_r0: Option<Vec<f64>>,
    #[arg(long)]
    trajectory_s: Option<f64>,
    #[arg(long)]
    cone_b: Option<f64>,
    #[arg(long)]
    rh_min_label: Option<f64>,
}

#[derive(Args)]
struct CarlemanArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    a_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    rho_multiples: Option<Vec<f64>>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    battery: bool,
    #[arg(long)]
    battery_x_max: Option<f64>,
}

#[derive(Args)]
struct DiffArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "s0")]
    s0: Option<f64>,
    #[arg(long = "s0-factor")]
    s0_factor: Option<f64>,
    #[arg(long)]
    s_min: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    no_negative_control: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Criteria to run, e.g. `1,2,5`; all by default.
    #[arg(long, value_delimiter = ',')]
    criteria: Option<Vec<u8>>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_source(s: &mut SourceConfig, a: SourceArgs) {
    set(&mut s.n, a.n);
    set(&mut s.alpha, a.alpha);
    if a.profile.is_some() {
        s.profile = a.profile;
    }
}

fn apply_grid(g: &mut GridConfig, a: GridArgs) {
    set(&mut g.x_min, a.x_min);
    set(&mut g.x_max, a.x_max);
    set(&mut g.points, a.points);
    set(&mut g.taus, a.taus);
    set(&mut g.tau_step, a.tau_step);
}

fn apply_carleman(k: &mut CarlemanConfig, a: CarlemanArgs) {
    apply_source(&mut k.source, a.source);
    apply_grid(&mut k.grid, a.grid);
    set(&mut k.alphas, a.alphas);
    set(&mut k.deltas, a.deltas);
    set(&mut k.a_values, a.a_values);
    set(&mut k.rho_multiples, a.rho_multiples);
    set(&mut k.gamma, a.gamma);
    set(&mut k.battery_x_max, a.battery_x_max);
    k.battery |= a.battery;
}

fn parse_anchor(s: &str) -> CliResult<Anchor> {
    match s {
        "cone" => Ok(Anchor::Cone),
        "expansion" => Ok(Anchor::Expansion),
        other => Err(CliError::Config(format!("unknown anchor {other:?}; use cone or expansion"))),
    }
}

fn report(b: &ReportBundle) -> CliResult<i32> {
    let path = b.write()?;
    for c in b.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {} = {:e}", c.name, c.value);
    }
    println!("{} {}: {}", if b.passed() { "PASS" } else { "FAIL" }, b.command, path.display());
    Ok(if b.passed() { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

fn run(cli: Cli) -> CliResult<i32> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let root = cli.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default_policy() };
    match cli.command {
        Command::Construct(a) => {
            let c = &mut cfg.construct;
            set(&mut c.n, a.n);
            set(&mut c.alpha, a.alpha);
            set(&mut c.tol, a.tol);
            set(&mut c.rtol, a.rtol);
            if a.s0.is_some() {
                c.s0 = a.s0;
            }
            if a.s_min.is_some() {
                c.s_min = a.s_min;
            }
            if let Some(w) = a.window {
                c.window = [w[0], w[1]];
            }
            if let Some(s) = a.anchor {
                c.anchor = parse_anchor(&s)?;
            }
            cfg.validate()?;
            report(&commands::cmd_construct(&cfg, &root, exec)?)
        }
        Command::Flow(a) => {
            let f = &mut cfg.flow;
            apply_source(&mut f.source, a.source);
            apply_grid(&mut f.grid, a.grid);
            set(&mut f.trajectory_r0, a.trajectory_r0);
            set(&mut f.trajectory_s, a.trajectory_s);
            set(&mut f.cone_b, a.cone_b);
            set(&mut f.rh_min_label, a.rh_min_label);
            cfg.validate()?;
            report(&commands::cmd_flow(&cfg, &root, exec)?)
        }
        Command::Carleman(a) => {
            apply_carleman(&mut cfg.carleman, a);
            cfg.validate()?;
            report(&commands::cmd_carleman(&cfg, &root, exec)?)
        }
        Command::Diff(a) => {
            let d = &mut cfg.diff;
            set(&mut d.n, a.n);
            set(&mut d.alpha, a.alpha);
            set(&mut d.s0_factor, a.s0_factor);
            set(&mut d.s_min, a.s_min);
            if a.s0.is_some() {
                d.s0 = a.s0;
            }
            apply_grid(&mut d.grid, a.grid);
            d.negative_control &= !a.no_negative_control;
            cfg.validate()?;
            report(&commands::cmd_diff(&cfg, &root, exec)?)
        }
        Command::VerifyAll(a) => {
            set(&mut cfg.verify.criteria, a.criteria);
            cfg.validate()?;
            let (b, outcomes) = commands::cmd_verify_all(&cfg, &root, exec)?;
            for o in &outcomes {
                println!("{}", o.line());
            }
            report(&b)
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
