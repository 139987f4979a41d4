//! Command-line front end for the position-aided navigation observers.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use posnav::harness::{
    analyze, emit_artifacts, prepare, run_scenario, CheckWindows, ConfigFile, ObserverSelection,
    RunConfig, Summary,
};
use posnav::vehicle::{validate_assumptions, AssumptionViolation};
use posnav::Error;

#[derive(Parser)]
#[command(
    name = "posnav",
    version,
    about = "Position-aided inertial navigation observers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write run.csv, summary.json and plots.
    Simulate(RunArgs),
    /// Like `simulate`, with both observers.
    Compare(RunArgs),
    /// Print the theoretical gain conditions for a scenario.
    CheckBounds(CommonArgs),
    /// Check the trajectory assumptions of a scenario.
    Validate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config; omitted fields take the reference values.
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_end: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output directory [default: run.output_dir, else ./out].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    observer: Option<ObserverArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObserverArg {
    Proposed,
    Adhoc,
    Both,
}

impl From<ObserverArg> for ObserverSelection {
    fn from(o: ObserverArg) -> Self {
        match o {
            ObserverArg::Proposed => ObserverSelection::Proposed,
            ObserverArg::Adhoc => ObserverSelection::Adhoc,
            ObserverArg::Both => ObserverSelection::Both,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 3,
        Error::Io(_) | Error::Plot(_) => 1,
        _ => 2,
    }
}

fn load(args: &CommonArgs, observer: Option<ObserverSelection>) -> posnav::Result<RunConfig> {
    let mut file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(dt) = args.dt {
        file.scenario.dt = dt;
    }
    if let Some(t) = args.t_end {
        file.scenario.t_end = t;
    }
    if let Some(o) = observer {
        file.run.observer = o;
    }
    RunConfig::from_file(file)
}

fn simulate(args: &RunArgs, force_both: bool) -> posnav::Result<()> {
    let observer = if force_both {
        Some(ObserverSelection::Both)
    } else {
        args.observer.map(Into::into)
    };
    let cfg = load(&args.common, observer)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.file.run.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let log = run_scenario(&cfg)?;
    let checks = analyze(&log, CheckWindows::for_horizon(cfg.scenario.t_end));
    for o in &checks.observers {
        let [p, v, r, b] = o.final_errors;
        print!(
            "{:<9} final |p~| {p:.3e}  |v~| {v:.3e}  |R~| {r:.3e}  |b~| {b:.3e}",
            o.observer
        );
        match o.x_err_fit {
            Some(fit) => println!("  |x~| rate {:.4} (r2 {:.3})", fit.rate, fit.r_squared),
            None => println!(),
        }
    }
    let summary = Summary::new(&log, &cfg, checks);
    for path in emit_artifacts(&log, &summary, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn print_assumptions(cfg: &RunConfig) -> Vec<AssumptionViolation> {
    let report = validate_assumptions(&cfg.scenario, &cfg.assumption_grid());
    println!(
        "c0 = {:.6e}  (min |m_I x a_I|, at t = {})",
        report.c0, report.t_of_c0
    );
    println!("c1 = {:.6e}  (min |a_I|)", report.c1);
    println!("c2 = {:.6e}  (max |a_I|)", report.c2);
    println!("c3 = {:.6e}  (max |d a_I/dt|)", report.c3);
    println!("c4 = {:.6e}  (max |omega|)", report.c4);
    println!("c5 = {:.6e}  (|b_omega|)", report.c5);
    let violations = report.violations(Some(cfg.gains.c_hat2));
    for v in &violations {
        println!("violation: {v}");
    }
    violations
}

fn check_bounds(args: &CommonArgs) -> posnav::Result<()> {
    let cfg = load(args, None)?;
    print_assumptions(&cfg);
    let (ctx, _) = prepare(&cfg)?;
    println!(
        "E(M) eigenvalues in [{:.6e}, {:.6e}], minimum at t = {}",
        ctx.spectrum.lambda_min, ctx.spectrum.lambda_max, ctx.spectrum.t_min
    );
    println!(
        "P eigenvalues: beta1 = {:.6e}, beta2 = {:.6e}",
        ctx.lyapunov.beta1, ctx.lyapunov.beta2
    );
    let Some(b) = ctx.bounds else {
        println!("gain conditions undefined: E(M) is not positive definite");
        return Ok(());
    };
    println!("epsilon = {}", b.eps);
    println!("mu_max  = {:.6e}, mu = {:.6e}", b.mu_max, b.mu);
    println!(
        "alpha   = [{:.6e}, {:.6e}, {:.6e}, {:.6e}]",
        b.alpha1, b.alpha2, b.alpha3, b.alpha4
    );
    let verdict = |ok: bool| if ok { "met" } else { "NOT met" };
    println!(
        "k_R     = {} vs k_R_min = {:.6e}: {}",
        ctx.gains.k_r,
        b.k_r_min,
        verdict(b.k_r_ok)
    );
    println!(
        "gamma   = {} vs gamma_min = {:.6e}: {}",
        ctx.gains.gamma,
        b.gamma_min,
        verdict(b.gamma_ok)
    );
    Ok(())
}

/// Exit status 2 when the trajectory violates the observability assumptions.
fn validate(args: &CommonArgs) -> posnav::Result<bool> {
    let cfg = load(args, None)?;
    let violations = print_assumptions(&cfg);
    let fatal = violations
        .iter()
        .any(|v| !matches!(v, AssumptionViolation::SaturationTooLow { .. }));
    println!(
        "{}",
        if fatal {
            "assumptions violated"
        } else {
            "assumptions hold"
        }
    );
    Ok(!fatal)
}

fn report(e: &Error, config: Option<&Path>) -> ExitCode {
    match config {
        Some(p) => eprintln!("error ({}): {e}", p.display()),
        None => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, config) = match &cli.command {
        Command::Simulate(a) => (simulate(a, false).map(|_| true), a.common.config.as_deref()),
        Command::Compare(a) => (simulate(a, true).map(|_| true), a.common.config.as_deref()),
        Command::CheckBounds(a) => (check_bounds(a).map(|_| true), a.config.as_deref()),
        Command::Validate(a) => (validate(a), a.config.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => report(&e, config),
    }
}
