use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use subode::bench::{run_suite, scd, tolerance_sweep, write_csv, RunReport};
use subode::integrator::{solve, SolveConfig};
use subode::problems::{problem_by_name, OrderPolicy, Problem, SpringParams, PROBLEM_NAMES};
use subode::structural::{analyze, system_jacobian_pattern, Verdict};

#[derive(Parser)]
#[command(name = "subode", version, about = "Taylor-series ODE solver with sub-ODE standard functions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one problem and report the final state.
    Solve(SolveArgs),
    /// Print the code list of a problem.
    DumpCl {
        #[command(flatten)]
        problem: ProblemArgs,
        /// One JSON record per line instead of a table.
        #[arg(long)]
        jsonl: bool,
    },
    /// Structural analysis of the DAE induced by a problem's code list.
    Analyze {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Print the full signature matrix even for large problems.
        #[arg(long)]
        full: bool,
    },
    /// Tolerance sweep producing work-precision data.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// spring-pendulum, pleiades, brusselator or expneg.
    #[arg(long, default_value = "spring-pendulum")]
    problem: String,
    /// Parameter override `name=value` (spring: g, k, m, a; brusselator: N).
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Sets both absolute and relative tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    /// Fixed Taylor order (default: from the tolerances, or the problem's).
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Write the run as a one-row work-precision CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Loosest tolerance exponent: 10^-FROM.
    #[arg(long, default_value_t = 3)]
    from: i32,
    /// Tightest tolerance exponent: 10^-TO.
    #[arg(long, default_value_t = 13)]
    to: i32,
    #[arg(long, default_value_t = 1)]
    step: usize,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn build_problem(args: &ProblemArgs) -> Result<Problem> {
    let mut spring = SpringParams::default();
    let mut n = None;
    let mut rest = Vec::new();
    for kv in &args.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("expected NAME=VALUE, got `{kv}`"))?;
        let value: f64 = v.trim().parse().with_context(|| format!("bad value in `{kv}`"))?;
        match (args.problem.as_str(), k.trim()) {
            ("spring-pendulum" | "spring" | "A", "g") => spring.g = value,
            ("spring-pendulum" | "spring" | "A", "k") => spring.k = value,
            ("spring-pendulum" | "spring" | "A", "m") => spring.m = value,
            ("spring-pendulum" | "spring" | "A", "a") => spring.a = value,
            ("brusselator" | "C", "N") => {
                if value < 2.0 || value.fract() != 0.0 {
                    bail!("N must be an integer >= 2");
                }
                n = Some(value as usize);
            }
            (_, name) => rest.push((name.to_string(), value)),
        }
    }
    let mut problem = problem_by_name(&args.problem, spring, n)
        .ok_or_else(|| {
            anyhow!(
                "unknown problem `{}`; choose one of {}",
                args.problem,
                PROBLEM_NAMES.join(", ")
            )
        })?
        .context("tracing the right-hand side")?;
    for (name, value) in rest {
        problem.codelist.set_param(&name, value)?;
    }
    Ok(problem)
}

fn print_state(out: &mut impl Write, label: &str, x: &[f64]) -> io::Result<()> {
    write!(out, "{label}:")?;
    for v in x {
        write!(out, " {v:.17e}")?;
    }
    writeln!(out)
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let problem = build_problem(&args.problem)?;
    let t_end = args.t_end.unwrap_or(problem.t_span.1);
    let mut cfg = SolveConfig::new(problem.t_span.0, t_end, args.tol)
        .with_tols(args.atol.unwrap_or(args.tol), args.rtol.unwrap_or(args.tol));
    cfg.order = match (args.order, problem.order_policy) {
        (Some(p), _) | (None, OrderPolicy::Fixed(p)) => Some(p),
        (None, OrderPolicy::Formula) => None,
    };
    let sol = solve(&problem.codelist, &problem.ics, &cfg)?;
    let mut out = io::stdout().lock();
    writeln!(out, "problem: {}", problem.name)?;
    writeln!(out, "lines: {}  states: {}", problem.codelist.len(), problem.codelist.n_state())?;
    writeln!(out, "order: {}", sol.p)?;
    writeln!(out, "steps: {}/{} (accepted/failed)", sol.accepted, sol.failed)?;
    writeln!(out, "time_s: {:.6}", sol.elapsed.as_secs_f64())?;
    writeln!(out, "t_end: {t_end}")?;
    print_state(&mut out, "x_end", &sol.x_final)?;
    for (name, f) in &problem.invariants {
        let drift = sol
            .mesh_states()
            .iter()
            .map(|x| (f(x) - f(&problem.ics)).abs())
            .fold(0.0, f64::max);
        writeln!(out, "{name}: initial {:.17e}  max drift {drift:.3e}", f(&problem.ics))?;
    }
    if let Some(exact) = &problem.exact {
        let e = exact(t_end);
        writeln!(out, "scd vs exact: {:.2}", scd(&sol.x_final, &e))?;
    }
    if let Some(path) = args.csv {
        let report = RunReport {
            problem: problem.name.clone(),
            tol: cfg.atol.min(cfg.rtol),
            p: sol.p,
            scd: problem.exact.as_ref().map(|e| scd(&sol.x_final, &e(t_end))),
            steps_accepted: sol.accepted,
            steps_failed: sol.failed,
            time_s: sol.elapsed.as_secs_f64(),
            final_state: sol.x_final.clone(),
            error: None,
        };
        write_csv(&[report], File::create(&path)?)?;
    }
    Ok(())
}

fn cmd_analyze(args: ProblemArgs, full: bool) -> Result<()> {
    let problem = build_problem(&args)?;
    let a = analyze(&problem.codelist, &problem.ics, problem.t_span.0)?;
    let mut out = io::stdout().lock();
    let n = a.sigma.n();
    writeln!(out, "problem: {}  DAE size: {n}", problem.name)?;
    if full || n <= 30 {
        let labels = a.view.labels();
        writeln!(out, "signature matrix with code-list offsets:")?;
        write!(out, "{}", a.sigma.render(Some(&a.codelist_offsets), Some(&labels)))?;
    }
    writeln!(out, "Val: {}", a.val)?;
    writeln!(out, "HVT is diagonal: {}", a.hvt.is_diagonal())?;
    writeln!(out, "code-list offsets valid: {}", a.codelist_offsets.is_valid(&a.sigma))?;
    writeln!(out, "canonical c: {:?}", a.canonical_offsets.c)?;
    writeln!(out, "canonical d: {:?}", a.canonical_offsets.d)?;
    let pattern = system_jacobian_pattern(&a.view, &a.codelist_offsets);
    let nnz: usize = pattern.iter().map(|r| r.iter().filter(|&&b| b).count()).sum();
    let upper = (0..n).any(|i| (i + 1..n).any(|j| pattern[i][j]));
    writeln!(out, "system Jacobian: {nnz} structural nonzeros, upper part empty: {}", !upper)?;
    let verdict = match &a.verdict {
        Verdict::Valid { .. } => "valid (nonsingular Jacobian)".to_string(),
        Verdict::WeaklyValidUncertified => "weakly valid, not certified".to_string(),
        Verdict::Invalid { violations } => format!("invalid at {violations:?}"),
    };
    writeln!(out, "verdict: {verdict}")?;
    writeln!(out, "unit lower triangular Jacobian, diagonal HVT, valid offsets: {}", a.theorem_holds())?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let problem = build_problem(&args.problem)?;
    let policy = args.order.map_or(problem.order_policy, OrderPolicy::Fixed);
    let tols = tolerance_sweep(args.from, args.to, args.step.max(1));
    let res = run_suite(&problem, &tols, policy)?;
    match args.csv {
        Some(path) => write_csv(&res.reports, File::create(&path)?)?,
        None => write_csv(&res.reports, io::stdout().lock())?,
    }
    for r in res.reports.iter().filter(|r| r.error.is_some()) {
        eprintln!("tol {:e}: {}", r.tol, r.error.as_deref().unwrap_or_default());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::DumpCl { problem, jsonl } => {
            let p = build_problem(&problem)?;
            let text = if jsonl { p.codelist.dump_jsonl() } else { p.codelist.dump() };
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
        Cmd::Analyze { problem, full } => cmd_analyze(problem, full),
        Cmd::Sweep(a) => cmd_sweep(a),
    }
}
