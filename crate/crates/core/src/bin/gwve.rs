//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gwve::chains::{b_run, d_run, lf_run, validate_trace, ChainRun, EtaKernel};
use gwve::environment::Environment;
use gwve::error::Error;
use gwve::eta::{a1_tail, a1_tail_product, eta_at_depth};
use gwve::genealogy::coalescent_times;
use gwve::montecarlo::par_map;
use gwve::tree::{condition_on_survival, SimOptions};
use gwve::verify::figure1::figure1_report;
use gwve::verify::suite::{run_env_suite, SuiteOptions};
use gwve::verify::{CheckReport, EnumOptions, Status};

const SCHEMAS: &str = "\
Output schemas (csv):
  simulate  run_id,K,A            A is ';'-joined
  chain     run_id,step,l,A,state A empty after the last individual; state ';'-joined
  verify    check,env_digest,metric,threshold,status,detail
  eta       depth,k,probability
  tail      n,closed_form,product[,linear_fractional]

Run r of a campaign draws from ChaCha8 seeded with --seed on stream r, so
--threads never changes the output.

Exit codes: 0 ok, 1 check failure, 2 configuration error, 3 degenerate
environment, 4 enumeration guard.";

#[derive(Parser)]
#[command(name = "gwve", version, about = "Genealogies of Galton-Watson trees in varying environment", after_help = SCHEMAS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trees conditioned on survival and record their coalescent point process.
    Simulate(SimulateArgs),
    /// Sample the backward chains directly.
    Chain(ChainArgs),
    /// Run the exact and statistical verification suites.
    Verify(VerifyArgs),
    /// Tabulate the laws of eta at each depth.
    Eta(Common),
    /// Tabulate P(A_1 > n).
    Tail(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Process {
    B,
    D,
    Lf,
}

#[derive(Args)]
struct Common {
    /// Environment file (JSON).
    #[arg(long)]
    env: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    samples: u64,
    /// Keep only the most recent N generations of the environment.
    #[arg(long)]
    horizon: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Also write each tree in preorder, one block per run.
    #[arg(long)]
    tree_out: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000_000)]
    max_nodes: usize,
}

#[derive(Args)]
struct ChainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Process::B)]
    process: Process,
    /// Stop a run after this many individuals.
    #[arg(long, default_value_t = 1_000_000)]
    max_individuals: usize,
    /// Check the pathwise transition invariants of every trace.
    #[arg(long)]
    validate: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Only reproduce the worked example, unless --env is also given.
    #[arg(long)]
    figure1: bool,
    /// Search for a non-Markov witness of the point-measure process.
    #[arg(long)]
    witness: bool,
    #[arg(long, default_value_t = 0.01)]
    witness_threshold: f64,
    #[arg(long, default_value_t = 1_000_000)]
    witness_samples: u64,
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    #[arg(long, default_value_t = 1e-8)]
    lf_tolerance: f64,
    /// Longest horizon for which exact laws are enumerated.
    #[arg(long, default_value_t = 3)]
    exact_horizon: usize,
    #[arg(long, default_value_t = 2_000_000)]
    max_states: usize,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Degenerate(_)) => 3,
        Some(Error::EnumerationGuard(_)) => 4,
        Some(Error::Mismatch(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Chain(a) => chain(a),
        Command::Verify(a) => verify(a),
        Command::Eta(c) => eta(c),
        Command::Tail(c) => tail(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn load_env(common: &Common) -> anyhow::Result<Environment> {
    let path = common.env.as_ref().context("--env is required")?;
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let env = Environment::from_json(&text)?;
    match common.horizon {
        None => Ok(env),
        Some(n) if n <= env.horizon() && n > 0 => Ok(env.recent(n)?),
        Some(n) => bail!("--horizon {n} outside 1..={}", env.horizon()),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_samples(common: &Common) -> anyhow::Result<()> {
    if common.samples == 0 {
        bail!("--samples must be at least 1");
    }
    Ok(())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct CppRow {
    run_id: u64,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "A")]
    a: Vec<u32>,
}

fn simulate(args: SimulateArgs) -> anyhow::Result<u8> {
    let common = &args.common;
    check_samples(common)?;
    let env = load_env(common)?;
    let opts = SimOptions { max_nodes: args.max_nodes, ..SimOptions::default() };
    let want_trees = args.tree_out.is_some();
    let runs = par_map(common.seed, common.samples, common.threads, |id, rng| {
        let (tree, _) = condition_on_survival(&env, rng, &opts)?;
        let cpp = coalescent_times(&tree)?;
        let dump = want_trees.then(|| tree.dump());
        Ok::<_, Error>((CppRow { run_id: id, k: cpp.survivors(), a: cpp.times().to_vec() }, dump))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, Error>>()?;

    let text = match common.format {
        Format::Csv => {
            let mut s = String::from("run_id,K,A\n");
            for (row, _) in &runs {
                writeln!(s, "{},{},{}", row.run_id, row.k, join(&row.a))?;
            }
            s
        }
        Format::Json => to_json(&runs.iter().map(|r| &r.0).collect::<Vec<_>>()),
    };
    write_out(common.out.as_deref(), &text)?;
    if let Some(path) = &args.tree_out {
        let mut s = String::new();
        for (row, dump) in &runs {
            writeln!(s, "# run {}", row.run_id)?;
            s.push_str(dump.as_deref().unwrap_or_default());
        }
        write_out(Some(path), &s)?;
    }

    let n = runs.len() as f64;
    let mean_k = runs.iter().map(|r| r.0.k as f64).sum::<f64>() / n;
    eprintln!("runs {}  mean K {:.6}", runs.len(), mean_k);
    eprintln!("n  P(A_1>n) simulated  exact  se");
    for depth in 1..=env.horizon() {
        let hits =
            runs.iter().filter(|r| r.0.a.first().is_none_or(|&a| a as usize > depth)).count();
        let p_hat = hits as f64 / n;
        let p = a1_tail(&env, depth)?;
        eprintln!("{depth}  {p_hat:.6}  {p:.6}  {:.6}", (p * (1.0 - p) / n).sqrt());
    }
    Ok(0)
}

#[derive(Serialize)]
struct TraceRecord {
    run_id: u64,
    step: usize,
    l: usize,
    #[serde(rename = "A")]
    a: Option<u32>,
    state: Vec<u32>,
}

fn chain(args: ChainArgs) -> anyhow::Result<u8> {
    let common = &args.common;
    check_samples(common)?;
    let env = load_env(common)?;
    if matches!(args.process, Process::Lf) && !env.is_linear_fractional() {
        bail!("--process lf needs a linear-fractional environment");
    }
    let kernel = EtaKernel::new(&env)?;
    let max = args.max_individuals.max(1);
    let runs = par_map(common.seed, common.samples, common.threads, |_, rng| match args.process {
        Process::B => b_run(&kernel, rng, max),
        Process::D => d_run(&kernel, rng, max),
        Process::Lf => lf_run(&env, rng, max),
    });
    let runs = runs.into_iter().collect::<Result<Vec<ChainRun>, Error>>()?;

    let mut records = Vec::new();
    let mut violations = 0usize;
    for (id, run) in runs.iter().enumerate() {
        let trace = run.trace();
        if args.validate && !matches!(args.process, Process::Lf) {
            if let Err(msg) = validate_trace(&trace, matches!(args.process, Process::B)) {
                eprintln!("run {id}: {msg}");
                violations += 1;
            }
        }
        if trace.is_empty() {
            // linear-fractional runs carry times only
            let mut l = 0;
            for (i, &a) in run.times.iter().enumerate() {
                l = l.max(a as usize);
                records.push(TraceRecord {
                    run_id: id as u64,
                    step: i + 1,
                    l,
                    a: Some(a),
                    state: Vec::new(),
                });
            }
        } else {
            for row in trace {
                records.push(TraceRecord {
                    run_id: id as u64,
                    step: row.step,
                    l: row.l,
                    a: row.time,
                    state: row.entries,
                });
            }
        }
    }
    let text = match common.format {
        Format::Csv => {
            let mut s = String::from("run_id,step,l,A,state\n");
            for r in &records {
                let a = r.a.map_or(String::new(), |a| a.to_string());
                writeln!(s, "{},{},{},{},{}", r.run_id, r.step, r.l, a, join(&r.state))?;
            }
            s
        }
        Format::Json => to_json(&records),
    };
    write_out(common.out.as_deref(), &text)?;

    let finished = runs.iter().filter(|r| r.terminated).count();
    let mean_k =
        runs.iter().filter(|r| r.terminated).map(|r| r.times.len() as f64 + 1.0).sum::<f64>()
            / finished.max(1) as f64;
    eprintln!("runs {}  finished {}  mean K {:.6}", runs.len(), finished, mean_k);
    if args.validate {
        eprintln!("trace violations {violations}");
        if violations > 0 {
            return Ok(1);
        }
    }
    Ok(0)
}

fn verify(args: VerifyArgs) -> anyhow::Result<u8> {
    let common = &args.common;
    let mut reports: Vec<CheckReport> = vec![figure1_report()];
    if !args.figure1 || common.env.is_some() {
        let env = load_env(common)?;
        let opts = SuiteOptions {
            tolerance: args.tolerance,
            lf_tolerance: args.lf_tolerance,
            witness: args.witness,
            witness_threshold: args.witness_threshold,
            witness_samples: args.witness_samples,
            seed: common.seed,
            threads: common.threads,
            exact_horizon: args.exact_horizon,
            enumeration: EnumOptions { max_states: args.max_states, ..EnumOptions::default() },
        };
        reports.extend(run_env_suite(&env, &opts)?);
    }
    let text = match common.format {
        Format::Csv => {
            let mut s = String::from("check,env_digest,metric,threshold,status,detail\n");
            for r in &reports {
                let status = serde_json::to_value(r.status)?;
                let detail = r.detail.as_deref().unwrap_or("").replace('"', "'");
                writeln!(
                    s,
                    "{},{},{:e},{:e},{},\"{}\"",
                    r.check,
                    r.env_digest,
                    r.metric,
                    r.threshold,
                    status.as_str().unwrap_or(""),
                    detail
                )?;
            }
            s
        }
        Format::Json => to_json(&reports),
    };
    write_out(common.out.as_deref(), &text)?;
    Ok(if reports.iter().all(|r| r.status == Status::Pass) { 0 } else { 1 })
}

#[derive(Serialize)]
struct EtaRow {
    depth: usize,
    k: usize,
    probability: f64,
}

fn eta(common: Common) -> anyhow::Result<u8> {
    let env = load_env(&common)?;
    let mut rows = Vec::new();
    for depth in 1..=env.horizon() {
        let (pmf, _) = eta_at_depth(&env, depth)?.materialize(1e-12);
        rows.extend(pmf.into_iter().enumerate().map(|(k, probability)| EtaRow {
            depth,
            k,
            probability,
        }));
    }
    let text = match common.format {
        Format::Csv => {
            let mut s = String::from("depth,k,probability\n");
            for r in &rows {
                writeln!(s, "{},{},{:e}", r.depth, r.k, r.probability)?;
            }
            s
        }
        Format::Json => to_json(&rows),
    };
    write_out(common.out.as_deref(), &text)?;
    Ok(0)
}

#[derive(Serialize)]
struct TailRow {
    n: usize,
    closed_form: f64,
    product: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    linear_fractional: Option<f64>,
}

fn tail(common: Common) -> anyhow::Result<u8> {
    let env = load_env(&common)?;
    let lf = env.is_linear_fractional();
    let mut rows = Vec::new();
    for n in 0..=env.horizon() {
        rows.push(TailRow {
            n,
            closed_form: if n == 0 { 1.0 } else { a1_tail(&env, n)? },
            product: if n == 0 { 1.0 } else { a1_tail_product(&env, n)? },
            linear_fractional: if lf {
                Some(if n == 0 { 1.0 } else { env.lf_a1_tail(n)? })
            } else {
                None
            },
        });
    }
    let text = match common.format {
        Format::Csv => {
            let mut s = String::from(if lf {
                "n,closed_form,product,linear_fractional\n"
            } else {
                "n,closed_form,product\n"
            });
            for r in &rows {
                write!(s, "{},{:e},{:e}", r.n, r.closed_form, r.product)?;
                if let Some(x) = r.linear_fractional {
                    write!(s, ",{x:e}")?;
                }
                s.push('\n');
            }
            s
        }
        Format::Json => to_json(&rows),
    };
    write_out(common.out.as_deref(), &text)?;
    Ok(0)
}
