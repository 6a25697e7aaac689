use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use num_traits::{One, Zero};

use poa_core::approximator::{
    check_termination_weight, cumulative_bounds, expected_interval, expected_value, int_range, to_csv, SupportHint, Tail, Termination,
};
use poa_core::lang::Value;
use poa_core::oracle::{compare, compare_sandwich, output_var, outputs, run_oracle, run_oracle_truncated, OracleDist};
use poa_core::pipeline::{Analysis, Problem};
use poa_core::probexpr::{print_prob, Bindings, Datum};
use poa_core::simplifier::{Context, DEFAULT_BUDGET};

#[derive(Parser)]
#[command(name = "poa", version, about = "Output probability distributions of first-order functional programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the output distribution, optionally checking it against the oracle.
    Analyze(AnalyzeArgs),
    /// Enumerate the input support and print the exact output distribution as CSV.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    program: PathBuf,
    dist: PathBuf,
    /// Instantiate the parameters, e.g. `n=3,m=2`, and compare with the oracle.
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    check: Option<String>,
    /// Print the expected value or an interval for it.
    #[arg(long)]
    expect: bool,
    /// Write the evaluated distribution table to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Print the derivation.
    #[arg(long)]
    trace: bool,
    /// Rewrite-step budget.
    #[arg(long)]
    budget: Option<u64>,
    /// Interpreter call budget per input tuple.
    #[arg(long = "oracle-budget")]
    oracle_budget: Option<u64>,
    /// Extra assumption on the parameters, e.g. `n>=1`.
    #[arg(long)]
    assume: Vec<String>,
    /// Leave out the timestamp line.
    #[arg(long = "no-meta")]
    no_meta: bool,
    /// TOML file with defaults for the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    program: PathBuf,
    dist: PathBuf,
    /// Parameter values, e.g. `n=2,k=2`.
    #[arg(long, default_value = "")]
    bind: String,
    /// Interpreter call budget per input tuple.
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
    /// Range unbounded input variables over `-T..T`.
    #[arg(long)]
    truncate: Option<i64>,
}

/// Failure with the exit code it maps to.
enum Failure {
    Input(String),
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Oracle(args) => oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load(program: &Path, dist: &Path, assume: &[String]) -> Result<Problem, Failure> {
    let src = read(program)?;
    let dtext = read(dist)?;
    let assume: Vec<&str> = assume.iter().map(String::as_str).collect();
    Problem::parse(&src, &dtext, &assume).map_err(|e| Failure::Input(format!("{} / {}: {e}", program.display(), dist.display())))
}

fn parse_bindings(text: &str) -> Result<Bindings, Failure> {
    let mut out = Bindings::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Failure::Input(format!("binding `{part}` is not of the form name=value")))?;
        let r = BigRational::from_str(v.trim()).map_err(|_| Failure::Input(format!("`{v}` is not a number")))?;
        out.insert(k.trim().to_string(), Datum::Num(r));
    }
    Ok(out)
}

fn show_bindings(b: &Bindings) -> String {
    b.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

/// Flag defaults read from a TOML file; command-line flags win.
fn apply_config(args: &mut AnalyzeArgs) -> Result<(), Failure> {
    let Some(path) = &args.config else { return Ok(()) };
    let text = read(path)?;
    let table: toml::Table = text.parse().map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let bad = |key: &str| Failure::Input(format!("{}: `{key}` has the wrong type", path.display()));
    for (key, value) in &table {
        match key.as_str() {
            "check" if args.check.is_none() => args.check = Some(value.as_str().ok_or_else(|| bad(key))?.to_string()),
            "expect" => args.expect |= value.as_bool().ok_or_else(|| bad(key))?,
            "trace" => args.trace |= value.as_bool().ok_or_else(|| bad(key))?,
            "no_meta" | "no-meta" => args.no_meta |= value.as_bool().ok_or_else(|| bad(key))?,
            "csv" if args.csv.is_none() => args.csv = Some(PathBuf::from(value.as_str().ok_or_else(|| bad(key))?)),
            "budget" if args.budget.is_none() => args.budget = Some(value.as_integer().ok_or_else(|| bad(key))? as u64),
            "oracle_budget" | "oracle-budget" if args.oracle_budget.is_none() => {
                args.oracle_budget = Some(value.as_integer().ok_or_else(|| bad(key))? as u64)
            }
            "assume" => {
                let items = value.as_array().ok_or_else(|| bad(key))?;
                for item in items {
                    args.assume.push(item.as_str().ok_or_else(|| bad(key))?.to_string());
                }
            }
            "check" | "csv" | "budget" | "oracle_budget" | "oracle-budget" => {}
            other => return Err(Failure::Input(format!("{}: unknown key `{other}`", path.display()))),
        }
    }
    Ok(())
}

fn analyze(mut args: AnalyzeArgs) -> Result<(), Failure> {
    apply_config(&mut args)?;
    let problem = load(&args.program, &args.dist, &args.assume)?;
    let analysis = problem.analyze(args.budget.unwrap_or(DEFAULT_BUDGET));
    let mut out = String::new();
    if !args.no_meta {
        writeln!(out, "# poa {} at {}", env!("CARGO_PKG_VERSION"), chrono::Utc::now().to_rfc3339()).unwrap();
    }
    if args.trace {
        out.push_str(&analysis.derivation());
    }
    let z = output_var(&analysis.closed);
    let ctx = Context::for_program(&analysis.closed);
    let termination = check_termination_weight(&analysis.pbox.under, &z, &ctx);
    if analysis.is_closed() {
        writeln!(out, "status: closed").unwrap();
        writeln!(out, "{}", print_prob(&analysis.simplified.expr)).unwrap();
    } else {
        writeln!(out, "status: residual").unwrap();
    }
    if !analysis.is_closed() || termination == Termination::Unknown {
        writeln!(out, "over: {}", print_prob(&analysis.pbox.over)).unwrap();
        writeln!(out, "under: {}", print_prob(&analysis.pbox.under)).unwrap();
    }
    writeln!(out, "termination: {termination}").unwrap();
    if !analysis.unfolding.non_affine.is_empty() {
        let names: Vec<&str> = analysis.unfolding.non_affine.iter().map(String::as_str).collect();
        writeln!(out, "opaque: {}", names.join(", ")).unwrap();
    }
    let mut failed = false;
    if let Some(spec) = &args.check {
        let params = parse_bindings(spec)?;
        failed = check(&problem, &analysis, &params, &args, &mut out)?;
    } else if args.expect || args.csv.is_some() {
        let params = Bindings::new();
        instantiate(&analysis, &params, None, &args, &mut out)?;
    }
    print!("{out}");
    if failed {
        Err(Failure::Check)
    } else {
        Ok(())
    }
}

/// Output values to tabulate: the integer support of the over side widened a
/// little, plus whatever the oracle saw.
fn domain(analysis: &Analysis, params: &Bindings, oracle: Option<&OracleDist>) -> Vec<Value> {
    let mut zs: Vec<Value> = match analysis.pbox.support_hint(&analysis.closed, params) {
        SupportHint::Ints { lo, hi } if lo <= hi => int_range(&(lo - 2), &(hi + 2)),
        _ => Vec::new(),
    };
    if let Some(o) = oracle {
        zs = outputs(o, zs);
        let ints: Vec<_> = zs.iter().filter_map(|v| v.as_int().cloned()).collect();
        if let (Some(lo), Some(hi)) = (ints.iter().min(), ints.iter().max()) {
            if ints.len() == zs.len() {
                zs = int_range(lo, hi);
            }
        }
    }
    if zs.is_empty() {
        zs = int_range(&(-2).into(), &2.into());
    }
    zs
}

fn instantiate(analysis: &Analysis, params: &Bindings, oracle: Option<&OracleDist>, args: &AnalyzeArgs, out: &mut String) -> Result<(), Failure> {
    let zs = domain(analysis, params, oracle);
    let table = analysis.pbox.tabulate(&analysis.closed, params, &zs);
    let cum = cumulative_bounds(&table, Tail::Exclusive);
    if args.expect {
        let numeric = zs.iter().all(|v| v.as_int().is_some()) && !zs.is_empty();
        if !numeric {
            writeln!(out, "expected value: not numeric").unwrap();
        } else if analysis.pbox.exact {
            match expected_value(&analysis.closed, &analysis.simplified.expr, params, &zs) {
                Ok(e) => writeln!(out, "E = {e}").unwrap(),
                Err(e) => {
                    writeln!(out, "expected value refused: {e}").unwrap();
                    if let Ok(iv) = expected_interval(&cum) {
                        writeln!(out, "E in {iv}").unwrap();
                    }
                }
            }
        } else {
            match expected_interval(&cum) {
                Ok(iv) => writeln!(out, "E in {iv}").unwrap(),
                Err(e) => writeln!(out, "expected value: {e}").unwrap(),
            }
        }
    }
    if let Some(path) = &args.csv {
        fs::write(path, to_csv(&table, &cum)).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Runs the oracle at one instantiation and reports; true when a check failed.
fn check(problem: &Problem, analysis: &Analysis, params: &Bindings, args: &AnalyzeArgs, out: &mut String) -> Result<bool, Failure> {
    let budget = args.oracle_budget.unwrap_or(10_000);
    let oracle = run_oracle(&problem.program, &problem.input, params, budget).map_err(|e| Failure::Input(e.to_string()))?;
    let label = if params.is_empty() { "check".to_string() } else { format!("check {}", show_bindings(params)) };
    let zs = domain(analysis, params, Some(&oracle));
    let mut failed = false;
    if analysis.pbox.exact {
        let report = compare(&analysis.closed, &analysis.simplified.expr, &oracle, params, &zs).map_err(|e| Failure::Input(e.to_string()))?;
        write!(out, "{label}: {report}").unwrap();
        if report.ok() {
            out.push('\n');
        }
        failed |= !report.ok();
    } else {
        let dp = &analysis.closed;
        let report = compare_sandwich(
            &oracle,
            &zs,
            |z| analysis.pbox.under_at(dp, params, z),
            |z| analysis.pbox.over_at(dp, params, z),
        );
        let verdict = if report.ok() { "sandwich holds".to_string() } else { format!("sandwich fails\n{report}") };
        writeln!(out, "{label}: {verdict}").unwrap();
        failed |= !report.ok();
    }
    writeln!(out, "oracle nonterminating mass: {}", oracle.nonterm_mass).unwrap();
    if !oracle.nonterm_mass.is_zero() && check_termination_weight(&analysis.pbox.under, &output_var(&analysis.closed), &Context::for_program(&analysis.closed)) == Termination::Terminates {
        writeln!(out, "termination claim contradicted by the oracle").unwrap();
        failed = true;
    }
    if args.expect && !analysis.pbox.exact {
        if let Some(e) = oracle.expected_value() {
            writeln!(out, "oracle E = {e}").unwrap();
        }
    }
    instantiate(analysis, params, Some(&oracle), args, out)?;
    if oracle.weight() != BigRational::one() {
        failed = true;
    }
    Ok(failed)
}

fn oracle(args: OracleArgs) -> Result<(), Failure> {
    let problem = load(&args.program, &args.dist, &[])?;
    let params = parse_bindings(&args.bind)?;
    let dist = match args.truncate {
        Some(t) => run_oracle_truncated(&problem.program, &problem.input, &params, args.budget, t),
        None => run_oracle(&problem.program, &problem.input, &params, args.budget),
    }
    .map_err(|e| Failure::Input(e.to_string()))?;
    print!("{}", dist.to_csv());
    if !dist.nonterm_mass.is_zero() {
        eprintln!("nonterminating mass: {}", dist.nonterm_mass);
    }
    if !dist.unresolved.is_zero() {
        eprintln!("unresolved tail mass: {}", dist.unresolved);
    }
    Ok(())
}
