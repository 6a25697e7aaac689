//! Ground truth by exhaustive enumeration of a finite input support.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::constructor::InputDist;
use crate::error::{EvalError, OracleError};
use crate::lang::{interpret, Outcome, Program, Value};
use crate::probexpr::{Bindings, Datum, DistProgram, EvalCtx, Limits, ProbExpr, Support};

/// Exact output distribution of a program run on every input tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleDist {
    pub mass: BTreeMap<Value, BigRational>,
    /// Weight of the inputs on which the run exceeded its step budget.
    pub nonterm_mass: BigRational,
    /// Input weight outside a truncated support; zero unless truncation was asked for.
    pub unresolved: BigRational,
}

impl OracleDist {
    pub fn prob(&self, z: &Value) -> BigRational {
        self.mass.get(z).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn total(&self) -> BigRational {
        self.mass.values().fold(BigRational::zero(), |a, b| a + b)
    }

    /// `Σ mass + nonterm + unresolved`; exactly one for every run.
    pub fn weight(&self) -> BigRational {
        self.total() + &self.nonterm_mass + &self.unresolved
    }

    /// `Σ_{v <= z} mass(v)` over the integer outputs.
    pub fn cumulative(&self, z: &BigInt) -> BigRational {
        self.mass
            .iter()
            .filter(|(v, _)| v.as_int().is_some_and(|k| k <= z))
            .fold(BigRational::zero(), |a, (_, p)| a + p)
    }

    /// Weighted average of the integer outputs; `None` unless every input terminated
    /// with an integer result.
    pub fn expected_value(&self) -> Option<BigRational> {
        if !self.nonterm_mass.is_zero() || !self.unresolved.is_zero() {
            return None;
        }
        let mut acc = BigRational::zero();
        for (v, p) in &self.mass {
            acc += BigRational::from_integer(v.as_int()?.clone()) * p;
        }
        Some(acc)
    }

    /// Rows `value,numerator,denominator`, with a header.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["value", "numerator", "denominator"]).unwrap();
        for (v, p) in &self.mass {
            w.write_record([v.to_string(), p.numer().to_string(), p.denom().to_string()]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Weighted input tuples.
pub type Tuples = Vec<(Vec<Value>, BigRational)>;

/// Every input tuple with nonzero weight; the weights must sum to one.
pub fn enumerate_support(input: &InputDist, params: &Bindings) -> Result<Tuples, OracleError> {
    let (tuples, total) = enumerate(input, params, None)?;
    if !total.is_one() {
        return Err(OracleError::WeightNotOne { total: total.to_string() });
    }
    Ok(tuples)
}

/// Like [`enumerate_support`], but an unbounded variable ranges over `-t..=t`
/// (or up to the bound it has). Returns the tuples and the tail weight left out.
pub fn enumerate_truncated(input: &InputDist, params: &Bindings, t: i64) -> Result<(Tuples, BigRational), OracleError> {
    let (tuples, total) = enumerate(input, params, Some(BigInt::from(t)))?;
    let tail = BigRational::one() - &total;
    if tail.is_negative() {
        return Err(OracleError::WeightNotOne { total: total.to_string() });
    }
    Ok((tuples, tail))
}

fn enumerate(input: &InputDist, params: &Bindings, t: Option<BigInt>) -> Result<(Tuples, BigRational), OracleError> {
    let ctx = EvalCtx::new(&[], None, Limits::default());
    let mut out = Vec::new();
    let mut env = params.clone();
    let mut prefix = Vec::new();
    walk(&ctx, input, 0, &mut env, &mut prefix, &t, &mut out)?;
    let total = out.iter().fold(BigRational::zero(), |a, (_, w)| a + w);
    Ok((out, total))
}

fn walk(
    ctx: &EvalCtx<'_>,
    input: &InputDist,
    i: usize,
    env: &mut Bindings,
    prefix: &mut Vec<Value>,
    t: &Option<BigInt>,
    out: &mut Tuples,
) -> Result<(), OracleError> {
    if i == input.params.len() {
        let w = ctx.eval(&input.body, env)?;
        if w.is_negative() {
            return Err(OracleError::Eval(EvalError::Type(format!("negative input weight {w}"))));
        }
        if !w.is_zero() {
            out.push((prefix.clone(), w));
        }
        return Ok(());
    }
    let var = &input.params[i];
    for v in points(ctx, input, var, env, t)? {
        env.insert(var.clone(), Datum::from_value(&v));
        prefix.push(v);
        walk(ctx, input, i + 1, env, prefix, t, out)?;
        prefix.pop();
    }
    env.remove(var);
    Ok(())
}

fn points(ctx: &EvalCtx<'_>, input: &InputDist, var: &str, env: &Bindings, t: &Option<BigInt>) -> Result<Vec<Value>, OracleError> {
    let unbounded = || OracleError::UnboundedSupport(var.to_string());
    Ok(match ctx.support(&input.body, var, env)? {
        Support::Empty => Vec::new(),
        Support::Ints { lo, hi } => {
            let lo = lo.or_else(|| t.as_ref().map(|t| -t)).ok_or_else(unbounded)?;
            let hi = hi.or_else(|| t.clone()).ok_or_else(unbounded)?;
            let mut v = Vec::new();
            let mut k = lo;
            while k <= hi {
                v.push(Value::Int(k.clone()));
                k += 1;
            }
            v
        }
        Support::Lists { len: (llo, lhi), elems: (elo, ehi) } => {
            let alphabet: Vec<Value> = {
                let mut a = Vec::new();
                let mut k = elo;
                while k <= ehi {
                    a.push(Value::Int(k.clone()));
                    k += 1;
                }
                a
            };
            let lo = llo.max(BigInt::zero()).to_usize().ok_or_else(unbounded)?;
            let hi = lhi.to_usize().ok_or_else(unbounded)?;
            (lo..=hi)
                .flat_map(|n| crate::probexpr::all_lists(&alphabet, n))
                .map(Value::List)
                .collect()
        }
        Support::Unknown => return Err(unbounded()),
    })
}

/// Runs the entry function on every input tuple and accumulates the output weights.
pub fn run_oracle(program: &Program, input: &InputDist, params: &Bindings, step_budget: u64) -> Result<OracleDist, OracleError> {
    let tuples = enumerate_support(input, params)?;
    accumulate(program, tuples, BigRational::zero(), step_budget)
}

/// [`run_oracle`] over a truncated support; the left-out weight is reported as unresolved.
pub fn run_oracle_truncated(
    program: &Program,
    input: &InputDist,
    params: &Bindings,
    step_budget: u64,
    t: i64,
) -> Result<OracleDist, OracleError> {
    let (tuples, tail) = enumerate_truncated(input, params, t)?;
    accumulate(program, tuples, tail, step_budget)
}

fn accumulate(program: &Program, tuples: Tuples, unresolved: BigRational, step_budget: u64) -> Result<OracleDist, OracleError> {
    let mut mass: BTreeMap<Value, BigRational> = BTreeMap::new();
    let mut nonterm = BigRational::zero();
    for (args, w) in tuples {
        match interpret(program, &args, step_budget) {
            Ok(Outcome::Value(v)) => *mass.entry(v).or_insert_with(BigRational::zero) += w,
            Ok(Outcome::NonTerminated) => nonterm += w,
            Err(error) => {
                let inputs = args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
                return Err(OracleError::Program { inputs, error });
            }
        }
    }
    Ok(OracleDist {
        mass,
        nonterm_mass: nonterm,
        unresolved,
    })
}

/// One output value where two distributions disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discrepancy {
    pub z: Value,
    pub expected: BigRational,
    pub got: BigRational,
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z = {}: oracle {}, analysis {}", self.z, self.expected, self.got)
    }
}

/// Outcome of checking an analysis result against the oracle.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Comparison {
    pub checked: usize,
    pub discrepancies: Vec<Discrepancy>,
}

impl Comparison {
    pub fn ok(&self) -> bool {
        self.discrepancies.is_empty()
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return write!(f, "all {} values agree", self.checked);
        }
        writeln!(f, "{} of {} values differ", self.discrepancies.len(), self.checked)?;
        for d in &self.discrepancies {
            writeln!(f, "  {d}")?;
        }
        Ok(())
    }
}

/// Evaluates a distribution expression in `z` at one output value.
pub fn eval_at(dp: &DistProgram, expr: &ProbExpr, params: &Bindings, z: &Value) -> Result<BigRational, EvalError> {
    let ctx = EvalCtx::for_program(dp, Limits::default());
    let mut env = params.clone();
    env.insert(output_var(dp), Datum::from_value(z));
    ctx.eval(expr, &env)
}

/// Name of the output variable of the program's output function.
pub fn output_var(dp: &DistProgram) -> String {
    dp.output().params.first().cloned().unwrap_or_else(|| "z".into())
}

/// Exact per-value equality of `expr` and the oracle on `zs`.
pub fn compare(
    dp: &DistProgram,
    expr: &ProbExpr,
    oracle: &OracleDist,
    params: &Bindings,
    zs: &[Value],
) -> Result<Comparison, EvalError> {
    let mut report = Comparison::default();
    for z in zs {
        let got = eval_at(dp, expr, params, z)?;
        let expected = oracle.prob(z);
        report.checked += 1;
        if got != expected {
            report.discrepancies.push(Discrepancy { z: z.clone(), expected, got });
        }
    }
    Ok(report)
}

/// Checks `lower(z) <= oracle(z) <= upper(z)` on `zs`. With truncation, the
/// unresolved weight may sit on any output and widens the lower side.
pub fn compare_sandwich(
    oracle: &OracleDist,
    zs: &[Value],
    lower: impl Fn(&Value) -> BigRational,
    upper: impl Fn(&Value) -> BigRational,
) -> Comparison {
    let mut report = Comparison::default();
    for z in zs {
        let p = oracle.prob(z);
        let (lo, hi) = (lower(z), upper(z));
        report.checked += 1;
        if lo > &p + &oracle.unresolved {
            report.discrepancies.push(Discrepancy { z: z.clone(), expected: p.clone(), got: lo });
        }
        if hi < p {
            report.discrepancies.push(Discrepancy { z: z.clone(), expected: p, got: hi });
        }
    }
    report
}

/// Output values worth checking: everything the oracle saw plus `extra`.
pub fn outputs(oracle: &OracleDist, extra: impl IntoIterator<Item = Value>) -> Vec<Value> {
    let mut zs: Vec<Value> = oracle.mass.keys().cloned().collect();
    zs.extend(extra);
    zs.sort();
    zs.dedup();
    zs
}
